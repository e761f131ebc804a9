"""String-stability transfer function, its decomposition and H-infinity norm.

The spacing-error propagation ``E_i(s) = H(s) E_{i-1}(s)`` has

    H = q1 T4 / (T1 T3 + T2 T4)

All polynomials are stored as coefficient arrays in ascending powers of
``s`` and evaluated with Horner's scheme at ``s = j omega``.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np
from numpy.polynomial import polynomial as P
from scipy.optimize import minimize_scalar

from platoon_lab.errors import PoleProximityError, SingularPointError
from platoon_lab.model import Gains, build_system
from platoon_lab.topology import Topology

#: slack used when comparing a measured norm against 1
HINF_TOL = 1e-9
POLE_EPS = 1e-300


def horner(coeffs: np.ndarray, s):
    """Evaluate an ascending-power polynomial at ``s`` (scalar or array)."""
    s = np.asarray(s)
    acc = np.zeros_like(s, dtype=complex)
    for c in coeffs[::-1]:
        acc = acc * s + c
    return acc


def _trim(c) -> np.ndarray:
    return np.trim_zeros(np.asarray(c, dtype=float), "b")


@dataclass(frozen=True)
class TransferPolys:
    T1: np.ndarray
    T2: np.ndarray
    T3: np.ndarray
    T4: np.ndarray
    T5: np.ndarray
    q1: np.ndarray
    ql: np.ndarray
    num: np.ndarray
    den: np.ndarray
    x_num: np.ndarray
    x_den: np.ndarray
    gains: Gains
    r: int
    h: float
    tau: float


def build_polys(gains: Gains, r: int, h: float, tau: float) -> TransferPolys:
    k1, k2, k3 = gains.k1, gains.k2, gains.k3
    ab = gains.alpha / tau
    T1 = np.array([2 * k1, 2 * k2, 1 + 2 * k3 + r * ab, tau])
    T2 = np.array([k1, k2, k3 + r * ab])
    T3 = np.array([0.0, 0.0, 1.0, tau])
    T4 = np.array([k1, k2, k3])
    T5 = np.array([k1, k2 - h * k1, k3 - h * k2, -h * k3])
    q1 = np.array([k1, k2 - k1 * h, ab + k3])
    ql = np.array([0.0, 0.0, ab])
    num = P.polymul(q1, T4)
    den = P.polyadd(P.polymul(T1, T3), P.polymul(T2, T4))
    # X = (den - num) / num, regrouped so every term of x_num carries a factor s
    x_num = P.polyadd(
        P.polymul([0, 0, 0, 0, 1], P.polymul([1, tau], [1 + r * ab, tau])),
        P.polymul([0, k1 * h, 2 + (r - 1) * ab, 2 * tau], T4),
    )
    x_den = P.polyadd(P.polymul([0, -k1 * h, ab], T4), P.polymul(T4, T4))
    return TransferPolys(
        T1=T1, T2=T2, T3=T3, T4=T4, T5=T5, q1=q1, ql=ql,
        num=_trim(num), den=_trim(den), x_num=_trim(x_num), x_den=_trim(x_den),
        gains=gains, r=r, h=h, tau=tau,
    )


def regrouped_denominator(polys: TransferPolys) -> np.ndarray:
    """``s^4(tau s+1)(tau s+1+r ab) + s[2 tau s^2 + (2+(r-1)ab)s + k1 h] T4 + q1 T4``."""
    return _trim(P.polyadd(polys.x_num, polys.x_den))


def h_response(polys: TransferPolys, omega):
    """Complex ``H(j omega)``; array-valued for array input."""
    s = 1j * np.asarray(omega, dtype=float)
    d = horner(polys.den, s)
    if np.any(np.abs(d) < POLE_EPS):
        raise PoleProximityError(f"denominator vanishes near omega={omega}")
    return horner(polys.num, s) / d


def h_magnitude(polys: TransferPolys, omega):
    if np.any(np.asarray(omega) < 0):
        raise ValueError("omega must be >= 0")
    mag = np.abs(h_response(polys, omega))
    return float(mag) if np.ndim(mag) == 0 else mag


@dataclass(frozen=True)
class GridSpec:
    omega_min: float = 1e-3
    omega_max: float = 1e3
    points_per_decade: int = 400
    refine_peaks: int = 3
    xtol: float = 1e-10

    def grid(self) -> np.ndarray:
        decades = math.log10(self.omega_max) - math.log10(self.omega_min)
        n = int(math.ceil(decades * self.points_per_decade)) + 1
        return np.logspace(math.log10(self.omega_min), math.log10(self.omega_max), n)


@dataclass(frozen=True)
class FrequencyResponse:
    omega: np.ndarray
    magnitude: np.ndarray
    hinf: float
    argmax_omega: float

    @property
    def string_stable(self) -> bool:
        return self.hinf <= 1.0 + HINF_TOL


def _local_maxima(mag: np.ndarray) -> list[int]:
    idx = [k for k in range(1, len(mag) - 1) if mag[k] >= mag[k - 1] and mag[k] >= mag[k + 1]]
    if mag[0] >= mag[1]:
        idx.append(0)
    if mag[-1] >= mag[-2]:
        idx.append(len(mag) - 1)
    return sorted(idx, key=lambda k: -mag[k])


def sweep_max(mag_fn, grid_spec: GridSpec) -> FrequencyResponse:
    """Dense log sweep of ``mag_fn`` followed by bounded refinement of the peaks."""
    omega = grid_spec.grid()
    mag = np.asarray(mag_fn(omega))
    best_w = float(omega[int(np.argmax(mag))])
    best = float(mag.max())
    for k in _local_maxima(mag)[: grid_spec.refine_peaks]:
        lo = omega[max(k - 1, 0)]
        hi = omega[min(k + 1, len(omega) - 1)]
        res = minimize_scalar(
            lambda w: -float(mag_fn(w)),
            bounds=(lo, hi),
            method="bounded",
            options={"xatol": grid_spec.xtol},
        )
        if -res.fun > best:
            best, best_w = float(-res.fun), float(res.x)
    return FrequencyResponse(omega=omega, magnitude=mag, hinf=best, argmax_omega=best_w)


def hinf_norm(polys: TransferPolys, grid_spec: GridSpec | None = None) -> FrequencyResponse:
    return sweep_max(lambda w: h_magnitude(polys, w), grid_spec or GridSpec())


@dataclass(frozen=True)
class XSample:
    omega: float
    re_num: float
    im_num: float
    re_den: float
    im_den: float
    Y: float
    Z: float

    @property
    def X(self) -> complex:
        return complex(self.re_num, self.im_num) / complex(self.re_den, self.im_den)

    @property
    def re_X(self) -> float:
        return self.Y / self.Z

    @property
    def H(self) -> complex:
        return 1.0 / (self.X + 1.0)


def x_decomposition(polys: TransferPolys, omega: float) -> XSample:
    if omega < 0:
        raise ValueError("omega must be >= 0")
    xn = complex(horner(polys.x_num, 1j * omega))
    xd = complex(horner(polys.x_den, 1j * omega))
    Z = xd.real**2 + xd.imag**2
    if Z == 0.0:
        raise SingularPointError(f"X denominator vanishes at omega={omega}")
    Y = xn.real * xd.real + xn.imag * xd.imag
    return XSample(omega, xn.real, xn.imag, xd.real, xd.imag, Y, Z)


@dataclass(frozen=True)
class WCoefficients:
    n1: float
    n2: float
    n3: float
    n4: float
    n5: float
    n6: float
    d0: float
    d1: float
    d2: float
    d3: float
    d4: float
    W2: float
    W4: float
    W6: float
    W8: float
    W10: float

    @property
    def omega0(self) -> float | None:
        """Largest omega with ``W8 + W10 omega^2 >= 0`` (needs W8 >= 0 > W10)."""
        if self.W8 >= 0 > self.W10:
            return math.sqrt(self.W8 / -self.W10)
        return None

    def Y(self, omega):
        w2 = np.asarray(omega, dtype=float) ** 2
        return w2 * (self.W2 + w2 * (self.W4 + w2 * (self.W6 + w2 * (self.W8 + w2 * self.W10))))

    def signs(self) -> dict[str, int]:
        return {k: int(np.sign(getattr(self, k))) for k in ("W2", "W4", "W6", "W8", "W10")}


def w_coefficients(gains: Gains, r: int, h: float, tau: float) -> WCoefficients:
    """Closed-form coefficients of ``Y = Re(Xn)Re(Xd) + Im(Xn)Im(Xd)`` in omega^2.

    ``n5`` uses the unscaled ``alpha`` (``tau * alpha_bar``); that is the
    variant consistent with the polynomial route in :func:`x_decomposition`.
    """
    k1, k2, k3 = gains.k1, gains.k2, gains.k3
    alpha = gains.alpha
    ab = alpha / tau
    n1 = h * k1**2
    n2 = -2 * k1 - h * k1 * k2 - ab * k1 * (r - 1)
    n3 = -2 * k1 * tau - 2 * k2 - h * k1 * k3 - ab * k2 * (r - 1)
    n4 = 2 * k2 * tau + 2 * k3 + 1 + ab * r + ab * k3 * (r - 1)
    n5 = 2 * tau + alpha * r + 2 * k3 * tau
    n6 = -(tau**2)
    d0 = k1**2
    d1 = k1 * (2 * k2 - h * k1)
    d2 = -(k2**2) - 2 * k1 * k3 + h * k1 * k2 - ab * k1
    d3 = -k3 * (2 * k2 - h * k1) - ab * k2
    d4 = k3**2 + ab * k3
    return WCoefficients(
        n1=n1, n2=n2, n3=n3, n4=n4, n5=n5, n6=n6,
        d0=d0, d1=d1, d2=d2, d3=d3, d4=d4,
        W2=d0 * n2 + d1 * n1,
        W4=d0 * n4 + d1 * n3 + d2 * n2 + d3 * n1,
        W6=d0 * n6 + d1 * n5 + d2 * n4 + d3 * n3 + d4 * n2,
        W8=d2 * n6 + d3 * n5 + d4 * n4,
        W10=d4 * n6,
    )


@dataclass(frozen=True)
class WConditionReport:
    W2_ok: bool
    W4_ok: bool
    W6_ok: bool
    W8_band_ok: bool
    omega0_required: float
    omega0: float | None

    @property
    def satisfied(self) -> bool:
        return self.W2_ok and self.W4_ok and self.W6_ok and self.W8_band_ok


def check_w_conditions(w: WCoefficients, omega0_required: float) -> WConditionReport:
    """Sufficient conditions for ``Y >= 0`` on ``[0, omega0_required]``."""
    # W8 + W10 w^2 is affine in w^2: checking both interval ends is exact
    band = w.W8 >= 0 and w.W8 + w.W10 * omega0_required**2 >= 0
    return WConditionReport(
        W2_ok=w.W2 >= 0,
        W4_ok=w.W4 >= 0,
        W6_ok=w.W6 >= 0,
        W8_band_ok=band,
        omega0_required=omega0_required,
        omega0=w.omega0,
    )


def routh_hurwitz_cubic(a2: float, a1: float, a0: float) -> bool:
    """Hurwitz test for the monic cubic ``s^3 + a2 s^2 + a1 s + a0``."""
    return a2 > 0 and a1 > 0 and a0 > 0 and a2 * a1 > a0


@dataclass(frozen=True)
class InternalStabilityReport:
    base_stable: bool
    per_lii: dict[int, bool]
    cubics: dict[int, tuple[float, float, float]]

    @property
    def stable(self) -> bool:
        return self.base_stable and all(self.per_lii.values())


def closed_loop_cubic(gains: Gains, lii: float, tau: float) -> tuple[float, float, float]:
    """``(a2, a1, a0)`` of the characteristic polynomial of ``A - BK - lii B L``."""
    a2 = (1 + gains.k3) / tau + lii * gains.alpha / tau**2
    return a2, gains.k2 / tau, gains.k1 / tau


def is_internally_stable(gains: Gains, topology: Topology, tau: float) -> InternalStabilityReport:
    base = routh_hurwitz_cubic(*closed_loop_cubic(gains, 0, tau))
    per, cubics = {}, {}
    for lii in sorted(set(topology.predecessor_counts)):
        cubics[lii] = closed_loop_cubic(gains, lii, tau)
        per[lii] = routh_hurwitz_cubic(*cubics[lii])
    return InternalStabilityReport(base_stable=base, per_lii=per, cubics=cubics)


def closed_loop_matrix(gains: Gains, lii: float, tau: float) -> np.ndarray:
    sysm = build_system(tau)
    return sysm.A - sysm.B @ gains.K - lii * sysm.B @ gains.L


def alt_h1_magnitude(gains: Gains, r: int, h: float, tau: float, omega):
    """Magnitude of the error transfer obtained when vehicle 1 copies its exact
    leader error into the observer instead of estimating it. Used as a
    negative control: it equals 2 at DC.
    """
    polys = build_polys(gains, r, h, tau)
    w = np.asarray(omega, dtype=float)
    if np.any(w < 0):
        raise ValueError("omega must be >= 0")
    s = 1j * w
    d = horner(polys.den, s)
    if np.any(np.abs(d) < POLE_EPS):
        raise PoleProximityError(f"denominator vanishes near omega={omega}")
    n = gains.alpha * w**2 * horner(polys.T4, s) + horner(polys.T1, s) * horner(polys.T5, s)
    mag = np.abs(n / d)
    return float(mag) if np.ndim(mag) == 0 else mag


def write_bode_csv(path, response: FrequencyResponse) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["omega", "mag"])
        for w, m in zip(response.omega, response.magnitude):
            writer.writerow([f"{w:.9g}", f"{m:.9g}"])

