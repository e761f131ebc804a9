"""Controller-parameter search and time-headway minimization.

Two procedures are provided:

* :func:`heuristic_search` picks ``(alpha, b)`` for a fixed headway using the
  main and complementary rules as a pre-filter, then accepts the first
  candidate whose frequency sweep certifies ``||H||_inf <= 1``.
* :func:`minimize_headway` fixes ``alpha = 2 tau`` and bisects on ``h``,
  sweeping ``b`` upward from its lower bound at each trial headway.
"""

from __future__ import annotations

import csv
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from platoon_lab.errors import InvalidParameterError
from platoon_lab.freqdomain import (
    HINF_TOL,
    FrequencyResponse,
    GridSpec,
    WConditionReport,
    build_polys,
    check_w_conditions,
    hinf_norm,
    w_coefficients,
)
from platoon_lab.model import gains_from_b


@dataclass(frozen=True)
class DesignSpec:
    r_bar: int = 3
    h_bar: float = 0.6
    tau: float = 0.5
    omega0: float = 100.0
    omega1: float = 1000.0
    k_max: int = 100
    tol: float = 0.001
    omega_min: float = 1e-3
    points_per_decade: int = 400
    max_rounds: int = 200

    def __post_init__(self):
        if self.omega1 < 10 * self.omega0:
            raise InvalidParameterError("omega1 must be at least 10 * omega0")
        if self.tol <= 0:
            raise InvalidParameterError("tol must be > 0")
        if self.k_max < 1:
            raise InvalidParameterError("k_max must be >= 1")
        if self.r_bar < 1:
            raise InvalidParameterError("r_bar must be >= 1")
        if not (self.h_bar > 0 and self.tau > 0):
            raise InvalidParameterError("h_bar and tau must be > 0")

    @property
    def grid(self) -> GridSpec:
        return GridSpec(
            omega_min=self.omega_min,
            omega_max=self.omega1,
            points_per_decade=self.points_per_decade,
        )


@dataclass(frozen=True)
class BisectionRound:
    round: int
    h_lo: float
    h_up: float
    h_tried: float
    b_found: float | None
    hinf: float
    accepted: bool


@dataclass(frozen=True)
class DesignResult:
    feasible: bool
    alpha: float | None
    b: float | None
    h: float | None
    k_max: int
    bisection_trace: list[float] = field(default_factory=list)
    rounds: list[BisectionRound] = field(default_factory=list)
    verification: FrequencyResponse | None = None
    w_report: WConditionReport | None = None
    note: str = ""

    @property
    def degenerate(self) -> bool:
        """Bisection could not refine anything: the answer is just ``h_bar``."""
        return len(self.bisection_trace) == 1


def main_rule_bounds(alpha: float, r: int, tau: float, h: float) -> tuple[float, float]:
    """``[b_lo, b_hi)`` from the W2 discriminant and ``d1 > 0``; empty if lo >= hi."""
    if alpha <= 0 or h <= 0:
        raise InvalidParameterError("alpha and h must be > 0")
    b_lo = 4.0 * alpha * (r - 1) / (9.0 * tau**2) + 8.0 / (9.0 * tau)
    return b_lo, 6.0 / h


def complementary_rule(alpha: float, b: float, tau: float, h: float) -> bool:
    """True when ``d2 < 0``, i.e. ``3 b tau^2 (h b - 5) + 2 tau - alpha < 0``."""
    if alpha <= 0:
        raise InvalidParameterError("alpha must be > 0")
    return 3.0 * b * tau**2 * (h * b - 5.0) + 2.0 * tau - alpha < 0


def verify(alpha: float, b: float, h: float, r: int, tau: float, grid: GridSpec | None = None):
    polys = build_polys(gains_from_b(b, alpha, tau), r, h, tau)
    return hinf_norm(polys, grid)


def default_alpha_grid(tau: float) -> list[float]:
    return [2.0 * tau, tau, 0.5 * tau, 0.2]


def heuristic_search(
    h: float,
    r: int,
    tau: float,
    spec: DesignSpec | None = None,
    alpha_grid: list[float] | None = None,
) -> DesignResult:
    spec = spec or DesignSpec(r_bar=r, h_bar=max(h, 0.6), tau=tau)
    if h > spec.h_bar:
        raise InvalidParameterError(f"h={h} exceeds h_bar={spec.h_bar}")
    alphas = alpha_grid or default_alpha_grid(tau)
    for alpha in alphas:
        b_lo, b_hi = main_rule_bounds(alpha, r, tau, h)
        b_lo = max(b_lo, math.nextafter(1.0 / (3.0 * tau), math.inf))
        if b_lo >= b_hi:
            continue
        step = (b_hi - b_lo) / spec.k_max
        for k in range(spec.k_max):
            b = b_lo + k * step
            if not complementary_rule(alpha, b, tau, h):
                continue
            resp = verify(alpha, b, h, r, tau, spec.grid)
            if resp.string_stable:
                w = w_coefficients(gains_from_b(b, alpha, tau), r, h, tau)
                return DesignResult(
                    feasible=True,
                    alpha=alpha,
                    b=b,
                    h=h,
                    k_max=spec.k_max,
                    verification=resp,
                    w_report=check_w_conditions(w, spec.omega0),
                )
    return DesignResult(
        feasible=False,
        alpha=None,
        b=None,
        h=h,
        k_max=spec.k_max,
        note="no (alpha, b) candidate passed the frequency sweep",
    )


def minimize_headway(spec: DesignSpec) -> DesignResult:
    """Bisection on ``h`` with an inner upward sweep on ``b``.

    The bracket starts at ``[0, h_bar]``. A feasible ``h`` becomes the new
    upper end and the previous verified value, and the loop stops once the
    next midpoint lies within ``tol`` of it. The returned ``h`` is that last
    verified value, not the midpoint.
    """
    tau, r = spec.tau, spec.r_bar
    alpha = 2.0 * tau
    b_lower = 4.0 * alpha * (r - 1) / (9.0 * tau**2) + 8.0 / (9.0 * tau)

    h, h_up, h_lo, h_prev = spec.h_bar, spec.h_bar, 0.0, 0.0
    best_b, best_resp = None, None
    tried: list[float] = []
    rounds: list[BisectionRound] = []

    for rnd in range(spec.max_rounds):
        tried.append(h)
        b_upper = 5.0 / h
        delta = (b_upper - b_lower) / spec.k_max
        found, found_resp, min_hinf = None, None, math.inf
        # an empty [b_lo, 5/h] interval leaves nothing to sweep
        n_candidates = spec.k_max + 1 if b_upper >= b_lower else 0
        for k in range(n_candidates):
            b = b_lower + k * delta
            if b <= 1.0 / (3.0 * tau):
                continue
            resp = verify(alpha, b, h, r, tau, spec.grid)
            min_hinf = min(min_hinf, resp.hinf)
            if resp.string_stable:
                found, found_resp = b, resp
                break
        rounds.append(
            BisectionRound(
                round=rnd,
                h_lo=h_lo,
                h_up=h_up,
                h_tried=h,
                b_found=found,
                hinf=found_resp.hinf if found_resp else min_hinf,
                accepted=found is not None,
            )
        )
        if found is not None:
            h_up = h
            h_prev = h
            best_b, best_resp = found, found_resp
            h = 0.5 * (h_lo + h_up)
            if abs(h - h_prev) <= spec.tol:
                return DesignResult(
                    feasible=True,
                    alpha=alpha,
                    b=best_b,
                    h=h_prev,
                    k_max=spec.k_max,
                    bisection_trace=tried,
                    rounds=rounds,
                    verification=best_resp,
                )
        else:
            if rnd == 0:
                return DesignResult(
                    feasible=False,
                    alpha=alpha,
                    b=None,
                    h=None,
                    k_max=spec.k_max,
                    bisection_trace=tried,
                    rounds=rounds,
                    note=f"h_bar={spec.h_bar} infeasible over the whole b sweep",
                )
            h_lo = h
            h = 0.5 * (h_lo + h_up)

    return DesignResult(
        feasible=best_b is not None,
        alpha=alpha,
        b=best_b,
        h=h_prev if best_b is not None else None,
        k_max=spec.k_max,
        bisection_trace=tried,
        rounds=rounds,
        verification=best_resp,
        note=f"stopped after max_rounds={spec.max_rounds}",
    )


def _worker_count() -> int:
    env = os.environ.get("PLATOON_LAB_THREADS")
    if env:
        return max(1, int(env))
    return min(8, os.cpu_count() or 1)


def feasible_region(
    h: float,
    r: int,
    tau: float,
    alphas,
    bs,
    grid: GridSpec | None = None,
) -> np.ndarray:
    """``hinf`` on an ``alpha x b`` grid (NaN where ``b <= 1/(3 tau)``)."""
    alphas = np.asarray(alphas, dtype=float)
    bs = np.asarray(bs, dtype=float)

    def cell(ab):
        alpha, b = ab
        if b <= 1.0 / (3.0 * tau):
            return math.nan
        return verify(alpha, b, h, r, tau, grid).hinf

    cells = [(a, b) for a in alphas for b in bs]
    with ThreadPoolExecutor(max_workers=_worker_count()) as pool:
        values = list(pool.map(cell, cells))
    return np.array(values).reshape(len(alphas), len(bs))


def region_is_feasible(hinf: np.ndarray) -> np.ndarray:
    return np.nan_to_num(hinf, nan=math.inf) <= 1.0 + HINF_TOL


DESIGN_TRACE_HEADER = ["round", "h_lo", "h_up", "h_tried", "b_found", "hinf", "accepted"]


def write_design_trace_csv(path, result: DesignResult) -> None:
    g = "{:.9g}".format
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(DESIGN_TRACE_HEADER)
        for rd in result.rounds:
            writer.writerow(
                [
                    rd.round,
                    g(rd.h_lo),
                    g(rd.h_up),
                    g(rd.h_tried),
                    "" if rd.b_found is None else g(rd.b_found),
                    g(rd.hinf),
                    int(rd.accepted),
                ]
            )
