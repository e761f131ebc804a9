"""Vehicle model, gain parametrization and constant-time-headway spacing.

Every vehicle obeys the third-order longitudinal model

    p' = v,   v' = a,   a' = (-a + u) / tau

with ``tau`` the engine time constant. Gains are parametrized by a single
eigenvalue magnitude ``b`` so that ``A - BK`` has a triple pole at ``-b``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from platoon_lab.errors import DesignConstraintError, InvalidParameterError


def _require_finite(**values: float) -> None:
    for name, value in values.items():
        if not math.isfinite(value):
            raise InvalidParameterError(f"{name} must be finite, got {value!r}")


@dataclass(frozen=True)
class DisturbanceSpec:
    """One full sine cycle ``A0 sin(w (t - t_d))`` applied to the leader."""

    amplitude: float = 10.0
    angular_frequency: float = 1.0
    start_time: float = 60.0

    def __post_init__(self):
        _require_finite(
            amplitude=self.amplitude,
            angular_frequency=self.angular_frequency,
            start_time=self.start_time,
        )
        if self.angular_frequency <= 0:
            raise InvalidParameterError("disturbance angular_frequency must be > 0")

    @property
    def duration(self) -> float:
        return 2.0 * math.pi / self.angular_frequency

    @property
    def end_time(self) -> float:
        return self.start_time + self.duration

    def value(self, t: float) -> float:
        if self.start_time <= t < self.end_time:
            return self.amplitude * math.sin(
                self.angular_frequency * (t - self.start_time)
            )
        return 0.0


@dataclass(frozen=True)
class PlatoonConfig:
    """Physical and scenario parameters of a homogeneous platoon.

    Defaults reproduce the seven-follower example used throughout the
    tests: tau = 0.5 s, h = 0.6 s, r = 3, v0 = 20 m/s, d = D = 5 m.
    ``disturbance=None`` runs the leader undisturbed.
    """

    N: int = 7
    tau: float = 0.5
    h: float = 0.6
    D: float = 5.0
    r: int = 3
    v0: float = 20.0
    d: float = 5.0
    disturbance: DisturbanceSpec | None = field(default_factory=DisturbanceSpec)

    def __post_init__(self):
        _require_finite(tau=self.tau, h=self.h, D=self.D, v0=self.v0, d=self.d)
        if self.N < 1:
            raise InvalidParameterError("N must be >= 1")
        if self.tau <= 0:
            raise InvalidParameterError("tau must be > 0")
        if self.h <= 0:
            raise InvalidParameterError("h must be > 0")
        if self.D < 0:
            raise InvalidParameterError("D must be >= 0")
        if self.d <= 0:
            raise InvalidParameterError("initial spacing d must be > 0")
        if not 1 <= self.r <= self.N:
            raise InvalidParameterError(f"need 1 <= r <= N, got r={self.r}, N={self.N}")


@dataclass(frozen=True)
class SystemMatrices:
    A: np.ndarray
    B: np.ndarray
    B1: np.ndarray

    def controllability(self) -> np.ndarray:
        return np.hstack([self.B, self.A @ self.B, self.A @ self.A @ self.B])


def build_system(tau: float) -> SystemMatrices:
    _require_finite(tau=tau)
    if tau <= 0:
        raise InvalidParameterError(f"tau must be > 0, got {tau}")
    A = np.array([[0.0, 1.0, 0.0], [0.0, 0.0, 1.0], [0.0, 0.0, -1.0 / tau]])
    B = np.array([[0.0], [0.0], [1.0 / tau]])
    B1 = np.array([[1.0], [0.0], [0.0]])
    return SystemMatrices(A=A, B=B, B1=B1)


@dataclass(frozen=True)
class Gains:
    """Controller gains ``K = [k1, k2, k3]`` and observer scalar ``alpha``.

    Usually built with :func:`gains_from_b`; direct construction is allowed
    for arbitrary ``k`` values (used to probe stability checks).
    """

    b: float
    alpha: float
    tau: float
    k1: float
    k2: float
    k3: float

    @property
    def alpha_bar(self) -> float:
        return self.alpha / self.tau

    @property
    def K(self) -> np.ndarray:
        return np.array([[self.k1, self.k2, self.k3]])

    @property
    def L(self) -> np.ndarray:
        # L = alpha * B^T
        return np.array([[0.0, 0.0, self.alpha / self.tau]])


def gains_from_b(b: float, alpha: float, tau: float) -> Gains:
    """Place all three eigenvalues of ``A - BK`` at ``-b``.

    Requires ``b > 1/(3 tau)`` so that ``k3 = 3 b tau - 1`` is positive.
    """
    _require_finite(b=b, alpha=alpha, tau=tau)
    if tau <= 0:
        raise InvalidParameterError(f"tau must be > 0, got {tau}")
    if alpha <= 0:
        raise InvalidParameterError(f"alpha must be > 0, got {alpha}")
    if b <= 1.0 / (3.0 * tau):
        raise DesignConstraintError(
            f"b={b} must exceed 1/(3 tau)={1.0 / (3.0 * tau):.6g} for k3 > 0"
        )
    return Gains(
        b=b,
        alpha=alpha,
        tau=tau,
        k1=b**3 * tau,
        k2=3.0 * b**2 * tau,
        k3=3.0 * b * tau - 1.0,
    )


def desired_gap(
    i: int, j: int, h: float, D: float, predecessor_speeds: Sequence[float]
) -> float:
    """Desired distance between vehicle ``i`` and vehicle ``i - j``.

    ``predecessor_speeds`` lists the speeds of vehicles ``i-1, ..., i-j`` in
    that order; each contributes ``h * v`` plus one standstill gap ``D``.
    """
    if not 1 <= j <= i:
        raise InvalidParameterError(f"need 1 <= j <= i, got i={i}, j={j}")
    if len(predecessor_speeds) < j:
        raise InvalidParameterError(
            f"need speeds of {j} predecessors, got {len(predecessor_speeds)}"
        )
    return sum(h * v for v in predecessor_speeds[:j]) + j * D
