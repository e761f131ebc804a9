"""Fixed-step closed-loop simulation and empirical stability metrics."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from platoon_lab.errors import (
    DivergenceError,
    InvalidParameterError,
    NotApplicableError,
)
from platoon_lab.freqdomain import is_internally_stable
from platoon_lab.model import Gains, PlatoonConfig
from platoon_lab.observer import (
    ObserverState,
    VehicleState,
    ZERO_OBSERVER,
    control_input,
    follower_rhs,
    leader_rhs,
    observer_rhs,
)
from platoon_lab.topology import Topology, build_mpf


DIVERGENCE_BOUND = 1e9


@dataclass(frozen=True)
class Scenario:
    """Initial condition: ``p_i = -i d``, speeds ``v0`` (or ``follower_speed``),
    zero accelerations and zero observers."""

    config: PlatoonConfig
    gains: Gains
    topology: Topology | None = None
    t_end: float = 120.0
    dt: float = 1e-3
    follower_speed: float | None = None

    def __post_init__(self):
        if self.topology is None:
            object.__setattr__(self, "topology", build_mpf(self.config.N, self.config.r))
        if not (self.dt > 0 and math.isfinite(self.dt)):
            raise InvalidParameterError(f"dt must be > 0, got {self.dt}")
        dist = self.config.disturbance
        if dist is not None and self.t_end <= dist.end_time:
            raise InvalidParameterError(
                f"t_end={self.t_end} must exceed disturbance end {dist.end_time:.6g}"
            )
        if self.t_end <= 0:
            raise InvalidParameterError("t_end must be > 0")
        if self.topology.N != self.config.N or self.topology.r != self.config.r:
            raise InvalidParameterError("topology does not match config N/r")

    def initial_state(self) -> np.ndarray:
        n = self.config.N + 1
        x = np.zeros(6 * n)
        x[:n] = -self.config.d * np.arange(n) + 0.0  # no -0.0 for the leader
        x[n : 2 * n] = self.config.v0
        if self.follower_speed is not None:
            x[n + 1 : 2 * n] = self.follower_speed
        return x

    def u0(self, t: float) -> float:
        dist = self.config.disturbance
        return 0.0 if dist is None else dist.value(t)


def _unpack(x: np.ndarray, n: int):
    states = [VehicleState(x[i], x[n + i], x[2 * n + i]) for i in range(n)]
    obs = [ObserverState(x[3 * n + i], x[4 * n + i], x[5 * n + i]) for i in range(n)]
    return states, obs


def _rhs(x: np.ndarray, u0: float, scenario: Scenario) -> np.ndarray:
    """Right-hand side of the stacked state for one snapshot."""
    cfg, gains, topo = scenario.config, scenario.gains, scenario.topology
    n = cfg.N + 1
    states, obs = _unpack(x, n)
    obs[0] = ZERO_OBSERVER
    dx = np.zeros_like(x)
    dleader = leader_rhs(states[0], u0, cfg.tau)
    dx[0], dx[n], dx[2 * n] = dleader
    for i in range(1, n):
        nbrs = topo.neighbors(i)
        dstate = follower_rhs(states[i], control_input(obs[i], gains), cfg.tau)
        dobs = observer_rhs(
            i,
            states[i],
            [states[j] for j in nbrs],
            obs[i],
            [obs[j] for j in nbrs],
            topo.leader_link(i),
            gains,
            cfg,
        )
        dx[i], dx[n + i], dx[2 * n + i] = dstate
        dx[3 * n + i], dx[4 * n + i], dx[5 * n + i] = dobs
    return dx


def closed_loop_rhs(x: np.ndarray, t: float, scenario: Scenario) -> np.ndarray:
    return _rhs(x, scenario.u0(t), scenario)


def affine_form(scenario: Scenario) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """``(M, c, e)`` with ``rhs(x, u0) == M x + c + e u0`` exactly.

    The closed loop is affine in the stacked state, so probing the snapshot
    right-hand side with unit vectors recovers it column by column.
    """
    m = 6 * (scenario.config.N + 1)
    zero = np.zeros(m)
    c = _rhs(zero, 0.0, scenario)
    M = np.empty((m, m))
    for k in range(m):
        ek = np.zeros(m)
        ek[k] = 1.0
        M[:, k] = _rhs(ek, 0.0, scenario) - c
    e = _rhs(zero, 1.0, scenario) - c
    return M, c, e


@dataclass(frozen=True)
class SimTrace:
    times: np.ndarray
    states: np.ndarray  # (T, N+1, 3): p, v, a; row 0 is the leader
    observers: np.ndarray  # (T, N+1, 3); row 0 stays zero
    spacing_errors: np.ndarray  # (T, N)
    xi_norms: np.ndarray  # (T, N)
    config: PlatoonConfig = field(repr=False)


def _trace_from_rows(times, xs, cfg: PlatoonConfig) -> SimTrace:
    n = cfg.N + 1
    X = np.asarray(xs)
    states = np.stack([X[:, :n], X[:, n : 2 * n], X[:, 2 * n : 3 * n]], axis=-1)
    observers = np.stack([X[:, 3 * n : 4 * n], X[:, 4 * n : 5 * n], X[:, 5 * n :]], axis=-1)
    p, v = states[..., 0], states[..., 1]
    e_bar = p[:, 1:] - p[:, :-1] + cfg.h * v[:, :-1] + cfg.D
    idx = np.arange(1, n)
    tilde = np.stack(
        [
            p[:, 1:] - p[:, :1] + idx * (cfg.h * v[:, :1] + cfg.D),
            v[:, 1:] - v[:, :1],
            states[:, 1:, 2] - states[:, :1, 2],
        ],
        axis=-1,
    )
    xi = np.linalg.norm(tilde - observers[:, 1:, :], axis=-1)
    return SimTrace(
        times=np.asarray(times),
        states=states,
        observers=observers,
        spacing_errors=e_bar,
        xi_norms=xi,
        config=cfg,
    )


def integrate(
    scenario: Scenario,
    *,
    allow_unstable: bool = False,
    record_every: int = 1,
    method: str = "affine",
) -> SimTrace:
    """Classical RK4 at fixed ``dt`` over ``[0, t_end]``.

    ``method="direct"`` calls the per-vehicle right-hand sides at every stage;
    ``"affine"`` (default) steps the algebraically identical matrix form and is
    orders of magnitude faster.
    """
    cfg = scenario.config
    if not allow_unstable:
        report = is_internally_stable(scenario.gains, scenario.topology, cfg.tau)
        if not report.stable:
            raise InvalidParameterError(
                "gains fail the internal-stability check; pass allow_unstable=True to run anyway"
            )
    if record_every < 1:
        raise InvalidParameterError("record_every must be >= 1")

    if method == "affine":
        M, c, e = affine_form(scenario)

        def f(x, t):
            return M @ x + c + e * scenario.u0(t)

    elif method == "direct":

        def f(x, t):
            return closed_loop_rhs(x, t, scenario)

    else:
        raise InvalidParameterError(f"unknown method {method!r}")

    dt = scenario.dt
    steps = int(round(scenario.t_end / dt))
    x = scenario.initial_state()
    times, rows = [0.0], [x.copy()]
    for k in range(steps):
        t = k * dt
        k1 = f(x, t)
        k2 = f(x + 0.5 * dt * k1, t + 0.5 * dt)
        k3 = f(x + 0.5 * dt * k2, t + 0.5 * dt)
        k4 = f(x + dt * k3, t + dt)
        x = x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        if not np.all(np.abs(x) < DIVERGENCE_BOUND):
            raise DivergenceError("state diverged", (k + 1) * dt)
        if (k + 1) % record_every == 0 or k + 1 == steps:
            times.append((k + 1) * dt)
            rows.append(x.copy())
    return _trace_from_rows(times, rows, cfg)


@dataclass(frozen=True)
class StabilityReport:
    settle_times: tuple[float, ...]
    peak_errors: tuple[float, ...]
    string_stable_empirical: bool
    converged: bool
    epsilon: float
    delta_rel: float
    pre_window: tuple[float, float]
    post_window: tuple[float, float]

    @property
    def settled_before_disturbance(self) -> bool:
        return all(math.isfinite(t) for t in self.settle_times)


def stability_report(
    trace: SimTrace,
    epsilon: float = 0.01,
    disturbance_window: tuple[float, float] | None = None,
    delta_rel: float = 1e-3,
) -> StabilityReport:
    """Settle times before the disturbance and peak errors after it.

    ``settle_times[i]`` is the first sample time from which ``|e_bar| < epsilon``
    holds until the pre-disturbance window closes (``inf`` if never).
    """
    t = trace.times
    if disturbance_window is None:
        dist = trace.config.disturbance
        start = dist.start_time if dist is not None else t[-1]
        disturbance_window = (start, t[-1])
    start, end = disturbance_window
    if not (t[0] <= start <= end <= t[-1] + 1e-12):
        raise InvalidParameterError(
            f"window {disturbance_window} outside trace [{t[0]}, {t[-1]}]"
        )
    err = np.abs(trace.spacing_errors)
    pre = t < start
    post = (t >= start) & (t <= end)

    settle = []
    pre_err = err[pre]
    pre_t = t[pre]
    for i in range(err.shape[1]):
        bad = np.flatnonzero(pre_err[:, i] >= epsilon)
        if bad.size == 0:
            settle.append(float(pre_t[0]) if pre_t.size else float(t[0]))
        elif bad[-1] + 1 < pre_t.size:
            settle.append(float(pre_t[bad[-1] + 1]))
        else:
            settle.append(math.inf)

    peaks = err[post].max(axis=0) if post.any() else np.zeros(err.shape[1])
    stable = all(peaks[i] <= peaks[i - 1] * (1.0 + delta_rel) for i in range(1, len(peaks)))
    converged = bool(np.all(err[-1] < epsilon))
    return StabilityReport(
        settle_times=tuple(settle),
        peak_errors=tuple(float(p) for p in peaks),
        string_stable_empirical=bool(stable),
        converged=converged,
        epsilon=epsilon,
        delta_rel=delta_rel,
        pre_window=(float(t[0]), float(start)),
        post_window=(float(start), float(end)),
    )


def convergence_order(report: StabilityReport, tie_tol: float = 0.0) -> list[int]:
    """Vehicle indices (1-based) sorted by settle time.

    Times falling in the same ``tie_tol`` bucket keep index order.
    """
    if not report.converged or not report.settled_before_disturbance:
        raise NotApplicableError("convergence order needs a converged report")

    def key(i):
        ts = report.settle_times[i - 1]
        return (math.floor(ts / tie_tol) if tie_tol > 0 else ts, i)

    return sorted(range(1, len(report.settle_times) + 1), key=key)


TRACE_HEADER = ["t", "veh", "p", "v", "a", "p_hat", "v_hat", "a_hat", "e_bar"]


def write_trace_csv(path, trace: SimTrace, stride: int = 1) -> None:
    """One row per (time, vehicle); the leader (veh 0) has empty observer and
    spacing-error fields."""
    g = "{:.9g}".format
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(TRACE_HEADER)
        for k in range(0, len(trace.times), stride):
            tk = f"{trace.times[k]:.6f}"
            p, v, a = trace.states[k, 0]
            writer.writerow([tk, 0, g(p), g(v), g(a), "", "", "", ""])
            for i in range(1, trace.states.shape[1]):
                p, v, a = trace.states[k, i]
                ph, vh, ah = trace.observers[k, i]
                e = trace.spacing_errors[k, i - 1]
                writer.writerow([tk, i, g(p), g(v), g(a), g(ph), g(vh), g(ah), g(e)])
