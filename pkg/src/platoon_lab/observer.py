"""Distributed observer, control law, vehicle dynamics and error variables.

Each follower ``i`` runs an observer ``x_hat_i = (p_hat, v_hat, a_hat)`` of its
leader-following error and applies ``u_i = -K x_hat_i``. The observer only uses
relative quantities from the vehicles it hears (its ``r_i`` predecessors, the
leader included when ``i <= r``).
"""

from __future__ import annotations

from typing import NamedTuple, Sequence

import numpy as np

from platoon_lab.errors import TopologyError
from platoon_lab.model import Gains, PlatoonConfig, build_system


class VehicleState(NamedTuple):
    p: float
    v: float
    a: float


class ObserverState(NamedTuple):
    p_hat: float = 0.0
    v_hat: float = 0.0
    a_hat: float = 0.0


ZERO_OBSERVER = ObserverState()


class ErrorState(NamedTuple):
    tilde: tuple[float, float, float]
    bar: tuple[float, float, float]
    omega: float
    xi: tuple[float, float, float] | None = None


def leader_rhs(state: VehicleState, u0: float, tau: float) -> VehicleState:
    return VehicleState(state.v, state.a, (-state.a + u0) / tau)


def follower_rhs(state: VehicleState, u: float, tau: float) -> VehicleState:
    return VehicleState(state.v, state.a, (-state.a + u) / tau)


def control_input(observer: ObserverState, gains: Gains) -> float:
    return -(gains.k1 * observer.p_hat + gains.k2 * observer.v_hat + gains.k3 * observer.a_hat)


def _check_neighbors(i, neighbor_states, neighbor_obs, leader_link, config):
    expected = min(i, config.r)
    if len(neighbor_states) != expected or len(neighbor_obs) != expected:
        raise TopologyError(
            f"vehicle {i} expects {expected} neighbors, got "
            f"{len(neighbor_states)} states / {len(neighbor_obs)} observers"
        )
    if leader_link != (i <= config.r):
        raise TopologyError(f"leader link flag {leader_link} inconsistent for vehicle {i}")


def observer_rhs(
    i: int,
    self_state: VehicleState,
    neighbor_states: Sequence[VehicleState],
    self_obs: ObserverState,
    neighbor_obs: Sequence[ObserverState],
    leader_link: bool,
    gains: Gains,
    config: PlatoonConfig,
) -> ObserverState:
    """Observer derivative in scalar form.

    ``neighbor_states[l-1]`` is vehicle ``i - l``. When ``leader_link`` is set
    the last entry is the leader and its observer entry must be zero.
    """
    _check_neighbors(i, neighbor_states, neighbor_obs, leader_link, config)
    tau, h, D = config.tau, config.h, config.D
    k1, k2, k3 = gains.k1, gains.k2, gains.k3
    p, v, a = self_state
    ph, vh, ah = self_obs
    pred = neighbor_states[0]

    da = -(k1 * ph + k2 * vh + (1.0 + k3) * ah) / tau
    da += (
        k1 * (p - pred.p + h * pred.v + D - ph)
        + k2 * (v - pred.v - vh)
        + k3 * (a - pred.a - ah)
    ) / tau
    coupling = gains.alpha / tau**2
    for nb, nb_obs in zip(neighbor_states, neighbor_obs):
        da += coupling * (a - nb.a - (ah - nb_obs.a_hat))
    return ObserverState(vh, ah, da)


def observer_rhs_matrix(
    i: int,
    self_state: VehicleState,
    neighbor_states: Sequence[VehicleState],
    self_obs: ObserverState,
    neighbor_obs: Sequence[ObserverState],
    leader_link: bool,
    gains: Gains,
    config: PlatoonConfig,
) -> ObserverState:
    """Same derivative assembled from ``A``, ``B``, ``K`` and ``L = alpha B^T``.

    Kept as an independent route for cross-checking :func:`observer_rhs`.
    """
    _check_neighbors(i, neighbor_states, neighbor_obs, leader_link, config)
    sysm = build_system(config.tau)
    A, B, K, L = sysm.A, sysm.B, gains.K, gains.L
    h, D = config.h, config.D
    x = np.asarray(self_state, dtype=float)
    xh = np.asarray(self_obs, dtype=float)
    pred = np.asarray(neighbor_states[0], dtype=float)

    x_bar = x - pred + np.array([h * pred[1] + D, 0.0, 0.0])
    u = -(K @ xh)
    rhs = A @ xh + (B @ u) + B @ (K @ (x_bar - xh))
    total = np.zeros(3)
    for l, (nb, nb_obs) in enumerate(zip(neighbor_states, neighbor_obs), start=1):
        nb = np.asarray(nb, dtype=float)
        rel = x - nb + np.array([l * h * nb[1] + l * D, 0.0, 0.0])
        total += rel - (xh - np.asarray(nb_obs, dtype=float))
    rhs = rhs + B @ (L @ total)
    return ObserverState(*rhs)


def compute_errors(
    all_states: Sequence[VehicleState],
    config: PlatoonConfig,
    observers: Sequence[ObserverState] | None = None,
) -> list[ErrorState]:
    """Leader-following (tilde) and predecessor-follower (bar) errors.

    ``all_states[0]`` is the leader; the result holds vehicles ``1..N`` and
    ``observers`` (same indexing, entry 0 ignored) fills ``xi`` when given.
    """
    h, D = config.h, config.D
    p0, v0, a0 = all_states[0]
    out = []
    for i in range(1, len(all_states)):
        p, v, a = all_states[i]
        pp, pv, pa = all_states[i - 1]
        tilde = (p - p0 + i * (h * v0 + D), v - v0, a - a0)
        bar = (p - pp + h * pv + D, v - pv, a - pa)
        xi = None
        if observers is not None:
            ob = observers[i]
            xi = (tilde[0] - ob[0], tilde[1] - ob[1], tilde[2] - ob[2])
        out.append(ErrorState(tilde=tilde, bar=bar, omega=i * h * a0, xi=xi))
    return out
