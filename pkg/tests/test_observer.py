import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from platoon_lab.errors import TopologyError
from platoon_lab.model import PlatoonConfig, gains_from_b
from platoon_lab.observer import (
    ObserverState,
    VehicleState,
    ZERO_OBSERVER,
    compute_errors,
    control_input,
    observer_rhs,
    observer_rhs_matrix,
)
from platoon_lab.topology import build_mpf

CFG = PlatoonConfig()
GAINS = gains_from_b(4.0, 0.2, 0.5)


def desired_platoon(cfg, v0=20.0, a=0.0):
    return [VehicleState(-i * (cfg.h * v0 + cfg.D), v0, a) for i in range(cfg.N + 1)]


def call(fn, i, states, obs, cfg=CFG, gains=GAINS):
    topo = build_mpf(cfg.N, cfg.r)
    nb = topo.neighbors(i)
    return fn(i, states[i], [states[j] for j in nb], obs[i],
              [obs[j] for j in nb], topo.leader_link(i), gains, cfg)


def test_equilibrium_has_zero_derivative():
    states = desired_platoon(CFG)
    obs = [ZERO_OBSERVER] * (CFG.N + 1)
    for i in range(1, CFG.N + 1):
        assert call(observer_rhs, i, states, obs) == (0.0, 0.0, 0.0)


def test_wrong_neighbor_count():
    s = VehicleState(0, 0, 0)
    with pytest.raises(TopologyError):
        observer_rhs(3, s, [s, s], ZERO_OBSERVER, [ZERO_OBSERVER] * 2, True, GAINS, CFG)
    with pytest.raises(TopologyError):
        observer_rhs(4, s, [s] * 3, ZERO_OBSERVER, [ZERO_OBSERVER] * 3, True, GAINS, CFG)


finite = st.floats(-50, 50, allow_nan=False)
triple = st.tuples(finite, finite, finite)


@settings(max_examples=300, deadline=None)
@given(
    raw_states=st.lists(triple, min_size=8, max_size=8),
    raw_obs=st.lists(triple, min_size=8, max_size=8),
    b=st.floats(0.7, 15),
    alpha=st.floats(0.01, 5),
    i=st.integers(1, 7),
)
def test_scalar_form_matches_matrix_form(raw_states, raw_obs, b, alpha, i):
    gains = gains_from_b(b, alpha, CFG.tau)
    states = [VehicleState(*s) for s in raw_states]
    obs = [ZERO_OBSERVER] + [ObserverState(*o) for o in raw_obs[1:]]
    got = call(observer_rhs, i, states, obs, gains=gains)
    ref = call(observer_rhs_matrix, i, states, obs, gains=gains)
    scale = 1.0 + max(abs(x) for s in raw_states + raw_obs for x in s)
    np.testing.assert_allclose(got, ref, rtol=1e-10, atol=1e-10 * scale * b**3)


def test_control_input_is_minus_K_xhat():
    o = ObserverState(1.0, -2.0, 0.5)
    assert control_input(o, GAINS) == pytest.approx(-(32 * 1 - 24 * 2 + 5 * 0.5))


def test_errors_zero_at_desired_configuration():
    errs = compute_errors(desired_platoon(CFG), CFG)
    for e in errs:
        np.testing.assert_allclose(e.tilde, 0, atol=1e-12)
        np.testing.assert_allclose(e.bar, 0, atol=1e-12)


@given(st.lists(triple, min_size=8, max_size=8))
def test_bar_error_linking_identity(raw):
    # e_bar_i = (p~_i - p~_{i-1}) + h v~_{i-1}, with the leader's tilde errors zero
    states = [VehicleState(*s) for s in raw]
    errs = compute_errors(states, CFG)
    prev_p, prev_v = 0.0, 0.0
    for i, e in enumerate(errs, start=1):
        lhs = e.bar[0]
        rhs = e.tilde[0] - prev_p + CFG.h * prev_v
        assert lhs == pytest.approx(rhs, abs=1e-9 * (1 + max(map(abs, sum(raw, ())))))
        assert e.omega == pytest.approx(i * CFG.h * states[0].a)
        prev_p, prev_v = e.tilde[0], e.tilde[1]


def test_xi_filled_when_observers_given():
    states = desired_platoon(CFG)
    obs = [ZERO_OBSERVER] + [ObserverState(1.0, 2.0, 3.0)] * CFG.N
    errs = compute_errors(states, CFG, obs)
    np.testing.assert_allclose(errs[2].xi, (-1.0, -2.0, -3.0), atol=1e-12)
