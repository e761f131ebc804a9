import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from platoon_lab.errors import DesignConstraintError, InvalidParameterError
from platoon_lab.model import (
    DisturbanceSpec,
    PlatoonConfig,
    build_system,
    desired_gap,
    gains_from_b,
)


def test_system_matrices_shape_and_entries():
    s = build_system(0.5)
    assert s.A.shape == (3, 3) and s.B.shape == (3, 1) and s.B1.shape == (3, 1)
    assert s.A[2, 2] == -2.0
    assert s.B[2, 0] == 2.0
    assert np.linalg.matrix_rank(s.controllability()) == 3


def test_build_system_rejects_bad_tau():
    for tau in (0.0, -1.0, math.nan, math.inf):
        with pytest.raises(InvalidParameterError):
            build_system(tau)


def test_gains_b4_tau_half():
    g = gains_from_b(4.0, 0.2, 0.5)
    assert (g.k1, g.k2, g.k3) == (32.0, 24.0, 5.0)
    assert g.alpha_bar == pytest.approx(0.4)
    np.testing.assert_array_equal(g.L, [[0.0, 0.0, 0.4]])


def test_gains_reject_small_b():
    with pytest.raises(DesignConstraintError):
        gains_from_b(2.0 / 3.0, 0.2, 0.5)  # exactly 1/(3 tau)
    with pytest.raises(InvalidParameterError):
        gains_from_b(4.0, 0.0, 0.5)


def test_L_equals_alpha_B_transpose():
    g = gains_from_b(3.0, 0.7, 0.4)
    np.testing.assert_allclose(g.L, g.alpha * build_system(0.4).B.T)


@settings(max_examples=200, deadline=None)
@given(
    tau=st.floats(0.05, 3.0),
    bscale=st.floats(1.001, 40.0),
)
def test_triple_pole_placement(tau, bscale):
    b = bscale / (3 * tau)
    g = gains_from_b(b, 1.0, tau)
    s = build_system(tau)
    Acl = s.A - s.B @ g.K
    # Faddeev-LeVerrier coefficients, independent of any eigen-solver
    c2 = -np.trace(Acl)
    eye = np.eye(3)
    M2 = Acl + c2 * eye
    c1 = -np.trace(Acl @ M2) / 2
    M3 = Acl @ M2 + c1 * eye
    c0 = -np.trace(Acl @ M3) / 3
    np.testing.assert_allclose([c2, c1, c0], [3 * b, 3 * b**2, b**3], rtol=1e-12)


def test_desired_gap_sum():
    assert desired_gap(3, 1, 0.6, 5.0, [20.0]) == pytest.approx(17.0)
    assert desired_gap(3, 3, 0.6, 5.0, [20.0, 10.0, 0.0]) == pytest.approx(33.0)
    with pytest.raises(InvalidParameterError):
        desired_gap(2, 3, 0.6, 5.0, [1, 2, 3])
    with pytest.raises(InvalidParameterError):
        desired_gap(3, 2, 0.6, 5.0, [1.0])


def test_platoon_config_validation():
    PlatoonConfig()
    with pytest.raises(InvalidParameterError):
        PlatoonConfig(r=8)
    with pytest.raises(InvalidParameterError):
        PlatoonConfig(N=0)
    with pytest.raises(InvalidParameterError):
        PlatoonConfig(h=-0.1)
    with pytest.raises(InvalidParameterError):
        PlatoonConfig(tau=math.nan)


def test_disturbance_one_cycle():
    d = DisturbanceSpec(amplitude=10.0, angular_frequency=1.0, start_time=60.0)
    assert d.value(59.999) == 0.0
    assert d.value(60.0) == 0.0
    assert d.value(60.0 + math.pi / 2) == pytest.approx(10.0)
    assert d.value(60.0 + 3 * math.pi / 2) == pytest.approx(-10.0)
    assert d.value(d.end_time) == 0.0
    assert d.end_time == pytest.approx(60.0 + 2 * math.pi)
    with pytest.raises(InvalidParameterError):
        DisturbanceSpec(angular_frequency=0.0)
