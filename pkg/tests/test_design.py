import numpy as np
import pytest

from platoon_lab.design import (
    DESIGN_TRACE_HEADER,
    DesignSpec,
    complementary_rule,
    feasible_region,
    heuristic_search,
    main_rule_bounds,
    minimize_headway,
    region_is_feasible,
    verify,
    write_design_trace_csv,
)
from platoon_lab.errors import InvalidParameterError
from platoon_lab.freqdomain import HINF_TOL, GridSpec

FAST = dict(points_per_decade=100)


def test_main_rule_examples():
    lo, hi = main_rule_bounds(0.2, 3, 0.5, 0.6)
    assert lo == pytest.approx(2.4889, abs=1e-4) and hi == pytest.approx(10.0)
    lo, hi = main_rule_bounds(1.0, 3, 0.5, 0.6)
    assert lo == pytest.approx(16 / 3) and hi == pytest.approx(10.0)
    assert main_rule_bounds(0.2, 1, 0.5, 0.6)[0] == main_rule_bounds(7.0, 1, 0.5, 0.6)[0]
    with pytest.raises(InvalidParameterError):
        main_rule_bounds(0.0, 3, 0.5, 0.6)


def test_complementary_rule_examples():
    assert complementary_rule(0.2, 4.0, 0.5, 0.6)
    assert complementary_rule(1.0, 8.0, 0.5, 0.6)  # hb < 5 with alpha = 2 tau
    assert not complementary_rule(1.0, 10.0, 0.5, 0.5)  # hb = 5 exactly
    assert not complementary_rule(0.2, 12.0, 0.5, 0.6)


def test_spec_validation():
    with pytest.raises(InvalidParameterError):
        DesignSpec(omega0=100.0, omega1=500.0)
    with pytest.raises(InvalidParameterError):
        DesignSpec(tol=0.0)
    with pytest.raises(InvalidParameterError):
        DesignSpec(k_max=0)


def test_heuristic_search_feasible_at_06():
    res = heuristic_search(0.6, 3, 0.5, DesignSpec(**FAST))
    assert res.feasible
    assert res.verification.hinf <= 1 + HINF_TOL
    assert res.w_report is not None
    assert verify(res.alpha, res.b, 0.6, 3, 0.5).hinf <= 1 + HINF_TOL
    # known members of the feasible set, one of them failing the W conditions
    assert verify(0.2, 4.0, 0.6, 3, 0.5).string_stable
    assert verify(1.0, 7.0, 0.6, 3, 0.5).string_stable


def test_heuristic_search_empty_interval():
    res = heuristic_search(3.0, 3, 0.5, DesignSpec(h_bar=3.0, **FAST))
    assert not res.feasible and res.b is None


def test_heuristic_search_rejects_h_above_bar():
    with pytest.raises(InvalidParameterError):
        heuristic_search(0.7, 3, 0.5, DesignSpec(h_bar=0.6))


@pytest.fixture(scope="module")
def bisection():
    return minimize_headway(DesignSpec(**FAST))


def test_bisection_is_valid(bisection):
    res = bisection
    assert res.feasible and res.alpha == 1.0
    assert res.bisection_trace[0] == 0.6
    for rd in res.rounds[1:]:
        assert rd.h_tried == pytest.approx(0.5 * (rd.h_lo + rd.h_up))
    for prev, rd in zip(res.rounds, res.rounds[1:]):
        assert rd.h_up <= prev.h_up and rd.h_lo >= prev.h_lo
    # round 0 tries h_bar itself; from then on the bracket halves every round
    for prev, rd in zip(res.rounds[1:], res.rounds[2:]):
        assert rd.h_up - rd.h_lo == pytest.approx(0.5 * (prev.h_up - prev.h_lo))
    assert verify(res.alpha, res.b, res.h, 3, 0.5).hinf <= 1 + HINF_TOL
    lo = 4 * res.alpha * 2 / (9 * 0.25) + 8 / 4.5
    assert lo <= res.b <= 5 / res.h


def test_bisection_tolerance_dominates():
    res = minimize_headway(DesignSpec(tol=0.6, **FAST))
    assert res.feasible and res.h == 0.6 and res.bisection_trace == [0.6]
    assert res.degenerate


def test_bisection_infeasible_h_bar():
    res = minimize_headway(DesignSpec(h_bar=1.5, **FAST))  # 5/h < b_lo
    assert not res.feasible and res.bisection_trace == [1.5]
    assert res.rounds[0].accepted is False


def test_design_trace_csv(tmp_path, bisection):
    p = tmp_path / "d.csv"
    write_design_trace_csv(p, bisection)
    lines = p.read_text().splitlines()
    assert lines[0] == ",".join(DESIGN_TRACE_HEADER)
    assert len(lines) == len(bisection.rounds) + 1
    assert lines[1].startswith("0,0,0.6,0.6,")


def test_feasible_region_thread_count_invariant(monkeypatch):
    grid = GridSpec(points_per_decade=50)
    alphas, bs = [0.2, 1.0], [0.5, 1.5, 4.0, 13.0]
    monkeypatch.setenv("PLATOON_LAB_THREADS", "1")
    one = feasible_region(0.6, 3, 0.5, alphas, bs, grid)
    monkeypatch.setenv("PLATOON_LAB_THREADS", "4")
    four = feasible_region(0.6, 3, 0.5, alphas, bs, grid)
    assert one.tobytes() == four.tobytes()
    assert np.isnan(one[:, 0]).all()  # b below 1/(3 tau)
    assert region_is_feasible(one)[0].tolist() == [False, False, True, False]
