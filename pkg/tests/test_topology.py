import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from platoon_lab.errors import InvalidParameterError
from platoon_lab.topology import build_mpf


def test_smallest_platoon():
    t = build_mpf(1, 1)
    np.testing.assert_array_equal(t.adjacency, [[0, 0], [1, 0]])
    np.testing.assert_array_equal(t.laplacian_L1, [[1]])


def test_n7_r3_counts_and_neighbors():
    t = build_mpf(7, 3)
    assert t.predecessor_counts == (1, 2, 3, 3, 3, 3, 3)
    assert t.neighbors(1) == [0]
    assert t.neighbors(2) == [1, 0]
    assert t.neighbors(5) == [4, 3, 2]
    assert [t.leader_link(i) for i in range(1, 8)] == [True] * 3 + [False] * 4


def test_adjacency_is_read_only():
    t = build_mpf(4, 2)
    with pytest.raises(ValueError):
        t.adjacency[1, 0] = 0


def test_invalid_sizes():
    with pytest.raises(InvalidParameterError):
        build_mpf(0, 1)
    with pytest.raises(InvalidParameterError):
        build_mpf(3, 4)


@given(N=st.integers(1, 30), data=st.data())
def test_laplacian_structure(N, data):
    r = data.draw(st.integers(1, N))
    t = build_mpf(N, r)
    L = t.laplacian
    np.testing.assert_array_equal(L.sum(axis=1), 0)
    L1 = t.laplacian_L1
    # strictly lower triangular coupling, diagonal = predecessor counts
    np.testing.assert_array_equal(np.triu(L1, 1), 0)
    np.testing.assert_array_equal(np.diag(L1), t.predecessor_counts)
    assert all(t.has_path_from_leader(i) for i in range(N + 1))
