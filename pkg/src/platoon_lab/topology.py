"""Multiple-predecessor-following (MPF) communication topology."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from platoon_lab.errors import InvalidParameterError


@dataclass(frozen=True)
class Topology:
    """Directed MPF graph over nodes ``0..N`` (node 0 is the leader).

    ``adjacency[i, j] == 1`` means vehicle ``i`` receives from ``j``.
    """

    N: int
    r: int
    adjacency: np.ndarray
    predecessor_counts: tuple[int, ...]

    @property
    def laplacian(self) -> np.ndarray:
        A = self.adjacency
        return np.diag(A.sum(axis=1)) - A

    @property
    def laplacian_L1(self) -> np.ndarray:
        """Follower block of the Laplacian (rows/columns 1..N)."""
        return self.laplacian[1:, 1:]

    def neighbors(self, i: int) -> list[int]:
        """In-neighbors of vehicle ``i`` ordered by offset ``l = 1..r_i``."""
        return [j for j in range(i - 1, -1, -1) if self.adjacency[i, j]]

    def leader_link(self, i: int) -> bool:
        return bool(self.adjacency[i, 0])

    def has_path_from_leader(self, i: int) -> bool:
        seen = {0}
        frontier = [0]
        while frontier:
            j = frontier.pop()
            for k in np.flatnonzero(self.adjacency[:, j]):
                if k not in seen:
                    seen.add(int(k))
                    frontier.append(int(k))
        return i in seen


def build_mpf(N: int, r: int) -> Topology:
    if N < 1:
        raise InvalidParameterError(f"N must be >= 1, got {N}")
    if not 1 <= r <= N:
        raise InvalidParameterError(f"need 1 <= r <= N, got r={r}, N={N}")
    adjacency = np.zeros((N + 1, N + 1), dtype=int)
    for i in range(1, N + 1):
        for l in range(1, min(i, r) + 1):
            adjacency[i, i - l] = 1
    adjacency.setflags(write=False)
    counts = tuple(min(i, r) for i in range(1, N + 1))
    return Topology(N=N, r=r, adjacency=adjacency, predecessor_counts=counts)
