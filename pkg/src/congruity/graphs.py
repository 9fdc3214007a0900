"""Graph construction for the composition level.

Text graphs come from dependency edge lists; visual graphs are lattices
over the image patch grid. Both are undirected; self-loops are not stored
in the neighbor lists because the attention layer adds the node itself to
its own neighborhood explicitly.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import ConfigError, DataError


@dataclass(frozen=True)
class ModalityGraph:
    """Undirected adjacency over one token or patch sequence."""

    node_count: int
    neighbors: tuple[tuple[int, ...], ...]  # sorted, deduplicated, no self entries

    def adjacency_mask(self, include_self: bool = True) -> np.ndarray:
        """Dense 0/1 mask; row i marks N(i), plus i itself when asked."""
        mask = np.zeros((self.node_count, self.node_count))
        for i, nbrs in enumerate(self.neighbors):
            mask[i, list(nbrs)] = 1.0
            if include_self:
                mask[i, i] = 1.0
        return mask

    def undirected_edge_count(self) -> int:
        return sum(len(nbrs) for nbrs in self.neighbors) // 2


def build_text_graph(edges, n: int) -> ModalityGraph:
    """Symmetrize and deduplicate a dependency edge list over n tokens."""
    if n < 1:
        raise DataError(f"graph needs at least one node, got n={n}")
    nbrs: list[set[int]] = [set() for _ in range(n)]
    for i, j in edges:
        if not (0 <= i < n and 0 <= j < n):
            raise DataError(f"edge ({i},{j}) out of range for n={n}")
        if i == j:
            continue  # self-loops are implicit downstream
        nbrs[i].add(j)
        nbrs[j].add(i)
    return ModalityGraph(n, tuple(tuple(sorted(s)) for s in nbrs))


@lru_cache(maxsize=32)
def build_grid_graph(p: int, connectivity: int = 4) -> ModalityGraph:
    """p x p lattice over row-major patch indices.

    connectivity 4 links horizontal/vertical neighbors; 8 adds diagonals.
    """
    if p < 1:
        raise ConfigError(f"grid side must be >= 1, got {p}")
    if connectivity not in (4, 8):
        raise ConfigError(f"grid connectivity must be 4 or 8, got {connectivity}")
    offsets = [(-1, 0), (1, 0), (0, -1), (0, 1)]
    if connectivity == 8:
        offsets += [(-1, -1), (-1, 1), (1, -1), (1, 1)]
    nbrs = []
    for row in range(p):
        for col in range(p):
            cell = []
            for dr, dc in offsets:
                rr, cc = row + dr, col + dc
                if 0 <= rr < p and 0 <= cc < p:
                    cell.append(rr * p + cc)
            nbrs.append(tuple(sorted(cell)))
    return ModalityGraph(p * p, tuple(nbrs))
