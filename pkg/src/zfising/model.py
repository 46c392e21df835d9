"""Zero-field Ising models and spin configurations."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .graph import Graph, GraphError, build_graph


@dataclass(frozen=True, eq=False)
class IsingModel:
    """Graph plus one finite coupling per edge.

    The distribution is ``P(x) ~ exp(sum_e J_e x_u x_v)`` over ``x in {-1,+1}^N``.
    """

    graph: Graph
    couplings: np.ndarray

    def __post_init__(self):
        j = np.asarray(self.couplings, dtype=np.float64).reshape(-1)
        if j.shape[0] != self.graph.num_edges:
            raise GraphError("one coupling per edge is required")
        if not np.all(np.isfinite(j)):
            raise GraphError("couplings must be finite")
        if self.graph.multigraph:
            raise GraphError("Ising models live on normal graphs")
        j.setflags(write=False)
        object.__setattr__(self, "couplings", j)

    @property
    def num_vertices(self) -> int:
        return self.graph.num_vertices

    @property
    def num_edges(self) -> int:
        return self.graph.num_edges

    def edge_arrays(self) -> tuple[np.ndarray, np.ndarray]:
        if self.graph.num_edges == 0:
            return np.zeros(0, dtype=np.int64), np.zeros(0, dtype=np.int64)
        e = np.asarray(self.graph.edges, dtype=np.int64)
        return e[:, 0], e[:, 1]

    def energy(self, spins) -> np.ndarray | float:
        """``sum_e J_e x_u x_v`` for one configuration or a stack of them."""
        x = np.asarray(spins)
        u, v = self.edge_arrays()
        if x.ndim == 1:
            return float(np.dot(self.couplings, x[u] * x[v]))
        return (x[:, u] * x[:, v]) @ self.couplings


def ising_model(num_vertices: int, edges, couplings) -> IsingModel:
    return IsingModel(build_graph(num_vertices, edges), np.asarray(couplings, dtype=np.float64))


def check_spins(x, num_vertices: int) -> np.ndarray:
    arr = np.asarray(x, dtype=np.int8)
    if arr.shape != (num_vertices,) or not np.all(np.abs(arr) == 1):
        raise ValueError("spin configuration must be a +-1 vector over all vertices")
    return arr
