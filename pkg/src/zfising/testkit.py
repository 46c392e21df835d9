"""Brute-force oracles, random instance generators and statistics helpers."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

from .engine import PiTable
from .graph import Graph, PlanarEmbedding, build_graph
from .kasteleyn import EmptyMatchingSet, triangulate
from .model import IsingModel

EmptyPMSet = EmptyMatchingSet

MAX_BRUTE_SPINS = 25
MAX_BRUTE_PM_VERTICES = 24
_CHUNK_BITS = 16


@dataclass(frozen=True)
class GeneratorConfig:
    target_size: int
    coupling_stddev: float = 0.1
    seed: int | None = None

    def rng(self) -> np.random.Generator:
        return np.random.default_rng(self.seed)


# ---------------------------------------------------------------------------
# oracles
# ---------------------------------------------------------------------------

def _spin_block(codes: np.ndarray, n: int) -> np.ndarray:
    return (1 - 2 * ((codes[:, None] >> np.arange(n)) & 1)).astype(np.float64)


def _log_weights_chunks(model: IsingModel, fixed_first: bool):
    """Yield ``(spins, log weights)`` over all configurations in chunks."""
    n = model.num_vertices
    u, v = model.edge_arrays()
    J = np.asarray(model.couplings, dtype=np.float64)
    free = n - 1 if fixed_first else n
    total = 1 << free
    step = 1 << min(_CHUNK_BITS, free)
    for start in range(0, total, step):
        codes = np.arange(start, min(start + step, total), dtype=np.int64)
        if fixed_first:
            codes = codes << 1           # vertex 0 stays +1
        X = _spin_block(codes, n)
        yield X, (X[:, u] * X[:, v]) @ J


def brute_log_z(model: IsingModel) -> float:
    """``log Z`` by summing over every configuration."""
    n = model.num_vertices
    if n > MAX_BRUTE_SPINS:
        raise ValueError(f"brute force limited to {MAX_BRUTE_SPINS} spins, got {n}")
    if n == 0:
        return 0.0
    acc = -np.inf
    for _, lw in _log_weights_chunks(model, fixed_first=True):
        acc = np.logaddexp(acc, logsumexp(lw))
    return float(acc + np.log(2.0))


def brute_log_probabilities(model: IsingModel, log_z: float | None = None) -> np.ndarray:
    """``log P`` of every configuration, indexed by the bit code (bit i set: spin i is -1)."""
    n = model.num_vertices
    if n > 20:
        raise ValueError("full probability tables are limited to 20 spins")
    if log_z is None:
        log_z = brute_log_z(model)
    parts = [lw for _, lw in _log_weights_chunks(model, fixed_first=False)]
    return np.concatenate(parts) - log_z


def brute_pm_partition(host: Graph, weights) -> float:
    """``log`` of the weighted perfect-matching sum, by backtracking."""
    n = host.num_vertices
    if n > MAX_BRUTE_PM_VERTICES:
        raise ValueError(f"enumeration limited to {MAX_BRUTE_PM_VERTICES} vertices")
    if n % 2:
        raise EmptyPMSet("odd number of vertices")
    logw = np.log(np.asarray(weights, dtype=np.float64))
    adj = host.adjacency()
    matched = [False] * n
    terms: list[float] = []

    def extend(acc: float) -> None:
        try:
            v = matched.index(False)
        except ValueError:
            terms.append(acc)
            return
        matched[v] = True
        for w, k in adj[v]:
            if not matched[w]:
                matched[w] = True
                extend(acc + logw[k])
                matched[w] = False
        matched[v] = False

    extend(0.0)
    if not terms:
        raise EmptyPMSet("graph has no perfect matching")
    return float(logsumexp(terms))


def brute_pm_table(host: Graph, weights) -> dict[tuple[int, ...], float]:
    """Every perfect matching (sorted edge ids) with its log weight."""
    n = host.num_vertices
    logw = np.log(np.asarray(weights, dtype=np.float64))
    adj = host.adjacency()
    matched = [False] * n
    out: dict[tuple[int, ...], float] = {}
    chosen: list[int] = []

    def extend(acc: float) -> None:
        try:
            v = matched.index(False)
        except ValueError:
            out[tuple(sorted(chosen))] = acc
            return
        matched[v] = True
        for w, k in adj[v]:
            if not matched[w]:
                matched[w] = True
                chosen.append(k)
                extend(acc + logw[k])
                chosen.pop()
                matched[w] = False
        matched[v] = False

    if n % 2 == 0:
        extend(0.0)
    return out


def brute_pi(node_model: IsingModel, p: int, t: int) -> PiTable:
    """Subtree sums with ``x_p = +1`` and ``x_t = +/-1``, ignoring edges joining ``p`` and ``t``."""
    n = node_model.num_vertices
    if n > 20:
        raise ValueError("brute_pi is limited to 20 vertices")
    u, v = node_model.edge_arrays()
    J = np.array(node_model.couplings, dtype=np.float64)
    J[((u == p) & (v == t)) | ((u == t) & (v == p))] = 0.0
    X = _spin_block(np.arange(1 << n, dtype=np.int64), n)
    X = X[X[:, p] == 1]
    lw = (X[:, u] * X[:, v]) @ J
    eq = X[:, t] == 1
    return PiTable(float(logsumexp(lw[eq])), float(logsumexp(lw[~eq])))


# ---------------------------------------------------------------------------
# generators
# ---------------------------------------------------------------------------

def _random_tree_embedding(n: int, rng) -> tuple[list[tuple[int, int]], list[list[int]]]:
    """Random tree grown leaf by leaf, each leaf placed at a random corner."""
    edges: list[tuple[int, int]] = []
    rot: list[list[int]] = [[]]
    for new in range(1, n):
        parent = int(rng.integers(new))
        e = len(edges)
        edges.append((parent, new))
        r = rot[parent]
        r.insert(int(rng.integers(len(r) + 1)), 2 * e)
        rot.append([2 * e + 1])
    return edges, rot


def gen_random_planar(cfg: GeneratorConfig, rng=None) -> tuple[Graph, PlanarEmbedding]:
    """Random biconnected planar graph: a random plane tree, triangulated."""
    n = cfg.target_size
    if n < 3:
        raise ValueError("planar generation needs at least three vertices")
    rng = cfg.rng() if rng is None else rng
    edges, rot = _random_tree_embedding(n, rng)
    tree = Graph(n, tuple(edges))
    emb = PlanarEmbedding(tree, rot)
    tm, temb = triangulate(IsingModel(tree, np.zeros(len(edges))), emb)
    return tm.graph, temb


def gen_random_k33free(cfg: GeneratorConfig, rng=None) -> IsingModel:
    """Random biconnected graph glued from K5's and planar pieces along shared edges.

    Shared edges are identified and then dropped, so every glue is a 2-sum.
    """
    N = cfg.target_size
    if N < 5:
        raise ValueError("K33-free generation needs at least five vertices")
    rng = cfg.rng() if rng is None else rng
    k5 = [(a, b) for a in range(5) for b in range(a + 1, 5)]
    free: list[list[tuple[int, int]]] = [list(k5)]
    size = 5
    while size < N:
        room = N - size
        if room >= 3 and rng.random() < 0.5:
            n_new, local = 5, k5
        else:
            n_new = int(rng.integers(3, room + 3))
            g, _ = gen_random_planar(GeneratorConfig(n_new), rng)
            local = list(g.edges)
        hosts = [i for i, f in enumerate(free) if f]
        h = hosts[int(rng.integers(len(hosts)))]
        u, v = free[h].pop(int(rng.integers(len(free[h]))))
        a, b = local[int(rng.integers(len(local)))]
        if rng.random() < 0.5:
            u, v = v, u
        ids = {a: u, b: v}
        for x in range(n_new):
            if x not in ids:
                ids[x] = size
                size += 1
        free.append([(ids[x], ids[y]) for x, y in local if {x, y} != {a, b}])
    edges = sorted((min(x, y), max(x, y)) for f in free for x, y in f)
    g = build_graph(N, edges)
    return IsingModel(g, rng.normal(0.0, cfg.coupling_stddev, len(edges)))


def gen_k5_necklace(n: int) -> Graph:
    """A ``2n``-cycle with a K5 glued onto every other edge (``5n`` vertices)."""
    if n < 1:
        raise ValueError("necklace needs at least one bead")
    cyc = 2 * n
    edges: set[tuple[int, int]] = set()
    for i in range(cyc):
        a, b = i, (i + 1) % cyc
        if a != b:
            edges.add((min(a, b), max(a, b)))
    nxt = cyc
    for i in range(n):
        a, b = 2 * i + 1, (2 * i + 2) % cyc
        bead = [a, b, nxt, nxt + 1, nxt + 2]
        nxt += 3
        for x in range(5):
            for y in range(x + 1, 5):
                p, q = bead[x], bead[y]
                edges.add((min(p, q), max(p, q)))
    return build_graph(nxt, sorted(edges))


# ---------------------------------------------------------------------------
# statistics
# ---------------------------------------------------------------------------

def spin_codes(samples) -> np.ndarray:
    """Bit code of each configuration (bit ``i`` set when spin ``i`` is -1)."""
    S = np.asarray(samples)
    if S.ndim == 1:
        S = S[None, :]
    bits = (S < 0).astype(np.int64)
    return bits @ (np.int64(1) << np.arange(S.shape[1], dtype=np.int64))


def kl_divergence_empirical(model: IsingModel, samples, *, log_z: float | None = None) -> float:
    """``KL(empirical || model)`` over the observed configurations."""
    n = model.num_vertices
    if n > 20:
        raise ValueError("empirical KL is limited to 20 spins")
    codes, counts = np.unique(spin_codes(samples), return_counts=True)
    m = counts.sum()
    if log_z is None:
        log_z = brute_log_z(model)
    X = _spin_block(codes, n)
    u, v = model.edge_arrays()
    log_p = (X[:, u] * X[:, v]) @ np.asarray(model.couplings, dtype=np.float64) - log_z
    f = counts / m
    return float(max(np.sum(f * (np.log(f) - log_p)), 0.0))
