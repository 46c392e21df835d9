"""Exact sampling of weighted perfect matchings on planar hosts of degree <= 3.

The host is cut by a separator hierarchy computed once.  For a subproblem (a
hierarchy node restricted to the still unsaturated vertices) the separator
vertices and their neighbours form the tail of a block elimination of the
Kasteleyn matrix; the inverse of the tail Schur complement is the matching
block of ``K^-1``.  Separator vertices are then saturated one by one, the
probability of an edge ``(v, w)`` given the edges already drawn being
``c_e * |z_vw|`` where ``z`` is the 2x2 Schur complement of ``K^-1`` over the
drawn vertices.  Once the separator is saturated the two sides are independent
and are sampled recursively; small subproblems invert ``K`` densely.

Randomness: one generator, consumed in depth-first subproblem order (first
child before second), one uniform per vertex with two or more candidates.
"""

from __future__ import annotations

import math
from bisect import bisect_right
from dataclasses import dataclass, field

import networkx as nx
import numpy as np

from .graph import Graph, PlanarEmbedding, planar_embed
from .kasteleyn import DENSE_FALLBACK_LIMIT, EmptyMatchingSet, ExpandedDual, KasteleynSystem, \
    build_kasteleyn, pfaffian_orient, pm_to_spins, schur_tail
from .separator import dissect, rotation_lists

RENORM_TOL = 1e-6
DENSE_SIZE = 96
HIERARCHY_LEAF = 48
MEMO_HOST_LIMIT = 600
MEMO_ENTRY_BUDGET = 500_000


@dataclass(frozen=True)
class PerfectMatching:
    edges: np.ndarray                 # sorted host edge ids
    log_probability: float = float("nan")

    def __len__(self):
        return len(self.edges)


@dataclass(frozen=True)
class Condition:
    """Edges forced into the matching and edges deleted from the host."""

    predrawn: tuple[int, ...] = ()
    removed_edges: tuple[int, ...] = ()


# ---------------------------------------------------------------------------
# incremental conditional probabilities
# ---------------------------------------------------------------------------

class WilsonState:
    """Drawn edges plus the inverse of ``K^-1`` restricted to their endpoints.

    ``kinv`` is a block of ``K^-1`` whose rows/columns are the host vertices
    in ``row`` (a dict).  ``drawn_rows`` lists the rows of the saturated
    vertices and ``inv_drawn`` is the inverse of ``kinv[drawn_rows][:, drawn_rows]``,
    extended by a block update per accepted edge.  States are immutable.
    """

    __slots__ = ("kinv", "row", "drawn_rows", "inv_drawn", "saturated", "drawn_edges")

    def __init__(self, kinv, row, drawn_rows=(), inv_drawn=None, saturated=frozenset(),
                 drawn_edges=()):
        self.kinv = kinv
        self.row = row
        self.drawn_rows = drawn_rows
        self.inv_drawn = np.zeros((0, 0)) if inv_drawn is None else inv_drawn
        self.saturated = saturated
        self.drawn_edges = drawn_edges

    def schur_offdiag(self, v: int, partners) -> np.ndarray:
        """``z_vw`` for each partner ``w``."""
        kinv = self.kinv
        iv = self.row[v]
        cols = [self.row[w] for w in partners]
        direct = kinv[iv, cols]
        if not self.drawn_rows:
            return direct
        I = list(self.drawn_rows)
        left = kinv[iv, I] @ self.inv_drawn
        return direct - left @ kinv[np.ix_(I, cols)]

    def accept(self, v: int, w: int, edge: int) -> "WilsonState":
        kinv = self.kinv
        J = [self.row[v], self.row[w]]
        I = list(self.drawn_rows)
        C = kinv[np.ix_(J, J)]
        if I:
            B = kinv[np.ix_(I, J)]
            Cl = kinv[np.ix_(J, I)]
            WB = self.inv_drawn @ B
            ClW = Cl @ self.inv_drawn
            z = C - Cl @ WB
        else:
            z = C
        det = z[0, 0] * z[1, 1] - z[0, 1] * z[1, 0]
        if det == 0.0:
            raise ArithmeticError("drawn set has zero probability")
        zi = np.array([[z[1, 1], -z[0, 1]], [-z[1, 0], z[0, 0]]]) / det
        k = len(I)
        W = np.empty((k + 2, k + 2))
        if k:
            t = WB @ zi
            W[:k, :k] = self.inv_drawn + t @ ClW
            W[:k, k:] = -t
            W[k:, :k] = -zi @ ClW
        W[k:, k:] = zi
        return WilsonState(kinv, self.row, self.drawn_rows + tuple(J), W,
                           self.saturated | {v, w}, self.drawn_edges + (edge,))


# ---------------------------------------------------------------------------
# base matchings of subproblems
# ---------------------------------------------------------------------------

class GeneralMatchingProvider:
    """Maximum-cardinality matching of the subproblem (any host)."""

    def start(self, sampler: "PMSampler", condition: Condition):
        return self

    def add(self, edges) -> None:
        pass

    def base_matching(self, verts, edges, eu, ev) -> list[int]:
        G = nx.Graph()
        G.add_nodes_from(verts)
        eid = {}
        for e in edges:
            a, b = int(eu[e]), int(ev[e])
            G.add_edge(a, b)
            eid[(a, b)] = eid[(b, a)] = int(e)
        M = nx.max_weight_matching(G, maxcardinality=True)
        if 2 * len(M) != len(verts):
            raise EmptyMatchingSet("subproblem has no perfect matching")
        return [eid[p] for p in M]


class _ParityUnion:
    """Union-find storing the parity of every element relative to its root."""

    def __init__(self, n: int):
        self.parent = list(range(n))
        self.parity = [0] * n

    def find(self, x: int) -> tuple[int, int]:
        parent, parity = self.parent, self.parity
        path = []
        while parent[x] != x:
            path.append(x)
            x = parent[x]
        root, acc = x, 0
        for y in reversed(path):
            acc ^= parity[y]
            parity[y] = acc
            parent[y] = root
        return root, (parity[path[0]] if path else 0)

    def union(self, a: int, b: int, rel: int) -> None:
        ra, pa = self.find(a)
        rb, pb = self.find(b)
        if ra == rb:
            if pa ^ pb != rel:
                raise EmptyMatchingSet("drawn edges contradict each other")
            return
        self.parent[rb] = ra
        self.parity[rb] = pa ^ pb ^ rel


class SpinParityMatching:
    """Base matchings of expanded-dual subproblems read off a spin configuration.

    Every drawn edge fixes whether the spins across some primal edges agree;
    any configuration meeting those constraints maps to a matching of the
    whole dual containing all drawn edges, whose restriction to the unsaturated
    vertices is perfect.
    """

    def __init__(self, dual: ExpandedDual):
        self.E = dual.num_intercity
        u, v = dual.primal.edge_arrays()
        self.pu = u.tolist()
        self.pv = v.tolist()
        self.fn = dual.face_next.tolist()
        fp = np.empty_like(dual.face_next)
        fp[dual.face_next] = np.arange(len(fp))
        self.fp = fp.tolist()
        self.n = dual.primal.num_vertices

    def start(self, sampler: "PMSampler", condition: Condition):
        st = _ParityState(self)
        for e in condition.removed_edges:
            if e >= self.E:
                raise NotImplementedError("only intercity edges can be removed")
            st.uf.union(self.pu[e], self.pv[e], 1)
        st.add(condition.predrawn)
        return st


class _ParityState:
    def __init__(self, owner: SpinParityMatching):
        self.o = owner
        self.uf = _ParityUnion(owner.n)

    def add(self, edges) -> None:
        o, uf = self.o, self.uf
        for e in edges:
            e = int(e)
            if e < o.E:
                uf.union(o.pu[e], o.pv[e], 0)
            else:
                d = e - o.E
                d1 = o.fn[d]
                d2 = o.fn[d1]
                for dd, rel in ((d, 1), (d1, 1), (d2, 0)):
                    k = dd >> 1
                    uf.union(o.pu[k], o.pv[k], rel)

    def _unequal(self, k: int) -> bool:
        return self.uf.find(self.o.pu[k])[1] != self.uf.find(self.o.pv[k])[1]

    def base_matching(self, verts, edges, eu, ev) -> list[int]:
        o = self.o
        memo: dict[int, bool] = {}

        def uneq(k):
            r = memo.get(k)
            if r is None:
                r = memo[k] = self._unequal(k)
            return r

        out = set()
        for d in verts:
            d = int(d)
            if not uneq(d >> 1):
                out.add(d >> 1)
            elif uneq(o.fn[d] >> 1):
                out.add(o.E + d)
            else:
                out.add(o.E + o.fp[d])
        return sorted(out)


# ---------------------------------------------------------------------------
# sampler
# ---------------------------------------------------------------------------

class _Entry:
    """Node of the decision tree of one subproblem."""

    __slots__ = ("state", "pos", "v", "cands", "logp", "cum", "kids")

    def __init__(self, state, pos, v, cands, probs):
        self.state = state
        self.pos = pos
        self.v = v
        self.cands = cands
        if probs is None:
            self.logp = self.cum = None
        else:
            with np.errstate(divide="ignore"):
                self.logp = np.log(probs).tolist()
            self.cum = np.cumsum(probs).tolist()
        self.kids: dict[int, _Entry] = {}


class _LazyProvider:
    """Starts the base-matching provider only when a subproblem needs one."""

    __slots__ = ("provider", "sampler", "condition", "state", "pending")

    def __init__(self, provider, sampler, condition):
        self.provider = provider
        self.sampler = sampler
        self.condition = condition
        self.state = None
        self.pending: list[int] = []

    def add(self, edges) -> None:
        if self.state is None:
            self.pending.extend(edges)
        else:
            self.state.add(edges)

    def base_matching(self, verts, edges, eu, ev):
        if self.state is None:
            self.state = self.provider.start(self.sampler, self.condition)
            self.state.add(self.pending)
        return self.state.base_matching(verts, edges, eu, ev)


@dataclass(eq=False)
class _Sub:
    verts: np.ndarray
    members: frozenset
    draw: list[int]
    children: list[int]
    kinv: np.ndarray | None
    row: dict
    root: _Entry | None = None


def corner_inverse(ks: KasteleynSystem, t: int | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Inverse of the tail Schur complement and the host vertices it is indexed by.

    Equals ``K^-1`` restricted to the tail vertices.  ``t`` (if given) must be
    the tail dimension.
    """
    ntail = ks.num_tail
    if t is not None and t != 2 * ntail:
        raise ValueError(f"tail has dimension {2 * ntail}, not {t}")
    tail_vertices = ks.pairs[ks.order[ks.num_pairs - ntail:]].reshape(-1)
    _, T = schur_tail(ks)
    if T is None:
        raise ArithmeticError("singular pivot block; use the dense fallback")
    try:
        D = np.linalg.inv(T)
    except np.linalg.LinAlgError as exc:
        raise EmptyMatchingSet("Kasteleyn matrix is singular") from exc
    return D, tail_vertices


class PMSampler:
    """Reusable exact sampler for one weighted, Pfaffian-oriented planar host."""

    def __init__(self, host: Graph, embedding: PlanarEmbedding, weights, orientation=None, *,
                 provider=None, dense_size: int = DENSE_SIZE, leaf_size: int = HIERARCHY_LEAF,
                 memoize: bool | None = None):
        n = host.num_vertices
        e = np.asarray(host.edges, dtype=np.int64).reshape(-1, 2)
        self.host = host
        self.eu = e[:, 0]
        self.ev = e[:, 1]
        self.weights = np.asarray(weights, dtype=np.float64)
        if len(self.weights) != host.num_edges or np.any(~(self.weights > 0)):
            raise ValueError("weights must be positive, one per host edge")
        deg = np.bincount(e.reshape(-1), minlength=n)
        if n and deg.max() > 3:
            raise ValueError("host has a vertex of degree greater than three")
        self.orientation = pfaffian_orient(embedding) if orientation is None else np.asarray(orientation)
        inc = [[] for _ in range(n)]
        for k, (a, b) in enumerate(e.tolist()):
            inc[a].append((k, b))
            inc[b].append((k, a))
        self.incident = inc
        self.provider = provider if provider is not None else GeneralMatchingProvider()
        self.dense_size = dense_size
        self.memoize = n <= MEMO_HOST_LIMIT if memoize is None else memoize
        self.flags: set[str] = set()
        self._budget = MEMO_ENTRY_BUDGET
        dis = dissect(rotation_lists(embedding), leaf_size)
        order = np.asarray(dis.order(), dtype=np.int64)
        self.vertex_rank = np.empty(n, dtype=np.int64)
        self.vertex_rank[order] = np.arange(n)
        self.order = order
        # every hierarchy node covers a contiguous range of the post-order
        self.nodes = dis.nodes
        self.span = [(0, 0)] * len(dis.nodes)
        stack = [(dis.root, False)]
        pos = 0
        start = {}
        while stack:
            i, done = stack.pop()
            nd = dis.nodes[i]
            if not done:
                start[i] = pos
                if nd.children:
                    stack.append((i, True))
                    for c in reversed(nd.children):
                        stack.append((c, False))
                    continue
            pos += len(nd.separator)
            self.span[i] = (start[i], pos)
        self.root = dis.root
        self._memo: dict[Condition, dict] = {}

    # -- subproblem preparation ------------------------------------------------

    def _local_edges(self, verts, members, removed) -> list[int]:
        out = set()
        for v in verts:
            for k, w in self.incident[v]:
                if w in members and k not in removed:
                    out.add(k)
        return sorted(out)

    def _dense_kinv(self, verts, edges):
        idx = {int(v): i for i, v in enumerate(verts)}
        m = len(verts)
        K = np.zeros((m, m))
        for k in edges:
            a, b = idx[int(self.eu[k])], idx[int(self.ev[k])]
            if self.orientation[k] < 0:
                a, b = b, a
            K[a, b] += self.weights[k]
            K[b, a] -= self.weights[k]
        if m % 2:
            raise EmptyMatchingSet("odd number of unsaturated vertices")
        try:
            kinv = np.linalg.inv(K)
        except np.linalg.LinAlgError as exc:
            raise EmptyMatchingSet("subproblem has no perfect matching") from exc
        if not np.all(np.isfinite(kinv)):
            raise EmptyMatchingSet("subproblem has no perfect matching")
        return kinv, idx

    def _prepare(self, node: int, verts: np.ndarray, removed, pstate) -> _Sub:
        members = frozenset(verts.tolist())
        nd = self.nodes[node]
        if len(verts) <= self.dense_size or not nd.children:
            edges = self._local_edges(verts.tolist(), members, removed)
            kinv, row = self._dense_kinv(verts.tolist(), edges)
            return _Sub(verts, members, verts.tolist(), [], kinv, row)
        sep = [v for v in nd.separator if v in members]
        if not sep:
            return _Sub(verts, members, [], list(nd.children), None, {})
        tail = set(sep)
        for v in sep:
            for k, w in self.incident[v]:
                if w in members and k not in removed:
                    tail.add(w)
        vl = verts.tolist()
        edges = self._local_edges(vl, members, removed)
        base = pstate.base_matching(vl, edges, self.eu, self.ev)
        local = {v: i for i, v in enumerate(vl)}
        sub_edges = [(local[int(self.eu[k])], local[int(self.ev[k])]) for k in edges]
        g = Graph(len(vl), tuple(sub_edges))
        pos_of = {k: i for i, k in enumerate(edges)}
        try:
            bm = [pos_of[k] for k in base]
        except KeyError as exc:
            raise EmptyMatchingSet("base matching leaves the subproblem") from exc
        ks = build_kasteleyn(g, self.weights[edges], self.orientation[edges], bm,
                             forced_tail_vertices=[local[v] for v in sorted(tail)],
                             vertex_rank=self.vertex_rank[verts])
        try:
            D, tv = corner_inverse(ks)
            row = {vl[int(x)]: i for i, x in enumerate(tv)}
            kinv = D
        except ArithmeticError:
            if len(vl) > DENSE_FALLBACK_LIMIT:
                raise
            self.flags.add("dense-fallback")
            kinv, row = self._dense_kinv(vl, edges)
        return _Sub(verts, members, sep, list(nd.children), kinv, row)

    # -- drawing -------------------------------------------------------------

    def _entry(self, sub: _Sub, state: WilsonState, pos: int, removed) -> _Entry:
        draw = sub.draw
        while pos < len(draw) and draw[pos] in state.saturated:
            pos += 1
        if pos == len(draw):
            return _Entry(state, pos, None, None, None)
        v = draw[pos]
        cands = [(k, w) for k, w in self.incident[v]
                 if w in sub.members and w not in state.saturated and k not in removed]
        if not cands:
            raise EmptyMatchingSet(f"vertex {v} cannot be saturated")
        z = state.schur_offdiag(v, [w for _, w in cands])
        probs = self.weights[[k for k, _ in cands]] * np.abs(z)
        total = float(probs.sum())
        if not abs(total - 1.0) <= RENORM_TOL:
            probs = self._dense_conditional(sub, state, v, cands, removed)
            total = float(probs.sum())
        if not total > 0:
            raise EmptyMatchingSet(f"vertex {v} has no candidate of positive probability")
        probs = np.clip(probs / total, 0.0, 1.0)
        return _Entry(state, pos, v, cands, probs)

    def _dense_conditional(self, sub, state, v, cands, removed) -> np.ndarray:
        rest = [u for u in sub.verts.tolist() if u not in state.saturated]
        if len(rest) > DENSE_FALLBACK_LIMIT:
            raise ArithmeticError("conditional probabilities lost normalization")
        self.flags.add("dense-fallback")
        members = frozenset(rest)
        kinv, idx = self._dense_kinv(rest, self._local_edges(rest, members, removed))
        iv = idx[v]
        return np.array([self.weights[k] * abs(kinv[iv, idx[w]]) for k, w in cands])

    def _run(self, sub: _Sub, rng, removed) -> tuple[list[int], float]:
        memo = self.memoize
        ent = sub.root
        if ent is None:
            ent = self._entry(sub, WilsonState(sub.kinv, sub.row), 0, removed)
            if memo:
                sub.root = ent
        lp = 0.0
        while ent.v is not None:
            nc = len(ent.cands)
            if nc == 1:
                i = 0
            else:
                cum = ent.cum
                i = min(bisect_right(cum, rng.random() * cum[-1]), nc - 1)
            lp += ent.logp[i]
            kid = ent.kids.get(i)
            if kid is None:
                k, w = ent.cands[i]
                kid = self._entry(sub, ent.state.accept(ent.v, w, k), ent.pos + 1, removed)
                if memo and self._budget > 0:
                    ent.kids[i] = kid
                    self._budget -= 1
            ent = kid
        return list(ent.state.drawn_edges), lp

    def sample(self, rng, condition: Condition | None = None) -> PerfectMatching:
        cond = condition or Condition()
        n = self.host.num_vertices
        alive = np.ones(n, dtype=bool)
        removed = frozenset(int(k) for k in cond.removed_edges)
        drawn: list[int] = []
        for k in cond.predrawn:
            a, b = int(self.eu[k]), int(self.ev[k])
            if not (alive[a] and alive[b]) or k in removed:
                raise EmptyMatchingSet("forced edges overlap")
            alive[a] = alive[b] = False
            drawn.append(int(k))
        pstate = _LazyProvider(self.provider, self, cond)
        cache = self._memo.setdefault(cond, {}) if self.memoize else None
        stack = [self.root]
        lp = 0.0
        while stack:
            node = stack.pop()
            lo, hi = self.span[node]
            span_verts = self.order[lo:hi]
            mask = alive[span_verts]
            verts = span_verts[mask]
            if len(verts) == 0:
                continue
            sub = None
            if cache is not None:
                key = (node, np.packbits(mask).tobytes())
                sub = cache.get(key)
            if sub is None:
                sub = self._prepare(node, verts, removed, pstate)
                if cache is not None:
                    cache[key] = sub
            got, sub_lp = self._run(sub, rng, removed)
            lp += sub_lp
            for k in got:
                alive[self.eu[k]] = alive[self.ev[k]] = False
            drawn.extend(got)
            pstate.add(got)
            stack.extend(reversed(sub.children))
        if alive.any():
            raise EmptyMatchingSet("sampler left vertices unsaturated")
        return PerfectMatching(np.sort(np.asarray(drawn, dtype=np.int64)), lp)


def draw_separator_edges(state: WilsonState, separator, rng, host: Graph, weights) -> tuple[list[int], WilsonState]:
    """Saturate every vertex of ``separator`` given the edges already in ``state``.

    Candidates are the host edges whose other endpoint is indexed by the
    state's block of ``K^-1`` and still unsaturated.
    """
    w = np.asarray(weights, dtype=np.float64)
    adj = host.adjacency()
    out = []
    for v in separator:
        if v in state.saturated:
            continue
        cands = [(k, u) for u, k in adj[v] if u in state.row and u not in state.saturated]
        if not cands:
            raise EmptyMatchingSet(f"vertex {v} cannot be saturated")
        probs = w[[k for k, _ in cands]] * np.abs(state.schur_offdiag(v, [u for _, u in cands]))
        total = float(probs.sum())
        if not abs(total - 1.0) <= RENORM_TOL:
            raise ArithmeticError(f"candidate probabilities sum to {total}")
        probs = np.clip(probs / total, 0.0, 1.0)
        i = 0 if len(cands) == 1 else min(int(np.searchsorted(np.cumsum(probs), rng.random(),
                                                              side="right")), len(cands) - 1)
        k, u = cands[i]
        state = state.accept(v, u, k)
        out.append(k)
    return out, state


def sample_pm(host: Graph, embedding: PlanarEmbedding | None, weights, rng, *,
              orientation=None) -> PerfectMatching:
    """One exact draw from ``P(M) ~ prod_{e in M} c_e``."""
    if embedding is None:
        embedding = planar_embed(host)
        if embedding is None:
            raise ValueError("host is not planar")
    return PMSampler(host, embedding, weights, orientation, memoize=False).sample(rng)


def ising_pm_sampler(dual: ExpandedDual, orientation=None, **kw) -> PMSampler:
    """Sampler over an expanded dual using spin-parity base matchings."""
    return PMSampler(dual.graph, dual.embedding, dual.weights, orientation,
                     provider=SpinParityMatching(dual), **kw)


def sample_planar_ising_spins(model, rng, *, sampler: PMSampler | None = None,
                              dual: ExpandedDual | None = None) -> np.ndarray:
    """Exact spin sample of a connected planar model with at least three vertices."""
    if sampler is None or dual is None:
        from .kasteleyn import planar_pipeline
        pipe = planar_pipeline(model)
        dual = pipe.dual
        sampler = ising_pm_sampler(dual, pipe.orientation)
    pm = sampler.sample(rng)
    x = pm_to_spins(dual, pm.edges)[: model.num_vertices]
    return -x if rng.random() < 0.5 else x
