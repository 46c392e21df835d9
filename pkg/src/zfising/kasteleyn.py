"""Planar Ising models as weighted perfect matchings.

Pipeline: triangulate with zero couplings, replace every dual vertex by a
triangle (the expanded dual), orient it so every inner face is odd, and take
the Pfaffian of the signed weight matrix through nested-dissection ordered
2x2-block elimination.

Darts of a primal graph with ``E`` edges are numbered ``2e`` (``u -> v``) and
``2e + 1`` (``v -> u``).  The expanded dual has one vertex per primal dart;
edge ``e < E`` joins the two darts of primal edge ``e`` (intercity edge) and
edge ``E + d`` joins dart ``d`` to the next dart of its face (city edge).
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field

import numpy as np

from . import elimination
from .graph import Graph, GraphError, PlanarEmbedding, biconnected_decompose, build_graph, \
    face_cycles, is_biconnected, planar_embed
from .model import IsingModel
from .separator import dissect, rotation_lists

LOG2 = math.log(2.0)
PIVOT_RTOL = 1e-12
DENSE_FALLBACK_LIMIT = 6000


class EmptyMatchingSet(ValueError):
    """The host graph has no perfect matching."""


# ---------------------------------------------------------------------------
# triangulation
# ---------------------------------------------------------------------------

def _dart_links(emb: PlanarEmbedding) -> tuple[list[int], list[int]]:
    return list(emb.succ()), list(emb.pred())


def triangulate(model: IsingModel, emb: PlanarEmbedding) -> tuple[IsingModel, PlanarEmbedding]:
    """Add zero-coupling chords until every face is a triangle.

    Chords are cut as ears in alternating (zig-zag) order.  When the next ear's
    chord would duplicate an edge the opposite ear is used, which is always
    free in a simple plane graph.
    """
    g = model.graph
    edges = list(g.edges)
    couplings = list(model.couplings)
    adj = {(u, v) if u < v else (v, u) for u, v in edges}
    succ, pred = _dart_links(emb)

    def tail(d):
        return edges[d >> 1][d & 1]

    def head(d):
        return edges[d >> 1][1 - (d & 1)]

    def insert_after(x, y):
        nx_ = succ[x]
        succ[x] = y
        pred[y] = x
        succ[y] = nx_
        pred[nx_] = y

    for face in face_cycles(emb):
        if len(face) < 3:
            raise GraphError("face of length < 3; embedding is not of a simple biconnected graph")
        q = deque(face)
        step = 0
        while len(q) > 3:
            tries = 0
            while True:
                a, b = tail(q[0]), head(q[1])
                if a != b and ((a, b) if a < b else (b, a)) not in adj:
                    break
                q.rotate(-1)
                tries += 1
                if tries > len(q):
                    raise GraphError("face cannot be triangulated without parallel edges")
            d0, db = q[-1], q[1]
            e = len(edges)
            edges.append((a, b))
            couplings.append(0.0)
            adj.add((a, b) if a < b else (b, a))
            c = 2 * e
            succ.extend((0, 0))
            pred.extend((0, 0))
            insert_after(d0 ^ 1, c)
            insert_after(db ^ 1, c ^ 1)
            q.popleft()
            q.popleft()
            q.appendleft(c)
            step += 1
            if step % 2:
                q.rotate(1)
    n = g.num_vertices
    rotation: list[list[int]] = [[] for _ in range(n)]
    for v in range(n):
        if not emb.rotation[v]:
            continue
        d0 = emb.rotation[v][0]
        d = d0
        while True:
            rotation[v].append(d)
            d = succ[d]
            if d == d0:
                break
    tg = Graph(n, tuple(edges))
    return IsingModel(tg, np.asarray(couplings)), PlanarEmbedding(tg, rotation)


# ---------------------------------------------------------------------------
# expanded dual
# ---------------------------------------------------------------------------

def _count_cycles(perm: np.ndarray) -> int:
    seen = np.zeros(len(perm), dtype=bool)
    count = 0
    p = perm.tolist()
    for s in range(len(p)):
        if seen[s]:
            continue
        count += 1
        d = s
        while not seen[d]:
            seen[d] = True
            d = p[d]
    return count


@dataclass(eq=False)
class ExpandedDual:
    """Expanded dual ``G*`` of a triangulated planar model."""

    primal: IsingModel
    primal_embedding: PlanarEmbedding
    embedding: PlanarEmbedding
    face_next: np.ndarray
    weights: np.ndarray

    @property
    def graph(self) -> Graph:
        return self.embedding.graph

    @property
    def num_intercity(self) -> int:
        return self.primal.num_edges

    @property
    def intercity_edges(self) -> range:
        return range(self.num_intercity)

    @property
    def city_edges(self) -> range:
        return range(self.num_intercity, self.graph.num_edges)

    def g_map(self, k: int) -> int:
        """Primal edge of intercity edge ``k``."""
        if not 0 <= k < self.num_intercity:
            raise IndexError("not an intercity edge")
        return k

    def edge_arrays(self) -> tuple[np.ndarray, np.ndarray]:
        e = np.asarray(self.graph.edges, dtype=np.int64)
        return e[:, 0], e[:, 1]


def build_expanded_dual(model: IsingModel, emb: PlanarEmbedding) -> ExpandedDual:
    """Expanded dual of a triangulated embedded model with its weights."""
    E = model.num_edges
    nd = 2 * E
    fn = np.asarray(emb.face_next(), dtype=np.int64)
    if nd == 0 or np.any(fn[fn[fn]] != np.arange(nd)) or np.any(fn == np.arange(nd)):
        raise GraphError("expanded dual needs a triangulated embedding")
    fp = np.empty(nd, dtype=np.int64)
    fp[fn] = np.arange(nd)
    gu = np.concatenate([np.arange(0, nd, 2), np.arange(nd)])
    gv = np.concatenate([np.arange(1, nd, 2), fn])
    g = Graph(nd, tuple(zip(gu.tolist(), gv.tolist())))
    darts = np.arange(nd)
    inter = darts                      # dart of the intercity edge leaving vertex d
    out_c = 2 * (E + darts)
    in_c = 2 * (E + fp) + 1
    nv, ne = nd, nd // 2 + nd
    for order in ((inter, out_c, in_c), (inter, in_c, out_c)):
        rot = np.stack(order, axis=1)
        emb_star = PlanarEmbedding(g, rot.tolist())
        faces = _count_cycles(np.asarray(emb_star.face_next(), dtype=np.int64))
        if nv - ne + faces == 2:
            break
    else:  # pragma: no cover - one of the two rotations is always planar
        raise GraphError("expanded dual rotation is not planar")
    w = np.ones(ne)
    w[:E] = np.exp(2.0 * np.asarray(model.couplings))
    return ExpandedDual(model, emb, emb_star, fn, w)


def spins_to_pm(dual: ExpandedDual, x) -> np.ndarray:
    """Perfect matching of ``G*`` for a spin configuration (sorted edge ids)."""
    x = np.asarray(x)
    u, v = dual.primal.edge_arrays()
    eq = x[u] == x[v]
    E = dual.num_intercity
    d = np.arange(2 * E)
    city = (~eq[d >> 1]) & (~eq[dual.face_next >> 1])
    return np.concatenate([np.nonzero(eq)[0], E + np.nonzero(city)[0]])


def pm_to_spins(dual: ExpandedDual, pm) -> np.ndarray:
    """Spin configuration with ``x[0] = +1`` whose matching is ``pm``."""
    g = dual.graph
    pm = np.asarray(pm, dtype=np.int64)
    gu, gv = dual.edge_arrays()
    cover = np.zeros(g.num_vertices, dtype=np.int64)
    np.add.at(cover, gu[pm], 1)
    np.add.at(cover, gv[pm], 1)
    if np.any(cover != 1):
        raise ValueError("not a perfect matching of the expanded dual")
    E = dual.num_intercity
    eq = np.zeros(E, dtype=bool)
    eq[pm[pm < E]] = True
    n = dual.primal.num_vertices
    x = np.zeros(n, dtype=np.int8)
    adj = dual.primal.graph.adjacency()
    x[0] = 1
    stack = [0]
    while stack:
        v = stack.pop()
        for w, e in adj[v]:
            want = x[v] if eq[e] else -x[v]
            if x[w] == 0:
                x[w] = want
                stack.append(w)
            elif x[w] != want:
                raise ValueError("matching is not the image of a spin configuration")
    if np.any(x == 0):
        raise ValueError("primal graph is disconnected")
    return x


# ---------------------------------------------------------------------------
# Pfaffian orientation
# ---------------------------------------------------------------------------

def pfaffian_orient(emb: PlanarEmbedding, root_face: int = 0) -> np.ndarray:
    """Orientation (``+1``: first endpoint to second) odd on every inner face.

    A spanning tree is oriented arbitrarily; the remaining edges form a tree
    of the dual and are fixed from its leaves towards ``root_face``.
    """
    g = emb.graph
    m = g.num_edges
    orient = np.ones(m, dtype=np.int8)
    if m == 0:
        return orient
    faces = face_cycles(emb)
    face_of = [0] * (2 * m)
    for i, f in enumerate(faces):
        for d in f:
            face_of[d] = i
    in_tree = bytearray(m)
    seen = bytearray(g.num_vertices)
    for s in range(g.num_vertices):
        if seen[s]:
            continue
        seen[s] = 1
        stack = [s]
        while stack:
            v = stack.pop()
            for d in emb.rotation[v]:
                w = emb.head(d)
                if not seen[w]:
                    seen[w] = 1
                    in_tree[d >> 1] = 1
                    stack.append(w)
    nf = len(faces)
    dual_adj: list[list[tuple[int, int]]] = [[] for _ in range(nf)]
    for e in range(m):
        if not in_tree[e]:
            a, b = face_of[2 * e], face_of[2 * e + 1]
            dual_adj[a].append((b, e))
            dual_adj[b].append((a, e))
    par_edge = [-1] * nf
    visited = bytearray(nf)
    visited[root_face] = 1
    order = [root_face]
    for f in order:
        for h, e in dual_adj[f]:
            if not visited[h]:
                visited[h] = 1
                par_edge[h] = e
                order.append(h)
    ori = orient.tolist()
    for f in reversed(order[1:]):
        pe = par_edge[f]
        cnt = 0
        dpar = -1
        for d in faces[f]:
            k = d >> 1
            if k == pe:
                dpar = d
                continue
            if (ori[k] == 1) == (d & 1 == 0):
                cnt += 1
        along = cnt % 2 == 0
        ori[pe] = 1 if along == (dpar & 1 == 0) else -1
    return np.asarray(ori, dtype=np.int8)


# ---------------------------------------------------------------------------
# Kasteleyn system
# ---------------------------------------------------------------------------

@dataclass(eq=False)
class KasteleynSystem:
    """Signed weight matrix ``K`` with its pairing and elimination order.

    ``K[t, h] = w`` and ``K[h, t] = -w`` for every oriented edge ``t -> h``.
    Pair ``k`` is the base-matching edge ``(pairs[k, 0], pairs[k, 1])``; in
    the scalar picture those are vertices ``2k`` and ``2k + 1``.
    """

    num_vertices: int
    tails: np.ndarray
    heads: np.ndarray
    weights: np.ndarray
    pairs: np.ndarray
    order: np.ndarray
    num_tail: int
    flags: list[str] = field(default_factory=list)

    @property
    def num_pairs(self) -> int:
        return len(self.pairs)

    def matrix(self) -> np.ndarray:
        n = self.num_vertices
        K = np.zeros((n, n))
        np.add.at(K, (self.tails, self.heads), self.weights)
        np.add.at(K, (self.heads, self.tails), -self.weights)
        return K

    def vertex_order(self) -> np.ndarray:
        """Vertices in elimination order, the two ends of a pair adjacent."""
        return self.pairs[self.order].reshape(-1)

    def kbar(self) -> np.ndarray:
        """``K`` in elimination order with columns swapped inside every pair."""
        vo = self.vertex_order()
        K = self.matrix()[np.ix_(vo, vo)]
        swap = np.arange(len(vo)) ^ 1
        return K[:, swap]

    def assemble(self):
        """Lower block-triangular CSC arrays of ``K`` in elimination order."""
        P = self.num_pairs
        n = self.num_vertices
        rank = np.empty(P, dtype=np.int64)
        rank[self.order] = np.arange(P)
        pid = np.empty(n, dtype=np.int64)
        pos = np.empty(n, dtype=np.int64)
        pid[self.pairs[:, 0]] = np.arange(P)
        pid[self.pairs[:, 1]] = np.arange(P)
        pos[self.pairs[:, 0]] = 0
        pos[self.pairs[:, 1]] = 1
        rv = np.concatenate([self.tails, self.heads])
        cv = np.concatenate([self.heads, self.tails])
        val = np.concatenate([self.weights, -self.weights])
        R = rank[pid[rv]]
        C = rank[pid[cv]]
        slot = 2 * pos[rv] + pos[cv]
        diag = np.zeros((P, 4))
        on = R == C
        np.add.at(diag, (R[on], slot[on]), val[on])
        low = R > C
        key = C[low] * P + R[low]
        uniq, inv = np.unique(key, return_inverse=True)
        vals = np.zeros((len(uniq), 4))
        np.add.at(vals, (inv, slot[low]), val[low])
        cols = uniq // P
        rowidx = np.ascontiguousarray(uniq % P, dtype=np.int64)
        colptr = np.searchsorted(cols, np.arange(P + 1)).astype(np.int64)
        return colptr, rowidx, vals, diag


def contracted_rotation(emb: PlanarEmbedding, pairs: np.ndarray, pair_edges: np.ndarray) -> list[list[int]]:
    """Rotation lists of the graph obtained by contracting every pair's edge.

    Loops vanish; of parallel edges only the one with the smallest id stays,
    at both ends, so the result is a simple planar rotation system.
    """
    g = emb.graph
    n = g.num_vertices
    P = len(pairs)
    pid = np.empty(n, dtype=np.int64)
    pid[pairs[:, 0]] = np.arange(P)
    pid[pairs[:, 1]] = np.arange(P)
    e = np.asarray(g.edges, dtype=np.int64).reshape(-1, 2)
    pu, pv = pid[e[:, 0]], pid[e[:, 1]]
    lo, hi = np.minimum(pu, pv), np.maximum(pu, pv)
    key = lo * P + hi
    ids = np.arange(len(e))
    o = np.lexsort((ids, key))
    first = np.ones(len(o), dtype=bool)
    first[1:] = key[o][1:] != key[o][:-1]
    keep = np.zeros(len(e), dtype=bool)
    keep[o[first]] = True
    keep &= pu != pv
    keep_l = keep.tolist()
    pid_l = pid.tolist()
    heads = e[:, ::-1].reshape(-1).tolist()   # head of dart d
    out = []
    for p in range(P):
        me = int(pair_edges[p])
        row = []
        for end in (int(pairs[p, 0]), int(pairs[p, 1])):
            rot = emb.rotation[end]
            i = next(i for i, d in enumerate(rot) if d >> 1 == me)
            for d in rot[i + 1:] + rot[:i]:
                if keep_l[d >> 1]:
                    row.append(pid_l[heads[d]])
        out.append(row)
    return out


def build_kasteleyn(host: Graph, weights, orientation, base_matching, *,
                    embedding: PlanarEmbedding | None = None,
                    forced_tail_vertices=None, leaf_size: int = 16,
                    vertex_rank=None) -> KasteleynSystem:
    """Kasteleyn system over ``host`` paired by ``base_matching`` (edge ids).

    With an ``embedding`` the pairs are ordered by nested dissection of the
    contracted graph.  Alternatively ``vertex_rank`` (a nested dissection
    position per host vertex) orders each pair by its later endpoint.
    ``forced_tail_vertices`` pushes the pairs touching those vertices to the
    end, where they are kept as a dense block.
    """
    n = host.num_vertices
    e = np.asarray(host.edges, dtype=np.int64).reshape(-1, 2)
    w = np.asarray(weights, dtype=np.float64)
    ori = np.asarray(orientation)
    if np.any(w <= 0):
        raise ValueError("weights must be positive")
    tails = np.where(ori > 0, e[:, 0], e[:, 1])
    heads = np.where(ori > 0, e[:, 1], e[:, 0])
    bm = np.asarray(base_matching, dtype=np.int64)
    cover = np.zeros(n, dtype=np.int64)
    np.add.at(cover, e[bm, 0], 1)
    np.add.at(cover, e[bm, 1], 1)
    if n % 2 or len(bm) * 2 != n or np.any(cover != 1):
        raise EmptyMatchingSet("base matching is not a perfect matching of the host")
    pairs = e[bm]
    P = len(pairs)
    forced_pairs: list[int] = []
    if forced_tail_vertices is not None and len(forced_tail_vertices):
        pid = np.empty(n, dtype=np.int64)
        pid[pairs[:, 0]] = np.arange(P)
        pid[pairs[:, 1]] = np.arange(P)
        forced_pairs = list(dict.fromkeys(pid[np.asarray(forced_tail_vertices)].tolist()))
    if vertex_rank is not None:
        rank = np.asarray(vertex_rank)
        key = np.maximum(rank[pairs[:, 0]], rank[pairs[:, 1]])
        if forced_pairs:
            key = key.astype(np.float64)
            key[forced_pairs] = np.inf
        order = np.argsort(key, kind="stable").tolist()
        ntail = len(forced_pairs) if forced_pairs else P
    elif embedding is not None and P > leaf_size:
        nbrs = contracted_rotation(embedding, pairs, bm)
        if forced_pairs:
            fmask = np.zeros(P, dtype=bool)
            fmask[forced_pairs] = True
            rest = np.nonzero(~fmask)[0].tolist()
            local = {v: i for i, v in enumerate(rest)}
            sub = [[local[w_] for w_ in nbrs[v] if not fmask[w_]] for v in rest]
            dis = dissect(sub, leaf_size)
            order = [rest[i] for i in dis.order()] + forced_pairs
            ntail = len(forced_pairs)
        else:
            dis = dissect(nbrs, leaf_size)
            order = dis.order()
            root = dis.nodes[dis.root]
            ntail = len(root.separator) if root.children else P
    else:
        fset = set(forced_pairs)
        order = [p for p in range(P) if p not in fset] + forced_pairs
        ntail = len(forced_pairs) if forced_pairs else P
    return KasteleynSystem(n, tails, heads, w, pairs, np.asarray(order, dtype=np.int64), ntail)


def schur_tail(ks: KasteleynSystem) -> tuple[float, np.ndarray | None]:
    """Eliminate all non-tail pairs.

    Returns ``(log |det|`` of the eliminated part, dense tail Schur complement)``;
    the tail is ``None`` (and ``"dense-fallback"`` is flagged) when a pivot
    block was numerically singular.
    """
    colptr, rowidx, vals, diag = ks.assemble()
    logabs, status, _, T = elimination.factor(
        ks.num_pairs, ks.num_tail, colptr, rowidx, np.ascontiguousarray(vals),
        np.ascontiguousarray(diag), PIVOT_RTOL)
    if status != 0:
        ks.flags.append("dense-fallback")
        return 0.0, None
    return logabs, T


def _dense_logdet(K: np.ndarray, ks: KasteleynSystem) -> float:
    if K.shape[0] == 0:
        return 0.0
    sign, ld = np.linalg.slogdet(K)
    if sign <= 0:
        if sign == 0:
            raise EmptyMatchingSet("Kasteleyn matrix is singular")
        ks.flags.append("negative-determinant")
    return float(ld)


def log_pm_partition(ks: KasteleynSystem) -> float:
    """``log`` of the weighted perfect-matching sum, i.e. ``0.5 log det K``."""
    logabs, T = schur_tail(ks)
    if T is None:
        if ks.num_vertices > DENSE_FALLBACK_LIMIT:
            raise ArithmeticError("singular pivot block and host too large for the dense fallback")
        return 0.5 * _dense_logdet(ks.matrix(), ks)
    return 0.5 * (logabs + _dense_logdet(T, ks))


# ---------------------------------------------------------------------------
# planar Ising partition function
# ---------------------------------------------------------------------------

@dataclass(eq=False)
class PlanarPipeline:
    """All artifacts of one planar model's reduction to matchings."""

    model: IsingModel
    dual: ExpandedDual
    orientation: np.ndarray
    kasteleyn: KasteleynSystem
    log_pm: float

    @property
    def log_z(self) -> float:
        return LOG2 + self.log_pm - float(np.sum(self.dual.primal.couplings))


def planar_pipeline(model: IsingModel, emb: PlanarEmbedding | None = None,
                    leaf_size: int = 16) -> PlanarPipeline:
    """Reduce a biconnected planar model with at least three vertices."""
    if model.num_vertices < 3:
        raise GraphError("the matching reduction needs at least three vertices")
    if emb is None:
        emb = planar_embed(model.graph)
        if emb is None:
            raise GraphError("model graph is not planar")
    tm, temb = triangulate(model, emb)
    dual = build_expanded_dual(tm, temb)
    orient = pfaffian_orient(dual.embedding)
    base = np.arange(dual.num_intercity)          # matching of the all-(+1) configuration
    ks = build_kasteleyn(dual.graph, dual.weights, orient, base,
                         embedding=dual.embedding, leaf_size=leaf_size)
    return PlanarPipeline(model, dual, orient, ks, log_pm_partition(ks))


def _log_z_small(model: IsingModel) -> float:
    n = model.num_vertices
    if n == 1:
        return LOG2
    # two vertices, at most one edge
    j = float(model.couplings[0]) if model.num_edges else 0.0
    return LOG2 + float(np.logaddexp(j, -j))


def log_partition_planar_ising(model: IsingModel, emb: PlanarEmbedding | None = None) -> float:
    """``log Z`` of a connected planar model."""
    n = model.num_vertices
    if n <= 2:
        return _log_z_small(model)
    if is_biconnected(model.graph):
        return planar_pipeline(model, emb).log_z
    dec = biconnected_decompose(model.graph)
    total = -LOG2 * (len(dec.components) - 1)
    for comp, emap in zip(dec.components, dec.edge_maps):
        sub = IsingModel(comp, model.couplings[np.asarray(emap, dtype=np.int64)])
        total += log_partition_planar_ising(sub)
    return total
