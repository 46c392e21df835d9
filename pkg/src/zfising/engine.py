"""Exact inference and sampling for zero-field Ising models without K33 minors.

A model is split into connected components, then into blocks (biconnected
components), then into triconnected components.  Adjacent triconnected
components that are not small nonplanar ones are glued back together, since a
2-sum of planar graphs is planar; what remains is a tree whose nodes are
planar graphs, small nonplanar graphs (enumerated) and two-vertex bonds.

Every non-root node summarises its subtree by two numbers, the log partition
sums with its two parent-edge spins equal or opposite.  Writing those as
``A +/- B``, a child acts on its parent as an extra coupling ``B`` on the
shared edge and a constant factor ``exp(A)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import logsumexp

from .decomp import BOND, PLANAR, SMALL_NONPLANAR, classify_component, triconnected_decompose
from .graph import Graph, biconnected_decompose, connected_components, planar_embed
from .kasteleyn import DENSE_FALLBACK_LIMIT, LOG2, EmptyMatchingSet, build_expanded_dual, \
    build_kasteleyn, pfaffian_orient, pm_to_spins, schur_tail, triangulate
from .model import IsingModel
from .wilson import Condition, PMSampler, ising_pm_sampler

LOG_FLOOR = -745.0
PROB_TOL = 1e-8
MAX_ENUMERATION = 20


@dataclass(frozen=True)
class PiTable:
    """Log partition sums of a subtree given its parent-edge spins."""

    log_pi_equal: float
    log_pi_unequal: float

    @property
    def A(self) -> float:
        return 0.5 * (self.log_pi_equal + self.log_pi_unequal)

    @property
    def B(self) -> float:
        return 0.5 * (self.log_pi_equal - self.log_pi_unequal)

    def log_pi(self, x1: int, x2: int) -> float:
        return self.log_pi_equal if x1 * x2 > 0 else self.log_pi_unequal


def log1mexp(log_p: float) -> float:
    """``log(1 - exp(log_p))`` for ``log_p <= 0``, floored at ``LOG_FLOOR``."""
    if log_p >= 0.0:
        return LOG_FLOOR
    if log_p > -LOG2:
        val = math.log(-math.expm1(log_p))
    else:
        val = math.log1p(-math.exp(log_p))
    return max(val, LOG_FLOOR)


# ---------------------------------------------------------------------------
# nodes
# ---------------------------------------------------------------------------

@dataclass(eq=False)
class _PlanarArtifacts:
    dual: object
    orientation: np.ndarray
    star_edge: int                 # intercity edge of the parent edge, -1 at the root
    log_z: float
    log_p_equal: float
    sampler: PMSampler | None = None
    spin_cache: dict = field(default_factory=dict)


@dataclass(eq=False)
class NodeContext:
    """One node of the coarsened tree with its node-local model.

    ``edges`` are simple and local; ``real_couplings`` sums the model couplings
    carried by each local edge.  The parent edge is ``edges[parent_slot]`` and
    child ``children[i]`` hangs on ``edges[child_slots[i]]``.
    """

    kind: str
    vertices: list[int]
    edges: list[tuple[int, int]]
    real_couplings: np.ndarray
    components: list[int]
    parent: int = -1
    parent_slot: int = -1
    children: list[int] = field(default_factory=list)
    child_slots: list[int] = field(default_factory=list)
    couplings: np.ndarray | None = None
    offset: float = 0.0
    pi: PiTable | None = None
    log_z_local: float = float("nan")
    planar: _PlanarArtifacts | None = None
    enum_cache: dict = field(default_factory=dict)
    flags: set = field(default_factory=set)

    @property
    def num_vertices(self) -> int:
        return len(self.vertices)

    @property
    def endpoints(self) -> tuple[int, int]:
        return self.edges[self.parent_slot]

    def model(self) -> IsingModel:
        return IsingModel(Graph(len(self.vertices), tuple(self.edges)), self.couplings)


def _all_spins(n: int) -> np.ndarray:
    codes = np.arange(1 << n, dtype=np.int64)
    return (1 - 2 * ((codes[:, None] >> np.arange(n)) & 1)).astype(np.int8)


def _enumeration(node: NodeContext):
    """All configurations of the node with local vertex 0 at +1, and their log weights."""
    key = "all"
    hit = node.enum_cache.get(key)
    if hit is None:
        n = node.num_vertices
        if n > MAX_ENUMERATION:
            raise ValueError(f"cannot enumerate a node with {n} vertices")
        X = _all_spins(n)
        X = X[X[:, 0] == 1]
        e = np.asarray(node.edges, dtype=np.int64).reshape(-1, 2)
        logw = (X[:, e[:, 0]] * X[:, e[:, 1]]).astype(np.float64) @ node.couplings
        hit = node.enum_cache[key] = (X, logw)
    return hit


def _planar_artifacts(node: NodeContext, model: IsingModel, star: int) -> _PlanarArtifacts:
    emb = planar_embed(model.graph)
    if emb is None:
        raise ValueError("node graph is not planar")
    tm, temb = triangulate(model, emb)
    dual = build_expanded_dual(tm, temb)
    orient = pfaffian_orient(dual.embedding)
    E = dual.num_intercity
    forced = [2 * star, 2 * star + 1] if star >= 0 else None
    ks = build_kasteleyn(dual.graph, dual.weights, orient, np.arange(E),
                         embedding=dual.embedding, forced_tail_vertices=forced)
    logabs, T = schur_tail(ks)
    if T is None:
        if ks.num_vertices > DENSE_FALLBACK_LIMIT:
            raise ArithmeticError("singular pivot block and node too large for the dense fallback")
        node.flags.add("dense-fallback")
        K = ks.matrix()
        log_zstar = 0.5 * np.linalg.slogdet(K)[1]
        if star >= 0:
            keep = np.setdiff1d(np.arange(K.shape[0]), forced)
            log_zv = 0.5 * np.linalg.slogdet(K[np.ix_(keep, keep)])[1]
    elif star >= 0:
        s = abs(T[0, 1])
        if s == 0.0:
            raise EmptyMatchingSet("expanded dual has no perfect matching")
        log_zv = 0.5 * logabs
        log_zstar = log_zv + math.log(s)
    else:
        sign, ld = np.linalg.slogdet(T) if T.size else (1.0, 0.0)
        if sign == 0:
            raise EmptyMatchingSet("expanded dual has no perfect matching")
        log_zstar = 0.5 * (logabs + ld)
    log_z = LOG2 + log_zstar - float(np.sum(tm.couplings))
    log_p = 0.0
    if star >= 0:
        log_p = math.log(dual.weights[star]) + log_zv - log_zstar
        if log_p > PROB_TOL:
            raise ArithmeticError(f"parent-edge agreement probability exp({log_p}) exceeds one")
        log_p = min(log_p, 0.0)
    return _PlanarArtifacts(dual, orient, star, log_z, log_p)


def _prepare_couplings(node: NodeContext, children_pi) -> None:
    J = np.array(node.real_couplings, dtype=np.float64)
    offset = 0.0
    for slot, pi in zip(node.child_slots, children_pi):
        J[slot] += pi.B
        offset += pi.A
    node.couplings = J
    node.offset = offset


def process_node_pi(node: NodeContext, children_pi) -> PiTable:
    """Summary of a non-root node given the summaries of its children."""
    _prepare_couplings(node, children_pi)
    p, t = node.endpoints
    if node.kind == BOND:
        j = float(node.couplings[node.parent_slot])
        node.pi = PiTable(node.offset + j, node.offset - j)
    elif node.kind == SMALL_NONPLANAR:
        X, logw = _enumeration(node)
        # configurations with x_p = -1 mirror those with x_p = +1
        same = X[:, p] == X[:, t]
        node.pi = PiTable(node.offset + float(logsumexp(logw[same])),
                          node.offset + float(logsumexp(logw[~same])))
    else:
        art = _planar_artifacts(node, node.model(), node.parent_slot)
        node.planar = art
        node.log_z_local = art.log_z
        half = node.offset + art.log_z - LOG2
        node.pi = PiTable(half + art.log_p_equal, half + log1mexp(art.log_p_equal))
    return node.pi


def root_partition(node: NodeContext, children_pi) -> float:
    """``log Z`` of the block whose tree is rooted at ``node``."""
    _prepare_couplings(node, children_pi)
    if node.kind == BOND:
        j = float(node.couplings[0])
        node.log_z_local = LOG2 + float(np.logaddexp(j, -j))
    elif node.kind == SMALL_NONPLANAR:
        _, logw = _enumeration(node)
        node.log_z_local = LOG2 + float(logsumexp(logw))
    else:
        art = _planar_artifacts(node, node.model(), -1)
        node.planar = art
        node.log_z_local = art.log_z
    return node.offset + node.log_z_local


def _planar_spins(node: NodeContext, rng, condition: Condition) -> np.ndarray:
    art = node.planar
    if art.sampler is None:
        art.sampler = ising_pm_sampler(art.dual, art.orientation)
    pm = art.sampler.sample(rng, condition)
    key = (condition, pm.edges.tobytes())
    x = art.spin_cache.get(key) if art.sampler.memoize else None
    if x is None:
        x = pm_to_spins(art.dual, pm.edges)
        if art.sampler.memoize:
            art.spin_cache[key] = x
    return x


def condition_and_sample_node(node: NodeContext, x_p: int, x_t: int, rng) -> np.ndarray:
    """Node spins drawn given the spins at the ends of its parent edge."""
    p, t = node.endpoints
    if node.kind == BOND:
        x = np.zeros(node.num_vertices, dtype=np.int8)
        x[p], x[t] = x_p, x_t
        return x
    if node.kind == SMALL_NONPLANAR:
        key = ("cond", x_p * x_t)
        hit = node.enum_cache.get(key)
        if hit is None:
            X, logw = _enumeration(node)
            sel = np.nonzero((X[:, p] * X[:, t]) == x_p * x_t)[0]
            w = np.exp(logw[sel] - logw[sel].max())
            hit = node.enum_cache[key] = (X[sel], np.cumsum(w))
        Xs, cum = hit
        i = min(int(np.searchsorted(cum, rng.random() * cum[-1], side="right")), len(cum) - 1)
        x = Xs[i]
    else:
        k = node.planar.star_edge
        cond = Condition(predrawn=(k,)) if x_p == x_t else Condition(removed_edges=(k,))
        x = _planar_spins(node, rng, cond)
    if x[p] != x_p:
        x = -x
    if x[t] != x_t:
        raise AssertionError("sampled node disagrees with its parent edge")
    return x


def _sample_root(node: NodeContext, rng) -> np.ndarray:
    if node.kind == BOND:
        j = float(node.couplings[0])
        x0 = 1 if rng.random() < 0.5 else -1
        same = rng.random() < 1.0 / (1.0 + math.exp(-2.0 * j))
        x = np.array([x0, x0 if same else -x0], dtype=np.int8)
        return x
    if node.kind == SMALL_NONPLANAR:
        hit = node.enum_cache.get("root")
        if hit is None:
            X, logw = _enumeration(node)
            hit = node.enum_cache["root"] = (X, np.cumsum(np.exp(logw - logw.max())))
        X, cum = hit
        i = min(int(np.searchsorted(cum, rng.random() * cum[-1], side="right")), len(cum) - 1)
        x = X[i]
    else:
        x = _planar_spins(node, rng, Condition())
    return -x if rng.random() < 0.5 else x


# ---------------------------------------------------------------------------
# blocks
# ---------------------------------------------------------------------------

def _coarsen(g: Graph, couplings: np.ndarray, size_bound: int) -> tuple[list[NodeContext], int, dict]:
    """Coarsened component tree of a biconnected block with >= 3 vertices."""
    comps = triconnected_decompose(g)
    kinds = [classify_component(c, size_bound) for c in comps]
    stats = {"triconnected": len(comps), "planar": kinds.count(PLANAR),
             "small_nonplanar": kinds.count(SMALL_NONPLANAR), "bonds": kinds.count(BOND)}
    parent = list(range(len(comps)))

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for i, c in enumerate(comps):
        if kinds[i] == SMALL_NONPLANAR:
            continue
        for j, _ in c.virtual_links.values():
            if kinds[j] != SMALL_NONPLANAR:
                parent[find(i)] = find(j)
    members: dict[int, list[int]] = {}
    for i in range(len(comps)):
        members.setdefault(find(i), []).append(i)
    group_of = {i: gi for gi, ms in enumerate(members.values()) for i in ms}
    nodes: list[NodeContext] = []
    slot_of: list[dict] = []
    links = []                       # (group a, key, group b)
    for gi, ms in enumerate(members.values()):
        vloc: dict[int, int] = {}
        eidx: dict[tuple[int, int], int] = {}
        J: list[float] = []
        for ci in ms:
            c = comps[ci]
            for k, (u, v) in enumerate(c.graph.edges):
                gu, gv = c.vertex_map[u], c.vertex_map[v]
                real = c.edge_ids[k] != -1
                if not real and group_of[c.virtual_links[k][0]] == gi:
                    continue          # glued inside the group
                key = (gu, gv) if gu < gv else (gv, gu)
                for x in key:
                    if x not in vloc:
                        vloc[x] = len(vloc)
                if key not in eidx:
                    eidx[key] = len(J)
                    J.append(0.0)
                if real:
                    J[eidx[key]] += float(couplings[c.edge_ids[k]])
                else:
                    peer = group_of[c.virtual_links[k][0]]
                    if gi < peer:
                        links.append((gi, key, peer))
        verts = [0] * len(vloc)
        for x, i in vloc.items():
            verts[i] = x
        edges = [None] * len(eidx)
        for (a, b), i in eidx.items():
            edges[i] = (vloc[a], vloc[b])
        kind = kinds[ms[0]] if len(ms) == 1 else PLANAR
        if len(verts) == 2:
            kind = BOND
        elif kind == BOND:
            kind = PLANAR
        nodes.append(NodeContext(kind, verts, edges, np.asarray(J), sorted(ms)))
        slot_of.append(eidx)
    adj: list[list[tuple[int, tuple]]] = [[] for _ in nodes]
    for a, key, b in links:
        adj[a].append((b, key))
        adj[b].append((a, key))
    root = max(range(len(nodes)), key=lambda i: (nodes[i].kind != BOND, nodes[i].kind == PLANAR,
                                                 nodes[i].num_vertices, -i))
    seen = {root}
    queue = [root]
    for a in queue:
        for b, key in adj[a]:
            if b in seen:
                if nodes[a].parent != b:
                    raise AssertionError("coarsened component graph is not a tree")
                continue
            seen.add(b)
            nodes[b].parent = a
            nodes[b].parent_slot = slot_of[b][key]
            nodes[a].children.append(b)
            nodes[a].child_slots.append(slot_of[a][key])
            queue.append(b)
    stats["nodes"] = len(nodes)
    stats["order"] = queue
    return nodes, root, stats


@dataclass(eq=False)
class BlockPlan:
    """Inference artifacts of one biconnected block."""

    vertices: list[int]
    edges: list[tuple[int, int]]
    couplings: np.ndarray
    nodes: list[NodeContext] = field(default_factory=list)
    root: int = -1
    order: list[int] = field(default_factory=list)
    log_z: float = float("nan")
    stats: dict = field(default_factory=dict)

    @property
    def num_vertices(self) -> int:
        return len(self.vertices)


def _infer_block(block: BlockPlan, size_bound: int) -> None:
    n = block.num_vertices
    if n == 2:
        j = float(np.sum(block.couplings))
        block.log_z = LOG2 + float(np.logaddexp(j, -j))
        block.stats = {"nodes": 0}
        return
    g = Graph(n, tuple(block.edges))
    if planar_embed(g) is not None:
        node = NodeContext(PLANAR, list(range(n)), list(block.edges),
                           np.asarray(block.couplings, dtype=np.float64), [0])
        block.nodes, block.root, block.order = [node], 0, [0]
        block.stats = {"triconnected": None, "nodes": 1}
    else:
        nodes, root, stats = _coarsen(g, block.couplings, size_bound)
        block.nodes, block.root, block.order = nodes, root, stats.pop("order")
        block.stats = stats
    for i in reversed(block.order):
        node = block.nodes[i]
        kids = [block.nodes[c].pi for c in node.children]
        if i == block.root:
            block.log_z = root_partition(node, kids)
        else:
            process_node_pi(node, kids)


def _sample_block(block: BlockPlan, rng) -> np.ndarray:
    n = block.num_vertices
    x = np.zeros(n, dtype=np.int8)
    if n == 2:
        j = float(np.sum(block.couplings))
        x[0] = 1 if rng.random() < 0.5 else -1
        x[1] = x[0] if rng.random() < 1.0 / (1.0 + math.exp(-2.0 * j)) else -x[0]
        return x
    for i in block.order:
        node = block.nodes[i]
        if i == block.root:
            xs = _sample_root(node, rng)
        else:
            p, t = node.endpoints
            xs = condition_and_sample_node(node, int(x[node.vertices[p]]), int(x[node.vertices[t]]), rng)
        x[node.vertices] = xs
    return x


# ---------------------------------------------------------------------------
# whole models
# ---------------------------------------------------------------------------

@dataclass(eq=False)
class _Part:
    """A connected component: its blocks and the order they are glued in."""

    vertices: list[int]
    blocks: list[BlockPlan]
    # (block index, articulation vertex shared with an earlier block or -1)
    glue: list[tuple[int, int]]


class IsingEngine:
    """Inference artifacts of one model, reused by every sample."""

    def __init__(self, model: IsingModel, size_bound: int = 5):
        if size_bound > MAX_ENUMERATION:
            raise ValueError(f"size bound is capped at {MAX_ENUMERATION}")
        self.model = model
        self.size_bound = size_bound
        g = model.graph
        J = np.asarray(model.couplings, dtype=np.float64)
        self.parts: list[_Part] = []
        total = 0.0
        for verts in connected_components(g.num_vertices, g.edges):
            if len(verts) == 1:
                self.parts.append(_Part(verts, [], []))
                total += LOG2
                continue
            loc = {v: i for i, v in enumerate(verts)}
            eids = [k for k, (u, _) in enumerate(g.edges) if u in loc]
            sub = Graph(len(verts), tuple((loc[g.edges[k][0]], loc[g.edges[k][1]]) for k in eids))
            dec = biconnected_decompose(sub)
            blocks = []
            for comp, vmap, emap in zip(dec.components, dec.vertex_maps, dec.edge_maps):
                blk = BlockPlan([verts[v] for v in vmap], list(comp.edges), J[[eids[k] for k in emap]])
                _infer_block(blk, size_bound)
                blocks.append(blk)
                total += blk.log_z
            total -= LOG2 * (len(blocks) - 1)
            glue = [(0, -1)]
            placed = {0}
            for b, _ in glue:
                for c in dec.tree[b]:
                    if c not in placed:
                        placed.add(c)
                        glue.append((c, verts[dec.tree_joint[(b, c)]]))
            self.parts.append(_Part(verts, blocks, glue))
        self.log_z = total

    @property
    def flags(self) -> list[str]:
        out: set[str] = set()
        for part in self.parts:
            for blk in part.blocks:
                for node in blk.nodes:
                    out |= node.flags
                    if node.planar is not None and node.planar.sampler is not None:
                        out |= node.planar.sampler.flags
        return sorted(out)

    def component_stats(self) -> dict:
        stats = {"connected_components": len(self.parts), "blocks": 0, "triconnected_components": 0,
                 "planar_nodes": 0, "small_nonplanar_nodes": 0, "bond_nodes": 0,
                 "largest_planar_node": 0}
        for part in self.parts:
            stats["blocks"] += len(part.blocks)
            for blk in part.blocks:
                stats["triconnected_components"] += blk.stats.get("triconnected") or (1 if blk.nodes else 0)
                for node in blk.nodes:
                    if node.kind == PLANAR:
                        stats["planar_nodes"] += 1
                        stats["largest_planar_node"] = max(stats["largest_planar_node"], node.num_vertices)
                    elif node.kind == SMALL_NONPLANAR:
                        stats["small_nonplanar_nodes"] += 1
                    else:
                        stats["bond_nodes"] += 1
        return stats

    def sample(self, rng) -> np.ndarray:
        x = np.zeros(self.model.num_vertices, dtype=np.int8)
        for part in self.parts:
            if not part.blocks:
                x[part.vertices[0]] = 1 if rng.random() < 0.5 else -1
                continue
            # blocks are drawn independently and glued by global flips
            for b, joint in part.glue:
                blk = part.blocks[b]
                xb = _sample_block(blk, rng)
                if joint >= 0 and xb[blk.vertices.index(joint)] != x[joint]:
                    xb = -xb
                x[blk.vertices] = xb
        return x

    def samples(self, rng, count: int) -> np.ndarray:
        out = np.empty((count, self.model.num_vertices), dtype=np.int8)
        for i in range(count):
            out[i] = self.sample(rng)
        return out


def infer_log_z(model: IsingModel, size_bound: int = 5) -> float:
    """``log Z`` of a zero-field model whose nonplanar triconnected parts are small."""
    return IsingEngine(model, size_bound).log_z


def sample_spins(model: IsingModel, rng, *, engine: IsingEngine | None = None) -> np.ndarray:
    """One exact sample; pass ``engine`` to reuse the inference artifacts."""
    if engine is None:
        engine = IsingEngine(model)
    return engine.sample(rng)
