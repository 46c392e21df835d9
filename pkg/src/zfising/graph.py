"""Graphs, biconnected components, combinatorial planar embeddings and faces.

Edges carry stable integer ids (their position in ``Graph.edges``).  An
embedding is a rotation system over *darts*: dart ``2*e`` runs from the first
endpoint of edge ``e`` to the second, dart ``2*e + 1`` runs backwards.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

import networkx as nx

REAL = "real"
VIRTUAL = "virtual"


class GraphError(ValueError):
    """Malformed graph input."""


@dataclass(frozen=True)
class Graph:
    num_vertices: int
    edges: tuple[tuple[int, int], ...]
    kinds: tuple[str, ...] = ()
    multigraph: bool = False

    def __post_init__(self):
        if not self.kinds:
            object.__setattr__(self, "kinds", (REAL,) * len(self.edges))

    @property
    def num_edges(self) -> int:
        return len(self.edges)

    def adjacency(self) -> list[list[tuple[int, int]]]:
        """Per-vertex list of ``(neighbour, edge_id)``."""
        adj: list[list[tuple[int, int]]] = [[] for _ in range(self.num_vertices)]
        for i, (u, v) in enumerate(self.edges):
            adj[u].append((v, i))
            adj[v].append((u, i))
        return adj

    def degree(self) -> list[int]:
        deg = [0] * self.num_vertices
        for u, v in self.edges:
            deg[u] += 1
            deg[v] += 1
        return deg

    def to_networkx(self) -> nx.Graph:
        g = nx.Graph()
        g.add_nodes_from(range(self.num_vertices))
        g.add_edges_from(self.edges)
        return g


def build_graph(num_vertices: int, edge_list: Iterable[Sequence[int]], *,
                kinds: Sequence[str] | None = None,
                multigraph: bool = False) -> Graph:
    """Validate an edge list and return a :class:`Graph`.

    Edge ids follow input order.  Parallel edges are rejected unless
    ``multigraph`` is set or one of the copies is virtual.
    """
    if num_vertices < 0:
        raise GraphError("negative vertex count")
    edges = []
    for pair in edge_list:
        u, v = int(pair[0]), int(pair[1])
        if not (0 <= u < num_vertices and 0 <= v < num_vertices):
            raise GraphError(f"edge ({u}, {v}) has an endpoint out of range")
        if u == v:
            raise GraphError(f"self-loop at vertex {u}")
        edges.append((u, v))
    kinds_t = tuple(kinds) if kinds is not None else (REAL,) * len(edges)
    if len(kinds_t) != len(edges):
        raise GraphError("kinds must match edges")
    if not multigraph:
        seen: dict[tuple[int, int], str] = {}
        for (u, v), kind in zip(edges, kinds_t):
            key = (u, v) if u < v else (v, u)
            if key in seen and kind == REAL and seen[key] == REAL:
                raise GraphError(f"duplicate edge {key}")
            seen[key] = kind
    return Graph(num_vertices, tuple(edges), kinds_t, multigraph)


def connected_components(num_vertices: int, edges: Sequence[tuple[int, int]]) -> list[list[int]]:
    parent = list(range(num_vertices))

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for u, v in edges:
        ru, rv = find(u), find(v)
        if ru != rv:
            parent[ru] = rv
    groups: dict[int, list[int]] = {}
    for v in range(num_vertices):
        groups.setdefault(find(v), []).append(v)
    return list(groups.values())


# ---------------------------------------------------------------------------
# biconnected components
# ---------------------------------------------------------------------------

@dataclass
class BiconnectedDecomposition:
    """Blocks of a connected graph.

    ``components[i]`` is a local :class:`Graph`; ``vertex_maps[i][k]`` is the
    global vertex of local vertex ``k`` and ``edge_maps[i][k]`` the global edge
    id of local edge ``k``.  ``tree`` is an adjacency list over component
    indices (component 0 is the root) whose edges join components sharing an
    articulation point; ``tree_joint[(i, j)]`` names that point.
    """

    components: list[Graph]
    vertex_maps: list[list[int]]
    edge_maps: list[list[int]]
    articulation_points: set[int]
    tree: list[list[int]]
    tree_joint: dict[tuple[int, int], int] = field(default_factory=dict)


def _block_edge_sets(num_vertices: int, edges: Sequence[tuple[int, int]]):
    """Iterative Hopcroft-Tarjan; returns (list of edge-id lists, articulation set)."""
    adj: list[list[tuple[int, int]]] = [[] for _ in range(num_vertices)]
    for i, (u, v) in enumerate(edges):
        adj[u].append((v, i))
        adj[v].append((u, i))
    disc = [-1] * num_vertices
    low = [0] * num_vertices
    blocks: list[list[int]] = []
    art: set[int] = set()
    timer = 0
    for root in range(num_vertices):
        if disc[root] != -1:
            continue
        disc[root] = low[root] = timer
        timer += 1
        root_children = 0
        estack: list[int] = []
        # frame: vertex, parent edge id, next adjacency index
        stack = [[root, -1, 0]]
        while stack:
            frame = stack[-1]
            v, pe, idx = frame
            if idx < len(adj[v]):
                frame[2] += 1
                w, eid = adj[v][idx]
                if eid == pe:
                    continue
                if disc[w] == -1:
                    estack.append(eid)
                    disc[w] = low[w] = timer
                    timer += 1
                    stack.append([w, eid, 0])
                elif disc[w] < disc[v]:
                    estack.append(eid)
                    if disc[w] < low[v]:
                        low[v] = disc[w]
                continue
            stack.pop()
            if not stack:
                break
            u = stack[-1][0]
            if low[v] < low[u]:
                low[u] = low[v]
            if low[v] >= disc[u]:
                if u == root:
                    root_children += 1
                else:
                    art.add(u)
                block = []
                while True:
                    eid = estack.pop()
                    block.append(eid)
                    if eid == pe:
                        break
                blocks.append(block)
        if root_children > 1:
            art.add(root)
    return blocks, art


def biconnected_decompose(g: Graph) -> BiconnectedDecomposition:
    """Split a connected graph into blocks joined in a tree.

    Isolated single vertices produce no component.  Raises :class:`GraphError`
    on disconnected input.
    """
    if g.num_vertices > 1 and len(connected_components(g.num_vertices, g.edges)) > 1:
        raise GraphError("biconnected_decompose expects a connected graph")
    blocks, art = _block_edge_sets(g.num_vertices, g.edges)
    components, vmaps, emaps = [], [], []
    for block in blocks:
        block = sorted(block)
        verts: dict[int, int] = {}
        local_edges = []
        for eid in block:
            u, v = g.edges[eid]
            for x in (u, v):
                if x not in verts:
                    verts[x] = len(verts)
            local_edges.append((verts[u], verts[v]))
        vmap = [0] * len(verts)
        for x, k in verts.items():
            vmap[k] = x
        components.append(Graph(len(verts), tuple(local_edges),
                                tuple(g.kinds[e] for e in block), g.multigraph))
        vmaps.append(vmap)
        emaps.append(block)

    # block tree: root at block 0, children hang off shared articulation points
    at_vertex: dict[int, list[int]] = {}
    for i, vmap in enumerate(vmaps):
        for x in vmap:
            if x in art:
                at_vertex.setdefault(x, []).append(i)
    tree: list[list[int]] = [[] for _ in components]
    joint: dict[tuple[int, int], int] = {}
    if components:
        seen_block = [False] * len(components)
        seen_vertex: set[int] = set()
        seen_block[0] = True
        queue = [0]
        for b in queue:
            for x in vmaps[b]:
                if x not in art or x in seen_vertex:
                    continue
                seen_vertex.add(x)
                for c in at_vertex[x]:
                    if not seen_block[c]:
                        seen_block[c] = True
                        tree[b].append(c)
                        tree[c].append(b)
                        joint[(b, c)] = joint[(c, b)] = x
                        queue.append(c)
    return BiconnectedDecomposition(components, vmaps, emaps, art, tree, joint)


def is_biconnected(g: Graph) -> bool:
    if g.num_vertices < 2:
        return False
    if len(connected_components(g.num_vertices, g.edges)) > 1:
        return False
    blocks, _ = _block_edge_sets(g.num_vertices, g.edges)
    return len(blocks) == 1


# ---------------------------------------------------------------------------
# embeddings
# ---------------------------------------------------------------------------

class PlanarEmbedding:
    """Rotation system of a graph.

    ``rotation[v]`` lists the darts leaving ``v`` in cyclic order.  Faces are
    the orbits of ``d -> succ(twin(d))`` where ``succ`` is the rotation
    successor at the head of ``d``.
    """

    __slots__ = ("graph", "rotation", "_succ", "_pred")

    def __init__(self, graph: Graph, rotation: Sequence[Sequence[int]]):
        self.graph = graph
        self.rotation = [list(r) for r in rotation]
        self._succ: list[int] | None = None
        self._pred: list[int] | None = None

    def tail(self, d: int) -> int:
        u, v = self.graph.edges[d >> 1]
        return v if d & 1 else u

    def head(self, d: int) -> int:
        u, v = self.graph.edges[d >> 1]
        return u if d & 1 else v

    def _links(self):
        if self._succ is None:
            nd = 2 * self.graph.num_edges
            succ = [-1] * nd
            pred = [-1] * nd
            for r in self.rotation:
                k = len(r)
                for i, d in enumerate(r):
                    succ[d] = r[(i + 1) % k]
                    pred[d] = r[i - 1]
            self._succ, self._pred = succ, pred
        return self._succ, self._pred

    def succ(self) -> list[int]:
        return self._links()[0]

    def pred(self) -> list[int]:
        return self._links()[1]

    def face_next(self) -> list[int]:
        succ = self.succ()
        return [succ[d ^ 1] for d in range(2 * self.graph.num_edges)]

    def validate(self) -> None:
        seen = [False] * (2 * self.graph.num_edges)
        for v, r in enumerate(self.rotation):
            for d in r:
                if self.tail(d) != v or seen[d]:
                    raise GraphError(f"inconsistent rotation at vertex {v}")
                seen[d] = True
        if not all(seen):
            raise GraphError("rotation system misses darts")


@dataclass(frozen=True)
class Face:
    """Boundary of one face as the cyclic list of darts around it."""

    darts: tuple[int, ...]

    def __len__(self):
        return len(self.darts)


def face_cycles(emb: PlanarEmbedding) -> list[list[int]]:
    nxt = emb.face_next()
    seen = [False] * len(nxt)
    faces = []
    for d0 in range(len(nxt)):
        if seen[d0]:
            continue
        cyc = []
        d = d0
        while not seen[d]:
            seen[d] = True
            cyc.append(d)
            d = nxt[d]
        if d != d0:
            raise GraphError("face traversal does not close")
        faces.append(cyc)
    return faces


def enumerate_faces(emb: PlanarEmbedding) -> list[Face]:
    """Faces of an embedded graph; every dart lies on exactly one face."""
    emb.validate()
    return [Face(tuple(c)) for c in face_cycles(emb)]


def euler_characteristic(emb: PlanarEmbedding) -> int:
    return emb.graph.num_vertices - emb.graph.num_edges + len(face_cycles(emb))


def planar_embed(g: Graph) -> PlanarEmbedding | None:
    """Rotation system of a planar drawing of ``g``, or ``None`` if nonplanar.

    Uses the left-right planarity test from networkx; parallel edges are
    allowed, they are placed next to their first copy.
    """
    simple: dict[tuple[int, int], list[int]] = {}
    for i, (u, v) in enumerate(g.edges):
        key = (u, v) if u < v else (v, u)
        simple.setdefault(key, []).append(i)
    ng = nx.Graph()
    ng.add_nodes_from(range(g.num_vertices))
    ng.add_edges_from(simple.keys())
    ok, emb = nx.check_planarity(ng)
    if not ok:
        return None
    rotation = []
    for v in range(g.num_vertices):
        r = []
        if v in emb:
            for w in emb.neighbors_cw_order(v):
                key = (v, w) if v < w else (w, v)
                ids = simple[key]
                # keep parallel copies in a consistent order at both ends
                seq = ids if v < w else ids[::-1]
                for eid in seq:
                    r.append(2 * eid + (0 if g.edges[eid][0] == v else 1))
        rotation.append(r)
    return PlanarEmbedding(g, rotation)


def induced_embedding(emb: PlanarEmbedding, keep_vertices: Sequence[int],
                      drop_edges: Iterable[int] = ()):
    """Restrict an embedding to a vertex subset (and optionally drop edges).

    Returns ``(sub_embedding, vertex_map, edge_map)`` with maps from local ids
    to ids of ``emb.graph``.
    """
    g = emb.graph
    local = {v: i for i, v in enumerate(keep_vertices)}
    dropped = set(drop_edges)
    new_id: dict[int, int] = {}
    edges, kinds, emap = [], [], []
    for eid, (u, v) in enumerate(g.edges):
        if eid in dropped or u not in local or v not in local:
            continue
        new_id[eid] = len(edges)
        edges.append((local[u], local[v]))
        kinds.append(g.kinds[eid])
        emap.append(eid)
    sub = Graph(len(keep_vertices), tuple(edges), tuple(kinds), g.multigraph)
    rotation = []
    for v in keep_vertices:
        rotation.append([2 * new_id[d >> 1] + (d & 1) for d in emb.rotation[v]
                         if (d >> 1) in new_id])
    return PlanarEmbedding(sub, rotation), list(keep_vertices), emap
