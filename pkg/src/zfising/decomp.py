"""Triconnected components of biconnected multigraphs and their tree.

The split-component search follows Hopcroft and Tarjan with the corrections
of Gutwenger and Mutzel: one palm-tree DFS, an acceptable adjacency order, a
path search maintaining the triple stack of candidate type-2 pairs, then the
final merge of adjacent polygons and adjacent bonds.  All recursion is driven
by an explicit stack so graphs with ~10^5 vertices are fine.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterator

from .graph import REAL, VIRTUAL, Graph, GraphError, is_biconnected, planar_embed

TRICONNECTED = "triconnected-graph"
CYCLE = "cycle"
BOND = "multiple-bond"

PLANAR = "planar"
SMALL_NONPLANAR = "small-nonplanar"


class UnsupportedTopology(ValueError):
    """A nonplanar triconnected component is too large to enumerate."""


_UNSEEN, _TREE, _FROND, _REMOVED = 0, 1, 2, 3


def _trampoline(gen: Iterator) -> None:
    stack = [gen]
    while stack:
        try:
            child = next(stack[-1])
        except StopIteration:
            stack.pop()
            continue
        stack.append(child)


class _SplitSearch:
    """State of one run of the split-component search."""

    def __init__(self, n: int, edges: list[tuple[int, int]]):
        self.n = n
        self.src: list[int] = []
        self.tgt: list[int] = []
        self.orig: list[int] = []          # input edge id, -1 for virtual edges
        self.comps: list[list[int]] = []
        for i, (u, v) in enumerate(edges):
            self._add_edge(u, v, i)

    def _add_edge(self, u: int, v: int, orig: int = -1) -> int:
        self.src.append(u)
        self.tgt.append(v)
        self.orig.append(orig)
        return len(self.src) - 1

    # -- adjacency cells (doubly linked lists addressed by cell id) ---------

    def _cell_new(self, v: int, arc: int) -> int:
        c = len(self.cell_arc)
        self.cell_arc.append(arc)
        self.cell_prev.append(self.tail_cell[v])
        self.cell_next.append(-1)
        self.cell_owner.append(v)
        if self.tail_cell[v] == -1:
            self.head_cell[v] = c
        else:
            self.cell_next[self.tail_cell[v]] = c
        self.tail_cell[v] = c
        self.in_adj[arc] = c
        return c

    def _cell_del(self, c: int) -> None:
        v = self.cell_owner[c]
        p, q = self.cell_prev[c], self.cell_next[c]
        if p == -1:
            self.head_cell[v] = q
        else:
            self.cell_next[p] = q
        if q == -1:
            self.tail_cell[v] = p
        else:
            self.cell_prev[q] = p

    def _new_virtual(self, u: int, v: int) -> int:
        e = self._add_edge(u, v)
        self.etype.append(_UNSEEN)
        self.in_adj.append(-1)
        self.in_high.append(None)
        self.start.append(False)
        return e

    # -- highpoint lists: stored reversed, entries tombstoned -----------------

    def _high(self, v: int) -> int:
        lst = self.highpt[v]
        alive = self.high_alive[v]
        while lst and not alive[-1]:
            lst.pop()
            alive.pop()
        return lst[-1] if lst else 0

    def _del_high(self, e: int) -> None:
        ref = self.in_high[e]
        if ref is not None:
            v, idx = ref
            if idx < len(self.high_alive[v]):
                self.high_alive[v][idx] = False
            self.in_high[e] = None

    # -- main --------------------------------------------------------------

    def run(self) -> None:
        n = self.n
        m = len(self.src)
        self._split_multi_edges()
        m = len(self.src)
        self.etype = [_UNSEEN] * m
        for e in self.removed:
            self.etype[e] = _REMOVED
        adj: list[list[int]] = [[] for _ in range(n)]
        for e in range(m):
            if self.etype[e] != _REMOVED:
                adj[self.src[e]].append(e)
                adj[self.tgt[e]].append(e)
        self.adj0 = adj
        self.number = [0] * n
        self.father = [-1] * n
        self.lowpt1 = [0] * n
        self.lowpt2 = [0] * n
        self.nd = [0] * n
        self.degree = [len(a) for a in adj]
        self.tree_arc = [-1] * n
        self.count = 0
        self.root = 0
        _trampoline(self._dfs1(0, -1))

        # acceptable adjacency structure
        buckets: list[list[int]] = [[] for _ in range(3 * n + 3)]
        for e in range(m):
            t = self.etype[e]
            if t == _REMOVED:
                continue
            v, w = self.src[e], self.tgt[e]
            if t == _FROND:
                phi = 3 * self.number[w] + 1
            elif self.lowpt2[w] < self.number[v]:
                phi = 3 * self.lowpt1[w]
            else:
                phi = 3 * self.lowpt1[w] + 2
            buckets[phi].append(e)
        self.cell_arc: list[int] = []
        self.cell_prev: list[int] = []
        self.cell_next: list[int] = []
        self.cell_owner: list[int] = []
        self.head_cell = [-1] * n
        self.tail_cell = [-1] * n
        self.in_adj = [-1] * m
        for bucket in buckets:
            for e in bucket:
                self._cell_new(self.src[e], e)

        # path finder: renumbering, start flags, highpoints
        self.newnum = [0] * n
        self.start = [False] * m
        self.highpt: list[list[int]] = [[] for _ in range(n)]
        self.high_alive: list[list[bool]] = [[] for _ in range(n)]
        self.in_high: list = [None] * m
        self.count = n
        self.new_path = True
        _trampoline(self._path_finder(self.root))
        old2new = [0] * (n + 1)
        for v in range(n):
            old2new[self.number[v]] = self.newnum[v]
        for v in range(n):
            self.number[v] = self.newnum[v]
            self.lowpt1[v] = old2new[self.lowpt1[v]]
            self.lowpt2[v] = old2new[self.lowpt2[v]]
        # highpoint lists were filled back-to-front order; flip so front is last
        for v in range(n):
            k = len(self.highpt[v])
            self.highpt[v].reverse()
            self.high_alive[v].reverse()
            for e_idx in range(k):
                pass
        for e in range(m):
            ref = self.in_high[e]
            if ref is not None:
                v, idx = ref
                self.in_high[e] = (v, len(self.highpt[v]) - 1 - idx)
        self.nodeat = [0] * (n + 1)
        for v in range(n):
            self.nodeat[self.number[v]] = v

        self.ta = [-1]
        self.th = [0]
        self.tb = [0]
        self.estack: list[int] = []
        _trampoline(self._path_search(self.root))
        if self.estack:
            self.comps.append(list(self.estack))
            self.estack.clear()

    def _split_multi_edges(self) -> None:
        self.removed: set[int] = set()
        groups: dict[tuple[int, int], list[int]] = {}
        for e in range(len(self.src)):
            u, v = self.src[e], self.tgt[e]
            groups.setdefault((u, v) if u < v else (v, u), []).append(e)
        for (u, v), es in groups.items():
            if len(es) < 2:
                continue
            ev = self._add_edge(u, v)
            self.comps.append(es + [ev])
            self.removed.update(es)

    def _dfs1(self, v: int, u: int):
        self.count += 1
        num = self.number
        num[v] = self.count
        self.father[v] = u
        self.lowpt1[v] = self.lowpt2[v] = num[v]
        self.nd[v] = 1
        etype, src, tgt = self.etype, self.src, self.tgt
        for e in self.adj0[v]:
            if etype[e] != _UNSEEN:
                continue
            w = tgt[e] if src[e] == v else src[e]
            src[e], tgt[e] = v, w
            if num[w] == 0:
                etype[e] = _TREE
                self.tree_arc[w] = e
                yield self._dfs1(w, v)
                l1v, l1w = self.lowpt1[v], self.lowpt1[w]
                if l1w < l1v:
                    self.lowpt2[v] = min(l1v, self.lowpt2[w])
                    self.lowpt1[v] = l1w
                elif l1w == l1v:
                    self.lowpt2[v] = min(self.lowpt2[v], self.lowpt2[w])
                else:
                    self.lowpt2[v] = min(self.lowpt2[v], l1w)
                self.nd[v] += self.nd[w]
            else:
                etype[e] = _FROND
                nw = num[w]
                if nw < self.lowpt1[v]:
                    self.lowpt2[v] = self.lowpt1[v]
                    self.lowpt1[v] = nw
                elif nw > self.lowpt1[v]:
                    self.lowpt2[v] = min(self.lowpt2[v], nw)

    def _path_finder(self, v: int):
        self.newnum[v] = self.count - self.nd[v] + 1
        c = self.head_cell[v]
        while c != -1:
            e = self.cell_arc[c]
            w = self.tgt[e]
            if self.new_path:
                self.new_path = False
                self.start[e] = True
            if self.etype[e] == _TREE:
                yield self._path_finder(w)
                self.count -= 1
            else:
                self.in_high[e] = (w, len(self.highpt[w]))
                self.highpt[w].append(self.newnum[v])
                self.high_alive[w].append(True)
                self.new_path = True
            c = self.cell_next[c]

    def _tpop(self):
        self.ta.pop()
        self.th.pop()
        return self.tb.pop()

    def _tpush(self, h, a, b):
        self.th.append(h)
        self.ta.append(a)
        self.tb.append(b)

    def _finish(self, comp: list[int], ev: int) -> None:
        comp.append(ev)
        self.comps.append(comp)

    def _path_search(self, v: int):
        number, nodeat, src, tgt = self.number, self.nodeat, self.src, self.tgt
        ta, th, tb = self.ta, self.th, self.tb
        estack = self.estack
        vnum = number[v]
        outv = 0
        c = self.head_cell[v]
        while c != -1:
            outv += 1
            c = self.cell_next[c]
        it = self.head_cell[v]
        while it != -1:
            it_next = self.cell_next[it]
            e = self.cell_arc[it]
            w = tgt[e]
            wnum = number[w]
            if self.etype[e] == _TREE:
                if self.start[e]:
                    y = 0
                    lw = self.lowpt1[w]
                    if ta[-1] > lw:
                        while True:
                            y = max(y, th[-1])
                            b = self._tpop()
                            if not ta[-1] > lw:
                                break
                        self._tpush(y, lw, b)
                    else:
                        self._tpush(wnum + self.nd[w] - 1, lw, vnum)
                    self._tpush(0, -1, 0)  # end-of-segment marker
                yield self._path_search(w)
                estack.append(self.tree_arc[w])

                # type-2 separation pairs
                while vnum != 1 and (ta[-1] == vnum or (
                        self.degree[w] == 2 and self._first_child_num(w) > wnum)):
                    a, b = ta[-1], tb[-1]
                    e_ab = -1
                    if a == vnum and self.father[nodeat[b]] == v:
                        self._tpop()
                        continue
                    if self.degree[w] == 2 and self._first_child_num(w) > wnum:
                        e1 = estack.pop()
                        e2 = estack.pop()
                        self._cell_del(self.in_adj[e2])
                        x = tgt[e2]
                        e_virt = self._new_virtual(v, x)
                        self.degree[x] -= 1
                        self.degree[v] -= 1
                        self.comps.append([e1, e2, e_virt])
                        if estack:
                            top = estack[-1]
                            if src[top] == x and tgt[top] == v:
                                e_ab = estack.pop()
                                self._cell_del(self.in_adj[e_ab])
                                self._del_high(e_ab)
                    else:
                        h = th[-1]
                        self._tpop()
                        comp: list[int] = []
                        while estack:
                            xy = estack[-1]
                            x, xt = src[xy], tgt[xy]
                            if not (a <= number[x] <= h and a <= number[xt] <= h):
                                break
                            if (x == nodeat[a] and xt == nodeat[b]) or (
                                    xt == nodeat[a] and x == nodeat[b]):
                                e_ab = estack.pop()
                                self._cell_del(self.in_adj[e_ab])
                                self._del_high(e_ab)
                            else:
                                eh = estack.pop()
                                if it != self.in_adj[eh]:
                                    self._cell_del(self.in_adj[eh])
                                    self._del_high(eh)
                                comp.append(eh)
                                self.degree[x] -= 1
                                self.degree[xt] -= 1
                        e_virt = self._new_virtual(nodeat[a], nodeat[b])
                        self._finish(comp, e_virt)
                        x = nodeat[b]
                    if e_ab != -1:
                        e_virt2 = self._new_virtual(v, x)
                        self.comps.append([e_ab, e_virt, e_virt2])
                        self.degree[x] -= 1
                        self.degree[v] -= 1
                        e_virt = e_virt2
                    estack.append(e_virt)
                    self.cell_arc[it] = e_virt
                    self.in_adj[e_virt] = it
                    self.degree[x] += 1
                    self.degree[v] += 1
                    self.father[x] = v
                    self.tree_arc[x] = e_virt
                    self.etype[e_virt] = _TREE
                    w = x
                    wnum = number[w]

                # type-1 separation pair
                l1w = self.lowpt1[w]
                if self.lowpt2[w] >= vnum and l1w < vnum and (
                        self.father[v] != self.root or outv >= 2):
                    comp = []
                    top_pair = None
                    ndw = self.nd[w]
                    while estack:
                        xy = estack[-1]
                        xx, yy = number[src[xy]], number[tgt[xy]]
                        if not ((wnum <= xx < wnum + ndw) or (wnum <= yy < wnum + ndw)):
                            top_pair = (xx, yy)
                            break
                        comp.append(estack.pop())
                        self._del_high(xy)
                        self.degree[nodeat[xx]] -= 1
                        self.degree[nodeat[yy]] -= 1
                    lnode = nodeat[l1w]
                    e_virt = self._new_virtual(v, lnode)
                    self._finish(comp, e_virt)
                    if top_pair is not None and (
                            (top_pair[0] == vnum and top_pair[1] == l1w)
                            or (top_pair[1] == vnum and top_pair[0] == l1w)):
                        eh = estack.pop()
                        if it != self.in_adj[eh]:
                            self._cell_del(self.in_adj[eh])
                            self._del_high(eh)
                        self.degree[nodeat[top_pair[0]]] -= 1
                        self.degree[nodeat[top_pair[1]]] -= 1
                        e_virt2 = self._new_virtual(v, lnode)
                        self.comps.append([eh, e_virt, e_virt2])
                        e_virt = e_virt2
                    if lnode != self.father[v]:
                        estack.append(e_virt)
                        self.cell_arc[it] = e_virt
                        self.in_adj[e_virt] = it
                        if self.in_high[e_virt] is None and self._high(lnode) < vnum:
                            self.in_high[e_virt] = (lnode, len(self.highpt[lnode]))
                            self.highpt[lnode].append(vnum)
                            self.high_alive[lnode].append(True)
                        self.degree[v] += 1
                        self.degree[lnode] += 1
                    else:
                        self._cell_del(it)
                        eh = self.tree_arc[v]
                        e_virt2 = self._new_virtual(lnode, v)
                        self.comps.append([e_virt, eh, e_virt2])
                        cell = self.in_adj[eh]
                        self.cell_arc[cell] = e_virt2
                        self.in_adj[e_virt2] = cell
                        self.tree_arc[v] = e_virt2
                        self.etype[e_virt2] = _TREE

                if self.start[e]:
                    while ta[-1] != -1:
                        self._tpop()
                    self._tpop()
                while ta[-1] != -1 and tb[-1] != vnum and self._high(v) > th[-1]:
                    self._tpop()
                outv -= 1
            else:
                if self.start[e]:
                    y = 0
                    if ta[-1] > wnum:
                        while True:
                            y = max(y, th[-1])
                            b = self._tpop()
                            if not ta[-1] > wnum:
                                break
                        self._tpush(y, wnum, b)
                    else:
                        self._tpush(vnum, wnum, vnum)
                if w == self.father[v]:
                    self.etype[e] = _REMOVED
                    self._cell_del(it)
                    eh = self.tree_arc[v]
                    e_virt = self._new_virtual(w, v)
                    self.comps.append([e, eh, e_virt])
                    cell = self.in_adj[eh]
                    self.cell_arc[cell] = e_virt
                    self.in_adj[e_virt] = cell
                    self.tree_arc[v] = e_virt
                    self.etype[e_virt] = _TREE
                else:
                    estack.append(e)
            it = it_next

    def _first_child_num(self, w: int) -> int:
        c = self.head_cell[w]
        if c == -1:
            return -1
        return self.number[self.tgt[self.cell_arc[c]]]


@dataclass
class TriconComponent:
    """One triconnected component.

    ``graph`` is local; ``vertex_map[k]`` is the global vertex of local ``k``.
    ``edge_ids[k]`` is the input edge id of a real local edge and ``-1`` for
    virtual ones; ``virtual_ids[k]`` names the virtual edge (shared with its
    peer) or ``-1``.  ``virtual_links`` maps a local virtual edge to
    ``(peer component index, peer local edge)``.
    """

    graph: Graph
    kind: str
    vertex_map: list[int]
    edge_ids: list[int]
    virtual_ids: list[int]
    virtual_links: dict[int, tuple[int, int]] = field(default_factory=dict)

    @property
    def num_vertices(self) -> int:
        return self.graph.num_vertices


def _classify_shape(num_vertices: int, edges: list[tuple[int, int]]) -> str:
    if num_vertices == 2:
        return BOND
    deg: dict[int, int] = {}
    for u, v in edges:
        deg[u] = deg.get(u, 0) + 1
        deg[v] = deg.get(v, 0) + 1
    if len(edges) == num_vertices and all(d == 2 for d in deg.values()):
        return CYCLE
    return TRICONNECTED


def triconnected_decompose(g: Graph) -> list[TriconComponent]:
    """Unique triconnected components of a biconnected multigraph.

    Raises :class:`~zfising.graph.GraphError` when ``g`` is not biconnected.
    """
    n = g.num_vertices
    if n < 2 or not is_biconnected(g):
        raise GraphError("triconnected_decompose expects a biconnected graph")
    if n == 2:
        if g.num_edges < 3:
            raise GraphError("two-vertex input needs at least three parallel edges")
        raw = [list(range(g.num_edges))]
        search = None
        ends = list(g.edges)
        orig = list(range(g.num_edges))
    else:
        search = _SplitSearch(n, list(g.edges))
        search.run()
        raw = search.comps
        ends = list(zip(search.src, search.tgt))
        orig = search.orig

    # kind of each split component
    def shape(comp):
        vs = set()
        for e in comp:
            vs.update(ends[e])
        if len(vs) == 2:
            return BOND
        return CYCLE if len(comp) == 3 else TRICONNECTED

    kinds = [shape(c) for c in raw]
    # merge bonds with bonds and polygons with polygons along shared virtual edges
    owner: dict[int, list[int]] = {}
    for i, comp in enumerate(raw):
        for e in comp:
            if orig[e] == -1:
                owner.setdefault(e, []).append(i)
    parent = list(range(len(raw)))

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for e, pair in owner.items():
        if len(pair) != 2:
            raise GraphError("virtual edge not shared by exactly two split components")
        i, j = pair
        if kinds[i] == kinds[j] and kinds[i] in (BOND, CYCLE):
            parent[find(i)] = find(j)
    groups: dict[int, list[int]] = {}
    for i in range(len(raw)):
        groups.setdefault(find(i), []).append(i)

    result: list[TriconComponent] = []
    comp_of_virtual: dict[int, list[tuple[int, int]]] = {}
    for members in groups.values():
        counts: dict[int, int] = {}
        for i in members:
            for e in raw[i]:
                counts[e] = counts.get(e, 0) + 1
        edge_list = []
        for i in members:
            for e in raw[i]:
                if orig[e] == -1 and counts[e] == 2:
                    continue  # internal to the merged group
                edge_list.append(e)
        verts: dict[int, int] = {}
        local_edges, kinds_l, eids, vids = [], [], [], []
        for e in edge_list:
            u, v = ends[e]
            for x in (u, v):
                if x not in verts:
                    verts[x] = len(verts)
            local_edges.append((verts[u], verts[v]))
            if orig[e] == -1:
                kinds_l.append(VIRTUAL)
                eids.append(-1)
                vids.append(e)
            else:
                kinds_l.append(REAL)
                eids.append(orig[e])
                vids.append(-1)
        vmap = [0] * len(verts)
        for x, k in verts.items():
            vmap[k] = x
        kind = _classify_shape(len(verts), local_edges)
        idx = len(result)
        for k, ve in enumerate(vids):
            if ve != -1:
                comp_of_virtual.setdefault(ve, []).append((idx, k))
        result.append(TriconComponent(
            Graph(len(verts), tuple(local_edges), tuple(kinds_l), True),
            kind, vmap, eids, vids))
    for ve, ends_ in comp_of_virtual.items():
        if len(ends_) != 2:
            raise GraphError("virtual edge pairing is inconsistent")
        (a, ka), (b, kb) = ends_
        result[a].virtual_links[ka] = (b, kb)
        result[b].virtual_links[kb] = (a, ka)
    return result


# ---------------------------------------------------------------------------
# component tree
# ---------------------------------------------------------------------------

@dataclass
class TriconTree:
    nodes: list[TriconComponent]
    root: int
    parent: list[int]
    children: list[list[int]]
    # local virtual edge in the child that links to the parent
    parent_edge: list[int]

    @property
    def edges(self) -> list[tuple[int, int]]:
        return [(p, c) for c, p in enumerate(self.parent) if p != -1]

    def order(self) -> list[int]:
        """Root-first (BFS) node order."""
        out = [self.root]
        for a in out:
            out.extend(self.children[a])
        return out

    def to_dot(self) -> str:
        lines = ["graph tricon_tree {"]
        for i, node in enumerate(self.nodes):
            lines.append(f'  n{i} [label="{node.kind} {node.num_vertices}/{node.graph.num_edges}"];')
        for p, c in self.edges:
            lines.append(f"  n{p} -- n{c};")
        lines.append("}")
        return "\n".join(lines)


def build_tricon_tree(components: list[TriconComponent], root: int | None = None) -> TriconTree:
    """Root the component tree, preferring the lowest-index non-bond root."""
    if not components:
        raise GraphError("no components")
    k = len(components)
    for i, c in enumerate(components):
        for le, (j, lj) in c.virtual_links.items():
            if not (0 <= j < k) or components[j].virtual_links.get(lj) != (i, le):
                raise GraphError("virtual edge pairing is not a perfect pairing")
    if root is None:
        root = next((i for i, c in enumerate(components) if c.kind != BOND), 0)
    parent = [-1] * k
    parent_edge = [-1] * k
    children: list[list[int]] = [[] for _ in range(k)]
    seen = [False] * k
    seen[root] = True
    queue = [root]
    for a in queue:
        for le, (b, lb) in sorted(components[a].virtual_links.items()):
            if seen[b]:
                continue
            seen[b] = True
            parent[b] = a
            parent_edge[b] = lb
            children[a].append(b)
            queue.append(b)
    if not all(seen):
        raise GraphError("component adjacency is not connected")
    n_links = sum(len(c.virtual_links) for c in components) // 2
    if n_links != k - 1:
        raise GraphError("component adjacency is not a tree")
    return TriconTree(components, root, parent, children, parent_edge)


def classify_component(c: TriconComponent, size_bound: int = 5) -> str:
    """``planar``, ``small-nonplanar`` or ``multiple-bond``.

    Raises :class:`UnsupportedTopology` for nonplanar components with more than
    ``size_bound`` vertices.
    """
    if c.kind == BOND:
        return BOND
    if c.kind == CYCLE:
        return PLANAR
    if planar_embed(c.graph) is not None:
        return PLANAR
    if c.num_vertices <= size_bound:
        return SMALL_NONPLANAR
    raise UnsupportedTopology(
        f"nonplanar triconnected component with {c.num_vertices} vertices "
        f"exceeds the enumeration bound {size_bound}")


def merge_components(components: list[TriconComponent]) -> list[tuple[int, int, int]]:
    """Undo all splits: returns ``(u, v, input_edge_id)`` for every real edge."""
    out = []
    for c in components:
        for k, (u, v) in enumerate(c.graph.edges):
            if c.edge_ids[k] != -1:
                out.append((c.vertex_map[u], c.vertex_map[v], c.edge_ids[k]))
    return out
