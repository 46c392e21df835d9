"""Planar separators (Lipton-Tarjan) and nested dissection orderings.

Graphs are handled here as rotation lists: ``nbrs[v]`` is the cyclic order of
the neighbours of ``v`` in some planar embedding.  Inputs are simple (no loops,
no parallel edges); :func:`rotation_lists` produces that form from a
:class:`~zfising.graph.PlanarEmbedding`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import product
from typing import Sequence

import numpy as np

from .graph import GraphError, PlanarEmbedding


@dataclass(frozen=True)
class Separation:
    part1: tuple[int, ...]
    part2: tuple[int, ...]
    separator: tuple[int, ...]


def rotation_lists(emb: PlanarEmbedding) -> list[list[int]]:
    """Neighbour rotation lists with loops dropped and parallel copies merged.

    Of each parallel class only the copy with the smallest edge id survives,
    at both endpoints, so the result is still a planar rotation system.
    """
    edges = emb.graph.edges
    keep: dict[tuple[int, int], int] = {}
    for k, (u, v) in enumerate(edges):
        if u != v:
            key = (u, v) if u < v else (v, u)
            if key not in keep:
                keep[key] = k
    out: list[list[int]] = []
    for v, darts in enumerate(emb.rotation):
        row = []
        for d in darts:
            w = emb.head(d)
            if w != v and keep[(v, w) if v < w else (w, v)] == d >> 1:
                row.append(w)
        out.append(row)
    return out


def induced_rotation(nbrs: Sequence[Sequence[int]], verts: Sequence[int]) -> list[list[int]]:
    """Rotation lists of the subgraph induced by ``verts`` (relabelled 0..k-1)."""
    local = {v: i for i, v in enumerate(verts)}
    get = local.get
    out = []
    for v in verts:
        row = []
        for w in nbrs[v]:
            j = get(w)
            if j is not None:
                row.append(j)
        out.append(row)
    return out


def _components(nbrs: Sequence[Sequence[int]]) -> list[list[int]]:
    n = len(nbrs)
    comp = [-1] * n
    out = []
    for s in range(n):
        if comp[s] != -1:
            continue
        cid = len(out)
        comp[s] = cid
        members = [s]
        for v in members:
            for w in nbrs[v]:
                if comp[w] == -1:
                    comp[w] = cid
                    members.append(w)
        out.append(members)
    return out


def _group_pieces(pieces: list[list[int]], weights: list[float]) -> tuple[list[int], list[int]]:
    """Split pieces into two sides keeping the heavier side as light as possible."""
    keep = [i for i, p in enumerate(pieces) if p]
    pieces = [pieces[i] for i in keep]
    weights = [weights[i] for i in keep]
    k = len(pieces)
    if k == 0:
        return [], []
    if k <= 8:
        best = None
        for mask in product((0, 1), repeat=k - 1):
            sides = (0,) + mask
            w0 = sum(w for w, s in zip(weights, sides) if s == 0)
            w1 = sum(w for w, s in zip(weights, sides) if s == 1)
            key = max(w0, w1)
            if best is None or key < best[0]:
                best = (key, sides)
        sides = best[1]
    else:
        total = sum(weights)
        order = sorted(range(k), key=lambda i: -weights[i])
        sides = [1] * k
        if weights[order[0]] >= total / 3:
            sides[order[0]] = 0
        else:
            acc = 0.0
            for i in order:
                if acc >= total / 3:
                    break
                sides[i] = 0
                acc += weights[i]
    a: list[int] = []
    b: list[int] = []
    for p, s in zip(pieces, sides):
        (a if s == 0 else b).extend(p)
    return a, b


def _lca_batch(parent: np.ndarray, depth: np.ndarray, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    n = len(parent)
    levels = max(1, int(depth.max()).bit_length())
    up = [parent]
    for _ in range(1, levels):
        up.append(up[-1][up[-1]])
    a = a.copy()
    b = b.copy()
    swap = depth[a] < depth[b]
    a[swap], b[swap] = b[swap], a[swap]
    diff = depth[a] - depth[b]
    for j in range(levels):
        sel = ((diff >> j) & 1).astype(bool)
        a[sel] = up[j][a[sel]]
    for j in range(levels - 1, -1, -1):
        ua, ub = up[j][a], up[j][b]
        sel = ua != ub
        a[sel] = ua[sel]
        b[sel] = ub[sel]
    res = np.where(a == b, a, parent[a])
    return res


def _fundamental_cycle_split(nbrs, parent, depth, root, weight):
    """Triangulate and pick the best fundamental cycle of a BFS-like tree.

    ``nbrs`` is a connected simple rotation system, ``parent`` a spanning tree
    (``parent[root] == root``) and ``weight`` per-vertex 0/1 weights.  Returns
    ``(inside, outside, cycle)`` as lists of vertices with positive weight.
    """
    n = len(nbrs)
    # darts: edge k joins eu[k], ev[k]; dart 2k is eu->ev
    eu: list[int] = []
    ev: list[int] = []
    dart_of: dict[tuple[int, int], int] = {}
    for v in range(n):
        for w in nbrs[v]:
            if v < w:
                k = len(eu)
                eu.append(v)
                ev.append(w)
                dart_of[(v, w)] = 2 * k
                dart_of[(w, v)] = 2 * k + 1
    succ = [0] * (2 * len(eu))
    first = [-1] * n
    for v in range(n):
        row = nbrs[v]
        k = len(row)
        if k == 0:
            continue
        ds = [dart_of[(v, w)] for w in row]
        first[v] = ds[0]
        for i in range(k):
            succ[ds[i]] = ds[(i + 1) % k]
    head = lambda d: ev[d >> 1] if not d & 1 else eu[d >> 1]  # noqa: E731
    tail = lambda d: eu[d >> 1] if not d & 1 else ev[d >> 1]  # noqa: E731

    parent = list(parent)
    depth = list(depth)
    weight = list(weight)
    # star-triangulate every face longer than three darts
    nd0 = len(succ)
    seen = bytearray(nd0)
    faces: list[list[int]] = []
    for d0 in range(nd0):
        if seen[d0]:
            continue
        f = []
        d = d0
        while not seen[d]:
            seen[d] = 1
            f.append(d)
            d = succ[d ^ 1]
        faces.append(f)
    for f in faces:
        k = len(f)
        if k == 3:
            continue
        s = len(parent)
        corners = [tail(d) for d in f]
        new = []
        for v in corners:
            e = len(eu)
            eu.append(v)
            ev.append(s)
            succ.append(0)
            succ.append(0)
            new.append(2 * e)          # v -> s
        for i, d in enumerate(f):
            nv = new[i]
            prev_in = f[i - 1] ^ 1     # dart leaving corner i towards previous corner
            succ[nv] = succ[prev_in]
            succ[prev_in] = nv
        for i in range(k):
            succ[new[i] ^ 1] = new[i - 1] ^ 1
        best = min(range(k), key=lambda i: depth[corners[i]])
        parent.append(corners[best])
        depth.append(depth[corners[best]] + 1)
        weight.append(0)
        first.append(new[0] ^ 1)
    n_all = len(parent)
    nd = len(succ)

    # tree edges
    is_tree = bytearray(nd // 2)
    pe_found = [False] * n_all
    for e in range(nd // 2):
        a, b = eu[e], ev[e]
        if parent[b] == a and b != root and not pe_found[b]:
            is_tree[e] = 1
            pe_found[b] = True
        elif parent[a] == b and a != root and not pe_found[a]:
            is_tree[e] = 1
            pe_found[a] = True
    # faces of the triangulation
    face_of = [-1] * nd
    nf = 0
    for d0 in range(nd):
        if face_of[d0] != -1:
            continue
        d = d0
        cnt = 0
        while face_of[d] == -1:
            face_of[d] = nf
            d = succ[d ^ 1]
            cnt += 1
        if cnt != 3:
            raise GraphError("triangulation produced a non-triangular face")
        nf += 1
    # dual spanning tree over non-tree edges
    dual_adj: list[list[tuple[int, int]]] = [[] for _ in range(nf)]
    for e in range(nd // 2):
        if not is_tree[e]:
            fa, fb = face_of[2 * e], face_of[2 * e + 1]
            dual_adj[fa].append((fb, e))
            dual_adj[fb].append((fa, e))
    froot = face_of[first[root]] if first[root] != -1 else 0
    dpar = [-1] * nf
    dpar_edge = [-1] * nf
    dorder = [froot]
    dpar[froot] = froot
    for f in dorder:
        for g, e in dual_adj[f]:
            if dpar[g] == -1:
                dpar[g] = f
                dpar_edge[g] = e
                dorder.append(g)
    if len(dorder) != nf:
        raise GraphError("non-tree edges do not span the dual")
    tin = [0] * nf
    tout = [0] * nf
    # preorder numbering (BFS order is not contiguous; do an explicit DFS)
    children: list[list[int]] = [[] for _ in range(nf)]
    for f in dorder[1:]:
        children[dpar[f]].append(f)
    clock = 0
    stack = [(froot, 0)]
    while stack:
        f, state = stack.pop()
        if state == 0:
            tin[f] = clock
            clock += 1
            stack.append((f, 1))
            for g in children[f]:
                stack.append((g, 0))
        else:
            tout[f] = clock
    rep = [face_of[first[v]] if first[v] != -1 else froot for v in range(n_all)]
    zero_cnt = [0] * nf
    for v in range(n_all):
        if weight[v] == 0:
            zero_cnt[rep[v]] += 1
    fcount = [1] * nf
    for f in reversed(dorder[1:]):
        p = dpar[f]
        fcount[p] += fcount[f]
        zero_cnt[p] += zero_cnt[f]

    cand = np.array(dorder[1:], dtype=np.int64)
    if len(cand) == 0:
        raise GraphError("no non-tree edge to cut along")
    edges_c = np.array([dpar_edge[f] for f in cand], dtype=np.int64)
    ea = np.array(eu, dtype=np.int64)[edges_c]
    eb = np.array(ev, dtype=np.int64)[edges_c]
    par_np = np.array(parent, dtype=np.int64)
    dep_np = np.array(depth, dtype=np.int64)
    lca = _lca_batch(par_np, dep_np, ea, eb)
    cyc_len = dep_np[ea] + dep_np[eb] - 2 * dep_np[lca] + 1
    fc = np.array(fcount, dtype=np.int64)[cand]
    twice_inside = 2 + fc - cyc_len
    if np.any(twice_inside < 0) or np.any(twice_inside & 1):
        raise GraphError("inconsistent face count in separator")
    inside_all = twice_inside // 2
    zc = np.array(zero_cnt, dtype=np.int64)[cand]
    w_np = np.array(weight, dtype=np.int64)
    tin_np = np.array(tin, dtype=np.int64)
    tout_np = np.array(tout, dtype=np.int64)
    rep_np = np.array(rep, dtype=np.int64)
    c_tin, c_tout = tin_np[cand], tout_np[cand]

    def in_sub(v):
        t = tin_np[rep_np[v]]
        return (t >= c_tin) & (t < c_tout)

    zero_on_cycle = np.zeros(len(cand), dtype=np.int64)
    zero_on_cycle_in = np.zeros(len(cand), dtype=np.int64)
    for v, extra in ((ea, None), (eb, None), (lca, (lca != ea) & (lca != eb))):
        z = w_np[v] == 0
        if extra is not None:
            z &= extra
        zero_on_cycle += z
        zero_on_cycle_in += z & in_sub(v)
    inside_w = inside_all - (zc - zero_on_cycle_in)
    cyc_w = cyc_len - zero_on_cycle
    total = int(w_np.sum())
    outside_w = total - inside_w - cyc_w
    best = int(np.argmin(np.maximum(inside_w, outside_w)))
    f_best = int(cand[best])
    a, b, c = int(ea[best]), int(eb[best]), int(lca[best])
    cycle = set()
    for x in (a, b):
        while x != c:
            cycle.add(x)
            x = parent[x]
    cycle.add(c)
    lo, hi = tin[f_best], tout[f_best]
    inside, outside = [], []
    for v in range(n):
        if weight[v] == 0 or v in cycle:
            continue
        t = tin[rep[v]]
        (inside if lo <= t < hi else outside).append(v)
    cyc = [v for v in cycle if v < n and weight[v] > 0]
    return inside, outside, cyc


def _separate_connected(nbrs: Sequence[Sequence[int]], root: int = 0):
    """Lipton-Tarjan separation of a connected simple planar rotation system."""
    n = len(nbrs)
    if n <= 2:
        return list(range(n))[:1], [], list(range(n))[1:]
    level = [-1] * n
    parent = [-1] * n
    level[root] = 0
    parent[root] = root
    order = [root]
    for v in order:
        lv = level[v] + 1
        for w in nbrs[v]:
            if level[w] == -1:
                level[w] = lv
                parent[w] = v
                order.append(w)
    r = level[order[-1]]
    cnt = [0] * (r + 2)
    for v in range(n):
        cnt[level[v]] += 1
    cum = 0
    l1 = 0
    for l in range(r + 1):
        cum += cnt[l]
        if 2 * cum >= n:
            l1 = l
            break
    k = cum
    size = lambda l: 0 if l < 0 or l > r else cnt[l]  # noqa: E731
    l0 = min(range(-1, l1 + 1), key=lambda l: (size(l) + 2 * (l1 - l), -l))
    l2 = min(range(l1 + 1, r + 2), key=lambda l: (size(l) + 2 * (l - l1 - 1), l))
    if cnt[l1] <= min(2 * math.sqrt(2 * n), size(l0) + size(l2)):
        # the median level alone already separates: both sides have < n/2
        lo = [v for v in range(n) if level[v] < l1]
        hi = [v for v in range(n) if level[v] > l1]
        return lo, hi, [v for v in range(n) if level[v] == l1]
    above = [v for v in range(n) if level[v] < l0]
    below = [v for v in range(n) if level[v] > l2]
    mid = [v for v in range(n) if l0 < level[v] < l2]
    sep0 = [v for v in range(n) if level[v] == l0 or level[v] == l2]
    if 3 * len(mid) <= 2 * n:
        p1, p2 = _group_pieces([above, mid, below], [len(above), len(mid), len(below)])
        return p1, p2, sep0
    # shrink: contract levels <= l0 into one weight-0 root, drop levels >= l2
    local = {v: i for i, v in enumerate(mid)}
    m = len(mid)
    if l0 >= 0:
        x = m
        xrot: list[int] = []
        kept: dict[int, int] = {}
        # Euler walk around the BFS tree restricted to levels <= l0; the
        # boundary edges met on the way give the rotation of the merged vertex
        stack = [[root, 0, len(nbrs[root]), 0]]
        while stack:
            fr = stack[-1]
            if fr[3] >= fr[2]:
                stack.pop()
                continue
            u = fr[0]
            row = nbrs[u]
            w = row[(fr[1] + fr[3]) % len(row)]
            fr[3] += 1
            if level[w] == l0 + 1:
                if w not in kept:
                    kept[w] = u
                    xrot.append(local[w])
            elif parent[w] == u and w != root and level[w] <= l0:
                rw = nbrs[w]
                stack.append([w, (rw.index(u) + 1) % len(rw), len(rw) - 1, 0])
        sub: list[list[int]] = []
        for v in mid:
            row = []
            for w in nbrs[v]:
                lw = level[w]
                if l0 < lw < l2:
                    row.append(local[w])
                elif lw == l0 and kept.get(v) == w:
                    row.append(x)
            sub.append(row)
        sub.append(xrot)
        par = [0] * (m + 1)
        dep = [0] * (m + 1)
        for i, v in enumerate(mid):
            if level[v] == l0 + 1:
                par[i] = x
            else:
                par[i] = local[parent[v]]
            dep[i] = level[v] - l0
        par[x] = x
        wts = [1] * m + [0]
        troot = x
    else:
        sub = [[local[w] for w in nbrs[v] if level[w] < l2] for v in mid]
        par = [local[parent[v]] for v in mid]
        dep = [level[v] for v in mid]
        wts = [1] * m
        troot = local[root]
    inside, outside, cyc = _fundamental_cycle_split(sub, par, dep, troot, wts)
    inside = [mid[i] for i in inside]
    outside = [mid[i] for i in outside]
    sep = sep0 + [mid[i] for i in cyc]
    p1, p2 = _group_pieces([above, below, inside, outside],
                           [len(above), len(below), len(inside), len(outside)])
    return p1, p2, sep


def separate(nbrs: Sequence[Sequence[int]]) -> tuple[list[int], list[int], list[int]]:
    """Separator of a (possibly disconnected) simple planar rotation system."""
    n = len(nbrs)
    comps = _components(nbrs)
    if len(comps) == 1:
        return _separate_connected(nbrs)
    comps.sort(key=len, reverse=True)
    if 3 * len(comps[0]) > 2 * n:
        big = comps[0]
        a, b, s = _separate_connected(induced_rotation(nbrs, big))
        pieces = [[big[i] for i in a], [big[i] for i in b]] + comps[1:]
        sep = [big[i] for i in s]
    else:
        pieces = comps
        sep = []
    p1, p2 = _group_pieces(pieces, [len(p) for p in pieces])
    return p1, p2, sep


def planar_separator(emb: PlanarEmbedding) -> Separation:
    """Vertex separation with parts of at most 2n/3 vertices and a separator
    of at most ``2**1.5 * sqrt(n)`` vertices."""
    a, b, s = separate(rotation_lists(emb))
    return Separation(tuple(sorted(a)), tuple(sorted(b)), tuple(sorted(s)))


# ---------------------------------------------------------------------------
# dissection hierarchy and orderings
# ---------------------------------------------------------------------------

@dataclass
class DissectionNode:
    separator: list[int]
    children: list[int]
    size: int


class Dissection:
    """Recursive separator tree over the vertices of a planar rotation system.

    Leaves hold their whole vertex set in ``separator``.  ``order()`` gives the
    nested dissection ordering (children before separators).
    """

    def __init__(self, nodes: list[DissectionNode], root: int, num_vertices: int):
        self.nodes = nodes
        self.root = root
        self.num_vertices = num_vertices
        self._owner: np.ndarray | None = None

    def order(self, node: int | None = None) -> list[int]:
        out: list[int] = []
        stack = [(self.root if node is None else node, False)]
        while stack:
            i, done = stack.pop()
            nd = self.nodes[i]
            if done or not nd.children:
                out.extend(nd.separator)
                continue
            stack.append((i, True))
            for c in reversed(nd.children):
                stack.append((c, False))
        return out

    def owner(self) -> np.ndarray:
        """Hierarchy node holding each vertex in its separator."""
        if self._owner is None:
            own = np.full(self.num_vertices, -1, dtype=np.int64)
            for i, nd in enumerate(self.nodes):
                own[nd.separator] = i
            self._owner = own
        return self._owner


def dissect(nbrs: Sequence[Sequence[int]], leaf_size: int = 16) -> Dissection:
    """Build the separator tree by repeated planar separation."""
    n = len(nbrs)
    nodes: list[DissectionNode] = []
    root = len(nodes)
    nodes.append(DissectionNode([], [], n))
    work = [(root, list(range(n)))]
    while work:
        idx, verts = work.pop()
        node = nodes[idx]
        if len(verts) <= leaf_size:
            node.separator = list(verts)
            continue
        sub = induced_rotation(nbrs, verts) if len(verts) < n else [list(r) for r in nbrs]
        a, b, s = separate(sub)
        if not s and (not a or not b):
            node.separator = list(verts)
            continue
        node.separator = [verts[i] for i in s]
        for part in (a, b):
            if part:
                cid = len(nodes)
                nodes.append(DissectionNode([], [], len(part)))
                node.children.append(cid)
                work.append((cid, [verts[i] for i in part]))
    return Dissection(nodes, root, n)


def nested_dissection_order(nbrs_or_emb, forced_top_separator: Sequence[int] | None = None,
                            leaf_size: int = 16) -> list[int]:
    """Elimination order: recursive parts first, separators after them.

    With ``forced_top_separator`` the given vertices take the last positions and
    the rest is dissected on its own.
    """
    nbrs = rotation_lists(nbrs_or_emb) if isinstance(nbrs_or_emb, PlanarEmbedding) else nbrs_or_emb
    n = len(nbrs)
    if not forced_top_separator:
        return dissect(nbrs, leaf_size).order()
    forced = list(dict.fromkeys(forced_top_separator))
    bound = 3 * 4 * math.sqrt(n)
    if len(forced) > bound:
        raise GraphError(f"forced separator of size {len(forced)} exceeds {bound:.1f}")
    mask = np.zeros(n, dtype=bool)
    mask[forced] = True
    rest = [v for v in range(n) if not mask[v]]
    sub_order = dissect(induced_rotation(nbrs, rest), leaf_size).order()
    return [rest[i] for i in sub_order] + forced
