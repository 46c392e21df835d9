import math

import numpy as np
import pytest

from zfising.graph import GraphError, build_graph, planar_embed
from zfising.separator import dissect, nested_dissection_order, planar_separator, rotation_lists
from zfising.testkit import GeneratorConfig, gen_random_planar

from conftest import grid_graph


def _assert_separation(g, sep):
    n = g.num_vertices
    a, b, s = set(sep.part1), set(sep.part2), set(sep.separator)
    assert a | b | s == set(range(n))
    assert len(a) + len(b) + len(s) == n
    for u, v in g.edges:
        assert not ({u, v} <= a | b and (u in a) != (v in a)), "edge joins the two parts"
    assert max(len(a), len(b)) <= 2 * n / 3 + 1e-9
    assert len(s) <= 2 ** 1.5 * math.sqrt(n)


def test_path_separator_is_middle_vertex():
    g = build_graph(3, [(0, 1), (1, 2)])
    sep = planar_separator(planar_embed(g))
    assert sep.separator == (1,)
    assert sorted(sep.part1 + sep.part2) == [0, 2]


def test_grid_separator_bounds():
    g = grid_graph(10, 10)
    sep = planar_separator(planar_embed(g))
    _assert_separation(g, sep)
    assert len(sep.separator) <= 28


@pytest.mark.parametrize("n", [10, 57, 200, 1000])
def test_random_triangulation_separators(n):
    g, emb = gen_random_planar(GeneratorConfig(n, seed=n))
    _assert_separation(g, planar_separator(emb))


def test_three_vertex_path_orders_middle_last():
    g = build_graph(3, [(0, 1), (1, 2)])
    order = nested_dissection_order(planar_embed(g), leaf_size=1)
    assert sorted(order) == [0, 1, 2] and order[-1] == 1


def test_forced_separator_occupies_the_tail():
    g = grid_graph(8, 8)
    forced = [27, 28, 35, 36]
    order = nested_dissection_order(planar_embed(g), forced_top_separator=forced)
    assert sorted(order) == list(range(64))
    assert order[-4:] == forced


def test_forced_separator_size_is_bounded():
    g = grid_graph(20, 20)
    with pytest.raises(GraphError):
        nested_dissection_order(planar_embed(g), forced_top_separator=list(range(300)))


def _fill_count(n, edges, order):
    """Fill edges of symmetric elimination in ``order`` (elimination game)."""
    pos = np.empty(n, dtype=int)
    pos[order] = np.arange(n)
    adj = [set() for _ in range(n)]
    for u, v in edges:
        adj[u].add(v)
        adj[v].add(u)
    fill = 0
    for v in order:
        later = [w for w in adj[v] if pos[w] > pos[v]]
        for i, a in enumerate(later):
            for b in later[i + 1:]:
                if b not in adj[a]:
                    adj[a].add(b)
                    adj[b].add(a)
                    fill += 1
    return fill


def test_grid_fill_stays_near_n_log_n():
    side = 24
    g = grid_graph(side, side)
    n = side * side
    nd = _fill_count(n, g.edges, nested_dissection_order(planar_embed(g), leaf_size=8))
    natural = _fill_count(n, g.edges, list(range(n)))
    assert nd <= 3 * n * math.log2(n)
    assert nd < natural


def test_dissection_covers_every_vertex_once():
    g, emb = gen_random_planar(GeneratorConfig(300, seed=5))
    dis = dissect(rotation_lists(emb), leaf_size=12)
    order = dis.order()
    assert sorted(order) == list(range(300))
    owner = dis.owner()
    assert np.all(owner >= 0)
    for nd in dis.nodes:
        if not nd.children:
            assert len(nd.separator) <= 12
