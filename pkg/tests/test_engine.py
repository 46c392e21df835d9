import itertools
import math

import numpy as np
import pytest
from scipy.special import logsumexp
from scipy.stats import chisquare

from zfising.decomp import BOND, PLANAR, SMALL_NONPLANAR, UnsupportedTopology
from zfising.engine import (IsingEngine, NodeContext, PiTable, condition_and_sample_node, infer_log_z,
                            log1mexp, process_node_pi, root_partition, sample_spins)
from zfising.graph import Graph, build_graph
from zfising.kasteleyn import log_partition_planar_ising
from zfising.model import IsingModel, ising_model
from zfising.testkit import (GeneratorConfig, brute_log_probabilities, brute_log_z, brute_pi,
                             gen_k5_necklace, gen_random_k33free, gen_random_planar, kl_divergence_empirical,
                             spin_codes)

from conftest import complete_graph, cycle_graph, grid_graph, k33, random_model

K5_EDGES = list(itertools.combinations(range(5), 2))


def _leaf(kind, n, edges, J, slot):
    return NodeContext(kind, list(range(n)), list(edges), np.asarray(J, dtype=float), [], parent=0,
                       parent_slot=slot)


def _pi_close(a: PiTable, b: PiTable, tol):
    return abs(a.log_pi_equal - b.log_pi_equal) <= tol and abs(a.log_pi_unequal - b.log_pi_unequal) <= tol


# --- summaries of single nodes ----------------------------------------------

def test_log1mexp():
    for lp in (-1e-12, -0.3, -0.7, -5.0, -50.0):
        # log(1 - q) = -q - q^2/2 - ... once q = exp(lp) is tiny
        q = math.exp(lp)
        exact = -q - q * q / 2 if q < 1e-8 else math.log(-math.expm1(lp))
        assert math.isclose(log1mexp(lp), exact, rel_tol=1e-13)
    assert log1mexp(0.0) == -745.0


def test_leaf_bond_summary():
    node = _leaf(BOND, 2, [(0, 1)], [1.0 - 1.0 + 0.5], 0)
    pi = process_node_pi(node, [])
    assert math.isclose(pi.log_pi_equal, 0.5) and math.isclose(pi.log_pi_unequal, -0.5)
    assert math.isclose(pi.A, 0.0, abs_tol=1e-15) and math.isclose(pi.B, 0.5)


def test_leaf_k5_summary_matches_enumeration():
    rng = np.random.default_rng(0)
    for slot in (0, 4, 9):
        J = rng.normal(0, 0.8, 10)
        J[slot] = 0.0
        node = _leaf(SMALL_NONPLANAR, 5, K5_EDGES, J, slot)
        p, t = K5_EDGES[slot]
        expected = brute_pi(IsingModel(complete_graph(5), J), p, t)
        assert _pi_close(process_node_pi(node, []), expected, 1e-12)


def test_leaf_planar_summary_matches_enumeration():
    rng = np.random.default_rng(1)
    for n in (3, 6, 9):
        g, _ = gen_random_planar(GeneratorConfig(n), rng)
        slot = int(rng.integers(g.num_edges))
        J = rng.normal(0, 0.8, g.num_edges)
        J[slot] = 0.0
        node = _leaf(PLANAR, n, g.edges, J, slot)
        p, t = g.edges[slot]
        assert _pi_close(process_node_pi(node, []), brute_pi(IsingModel(g, J), p, t), 1e-8)


def test_child_summaries_enter_as_coupling_and_offset():
    rng = np.random.default_rng(2)
    J = rng.normal(0, 0.5, 10)
    J[0] = 0.0
    node = _leaf(SMALL_NONPLANAR, 5, K5_EDGES, J, 0)
    node.children, node.child_slots = [1], [7]
    child = PiTable(0.9, -0.4)
    got = process_node_pi(node, [child])
    # reference: add the child's spin-product weight to edge 7 explicitly
    J2 = J.copy()
    J2[7] += child.B
    ref = brute_pi(IsingModel(complete_graph(5), J2), 0, 1)
    assert _pi_close(got, PiTable(ref.log_pi_equal + child.A, ref.log_pi_unequal + child.A), 1e-12)


def test_worked_triangle_summary():
    m = ising_model(3, [(0, 1), (0, 2), (1, 2)], [0.0, 1.0, 1.0])
    pi = brute_pi(m, 0, 1)
    assert math.isclose(pi.log_pi_equal, math.log(math.exp(2) + math.exp(-2)))
    assert math.isclose(pi.log_pi_unequal, math.log(2))
    node = _leaf(PLANAR, 3, m.graph.edges, m.couplings, 0)
    assert _pi_close(process_node_pi(node, []), pi, 1e-10)


def test_two_isolated_vertices_summary():
    pi = brute_pi(IsingModel(Graph(2, ()), np.zeros(0)), 0, 1)
    assert (pi.log_pi_equal, pi.log_pi_unequal) == (0.0, 0.0)


def test_summary_is_symmetric_in_the_parent_endpoints():
    rng = np.random.default_rng(3)
    J = rng.normal(0, 0.5, 10)
    J[2] = 0.0
    m = IsingModel(complete_graph(5), J)
    a, b = brute_pi(m, 0, 3), brute_pi(m, 3, 0)
    assert _pi_close(a, b, 1e-12)
    flipped = [(v, u) if k == 2 else (u, v) for k, (u, v) in enumerate(K5_EDGES)]
    n1 = process_node_pi(_leaf(SMALL_NONPLANAR, 5, K5_EDGES, J, 2), [])
    n2 = process_node_pi(_leaf(SMALL_NONPLANAR, 5, flipped, J, 2), [])
    assert _pi_close(n1, n2, 1e-12)
    assert n1.log_pi(1, -1) == n1.log_pi(-1, 1)


def test_root_partition_cases():
    rng = np.random.default_rng(4)
    g, _ = gen_random_planar(GeneratorConfig(9), rng)
    m = random_model(g, rng)
    node = NodeContext(PLANAR, list(range(9)), list(g.edges), m.couplings, [])
    assert math.isclose(root_partition(node, []), log_partition_planar_ising(m), rel_tol=1e-12)
    k5 = NodeContext(SMALL_NONPLANAR, list(range(5)), K5_EDGES, np.zeros(10), [])
    assert math.isclose(root_partition(k5, []), math.log(32))


def test_plain_k5_model():
    m = IsingModel(gen_k5_necklace(1), np.random.default_rng(5).normal(0, 1, 10))
    assert math.isclose(infer_log_z(m), brute_log_z(m), rel_tol=1e-12)


# --- conditional node sampling ----------------------------------------------

def _triangle_node():
    node = _leaf(PLANAR, 3, [(0, 1), (0, 2), (1, 2)], [0.0, 1.0, 1.0], 0)
    process_node_pi(node, [])
    return node


def test_triangle_given_equal_parent_spins():
    node = _triangle_node()
    rng = np.random.default_rng(6)
    m = 20000
    up = sum(condition_and_sample_node(node, 1, 1, rng)[2] == 1 for _ in range(m))
    p = math.exp(2) / (math.exp(2) + math.exp(-2))
    assert math.isclose(p, 0.98201, abs_tol=1e-5)
    assert abs(up / m - p) <= 4 * math.sqrt(p * (1 - p) / m)


def test_triangle_given_unequal_parent_spins():
    node = _triangle_node()
    rng = np.random.default_rng(7)
    m = 20000
    draws = [condition_and_sample_node(node, 1, -1, rng) for _ in range(m)]
    assert all(x[0] == 1 and x[1] == -1 for x in draws[:100])
    up = sum(x[2] == 1 for x in draws)
    assert abs(up / m - 0.5) <= 4 * math.sqrt(0.25 / m)


def test_k5_conditional_frequencies():
    rng = np.random.default_rng(8)
    J = rng.normal(0, 0.7, 10)
    J[0] = 0.0
    node = _leaf(SMALL_NONPLANAR, 5, K5_EDGES, J, 0)
    process_node_pi(node, [])
    m = 100_000
    X = np.array([condition_and_sample_node(node, -1, 1, rng) for _ in range(m)])
    assert np.all(X[:, 0] == -1) and np.all(X[:, 1] == 1)
    logp = brute_log_probabilities(IsingModel(complete_graph(5), J), log_z=0.0)
    codes = np.arange(32)
    sel = codes[((codes & 1) == 1) & ((codes & 2) == 0)]        # x0 = -1, x1 = +1
    p = np.exp(logp[sel] - logsumexp(logp[sel]))
    f = np.bincount(spin_codes(X), minlength=32)[sel] / m
    assert np.max(np.abs(f - p) / np.sqrt(p * (1 - p) / m)) <= 4.0


# --- whole models -----------------------------------------------------------

def test_random_k33free_inference():
    rng = np.random.default_rng(9)
    for _ in range(40):
        m = gen_random_k33free(GeneratorConfig(int(rng.integers(5, 15)), 0.8), rng)
        b = brute_log_z(m)
        assert abs(infer_log_z(m) - b) <= 1e-9 * max(1.0, abs(b))


def test_block_product_formula():
    rng = np.random.default_rng(10)
    # a K5, a square and a planar piece chained through articulation points
    edges = K5_EDGES + [(4, 5), (5, 6), (6, 7), (7, 4), (7, 8), (8, 9), (9, 7), (9, 10)]
    m = IsingModel(build_graph(11, edges), rng.normal(0, 0.7, len(edges)))
    eng = IsingEngine(m)
    assert eng.component_stats()["blocks"] == 4
    assert math.isclose(eng.log_z, brute_log_z(m), rel_tol=1e-12)


def test_disjoint_union_adds():
    rng = np.random.default_rng(11)
    a = gen_random_k33free(GeneratorConfig(8, 0.5), rng)
    b = gen_random_k33free(GeneratorConfig(7, 0.5), rng)
    edges = list(a.graph.edges) + [(u + 8, v + 8) for u, v in b.graph.edges]
    union = IsingModel(build_graph(15, edges), np.concatenate([a.couplings, b.couplings]))
    assert math.isclose(infer_log_z(union), infer_log_z(a) + infer_log_z(b), rel_tol=1e-12)


def test_gauge_symmetry_on_bipartite_models():
    rng = np.random.default_rng(12)
    for g in (cycle_graph(8), grid_graph(4, 4)):
        m = random_model(g, rng, 1.0)
        assert math.isclose(infer_log_z(m), infer_log_z(IsingModel(g, -m.couplings)), rel_tol=1e-12)


def test_edgeless_and_tiny_models():
    assert math.isclose(infer_log_z(IsingModel(Graph(4, ()), np.zeros(0))), 4 * math.log(2))
    assert infer_log_z(IsingModel(Graph(0, ()), np.zeros(0))) == 0.0
    m = ising_model(2, [(0, 1)], [0.5])
    assert math.isclose(infer_log_z(m), math.log(4 * math.cosh(0.5)))


def test_edgeless_samples_are_uniform():
    m = IsingModel(Graph(3, ()), np.zeros(0))
    eng = IsingEngine(m)
    X = eng.samples(np.random.default_rng(13), 16000)
    assert chisquare(np.bincount(spin_codes(X), minlength=8)).pvalue > 1e-4


def test_unsupported_topologies_raise():
    with pytest.raises(UnsupportedTopology):
        IsingEngine(IsingModel(k33(), np.zeros(9)))
    with pytest.raises(UnsupportedTopology):
        IsingEngine(IsingModel(complete_graph(6), np.zeros(15)))


def test_size_bound_admits_larger_nonplanar_parts():
    m = IsingModel(complete_graph(6), np.random.default_rng(14).normal(0, 0.5, 15))
    assert math.isclose(IsingEngine(m, size_bound=6).log_z, brute_log_z(m), rel_tol=1e-12)


def test_bowtie_all_aligned_probability():
    g = build_graph(5, [(0, 1), (1, 2), (2, 0), (2, 3), (3, 4), (4, 2)])
    m = IsingModel(g, np.ones(6))
    eng = IsingEngine(m)
    rng = np.random.default_rng(15)
    draws = 100_000
    X = eng.samples(rng, draws)
    aligned = np.mean(np.all(X == X[:, :1], axis=1))
    logp = brute_log_probabilities(m)
    p = math.exp(logp[0]) + math.exp(logp[31])
    assert abs(aligned - p) <= 4 * math.sqrt(p * (1 - p) / draws)
    # opposite configurations are equally frequent
    codes = spin_codes(X)
    up, down = np.sum(codes == 0), np.sum(codes == 31)
    assert abs(up - down) <= 4 * math.sqrt(up + down)


def test_sampling_matches_exact_law_on_necklace():
    g = gen_k5_necklace(2)
    rng = np.random.default_rng(16)
    m = IsingModel(g, rng.normal(0, 0.4, g.num_edges))
    eng = IsingEngine(m)
    draws = 60000
    X = eng.samples(rng, draws)
    p = np.exp(brute_log_probabilities(m, log_z=eng.log_z))
    f = np.bincount(spin_codes(X), minlength=len(p)) / draws
    z = np.abs(f - p) / np.sqrt(p * (1 - p) / draws)
    assert np.max(z) <= 5.0
    kl = kl_divergence_empirical(m, X, log_z=eng.log_z)
    assert kl < 3 * (2 ** 10 - 1) / (2 * draws)


def test_sampling_seed_determinism_and_flags():
    m = gen_random_k33free(GeneratorConfig(30, 0.3, seed=17))
    a = sample_spins(m, np.random.default_rng(1))
    b = sample_spins(m, np.random.default_rng(1))
    assert np.array_equal(a, b) and set(np.unique(a)) <= {-1, 1}
    assert IsingEngine(m).flags == []


def test_component_stats_for_necklace():
    stats = IsingEngine(IsingModel(gen_k5_necklace(3), np.zeros(33))).component_stats()
    assert stats["blocks"] == 1
    assert stats["small_nonplanar_nodes"] == 3
    assert stats["triconnected_components"] == 7
