import itertools
import math

import numpy as np
import pytest

from zfising.decomp import SMALL_NONPLANAR, classify_component, triconnected_decompose
from zfising.graph import biconnected_decompose, build_graph, is_biconnected, planar_embed
from zfising.io import parse_model_file, write_model_file
from zfising.model import IsingModel, ising_model
from zfising.testkit import (EmptyPMSet, GeneratorConfig, brute_log_probabilities, brute_log_z,
                             brute_pm_partition, brute_pm_table, gen_k5_necklace, gen_random_k33free,
                             gen_random_planar, kl_divergence_empirical, spin_codes)

from conftest import complete_graph, cycle_graph, random_model, sign_vectors
from oracles import all_perfect_matchings, has_k33_subdivision


# --- oracles ----------------------------------------------------------------

def test_brute_log_z_against_direct_sum():
    rng = np.random.default_rng(0)
    g = complete_graph(5)
    m = random_model(g, rng, 1.0)
    direct = math.log(sum(math.exp(m.energy(x)) for x in sign_vectors(5)))
    assert math.isclose(brute_log_z(m), direct, rel_tol=1e-13)


def test_brute_log_z_is_chunked_consistently():
    # 18 spins spans several enumeration chunks
    rng = np.random.default_rng(1)
    g = cycle_graph(18)
    m = random_model(g, rng, 0.5)
    # transfer-matrix value for a ring
    M = np.eye(2)
    for j in m.couplings:
        M = M @ np.array([[math.exp(j), math.exp(-j)], [math.exp(-j), math.exp(j)]])
    assert math.isclose(brute_log_z(m), math.log(np.trace(M)), rel_tol=1e-12)


def test_probability_table_is_normalised_and_indexed_by_codes():
    rng = np.random.default_rng(2)
    m = random_model(cycle_graph(6), rng)
    logp = brute_log_probabilities(m)
    assert math.isclose(np.exp(logp).sum(), 1.0, rel_tol=1e-12)
    X = sign_vectors(6)
    assert np.array_equal(spin_codes(X), np.arange(64))
    assert np.allclose(logp, m.energy(X) - brute_log_z(m))


def test_brute_pm_examples():
    assert math.isclose(brute_pm_partition(cycle_graph(4), np.ones(4)), math.log(2))
    assert math.isclose(brute_pm_partition(complete_graph(4), np.ones(6)), math.log(3))
    with pytest.raises(EmptyPMSet):
        brute_pm_partition(build_graph(3, [(0, 1), (1, 2)]), np.ones(2))
    with pytest.raises(EmptyPMSet):
        brute_pm_partition(build_graph(4, [(0, 1), (0, 2), (0, 3)]), np.ones(3))


def test_pm_table_agrees_with_subset_scan():
    rng = np.random.default_rng(3)
    g, _ = gen_random_planar(GeneratorConfig(8), rng)
    w = rng.uniform(0.5, 2.0, g.num_edges)
    table = brute_pm_table(g, w)
    scan = {tuple(sorted(c)): float(np.log(w[list(c)]).sum()) for c in all_perfect_matchings(g)}
    assert table.keys() == scan.keys()
    assert all(math.isclose(table[k], scan[k], abs_tol=1e-12) for k in scan)


def test_oracles_are_order_independent():
    rng = np.random.default_rng(4)
    m = random_model(complete_graph(5), rng)
    perm = rng.permutation(10)
    shuffled = IsingModel(build_graph(5, [m.graph.edges[k][::-1] for k in perm]), m.couplings[perm])
    assert brute_log_z(m) == pytest.approx(brute_log_z(shuffled), rel=1e-14)
    assert brute_log_z(m) == brute_log_z(m)


# --- generators -------------------------------------------------------------

def test_planar_generator_size_three_is_triangle():
    g, _ = gen_random_planar(GeneratorConfig(3, seed=0))
    assert sorted(tuple(sorted(e)) for e in g.edges) == [(0, 1), (0, 2), (1, 2)]


def test_planar_generator_postconditions():
    rng = np.random.default_rng(5)
    for _ in range(100):
        g, emb = gen_random_planar(GeneratorConfig(30), rng)
        assert g.num_vertices == 30 and g.num_edges <= 3 * 30 - 6
        assert planar_embed(g) is not None and is_biconnected(g)
        assert len(biconnected_decompose(g).components) == 1
        emb.validate()


def test_k33free_generator_postconditions():
    rng = np.random.default_rng(6)
    bare = gen_random_k33free(GeneratorConfig(5, seed=1))
    assert sorted(bare.graph.edges) == list(itertools.combinations(range(5), 2))
    for _ in range(60):
        n = int(rng.integers(5, 40))
        m = gen_random_k33free(GeneratorConfig(n, 0.3), rng)
        assert m.num_vertices == n and is_biconnected(m.graph)
        for c in triconnected_decompose(m.graph):
            if classify_component(c) == SMALL_NONPLANAR:
                assert c.num_vertices == 5


def test_k33free_generator_has_no_k33_subdivision():
    rng = np.random.default_rng(7)
    for _ in range(25):
        n = int(rng.integers(6, 13))
        assert not has_k33_subdivision(gen_random_k33free(GeneratorConfig(n), rng).graph)


def test_coupling_spread_follows_config():
    m = gen_random_k33free(GeneratorConfig(400, 0.25, seed=8))
    assert 0.2 < np.std(m.couplings) < 0.3


def test_generators_are_seed_deterministic():
    a = gen_random_k33free(GeneratorConfig(25, 0.1, seed=3))
    b = gen_random_k33free(GeneratorConfig(25, 0.1, seed=3))
    assert a.graph.edges == b.graph.edges and np.array_equal(a.couplings, b.couplings)


@pytest.mark.parametrize("n", [1, 2, 3, 5])
def test_necklace_sizes(n):
    g = gen_k5_necklace(n)
    assert g.num_vertices == 5 * n and is_biconnected(g)


def test_generator_outputs_survive_serialisation():
    rng = np.random.default_rng(9)
    models = [gen_random_k33free(GeneratorConfig(12, 0.5), rng)]
    g, _ = gen_random_planar(GeneratorConfig(10), rng)
    models.append(random_model(g, rng))
    neck = gen_k5_necklace(2)
    models.append(IsingModel(neck, rng.normal(size=neck.num_edges)))
    for m in models:
        back = parse_model_file(write_model_file(m))
        assert back.num_vertices == m.num_vertices
        orig = {tuple(sorted(e)): j for e, j in zip(m.graph.edges, m.couplings)}
        again = {tuple(sorted(e)): j for e, j in zip(back.graph.edges, back.couplings)}
        assert orig == again


# --- empirical KL -----------------------------------------------------------

def test_kl_of_point_mass_under_uniform_law():
    m = IsingModel(cycle_graph(6), np.zeros(6))
    X = np.ones((64 * 3, 6))
    assert math.isclose(kl_divergence_empirical(m, X), 6 * math.log(2), rel_tol=1e-12)


def test_kl_vanishes_for_exact_frequencies():
    rng = np.random.default_rng(10)
    m = random_model(cycle_graph(4), rng)
    p = np.exp(brute_log_probabilities(m))
    # frequencies proportional to p up to rounding, realised with many copies
    counts = np.round(p * 1e6).astype(int)
    X = np.repeat(sign_vectors(4), counts, axis=0)
    assert kl_divergence_empirical(m, X) < 1e-10


def test_kl_limits():
    with pytest.raises(ValueError):
        kl_divergence_empirical(IsingModel(cycle_graph(21), np.zeros(21)), np.ones((2, 21)))
