"""Acceptance criteria, one PASS/FAIL line each.

Run ``pytest tests/test_acceptance.py -v``; the report lines are written to
the terminal even when output capture is on.
"""

import math
from collections import Counter
from functools import lru_cache

import numpy as np
import pytest

from zfising.cli import bench_rows, kl_curve
from zfising.decomp import BOND, CYCLE, TRICONNECTED, merge_components, triconnected_decompose
from zfising.engine import IsingEngine
from zfising.graph import build_graph, is_biconnected
from zfising.kasteleyn import log_pm_partition, planar_pipeline, spins_to_pm
from zfising.model import IsingModel
from zfising.testkit import (GeneratorConfig, brute_log_z, brute_pm_partition, brute_pm_table,
                             gen_k5_necklace, gen_random_k33free, gen_random_planar)
from zfising.wilson import PMSampler

from conftest import sign_vectors
from oracles import count_perfect_matchings, dense_pm_marginals, pfaffian_violations


@pytest.fixture
def report(capsys):
    def emit(num, passed, detail):
        with capsys.disabled():
            print(f"\n[criterion {num}] {'PASS' if passed else 'FAIL'}: {detail}")
    return emit


def _thin_planar(n, rng, keep=0.7):
    """Random biconnected planar graph: a triangulation with some edges removed."""
    g, _ = gen_random_planar(GeneratorConfig(n), rng)
    edges = list(g.edges)
    for k in rng.permutation(len(edges)):
        if rng.random() > keep:
            trial = [e for e in edges if e != g.edges[k]]
            if is_biconnected(build_graph(n, trial)):
                edges = trial
    return build_graph(n, edges)


@lru_cache(maxsize=None)
def _small_planar_pipelines():
    """20 planar models with 3..8 vertices, shared by the bijection and orientation checks."""
    rng = np.random.default_rng(303)
    out = []
    for i in range(20):
        n = 3 + i % 6
        g = _thin_planar(n, rng)
        model = IsingModel(g, rng.normal(0.0, 0.5, g.num_edges))
        out.append(planar_pipeline(model))
    return tuple(out)


# --- 1 ----------------------------------------------------------------------

def test_criterion_1_inference_matches_enumeration(report):
    rng = np.random.default_rng(101)
    worst, count = 0.0, 0
    for n in range(10, 16):
        for _ in range(100):
            m = gen_random_k33free(GeneratorConfig(n, 0.5), rng)
            b = brute_log_z(m)
            worst = max(worst, abs(IsingEngine(m).log_z - b) / max(1.0, abs(b)))
            count += 1
    ok = worst <= 1e-8
    report(1, ok, f"{count} K33-free models N=10..15, worst scaled error {worst:.2e} (tol 1e-8)")
    assert ok


# --- 2 ----------------------------------------------------------------------

def test_criterion_2_matching_sum_matches_enumeration(report):
    rng = np.random.default_rng(202)
    worst, sizes = 0.0, []
    for i in range(50):
        # expanded duals of planar models with at most six vertices have at most 24 vertices
        n = 3 + i % 4
        g = _thin_planar(n, rng, keep=0.8)
        pipe = planar_pipeline(IsingModel(g, rng.normal(0.0, 0.7, g.num_edges)))
        host = pipe.dual.graph
        assert host.num_vertices <= 24
        sizes.append(host.num_vertices)
        est = log_pm_partition(pipe.kasteleyn)
        ref = brute_pm_partition(host, pipe.dual.weights)
        worst = max(worst, abs(math.expm1(est - ref)))
    ok = worst <= 1e-10
    report(2, ok, f"50 hosts with {min(sizes)}..{max(sizes)} vertices, worst relative error "
                  f"{worst:.2e} (tol 1e-10)")
    assert ok


# --- 3 ----------------------------------------------------------------------

def test_criterion_3_spin_to_matching_bijection(report):
    failures = []
    for pipe in _small_planar_pipelines():
        n = pipe.model.num_vertices
        X = sign_vectors(n)
        X = X[X[:, 0] == 1]
        images = {tuple(spins_to_pm(pipe.dual, x).tolist()) for x in X}
        g = pipe.dual.graph
        valid = all(sorted(v for k in pm for v in g.edges[k]) == list(range(g.num_vertices))
                    for pm in images)
        total = count_perfect_matchings(g)
        if not (valid and len(images) == len(X) == 2 ** (n - 1) == total):
            failures.append((n, len(images), total))
    ok = not failures
    report(3, ok, f"20 planar models N=3..8, injective with image size 2^(N-1) = matching count; "
                  f"failures {failures}")
    assert ok


# --- 4 ----------------------------------------------------------------------

def test_criterion_4_orientation_is_pfaffian(report):
    checked, bad = 0, 0
    for pipe in _small_planar_pipelines():
        b, c = pfaffian_violations(pipe.dual.graph, pipe.orientation)
        checked += c
        bad += len(b)
    ok = bad == 0 and checked > 0
    report(4, ok, f"{checked} even cycles with matchable complement on 20 hosts, "
                  f"{bad} evenly oriented")
    assert ok


# --- 5 ----------------------------------------------------------------------

@pytest.mark.slow
def test_criterion_5_sampler_kl_decreases(report):
    counts = [10**3, 10**4, 10**5, 10**6]
    n = 10
    bound = 3 * (2**n - 1) / (2 * counts[-1])
    ok, parts = True, []
    for seed in (501, 502, 503):
        kls = [kl for _, kl in kl_curve(n, counts, seed, std=0.5)]
        ok &= all(a > b for a, b in zip(kls, kls[1:])) and kls[-1] < bound
        parts.append("/".join(f"{k:.2e}" for k in kls))
    report(5, ok, f"KL at m=1e3..1e6: {'; '.join(parts)} (bound at 1e6 {bound:.2e})")
    assert ok


# --- 6 ----------------------------------------------------------------------

@pytest.mark.slow
def test_criterion_6_matching_marginals(report):
    rng = np.random.default_rng(606)
    draws = 200_000
    worst_z, sizes, agree = 0.0, [], 0.0
    for n in (6, 7, 8):
        g, _ = gen_random_planar(GeneratorConfig(n), rng)
        pipe = planar_pipeline(IsingModel(g, rng.normal(0.0, 0.5, g.num_edges)))
        dual = pipe.dual
        host, w = dual.graph, dual.weights
        sizes.append(host.num_vertices)
        exact = dense_pm_marginals(host, w, pipe.orientation)
        # second route: marginals from the full matching table
        table = brute_pm_table(host, w)
        logs = np.array(list(table.values()))
        probs = np.exp(logs - logs.max())
        probs /= probs.sum()
        enum = np.zeros(host.num_edges)
        for pm, p in zip(table, probs):
            enum[list(pm)] += p
        agree = max(agree, float(np.max(np.abs(enum - exact))))

        sampler = PMSampler(host, dual.embedding, w, pipe.orientation)
        hits = np.zeros(host.num_edges)
        for _ in range(draws):
            hits[sampler.sample(rng).edges] += 1
        freq = hits / draws
        se = np.sqrt(exact * (1 - exact) / draws)
        inner = se > 0
        assert np.all(freq[~inner] == np.round(exact[~inner]))
        worst_z = max(worst_z, float(np.max(np.abs(freq - exact)[inner] / se[inner])))
    ok = worst_z <= 4.0 and agree < 1e-9
    report(6, ok, f"hosts with {sizes} vertices, {draws} draws each, worst |z| {worst_z:.2f} "
                  f"(limit 4); determinant vs enumeration marginals {agree:.1e}")
    assert ok


# --- 7 ----------------------------------------------------------------------

@pytest.mark.slow
def test_criterion_7_scaling_slope(report):
    rows = bench_rows([2**10, 2**12, 2**14, 2**16], seed=707)
    logn = np.log([r[0] for r in rows])
    s_inf = float(np.polyfit(logn, np.log([r[1] for r in rows]), 1)[0])
    s_smp = float(np.polyfit(logn, np.log([r[2] for r in rows]), 1)[0])
    ok = 1.0 <= s_inf <= 1.8 and 1.0 <= s_smp <= 1.8
    times = ", ".join(f"N={n}: {a / 1e3:.1f}s/{b / 1e3:.1f}s" for n, a, b in rows)
    report(7, ok, f"slopes inference {s_inf:.3f}, sampling {s_smp:.3f} (range 1.0..1.8); {times}")
    assert ok


# --- 8 ----------------------------------------------------------------------

def _glued_blocks(rng):
    """Connected model made of 2..4 random blocks glued at single vertices."""
    h = int(rng.integers(2, 5))
    blocks, edges, n = [], [], 0
    for b in range(h):
        room = 16 - n + (1 if b else 0)
        kind = rng.integers(3)
        if kind == 0 and room >= 5 + (h - b - 1):
            local = list(gen_random_k33free(GeneratorConfig(int(rng.integers(5, min(7, room - (h - b - 1)) + 1))),
                                            rng).graph.edges)
        elif kind == 1 and room >= 3 + (h - b - 1):
            size = int(rng.integers(3, min(6, room - (h - b - 1)) + 1))
            local = list(_thin_planar(size, rng).edges)
        else:
            local = [(0, 1)]
        size = 1 + max(max(e) for e in local)
        ids = list(range(n, n + size))
        if b:
            ids[int(rng.integers(size))] = int(rng.integers(n))      # articulation point
            fresh = iter(range(n, n + size - 1))
            ids = [x if x < n else next(fresh) for x in ids]
        block_edges = [(ids[u], ids[v]) for u, v in local]
        blocks.append(block_edges)
        edges += block_edges
        n = 1 + max(max(e) for e in edges)
    J = rng.normal(0.0, 0.6, len(edges))
    return n, edges, J, blocks


def test_criterion_8_block_product_law(report):
    rng = np.random.default_rng(808)
    worst_law, worst_engine, shapes = 0.0, 0.0, Counter()
    for _ in range(20):
        n, edges, J, blocks = _glued_blocks(rng)
        assert n <= 16
        shapes[len(blocks)] += 1
        model = IsingModel(build_graph(n, edges), J)
        whole = brute_log_z(model)
        coupling = dict(zip(edges, J))
        composed = -math.log(2) * (len(blocks) - 1)
        for be in blocks:
            verts = sorted({x for e in be for x in e})
            local = {v: i for i, v in enumerate(verts)}
            sub = IsingModel(build_graph(len(verts), [(local[u], local[v]) for u, v in be]),
                             np.array([coupling[e] for e in be]))
            composed += brute_log_z(sub)
        worst_law = max(worst_law, abs(composed - whole) / max(1.0, abs(whole)))
        worst_engine = max(worst_engine, abs(IsingEngine(model).log_z - whole) / max(1.0, abs(whole)))
    ok = worst_law <= 1e-9 and worst_engine <= 1e-9
    report(8, ok, f"20 graphs with block counts {dict(sorted(shapes.items()))}: product law "
                  f"with factor 2^(1-h) error {worst_law:.1e}, engine error {worst_engine:.1e} (tol 1e-9)")
    assert ok


# --- 9 ----------------------------------------------------------------------

def _necklace_outcome(n):
    g = gen_k5_necklace(n)
    comps = triconnected_decompose(g)
    kinds = Counter(c.kind for c in comps)
    k5 = sum(1 for c in comps if c.kind == TRICONNECTED and c.num_vertices == 5
             and c.graph.num_edges == 10)
    triple = sum(1 for c in comps if c.kind == BOND and c.graph.num_edges == 3)
    merged = sorted((min(u, v), max(u, v), k) for u, v, k in merge_components(comps))
    original = sorted((min(u, v), max(u, v), k) for k, (u, v) in enumerate(g.edges))
    shape_ok = kinds[CYCLE] == 1 and triple == kinds[BOND] == n and k5 == kinds[TRICONNECTED] == n
    return shape_ok, merged == original, dict(kinds)


@pytest.mark.parametrize("n", [
    pytest.param(1, marks=pytest.mark.xfail(
        strict=True, reason="with one bead the necklace is a plain K5, which has no cycle or bond")),
    2, 3, 5])
def test_criterion_9_necklace_decomposition(report, n):
    shape_ok, round_trip, kinds = _necklace_outcome(n)
    ok = shape_ok and round_trip
    report(9, ok, f"necklace n={n}: components {kinds}, round trip {'exact' if round_trip else 'broken'}")
    assert ok
