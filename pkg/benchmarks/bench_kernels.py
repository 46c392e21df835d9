"""Compare the compiled and pure-Python elimination kernels.

    python3 benchmarks/bench_kernels.py --sizes 256,1024,4096 --repeats 3

For each size a random planar model is reduced to its matching system,
which is then factored with each backend.  Prints the best
time per backend, the speedup and the log-determinant gap between them.
"""

import argparse
import time

import numpy as np

from zfising import elimination
from zfising.graph import is_biconnected, planar_embed
from zfising.kasteleyn import log_pm_partition, planar_pipeline
from zfising.model import IsingModel
from zfising.testkit import GeneratorConfig, gen_random_planar


def _system(n, seed):
    rng = np.random.default_rng(seed)
    g, emb = gen_random_planar(GeneratorConfig(n), rng)
    assert is_biconnected(g) and planar_embed(g) is not None
    return planar_pipeline(IsingModel(g, rng.normal(0.0, 0.1, g.num_edges)), emb).kasteleyn


def _best(ks, repeats):
    best, val = float("inf"), None
    for _ in range(repeats):
        t0 = time.perf_counter()
        val = log_pm_partition(ks)
        best = min(best, time.perf_counter() - t0)
    return best, val


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--sizes", default="256,1024,4096")
    ap.add_argument("--repeats", type=int, default=3)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    backends = elimination.available_backends()
    if "compiled" not in backends:
        print("compiled kernel not built; only the Python kernel is timed")
    print("N\tdual_vertices\t" + "\t".join(f"{b}_ms" for b in backends) + "\tspeedup\tlogdet_gap")
    prev = elimination.BACKEND
    try:
        for n in (int(s) for s in args.sizes.split(",")):
            ks = _system(n, args.seed + n)
            times, vals = {}, {}
            for b in backends:
                elimination.use_backend(b)
                times[b], vals[b] = _best(ks, args.repeats)
            speed = times["python"] / times["compiled"] if "compiled" in times else float("nan")
            gap = abs(vals[backends[0]] - vals[backends[-1]])
            print(f"{n}\t{ks.num_vertices}\t" + "\t".join(f"{1e3 * times[b]:.1f}" for b in backends)
                  + f"\t{speed:.1f}x\t{gap:.1e}")
    finally:
        elimination.use_backend(prev)


if __name__ == "__main__":
    main()
