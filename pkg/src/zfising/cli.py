"""Command line interface.

Exit codes: 0 success, 1 selftest failure, 2 usage error, 3 unreadable or
invalid model file, 4 unsupported topology.
"""

from __future__ import annotations

import argparse
import json
import sys
import time

import numpy as np

from .decomp import UnsupportedTopology
from .engine import IsingEngine
from .io import ModelFileError, parse_model_file, write_model_file
from .model import IsingModel
from .testkit import GeneratorConfig, gen_k5_necklace, gen_random_k33free, gen_random_planar, \
    kl_divergence_empirical

EXIT_OK = 0
EXIT_SELFTEST = 1
EXIT_USAGE = 2
EXIT_IO = 3
EXIT_TOPOLOGY = 4

EPILOG = ("exit codes: 0 ok, 1 selftest failure, 2 usage error, "
          "3 unreadable or invalid model file, 4 unsupported topology")


class _UsageError(Exception):
    pass


def _int_list(text: str) -> list[int]:
    try:
        vals = [int(float(tok)) for tok in text.replace(",", " ").split()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected a comma-separated list of integers: {text!r}") from exc
    if not vals or min(vals) <= 0:
        raise argparse.ArgumentTypeError("list entries must be positive")
    return vals


def _g(x: float, digits: int) -> str:
    return f"{x:.{digits}g}"


def _table(header: list[str], rows: list[list]) -> str:
    lines = ["\t".join(header)]
    lines += ["\t".join(str(c) for c in row) for row in rows]
    return "\n".join(lines) + "\n"


def _load(path: str) -> IsingModel:
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ModelFileError(f"cannot read {path}: {exc.strerror}") from exc
    return parse_model_file(text)


def _generate(kind: str, size: int, seed: int, std: float) -> IsingModel:
    rng = np.random.default_rng(seed)
    cfg = GeneratorConfig(size, std, seed)
    if kind == "planar":
        g, _ = gen_random_planar(cfg, rng)
    elif kind == "k33free":
        return gen_random_k33free(cfg, rng)
    else:
        g = gen_k5_necklace(size)
    return IsingModel(g, rng.normal(0.0, std, g.num_edges))


def _slope(xs, ys) -> float:
    if len(xs) < 2:
        return float("nan")
    return float(np.polyfit(np.log(xs), np.log(ys), 1)[0])


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------

def cmd_infer(args, out) -> int:
    model = _load(args.model)
    t0 = time.perf_counter()
    engine = IsingEngine(model, args.size_bound)
    ms = 1e3 * (time.perf_counter() - t0)
    report = {"log_z": engine.log_z, "wall_time_ms": ms,
              "component_stats": engine.component_stats(), "flags": engine.flags}
    if args.format == "json":
        out.write(json.dumps(report, indent=2) + "\n")
        return EXIT_OK
    stats = report["component_stats"]
    keys = ["blocks", "planar_nodes", "small_nonplanar_nodes", "bond_nodes"]
    out.write(_table(["log_z", "wall_time_ms"] + keys + ["flags"],
                     [[f"{engine.log_z:#.12g}", _g(ms, 6)] + [stats[k] for k in keys]
                      + [",".join(engine.flags) or "-"]]))
    return EXIT_OK


def cmd_sample(args, out) -> int:
    model = _load(args.model)
    engine = IsingEngine(model, args.size_bound)
    rng = np.random.default_rng(args.seed)
    S = engine.samples(rng, args.num_samples)
    if args.format == "json":
        out.write(json.dumps({"num_vertices": model.num_vertices, "seed": args.seed,
                              "samples": S.tolist()}) + "\n")
    else:
        out.write("".join(" ".join(str(int(v)) for v in row) + "\n" for row in S))
    return EXIT_OK


def cmd_gen(args, out) -> int:
    if args.kind != "necklace" and args.size < (5 if args.kind == "k33free" else 3):
        raise _UsageError(f"--size too small for kind {args.kind}")
    model = _generate(args.kind, args.size, args.seed, args.coupling_std)
    text = write_model_file(model)
    if args.output:
        try:
            with open(args.output, "w", encoding="utf-8") as fh:
                fh.write(text)
        except OSError as exc:
            raise ModelFileError(f"cannot write {args.output}: {exc.strerror}") from exc
    else:
        out.write(text)
    return EXIT_OK


def bench_rows(sizes, seed: int, std: float = 0.1) -> list[tuple[int, float, float]]:
    """``(N, inference ms, one-sample ms)`` on a random K33-free model per size."""
    rows = []
    for i, n in enumerate(sizes):
        model = gen_random_k33free(GeneratorConfig(n, std, seed + i))
        t0 = time.perf_counter()
        engine = IsingEngine(model)
        t1 = time.perf_counter()
        engine.sample(np.random.default_rng(seed + i))
        t2 = time.perf_counter()
        rows.append((n, 1e3 * (t1 - t0), 1e3 * (t2 - t1)))
    return rows


def cmd_bench(args, out) -> int:
    rows = bench_rows(args.sizes, args.seed, args.coupling_std)
    ns = [r[0] for r in rows]
    slopes = {"infer": _slope(ns, [r[1] for r in rows]), "sample": _slope(ns, [r[2] for r in rows])}
    if args.format == "json":
        out.write(json.dumps({"rows": [{"N": n, "infer_ms": a, "sample_ms": b} for n, a, b in rows],
                              "slopes": slopes}, indent=2) + "\n")
    else:
        out.write(_table(["N", "infer_ms", "sample_ms"],
                         [[n, _g(a, 6), _g(b, 6)] for n, a, b in rows]))
    return EXIT_OK


def kl_curve(size: int, counts, seed: int, std: float = 0.1) -> list[tuple[int, float]]:
    """KL of sample prefixes of length ``counts`` against the exact law."""
    model = gen_random_k33free(GeneratorConfig(size, std, seed))
    engine = IsingEngine(model)
    S = engine.samples(np.random.default_rng(seed), max(counts))
    return [(m, kl_divergence_empirical(model, S[:m], log_z=engine.log_z)) for m in counts]


def cmd_kltest(args, out) -> int:
    if args.size > 20 or args.size < 5:
        raise _UsageError("--size must lie in 5..20 for exact KL")
    rows = kl_curve(args.size, args.sample_counts, args.seed, args.coupling_std)
    if args.format == "json":
        out.write(json.dumps({"size": args.size, "seed": args.seed,
                              "rows": [{"m": m, "kl": kl} for m, kl in rows]}, indent=2) + "\n")
    else:
        out.write(_table(["m", "kl"], [[m, _g(kl, 6)] for m, kl in rows]))
    return EXIT_OK


def selftest_checks(seed: int = 0):
    """Quick oracle comparisons; yields ``(name, passed, detail)``."""
    from .kasteleyn import log_pm_partition, planar_pipeline
    from .testkit import brute_log_z, brute_pm_partition

    rng = np.random.default_rng(seed)
    worst = 0.0
    for n in range(5, 13):
        for _ in range(5):
            m = gen_random_k33free(GeneratorConfig(n, 0.5, int(rng.integers(2**31))))
            b = brute_log_z(m)
            worst = max(worst, abs(IsingEngine(m).log_z - b) / max(1.0, abs(b)))
    yield "inference vs enumeration", worst <= 1e-8, f"worst relative error {_g(worst, 3)}"

    worst = 0.0
    for _ in range(10):
        g, _emb = gen_random_planar(GeneratorConfig(int(rng.integers(3, 5))), rng)
        pipe = planar_pipeline(IsingModel(g, rng.normal(0, 0.5, g.num_edges)))
        ks = pipe.kasteleyn
        b = brute_pm_partition(pipe.dual.graph, pipe.dual.weights)
        worst = max(worst, abs(log_pm_partition(ks) - b))
    yield "matching sum vs enumeration", worst <= 1e-10, f"worst log error {_g(worst, 3)}"

    m = gen_random_k33free(GeneratorConfig(8, 0.5, seed))
    engine = IsingEngine(m)
    S = engine.samples(np.random.default_rng(seed), 20000)
    kl = kl_divergence_empirical(m, S, log_z=engine.log_z)
    bound = 3 * (2**8 - 1) / (2 * len(S))
    yield "sampler KL", kl < bound, f"KL {_g(kl, 6)} bound {_g(bound, 6)}"


def cmd_selftest(args, out) -> int:
    ok = True
    rows = []
    for name, passed, detail in selftest_checks(args.seed):
        ok &= passed
        rows.append([name, "PASS" if passed else "FAIL", detail])
    if args.format == "json":
        out.write(json.dumps([{"check": a, "status": b, "detail": c} for a, b, c in rows], indent=2) + "\n")
    else:
        out.write(_table(["check", "status", "detail"], rows))
    return EXIT_OK if ok else EXIT_SELFTEST


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------

class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _UsageError(message)


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="zfising", description="Exact inference and sampling for zero-field Ising "
                                            "models on planar and K33-free graphs.", epilog=EPILOG)
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(sp, seed=True):
        sp.add_argument("--format", choices=["text", "json"], default="text")
        if seed:
            sp.add_argument("--seed", type=int, default=0)

    sp = sub.add_parser("infer", help="print log Z of a model file", epilog=EPILOG)
    sp.add_argument("--model", required=True)
    sp.add_argument("--size-bound", type=int, default=5)
    common(sp, seed=False)

    sp = sub.add_parser("sample", help="draw exact spin samples", epilog=EPILOG)
    sp.add_argument("--model", required=True)
    sp.add_argument("--num-samples", type=int, default=1)
    sp.add_argument("--size-bound", type=int, default=5)
    common(sp)

    sp = sub.add_parser("gen", help="write a random model file", epilog=EPILOG)
    sp.add_argument("--kind", choices=["planar", "k33free", "necklace"], required=True)
    sp.add_argument("--size", type=int, required=True,
                    help="number of vertices (number of K5 beads for necklace)")
    sp.add_argument("--coupling-std", type=float, default=0.1)
    sp.add_argument("--output")
    common(sp)

    sp = sub.add_parser("bench", help="time inference and one sample per size", epilog=EPILOG)
    sp.add_argument("--sizes", type=_int_list, default=[1024, 4096, 16384, 65536])
    sp.add_argument("--coupling-std", type=float, default=0.1)
    common(sp)

    sp = sub.add_parser("kltest", help="KL divergence of samples against the exact law", epilog=EPILOG)
    sp.add_argument("--size", type=int, default=10)
    sp.add_argument("--sample-counts", type=_int_list, default=[1000, 10000, 100000, 1000000])
    sp.add_argument("--coupling-std", type=float, default=0.1)
    common(sp)

    sp = sub.add_parser("selftest", help="run quick oracle checks", epilog=EPILOG)
    common(sp)
    return p


COMMANDS = {"infer": cmd_infer, "sample": cmd_sample, "gen": cmd_gen, "bench": cmd_bench,
            "kltest": cmd_kltest, "selftest": cmd_selftest}


def run_cli(argv=None, out=None, err=None) -> int:
    out = sys.stdout if out is None else out
    err = sys.stderr if err is None else err
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if getattr(args, "num_samples", 1) < 0:
            raise _UsageError("--num-samples must be nonnegative")
        return COMMANDS[args.command](args, out)
    except _UsageError as exc:
        err.write(f"zfising: error: {exc}\n")
        return EXIT_USAGE
    except ModelFileError as exc:
        err.write(f"zfising: {type(exc).__name__}: {exc}\n")
        return EXIT_IO
    except UnsupportedTopology as exc:
        err.write(f"zfising: unsupported topology: {exc}\n")
        return EXIT_TOPOLOGY


def main() -> None:
    sys.exit(run_cli())


if __name__ == "__main__":
    main()
