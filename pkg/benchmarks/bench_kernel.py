#!/usr/bin/env python3
"""Benchmark the compiled fact-matching kernel against the pure-Python
fallback on realistic workloads: core computation and isomorphism checks
over chased instances, plus a raw kernel microbenchmark.

Usage: python benchmarks/bench_kernel.py [--samples N] [--max-facts K]
"""

import argparse
import pathlib
import sys
import time

sys.path.insert(0, str(pathlib.Path(__file__).resolve().parents[1] / "src"))

from dx import kernel  # noqa: E402
from dx.chase import naive_chase  # noqa: E402
from dx.model import compute_core, instances_isomorphic  # noqa: E402
from dx.parser import parse_mapping  # noqa: E402
from dx.verify import random_source_instance  # noqa: E402

SYMMETRIC_JOIN = parse_mapping(
    "source R/2. target S/2. tgd: R(x,y) -> exists z: S(x,z) & S(y,z)."
)
CHAIN = parse_mapping(
    """source P/1, Q/1. target R1/2, R2/2.
       tgd: P(x) -> exists y: R1(x,y).
       tgd: Q(x) -> exists y, z, u: R2(x,y) & R2(z,y) & R1(z,u)."""
)


def build_workload(samples, max_facts):
    groups = []
    for mapping in (SYMMETRIC_JOIN, CHAIN):
        groups.append(
            [
                naive_chase(
                    mapping,
                    random_source_instance(mapping.source, f"bench:{k}", 6, max_facts),
                )
                for k in range(samples)
            ]
        )
    return groups


def run_cores(groups):
    t0 = time.perf_counter()
    n_folds = 0
    for instances in groups:
        for j in instances:
            core, _ = compute_core(j)
            n_folds += len(j.facts) - len(core.facts)
    return time.perf_counter() - t0, n_folds


def _renamed_copy(j):
    from dx.model import Fact, FreshNull, Instance

    names = {}
    for v in reversed(j.nulls):
        names[v] = FreshNull(len(names) + 1000)
    return Instance(
        j.schema,
        [
            Fact(f.rel, tuple(names.get(a, a) for a in f.args))
            for f in j.facts
        ],
    )


def run_isos(groups):
    pairs = [
        (j, _renamed_copy(j)) for instances in groups for j in instances
    ]
    t0 = time.perf_counter()
    hits = 0
    for a, b in pairs:
        if instances_isomorphic(a, b):
            hits += 1
    return time.perf_counter() - t0, hits


def run_micro(reps):
    # star pattern with one hub variable, all-variable arguments
    pattern = [(0, (-1, -k)) for k in range(2, 9)]
    target = [(0, (u, v)) for u in range(12) for v in range(12)]
    t0 = time.perf_counter()
    out = None
    for _ in range(reps):
        out = kernel.find_hom(pattern, target, 9, True, None)
    return time.perf_counter() - t0, out


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--samples", type=int, default=150)
    ap.add_argument("--max-facts", type=int, default=12)
    ap.add_argument("--micro-reps", type=int, default=2000)
    args = ap.parse_args()

    names = list(kernel.backends())
    print(f"available backends: {', '.join(names)}")
    if "c" not in names:
        print("note: compiled kernel not built (run: python setup.py build_ext --inplace)")

    groups = build_workload(args.samples, args.max_facts)
    print(f"workload: {sum(len(g) for g in groups)} chased instances")

    results = {}
    for name in names:
        kernel.set_backend(name)
        core_t, folds = run_cores(groups)
        iso_t, hits = run_isos(groups)
        micro_t, _ = run_micro(args.micro_reps)
        results[name] = (core_t, iso_t, micro_t)
        print(
            f"{name:>7}: cores {core_t * 1e3:8.1f} ms ({folds} folds)   "
            f"isomorphism {iso_t * 1e3:8.1f} ms ({hits} hits)   "
            f"micro {micro_t * 1e3:8.1f} ms"
        )

    if len(results) == 2:
        py = results["python"]
        cc = results["c"]
        print(
            "speedup (python/c): cores {:.2f}x, isomorphism {:.2f}x, micro {:.2f}x".format(
                py[0] / cc[0], py[1] / cc[1], py[2] / cc[2]
            )
        )


if __name__ == "__main__":
    main()
