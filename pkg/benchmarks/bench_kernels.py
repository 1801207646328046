#!/usr/bin/env python3
"""Compare the compiled and NumPy kernel backends on the inference loop.

Usage: python benchmarks/bench_kernels.py [--n 20000] [--h 20] [--k 9]

Times a fixed number of full coordinate-ascent cycles (posterior step plus
count accumulation, the two hot kernels) with each backend and reports the
ratio. Expect the compiled backend to win by more as H and K grow.
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from labelfuse._kernels import _pykernels

try:
    from labelfuse._kernels import _ckernels
except ImportError:
    _ckernels = None

from labelfuse.bayes import AnnotationMatrix, BeaConfig, _elog_from_counts
from labelfuse.simulate import SourceSpec, SynthConfig, generate


def run_cycles(kernels, matrix: AnnotationMatrix, config: BeaConfig, cycles: int) -> float:
    qz = np.full((matrix.n_instances, matrix.k), 1.0 / matrix.k)
    nk = qz.sum(axis=0)
    njkl = kernels.label_mass(qz, matrix.y)
    elog_pi, elog_v = _elog_from_counts(nk, njkl, matrix.n_instances, config)
    start = time.perf_counter()
    for _ in range(cycles):
        qz, _lse = kernels.posterior_step(matrix.y, elog_pi, elog_v)
        nk = qz.sum(axis=0)
        njkl = kernels.label_mass(qz, matrix.y)
        elog_pi, elog_v = _elog_from_counts(nk, njkl, matrix.n_instances, config)
    return time.perf_counter() - start


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--n", type=int, default=20000)
    parser.add_argument("--h", type=int, default=20)
    parser.add_argument("--k", type=int, default=9)
    parser.add_argument("--cycles", type=int, default=30)
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()

    specs = tuple(
        SourceSpec("reliable", diag=0.6 + 0.35 * j / max(1, args.h - 1))
        for j in range(args.h)
    )
    problem = generate(SynthConfig(n=args.n, k=args.k, sources=specs, seed=args.seed))
    config = BeaConfig()

    print(f"problem: N={args.n} H={args.h} K={args.k}, {args.cycles} cycles")
    t_py = run_cycles(_pykernels, problem.matrix, config, args.cycles)
    print(f"numpy backend:    {t_py:8.3f} s  ({t_py / args.cycles * 1e3:7.2f} ms/cycle)")
    if _ckernels is None:
        print("compiled backend: not built")
        return
    t_c = run_cycles(_ckernels, problem.matrix, config, args.cycles)
    print(f"compiled backend: {t_c:8.3f} s  ({t_c / args.cycles * 1e3:7.2f} ms/cycle)")
    print(f"speedup: {t_py / t_c:.2f}x")


if __name__ == "__main__":
    main()
