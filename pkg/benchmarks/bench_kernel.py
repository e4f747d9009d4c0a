#!/usr/bin/env python3
"""Benchmark the compiled recurrence kernel against the pure-numpy fallback.

Times the raw ladder scan (the hot inner loop of every practical-cable bit)
and a representative end-to-end attack cell on each backend.

Usage: python benchmarks/bench_kernel.py [--bits 2000] [--repeats 5]
"""
import argparse
import os
import statistics
import subprocess
import sys
import time

import numpy as np


def bench_raw_scan(repeats: int) -> dict:
    from kljnsim.backend import compiled_available, scan_with
    from kljnsim.circuit import Cable, LoopConfig, TransientSolver, build_cable_model

    model = build_cable_model(1000.0, 10)
    cfg = LoopConfig(1000.0, 9000.0, Cable(1000.0, 10))
    solver = TransientSolver(model, cfg, 1.0 / 2000.0)
    sysm = solver.system
    rng = np.random.default_rng(0)
    t_steps = 200
    u = rng.standard_normal((3, t_steps))
    qu = u[:, 1:].T @ sysm.q_next.T + u[:, :-1].T @ sysm.q_prev.T
    x0 = sysm.dc_gain @ u[:, 0]
    scans_per_rep = 2000

    results = {}
    backends = ["python"] + (["compiled"] if compiled_available() else [])
    for backend in backends:
        scan_with(backend, sysm.p, qu, x0)  # warm up
        times = []
        for _ in range(repeats):
            t0 = time.perf_counter()
            for _ in range(scans_per_rep):
                scan_with(backend, sysm.p, qu, x0)
            times.append((time.perf_counter() - t0) / scans_per_rep)
        results[backend] = statistics.median(times)
    return results


def bench_attack_cell(bits: int) -> dict:
    """Full pipeline timing via subprocesses so backend selection is clean."""
    script = (
        "import time;"
        "from kljnsim import harness, circuit;"
        "import kljnsim;"
        f"cfg = harness.SimConfig(n_bits={bits});"
        "t0 = time.perf_counter();"
        "cell = harness.run_attack_cell(harness._cell_config(cfg, circuit.Cable(1000.0, 10), 0.1));"
        "el = time.perf_counter() - t0;"
        "print(f'{kljnsim.active_backend()} {el:.3f} {cell.p_e:.4f}')"
    )
    out = {}
    for backend in ("python", "compiled"):
        env = dict(os.environ, KLJNSIM_BACKEND=backend)
        proc = subprocess.run(
            [sys.executable, "-c", script], capture_output=True, text=True, env=env
        )
        if proc.returncode != 0:
            print(f"  {backend}: unavailable ({proc.stderr.strip().splitlines()[-1]})")
            continue
        name, elapsed, p_e = proc.stdout.split()
        assert name == backend
        out[backend] = (float(elapsed), float(p_e))
    return out


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--bits", type=int, default=2000, help="bits per attack cell")
    parser.add_argument("--repeats", type=int, default=5)
    args = parser.parse_args()

    print("raw ladder scan (200 samples, 19 states), per-bit cost:")
    raw = bench_raw_scan(args.repeats)
    for backend, t in raw.items():
        print(f"  {backend:>8s}: {1e6 * t:8.1f} us/scan")
    if len(raw) == 2:
        print(f"  speedup : {raw['python'] / raw['compiled']:.1f}x")

    print(f"\nfull attack cell, 1000 m cable at 10% injection, {args.bits} bits:")
    cell = bench_attack_cell(args.bits)
    for backend, (elapsed, p_e) in cell.items():
        print(f"  {backend:>8s}: {elapsed:7.2f} s  ({1e3 * elapsed / args.bits:.2f} ms/bit, p_E={p_e})")
    if len(cell) == 2:
        print(f"  speedup : {cell['python'][0] / cell['compiled'][0]:.1f}x")
        if cell["python"][1] != cell["compiled"][1]:
            print("  note: p_E differs between backends (last-ulp arithmetic differences)")
    return 0


if __name__ == "__main__":
    sys.exit(main())
