"""Benchmark: compiled kernel extension vs pure-Python fallback.

Times the two hot kernels (RK4 vehicle stepping and centerline
projection) plus a closed-loop MPC episode under each backend.

    python3 benchmarks/bench_kernels.py [--quick]
"""

from __future__ import annotations

import argparse
import subprocess
import sys
import time
import numpy as np

from trackday.kernels import _pure

try:
    from trackday.kernels import _core
except ImportError:
    _core = None

from trackday.library import load_bundled_track
from trackday.track import TrackIndex


def time_fn(fn, repeats: int = 5) -> float:
    best = float("inf")
    for _ in range(repeats):
        start = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - start)
    return best


def bench_rk4(module, n: int) -> float:
    def run():
        x = y = phi = 0.0
        v = 5.0
        for _ in range(n):
            x, y, v, phi = module.bike_rk4(
                x, y, v, phi, 0.5, 0.3, 10.0, 0.3, 0.0, 2.7, 0.1, 10
            )

    return time_fn(run)


def bench_projection(module, index: TrackIndex, n: int) -> float:
    rng = np.random.default_rng(0)
    queries = rng.uniform(-150, 150, size=(n, 2))
    args = (
        index._seg_ax, index._seg_ay, index._seg_dx, index._seg_dy,
        index._seg_len2, index._seg_len, index._seg_cum,
    )

    def run():
        for px, py in queries:
            module.project_polyline(*args, px, py)

    return time_fn(run, repeats=3)


def bench_mpc_episode(backend: str) -> float:
    """One MPC lap in a subprocess pinned to the given backend."""
    code = (
        "import time; t0=time.perf_counter();"
        "from trackday.engine import Engine, EpisodeConfig;"
        "from trackday.controllers import MpcPolicy, mpc_preset;"
        "eng=Engine(EpisodeConfig(track='oval', laps_required=1));"
        "pol=MpcPolicy(eng.index, mpc_preset('matched'));"
        "obs=eng.reset()\n"
        "while not eng.done:\n"
        "    a,_=pol.act(obs); obs,_,_,_=eng.step(a)\n"
        "print(time.perf_counter()-t0)"
    )
    env = {"TRACKDAY_KERNELS": backend, "PATH": "/usr/bin:/bin:/usr/local/bin"}
    out = subprocess.run(
        [sys.executable, "-c", code], capture_output=True, text=True, env=env, check=True
    )
    return float(out.stdout.strip().splitlines()[-1])


def main() -> None:
    parser = argparse.ArgumentParser()
    parser.add_argument("--quick", action="store_true", help="smaller iteration counts")
    args = parser.parse_args()

    n_rk4 = 20_000 if args.quick else 100_000
    n_proj = 5_000 if args.quick else 20_000
    index = TrackIndex(load_bundled_track("oval"))

    rows = []
    pure_rk4 = bench_rk4(_pure, n_rk4)
    pure_proj = bench_projection(_pure, index, n_proj)
    rows.append(("pure", n_rk4 / pure_rk4, n_proj / pure_proj))
    if _core is not None:
        core_rk4 = bench_rk4(_core, n_rk4)
        core_proj = bench_projection(_core, index, n_proj)
        rows.append(("compiled", n_rk4 / core_rk4, n_proj / core_proj))

    print(f"{'backend':<10} {'rk4 steps/s':>14} {'projections/s':>16}")
    for name, rk4_rate, proj_rate in rows:
        print(f"{name:<10} {rk4_rate:>14,.0f} {proj_rate:>16,.0f}")
    if _core is not None:
        print(
            f"\nspeedup: rk4 x{pure_rk4 / core_rk4:.1f}, "
            f"projection x{pure_proj / core_proj:.1f}"
        )

    print("\nclosed-loop MPC lap on the oval (subprocess per backend):")
    for backend in (["pure", "compiled"] if _core is not None else ["pure"]):
        seconds = bench_mpc_episode(backend)
        print(f"  {backend:<10} {seconds:6.2f} s")


if __name__ == "__main__":
    main()
