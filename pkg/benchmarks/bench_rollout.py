"""Time the compiled and NumPy rollout kernels on the same ensembles.

    python benchmarks/bench_rollout.py [--rollouts N] [--horizon T] [--repeat K]
"""

import argparse
import time

import numpy as np

from bcgain import _backend
from bcgain.dynamics import GainSetting, PlantModel, discretize
from bcgain.montecarlo import EnsembleConfig, NoiseModel, simulate


def cases():
    yield "scalar CO", discretize(PlantModel.scalar(1.0, 0.02), GainSetting.scalar(50, 40)), \
        NoiseModel.gaussian([[1.0]])
    plant = PlantModel.diagonal([1.0, 0.8, 1.2], 0.02)
    yield "3-joint", discretize(plant, GainSetting([50, 80, 60], [40, 30, 20])), \
        NoiseModel.gaussian(np.eye(3))


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t0)
    return min(times), out


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--rollouts", type=int, default=50_000)
    ap.add_argument("--horizon", type=int, default=50)
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--width", type=int, default=1)
    args = ap.parse_args()
    cfg = EnsembleConfig(args.rollouts, args.horizon, seed=42, parallel_width=args.width)
    backends = ["numpy"] + (["compiled"] if _backend.compiled is not None else [])
    print(f"N={args.rollouts} T={args.horizon} width={args.width}")
    print(f"{'case':<10} {'backend':<9} {'seconds':>8} {'speedup':>8} {'max |diff|':>11}")
    for name, loop, noise in cases():
        ref_t, ref = best_of(lambda: simulate(loop, noise, cfg, backend="numpy"), args.repeat)
        for b in backends:
            t, ens = (ref_t, ref) if b == "numpy" else best_of(
                lambda: simulate(loop, noise, cfg, backend=b), args.repeat)
            diff = float(np.abs(ens.norms - ref.norms).max())
            print(f"{name:<10} {b:<9} {t:8.3f} {ref_t / t:8.2f} {diff:11.2e}")


if __name__ == "__main__":
    main()
