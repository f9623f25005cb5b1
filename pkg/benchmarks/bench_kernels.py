"""Time the compiled kernels against the numpy fallback.

    python benchmarks/bench_kernels.py [--repeat 5] [--size 100000]

Prints one row per kernel with the best time of each backend and the speedup.
"""

import argparse
import timeit

import numpy as np

from locomanip import _kernels
from locomanip.robot import load_robot_model


def workloads(size: int, rng: np.random.Generator) -> dict:
    model = load_robot_model()
    chain = model.chains["right_ee"]
    n_fk = max(1, size // 50)
    cols = [
        rng.uniform(0, 2, size),
        rng.uniform(0, 2, size),
        rng.uniform(-1, 1, size),
        rng.uniform(-1, 1, size),
        rng.uniform(0, 0.1, size),
        rng.uniform(0, 0.1, size),
        rng.normal(size=size),
        rng.uniform(0, 3, size),
    ]
    normals = rng.normal(size=(size, 3))
    normals /= np.linalg.norm(normals, axis=1, keepdims=True)
    return {
        "total_reward_batch": (rng.normal(size=6), 0.04, *cols),
        "voxel_indices": (rng.uniform(-3, 3, (size, 3)), np.array([0.1, -0.2, 0.0]), 0.05),
        "chain_fk_batch": (
            rng.uniform(model.lower, model.upper, (n_fk, len(model.joint_names))),
            chain.translations,
            chain.rotations,
            chain.joints,
            chain.types,
            chain.axes,
            chain.scales,
        ),
        "cone_margins": (rng.normal(size=(size, 3)), normals, rng.uniform(0.1, 1.0, size)),
        "trapezoid_defects": (rng.normal(size=(size // 10 + 1, 44)), rng.normal(size=(size // 10, 44)), rng.normal(size=(size // 10, 44)), 0.05),
    }


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeat", type=int, default=5)
    parser.add_argument("--size", type=int, default=100_000)
    args = parser.parse_args()

    impls = _kernels.backends()
    loads = workloads(args.size, np.random.default_rng(0))
    print(f"selected backend: {_kernels.BACKEND}; size {args.size}, best of {args.repeat}")
    print(f"{'kernel':<20} {'python [ms]':>12} {'cython [ms]':>12} {'speedup':>8}")
    for name, call_args in loads.items():
        times = {}
        for backend, mod in impls.items():
            fn = getattr(mod, name)
            times[backend] = min(timeit.repeat(lambda: fn(*call_args), number=1, repeat=args.repeat)) * 1e3
        cy = times.get("cython")
        cy_text = f"{cy:12.3f}" if cy is not None else f"{'n/a':>12}"
        ratio = f"{times['python'] / cy:8.1f}x" if cy else f"{'':>8}"
        print(f"{name:<20} {times['python']:12.3f} {cy_text} {ratio}")


if __name__ == "__main__":
    main()
