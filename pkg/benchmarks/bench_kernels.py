"""Compare the compiled and NumPy residual-region kernels.

    python3 benchmarks/bench_kernels.py [--repeat 5] [--rays 1024] [--radii 128]

Reports per-call kernel time for each back end, the dense brute-force
reference, and one end-to-end SMECN run over a 200-node scenario.
"""

from __future__ import annotations

import argparse
import time
import timeit

import numpy as np

from minpower_net import _pykernels, kernels
from minpower_net.protocols import run_protocol
from minpower_net.regions import SamplingSpec, _angles, _radii
from minpower_net.simulator import ScenarioConfig, place_nodes

try:
    from minpower_net import _ckernels
except ImportError:
    _ckernels = None


def kernel_case(rays: int, radii: int, count: int, seed: int = 0):
    rng = np.random.default_rng(seed)
    obs = rng.uniform(-400.0, 400.0, size=(count, 2))
    cos_t, sin_t = _angles(rays)
    rad = _radii(radii, 500.0)
    return obs, cos_t, sin_t, rad


def time_kernel(fn, case, repeat: int) -> float:
    obs, cos_t, sin_t, rad = case
    template = np.full(len(cos_t), len(rad), dtype=np.int32)

    def once():
        first = template.copy()
        for wx, wy in obs:
            fn(first, 0.0, 0.0, float(wx), float(wy), cos_t, sin_t, rad, 1.0, 4.0, 0.0)

    return min(timeit.repeat(once, number=1, repeat=repeat)) / len(obs)


def time_protocol(fn, repeat: int) -> float:
    cfg = ScenarioConfig(seed=0)
    recs, _ = place_nodes(cfg, with_sink=False)
    saved = kernels.apply_obstructor
    kernels.apply_obstructor = fn
    try:
        best = float("inf")
        for _ in range(repeat):
            t0 = time.perf_counter()
            run_protocol(recs, cfg.model, spec=SamplingSpec())
            best = min(best, time.perf_counter() - t0)
        return best
    finally:
        kernels.apply_obstructor = saved


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--rays", type=int, default=1024)
    ap.add_argument("--radii", type=int, default=128)
    ap.add_argument("--obstructors", type=int, default=40)
    args = ap.parse_args()

    case = kernel_case(args.rays, args.radii, args.obstructors)
    backends = {"python": _pykernels.apply_obstructor}
    if _ckernels is not None:
        backends["cython"] = _ckernels.apply_obstructor
    else:
        print("compiled extension not built; timing the NumPy kernel only")

    # both back ends must agree before their timings mean anything
    results = []
    for fn in backends.values():
        first = np.full(args.rays, args.radii + 1, dtype=np.int32)
        for wx, wy in case[0]:
            fn(first, 0.0, 0.0, float(wx), float(wy), *case[1:], 1.0, 4.0, 0.0)
        results.append(first)
    assert all(np.array_equal(results[0], r) for r in results[1:]), "back ends disagree"

    print(f"grid {args.rays}x{args.radii}, {args.obstructors} obstructors, active back end: {kernels.BACKEND}")
    per_call = {name: time_kernel(fn, case, args.repeat) for name, fn in backends.items()}
    for name, t in per_call.items():
        print(f"  apply_obstructor[{name:>6}]  {t * 1e6:10.1f} us/call")
    obs, cos_t, sin_t, rad = case
    t0 = time.perf_counter()
    _pykernels.dense_first_excl(0.0, 0.0, obs, cos_t, sin_t, rad, 1.0, 4.0, 0.0)
    print(f"  dense reference           {(time.perf_counter() - t0) / len(obs) * 1e6:10.1f} us/obstructor")
    if "cython" in per_call:
        print(f"  kernel speedup            {per_call['python'] / per_call['cython']:10.1f}x")

    print("SMECN over a 200-node scenario (1500 x 1500 m, 500 m range):")
    proto = {name: time_protocol(fn, max(1, args.repeat // 2)) for name, fn in backends.items()}
    for name, t in proto.items():
        print(f"  {name:>6}  {t:7.2f} s")
    if "cython" in proto:
        print(f"  end-to-end speedup {proto['python'] / proto['cython']:.1f}x")


if __name__ == "__main__":
    main()
