"""Time the compiled kernels against the pure-Python fallback.

    python3 benchmarks/bench_backends.py [--N 20000] [--repeat 3]

Both backends see the same inputs; the script also checks that the
collision outputs agree bit for bit.
"""
import argparse
import timeit

import numpy as np

from rrmaxwell import _pycore

try:
    from rrmaxwell import _core
except ImportError:  # no compiled extension: nothing to compare
    _core = None


def inputs(N, seed=0):
    rng = np.random.default_rng(seed)
    K = N // 2
    first = rng.integers(0, N, K)
    second = rng.integers(0, N - 1, K)
    second += second >= first
    return {
        "vel": rng.normal(size=(N, 3)),
        "wealth": rng.exponential(size=N),
        "first": first,
        "second": second,
        "cos_theta": rng.uniform(-1, 1, K),
        "phi": rng.uniform(0, 2 * np.pi, K),
        "etilde": 0.9 + rng.choice([-0.9, 0.2], K),
        "eta": rng.choice([-0.1, 0.1], K),
        "eta_star": rng.choice([-0.1, 0.1], K),
        "proj": rng.normal(size=N),
        "k": np.geomspace(1e-3, 20, 200),
    }


def cases(mod, d):
    return {
        "collide3d_batch": lambda: mod.collide3d_batch(d["vel"].copy(), d["first"], d["second"],
                                                      d["cos_theta"], d["phi"], d["etilde"]),
        "collide1d_batch": lambda: mod.collide1d_batch(d["wealth"].copy(), d["first"], d["second"],
                                                      d["eta"], d["eta_star"], 0.7, 0.3),
        "empirical_cf": lambda: mod.empirical_cf(d["proj"], d["k"]),
        "radial_cf_defect": lambda: mod.radial_cf_defect(np.abs(d["proj"]), d["k"]),
    }


def check_bitwise(d):
    a, b = d["vel"].copy(), d["vel"].copy()
    _core.collide3d_batch(a, d["first"], d["second"], d["cos_theta"], d["phi"], d["etilde"])
    _pycore.collide3d_batch(b, d["first"], d["second"], d["cos_theta"], d["phi"], d["etilde"])
    return bool(np.array_equal(a, b))


def main():
    p = argparse.ArgumentParser()
    p.add_argument("--N", type=int, default=20000)
    p.add_argument("--repeat", type=int, default=3)
    args = p.parse_args()
    d = inputs(args.N)
    mods = {"python": _pycore}
    if _core is not None:
        mods["cython"] = _core
    times = {}
    for name, mod in mods.items():
        for case, fn in cases(mod, d).items():
            times[(case, name)] = min(timeit.repeat(fn, number=1, repeat=args.repeat))
    print(f"N={args.N}, collisions per batch={args.N // 2}")
    print(f"{'kernel':<18}{'python [s]':>12}{'cython [s]':>12}{'speedup':>10}")
    for case in cases(_pycore, d):
        tp = times[(case, "python")]
        tc = times.get((case, "cython"))
        if tc is None:
            print(f"{case:<18}{tp:>12.4f}{'-':>12}{'-':>10}")
        else:
            print(f"{case:<18}{tp:>12.4f}{tc:>12.4f}{tp / tc:>9.1f}x")
    if _core is not None:
        print("collide3d bitwise identical:", check_bitwise(d))


if __name__ == "__main__":
    main()
