"""Compare the compiled kernels with the pure-Python fallback.

Usage::

    python benchmarks/bench_kernels.py [--repeat 5]

Prints the best-of-``repeat`` wall time per call for each kernel and the
speed-up of the compiled backend. Both backends are fed identical inputs
and their outputs are checked for agreement before timing.
"""

import argparse
import timeit

import numpy as np

from mpcc import _pykernels, kernels
from mpcc.recovery import SolverOptions, solve_bp_many
from mpcc.sensing import gen_sensing_matrix

try:
    from mpcc import _ckernels
except ImportError:
    _ckernels = None


def _cases():
    rng = np.random.default_rng(0)
    words = rng.integers(0, 2**32, 1040, dtype=np.uint64).astype(np.uint32)
    xh = rng.standard_normal((1024, 256))
    z = np.ascontiguousarray(rng.standard_normal((1024, 256)))
    u = np.ascontiguousarray(rng.standard_normal((1024, 256)))
    s2 = rng.uniform(0.3, 3.0, 205)
    g = rng.standard_normal((205, 256))
    eps = np.full(256, 1e-3)
    phi = gen_sensing_matrix(1, 205, 1024)
    ys = rng.standard_normal((205, 32))
    opts = SolverOptions(epsilon_rel=1e-6, max_iters=100)

    def solve(k):
        # route the solver's kernel calls through backend k
        saved = {n: getattr(kernels, n) for n in ("shrink_step", "ball_multipliers")}
        try:
            for n in saved:
                setattr(kernels, n, getattr(k, n))
            return solve_bp_many(phi, ys, opts)
        finally:
            for n, f in saved.items():
                setattr(kernels, n, f)

    return {
        "fisher_yates n=1024": lambda k: k.fisher_yates(words, 1024),
        "signed_levels n=1024": lambda k: k.signed_levels(words, 1024, 16),
        "shrink_step 1024x256": lambda k: k.shrink_step(xh, z, u, 0.5),
        "ball_multipliers 205x256": lambda k: k.ball_multipliers(g, s2, eps),
        "solve_bp_many 32 cols": solve,
    }


def _check(cases):
    for name in ("fisher_yates n=1024", "signed_levels n=1024"):
        a, b = cases[name](_pykernels), cases[name](_ckernels)
        assert np.array_equal(a[0], b[0]) and a[1] == b[1], name
    a = cases["ball_multipliers 205x256"](_pykernels)
    b = cases["ball_multipliers 205x256"](_ckernels)
    assert np.allclose(a, b, rtol=1e-10), "ball_multipliers"


def _best(fn, repeat):
    timer = timeit.Timer(fn)
    number, _ = timer.autorange()
    return min(timer.repeat(repeat, number)) / number


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args(argv)
    if _ckernels is None:
        print("compiled extension not built; run `python setup.py build_ext --inplace`")
    cases = _cases()
    if _ckernels is not None:
        _check(cases)
    print(f"{'kernel':28s} {'python':>12s} {'cython':>12s} {'speed-up':>9s}")
    for name, call in cases.items():
        t_py = _best(lambda: call(_pykernels), args.repeat)
        if _ckernels is None:
            print(f"{name:28s} {t_py * 1e3:10.3f}ms {'-':>12s} {'-':>9s}")
            continue
        t_c = _best(lambda: call(_ckernels), args.repeat)
        print(f"{name:28s} {t_py * 1e3:10.3f}ms {t_c * 1e3:10.3f}ms {t_py / t_c:8.1f}x")


if __name__ == "__main__":
    main()
