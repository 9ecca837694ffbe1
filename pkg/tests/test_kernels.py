"""The compiled and pure-Python kernels must be interchangeable."""

import os
import subprocess
import sys

import numpy as np
import pytest

from mpcc import _pykernels, kernels

try:
    from mpcc import _ckernels
except ImportError:
    _ckernels = None

needs_c = pytest.mark.skipif(_ckernels is None, reason="compiled extension not built")


def _words(seed, count):
    return np.random.default_rng(seed).integers(0, 2**32, count, dtype=np.uint64).astype(np.uint32)


@needs_c
@pytest.mark.parametrize("n", [1, 2, 5, 64, 1000])
def test_fisher_yates_backends_agree(n):
    w = _words(n, n + 16)
    p_py, used_py = _pykernels.fisher_yates(w, n)
    p_c, used_c = _ckernels.fisher_yates(w, n)
    assert used_py == used_c
    assert np.array_equal(p_py, p_c)


@needs_c
@pytest.mark.parametrize("t", [1, 5, 16, 1000])
def test_signed_levels_backends_agree(t):
    w = _words(t, 600)
    a, ua = _pykernels.signed_levels(w, 500, t)
    b, ub = _ckernels.signed_levels(w, 500, t)
    assert ua == ub
    assert np.array_equal(a, b)


def test_shortfall_reported():
    w = np.full(3, 2**32 - 1, dtype=np.uint32)  # always rejected for bound 3
    assert _pykernels.fisher_yates(w, 3)[1] == -1
    assert _pykernels.signed_levels(w, 2, 3)[1] == -1
    if _ckernels is not None:
        assert _ckernels.fisher_yates(w, 3)[1] == -1
        assert _ckernels.signed_levels(w, 2, 3)[1] == -1


@needs_c
def test_shrink_step_backends_agree(rng):
    xh = rng.standard_normal((40, 7))
    z0 = rng.standard_normal((40, 7))
    u0 = rng.standard_normal((40, 7))
    z1, u1 = z0.copy(), u0.copy()
    z2, u2 = z0.copy(), u0.copy()
    _pykernels.shrink_step(xh, z1, u1, 0.3)
    _ckernels.shrink_step(xh, z2, u2, 0.3)
    assert np.array_equal(z1, z2)
    assert np.allclose(u1, u2, rtol=0, atol=1e-15)


def test_shrink_step_is_soft_threshold(rng):
    xh = rng.standard_normal((10, 3))
    z = np.zeros((10, 3))
    u = np.zeros((10, 3))
    kernels.shrink_step(xh, z, u, 0.5)
    expected = np.sign(xh) * np.maximum(np.abs(xh) - 0.5, 0)
    assert np.allclose(z, expected)
    assert np.allclose(u, xh - expected)


@pytest.mark.parametrize("mod", ["py", "c"])
def test_ball_multipliers_hit_the_radius(rng, mod):
    k = _pykernels if mod == "py" else _ckernels
    if k is None:
        pytest.skip("compiled extension not built")
    s2 = rng.uniform(0.2, 4.0, 12)
    g = rng.standard_normal((12, 6)) * 3
    eps = np.array([0.1, 0.5, 1.0, 2.0, 50.0, 1e-6])
    lam = k.ball_multipliers(g, s2, eps)
    res = np.linalg.norm(g / (1 + lam * s2[:, None]), axis=0)
    inside = np.linalg.norm(g, axis=0) <= eps
    assert np.all(lam[inside] == 0)
    assert np.allclose(res[~inside], eps[~inside], rtol=1e-9)


@needs_c
def test_ball_multipliers_backends_agree(rng):
    s2 = rng.uniform(0.5, 2.0, 20)
    g = rng.standard_normal((20, 30))
    eps = rng.uniform(0.01, 1.0, 30)
    a = _pykernels.ball_multipliers(g, s2, eps)
    b = _ckernels.ball_multipliers(g, s2, eps)
    assert np.allclose(a, b, rtol=1e-10, atol=1e-14)


def test_env_var_forces_fallback():
    code = "from mpcc import kernels; print(kernels.BACKEND)"
    env = dict(os.environ, MPCC_PURE_PYTHON="1")
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True,
                         text=True, check=True)
    assert out.stdout.strip() == "python"


def test_pipeline_identical_under_both_backends():
    code = ("import hashlib\n"
            "from mpcc.keyschedule import gen_permutation, gen_mask\n"
            "k = bytes(range(32))\n"
            "h = hashlib.sha256(gen_permutation(k, 3, 3000).tobytes())\n"
            "h.update(gen_mask(k, 3, 3000).tobytes())\n"
            "print(h.hexdigest())\n")
    outs = set()
    for flag in ("0", "1"):
        env = dict(os.environ, MPCC_PURE_PYTHON=flag)
        outs.add(subprocess.run([sys.executable, "-c", code], env=env, capture_output=True,
                                text=True, check=True).stdout)
    assert len(outs) == 1

