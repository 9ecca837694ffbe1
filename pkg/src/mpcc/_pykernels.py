"""Pure-Python/numpy implementations of the hot kernels.

Every function here has a twin with the same signature in ``_ckernels.pyx``.
The two must agree exactly for the integer kernels and the shrink step, and
to within rounding for :func:`ball_multipliers`.
"""

import numpy as np

BACKEND = "python"

_TWO32 = 1 << 32


def fisher_yates(words, n):
    """Shuffle ``range(n)`` using 32-bit words as the randomness source.

    Draws run from ``i = n-1`` down to ``1``; each index ``j`` is uniform on
    ``[0, i]`` via rejection (words at or above the largest multiple of
    ``i + 1`` below 2**32 are skipped).

    Returns ``(perm, used)``. ``used`` is the number of words consumed, or
    ``-1`` if ``words`` ran out before the shuffle finished.
    """
    perm = list(range(n))
    w = words.tolist()
    nw = len(w)
    pos = 0
    for i in range(n - 1, 0, -1):
        bound = i + 1
        limit = _TWO32 - (_TWO32 % bound)
        while True:
            if pos >= nw:
                return np.arange(n, dtype=np.int64), -1
            v = w[pos]
            pos += 1
            if v < limit:
                break
        j = v % bound
        perm[i], perm[j] = perm[j], perm[i]
    return np.asarray(perm, dtype=np.int64), pos


def signed_levels(words, n, t):
    """Draw ``n`` values uniform over ``{±1, ..., ±t}``.

    A uniform draw ``u`` on ``[0, 2t)`` maps to magnitude ``u // 2 + 1`` with
    a minus sign when ``u`` is odd. Returns ``(levels, used)`` like
    :func:`fisher_yates`.
    """
    bound = 2 * t
    limit = _TWO32 - (_TWO32 % bound)
    w = words.tolist()
    nw = len(w)
    out = [0.0] * n
    pos = 0
    for k in range(n):
        while True:
            if pos >= nw:
                return np.zeros(n), -1
            v = w[pos]
            pos += 1
            if v < limit:
                break
        u = v % bound
        mag = float((u >> 1) + 1)
        out[k] = -mag if u & 1 else mag
    return np.asarray(out, dtype=np.float64), pos


def shrink_step(xh, z, u, kappa):
    """In place: ``z = soft(xh + u, kappa)`` then ``u += xh - z``."""
    w = xh + u
    np.multiply(np.sign(w), np.maximum(np.abs(w) - kappa, 0.0), out=z)
    u += xh
    u -= z


def ball_multipliers(g, s2, eps, max_iter=100, tol=1e-13):
    """Per-column multiplier for projecting onto ``{x : ||Phi x - y|| <= eps}``.

    In singular coordinates the projected residual is ``g / (1 + lam * s2)``.
    For each column with ``||g|| > eps`` this finds ``lam >= 0`` making that
    norm equal ``eps``; other columns get ``lam = 0``. Newton is run on
    ``1/||res(lam)|| - 1/eps``, which is concave and increasing in ``lam`` so
    the iterates rise monotonically to the root.
    """
    g = np.asarray(g, dtype=np.float64)
    if g.ndim == 1:
        g = g[:, None]
    eps = np.broadcast_to(np.asarray(eps, dtype=np.float64), (g.shape[1],))
    lam = np.zeros(g.shape[1])
    g2 = g * g
    norm0 = np.sqrt(g2.sum(axis=0))
    active = np.flatnonzero(norm0 > eps)
    if active.size == 0:
        return lam
    g2a = g2[:, active]
    ea = eps[active]
    la = np.zeros(active.size)
    s2c = s2[:, None]
    for _ in range(max_iter):
        d = 1.0 + la * s2c
        q = (g2a / (d * d)).sum(axis=0)
        dq = (-2.0 * g2a * s2c / (d * d * d)).sum(axis=0)
        nr = np.sqrt(q)
        phi = 1.0 / nr - 1.0 / ea
        dphi = -0.5 * dq / (q * nr)
        step = -phi / dphi
        la = la + step
        if np.all(np.abs(step) <= tol * np.maximum(la, 1.0)):
            break
    lam[active] = la
    return lam
