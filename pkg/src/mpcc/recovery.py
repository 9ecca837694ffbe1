"""Sparse recovery for the cloud's decompression step.

:func:`solve_bp` solves basis pursuit,

    min ||z||_1  subject to  ||Phi z - y||_2 <= epsilon,

with over-relaxed ADMM. The z-update is soft thresholding; the x-update is
the exact Euclidean projection onto the constraint set, computed in the
singular basis of ``Phi`` (an affine projection when ``epsilon == 0``, a
one-dimensional secular equation otherwise). Each column of ``y`` is scaled
by ``||Phi.T y||_inf`` before iterating so that ``rho`` is scale-free.

After ADMM stops (tolerances met or ``max_iters`` reached), a
least-squares refit on the detected support ("debias") is tried first, then
the sparse iterate, then the projected iterate; the first candidate meeting
``epsilon + FEAS_SLACK`` is returned. ``tolerance_met`` on the result says
whether the ADMM stopping rule fired before the budget ran out.

:func:`solve_omp` and :func:`l0_oracle` are independent reference solvers
used to check the l1 path.
"""

import hashlib
import itertools
import logging
import weakref
from dataclasses import astuple, dataclass, replace

import numpy as np

from . import kernels
from .errors import BadArgs, DimensionMismatch, NotConverged, RankDeficient, TooLarge

logger = logging.getLogger(__name__)

FEAS_SLACK = 1e-8
# stopping rule evaluated every CHECK_EVERY iterations
CHECK_EVERY = 5


@dataclass(frozen=True)
class SolverOptions:
    epsilon: float = 0.0
    max_iters: int = 4000
    rho: float = 1.0
    abs_tol: float = 1e-7
    rel_tol: float = 1e-5
    epsilon_rel: float = 0.0
    alpha: float = 1.6
    debias: bool = True
    support_threshold: float = 1e-4

    def __post_init__(self):
        if self.epsilon < 0 or self.epsilon_rel < 0:
            raise BadArgs("epsilon must be >= 0")
        if self.max_iters < 1:
            raise BadArgs("max_iters must be >= 1")
        if self.rho <= 0 or not 0 < self.alpha < 2:
            raise BadArgs("rho must be > 0 and alpha in (0, 2)")

    def digest(self):
        """Stable short hash of every field, for cache keys."""
        return hashlib.sha256(repr(astuple(self)).encode()).hexdigest()[:16]

    def tolerance(self, y_norm):
        return self.epsilon + self.epsilon_rel * y_norm


# Suited to compressible (not exactly sparse) data such as KLT coefficients.
APPROX_SPARSE = SolverOptions(epsilon_rel=1e-6)


@dataclass
class RecoveryResult:
    z: np.ndarray
    iterations: int
    residual: float
    l1_norm: float
    converged: bool
    debiased: bool = False
    support_threshold: float = 1e-4
    tolerance_met: bool = True

    @property
    def support(self):
        peak = np.abs(self.z).max(initial=0.0)
        if peak == 0:
            return np.zeros(0, dtype=np.int64)
        return np.flatnonzero(np.abs(self.z) > self.support_threshold * peak)


class _Factor:
    """Thin SVD ``Phi = U diag(s) V.T`` reused across solves."""

    def __init__(self, data):
        u, s, vt = np.linalg.svd(data, full_matrices=False)
        if s[-1] <= s[0] * 1e-12:
            raise RankDeficient("sensing matrix does not have full row rank")
        self.u = u
        self.s = s
        self.s2 = s * s
        self.v = np.ascontiguousarray(vt.T)
        self.vt = np.ascontiguousarray(vt)


_factors = weakref.WeakKeyDictionary()


def _factor(phi):
    f = _factors.get(phi)
    if f is None:
        f = _Factor(phi.data)
        _factors[phi] = f
    return f


def _as_columns(phi, y):
    y = np.asarray(y, dtype=np.float64)
    single = y.ndim == 1
    if single:
        y = y[:, None]
    if y.ndim != 2 or y.shape[0] != phi.m:
        raise DimensionMismatch(f"expected {phi.m} measurements, got shape {y.shape}")
    return y, single


def _colnorm(a):
    return np.sqrt(np.einsum("ij,ij->j", a, a))


def _admm(f, yn, epsn, opts):
    """Run ADMM on scaled columns. Returns ``(z, x, iterations, stopped)``."""
    m, b = yn.shape
    n = f.v.shape[0]
    bcoef = f.u.T @ yn
    use_ball = bool(np.any(epsn > 0))
    kappa = 1.0 / opts.rho
    sqn = np.sqrt(n)

    z_out = np.zeros((n, b))
    x_out = np.zeros((n, b))
    iters = np.full(b, opts.max_iters, dtype=np.int64)
    stopped = np.zeros(b, dtype=bool)

    active = np.arange(b)
    z = np.zeros((n, b))
    u = np.zeros((n, b))
    x = np.zeros((n, b))
    bc = bcoef
    ep = epsn
    for it in range(1, opts.max_iters + 1):
        check = it % CHECK_EVERY == 0 or it == opts.max_iters
        v = z - u
        a = f.vt @ v
        if use_ball:
            g = f.s[:, None] * a - bc
            lam = kernels.ball_multipliers(g, f.s2, ep)
            delta = -(lam * f.s[:, None] * g) / (1.0 + lam * f.s2[:, None])
        else:
            delta = bc / f.s[:, None] - a
        x = v + f.v @ delta
        xh = opts.alpha * x + (1.0 - opts.alpha) * z if opts.alpha != 1.0 else x
        if check:
            z_old = z.copy()
        kernels.shrink_step(np.ascontiguousarray(xh), z, u, kappa)
        if not check:
            continue

        r_pri = _colnorm(x - z)
        r_dual = opts.rho * _colnorm(z - z_old)
        e_pri = sqn * opts.abs_tol + opts.rel_tol * np.maximum(_colnorm(x), _colnorm(z))
        e_dual = sqn * opts.abs_tol + opts.rel_tol * opts.rho * _colnorm(u)
        done = (r_pri <= e_pri) & (r_dual <= e_dual)
        if np.any(done):
            cols = active[done]
            z_out[:, cols] = z[:, done]
            x_out[:, cols] = x[:, done]
            iters[cols] = it
            stopped[cols] = True
            keep = ~done
            active = active[keep]
            if active.size == 0:
                break
            z = np.ascontiguousarray(z[:, keep])
            u = np.ascontiguousarray(u[:, keep])
            x = x[:, keep]
            bc = bc[:, keep]
            ep = ep[keep]
    if active.size:
        z_out[:, active] = z
        x_out[:, active] = x
    return z_out, x_out, iters, stopped


def _finish(phi, y, z, x, iters, stopped, tol, opts):
    """Pick the returned candidate for one column."""
    data = phi.data

    def resid(w):
        return float(np.linalg.norm(data @ w - y))

    limit = tol + FEAS_SLACK
    candidates = []
    if opts.debias:
        peak = np.abs(z).max(initial=0.0)
        if peak > 0:
            supp = np.flatnonzero(np.abs(z) > opts.support_threshold * peak)
            if 0 < supp.size <= phi.m:
                coef = np.linalg.lstsq(data[:, supp], y, rcond=None)[0]
                w = np.zeros_like(z)
                w[supp] = coef
                candidates.append((w, True))
    candidates.append((z, False))
    candidates.append((x, False))
    for w, debiased in candidates:
        r = resid(w)
        if r <= limit:
            return RecoveryResult(w, int(iters), r, float(np.abs(w).sum()), True,
                                  debiased, opts.support_threshold, bool(stopped))
    return RecoveryResult(x, int(iters), resid(x), float(np.abs(x).sum()), False,
                          False, opts.support_threshold, bool(stopped))


def solve_bp_many(phi, y, opts=None):
    """Basis pursuit on each column of ``y`` (shape ``m x b``).

    Never raises :class:`NotConverged`; check ``result.converged`` instead.
    """
    opts = opts or SolverOptions()
    y, _ = _as_columns(phi, y)
    b = y.shape[1]
    y_norm = np.linalg.norm(y, axis=0)
    tol = np.array([opts.tolerance(v) for v in y_norm])
    results = [None] * b

    if phi.m == phi.n:
        sol = np.linalg.solve(phi.data, y)
        for c in range(b):
            w = sol[:, c]
            r = float(np.linalg.norm(phi.data @ w - y[:, c]))
            results[c] = RecoveryResult(w, 0, r, float(np.abs(w).sum()),
                                        r <= tol[c] + FEAS_SLACK, False,
                                        opts.support_threshold)
        return results

    scale = np.abs(phi.data.T @ y).max(axis=0)
    trivial = (scale == 0) | (y_norm <= tol)
    for c in np.flatnonzero(trivial):
        results[c] = RecoveryResult(np.zeros(phi.n), 0, float(y_norm[c]), 0.0, True,
                                    False, opts.support_threshold)
    work = np.flatnonzero(~trivial)
    if work.size:
        f = _factor(phi)
        sc = scale[work]
        z, x, iters, stopped = _admm(f, y[:, work] / sc, tol[work] / sc, opts)
        for k, c in enumerate(work):
            results[c] = _finish(phi, y[:, c], z[:, k] * sc[k], x[:, k] * sc[k],
                                 iters[k], stopped[k], tol[c], opts)
    for c, res in enumerate(results):
        logger.debug("solve_bp column=%d iterations=%d residual=%.3e l1=%.6g "
                     "converged=%s tolerance_met=%s debiased=%s", c, res.iterations,
                     res.residual, res.l1_norm, res.converged, res.tolerance_met,
                     res.debiased)
    return results


def solve_bp(phi, y, opts=None):
    """Basis pursuit for a single measurement vector.

    Raises :class:`NotConverged` (carrying the partial result) when no
    candidate meets the residual bound ``epsilon + FEAS_SLACK``.
    """
    y = np.asarray(y, dtype=np.float64)
    if y.ndim != 1:
        raise DimensionMismatch("solve_bp takes a single measurement vector")
    (res,) = solve_bp_many(phi, y, opts)
    if not res.converged:
        raise NotConverged(
            f"no feasible solution after {res.iterations} iterations "
            f"(residual {res.residual:.3e})", res)
    return res


def solve_omp(phi, y, k, tol=1e-12):
    """Orthogonal matching pursuit with a least-squares refit every step.

    Stops after ``k`` selections, or earlier once the residual falls below
    ``tol * max(1, ||y||)``.
    """
    y, single = _as_columns(phi, y)
    if not single:
        raise DimensionMismatch("solve_omp takes a single measurement vector")
    y = y[:, 0]
    if not 1 <= k <= phi.m:
        raise BadArgs(f"need 1 <= k <= m, got k={k}")
    data = phi.data
    norms = np.linalg.norm(data, axis=0)
    stop = tol * max(1.0, float(np.linalg.norm(y)))
    support = []
    coef = np.zeros(0)
    r = y.copy()
    it = 0
    while it < k and np.linalg.norm(r) > stop:
        corr = np.abs(data.T @ r) / norms
        corr[support] = -1.0
        support.append(int(np.argmax(corr)))
        sub = data[:, support]
        coef, _, rank, _ = np.linalg.lstsq(sub, y, rcond=None)
        if rank < len(support):
            raise RankDeficient(f"selected columns {support} are linearly dependent")
        r = y - sub @ coef
        it += 1
    z = np.zeros(phi.n)
    z[support] = coef
    res = float(np.linalg.norm(data @ z - y))
    return RecoveryResult(z, it, res, float(np.abs(z).sum()), True)


@dataclass(frozen=True)
class OracleResult:
    z: np.ndarray
    support: tuple
    residual: float
    feasible: bool


def l0_oracle(phi, y, k_max, tol=1e-9):
    """Exhaustive sparsest solution over supports of size ``<= k_max``.

    A support is feasible when its least-squares residual is at most
    ``tol * max(1, ||y||)``. The smallest feasible size wins; within it the
    smallest l2 norm, then the lexicographically first support. When nothing
    is feasible the lowest-residual candidate is returned with
    ``feasible=False``.
    """
    y, single = _as_columns(phi, y)
    if not single:
        raise DimensionMismatch("l0_oracle takes a single measurement vector")
    y = y[:, 0]
    n = phi.n
    if n > 16 or k_max > 3:
        raise TooLarge(f"exhaustive search limited to n <= 16, k_max <= 3 (got {n}, {k_max})")
    if k_max < 0:
        raise BadArgs("k_max must be >= 0")
    data = phi.data
    thresh = tol * max(1.0, float(np.linalg.norm(y)))
    best_any = None
    for size in range(k_max + 1):
        best = None
        for supp in itertools.combinations(range(n), size):
            if size:
                sub = data[:, supp]
                coef = np.linalg.lstsq(sub, y, rcond=None)[0]
                r = float(np.linalg.norm(sub @ coef - y))
            else:
                coef = np.zeros(0)
                r = float(np.linalg.norm(y))
            cand = (r, float(np.linalg.norm(coef)), supp, coef)
            if best_any is None or r < best_any[0]:
                best_any = cand
            if r <= thresh and (best is None or cand[1] < best[1]):
                best = cand
        if best is not None:
            return _oracle_result(n, best, True)
    return _oracle_result(n, best_any, False)


def _oracle_result(n, cand, feasible):
    r, _, supp, coef = cand
    z = np.zeros(n)
    z[list(supp)] = coef
    return OracleResult(z, tuple(supp), r, feasible)


def with_options(opts, **changes):
    return replace(opts or SolverOptions(), **changes)
