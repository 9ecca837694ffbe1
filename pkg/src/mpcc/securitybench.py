"""Desk-scale checks of the counting and secrecy arguments.

Two regimes are kept apart, as in the analysis they mirror: multiplicative
masking over a prime field (``c = r * m mod p`` with ``r`` uniform on the
nonzero elements) for the secrecy argument, and signed real mask levels
``{±1, ..., ±t}`` for the brute-force counts. These functions verify the
counting claims only; whether ``2**390`` work is "infeasible" is an
interpretation, not something checked here.
"""

import math
from dataclasses import dataclass
from fractions import Fraction

from .errors import BadArgs, NotPrime


def is_prime(p):
    if p < 2:
        return False
    return all(p % d for d in range(2, math.isqrt(p) + 1))


def _require_prime(p):
    if not is_prime(p):
        raise NotPrime(f"{p} is not prime")


def secrecy_table(p=5):
    """``table[r-1][m-1] = r * m mod p`` for nonzero key ``r`` and message ``m``."""
    _require_prime(p)
    if p < 3:
        raise NotPrime("secrecy table needs p >= 3")
    return [[(r * m) % p for m in range(1, p)] for r in range(1, p)]


@dataclass(frozen=True)
class SecrecyReport:
    p: int
    perfect: bool
    # distribution[m][c] = Pr[Enc(m, r) = c] over uniform nonzero r
    distribution: dict


def verify_perfect_secrecy(p=5):
    """Enumerate every (message, key) pair over the nonzero elements of F_p.

    Perfect secrecy holds iff each nonzero message maps every nonzero
    ciphertext from exactly one key, i.e. ``Pr[c | m] = 1/(p-1)`` for all m.
    """
    _require_prime(p)
    keys = range(1, p)
    dist = {}
    perfect = True
    for m in range(1, p):
        counts = {c: 0 for c in range(1, p)}
        for r in keys:
            counts[(r * m) % p] += 1
        dist[m] = {c: Fraction(k, p - 1) for c, k in counts.items()}
        perfect &= all(k == 1 for k in counts.values())
    return SecrecyReport(p, perfect, dist)


@dataclass(frozen=True)
class BruteForceCounts:
    n: int
    k: int
    t: int
    index_count: int
    lower_bound: int
    cloud_count_log2: float


def brute_force_counts(n, k, t=16):
    """Work needed to guess plaintext indices (and, at the cloud, mask values).

    ``index_count = n!/(n-k)!`` ordered placements of the ``k`` nonzero
    values, bounded below by ``(n-k+1)**k``. The cloud additionally has to
    guess one of ``2t`` signed levels per nonzero, giving
    ``log2((2t)**k * n**k)``.
    """
    if n < 1 or k < 0 or k > n or t < 1:
        raise BadArgs(f"need 0 <= k <= n, n >= 1, t >= 1 (got n={n}, k={k}, t={t})")
    index_count = math.perm(n, k)
    lower_bound = (n - k + 1) ** k
    cloud_log2 = k * (math.log2(2 * t) + math.log2(n))
    return BruteForceCounts(n, k, t, index_count, lower_bound, cloud_log2)


def format_table(p=5):
    rows = secrecy_table(p)
    width = len(str(p - 1))
    head = "r\\m".ljust(4) + " ".join(str(m).rjust(width) for m in range(1, p))
    lines = [head]
    for r, row in enumerate(rows, start=1):
        lines.append(str(r).ljust(4) + " ".join(str(c).rjust(width) for c in row))
    return "\n".join(lines)
