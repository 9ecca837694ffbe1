"""Independent reference implementations used only by the tests.

None of these import from ``mpcc``; they restate the algorithms from first
principles so a shared bug cannot make both sides agree.
"""

import struct

import numpy as np

_MASK32 = 0xFFFFFFFF


def _rotl(v, c):
    return ((v << c) & _MASK32) | (v >> (32 - c))


def _quarter(s, a, b, c, d):
    s[a] = (s[a] + s[b]) & _MASK32
    s[d] = _rotl(s[d] ^ s[a], 16)
    s[c] = (s[c] + s[d]) & _MASK32
    s[b] = _rotl(s[b] ^ s[c], 12)
    s[a] = (s[a] + s[b]) & _MASK32
    s[d] = _rotl(s[d] ^ s[a], 8)
    s[c] = (s[c] + s[d]) & _MASK32
    s[b] = _rotl(s[b] ^ s[c], 7)


def chacha20_block(key, counter, nonce12):
    """RFC 8439 block function, straight from the text."""
    state = ([0x61707865, 0x3320646E, 0x79622D32, 0x6B206574]
             + list(struct.unpack("<8I", key)) + [counter]
             + list(struct.unpack("<3I", nonce12)))
    w = state[:]
    for _ in range(10):
        _quarter(w, 0, 4, 8, 12)
        _quarter(w, 1, 5, 9, 13)
        _quarter(w, 2, 6, 10, 14)
        _quarter(w, 3, 7, 11, 15)
        _quarter(w, 0, 5, 10, 15)
        _quarter(w, 1, 6, 11, 12)
        _quarter(w, 2, 7, 8, 13)
        _quarter(w, 3, 4, 9, 14)
    return struct.pack("<16I", *[(a + b) & _MASK32 for a, b in zip(w, state)])


def keystream(key, block_index, nbytes):
    nonce = bytes(4) + block_index.to_bytes(8, "little")
    out = b""
    counter = 0
    while len(out) < nbytes:
        out += chacha20_block(key, counter, nonce)
        counter += 1
    return out[:nbytes]


def words(key, block_index, count):
    return list(struct.unpack(f"<{count}I", keystream(key, block_index, 4 * count)))


def uniform_below(source, bound):
    """Rejection-sampled uniform integer in ``[0, bound)`` from 32-bit words."""
    limit = (1 << 32) - ((1 << 32) % bound)
    while True:
        v = next(source)
        if v < limit:
            return v % bound


def fisher_yates(key, block_index, n):
    src = iter(words(key, block_index, 4 * n + 64))
    perm = list(range(n))
    for i in range(n - 1, 0, -1):
        j = uniform_below(src, i + 1)
        perm[i], perm[j] = perm[j], perm[i]
    return perm


def signed_mask(key, block_index, n, t):
    src = iter(words(key, block_index, 4 * n + 64))
    out = []
    for _ in range(n):
        u = uniform_below(src, 2 * t)
        mag = u // 2 + 1
        out.append(-mag if u % 2 else mag)
    return out


def basis_pursuit_lp(a, y):
    """min ||z||_1 s.t. A z = y as a linear program (z = p - q, p, q >= 0)."""
    from scipy.optimize import linprog

    m, n = a.shape
    res = linprog(np.ones(2 * n), A_eq=np.hstack([a, -a]), b_eq=y,
                  bounds=[(0, None)] * (2 * n), method="highs")
    assert res.status == 0, res.message
    return res.x[:n] - res.x[n:]
