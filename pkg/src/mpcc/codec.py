"""Block encryption at the sensor and the two consumer decryptions.

Canonical mode follows ``y = Phi (r * x[perm])``. Transform mode works on the
coefficients ``theta = Psi.T x``: sensitive blocks get mask and permutation,
other blocks get the mask only. The superuser undoes both layers; the
semi-authorized user, holding only ``k_r``, removes the mask and is left with
``x[perm]``.
"""

import enum
from dataclasses import dataclass

import numpy as np

from .blocks import CipherBlock, DecompressedBlock
from .errors import BadArgs, DimensionMismatch, MissingBasis
from .keyschedule import DEFAULT_LEVELS, gen_mask, gen_permutation, invert_permutation
from .sensing import measure
from .transform import analyze, synthesize

__all__ = [
    "BlockKind", "PlainBlock", "CipherBlock", "DecompressedBlock", "Stats",
    "enc_block", "dec_super", "dec_semi", "permuted_stats",
    "encrypt_vector", "instrumented_encode",
]


class BlockKind(enum.Enum):
    CANONICAL = "canonical-sparse"
    TRANSFORM = "transform-sparse"


@dataclass(frozen=True)
class PlainBlock:
    values: np.ndarray
    index: int
    kind: BlockKind = BlockKind.CANONICAL
    sensitive: bool = False

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        if values.ndim != 1 or values.size == 0:
            raise BadArgs("block values must be a non-empty vector")
        object.__setattr__(self, "values", values)
        if not 0 <= self.index < 1 << 64:
            raise BadArgs("block index must fit in an unsigned 64-bit integer")


def encrypt_vector(phi, v, perm=None, mask=None):
    """``Phi (mask * v[perm])`` with explicit key material.

    ``perm=None`` means the identity and ``mask=None`` all ones.
    """
    v = np.asarray(v, dtype=np.float64)
    if perm is not None:
        v = v[perm]
    if mask is not None:
        v = mask * v
    return measure(phi, v)


def _key_material(subkeys, index, n, t, permute):
    mask = gen_mask(subkeys.k_r, index, n, t)
    perm = gen_permutation(subkeys.k_p, index, n) if permute else None
    return perm, mask


def enc_block(subkeys, phi, block, basis=None, t=DEFAULT_LEVELS):
    n = block.values.shape[0]
    if n != phi.n:
        raise DimensionMismatch(f"block length {n} != sensing length {phi.n}")
    if block.kind is BlockKind.TRANSFORM:
        if basis is None:
            raise MissingBasis("transform-sparse block needs a basis")
        v = analyze(basis, block.values)
        permute = block.sensitive
    else:
        if basis is not None:
            raise BadArgs("canonical-sparse blocks take no basis")
        v = block.values
        permute = True
    perm, mask = _key_material(subkeys, block.index, n, t, permute)
    y = encrypt_vector(phi, v, perm, mask)
    return CipherBlock(
        measurements=y,
        index=block.index,
        sensitive=block.sensitive,
        transform_mode=block.kind is BlockKind.TRANSFORM,
    )


def _z(z):
    if isinstance(z, DecompressedBlock):
        return np.asarray(z.z, dtype=np.float64), z.index
    raise BadArgs("expected a DecompressedBlock")


def dec_super(subkeys, z, basis=None, was_sensitive=True, t=DEFAULT_LEVELS):
    """Exact plaintext from a decompressed block.

    In canonical mode (no basis) the permutation is always undone; in
    transform mode only when ``was_sensitive``.
    """
    vec, index = _z(z)
    n = vec.shape[0]
    if basis is not None and basis.n != n:
        raise DimensionMismatch(f"basis length {basis.n} != block length {n}")
    permute = basis is None or was_sensitive
    perm, mask = _key_material(subkeys, index, n, t, permute)
    v = vec / mask
    if perm is not None:
        v = v[invert_permutation(perm)]
    if basis is None:
        return PlainBlock(v, index, BlockKind.CANONICAL, sensitive=False)
    return PlainBlock(synthesize(basis, v), index, BlockKind.TRANSFORM,
                      sensitive=was_sensitive)


def dec_semi(k_r, z, basis=None, was_sensitive=True, t=DEFAULT_LEVELS):
    """Remove the mask only, leaving ``x[perm]`` (or its synthesis)."""
    vec, index = _z(z)
    n = vec.shape[0]
    if basis is not None and basis.n != n:
        raise DimensionMismatch(f"basis length {basis.n} != block length {n}")
    v = vec / gen_mask(k_r, index, n, t)
    if basis is None:
        return PlainBlock(v, index, BlockKind.CANONICAL, sensitive=False)
    return PlainBlock(synthesize(basis, v), index, BlockKind.TRANSFORM,
                      sensitive=was_sensitive)


@dataclass(frozen=True)
class Stats:
    mean: float
    variance: float
    counts: np.ndarray
    edges: np.ndarray


def permuted_stats(xp, bins=10, value_range=None):
    """Mean, population variance and histogram; all invariant to reordering."""
    values = xp.values if isinstance(xp, PlainBlock) else np.asarray(xp, dtype=np.float64)
    # sorted first: the float sums must not depend on input order
    ordered = np.sort(values)
    mean = float(np.sum(ordered) / ordered.size)
    variance = float(np.sum((ordered - mean) ** 2) / ordered.size)
    counts, edges = np.histogram(ordered, bins=bins, range=value_range)
    return Stats(mean, variance, counts, edges)


def instrumented_encode(phi, v, perm, mask):
    """Straight-line encoder that counts floating-point operations.

    Returns ``(y, flops)``; multiplications and additions each count one.
    Used to measure how the sensor's cost grows with ``m * n``.
    """
    data = phi.data.tolist()
    v = list(map(float, v))
    n = len(v)
    flops = 0
    w = [0.0] * n
    for k in range(n):
        w[k] = mask[k] * v[perm[k]]
        flops += 1
    y = []
    for row in data:
        acc = row[0] * w[0]
        flops += 1
        for k in range(1, n):
            acc += row[k] * w[k]
            flops += 2
        y.append(acc)
    return np.array(y), flops
