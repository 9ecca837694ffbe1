"""Orthonormal sparsifying bases (DCT-II and trained KLT).

Columns of ``OrthoBasis.matrix`` are the basis vectors, so coefficients are
``theta = Psi.T @ x`` and the signal is ``x = Psi @ theta``.
"""

import enum
import struct
import zlib
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import CorruptRecord, DegenerateCovariance, DimensionMismatch, BadArgs

KLT_JITTER = 1e-12


class BasisKind(enum.IntEnum):
    DCT = 0
    KLT = 1


@dataclass(frozen=True, eq=False)
class OrthoBasis:
    matrix: np.ndarray
    kind: BasisKind

    def __post_init__(self):
        mat = np.array(self.matrix, dtype=np.float64, order="C")
        if mat.ndim != 2 or mat.shape[0] != mat.shape[1]:
            raise DimensionMismatch("basis matrix must be square")
        mat.setflags(write=False)
        object.__setattr__(self, "matrix", mat)
        object.__setattr__(self, "kind", BasisKind(self.kind))

    @property
    def n(self):
        return self.matrix.shape[0]


def dct_basis(n):
    """Orthonormal DCT-II basis of length ``n``."""
    if n < 1:
        raise BadArgs("basis length must be >= 1")
    k = np.arange(n)[:, None]
    i = np.arange(n)[None, :]
    rows = np.cos(np.pi * (2 * i + 1) * k / (2 * n))
    rows[0] *= np.sqrt(1.0 / n)
    rows[1:] *= np.sqrt(2.0 / n)
    return OrthoBasis(rows.T, BasisKind.DCT)


def dct2_basis(side):
    """Separable 2-D DCT-II for row-major ``side x side`` blocks."""
    d = dct_basis(side).matrix
    return OrthoBasis(np.kron(d, d), BasisKind.DCT)


def klt_train(training_blocks):
    """Train a KLT basis from equal-length blocks.

    Columns are eigenvectors of the mean-removed sample covariance (plus a
    ``1e-12 I`` jitter so low-rank training sets still give a full basis),
    ordered by decreasing eigenvalue, each signed so its first nonzero entry
    is positive.
    """
    data = np.asarray(training_blocks, dtype=np.float64)
    if data.ndim != 2 or data.shape[0] < 2:
        raise BadArgs("need at least two training blocks of equal length")
    centered = data - data.mean(axis=0)
    cov = centered.T @ centered / (data.shape[0] - 1)
    if not np.any(cov):
        raise DegenerateCovariance("training blocks have zero covariance")
    cov = 0.5 * (cov + cov.T) + KLT_JITTER * np.eye(cov.shape[0])
    vals, vecs = np.linalg.eigh(cov)
    order = np.argsort(vals, kind="stable")[::-1]
    vecs = vecs[:, order]
    tol = 1e-12 * np.abs(vecs).max(axis=0)
    first = np.argmax(np.abs(vecs) > tol, axis=0)
    signs = np.sign(vecs[first, np.arange(vecs.shape[1])])
    signs[signs == 0] = 1.0
    return OrthoBasis(vecs * signs, BasisKind.KLT)


def _check(basis, v):
    v = np.asarray(v, dtype=np.float64)
    if v.shape[0] != basis.n:
        raise DimensionMismatch(f"expected length {basis.n}, got {v.shape[0]}")
    return v


def analyze(basis, x):
    return basis.matrix.T @ _check(basis, x)


def synthesize(basis, theta):
    return basis.matrix @ _check(basis, theta)


_HEADER = struct.Struct("<BI")


def basis_to_bytes(basis):
    body = _HEADER.pack(int(basis.kind), basis.n)
    body += np.asfortranarray(basis.matrix).astype("<f8").tobytes(order="F")
    return body + struct.pack("<I", zlib.crc32(body))


def basis_from_bytes(data):
    if len(data) < _HEADER.size + 4:
        raise CorruptRecord("basis file too short")
    kind, n = _HEADER.unpack_from(data)
    expected = _HEADER.size + 8 * n * n + 4
    if len(data) != expected:
        raise CorruptRecord(f"basis file length {len(data)} != {expected}")
    (crc,) = struct.unpack_from("<I", data, expected - 4)
    if zlib.crc32(data[: expected - 4]) != crc:
        raise CorruptRecord("basis file CRC mismatch")
    try:
        kind = BasisKind(kind)
    except ValueError:
        raise CorruptRecord(f"unknown basis kind {kind}") from None
    mat = np.frombuffer(data, dtype="<f8", count=n * n, offset=_HEADER.size)
    return OrthoBasis(mat.reshape((n, n), order="F"), kind)


def save_basis(basis, path):
    Path(path).write_bytes(basis_to_bytes(basis))


def load_basis(path):
    return basis_from_bytes(Path(path).read_bytes())
