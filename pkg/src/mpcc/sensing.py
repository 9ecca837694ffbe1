"""Public Gaussian sensing matrix and the linear measurement model.

The matrix is never shipped; it is rebuilt from ``(seed, m, n)`` with numpy's
PCG64 bit generator: ``Generator(PCG64(seed)).standard_normal((m, n))``,
filled row-major, scaled by ``1 / sqrt(m)``.
"""

from dataclasses import dataclass

import numpy as np

from .errors import BadDimensions, DimensionMismatch


@dataclass(frozen=True, eq=False)
class SensingMatrix:
    data: np.ndarray
    seed: int | None = None

    def __post_init__(self):
        data = np.array(self.data, dtype=np.float64, order="C")
        if data.ndim != 2:
            raise BadDimensions("sensing matrix must be 2-D")
        data.setflags(write=False)
        object.__setattr__(self, "data", data)

    @property
    def m(self):
        return self.data.shape[0]

    @property
    def n(self):
        return self.data.shape[1]

    @classmethod
    def from_array(cls, data):
        return cls(data, seed=None)


def gen_sensing_matrix(seed, m, n):
    """Reproducible ``m x n`` Gaussian matrix with entry variance ``1/m``.

    ``m == n`` is accepted for the uncompressed reference case.
    """
    if not (1 <= m <= n):
        raise BadDimensions(f"need 1 <= m <= n, got m={m}, n={n}")
    if not 0 <= seed < 1 << 64:
        raise BadDimensions("seed must fit in an unsigned 64-bit integer")
    rng = np.random.Generator(np.random.PCG64(seed))
    data = rng.standard_normal((m, n)) / np.sqrt(m)
    return SensingMatrix(data, seed=int(seed))


def measure(phi, z):
    z = np.asarray(z, dtype=np.float64)
    if z.shape[0] != phi.n:
        raise DimensionMismatch(f"expected length {phi.n}, got {z.shape[0]}")
    return phi.data @ z
