"""Ciphertext record layout (all integers little-endian)::

    magic   4s   b"MPCC"
    version u8   1
    flags   u8   bit0 sensitive, bit1 transform-mode
    index   u64
    m       u32
    n       u32
    seed    u64  sensing-matrix seed
    payload m x float64
    crc32   u32  over every preceding byte
"""

import struct
import zlib
from dataclasses import dataclass

import numpy as np

from ..blocks import FLAG_SENSITIVE, FLAG_TRANSFORM, CipherBlock
from ..errors import CorruptRecord, DimensionMismatch

MAGIC = b"MPCC"
VERSION = 1
HEADER = struct.Struct("<4sBBQIIQ")
HEADER_SIZE = HEADER.size
CRC = struct.Struct("<I")


def record_size(m):
    return HEADER_SIZE + 8 * m + CRC.size


@dataclass(frozen=True)
class CiphertextRecord:
    index: int
    m: int
    n: int
    phi_seed: int
    payload: np.ndarray
    flags: int = 0

    def __post_init__(self):
        payload = np.asarray(self.payload, dtype=np.float64).reshape(-1)
        if payload.shape[0] != self.m:
            raise DimensionMismatch(f"payload has {payload.shape[0]} values, header says m={self.m}")
        object.__setattr__(self, "payload", payload)

    @property
    def sensitive(self):
        return bool(self.flags & FLAG_SENSITIVE)

    @property
    def transform_mode(self):
        return bool(self.flags & FLAG_TRANSFORM)

    @classmethod
    def from_cipher_block(cls, block, n, phi_seed):
        y = np.asarray(block.measurements, dtype=np.float64)
        return cls(block.index, y.shape[0], n, phi_seed, y, block.flags)

    def to_cipher_block(self):
        return CipherBlock(self.payload.copy(), self.index, self.sensitive,
                           self.transform_mode)

    def header_bytes(self):
        return HEADER.pack(MAGIC, VERSION, self.flags, self.index, self.m,
                           self.n, self.phi_seed)

    def to_bytes(self):
        body = self.header_bytes() + self.payload.astype("<f8").tobytes()
        return body + CRC.pack(zlib.crc32(body))

    @classmethod
    def from_bytes(cls, data):
        data = bytes(data)
        if len(data) < HEADER_SIZE + CRC.size:
            raise CorruptRecord("record shorter than its header")
        magic, version, flags, index, m, n, seed = HEADER.unpack_from(data)
        if magic != MAGIC:
            raise CorruptRecord(f"bad magic {magic!r}")
        if version != VERSION:
            raise CorruptRecord(f"unsupported record version {version}")
        if len(data) != record_size(m):
            raise CorruptRecord(f"record length {len(data)} != {record_size(m)} for m={m}")
        (crc,) = CRC.unpack_from(data, len(data) - CRC.size)
        if zlib.crc32(data[: -CRC.size]) != crc:
            raise CorruptRecord(f"CRC mismatch in record for index {index}")
        payload = np.frombuffer(data, dtype="<f8", count=m, offset=HEADER_SIZE).astype(np.float64)
        return cls(index, m, n, seed, payload, flags)
