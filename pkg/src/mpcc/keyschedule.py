"""Class keys and per-block permutation/mask generation.

The master secret is split with HMAC-SHA256 into the statistical key
``k_r`` (drives the mask) and the permutation key ``k_p``. Each key is then
expanded per block by ChaCha20, with the block index in the nonce, into the
words consumed by the Fisher-Yates shuffle and the signed-level sampler.
"""

import hashlib
import hmac
import logging
import os
import secrets
import stat
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from cryptography.hazmat.primitives.ciphers import Cipher, algorithms

from . import kernels
from .errors import BadArgs

logger = logging.getLogger(__name__)

KEY_BYTES = 32
DEFAULT_LEVELS = 16
MASK_LABEL = b"mask"
PERM_LABEL = b"perm"
KEY_ENV_VAR = "MPCC_MASTER_KEY"

_CHACHA_BLOCK = 64


def _check_key(key, what="key"):
    if not isinstance(key, (bytes, bytearray)) or len(key) != KEY_BYTES:
        raise BadArgs(f"{what} must be {KEY_BYTES} bytes")
    return bytes(key)


@dataclass(frozen=True, repr=False)
class MasterKey:
    secret: bytes

    def __post_init__(self):
        object.__setattr__(self, "secret", _check_key(self.secret, "master secret"))

    def __repr__(self):
        return "MasterKey(<redacted>)"

    @classmethod
    def generate(cls):
        return cls(secrets.token_bytes(KEY_BYTES))

    @classmethod
    def from_hex(cls, text):
        text = text.strip()
        if len(text) != 2 * KEY_BYTES:
            raise BadArgs(f"master key must be {2 * KEY_BYTES} hex characters")
        try:
            return cls(bytes.fromhex(text))
        except ValueError as exc:
            raise BadArgs(f"master key is not valid hex: {exc}") from None

    def to_hex(self):
        return self.secret.hex()

    @classmethod
    def load(cls, path):
        """Read a 64-hex-character key file, warning if others can read it."""
        path = Path(path)
        mode = path.stat().st_mode
        if mode & (stat.S_IROTH | stat.S_IWOTH):
            logger.warning("key file %s is accessible by other users (mode %o)",
                           path, stat.S_IMODE(mode))
        return cls.from_hex(path.read_text())

    @classmethod
    def from_env(cls, var=KEY_ENV_VAR):
        value = os.environ.get(var)
        if value is None:
            raise BadArgs(f"environment variable {var} is not set")
        return cls.from_hex(value)

    def save(self, path):
        path = Path(path)
        fd = os.open(path, os.O_WRONLY | os.O_CREAT | os.O_TRUNC, 0o600)
        with os.fdopen(fd, "w") as fh:
            fh.write(self.to_hex() + "\n")


@dataclass(frozen=True, repr=False)
class SubKeys:
    k_r: bytes
    k_p: bytes

    def __repr__(self):
        return "SubKeys(<redacted>)"


def derive_subkeys(master):
    """Split the master secret into ``(k_r, k_p)`` by domain-separated HMAC."""
    secret = master.secret if isinstance(master, MasterKey) else _check_key(master)
    k_r = hmac.new(secret, MASK_LABEL, hashlib.sha256).digest()
    k_p = hmac.new(secret, PERM_LABEL, hashlib.sha256).digest()
    return SubKeys(k_r=k_r, k_p=k_p)


def keystream_bytes(key, block_index, n, cursor=0):
    """Return ``n`` keystream bytes for ``(key, block_index)`` starting at ``cursor``.

    ChaCha20 with nonce ``counter:u32le | 0:u32 | block_index:u64le``; the
    byte cursor is mapped onto the block counter, so
    ``keystream_bytes(k, i, a) + keystream_bytes(k, i, b, cursor=a)`` equals
    ``keystream_bytes(k, i, a + b)``.
    """
    key = _check_key(key)
    if n < 0 or cursor < 0:
        raise BadArgs("n and cursor must be non-negative")
    if not 0 <= block_index < 1 << 64:
        raise BadArgs("block_index must fit in an unsigned 64-bit integer")
    if n == 0:
        return b""
    counter, skip = divmod(cursor, _CHACHA_BLOCK)
    if counter + (skip + n + _CHACHA_BLOCK - 1) // _CHACHA_BLOCK > 1 << 32:
        raise BadArgs("cursor beyond the 2**32-block keystream")
    nonce = (counter.to_bytes(4, "little") + bytes(4)
             + int(block_index).to_bytes(8, "little"))
    enc = Cipher(algorithms.ChaCha20(key, nonce), mode=None).encryptor()
    return enc.update(bytes(skip + n))[skip:]


def _keystream_words(key, block_index, count, cursor=0):
    raw = keystream_bytes(key, block_index, 4 * count, cursor=cursor)
    return np.frombuffer(raw, dtype="<u4").astype(np.uint32)


def _draw(kernel, key, block_index, n, *args):
    # Rejection is rare (probability < bound / 2**32 per draw), so n + 16
    # words nearly always suffice; on a shortfall the buffer doubles and the
    # draw is replayed from the start of the same stream.
    count = n + 16
    while True:
        words = _keystream_words(key, block_index, count)
        out, used = kernel(words, n, *args)
        if used >= 0:
            return out
        count *= 2


def gen_permutation(k_p, block_index, n):
    """Keyed uniform permutation of ``range(n)``.

    The result ``perm`` acts on a vector as ``P x = x[perm]``.
    """
    if n < 1:
        raise BadArgs("permutation length must be >= 1")
    perm = _draw(kernels.fisher_yates, k_p, block_index, n)
    perm.setflags(write=False)
    return perm


def gen_mask(k_r, block_index, n, t=DEFAULT_LEVELS):
    """Keyed mask with entries uniform over ``{±1, ..., ±t}``."""
    if n < 1 or t < 1:
        raise BadArgs("mask length and level count must be >= 1")
    if 2 * t > 1 << 32:
        raise BadArgs("too many levels")
    mask = _draw(kernels.signed_levels, k_r, block_index, n, t)
    mask.setflags(write=False)
    return mask


def invert_permutation(perm):
    inv = np.empty_like(perm)
    inv[perm] = np.arange(len(perm), dtype=perm.dtype)
    return inv
