"""Framed query/reply messages.

Every frame is ``u32le body_length`` followed by the body.

Query body (9 bytes): ``op:u8 | index:u64le``.

Reply body: ``status:u8 | index:u64le | count:u32le | count x float64le |
crc32:u32le`` with the CRC over the preceding reply bytes. For
``STAT_COUNT`` the index field carries the number of stored blocks and the
payload is empty.
"""

import enum
import struct
import zlib
from dataclasses import dataclass

import numpy as np

from ..errors import CorruptRecord

LENGTH = struct.Struct("<I")
QUERY = struct.Struct("<BQ")
REPLY_HEAD = struct.Struct("<BQI")
CRC = struct.Struct("<I")
MAX_FRAME = 1 << 26


class Op(enum.IntEnum):
    FETCH_DECOMPRESSED = 1
    FETCH_RAW = 2
    STAT_COUNT = 3


class Status(enum.IntEnum):
    OK = 0
    NOT_FOUND = 1
    UNKNOWN_OP = 2
    MALFORMED = 3
    NOT_CONVERGED = 4
    INTERNAL = 5


@dataclass(frozen=True)
class Reply:
    status: Status
    index: int
    payload: np.ndarray


def frame(body):
    return LENGTH.pack(len(body)) + body


def encode_query(op, index):
    return frame(QUERY.pack(int(op), index))


def decode_query(body):
    if len(body) != QUERY.size:
        raise CorruptRecord(f"query body must be {QUERY.size} bytes, got {len(body)}")
    return QUERY.unpack(body)


def encode_reply(status, index, payload=()):
    values = np.asarray(payload, dtype="<f8").reshape(-1)
    body = REPLY_HEAD.pack(int(status), index, values.shape[0]) + values.tobytes()
    return frame(body + CRC.pack(zlib.crc32(body)))


def decode_reply(body):
    if len(body) < REPLY_HEAD.size + CRC.size:
        raise CorruptRecord("reply too short")
    status, index, count = REPLY_HEAD.unpack_from(body)
    if len(body) != REPLY_HEAD.size + 8 * count + CRC.size:
        raise CorruptRecord("reply length does not match its count field")
    (crc,) = CRC.unpack_from(body, len(body) - CRC.size)
    if zlib.crc32(body[: -CRC.size]) != crc:
        raise CorruptRecord("reply CRC mismatch")
    payload = np.frombuffer(body, dtype="<f8", count=count, offset=REPLY_HEAD.size)
    return Reply(Status(status), index, payload.astype(np.float64))


def read_exact(sock, n):
    """Read ``n`` bytes; returns fewer only if the peer closed early."""
    chunks = []
    got = 0
    while got < n:
        chunk = sock.recv(n - got)
        if not chunk:
            break
        chunks.append(chunk)
        got += len(chunk)
    return b"".join(chunks)


def read_frame(sock):
    """Return the next frame body, ``None`` on clean EOF.

    Raises :class:`CorruptRecord` on a truncated or oversized frame.
    """
    head = read_exact(sock, LENGTH.size)
    if not head:
        return None
    if len(head) < LENGTH.size:
        raise CorruptRecord("truncated frame length")
    (length,) = LENGTH.unpack(head)
    if length > MAX_FRAME:
        raise CorruptRecord(f"frame length {length} exceeds limit")
    body = read_exact(sock, length)
    if len(body) < length:
        raise CorruptRecord(f"truncated frame: expected {length} bytes, got {len(body)}")
    return body
