"""The honest-but-curious cloud: ciphertext log, decompression, query service.

Nothing in this subpackage handles class keys, the sparsifying basis or
plaintext; it only sees measurements and the public sensing parameters.
"""

from .records import CiphertextRecord, HEADER_SIZE
from .store import CloudStore
from .wire import Op, Status, Reply
from .server import CloudClient, make_server, serve, parse_endpoint

__all__ = [
    "CiphertextRecord", "HEADER_SIZE", "CloudStore", "Op", "Status", "Reply",
    "CloudClient", "make_server", "serve", "parse_endpoint",
]
