"""TCP query service in front of a :class:`CloudStore`, plus a small client."""

import logging
import os
import socket
import socketserver
import threading
from concurrent.futures import ThreadPoolExecutor

from ..errors import BindFailure, CorruptRecord, NotConverged, NotFound
from . import wire
from .wire import Op, Status

logger = logging.getLogger(__name__)

WORKERS_ENV = "MPCC_WORKERS"


def parse_endpoint(text):
    host, sep, port = text.rpartition(":")
    if not sep:
        host, port = "127.0.0.1", text
    return host or "127.0.0.1", int(port)


def _pool_size():
    value = os.environ.get(WORKERS_ENV)
    return max(1, int(value)) if value else max(1, os.cpu_count() or 1)


class _Handler(socketserver.BaseRequestHandler):
    def handle(self):
        sock = self.request
        while True:
            try:
                body = wire.read_frame(sock)
            except CorruptRecord as exc:
                logger.info("malformed frame from %s: %s", self.client_address, exc)
                self._send(wire.encode_reply(Status.MALFORMED, 0))
                return
            except OSError:
                return
            if body is None:
                return
            try:
                op, index = wire.decode_query(body)
            except CorruptRecord:
                self._send(wire.encode_reply(Status.MALFORMED, 0))
                return
            if not self._send(self.server.answer(op, index)):
                return

    def _send(self, data):
        try:
            self.request.sendall(data)
            return True
        except OSError:
            return False


class CloudServer(socketserver.ThreadingMixIn, socketserver.TCPServer):
    """Thread-per-connection server; solves run on a bounded worker pool."""

    daemon_threads = True
    allow_reuse_address = True

    def __init__(self, store, address, workers=None):
        self.store = store
        self.pool = ThreadPoolExecutor(max_workers=workers or _pool_size(),
                                       thread_name_prefix="mpcc-solve")
        super().__init__(address, _Handler)

    def answer(self, op, index):
        try:
            op = Op(op)
        except ValueError:
            return wire.encode_reply(Status.UNKNOWN_OP, index)
        try:
            if op is Op.STAT_COUNT:
                return wire.encode_reply(Status.OK, len(self.store))
            if op is Op.FETCH_RAW:
                rec = self.store.get_record(index)
                return wire.encode_reply(Status.OK, index, rec.payload)
            block = self.pool.submit(self.store.get_decompressed, index).result()
            return wire.encode_reply(Status.OK, index, block.z)
        except NotFound:
            return wire.encode_reply(Status.NOT_FOUND, index)
        except NotConverged:
            return wire.encode_reply(Status.NOT_CONVERGED, index)
        except Exception:
            logger.exception("query op=%s index=%d failed", op, index)
            return wire.encode_reply(Status.INTERNAL, index)

    def server_close(self):
        super().server_close()
        self.pool.shutdown(wait=False)


def make_server(store, endpoint, workers=None):
    address = parse_endpoint(endpoint) if isinstance(endpoint, str) else endpoint
    try:
        return CloudServer(store, address, workers)
    except OSError as exc:
        raise BindFailure(f"cannot bind {address}: {exc}") from exc


def serve(store, endpoint, workers=None):
    """Serve queries until interrupted."""
    server = make_server(store, endpoint, workers)
    host, port = server.server_address[:2]
    logger.info("serving %s on %s:%d", store.path, host, port)
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        pass
    finally:
        server.server_close()


class CloudClient:
    """Blocking client holding one connection."""

    def __init__(self, endpoint, timeout=None):
        address = parse_endpoint(endpoint) if isinstance(endpoint, str) else endpoint
        self.sock = socket.create_connection(address, timeout=timeout)
        self._lock = threading.Lock()

    def close(self):
        self.sock.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()

    def request(self, op, index=0):
        with self._lock:
            self.sock.sendall(wire.encode_query(op, index))
            body = wire.read_frame(self.sock)
        if body is None:
            raise ConnectionError("server closed the connection")
        return wire.decode_reply(body)

    def fetch_decompressed(self, index):
        return self._ok(self.request(Op.FETCH_DECOMPRESSED, index))

    def fetch_raw(self, index):
        return self._ok(self.request(Op.FETCH_RAW, index))

    def stat_count(self):
        return self._ok(self.request(Op.STAT_COUNT)).index

    @staticmethod
    def _ok(reply):
        if reply.status is Status.NOT_FOUND:
            raise NotFound(reply.index)
        if reply.status is Status.NOT_CONVERGED:
            raise NotConverged(f"cloud could not decompress block {reply.index}")
        if reply.status is not Status.OK:
            raise RuntimeError(f"cloud replied {reply.status.name}")
        return reply
