"""Append-only ciphertext log with an in-memory index and decompression cache."""

import logging
import os
import threading
from pathlib import Path

import numpy as np

from ..blocks import DecompressedBlock
from ..errors import CorruptRecord, DimensionMismatch, NotConverged, NotFound
from ..recovery import FEAS_SLACK, SolverOptions, solve_bp_many
from ..sensing import gen_sensing_matrix
from .records import HEADER, HEADER_SIZE, CiphertextRecord, record_size

logger = logging.getLogger(__name__)


class CloudStore:
    """Ciphertext storage for one ``(m, n, phi_seed)`` geometry.

    The log file is a plain concatenation of records. The index (block
    index -> byte offset of its latest record) is rebuilt by scanning the
    log on open. Writes are serialized; reads use ``os.pread`` and may run
    concurrently.

    Parameters
    ----------
    path : path-like
        Log file; created if missing.
    m, n, phi_seed : int, optional
        Geometry. Taken from the first record when omitted; a mismatch with
        an existing log raises :class:`DimensionMismatch`.
    options : SolverOptions, optional
        Default options for :meth:`get_decompressed`.
    fsync : bool
        Call ``os.fsync`` after every append. Each append is always flushed
        to the OS, which already survives a process restart.
    """

    def __init__(self, path, m=None, n=None, phi_seed=None, options=None, fsync=False):
        self.path = Path(path)
        self.options = options or SolverOptions()
        self.fsync = fsync
        self._config = None
        if m is not None or n is not None or phi_seed is not None:
            if None in (m, n, phi_seed):
                raise DimensionMismatch("m, n and phi_seed must be given together")
            self._config = (int(m), int(n), int(phi_seed))
        self._index = {}
        self._write_lock = threading.Lock()
        self._cache = {}
        self._cache_lock = threading.Lock()
        self._key_locks = {}
        self._phi = None
        self._phi_lock = threading.Lock()
        self.solver_runs = 0
        self.path.touch(exist_ok=True)
        self._fd = os.open(self.path, os.O_RDWR | os.O_APPEND)
        self._end = self.rebuild_index()

    # -- lifecycle ---------------------------------------------------------

    def close(self):
        if self._fd >= 0:
            os.close(self._fd)
            self._fd = -1

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()

    @property
    def config(self):
        return self._config

    def __len__(self):
        return len(self._index)

    def indices(self):
        return sorted(self._index)

    def rebuild_index(self):
        """Scan the whole log, rebuild the index and return the end offset.

        A torn record at the very end (interrupted append) is ignored with a
        warning; a bad record anywhere else raises :class:`CorruptRecord`.
        """
        size = os.fstat(self._fd).st_size
        index = {}
        offset = 0
        with open(self.path, "rb") as fh:
            data = fh.read(size)
        while offset < size:
            if size - offset < HEADER_SIZE:
                logger.warning("ignoring %d trailing bytes in %s", size - offset, self.path)
                break
            _, _, _, _, m, _, _ = HEADER.unpack_from(data, offset)
            length = record_size(m)
            if offset + length > size:
                logger.warning("ignoring torn record at offset %d in %s", offset, self.path)
                break
            rec = CiphertextRecord.from_bytes(data[offset: offset + length])
            self._check_config(rec)
            index[rec.index] = offset
            offset += length
        self._index = index
        return offset

    def _check_config(self, rec):
        geom = (rec.m, rec.n, rec.phi_seed)
        if self._config is None:
            self._config = geom
        elif geom != self._config:
            raise DimensionMismatch(
                f"record geometry (m, n, seed)={geom} != store {self._config}")

    # -- writes --------------------------------------------------------------

    def put_record(self, rec):
        """Append a record (object or raw bytes); last write per index wins."""
        if isinstance(rec, (bytes, bytearray, memoryview)):
            rec = CiphertextRecord.from_bytes(rec)
        data = rec.to_bytes()
        with self._write_lock:
            self._check_config(rec)
            offset = self._end
            os.write(self._fd, data)
            if self.fsync:
                os.fsync(self._fd)
            self._end = offset + len(data)
            self._index[rec.index] = offset
        return offset

    def put_many(self, records):
        """Append several records with a single write call."""
        recs = [CiphertextRecord.from_bytes(r) if isinstance(r, (bytes, bytearray)) else r
                for r in records]
        with self._write_lock:
            for r in recs:
                self._check_config(r)
            chunks = [r.to_bytes() for r in recs]
            offset = self._end
            os.write(self._fd, b"".join(chunks))
            if self.fsync:
                os.fsync(self._fd)
            for r, c in zip(recs, chunks):
                self._index[r.index] = offset
                offset += len(c)
            self._end = offset

    # -- reads ---------------------------------------------------------------

    def get_raw(self, index):
        offset = self._index.get(index)
        if offset is None:
            raise NotFound(index)
        m = self._config[0]
        data = os.pread(self._fd, record_size(m), offset)
        CiphertextRecord.from_bytes(data)
        return data

    def get_record(self, index):
        return CiphertextRecord.from_bytes(self.get_raw(index))

    @property
    def phi(self):
        with self._phi_lock:
            if self._phi is None:
                if self._config is None:
                    raise NotFound("store is empty and has no geometry")
                m, n, seed = self._config
                self._phi = gen_sensing_matrix(seed, m, n)
            return self._phi

    def _key_lock(self, key):
        with self._cache_lock:
            lock = self._key_locks.get(key)
            if lock is None:
                lock = self._key_locks[key] = threading.Lock()
            return lock

    def _cache_key(self, index, opts):
        offset = self._index.get(index)
        if offset is None:
            raise NotFound(index)
        return (index, offset, opts.digest())

    def get_decompressed(self, index, opts=None):
        """Recover ``z`` for a stored block, solving at most once per cache key."""
        return self.get_decompressed_many([index], opts)[0]

    def get_decompressed_many(self, indices, opts=None):
        """Recover several blocks, batching the uncached ones into one solve.

        Raises :class:`NotConverged` if any block fails; blocks that did
        converge are cached before the error propagates.
        """
        opts = opts or self.options
        keys = [self._cache_key(i, opts) for i in indices]
        locks = [self._key_lock(k) for k in dict.fromkeys(keys)]
        for lock in sorted(locks, key=id):
            lock.acquire()
        try:
            todo = [k for k in dict.fromkeys(keys) if k not in self._cache]
            failures = []
            if todo:
                phi = self.phi
                ys = np.column_stack([self._record_at(k[1]).payload for k in todo])
                results = solve_bp_many(phi, ys, opts)
                self.solver_runs += len(todo)
                for k, y, res in zip(todo, ys.T, results):
                    diag = {"iterations": res.iterations, "residual": res.residual,
                            "l1_norm": res.l1_norm, "debiased": res.debiased,
                            "tolerance_met": res.tolerance_met}
                    tol = opts.tolerance(float(np.linalg.norm(y)))
                    if not res.converged or res.residual > tol + FEAS_SLACK:
                        failures.append((k[0], res))
                        continue
                    with self._cache_lock:
                        self._cache[k] = DecompressedBlock(res.z, k[0], diag)
                    logger.info("decompressed index=%d iterations=%d residual=%.3e l1=%.6g",
                                k[0], res.iterations, res.residual, res.l1_norm)
            if failures:
                idx, res = failures[0]
                raise NotConverged(f"block {idx} did not converge "
                                   f"(residual {res.residual:.3e})", res)
            return [self._cache[k] for k in keys]
        finally:
            for lock in locks:
                lock.release()

    def _record_at(self, offset):
        m = self._config[0]
        return CiphertextRecord.from_bytes(os.pread(self._fd, record_size(m), offset))

    def cached(self, index, opts=None):
        opts = opts or self.options
        try:
            return self._cache_key(index, opts) in self._cache
        except NotFound:
            return False
