"""Per-Fock-pair kernel cache with optional on-disk persistence.

File format (one file per kernel, little-endian)::

    b"BCKC"                    magic
    uint16                     format version
    uint32                     header length H
    H bytes                    UTF-8 JSON: fingerprint, na, nb, shape, nnz
    nnz * int64                flat indices of nonzero entries (C order)
    nnz * float64              their probabilities

Values are stored as raw IEEE doubles, so a round trip is bit-exact.
"""

from __future__ import annotations

import json
import os
import struct
import tempfile
import threading
from pathlib import Path

import numpy as np

MAGIC = b"BCKC"
VERSION = 1
SUFFIX = ".bck"


class CacheFormatError(ValueError):
    pass


def dumps(fingerprint: str, na: int, nb: int, probs: np.ndarray) -> bytes:
    flat = np.ascontiguousarray(probs, dtype="<f8").ravel()
    idx = np.flatnonzero(flat).astype("<i8")
    header = json.dumps(
        {"fingerprint": fingerprint, "na": na, "nb": nb, "shape": list(probs.shape), "nnz": int(idx.size)},
        sort_keys=True,
    ).encode()
    return b"".join([
        MAGIC, struct.pack("<HI", VERSION, len(header)), header,
        idx.tobytes(), flat[idx].tobytes(),
    ])


def loads(data: bytes):
    """Inverse of :func:`dumps`; returns ``(fingerprint, na, nb, probs)``."""
    if data[:4] != MAGIC:
        raise CacheFormatError("not a kernel cache file")
    version, hlen = struct.unpack_from("<HI", data, 4)
    if version != VERSION:
        raise CacheFormatError(f"unsupported cache version {version}")
    pos = 10
    header = json.loads(data[pos:pos + hlen].decode())
    pos += hlen
    nnz = header["nnz"]
    idx = np.frombuffer(data, "<i8", nnz, pos)
    vals = np.frombuffer(data, "<f8", nnz, pos + 8 * nnz)
    probs = np.zeros(int(np.prod(header["shape"])), dtype=float)
    probs[idx] = vals
    return header["fingerprint"], header["na"], header["nb"], probs.reshape(header["shape"])


class KernelCache:
    """Thread-safe get-or-insert store keyed by ``(fingerprint, na, nb)``."""

    def __init__(self, directory: str | os.PathLike | None = None):
        self.directory = Path(directory) if directory is not None else None
        if self.directory is not None:
            self.directory.mkdir(parents=True, exist_ok=True)
        self._mem: dict[tuple[str, int, int], np.ndarray] = {}
        self._lock = threading.Lock()
        self.hits = 0
        self.misses = 0

    def _path(self, key):
        fp, na, nb = key
        return self.directory / f"{fp}_{na}_{nb}{SUFFIX}"

    def get(self, key):
        with self._lock:
            hit = self._mem.get(key)
        if hit is None and self.directory is not None:
            path = self._path(key)
            if path.exists():
                fp, na, nb, probs = loads(path.read_bytes())
                if (fp, na, nb) == key:
                    probs.setflags(write=False)
                    with self._lock:
                        hit = self._mem.setdefault(key, probs)
        with self._lock:
            if hit is None:
                self.misses += 1
            else:
                self.hits += 1
        return hit

    def put(self, key, probs: np.ndarray) -> np.ndarray:
        probs = np.array(probs, dtype=float)
        probs.setflags(write=False)
        with self._lock:
            probs = self._mem.setdefault(key, probs)
        if self.directory is not None:
            path = self._path(key)
            if not path.exists():
                fd, tmp = tempfile.mkstemp(dir=self.directory, suffix=".tmp")
                with os.fdopen(fd, "wb") as fh:
                    fh.write(dumps(*key, probs))
                os.replace(tmp, path)
        return probs

    def __contains__(self, key):
        with self._lock:
            if key in self._mem:
                return True
        return self.directory is not None and self._path(key).exists()

    def clear(self) -> int:
        """Drop all entries; returns the number of files removed."""
        with self._lock:
            self._mem.clear()
        removed = 0
        if self.directory is not None:
            for p in self.directory.glob(f"*{SUFFIX}"):
                p.unlink()
                removed += 1
        return removed

    def stat(self) -> dict:
        files = list(self.directory.glob(f"*{SUFFIX}")) if self.directory is not None else []
        with self._lock:
            n_mem = len(self._mem)
        return {
            "directory": str(self.directory) if self.directory is not None else None,
            "memory_entries": n_mem,
            "files": len(files),
            "bytes": sum(p.stat().st_size for p in files),
            "hits": self.hits,
            "misses": self.misses,
        }
