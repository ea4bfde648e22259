"""On-disk cache for assembled dense matrices.

File layout: the ASCII magic ``TBEMCACHE``, a little-endian ``uint32``
header length, a UTF-8 JSON header, then the matrix as row-major
little-endian complex128.  The header holds the format version, block
kind, wavenumber (re, im), contrast, mesh content hash, quadrature
orders and shape.  Any mismatch between the stored and the requested
header counts as a miss and the stale file is replaced on the next put.
"""

from __future__ import annotations

import hashlib
import json
import os
import struct
import tempfile
from dataclasses import dataclass
from pathlib import Path

import numpy as np

FORMAT_VERSION = 1
MAGIC = b"TBEMCACHE"
CACHE_ENV = "TRANSBEM_CACHE_DIR"
_DTYPE = np.dtype("<c16")


def default_cache_dir() -> Path:
    env = os.environ.get(CACHE_ENV)
    if env:
        return Path(env)
    return Path.home() / ".cache" / "transbem"


@dataclass(frozen=True)
class CacheKey:
    kind: str
    k: complex
    n: tuple
    mesh_hash: str
    orders: tuple

    def header(self, shape=None) -> dict:
        h = {
            "format": FORMAT_VERSION,
            "kind": self.kind,
            "k": [float(np.real(self.k)), float(np.imag(self.k))],
            "n": [float(x) for x in self.n],
            "mesh": self.mesh_hash,
            "orders": [float(x) for x in self.orders],
        }
        if shape is not None:
            h["shape"] = [int(s) for s in shape]
        return h

    def filename(self) -> str:
        blob = json.dumps(self.header(), sort_keys=True).encode()
        # repr of floats is exact, so distinct k never share a name
        return f"{self.kind}-{hashlib.sha256(blob).hexdigest()[:24]}.bin"


class MatrixCache:
    def __init__(self, directory: str | os.PathLike | None = None):
        self.directory = Path(directory) if directory is not None else default_cache_dir()
        self.hits = 0
        self.misses = 0

    def path(self, key: CacheKey) -> Path:
        return self.directory / key.filename()

    def get(self, key: CacheKey) -> np.ndarray | None:
        p = self.path(key)
        try:
            with open(p, "rb") as fh:
                header, offset = _read_header(fh)
                if {k: v for k, v in header.items() if k != "shape"} != key.header():
                    self.misses += 1
                    return None
                shape = tuple(header["shape"])
                data = np.fromfile(fh, dtype=_DTYPE)
        except (OSError, ValueError, KeyError):
            self.misses += 1
            return None
        if data.size != int(np.prod(shape)):
            self.misses += 1
            return None
        self.hits += 1
        return data.reshape(shape).astype(np.complex128)

    def put(self, key: CacheKey, matrix: np.ndarray) -> Path:
        self.directory.mkdir(parents=True, exist_ok=True)
        p = self.path(key)
        head = json.dumps(key.header(matrix.shape), sort_keys=True).encode()
        fd, tmp = tempfile.mkstemp(dir=self.directory, suffix=".tmp")
        try:
            with os.fdopen(fd, "wb") as fh:
                fh.write(MAGIC + struct.pack("<I", len(head)) + head)
                fh.write(np.ascontiguousarray(matrix, dtype=_DTYPE).tobytes(order="C"))
            os.replace(tmp, p)
        except BaseException:
            if os.path.exists(tmp):
                os.unlink(tmp)
            raise
        return p

    def entries(self) -> list[dict]:
        out = []
        if not self.directory.is_dir():
            return out
        for p in sorted(self.directory.glob("*.bin")):
            try:
                with open(p, "rb") as fh:
                    header, _ = _read_header(fh)
            except (OSError, ValueError):
                header = {"error": "unreadable"}
            header["file"] = p.name
            header["bytes"] = p.stat().st_size
            out.append(header)
        return out

    def clear(self) -> int:
        n = 0
        if self.directory.is_dir():
            for p in self.directory.glob("*.bin"):
                p.unlink()
                n += 1
        return n


def _read_header(fh):
    magic = fh.read(len(MAGIC))
    if magic != MAGIC:
        raise ValueError("not a cache file")
    (size,) = struct.unpack("<I", fh.read(4))
    header = json.loads(fh.read(size).decode())
    return header, len(MAGIC) + 4 + size
