"""Shared plumbing: atomic writes, canonical hashing, seed derivation."""

from __future__ import annotations

import hashlib
import json
import os
import tempfile
from typing import Any

import numpy as np


# ---------------------------------------------------------------------------
# canonical JSON and hashing
# ---------------------------------------------------------------------------

def canonical_json(obj: Any) -> str:
    """Serialize *obj* with sorted keys and no incidental whitespace.

    Used everywhere a hash or a byte-stable artifact is derived from a dict,
    so that semantically equal configs hash equally.
    """
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def config_hash(obj: Any) -> str:
    """First 16 hex chars of the SHA-256 of the canonical JSON of *obj*."""
    return hashlib.sha256(canonical_json(obj).encode("utf-8")).hexdigest()[:16]


def sha256_file(path: str | os.PathLike) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            digest.update(chunk)
    return digest.hexdigest()


# ---------------------------------------------------------------------------
# atomic file output
# ---------------------------------------------------------------------------

def atomic_write_bytes(path: str | os.PathLike, data: bytes) -> None:
    """Write *data* to *path* via a temp file and ``os.replace``.

    Readers never observe a half-written artifact; a crashed run leaves the
    previous version (or nothing) in place.
    """
    path = os.fspath(path)
    directory = os.path.dirname(path) or "."
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix="~")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        try:
            os.unlink(tmp)
        except OSError:
            pass
        raise


def atomic_write_text(path: str | os.PathLike, text: str) -> None:
    atomic_write_bytes(path, text.encode("utf-8"))


# ---------------------------------------------------------------------------
# seed derivation
# ---------------------------------------------------------------------------
# Every random stream in the package is a PCG64 generator seeded through
# numpy's SeedSequence. A stream is addressed by (master seed, stage name,
# integer indices); the stage name is folded to a 32-bit code so that
# distinct stages can never collide even for equal index tuples.

def stage_code(stage: str) -> int:
    """Stable 32-bit code for a stage name (first 4 bytes of its SHA-256)."""
    return int.from_bytes(hashlib.sha256(stage.encode("utf-8")).digest()[:4], "big")


def derive_seed(master: int, stage: str, *indices: int) -> np.random.SeedSequence:
    return np.random.SeedSequence(entropy=master, spawn_key=(stage_code(stage), *indices))


def rng_for(master: int, stage: str, *indices: int) -> np.random.Generator:
    """Deterministic PCG64 generator for a named stage of a run."""
    return np.random.Generator(np.random.PCG64(derive_seed(master, stage, *indices)))
