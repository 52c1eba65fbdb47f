"""Small helpers: atomic file writes, canonical JSON, vocabulary hashing.

All artifact writers go through the atomic helpers so a crashed command never
leaves a half-written file, and all JSON is emitted with sorted keys so
identical runs produce identical bytes.
"""

import hashlib
import json
import os
import tempfile


def canonical_json(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def sha256_text(text: str) -> str:
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


def atomic_write_bytes(path: str, data: bytes) -> None:
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def atomic_write_text(path: str, text: str) -> None:
    atomic_write_bytes(path, text.encode("utf-8"))


def format_float(x: float) -> str:
    """Shortest decimal string that round-trips the exact float64 value."""
    return repr(float(x))
