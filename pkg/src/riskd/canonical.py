"""Canonical JSON encoding shared by cartridges and the provenance store.

Canonical form: UTF-8, keys sorted lexicographically, no insignificant
whitespace, non-finite numbers rejected. Byte equality of two canonical
documents implies value equality, which is what makes content addressing
and round-trip tests meaningful.
"""

from __future__ import annotations

import hashlib
import json


def canonical_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"),
                      ensure_ascii=False, allow_nan=False)


def canonical_bytes(obj) -> bytes:
    return canonical_json(obj).encode("utf-8")


def content_hash(obj) -> str:
    """Hex id of an object's canonical form (SHA-256)."""
    return hashlib.sha256(canonical_bytes(obj)).hexdigest()
