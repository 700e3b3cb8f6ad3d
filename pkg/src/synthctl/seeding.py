"""Stable seed derivation.

Child seeds are hashed from the base seed plus string tags (unit codes,
phase names) so that results never depend on scheduling order, worker count,
or the interpreter's per-process hash randomization.
"""

from __future__ import annotations

import hashlib


def derive_seed(seed: int, *parts: object) -> int:
    """A 63-bit child seed determined by the base seed and the tag parts."""
    text = ":".join([str(int(seed))] + [str(p) for p in parts])
    digest = hashlib.sha256(text.encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "big") >> 1
