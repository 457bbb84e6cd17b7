"""Seed derivation.

Every random stream in a run is derived from one 64-bit master seed with
:func:`split_seed`.  The derivation is BLAKE2b over the UTF-8 text
``"<master>|<key1>|<key2>|..."`` truncated to 8 bytes (little endian), so a
stream can be recreated from its key path alone, e.g. ``("bot", 17)`` for the
generator of bot 17 or ``("episode", 3)`` for the fourth training episode.
"""

from __future__ import annotations

import hashlib
import random

MASK64 = (1 << 64) - 1


def split_seed(master: int, *keys: object) -> int:
    text = "|".join([str(int(master) & MASK64), *map(str, keys)])
    digest = hashlib.blake2b(text.encode("utf-8"), digest_size=8).digest()
    return int.from_bytes(digest, "little")


def unit_draw(master: int, *keys: object) -> float:
    """A uniform float in [0, 1) that is a pure function of its key path."""
    return (split_seed(master, *keys) >> 11) * (1.0 / (1 << 53))


def stream(master: int, *keys: object) -> random.Random:
    return random.Random(split_seed(master, *keys))
