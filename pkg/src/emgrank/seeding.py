"""Deterministic seed derivation.

All randomness in a pipeline run flows from one top-level seed. Child seeds
are derived from (seed, key path) so that any stage can be recomputed in
isolation: the derivation depends only on the key path, never on execution
order or worker count.
"""

from __future__ import annotations

import zlib

import numpy as np


def spawn_seed(base: int, *key: int | str) -> int:
    """Derive a child seed from `base` and a structured key path.

    String components are hashed with crc32 so call sites stay readable,
    e.g. ``spawn_seed(seed, "fit", grid_index, fold_index)``.
    """
    parts = tuple(
        zlib.crc32(part.encode("utf-8")) if isinstance(part, str) else int(part)
        for part in key
    )
    seq = np.random.SeedSequence(int(base), spawn_key=parts)
    return int(seq.generate_state(1)[0])
