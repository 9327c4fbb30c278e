"""Deterministic per-replicate random streams."""

from __future__ import annotations

import numpy as np

__all__ = ["STREAM_ALGORITHM", "seed_stream"]

STREAM_ALGORITHM = "numpy.PCG64(SeedSequence(entropy=seed, spawn_key=(index,)))"


def seed_stream(master_seed: int, index: int = 0) -> np.random.Generator:
    """Independent generator for replicate ``index`` of an experiment seeded by ``master_seed``.

    Each call builds a fresh generator, so streams are never shared between
    workers.  ``SeedSequence`` spawn keys give statistically independent
    streams for distinct indices.
    """
    if master_seed < 0 or index < 0:
        raise ValueError("seed and index must be non-negative")
    ss = np.random.SeedSequence(entropy=int(master_seed), spawn_key=(int(index),))
    return np.random.Generator(np.random.PCG64(ss))
