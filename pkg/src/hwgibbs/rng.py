"""Seeded random streams.

Every stream is a Philox4x64-10 counter-based generator keyed by
``SeedSequence(seed, spawn_key=stream)``, so chain ``c`` of run ``seed``
always sees the same numbers no matter how many other chains exist or in
which order they run.
"""
from __future__ import annotations

import numpy as np


def make_rng(seed: int, *stream: int) -> np.random.Generator:
    ss = np.random.SeedSequence(int(seed) & (2 ** 64 - 1), spawn_key=tuple(int(s) for s in stream))
    return np.random.Generator(np.random.Philox(ss))
