"""Seeded random streams.

Every random draw in the package goes through :func:`stream`. A stream is a
Philox counter-based generator keyed by ``SeedSequence(seed, spawn_key)``,
where the spawn key is a fixed integer per purpose plus optional indices
(step number, path block, ...). Two streams with different labels never
overlap, and a stream's output does not depend on what was drawn elsewhere.
"""

from __future__ import annotations

import numpy as np

# Stream purposes. Values are part of the on-disk reproducibility contract:
# never renumber, only append.
INSTANCE = 0
PHA_STEP = 1
ROUNDING = 2
SDE_PATHS = 3
ORACLE_PATHS = 4
PROBES = 5
BENCH = 6


def stream(seed: int, purpose: int, *index: int) -> np.random.Generator:
    """Return the Philox generator for ``(seed, purpose, *index)``."""
    if seed < 0:
        raise ValueError(f"seed must be nonnegative, got {seed}")
    ss = np.random.SeedSequence(int(seed), spawn_key=(int(purpose), *map(int, index)))
    return np.random.Generator(np.random.Philox(ss))
