"""Counter-based random number streams.

Every random draw in the package flows through a named Philox stream keyed
by (master_seed, *path). Streams never depend on call order or worker
count, so any experiment is reproducible from its master seed alone.
"""

from __future__ import annotations

import numpy as np

# Fixed stream ids. Appending new ones is fine; renumbering breaks replay.
X_POINTS = 0
Y_POINTS = 1
COMPONENT_LABELS = 2
REFERENCE_SELECT = 3
PERMUTATIONS = 4
REFERENCE_DRAW = 5


def stream(master_seed: int, *path: int) -> np.random.Generator:
    """Return the generator for the stream named (master_seed, *path)."""
    ss = np.random.SeedSequence(
        entropy=int(master_seed), spawn_key=tuple(int(p) for p in path)
    )
    return np.random.Generator(np.random.Philox(ss))


def derive_seed(master_seed: int, *path: int) -> int:
    """Fold (master_seed, *path) into a single 64-bit seed.

    Used when a sub-config needs a plain integer seed (e.g. per-trial
    generator configs inside a power sweep).
    """
    ss = np.random.SeedSequence(
        entropy=int(master_seed), spawn_key=tuple(int(p) for p in path)
    )
    lo, hi = ss.generate_state(2, np.uint32)
    return (int(hi) << 32) | int(lo)
