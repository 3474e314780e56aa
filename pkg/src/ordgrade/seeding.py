"""Per-component random streams derived from one root seed.

Each component gets its own stream keyed by a stable hash of its name, so
adding or reordering components never shifts another component's draws.
"""

import zlib

import numpy as np


def component_key(name: str) -> int:
    return zlib.crc32(name.encode("utf-8"))


def derive_rng(seed: int, component: str, *counters: int) -> np.random.Generator:
    ss = np.random.SeedSequence(int(seed), spawn_key=(component_key(component), *map(int, counters)))
    return np.random.Generator(np.random.Philox(ss))
