"""Deterministic random streams.

Every replicate of an experiment draws from its own generator, keyed by
``(master seed, replicate index)``.  Results therefore do not depend on how
replicates are grouped into chunks or spread over worker threads.
"""

import numpy as np

DEFAULT_SEED = 20240611


def stream(seed: int, *key: int) -> np.random.Generator:
    """Return an independent generator for ``seed`` and an integer key path."""
    ss = np.random.SeedSequence(int(seed), spawn_key=tuple(int(k) for k in key))
    return np.random.Generator(np.random.PCG64(ss))


def replicate_rng(seed: int, index: int) -> np.random.Generator:
    return stream(seed, index)


def as_generator(rng) -> np.random.Generator:
    """Accept a Generator, an integer seed or None."""
    if isinstance(rng, np.random.Generator):
        return rng
    if rng is None:
        return stream(DEFAULT_SEED)
    return stream(int(rng))


def derive_seed(seed: int, *key: int) -> int:
    """A 63-bit integer seed for a sub-experiment keyed under ``seed``."""
    ss = np.random.SeedSequence(int(seed), spawn_key=tuple(int(k) for k in key))
    return int(ss.generate_state(2, dtype=np.uint64)[0] >> np.uint64(1))
