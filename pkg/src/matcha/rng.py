"""Named random streams.

Every stream is numpy's PCG64 seeded through ``SeedSequence(seed,
spawn_key=key)``.  Graph generators use the root stream (empty key), schedules
use key ``(0,)`` and the gradient noise of iteration k uses key ``(1, k)``,
so different policies run with the same seed see identical gradient noise.
"""
import numpy as np

SCHEDULE_STREAM = 0
NOISE_STREAM = 1


def stream(seed: int, *key: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(int(seed), spawn_key=key)))


def schedule_rng(seed: int) -> np.random.Generator:
    return stream(seed, SCHEDULE_STREAM)


def noise_rng(seed: int, iteration: int) -> np.random.Generator:
    return stream(seed, NOISE_STREAM, iteration)
