"""
Small helpers shared across packages.

Random streams
--------------
All randomness derives from one master seed. A component asks for its own
stream with ``derive_seed(seed, *keys)``, which returns the first 64-bit
word of ``numpy.random.SeedSequence(seed, spawn_key=keys)``:

- test sample ``k`` of an evaluation run: ``derive_seed(seed, k)``
- class ``r`` inside one classification: ``derive_seed(sample_seed, r)``
- task ``t`` inside one class solve: ``derive_seed(class_seed, t)``
- test-matrix sampling in the experiment protocol: ``derive_seed(seed, PROTOCOL_STREAM)``

Streams therefore depend only on (seed, keys), never on execution order.
"""

from datetime import datetime, timezone

import numpy as np

PROTOCOL_STREAM = 0xE


def current_datetime_utc() -> str:
    """Return the current date and time in UTC formatted as 'YYYY-MM-DD HH:MM:SS'"""
    return datetime.now(timezone.utc).strftime('%Y-%m-%d %H:%M:%S')


def derive_seed(seed: int, *keys: int) -> int:
    """Derive an independent 64-bit seed for the component named by keys"""
    sequence = np.random.SeedSequence(int(seed), spawn_key=tuple(int(k) for k in keys))
    return int(sequence.generate_state(1, dtype=np.uint64)[0])


def make_rng(seed: int) -> np.random.Generator:
    """Generator used by every sampling routine"""
    return np.random.Generator(np.random.PCG64(int(seed)))


def format_float(value: float) -> str:
    """Round-trip exact decimal text for CSV output"""
    return format(float(value), ".17g")
