"""Named, keyed random streams derived from one master seed.

Each consumer asks for a generator by ``(stream name, *keys)``; the result is
a fresh ``numpy.random.Generator`` whose state depends only on the master
seed, the name and the keys. Nothing is shared, so evaluation cadence or the
number of worker threads can never shift another consumer's draws.
"""

from __future__ import annotations

import numpy as np

# Fixed ids; never renumber or existing seeds change meaning.
STREAMS = {
    "init": 0,
    "partition": 1,
    "sampling": 2,
    "shuffle": 3,
    "train": 4,
    "data": 5,
    "split": 6,
}


def stream(master_seed: int, name: str, *keys: int) -> np.random.Generator:
    """Return the generator for ``name`` keyed by ``keys`` (e.g. round, client)."""
    try:
        sid = STREAMS[name]
    except KeyError:
        raise KeyError(f"unknown RNG stream {name!r}") from None
    if master_seed < 0 or any(k < 0 for k in keys):
        raise ValueError("seeds and stream keys must be non-negative")
    seq = np.random.SeedSequence([int(master_seed), sid, *(int(k) for k in keys)])
    return np.random.Generator(np.random.PCG64(seq))
