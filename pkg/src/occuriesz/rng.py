"""Counter-based random streams.

Every stochastic routine in the package draws from a Philox generator keyed
by ``(seed, replication, coordinate)``.  Philox is counter-based, so streams
for different replications are statistically independent and can be generated
in any order (or in parallel) with bit-identical results.
"""

import numpy as np


def stream(seed: int, rep: int = 0, coord: int = 0) -> np.random.Generator:
    """Return the generator for one (seed, replication, coordinate) triple."""
    key = np.random.SeedSequence((int(seed), int(rep), int(coord)))
    return np.random.Generator(np.random.Philox(key=key.generate_state(2, np.uint64)))


def substream_seed(seed: int, rep: int) -> int:
    """Derived 64-bit seed for replication ``rep``; recorded in manifests."""
    return int(np.random.SeedSequence((int(seed), int(rep))).generate_state(1, np.uint64)[0])
