"""Seed derivation.

Every random stream in a scenario is derived from one root seed through
:class:`numpy.random.SeedSequence` spawn keys, so streams are independent and
a run is reproducible from the root seed alone. Stream keys used by the
scenario runner:

====================  =======================================
key                   stream
====================  =======================================
``(0, block)``        transmitted symbols of the test channel
``(1, block)``        link noise (one sub-stream per node)
``(2, block, k)``     symbols of WDM neighbour ``k``
====================  =======================================
"""

import numpy as np

SYMBOLS = 0
NOISE = 1
NEIGHBOR = 2


def derive_seed(root, *keys):
    """Derive a 63-bit integer seed from ``root`` and a tuple of integer keys."""
    ss = np.random.SeedSequence(int(root), spawn_key=tuple(int(k) for k in keys))
    hi, lo = ss.generate_state(2, dtype=np.uint32)
    return int((int(hi) << 32 | int(lo)) & 0x7FFF_FFFF_FFFF_FFFF)


def make_rng(seed, *keys):
    return np.random.default_rng(derive_seed(seed, *keys) if keys else int(seed))
