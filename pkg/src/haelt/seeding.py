"""Named sub-seeds derived from one master seed.

Each consumer (data, init, dropout, shuffle, permutation, ...) draws from its
own stream, so editing one part of a config does not perturb the others.
"""

import zlib

import numpy as np


def derive_seed(master: int, name: str) -> int:
    ss = np.random.SeedSequence([int(master) & 0xFFFFFFFF, zlib.crc32(name.encode())])
    return int(ss.generate_state(1, dtype=np.uint32)[0])


def rng_for(master: int, name: str) -> np.random.Generator:
    return np.random.default_rng(derive_seed(master, name))
