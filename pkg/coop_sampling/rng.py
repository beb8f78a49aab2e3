"""
Seeded random substreams.

Each draw in a simulation comes from its own generator keyed by
(seed, robot id, round, purpose). Keys are hashed by numpy's
SeedSequence and fed to an SFC64 bit generator, so adding a robot or a
round never shifts anyone else's draws.
"""

from enum import IntEnum

import numpy as np
from numpy.random import SFC64, Generator, SeedSequence


class Purpose(IntEnum):
    OBSERVE = 0
    UPLOAD = 1
    PROFILE = 2


def substream(seed: int, robot_id: int, round_index: int, purpose: Purpose) -> Generator:
    """Independent generator for one (robot, round, purpose) cell."""
    sequence = SeedSequence(entropy=int(seed) & 0xFFFFFFFFFFFFFFFF, spawn_key=(int(robot_id), int(round_index), int(purpose)))
    return Generator(SFC64(sequence))


def dirichlet(seed: int, robot_id: int, alpha: float, n_class: int) -> np.ndarray:
    """Dirichlet draw used for `dirichlet:<alpha>` robot profiles."""
    rng = substream(seed, robot_id, 0, Purpose.PROFILE)
    return rng.dirichlet(np.full(n_class, float(alpha)))
