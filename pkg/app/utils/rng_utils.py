"""
Random Stream Utilities

All randomness flows from numpy's PCG64 generator. A root seed is split into
independent child streams with SeedSequence, so every (seed, episode) and every
(seed, agent) pair gets its own reproducible stream regardless of how many
draws the others make.
"""

from typing import List

import numpy as np

# Stream namespaces under one root seed.
ENV_STREAM = 0
POLICY_STREAM = 1


def make_generator(seed: int) -> np.random.Generator:
    """PCG64 generator for a 64-bit seed."""
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed)))


def episode_seed(root_seed: int, episode: int) -> int:
    """Environment seed for one episode of one experiment seed."""
    sequence = np.random.SeedSequence(root_seed, spawn_key=(ENV_STREAM, episode))
    return int(sequence.generate_state(1, dtype=np.uint64)[0])


def policy_generators(root_seed: int, num_agents: int) -> List[np.random.Generator]:
    """One independent generator per agent policy."""
    parent = np.random.SeedSequence(root_seed, spawn_key=(POLICY_STREAM,))
    return [np.random.Generator(np.random.PCG64(child)) for child in parent.spawn(num_agents)]
