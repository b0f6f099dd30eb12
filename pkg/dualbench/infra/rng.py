"""
Random streams
Counter-based Philox generators keyed by (seed, stream id)
"""
import numpy as np


def stream(seed: int, stream_id: int = 0) -> np.random.Generator:
    """
    Independent generator for one trajectory worker

    Args:
        seed: Experiment seed
        stream_id: Worker / trajectory id

    Returns:
        numpy Generator over a Philox bit generator (256-bit key/counter state)
    """
    sequence = np.random.SeedSequence(seed, spawn_key=(stream_id,))
    return np.random.Generator(np.random.Philox(sequence))
