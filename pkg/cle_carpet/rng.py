"""
Random streams and worker pool for CarpetLab

Every random draw in the package comes from numpy's Philox-4x64-10 counter-based
bit generator, keyed by numpy.random.SeedSequence(master_seed, spawn_key=key).
A stream is a pure function of (master_seed, key), so results do not depend on
how work is scheduled across threads.
"""

from concurrent.futures import ThreadPoolExecutor

import numpy as np

RNG_ALGORITHM = 'numpy.random.Philox (Philox-4x64-10) keyed by SeedSequence(seed, spawn_key)'

# Stream identifiers, first element of every spawn key
STREAM_SOUP = 1
STREAM_REPLICA = 2
STREAM_PAIRS = 3
STREAM_LEVY = 4
STREAM_BOOTSTRAP = 5
STREAM_SELFTEST = 6


def make_rng(seed, *key):
    """
    Create the generator for one stream

    Args:
        seed (int): Master seed
        *key (int): Spawn key (stream id, indices, ...)

    Returns:
        numpy.random.Generator: Philox-backed generator
    """
    sequence = np.random.SeedSequence(int(seed), spawn_key=tuple(int(k) for k in key))
    return np.random.Generator(np.random.Philox(sequence))


def child_seed(seed, *key):
    """Derive a 63-bit child seed, e.g. for a SoupConfig of one replica"""
    sequence = np.random.SeedSequence(int(seed), spawn_key=tuple(int(k) for k in key))
    return int(sequence.generate_state(1, dtype=np.uint64)[0] >> np.uint64(1))


def parallel_map(func, tasks, threads=1):
    """
    Map func over tasks, returning results in task order

    Args:
        func (callable): Function of one task descriptor
        tasks (iterable): Immutable task descriptors
        threads (int): Worker count; 1 runs inline

    Returns:
        list: Results ordered by task index
    """
    tasks = list(tasks)
    if threads <= 1 or len(tasks) <= 1:
        return [func(task) for task in tasks]
    with ThreadPoolExecutor(max_workers=threads) as executor:
        return list(executor.map(func, tasks))
