"""Seed derivation and the process pool used by Monte-Carlo loops."""
import multiprocessing
from typing import Callable, Iterable, List, Optional, TypeVar

import numpy as np

T = TypeVar("T")
R = TypeVar("R")


def make_rng(seed: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed))


def spawn(rng: np.random.Generator, count: int) -> List[np.random.Generator]:
    """Independent child generators; drawing them advances `rng` once."""
    parent = np.random.SeedSequence(int(rng.integers(0, 2**63)))
    return [np.random.default_rng(child) for child in parent.spawn(count)]


def spawn_seeds(rng: np.random.Generator, count: int) -> List[int]:
    """Integer seeds for work shipped to other processes."""
    return [int(x) for x in rng.integers(0, 2**63, size=count)]


def map_trials(
    fn: Callable[[T], R], items: Iterable[T], parallel: Optional[int] = None
) -> List[R]:
    """Apply fn to each item, in order, optionally on a process pool."""
    if not parallel or parallel <= 1:
        return [fn(item) for item in items]
    with multiprocessing.Pool(processes=parallel) as pool:
        return list(pool.imap(fn, items, chunksize=4))
