"""Counter-based derivation of independent random streams.

Every stochastic routine takes a :class:`numpy.random.Generator`. Parallel
work derives one generator per unit of work from ``(base_seed, *counters)``
through :class:`numpy.random.SeedSequence` spawn keys, so results never
depend on scheduling order.

The bit generator is PCG64 (NumPy's default) and standard normals come from
``Generator.standard_normal`` (NumPy's ziggurat transform). Both are fixed
here because bit-identical reruns are part of the contract.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Iterable, Sequence, TypeVar

import numpy as np

T = TypeVar("T")

THREADS_ENV = "ENSEMBLE_OLS_THREADS"


def derive_rng(seed: int, *counters: int) -> np.random.Generator:
    """Generator for the stream identified by ``seed`` and ``counters``."""
    ss = np.random.SeedSequence(int(seed) & ((1 << 64) - 1), spawn_key=tuple(int(c) for c in counters))
    return np.random.Generator(np.random.PCG64(ss))


def as_rng(rng: np.random.Generator | int | None) -> np.random.Generator:
    if isinstance(rng, np.random.Generator):
        return rng
    return derive_rng(0 if rng is None else rng)


def resolve_threads(threads: int | None = None) -> int:
    """Worker count: explicit value, else the environment variable, else 1.

    ``0`` means one worker per available core.
    """
    if threads is None:
        env = os.environ.get(THREADS_ENV, "").strip()
        threads = int(env) if env else 1
    if threads < 0:
        raise ValueError("threads must be >= 0")
    if threads == 0:
        threads = os.cpu_count() or 1
    return threads


def ordered_map(fn: Callable[[int], T], indices: Sequence[int] | Iterable[int],
                threads: int | None = None) -> list[T]:
    """Apply ``fn`` to each index, returning results in index order."""
    indices = list(indices)
    n_workers = resolve_threads(threads)
    if n_workers == 1 or len(indices) <= 1:
        return [fn(i) for i in indices]
    with ThreadPoolExecutor(max_workers=n_workers) as pool:
        return list(pool.map(fn, indices))
