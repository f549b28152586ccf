"""Random feature/example subsets for ensemble members.

Subsets are sorted ``int64`` index arrays. A selection matrix product such as
``T.T @ X @ S`` is therefore the gather ``X[np.ix_(T, S)]``.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import ConstraintInfeasible, EmptyInput, InvalidDimensions, RejectionBudgetExhausted


class Strategy(str, enum.Enum):
    FIXED_SIZE = "fixed"
    COIN_FLIP = "coin"


@dataclass(frozen=True)
class SubsampleScheme:
    """Feature rate ``alpha``, example rate ``eta`` and how subsets are drawn.

    ``max_rejects`` bounds the redraws of the coin-flip strategy.
    """

    alpha: float
    eta: float = 1.0
    strategy: Strategy = Strategy.FIXED_SIZE
    max_rejects: int = 1000

    def __post_init__(self):
        if not 0.0 <= self.alpha <= 1.0:
            raise ValueError(f"alpha must lie in [0, 1], got {self.alpha}")
        if not 0.0 < self.eta <= 1.0:
            raise ValueError(f"eta must lie in (0, 1], got {self.eta}")
        if self.max_rejects < 1:
            raise ValueError("max_rejects must be positive")
        object.__setattr__(self, "strategy", Strategy(self.strategy))

    def sizes(self, p: int, n: int) -> tuple[int, int]:
        """Fixed-size cardinalities ``(floor(alpha p), floor(eta n))``."""
        # the small nudge keeps e.g. 0.3 * 10 from flooring to 2
        return (math.floor(self.alpha * p + 1e-9), math.floor(self.eta * n + 1e-9))

    def is_feasible(self, p: int, n: int) -> bool:
        if self.strategy is Strategy.COIN_FLIP:
            return True
        s, t = self.sizes(p, n)
        return s < t - 1


@dataclass(frozen=True)
class SubsetPair:
    """Feature subset ``S`` over ``[p]`` and example subset ``T`` over ``[n]``."""

    S: np.ndarray
    T: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "S", np.asarray(self.S, dtype=np.int64))
        object.__setattr__(self, "T", np.asarray(self.T, dtype=np.int64))

    @property
    def s(self) -> int:
        return int(self.S.size)

    @property
    def t(self) -> int:
        return int(self.T.size)


def sample_without_replacement(rng: np.random.Generator, population: int, size: int) -> np.ndarray:
    """Sorted uniform ``size``-subset of ``range(population)``.

    Partial Fisher-Yates: only the first ``size`` positions are shuffled.
    """
    if not 0 <= size <= population:
        raise ValueError(f"cannot draw {size} items from {population}")
    pool = np.arange(population, dtype=np.int64)
    if size == 0:
        return pool[:0]
    swaps = rng.integers(np.arange(size), population)
    for i, j in enumerate(swaps.tolist()):
        pool[i], pool[j] = pool[j], pool[i]
    return np.sort(pool[:size])


def draw_subsets(scheme: SubsampleScheme, p: int, n: int, rng: np.random.Generator) -> SubsetPair:
    """Draw one ``(S, T)`` pair satisfying ``|S| < |T| - 1``.

    Raises
    ------
    ConstraintInfeasible
        Fixed-size strategy with ``floor(alpha p) >= floor(eta n) - 1``.
    RejectionBudgetExhausted
        Coin-flip strategy failed ``max_rejects`` times in a row.
    """
    if p < 1 or n < 3:
        raise InvalidDimensions(f"need p >= 1 and n >= 3, got p={p}, n={n}")
    if scheme.strategy is Strategy.FIXED_SIZE:
        s, t = scheme.sizes(p, n)
        if s >= t - 1:
            raise ConstraintInfeasible(f"|S|={s} is not below |T|-1={t - 1} (alpha={scheme.alpha}, eta={scheme.eta})")
        S = sample_without_replacement(rng, p, s)
        T = sample_without_replacement(rng, n, t)
        return SubsetPair(S, T)

    for _ in range(scheme.max_rejects):
        S = np.flatnonzero(rng.random(p) < scheme.alpha)
        T = np.flatnonzero(rng.random(n) < scheme.eta)
        if S.size < T.size - 1:
            return SubsetPair(S, T)
    raise RejectionBudgetExhausted(
        f"no admissible coin-flip draw in {scheme.max_rejects} attempts (alpha={scheme.alpha}, eta={scheme.eta}, p={p}, n={n})"
    )


def inclusion_stats(draws: Sequence[SubsetPair], p: int, n: int) -> tuple[np.ndarray, np.ndarray]:
    """Empirical inclusion frequency of every feature and every example index."""
    if len(draws) == 0:
        raise EmptyInput("inclusion_stats needs at least one draw")
    feat = np.zeros(p)
    ex = np.zeros(n)
    for pair in draws:
        feat[pair.S] += 1
        ex[pair.T] += 1
    return feat / len(draws), ex / len(draws)
