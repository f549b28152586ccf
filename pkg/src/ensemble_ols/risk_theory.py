"""Closed-form risk of subsampled OLS ensembles.

Notation: ``alpha`` feature rate, ``eta`` example rate, ``gamma = p/n``,
``sigma`` noise level, ``k`` ensemble size, ``mu`` output scale. All
expressions assume isotropic features and ``||beta|| = 1`` unless a
``beta_norm_sq`` argument says otherwise. Evaluation outside a formula's
domain raises :class:`DomainError` rather than returning ``inf``.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

from .errors import DegenerateDenominator, DomainError, InfeasibleInterval


class Term(str, enum.Enum):
    BIAS = "bias"
    VARIANCE = "variance"


class _Infinite(enum.Enum):
    INFINITE = "inf"

    def __repr__(self):
        return "K_INF"


#: Marker for the k -> infinity (large-ensemble) query.
K_INF = _Infinite.INFINITE


@dataclass(frozen=True)
class TheoryQuery:
    alpha: float
    eta: float = 1.0
    gamma: float = 1.0
    sigma: float = 1.0
    k: int | _Infinite = K_INF
    mu: float = 1.0

    def __post_init__(self):
        if not self.gamma > 0:
            raise DomainError(f"gamma must be positive, got {self.gamma}")
        if self.sigma < 0:
            raise DomainError(f"sigma must be >= 0, got {self.sigma}")
        if self.k is not K_INF and (int(self.k) != self.k or self.k < 1):
            raise DomainError(f"k must be a positive integer or K_INF, got {self.k}")


@dataclass(frozen=True)
class PairSizes:
    """Cardinalities entering the pairwise terms of two members ``i`` and ``j``.

    ``s_ii = |S_i|``, ``t_ii = |T_i|``, ``s_cap = |S_i & S_j|`` and
    ``sc_cap`` the number of features in neither subset.
    """

    s_ii: int
    t_ii: int
    s_cap: int
    sc_cap: int
    n: int
    p: int

    def validate(self) -> None:
        if not 0 <= self.s_cap <= self.s_ii <= self.p:
            raise DomainError(f"need 0 <= s_cap <= s_ii <= p, got {self}")
        if not 0 <= self.sc_cap <= self.p - self.s_ii:
            raise DomainError(f"need 0 <= sc_cap <= p - s_ii, got {self}")
        if not self.s_ii < self.t_ii - 1:
            raise DomainError(f"need s_ii < t_ii - 1, got {self}")
        if not self.s_cap < self.n - 1:
            raise DomainError(f"need s_cap < n - 1, got {self}")
        if self.t_ii > self.n:
            raise DomainError(f"t_ii cannot exceed n, got {self}")

    @property
    def pair_feasible(self) -> bool:
        """Whether two equal-size feature subsets with these overlaps fit in ``[p]``."""
        return self.s_cap + 2 * (self.s_ii - self.s_cap) + self.sc_cap == self.p


def finite_pair_term(kind: Term | str, same_member: bool, sizes: PairSizes, sigma: float = 1.0,
                     beta_norm_sq: float = 1.0) -> float:
    """Expected pairwise bias or variance term at finite ``n, p``."""
    kind = Term(kind)
    sizes.validate()
    n, p = sizes.n, sizes.p
    if same_member:
        denom = sizes.t_ii - sizes.s_ii - 1
        inflation = sizes.s_ii / denom
        if kind is Term.BIAS:
            return (p - sizes.s_ii) / p * (1.0 + inflation) * beta_norm_sq
        return sigma**2 * inflation
    denom = n - sizes.s_cap - 1
    if denom <= 0:
        raise DomainError("n - s_cap - 1 must be positive")
    inflation = sizes.s_cap / denom
    if kind is Term.BIAS:
        return sizes.sc_cap / p * (1.0 + inflation) * beta_norm_sq
    return sigma**2 * inflation


def _check_limits(alpha: float, eta: float, gamma: float) -> None:
    if not 0 <= alpha <= 1:
        raise DomainError(f"alpha must lie in [0, 1], got {alpha}")
    if not 0 < eta <= 1:
        raise DomainError(f"eta must lie in (0, 1], got {eta}")
    if not eta > alpha * gamma:
        raise DomainError(f"need eta > alpha*gamma, got eta={eta}, alpha*gamma={alpha * gamma}")
    if not alpha**2 * gamma < 1:
        raise DomainError(f"need alpha^2*gamma < 1, got {alpha**2 * gamma}")


def limiting_pair_term(kind: Term | str, same_member: bool, q: TheoryQuery) -> float:
    """Almost-sure limit of the expected pairwise term as ``n, p -> inf``."""
    kind = Term(kind)
    a, eta, g, s2 = q.alpha, q.eta, q.gamma, q.sigma**2
    _check_limits(a, eta, g)
    if same_member:
        if kind is Term.BIAS:
            return (1 - a) * (1 + a * g / (eta - a * g))
        return s2 * a * g / (eta - a * g)
    if kind is Term.BIAS:
        return (1 - a) ** 2 * (1 + a**2 * g / (1 - a**2 * g))
    return s2 * a**2 * g / (1 - a**2 * g)


def large_ensemble_risk(alpha: float, gamma: float, sigma: float) -> float:
    """``((1-alpha)^2 + sigma^2 alpha^2 gamma) / (1 - alpha^2 gamma)``."""
    if not alpha**2 * gamma < 1:
        raise DomainError(f"need alpha^2*gamma < 1, got {alpha**2 * gamma}")
    return ((1 - alpha) ** 2 + sigma**2 * alpha**2 * gamma) / (1 - alpha**2 * gamma)


def limiting_bias(q: TheoryQuery) -> float:
    if q.k is K_INF:
        return limiting_pair_term(Term.BIAS, False, q)
    w = 1.0 / q.k
    return (1 - w) * limiting_pair_term(Term.BIAS, False, q) + w * limiting_pair_term(Term.BIAS, True, q)


def limiting_variance(q: TheoryQuery) -> float:
    if q.k is K_INF:
        return limiting_pair_term(Term.VARIANCE, False, q)
    w = 1.0 / q.k
    return (1 - w) * limiting_pair_term(Term.VARIANCE, False, q) + w * limiting_pair_term(Term.VARIANCE, True, q)


def ensemble_risk(q: TheoryQuery) -> float:
    """Limiting risk of a k-member ensemble; ``K_INF`` gives the large-ensemble risk."""
    if q.k is K_INF:
        return large_ensemble_risk(q.alpha, q.gamma, q.sigma)
    a, eta, g, s2 = q.alpha, q.eta, q.gamma, q.sigma**2
    _check_limits(a, eta, g)
    shared = ((1 - a) ** 2 + s2 * a**2 * g) / (1 - a**2 * g)
    own = (eta * (1 - a) + s2 * a * g) / (eta - a * g)
    return (q.k - 1) / q.k * shared + own / q.k


def optimal_alpha(gamma: float, sigma: float) -> float:
    """Minimizer of the large-ensemble risk (smaller root of its stationarity quadratic)."""
    if not gamma > 0:
        raise DomainError(f"gamma must be positive, got {gamma}")
    b = gamma * (sigma**2 + 1) + 1
    # discriminant rewritten as a sum of squares; never negative
    disc = (gamma * (sigma**2 - 1) + 1) ** 2 + 4 * sigma**2 * gamma**2
    root = math.sqrt(disc)
    # (b - root)/(2 gamma) cancels badly when 4*gamma << b^2; use the product of roots instead
    return 2.0 / (b + root)


def alpha_quadratic_residual(alpha: float, gamma: float, sigma: float) -> float:
    return alpha**2 * gamma - alpha * (gamma * (sigma**2 + 1) + 1) + 1


def optimal_ridge_risk(gamma: float, sigma: float) -> float:
    """Limiting risk of optimally tuned ridge under ``beta ~ N(0, I/p)``."""
    if not gamma > 0:
        raise DomainError(f"gamma must be positive, got {gamma}")
    c = (gamma - 1) / gamma
    s2 = sigma**2
    return 0.5 * (c - s2 + math.sqrt((s2 - c) ** 2 + 4 * s2))


def mu_scaled_risk(q: TheoryQuery) -> float:
    """Large-ensemble risk of the ensemble output multiplied by ``mu``."""
    r = large_ensemble_risk(q.alpha, q.gamma, q.sigma)
    mu = q.mu
    return mu**2 * r + (1 - mu) ** 2 + 2 * mu * (1 - mu) * (1 - q.alpha)


def optimal_mu(alpha: float, gamma: float, sigma: float) -> tuple[float, float]:
    """Return ``(mu_star, risk at mu_star)`` for the large-ensemble predictor."""
    r = large_ensemble_risk(alpha, gamma, sigma)
    denom = r + 2 * alpha - 1
    if abs(denom) < 1e-15:
        raise DegenerateDenominator(f"R_alpha + 2 alpha - 1 vanishes at alpha={alpha}")
    return alpha / denom, 1 - alpha**2 / denom


def interpolator_variance_term(same_member: bool, alpha: float, eta: float, gamma: float, sigma: float) -> float:
    """Limiting pairwise variance for min-norm members (``|T| < |S|``)."""
    s2 = sigma**2
    if same_member:
        if not alpha * gamma > eta:
            raise DomainError(f"need alpha*gamma > eta, got {alpha * gamma} <= {eta}")
        return s2 * eta / (alpha * gamma - eta)
    if not gamma > eta**2:
        raise DomainError(f"need gamma > eta^2, got {gamma} <= {eta**2}")
    return s2 * eta**2 / (gamma - eta**2)


_INVPHI = (math.sqrt(5) - 1) / 2


def golden_section(fn, lo: float, hi: float, tol: float = 1e-12, max_iter: int = 200) -> float:
    """Minimize a unimodal ``fn`` on ``[lo, hi]``."""
    a, b = lo, hi
    c = b - _INVPHI * (b - a)
    d = a + _INVPHI * (b - a)
    fc, fd = fn(c), fn(d)
    for _ in range(max_iter):
        if b - a <= tol * max(1.0, abs(a) + abs(b)):
            break
        if fc <= fd:
            b, d, fd = d, c, fc
            c = b - _INVPHI * (b - a)
            fc = fn(c)
        else:
            a, c, fc = c, d, fd
            d = a + _INVPHI * (b - a)
            fd = fn(d)
    return c if fc <= fd else d


def finite_k_optimal_alpha(gamma: float, sigma: float, eta: float, k: int, eps: float = 1e-6) -> float:
    """``alpha`` minimizing the k-member limiting risk on the feasible interval."""
    if not (gamma > 0 and 0 < eta <= 1 and k >= 1):
        raise DomainError(f"invalid arguments gamma={gamma}, eta={eta}, k={k}")
    upper = min(1.0, eta / gamma, 1.0 / math.sqrt(gamma))
    lo, hi = eps, upper - eps
    if not hi > lo:
        raise InfeasibleInterval(f"feasible alpha interval (0, {upper}) is empty after shrinking by {eps}")

    def risk(a: float) -> float:
        return ensemble_risk(TheoryQuery(alpha=a, eta=eta, gamma=gamma, sigma=sigma, k=k))

    return golden_section(risk, lo, hi)
