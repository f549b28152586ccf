"""Predictors: subsampled OLS members and their ensemble, ridge, dropout, min-norm members.

Member subproblems are solved with column-pivoted QR. If the pivoted ``R``
reveals numerical rank deficiency the solve falls back to an SVD
pseudoinverse (singular values below ``1e-10`` times the largest are
dropped) and the member is flagged.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla

from .datagen import ProblemInstance
from .errors import BudgetExceeded, DimensionMismatch, RankDeficient, RankDeficientWarning, SingularSystem
from .sampling import SubsampleScheme, SubsetPair, draw_subsets
from .streams import ordered_map

RCOND = 1e-10
MAP_BUDGET = 4_000_000


@dataclass(frozen=True)
class MemberFit:
    """One ensemble member; ``coef`` has length p and vanishes off ``pair.S``."""

    pair: SubsetPair
    coef: np.ndarray
    rank_deficient: bool = False


@dataclass
class EnsembleFit:
    members: list[MemberFit]
    mu: float = 1.0

    @property
    def k(self) -> int:
        return len(self.members)


def _svd_pinv(A: np.ndarray) -> np.ndarray:
    if A.size == 0:
        return np.zeros(A.shape[::-1])
    return np.linalg.pinv(A, rcond=RCOND)


def block_pinv(A: np.ndarray) -> tuple[np.ndarray, bool]:
    """Moore-Penrose pseudoinverse of a tall block, plus a rank-deficiency flag.

    Full column rank blocks go through pivoted QR (``A P = Q R`` so
    ``A^+ = P R^{-1} Q^T``); anything else through the SVD.
    """
    m, s = A.shape
    if s == 0:
        return np.zeros((0, m)), False
    if m < s:
        return _svd_pinv(A), True
    Q, R, piv = sla.qr(A, mode="economic", pivoting=True)
    diag = np.abs(np.diag(R))
    if diag[-1] <= RCOND * diag[0]:
        return _svd_pinv(A), True
    Rinv_Qt = sla.solve_triangular(R, Q.T)
    out = np.empty_like(Rinv_Qt)
    out[piv] = Rinv_Qt
    return out, False


def member_pinv(X: np.ndarray, pair: SubsetPair) -> tuple[np.ndarray, bool]:
    """``(T^T X S)^+`` as an ``|S| x |T|`` array."""
    A = X[np.ix_(pair.T, pair.S)]
    if pair.t < pair.s:
        return min_norm_pinv(A)
    return block_pinv(A)


def min_norm_pinv(A: np.ndarray) -> tuple[np.ndarray, bool]:
    """Pseudoinverse of a wide block (more columns than rows)."""
    pinv_t, flag = block_pinv(A.T)
    return pinv_t.T, flag


def _scatter(coef_S: np.ndarray, S: np.ndarray, p: int) -> np.ndarray:
    coef = np.zeros(p)
    coef[S] = coef_S
    return coef


def fit_subsampled_ols(inst: ProblemInstance, pair: SubsetPair) -> MemberFit:
    """Least-squares fit of ``y[T]`` on ``X[T][:, S]``, zero off ``S``."""
    if pair.s >= pair.t - 1:
        raise DimensionMismatch(f"OLS member needs |S| < |T| - 1, got |S|={pair.s}, |T|={pair.t}")
    A = inst.X[np.ix_(pair.T, pair.S)]
    b = inst.y[pair.T]
    if pair.s == 0:
        return MemberFit(pair, np.zeros(inst.p))
    Q, R, piv = sla.qr(A, mode="economic", pivoting=True)
    diag = np.abs(np.diag(R))
    if diag[-1] <= RCOND * diag[0]:
        warnings.warn(f"rank-deficient member submatrix {A.shape}; using SVD pseudoinverse", RankDeficientWarning, stacklevel=2)
        coef_S = _svd_pinv(A) @ b
        return MemberFit(pair, _scatter(coef_S, pair.S, inst.p), rank_deficient=True)
    sol = sla.solve_triangular(R, Q.T @ b)
    coef_S = np.empty_like(sol)
    coef_S[piv] = sol
    return MemberFit(pair, _scatter(coef_S, pair.S, inst.p))


def fit_min_norm_member(inst: ProblemInstance, pair: SubsetPair) -> MemberFit:
    """Minimum-norm solution of the underdetermined member problem (``|T| < |S|``).

    With ``T = [n]`` the member interpolates the training data.
    """
    if pair.t >= pair.s:
        raise DimensionMismatch(f"min-norm member needs |T| < |S|, got |S|={pair.s}, |T|={pair.t}")
    A = inst.X[np.ix_(pair.T, pair.S)]
    pinv, flag = min_norm_pinv(A)
    if flag:
        if np.linalg.matrix_rank(A) == 0:
            raise RankDeficient("member submatrix is numerically zero")
        warnings.warn(f"rank-deficient member submatrix {A.shape}; using SVD pseudoinverse", RankDeficientWarning, stacklevel=2)
    return MemberFit(pair, _scatter(pinv @ inst.y[pair.T], pair.S, inst.p), rank_deficient=flag)


def fit_ensemble(inst: ProblemInstance, scheme: SubsampleScheme, k: int, rng: np.random.Generator,
                 threads: int | None = None) -> EnsembleFit:
    """Fit ``k`` members on independent subset draws.

    All ``k`` subset pairs are drawn from ``rng`` before any member is fit, so
    the result does not depend on how fitting is scheduled.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    pairs = [draw_subsets(scheme, inst.p, inst.n, rng) for _ in range(k)]
    fit = fit_min_norm_member if pairs and pairs[0].t < pairs[0].s else fit_subsampled_ols
    members = ordered_map(lambda i: fit(inst, pairs[i]), range(k), threads)
    return EnsembleFit(members=members, mu=1.0)


def ensemble_coefficients(fit: EnsembleFit) -> np.ndarray:
    """``(mu / k) * sum_i coef_i``."""
    total = np.sum([m.coef for m in fit.members], axis=0)
    return (fit.mu / fit.k) * total


def assemble_linear_map(fit: EnsembleFit, inst: ProblemInstance, budget: int = MAP_BUDGET) -> np.ndarray:
    """The p x n matrix ``f(X)`` with ``f(X) @ y == ensemble_coefficients(fit)``."""
    n, p = inst.X.shape
    if n * p > budget:
        raise BudgetExceeded(f"n*p = {n * p} exceeds the linear-map budget {budget}")
    F = np.zeros((p, n))
    for m in fit.members:
        pinv, _ = member_pinv(inst.X, m.pair)
        F[np.ix_(m.pair.S, m.pair.T)] += pinv
    return F * (fit.mu / fit.k)


def _solve_spd(M: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    try:
        return sla.solve(M, rhs, assume_a="pos")
    except (np.linalg.LinAlgError, sla.LinAlgError) as exc:
        raise SingularSystem(str(exc)) from exc


def fit_ridge(inst: ProblemInstance, lam: float) -> np.ndarray:
    """Solve ``(X^T X + lam I) b = X^T y``."""
    if lam < 0:
        raise ValueError("lambda must be >= 0")
    X, y = inst.X, inst.y
    if lam == 0 and np.linalg.matrix_rank(X) < X.shape[1]:
        raise SingularSystem("X^T X is singular and lambda = 0")
    G = X.T @ X
    G[np.diag_indices_from(G)] += lam
    return _solve_spd(G, X.T @ y)


def fit_generalized_dropout(inst: ProblemInstance, alpha_vec: np.ndarray, corrected: bool = False) -> np.ndarray:
    """Minimizer of the expected loss under independent per-feature keep probabilities.

    ``A^{-1} (X^T X + (I - A) A^{-1} diag(X^T X))^{-1} X^T y`` with
    ``A = diag(alpha_vec)``; ``corrected=True`` returns ``A`` times that.
    """
    X, y = inst.X, inst.y
    a = np.asarray(alpha_vec, dtype=float)
    if a.shape != (X.shape[1],):
        raise DimensionMismatch(f"alpha_vec has shape {a.shape}, expected ({X.shape[1]},)")
    if np.any(a <= 0) or np.any(a > 1):
        raise ValueError("every keep probability must lie in (0, 1]")
    G = X.T @ X
    M = G + np.diag((1.0 - a) / a * np.diag(G))
    b = _solve_spd(M, X.T @ y) / a
    return a * b if corrected else b


def fit_dropout(inst: ProblemInstance, alpha: float) -> np.ndarray:
    """``(1/alpha) (X^T X + ((1-alpha)/alpha) diag(X^T X))^{-1} X^T y``."""
    if not 0 < alpha <= 1:
        raise ValueError("alpha must lie in (0, 1]")
    X = inst.X
    G = X.T @ X
    M = G + (1.0 - alpha) / alpha * np.diag(np.diag(G))
    return _solve_spd(M, X.T @ inst.y) / alpha
