"""Brute-force Monte Carlo oracles for the closed-form risk expressions.

Every estimator here averages per-trial samples drawn from streams derived
from ``(seed, trial)``; aggregation is in trial order, so a run is fully
determined by its seed and arguments.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .datagen import ProblemInstance, ProblemSpec, draw_beta, generate_problem
from .errors import DimensionMismatch, InfeasibleSizes
from .estimators import member_pinv
from .risk_theory import PairSizes, Term, finite_pair_term
from .sampling import SubsampleScheme, SubsetPair, draw_subsets, sample_without_replacement
from .streams import derive_rng, ordered_map

# stream labels keep the different oracles statistically independent for one seed
_PAIR_STREAM = 1
_LEMMA_STREAM = 2
_TEST_FUNCTION_STREAM = 3
_CONVERGENCE_STREAM = 4
_NOISE_STREAM = 5

DEFAULT_Z_TOL = 4.0


@dataclass
class MCReport:
    """Monte Carlo estimate with its standard error and optional theory value.

    For entrywise matrix checks the report describes the entry with the
    largest ``|z_score|``.
    """

    estimate: float
    std_error: float
    trials: int
    theory_value: float | None = None
    z_score: float | None = None
    name: str = ""
    skipped: bool = False

    @classmethod
    def from_samples(cls, samples: Sequence[float] | np.ndarray, theory_value: float | None = None,
                     name: str = "") -> "MCReport":
        x = np.asarray(samples, dtype=float)
        if x.size == 0:
            raise ValueError("no samples")
        est = float(np.mean(x))
        se = float(np.std(x, ddof=1) / math.sqrt(x.size)) if x.size > 1 else math.inf
        return cls(estimate=est, std_error=se, trials=int(x.size), theory_value=theory_value,
                   z_score=_z(est, se, theory_value), name=name)

    @classmethod
    def skip(cls, name: str) -> "MCReport":
        return cls(estimate=math.nan, std_error=math.nan, trials=0, name=name, skipped=True)

    def passed(self, tol: float = DEFAULT_Z_TOL) -> bool:
        return self.skipped or self.z_score is None or abs(self.z_score) <= tol

    def to_record(self) -> dict:
        rec = asdict(self)
        for key, val in rec.items():
            if isinstance(val, float) and not math.isfinite(val):
                rec[key] = None
        return rec


def _z(estimate: float, se: float, theory: float | None) -> float | None:
    if theory is None:
        return None
    if se > 0:
        return (estimate - theory) / se
    return 0.0 if estimate == theory else math.copysign(math.inf, estimate - theory)


@dataclass
class RiskBreakdown:
    bias: float
    variance: float
    risk: float


def empirical_risk(beta: np.ndarray, beta_hat: np.ndarray) -> float:
    """Out-of-sample risk ``||beta - beta_hat||^2`` under isotropic features."""
    beta = np.asarray(beta, dtype=float)
    beta_hat = np.asarray(beta_hat, dtype=float)
    if beta.shape != beta_hat.shape:
        raise DimensionMismatch(f"{beta.shape} vs {beta_hat.shape}")
    d = beta - beta_hat
    return float(d @ d)


def bias_variance_decomposition(f: np.ndarray, X: np.ndarray, beta: np.ndarray, sigma: float) -> RiskBreakdown:
    """Exact noise-averaged risk of the linear predictor ``f @ y``."""
    p, n = f.shape
    if X.shape != (n, p) or beta.shape != (p,):
        raise DimensionMismatch(f"f {f.shape}, X {X.shape}, beta {beta.shape}")
    r = beta - f @ (X @ beta)
    bias = float(r @ r)
    variance = float(sigma**2 * np.sum(f * f))
    return RiskBreakdown(bias=bias, variance=variance, risk=bias + variance)


def noise_averaged_risk(f: np.ndarray, X: np.ndarray, beta: np.ndarray, sigma: float, trials: int,
                        seed: int = 0) -> MCReport:
    """Average ``empirical_risk`` of ``f @ (X beta + sigma z)`` over fresh noise draws."""
    rng = derive_rng(seed, _NOISE_STREAM)
    signal = X @ beta
    Z = rng.standard_normal((trials, X.shape[0]))
    est = (signal[None, :] + sigma * Z) @ f.T
    d = beta[None, :] - est
    return MCReport.from_samples(np.einsum("ij,ij->i", d, d), name="noise_averaged_risk")


# ---------------------------------------------------------------------------
# pairwise terms


def _scatter_map(pinv: np.ndarray, pair: SubsetPair, p: int, n: int) -> np.ndarray:
    F = np.zeros((p, n))
    F[np.ix_(pair.S, pair.T)] = pinv
    return F


def prescribed_pairs(sizes: PairSizes, rng: np.random.Generator) -> tuple[SubsetPair, SubsetPair]:
    """Two subset pairs with exactly the requested overlap structure.

    ``[p]`` is split into the blocks ``S_i & S_j``, ``S_i - S_j``,
    ``S_j - S_i`` and the common complement with randomly shuffled labels;
    the example subsets are independent fixed-size draws.
    """
    p, n = sizes.p, sizes.n
    perm = rng.permutation(p)
    own = sizes.s_ii - sizes.s_cap
    cap = perm[: sizes.s_cap]
    only_i = perm[sizes.s_cap : sizes.s_cap + own]
    only_j = perm[sizes.s_cap + own : sizes.s_cap + 2 * own]
    Si = np.sort(np.concatenate([cap, only_i]))
    Sj = np.sort(np.concatenate([cap, only_j]))
    Ti = sample_without_replacement(rng, n, sizes.t_ii)
    Tj = sample_without_replacement(rng, n, sizes.t_ii)
    return SubsetPair(Si, Ti), SubsetPair(Sj, Tj)


def estimate_pair_terms(spec: ProblemSpec, sizes: PairSizes, trials: int, seed: int = 0,
                        threads: int | None = None) -> tuple[MCReport, MCReport, MCReport, MCReport]:
    """Monte Carlo estimates of ``(bias_ii, bias_ij, var_ii, var_ij)`` with closed forms attached.

    Each trial draws a fresh design, a fresh ``beta`` and two members whose
    subsets have the prescribed cardinalities, then evaluates the pairwise
    inner products exactly (no noise sampling).
    """
    try:
        sizes.validate()
    except ValueError as exc:
        raise InfeasibleSizes(str(exc)) from exc
    if not sizes.pair_feasible:
        raise InfeasibleSizes(f"s_cap + 2(s_ii - s_cap) + sc_cap must equal p, got {sizes}")
    if (sizes.n, sizes.p) != (spec.n, spec.p):
        raise InfeasibleSizes(f"sizes are for n={sizes.n}, p={sizes.p} but spec has n={spec.n}, p={spec.p}")
    if trials < 2:
        raise ValueError("need at least 2 trials")
    n, p, sigma = spec.n, spec.p, spec.sigma

    def one(trial: int) -> tuple[float, float, float, float]:
        rng = derive_rng(seed, _PAIR_STREAM, trial)
        X = rng.standard_normal((n, p))
        beta = draw_beta(p, spec.beta_mode, rng)
        pi, pj = prescribed_pairs(sizes, rng)
        Fi = _scatter_map(member_pinv(X, pi)[0], pi, p, n)
        Fj = _scatter_map(member_pinv(X, pj)[0], pj, p, n)
        Xb = X @ beta
        ri = beta - Fi @ Xb
        rj = beta - Fj @ Xb
        return (float(ri @ ri), float(ri @ rj), sigma**2 * float(np.sum(Fi * Fi)), sigma**2 * float(np.sum(Fi * Fj)))

    samples = np.array(ordered_map(one, range(trials), threads))
    # E||beta||^2 = 1 under both beta modes
    theory = [
        finite_pair_term(Term.BIAS, True, sizes, sigma),
        finite_pair_term(Term.BIAS, False, sizes, sigma),
        finite_pair_term(Term.VARIANCE, True, sizes, sigma),
        finite_pair_term(Term.VARIANCE, False, sizes, sigma),
    ]
    names = ("bias_ii", "bias_ij", "var_ii", "var_ij")
    reports = [MCReport.from_samples(samples[:, c], theory[c], names[c]) for c in range(4)]
    if sigma == 0:
        for rep in reports[2:]:
            rep.std_error = 0.0
            rep.z_score = _z(rep.estimate, 0.0, rep.theory_value)
    return tuple(reports)


# ---------------------------------------------------------------------------
# matrix identities


class _EntryAccumulator:
    """Running entrywise mean and SE of ``sample - target`` for a matrix statistic."""

    def __init__(self, target: np.ndarray, mask: np.ndarray | None = None):
        self.target = np.asarray(target, dtype=float)
        self.mask = np.ones(self.target.shape, bool) if mask is None else mask
        self.s1 = np.zeros_like(self.target)
        self.s2 = np.zeros_like(self.target)
        self.count = 0

    def add(self, batch: np.ndarray) -> None:
        d = batch - self.target
        self.s1 += d.sum(axis=0)
        self.s2 += np.einsum("b...,b...->...", d, d)
        self.count += batch.shape[0]

    def report(self, name: str) -> MCReport:
        m = self.count
        mean = self.s1 / m
        var = (self.s2 - m * mean**2) / (m - 1)
        se = np.sqrt(np.maximum(var, 0.0) / m)
        with np.errstate(divide="ignore", invalid="ignore"):
            z = np.where(se > 0, mean / se, np.where(mean == 0, 0.0, np.inf))
        z = np.where(self.mask, z, 0.0)
        idx = np.unravel_index(int(np.argmax(np.abs(z))), z.shape)
        return MCReport(estimate=float(mean[idx] + self.target[idx]), std_error=float(se[idx]), trials=m,
                        theory_value=float(self.target[idx]), z_score=float(z[idx]), name=name)


def _chunks(trials: int, size: int) -> Iterable[int]:
    done = 0
    while done < trials:
        step = min(size, trials - done)
        yield step
        done += step


def _batched_pinv_tall(A: np.ndarray) -> np.ndarray:
    """Pseudoinverses of a stack of full-column-rank tall matrices."""
    At = np.swapaxes(A, -1, -2)
    return np.linalg.solve(At @ A, At)


def column_subselect_checks(n: int, p: int, subset_size: int, trials: int, seed: int = 0,
                  chunk: int = 4000) -> list[MCReport]:
    """Column-subselection identities, holding ``X S`` fixed and averaging over ``X S^c``.

    (a) ``E[S^T X^+] = (X S)^+``;
    (b) ``E[S^c^T X^T f(X S) S^T X^+] = 0`` with ``f(M) = M + F`` for a
    fixed standard normal ``F``.
    """
    s = subset_size
    if not n > p:
        raise InfeasibleSizes(f"need n > p for X^+ = (X^T X)^-1 X^T, got n={n}, p={p}")
    if s == p:
        return [MCReport.skip("column_a_subselect"), MCReport.skip("column_b_orthogonal")]
    rng = derive_rng(seed, _LEMMA_STREAM, 3)
    fixed = derive_rng(seed, _TEST_FUNCTION_STREAM)
    perm = fixed.permutation(p)
    S, Sc = np.sort(perm[:s]), np.sort(perm[s:])
    XS = fixed.standard_normal((n, s))
    F = fixed.standard_normal((n, s))
    fXS = XS + F
    XS_pinv = np.linalg.pinv(XS)
    acc_a = _EntryAccumulator(XS_pinv)
    acc_b = _EntryAccumulator(np.zeros((p - s, n)))
    for b in _chunks(trials, chunk):
        X = np.empty((b, n, p))
        X[:, :, S] = XS
        X[:, :, Sc] = rng.standard_normal((b, n, p - s))
        Xp = _batched_pinv_tall(X)
        SXp = Xp[:, S, :]
        acc_a.add(SXp)
        XSc_T = np.swapaxes(X[:, :, Sc], -1, -2)
        acc_b.add(XSc_T @ fXS @ SXp)
    return [acc_a.report("column_a_subselect"), acc_b.report("column_b_orthogonal")]


def row_subselect_checks(n: int, p: int, subset_size: int, trials: int, seed: int = 0,
                  example_size: int | None = None, chunk: int = 2000) -> list[MCReport]:
    """Row-subselection identities for independent fixed-size ``T_1, T_2`` and fixed designs.

    Claim 1 compares ``E[(T1^T X)^+ T1^T ((T2^T X)^+ T2^T)^T]`` with
    ``(X^T X)^+`` for ``X = X S``. Claim 2 compares
    ``E[((T1^T X)^+ T1^T)^T A (T2^T Y)^+ T2^T]`` with ``(X^+)^T A Y^+`` for
    ``Y = X S^c`` and a fixed standard normal ``A``; it is skipped when
    ``S^c`` is empty.
    """
    s = subset_size
    q = p - s
    t = example_size if example_size is not None else min(n, max(n // 2, max(s, q) + 2))
    if not max(s, q) < t <= n:
        raise InfeasibleSizes(f"example subset size {t} must exceed max(|S|, |S^c|) and be <= n")
    rng = derive_rng(seed, _LEMMA_STREAM, 4)
    fixed = derive_rng(seed, _TEST_FUNCTION_STREAM, 4)
    Xfull = fixed.standard_normal((n, p))
    XS, Y = Xfull[:, :s], Xfull[:, s:]
    A = fixed.standard_normal((s, q))
    acc1 = _EntryAccumulator(np.linalg.pinv(XS.T @ XS))
    acc2 = _EntryAccumulator(np.linalg.pinv(XS).T @ A @ np.linalg.pinv(Y)) if q > 0 else None
    for b in _chunks(trials, chunk):
        T1 = np.stack([sample_without_replacement(rng, n, t) for _ in range(b)])
        T2 = np.stack([sample_without_replacement(rng, n, t) for _ in range(b)])

        def gather(M: np.ndarray, T: np.ndarray) -> np.ndarray:
            # (T^T M)^+ T^T as a stack of |cols| x n maps
            P = _batched_pinv_tall(M[T])
            out = np.zeros((b, M.shape[1], n))
            np.put_along_axis(out, np.broadcast_to(T[:, None, :], P.shape), P, axis=2)
            return out

        G1 = gather(XS, T1)
        G2 = gather(XS, T2)
        acc1.add(G1 @ np.swapaxes(G2, -1, -2))
        if acc2 is not None:
            H2 = gather(Y, T2)
            acc2.add(np.swapaxes(G1, -1, -2) @ A @ H2)
    reports = [acc1.report("row_claim1")]
    reports.append(acc2.report("row_claim2") if acc2 is not None else MCReport.skip("row_claim2"))
    return reports


def wishart_checks(n: int, subset_size: int, trials: int, seed: int = 0, chunk: int = 5000) -> list[MCReport]:
    """Inverse-Wishart means for an ``n x s`` standard normal block ``M``.

    (d) ``E[(M^T M)^{-1}] = I / (n - s - 1)``;
    (e) ``E[(M M^T)^+] = s / (n (n - s - 1)) I``.
    """
    s = subset_size
    if not n > s + 1:
        raise InfeasibleSizes(f"need n > |S| + 1, got n={n}, |S|={s}")
    rng = derive_rng(seed, _LEMMA_STREAM, 5)
    upper_s = np.triu(np.ones((s, s), bool))
    upper_n = np.triu(np.ones((n, n), bool))
    acc_d = _EntryAccumulator(np.eye(s) / (n - s - 1), upper_s)
    acc_e = _EntryAccumulator(np.eye(n) * s / (n * (n - s - 1)), upper_n)
    for b in _chunks(trials, chunk):
        M = rng.standard_normal((b, n, s))
        Ginv = np.linalg.inv(np.swapaxes(M, -1, -2) @ M)
        acc_d.add(Ginv)
        # (M M^T)^+ = M G^{-2} M^T for full column rank M
        acc_e.add(M @ (Ginv @ Ginv) @ np.swapaxes(M, -1, -2))
    return [acc_d.report("wishart_d_inverse_gram"), acc_e.report("wishart_e_outer_pinv")]


def lemma_identity_checks(n: int, p: int, subset_size: int, trials: int, seed: int = 0,
                          wishart_n: int | None = None, wishart_subset: int | None = None) -> list[MCReport]:
    """All matrix identity checks; each report carries the worst entrywise z-score."""
    if not n > subset_size + 1:
        raise InfeasibleSizes(f"need n > |S| + 1, got n={n}, |S|={subset_size}")
    if not 0 <= subset_size <= p:
        raise InfeasibleSizes(f"need 0 <= |S| <= p, got |S|={subset_size}, p={p}")
    reports = column_subselect_checks(n, p, subset_size, trials, seed)
    reports += row_subselect_checks(n, p, subset_size, trials, seed)
    reports += wishart_checks(wishart_n or n, wishart_subset or subset_size, trials, seed)
    return reports


# ---------------------------------------------------------------------------
# min-norm members


def estimate_interpolator_variance(n: int, p: int, alpha: float, eta: float, sigma: float, trials: int,
                                   seed: int = 0, threads: int | None = None) -> tuple[MCReport, MCReport]:
    """``(var_ii, var_ij)`` for min-norm members with ``|T| < |S|``.

    Per trial: a fresh design and two independent fixed-size subset pairs;
    the variance terms are ``sigma^2 <F_i, F_j>`` for the exact linear maps.
    """
    s, t = math.floor(alpha * p + 1e-9), math.floor(eta * n + 1e-9)
    if not t < s:
        raise InfeasibleSizes(f"min-norm members need |T| < |S|, got |S|={s}, |T|={t}")

    def one(trial: int) -> tuple[float, float]:
        rng = derive_rng(seed, _PAIR_STREAM, 10**9 + trial)
        X = rng.standard_normal((n, p))
        pairs = [SubsetPair(sample_without_replacement(rng, p, s), sample_without_replacement(rng, n, t))
                 for _ in range(2)]
        Fi, Fj = (_scatter_map(member_pinv(X, pr)[0], pr, p, n) for pr in pairs)
        return sigma**2 * float(np.sum(Fi * Fi)), sigma**2 * float(np.sum(Fi * Fj))

    samples = np.array(ordered_map(one, range(trials), threads))
    return (MCReport.from_samples(samples[:, 0], name="interp_var_ii"),
            MCReport.from_samples(samples[:, 1], name="interp_var_ij"))


# ---------------------------------------------------------------------------
# risk versus ensemble size


@dataclass
class ConvergenceTable:
    """Per-trial empirical risks, one column per ensemble size."""

    k_grid: list[int]
    risks: np.ndarray
    skipped: bool = False
    meta: dict = field(default_factory=dict)

    @property
    def trials(self) -> int:
        return int(self.risks.shape[0])

    def mean(self) -> np.ndarray:
        return self.risks.mean(axis=0)

    def se(self) -> np.ndarray:
        return self.risks.std(axis=0, ddof=1) / math.sqrt(self.trials)

    def rows(self) -> list[dict]:
        if self.skipped:
            return [{"k": k, "mean_risk": math.nan, "se": math.nan} for k in self.k_grid]
        m, s = self.mean(), self.se()
        return [{"k": k, "mean_risk": float(m[c]), "se": float(s[c])} for c, k in enumerate(self.k_grid)]


def ensemble_risk_path(inst: ProblemInstance, scheme: SubsampleScheme, k_grid: Sequence[int],
                       rng: np.random.Generator) -> np.ndarray:
    """Empirical risk of the prefix ensembles of sizes ``k_grid`` built from one member sequence."""
    from .estimators import fit_subsampled_ols

    k_max = max(k_grid)
    pairs = [draw_subsets(scheme, inst.p, inst.n, rng) for _ in range(k_max)]
    total = np.zeros(inst.p)
    out = np.empty(len(k_grid))
    wanted = {k: c for c, k in enumerate(k_grid)}
    for i, pair in enumerate(pairs, start=1):
        total += fit_subsampled_ols(inst, pair).coef
        if i in wanted:
            out[wanted[i]] = empirical_risk(inst.beta, total / i)
    return out


def risk_convergence_sim(spec: ProblemSpec, scheme: SubsampleScheme, k_grid: Sequence[int], trials: int,
                         seed: int | None = None, threads: int | None = None) -> ConvergenceTable:
    """Mean empirical ensemble risk across trials for each ``k`` in ``k_grid``.

    Each trial draws a fresh design, ``beta`` and noise, then one sequence of
    ``max(k_grid)`` members; the size-``k`` ensemble averages the first ``k``.
    """
    k_grid = sorted({int(k) for k in k_grid})
    if not k_grid or k_grid[0] < 1:
        raise ValueError("k_grid must contain positive integers")
    if trials < 2:
        raise ValueError("need at least 2 trials")
    seed = spec.seed if seed is None else seed
    if not scheme.is_feasible(spec.p, spec.n):
        return ConvergenceTable(k_grid, np.full((trials, len(k_grid)), np.nan), skipped=True)

    def one(trial: int) -> np.ndarray:
        rng = derive_rng(seed, _CONVERGENCE_STREAM, trial)
        inst = generate_problem(spec, rng)
        return ensemble_risk_path(inst, scheme, k_grid, rng)

    risks = np.array(ordered_map(one, range(trials), threads))
    return ConvergenceTable(k_grid, risks)


# ---------------------------------------------------------------------------
# dropout


def dropout_pair_moments(alpha_vec: np.ndarray) -> np.ndarray:
    """``E[d_j d_l]`` for independent Bernoulli keep masks, by enumerating each pair's outcomes."""
    a = np.asarray(alpha_vec, dtype=float)
    p = a.size
    out = np.empty((p, p))
    for j in range(p):
        for l in range(p):
            if j == l:
                # d_j^2 = d_j
                out[j, l] = sum(v * v * pr for v, pr in ((0, 1 - a[j]), (1, a[j])))
            else:
                out[j, l] = sum(vj * vl * pj * pl for vj, pj in ((0, 1 - a[j]), (1, a[j]))
                                for vl, pl in ((0, 1 - a[l]), (1, a[l])))
    return out


def dropout_gradient_oracle(X: np.ndarray, y: np.ndarray, alpha_vec: np.ndarray, tol: float = 1e-13,
                            max_iter: int = 200_000) -> np.ndarray:
    """Minimize the expected masked loss ``E||X D b - y||^2`` by accelerated gradient descent."""
    a = np.asarray(alpha_vec, dtype=float)
    G = X.T @ X
    H = G * dropout_pair_moments(a)
    g0 = a * (X.T @ y)
    L = float(np.linalg.eigvalsh(H)[-1])
    mu_ = float(np.linalg.eigvalsh(H)[0])
    step = 1.0 / L
    q = mu_ / L
    momentum = (1 - math.sqrt(q)) / (1 + math.sqrt(q))
    b = np.zeros_like(g0)
    prev = b.copy()
    scale = max(np.linalg.norm(g0), 1.0)
    for _ in range(max_iter):
        v = b + momentum * (b - prev)
        grad = H @ v - g0
        prev = b
        b = v - step * grad
        if np.linalg.norm(H @ b - g0) <= tol * scale:
            break
    return b
