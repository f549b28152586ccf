"""Synthetic instances of ``y = X beta + sigma z`` with isotropic Gaussian rows."""

from __future__ import annotations

import csv
import enum
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import InvalidDimensions


class BetaMode(str, enum.Enum):
    UNIT_SPHERE = "unit"
    GAUSSIAN_PRIOR = "gaussian"


@dataclass(frozen=True)
class ProblemSpec:
    """One family of synthetic regression problems.

    ``UNIT_SPHERE`` draws ``beta`` uniformly on the unit sphere;
    ``GAUSSIAN_PRIOR`` draws ``beta ~ N(0, I/p)``.
    """

    n: int
    p: int
    sigma: float = 1.0
    beta_mode: BetaMode = BetaMode.UNIT_SPHERE
    seed: int = 0

    def __post_init__(self):
        if self.n < 3 or self.p < 1:
            raise InvalidDimensions(f"need n >= 3 and p >= 1, got n={self.n}, p={self.p}")
        if not self.sigma >= 0:
            raise InvalidDimensions(f"sigma must be >= 0, got {self.sigma}")
        object.__setattr__(self, "beta_mode", BetaMode(self.beta_mode))

    @property
    def gamma(self) -> float:
        return self.p / self.n


@dataclass(frozen=True)
class ProblemInstance:
    X: np.ndarray
    beta: np.ndarray
    y: np.ndarray
    z: np.ndarray
    sigma: float

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def p(self) -> int:
        return self.X.shape[1]


def draw_beta(p: int, mode: BetaMode, rng: np.random.Generator) -> np.ndarray:
    g = rng.standard_normal(p)
    if BetaMode(mode) is BetaMode.UNIT_SPHERE:
        return g / np.linalg.norm(g)
    return g / np.sqrt(p)


def generate_problem(spec: ProblemSpec, rng: np.random.Generator) -> ProblemInstance:
    """Draw ``X`` (n x p, iid N(0,1)), ``beta`` per ``spec.beta_mode``, noise ``z`` and ``y``.

    Draw order is X, beta, z; it is part of the reproducibility contract.
    """
    X = rng.standard_normal((spec.n, spec.p))
    beta = draw_beta(spec.p, spec.beta_mode, rng)
    z = rng.standard_normal(spec.n)
    y = X @ beta + spec.sigma * z
    return ProblemInstance(X=X, beta=beta, y=y, z=z, sigma=float(spec.sigma))


def dump_instance(inst: ProblemInstance, directory: str | Path, stem: str = "instance") -> tuple[Path, Path]:
    """Write ``<stem>_X.csv`` and ``<stem>_vectors.csv`` for debugging.

    The X file has header ``x0..x{p-1}`` and one row per example. The vectors
    file is long-format with columns ``name,index,value`` where ``name`` is one
    of ``y``, ``z`` (length n) or ``beta`` (length p).
    """
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    x_path = directory / f"{stem}_X.csv"
    v_path = directory / f"{stem}_vectors.csv"
    with open(x_path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow([f"x{j}" for j in range(inst.p)])
        for row in inst.X:
            w.writerow([repr(float(v)) for v in row])
    with open(v_path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["name", "index", "value"])
        for name, vec in (("y", inst.y), ("z", inst.z), ("beta", inst.beta)):
            for i, v in enumerate(vec):
                w.writerow([name, i, repr(float(v))])
    return x_path, v_path


def load_instance(x_path: str | Path, vectors_path: str | Path, sigma: float) -> ProblemInstance:
    X = np.loadtxt(x_path, delimiter=",", skiprows=1, ndmin=2)
    vecs: dict[str, list[tuple[int, float]]] = {"y": [], "z": [], "beta": []}
    with open(vectors_path, newline="", encoding="utf-8") as fh:
        for rec in csv.DictReader(fh):
            vecs[rec["name"]].append((int(rec["index"]), float(rec["value"])))
    arr = {k: np.array([v for _, v in sorted(items)]) for k, items in vecs.items()}
    return ProblemInstance(X=X, beta=arr["beta"], y=arr["y"], z=arr["z"], sigma=sigma)
