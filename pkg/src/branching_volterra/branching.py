"""Offspring laws, exponential lifetimes, and Galton-Watson count oracles.

The particle count of the branching system is a continuous-time
Galton-Watson process, independent of the spatial motion.  With offspring
generating function ``psi`` and lifetime rate ``V``, the branching factor is
``beta = V (psi'(1-) - 1)`` and the classical identities hold:

* ``E X_t(1) = e^{beta (t-r)}``,
* ``E X_t(1)^2 = e^{beta(t-r)} + psi''(1-) V beta^{-1}
  (e^{2 beta (t-r)} - e^{beta(t-r)})`` for ``beta > 0``
  (``1 + psi''(1-) V (t-r)`` in the critical case),
* ``e^{-beta(t-r)} X_t(1)`` is a nonnegative martingale with almost-sure
  limit ``F`` (mean one).

These closed forms are the oracles that the Monte Carlo simulator is tested
against.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .kernels import UnsupportedRegimeError

__all__ = [
    "BranchingLaw",
    "FEstimate",
    "OffspringDistribution",
    "estimate_F",
    "expected_count",
    "sample_lifetime",
    "sample_offspring",
    "second_moment_count",
]


@dataclass(frozen=True)
class OffspringDistribution:
    """Offspring count distribution with exact pgf derivatives at 1.

    Construct through the classmethods; ``psi_prime1 = sum k p_k`` and
    ``psi_double_prime1 = sum k (k-1) p_k`` are computed in closed form at
    construction so that moment oracles are exact.
    """

    kind: str
    params: tuple = ()
    table: tuple = ()
    psi_prime1: float = field(default=0.0)
    psi_double_prime1: float = field(default=0.0)

    @classmethod
    def deterministic(cls, k: int) -> "OffspringDistribution":
        if k < 0:
            raise ValueError("offspring count must be nonnegative")
        return cls("deterministic", (k,), (), float(k), float(k * (k - 1)))

    @classmethod
    def binary(cls, p0: float, p2: float) -> "OffspringDistribution":
        if not math.isclose(p0 + p2, 1.0, rel_tol=0.0, abs_tol=1e-12):
            raise ValueError("binary law requires p0 + p2 = 1")
        if p0 < 0.0 or p2 < 0.0:
            raise ValueError("probabilities must be nonnegative")
        return cls("binary", (p0, p2), (), 2.0 * p2, 2.0 * p2)

    @classmethod
    def geometric(cls, q: float) -> "OffspringDistribution":
        # p_k = (1-q) q^k, k >= 0
        if not (0.0 <= q < 1.0):
            raise ValueError("geometric parameter must lie in [0, 1)")
        mean = q / (1.0 - q)
        second = 2.0 * q**2 / (1.0 - q) ** 2
        return cls("geometric", (q,), (), mean, second)

    @classmethod
    def poisson(cls, m: float) -> "OffspringDistribution":
        if m < 0.0:
            raise ValueError("poisson mean must be nonnegative")
        return cls("poisson", (m,), (), m, m**2)

    @classmethod
    def from_table(cls, probs) -> "OffspringDistribution":
        probs = tuple(float(p) for p in probs)
        if any(p < 0.0 for p in probs):
            raise ValueError("probabilities must be nonnegative")
        if not math.isclose(sum(probs), 1.0, rel_tol=0.0, abs_tol=1e-9):
            raise ValueError("table probabilities must sum to 1")
        mean = sum(k * p for k, p in enumerate(probs))
        second = sum(k * (k - 1) * p for k, p in enumerate(probs))
        return cls("table", (), probs, mean, second)

    def pgf(self, s: float) -> float:
        """Generating function ``psi(s) = sum p_k s^k``."""
        if self.kind == "deterministic":
            return s ** self.params[0]
        if self.kind == "binary":
            p0, p2 = self.params
            return p0 + p2 * s**2
        if self.kind == "geometric":
            (q,) = self.params
            return (1.0 - q) / (1.0 - q * s)
        if self.kind == "poisson":
            (m,) = self.params
            return math.exp(m * (s - 1.0))
        return sum(p * s**k for k, p in enumerate(self.table))

    def sample(self, rng: np.random.Generator, size=None):
        if self.kind == "deterministic":
            k = self.params[0]
            return k if size is None else np.full(size, k, dtype=np.int64)
        if self.kind == "binary":
            p2 = self.params[1]
            draw = rng.random(size)
            return (2 * (draw < p2)) if size is not None else (2 if draw < p2 else 0)
        if self.kind == "geometric":
            (q,) = self.params
            # numpy's geometric counts trials >= 1; offspring counts failures
            out = rng.geometric(1.0 - q, size) - 1
            return out if size is not None else int(out)
        if self.kind == "poisson":
            out = rng.poisson(self.params[0], size)
            return out if size is not None else int(out)
        out = rng.choice(len(self.table), size=size, p=np.asarray(self.table))
        return out if size is not None else int(out)


@dataclass(frozen=True)
class BranchingLaw:
    """Offspring distribution plus exponential lifetime rate ``V``."""

    offspring: OffspringDistribution
    rate_V: float

    def __post_init__(self):
        if self.rate_V <= 0.0:
            raise ValueError("lifetime rate V must be positive")

    @property
    def beta(self) -> float:
        return self.rate_V * (self.offspring.psi_prime1 - 1.0)

    def require_supercritical(self) -> None:
        """Entry gate for law-of-large-numbers statistics (beta > 0, finite
        first two pgf derivatives)."""
        if not (self.beta > 0.0):
            raise UnsupportedRegimeError(
                f"supercritical branching required (beta > 0), got beta={self.beta}"
            )


def expected_count(law: BranchingLaw, t: float, r: float = 0.0) -> float:
    """First moment of the alive count: ``e^{beta (t-r)}``."""
    if t < r:
        raise ValueError(f"requires t >= r, got t={t}, r={r}")
    return math.exp(law.beta * (t - r))


def second_moment_count(law: BranchingLaw, t: float, r: float = 0.0) -> float:
    """Second moment of the alive count (supercritical and critical forms)."""
    if t < r:
        raise ValueError(f"requires t >= r, got t={t}, r={r}")
    beta = law.beta
    if beta < 0.0:
        raise UnsupportedRegimeError("second_moment_count supports beta >= 0 only")
    psi2 = law.offspring.psi_double_prime1
    if beta == 0.0:
        return 1.0 + psi2 * law.rate_V * (t - r)
    e1 = math.exp(beta * (t - r))
    return e1 + psi2 * law.rate_V / beta * (e1**2 - e1)


def sample_offspring(dist: OffspringDistribution, rng: np.random.Generator, size=None):
    """Draw offspring counts from the distribution."""
    return dist.sample(rng, size)


def sample_lifetime(law: BranchingLaw, rng: np.random.Generator, size=None):
    """Exponential lifetime with rate ``V`` (mean ``1/V``)."""
    return rng.exponential(1.0 / law.rate_V, size)


@dataclass(frozen=True)
class FEstimate:
    """Martingale-limit estimate with its full trace for diagnostics."""

    value: float
    times: np.ndarray
    martingale: np.ndarray  # e^{-beta (t_i - r)} X_{t_i}(1)


def estimate_F(counts, beta: float, r: float = 0.0) -> FEstimate:
    """Estimate the count-martingale limit from a count trace.

    ``counts`` is a sequence of ``(t_i, X_{t_i}(1))`` with increasing times.
    The estimate is the martingale value at the last recorded time,
    ``e^{beta r} e^{-beta t_N} X_{t_N}(1)``; averaging over earlier times
    would bias the estimate while fluctuations are still large.
    """
    if beta <= 0.0:
        raise ValueError("estimate_F requires beta > 0")
    counts = list(counts)
    if not counts:
        raise ValueError("empty count trace")
    times = np.array([c[0] for c in counts], dtype=float)
    values = np.array([c[1] for c in counts], dtype=float)
    if np.any(np.diff(times) < 0.0):
        raise ValueError("count trace times must be increasing")
    mart = np.exp(-beta * (times - r)) * values
    return FEstimate(float(mart[-1]), times, mart)
