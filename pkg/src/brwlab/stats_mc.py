"""Monte Carlo statistics: empirical count distributions, a two-sample
chi-square equality test with bin pooling, a one-sided dominance check with
bootstrap bands, and counter-based reproducible random streams.

Stream contract: the generator for (master_seed, replicate_index) is a
Philox4x64 bit generator keyed by exactly those two 64-bit words, so any
implementation of the same contract agrees on which stream a replicate gets
(bit-level agreement additionally requires the same generator).
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np
from scipy import stats as sp_stats

from .errors import UsageError


@dataclass(frozen=True)
class RandomStreamSpec:
    """Pure description of one random stream in a reproducible family."""

    master_seed: int
    replicate_index: int = 0

    def __post_init__(self):
        if not 0 <= self.master_seed < 2**64:
            raise UsageError("master_seed must fit in 64 bits")
        if not 0 <= self.replicate_index < 2**64:
            raise UsageError("replicate_index must fit in 64 bits")


def stream(spec: RandomStreamSpec) -> np.random.Generator:
    """Deterministic, statistically independent stream per (seed, index) pair."""
    key = np.array([spec.master_seed, spec.replicate_index], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


@dataclass
class EmpiricalDist:
    """Observed value -> occurrence counts from n samples."""

    counts: dict[int, int]
    n: int

    @staticmethod
    def from_samples(samples: Sequence[int] | np.ndarray) -> "EmpiricalDist":
        arr = np.asarray(samples)
        if arr.size == 0:
            raise UsageError("empty sample")
        values, occ = np.unique(arr, return_counts=True)
        return EmpiricalDist(
            counts={int(v): int(c) for v, c in zip(values, occ)}, n=int(arr.size)
        )

    def support(self) -> list[int]:
        return sorted(self.counts)

    def vector_on(self, support: Sequence[int]) -> np.ndarray:
        return np.array([self.counts.get(v, 0) for v in support], dtype=np.float64)


@dataclass
class TestResult:
    method: str
    statistic: float
    p_value: float
    reject: bool
    dof: int | None = None
    alpha: float | None = None
    band: float | None = None  # upper edge of the bootstrap band, when applicable
    inconclusive: bool = False
    details: dict = field(default_factory=dict)


def _pool_sparse_bins(
    support: list[int], expected_weight: np.ndarray, threshold: float
) -> list[list[int]]:
    """Group support values so every group's expected weight reaches the
    threshold; all individually-sparse values collapse into one tail group."""
    kept = [[v] for v, w in zip(support, expected_weight) if w >= threshold]
    tail = [v for v, w in zip(support, expected_weight) if w < threshold]
    if tail:
        kept.append(tail)
    return kept


def chi_square_equality(
    a: EmpiricalDist, b: EmpiricalDist, alpha: float = 1e-3, min_expected: float = 5.0
) -> TestResult:
    """Two-sample chi-square test of distribution equality on pooled bins.

    Bins whose pooled expected count (under homogeneity, for the smaller arm)
    falls below ``min_expected`` are merged into a single tail bin. With
    fewer than two bins left the test is inconclusive, not an error.
    """
    if a.n == 0 or b.n == 0:
        raise UsageError("empirical distributions must be nonempty")
    support = sorted(set(a.counts) | set(b.counts))
    va, vb = a.vector_on(support), b.vector_on(support)
    n_a, n_b = float(a.n), float(b.n)
    total = va + vb
    expected_small_arm = total * min(n_a, n_b) / (n_a + n_b)
    groups = _pool_sparse_bins(support, expected_small_arm, min_expected)
    if len(groups) < 2:
        return TestResult(
            method="chi_square_equality", statistic=0.0, p_value=1.0, reject=False,
            dof=0, alpha=alpha, inconclusive=True,
            details={"bins": len(groups)},
        )
    idx = {v: i for i, v in enumerate(support)}
    ga = np.array([sum(va[idx[v]] for v in g) for g in groups])
    gb = np.array([sum(vb[idx[v]] for v in g) for g in groups])
    gt = ga + gb
    ea = gt * n_a / (n_a + n_b)
    eb = gt * n_b / (n_a + n_b)
    statistic = float(np.sum((ga - ea) ** 2 / ea) + np.sum((gb - eb) ** 2 / eb))
    dof = len(groups) - 1
    p_value = float(sp_stats.chi2.sf(statistic, dof))
    return TestResult(
        method="chi_square_equality", statistic=statistic, p_value=p_value,
        reject=p_value < alpha, dof=dof, alpha=alpha,
        details={"bins": len(groups)},
    )


def chi_square_gof(
    emp: EmpiricalDist,
    expected_pmf: Mapping[int, float],
    alpha: float = 1e-3,
    min_expected: float = 5.0,
) -> TestResult:
    """One-sample chi-square of an empirical distribution against an exact pmf."""
    if emp.n == 0:
        raise UsageError("empirical distribution must be nonempty")
    support = sorted(set(emp.counts) | set(k for k, v in expected_pmf.items() if v > 0))
    obs = emp.vector_on(support)
    probs = np.array([expected_pmf.get(v, 0.0) for v in support])
    leftover = max(0.0, 1.0 - float(probs.sum()))
    expected = probs * emp.n
    groups = _pool_sparse_bins(support, expected, min_expected)
    if len(groups) < 2:
        return TestResult(
            method="chi_square_gof", statistic=0.0, p_value=1.0, reject=False,
            dof=0, alpha=alpha, inconclusive=True, details={"bins": len(groups)},
        )
    idx = {v: i for i, v in enumerate(support)}
    go = np.array([sum(obs[idx[v]] for v in g) for g in groups])
    ge = np.array([sum(expected[idx[v]] for v in g) for g in groups])
    # leftover pmf mass (truncation or off-support tail) joins the last group
    ge[-1] += leftover * emp.n
    if np.any(ge <= 0):
        raise UsageError("expected pmf assigns zero mass to an observed bin group")
    statistic = float(np.sum((go - ge) ** 2 / ge))
    dof = len(groups) - 1
    p_value = float(sp_stats.chi2.sf(statistic, dof))
    return TestResult(
        method="chi_square_gof", statistic=statistic, p_value=p_value,
        reject=p_value < alpha, dof=dof, alpha=alpha, details={"bins": len(groups)},
    )


def dominance_check(
    a: EmpiricalDist,
    b: EmpiricalDist,
    level: float = 0.99,
    n_boot: int = 1000,
    rng: np.random.Generator | None = None,
) -> TestResult:
    """One-sided check that a stochastically dominates b, with noise control.

    The statistic is max_x ECDF_a(x) - ECDF_b(x) (positive values contradict
    dominance). A violation is declared only when the statistic exceeds the
    ``level`` quantile of its bootstrap distribution under the pooled sample,
    i.e. the upper edge of the bootstrap band at the dominance boundary.
    """
    if a.n == 0 or b.n == 0:
        raise UsageError("empirical distributions must be nonempty")
    if rng is None:
        rng = stream(RandomStreamSpec(0, 0))
    support = sorted(set(a.counts) | set(b.counts))
    va, vb = a.vector_on(support), b.vector_on(support)
    ecdf_a = np.cumsum(va) / a.n
    ecdf_b = np.cumsum(vb) / b.n
    statistic = float(np.max(ecdf_a - ecdf_b))
    pooled = (va + vb) / (a.n + b.n)
    res_a = rng.multinomial(a.n, pooled, size=n_boot)
    res_b = rng.multinomial(b.n, pooled, size=n_boot)
    d_star = np.max(
        np.cumsum(res_a, axis=1) / a.n - np.cumsum(res_b, axis=1) / b.n, axis=1
    )
    upper = float(np.quantile(d_star, level))
    p_value = float((1 + np.sum(d_star >= statistic)) / (n_boot + 1))
    return TestResult(
        method="dominance_check", statistic=statistic, p_value=p_value,
        reject=statistic > upper, band=upper, alpha=1.0 - level,
        details={"n_boot": n_boot, "level": level},
    )
