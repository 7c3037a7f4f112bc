"""Offline comparators and scoring: step-up procedure, per-index error-rate
splits, uncorrected testing, and the false-discovery/power metrics."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .sequences import Normalization, SequenceSpec, build_table


@dataclass(frozen=True)
class BatchResult:
    """Rejection set of an offline rule, with its effective p-value cutoff."""

    rejected_indices: frozenset[int]   # 1-based
    threshold: float

    @property
    def n_rejected(self) -> int:
        return len(self.rejected_indices)


def bh(pvalues, alpha: float) -> BatchResult:
    """Step-up procedure: find the largest i with p_(i) <= i * alpha / N and
    reject every hypothesis with p <= p_(i)."""
    p = np.asarray(list(pvalues), dtype=float)
    if p.size == 0:
        return BatchResult(frozenset(), 0.0)
    if np.any((p < 0) | (p > 1)):
        raise ValueError("p-values must lie in [0, 1]")
    n = p.size
    ordered = np.sort(p)
    ranks = np.arange(1, n + 1)
    passing = np.nonzero(ordered <= ranks * alpha / n)[0]
    if passing.size == 0:
        return BatchResult(frozenset(), 0.0)
    threshold = float(ordered[passing[-1]])
    rejected = frozenset((np.nonzero(p <= threshold)[0] + 1).tolist())
    return BatchResult(rejected, threshold)


def bh_adjusted(pvalues, alpha: float) -> BatchResult:
    """Step-up procedure with alpha divided by the harmonic sum, valid under
    arbitrary dependence."""
    p = list(pvalues)
    n = len(p)
    if n == 0:
        return BatchResult(frozenset(), 0.0)
    harmonic = float(np.sum(1.0 / np.arange(1, n + 1)))
    return bh(p, alpha / harmonic)


def bonferroni_levels(spec: SequenceSpec | None, alpha: float,
                      N: int | None = None) -> list[float]:
    """Per-index familywise levels: ``alpha * gamma_i`` for a SUM_ONE spec,
    or the flat ``alpha / N`` split when only a horizon is given."""
    if spec is None and N is None:
        raise ValueError("provide a sequence spec or a horizon N")
    if spec is None:
        return [alpha / N] * N
    table = build_table(spec, length_hint=N or 1024)
    n = spec.bound if spec.bound is not None else (N or 1024)
    coeffs = table.head(n)
    if spec.normalization is Normalization.SUM_ONE:
        # exact sum-one split even for shapes whose published scaling
        # constant leaves the series slightly below 1
        return (alpha * coeffs / table.constraint_sum()).tolist()
    return coeffs.tolist()


def uncorrected(pvalues, alpha: float) -> BatchResult:
    """Reject every p strictly below alpha (no multiplicity correction)."""
    p = np.asarray(list(pvalues), dtype=float)
    rejected = frozenset((np.nonzero(p < alpha)[0] + 1).tolist())
    return BatchResult(rejected, alpha)


@dataclass
class MetricsAccumulator:
    """Per-replicate false-discovery proportions and powers with their
    running means and Monte Carlo standard errors.

    Power is recorded only for replicates that contained non-nulls; the
    mean is None until at least one such replicate arrives.
    """

    fdps: list[float] = field(default_factory=list)
    powers: list[float] = field(default_factory=list)

    def add(self, fdp: float, power: float | None) -> None:
        if not 0.0 <= fdp <= 1.0:
            raise ValueError(f"FDP must lie in [0, 1], got {fdp!r}")
        self.fdps.append(float(fdp))
        if power is not None:
            self.powers.append(float(power))

    def add_batch(self, decisions, truth) -> None:
        self.add(*score(decisions, truth))

    @staticmethod
    def _mean_se(values) -> tuple[float | None, float | None]:
        n = len(values)
        if n == 0:
            return None, None
        mean = float(np.mean(values))
        se = float(np.std(values, ddof=1) / math.sqrt(n)) if n > 1 else 0.0
        return mean, se

    @property
    def fdr(self) -> float | None:
        return self._mean_se(self.fdps)[0]

    @property
    def fdr_se(self) -> float | None:
        return self._mean_se(self.fdps)[1]

    @property
    def power(self) -> float | None:
        return self._mean_se(self.powers)[0]

    @property
    def power_se(self) -> float | None:
        return self._mean_se(self.powers)[1]


def score(decisions, truth) -> tuple[float, float | None]:
    """False discovery proportion and power of one batch of decisions.

    FDP is V / max(R, 1); power is the fraction of non-null hypotheses
    rejected, or None when there are no non-nulls.
    """
    decisions = list(decisions)
    truth = list(truth)
    if len(decisions) != len(truth):
        raise ValueError("decisions and truth must have equal length")
    r = sum(bool(d) for d in decisions)
    v = sum(1 for d, t in zip(decisions, truth) if d and not t)
    m1 = sum(bool(t) for t in truth)
    fdp = v / max(r, 1)
    if m1 == 0:
        return fdp, None
    tp = sum(1 for d, t in zip(decisions, truth) if d and t)
    return fdp, tp / m1
