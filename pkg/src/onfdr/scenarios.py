"""Synthetic data generators and experiment drivers.

Three families: an equicorrelated multivariate-normal mixture, a platform
trial with a shared control arm, and a small binary-endpoint platform with
exact tests.  ``estimate``/``estimate_many`` run seeded replicates and report
mean false discovery proportion and power with Monte Carlo standard errors.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from enum import Enum

import numpy as np

from . import baselines
from .procedures import (
    ProcedureConfig,
    ProcedureKind,
    default_config,
    run_stream,
)
from .stattests import TwoByTwoTable, fisher_exact_greater, pvalue_one_sided, \
    pvalue_two_sided

THREADS_ENV = "ONFDR_THREADS"


class MixtureAlternative(str, Enum):
    GAUSSIAN = "gaussian"        # two-sided testing
    EXPONENTIAL = "exponential"  # one-sided
    CONSTANT = "constant"        # one-sided


@dataclass(frozen=True)
class MixtureScenario:
    """Equicorrelated z-statistics with a point-mass-or-F1 mean mixture."""

    N: int
    pi1: float
    rho: float = 0.0
    alternative: MixtureAlternative = MixtureAlternative.GAUSSIAN

    def __post_init__(self) -> None:
        if self.N < 1:
            raise ValueError("N must be >= 1")
        if not 0 <= self.pi1 <= 1:
            raise ValueError("pi1 must lie in [0, 1]")
        if not 0 <= self.rho < 1:
            raise ValueError("rho must lie in [0, 1)")

    @property
    def two_sided(self) -> bool:
        return self.alternative is MixtureAlternative.GAUSSIAN

    @property
    def effect_scale(self) -> float:
        """Scale of the non-null means: sd for GAUSSIAN, mean for
        EXPONENTIAL, the constant itself for CONSTANT (k=2 up to N=100)."""
        if self.alternative is MixtureAlternative.CONSTANT:
            k = 2.0 if self.N <= 100 else 1.0
            return math.sqrt(k * math.log(self.N))
        return math.sqrt(2.0 * math.log(self.N))


@dataclass(frozen=True)
class PlatformTrialScenario:
    """Normal-outcome platform trial: K arms against a growing shared
    control."""

    K: int
    N_target: int = 70
    sigma: float = 6.0
    pi: float = 0.1
    alpha: float = 0.1

    @property
    def N0(self) -> int:
        return round(self.N_target * math.sqrt(self.K))

    @property
    def effect(self) -> float:
        return math.sqrt(2.0 * math.log(self.K))


@dataclass(frozen=True)
class KidneyTrialScenario:
    """Binary-endpoint platform with a fixed control group and exact tests."""

    delta: tuple[float, ...] = (-0.01, -0.02, 0.23, 0.52, -0.04,
                                0.38, -0.03, 0.22, -0.02, -0.05)
    n0: int = 32
    n_arm: int = 20
    p0: float = 0.3
    alpha: float = 0.1

    @property
    def K(self) -> int:
        return len(self.delta)

    @property
    def truth(self) -> tuple[bool, ...]:
        return tuple(d > 0 for d in self.delta)


# the five published trial realisations: (control successes, per-arm successes)
KIDNEY_REALISATIONS: dict[int, tuple[int, tuple[int, ...]]] = {
    1: (19, (5, 5, 9, 19, 4, 15, 4, 10, 5, 6)),
    2: (16, (7, 6, 13, 14, 8, 16, 7, 11, 6, 5)),
    3: (13, (5, 13, 10, 15, 10, 15, 5, 11, 5, 3)),
    4: (14, (10, 5, 9, 17, 10, 12, 10, 15, 7, 8)),
    5: (14, (4, 10, 14, 17, 4, 16, 9, 9, 3, 3)),
}


def _rng_for(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    if isinstance(seed, np.random.SeedSequence):
        return np.random.default_rng(seed)
    return np.random.default_rng(np.random.SeedSequence(int(seed)))


def equicorrelated_normal(n: int, rho: float, rng: np.random.Generator) -> np.ndarray:
    """One draw of N(0, Sigma) with unit variances and constant correlation
    rho, via a single shared factor."""
    g = rng.standard_normal()
    eps = rng.standard_normal(n)
    return math.sqrt(rho) * g + math.sqrt(1.0 - rho) * eps


def gen_mixture(scenario: MixtureScenario, seed) -> tuple[np.ndarray, np.ndarray]:
    """P-values and non-null indicators for one mixture replicate."""
    rng = _rng_for(seed)
    n = scenario.N
    nonnull = rng.random(n) < scenario.pi1
    theta = np.zeros(n)
    k = int(nonnull.sum())
    if k:
        alt = scenario.alternative
        if alt is MixtureAlternative.GAUSSIAN:
            theta[nonnull] = rng.normal(0.0, scenario.effect_scale, size=k)
        elif alt is MixtureAlternative.EXPONENTIAL:
            theta[nonnull] = rng.exponential(scenario.effect_scale, size=k)
        else:
            theta[nonnull] = scenario.effect_scale
    x = equicorrelated_normal(n, scenario.rho, rng)
    signs = rng.integers(0, 2, size=n) * 2 - 1
    z = theta + signs * x
    p = pvalue_two_sided(z) if scenario.two_sided else pvalue_one_sided(z)
    return p, nonnull


def _platform_draw(scenario: PlatformTrialScenario, rng: np.random.Generator):
    """One replicate in arm-index order: (analysis times, z-statistics,
    non-null indicators)."""
    K, sigma = scenario.K, scenario.sigma
    n0_total = scenario.N0
    nonnull = rng.random(K) < scenario.pi
    theta = np.where(nonnull, scenario.effect, 0.0)
    tau = rng.uniform(0.2, 1.0, size=K)
    n_arm = rng.binomial(scenario.N_target, 0.9, size=K)
    while np.any(n_arm == 0):   # test statistic undefined on an empty arm
        redo = n_arm == 0
        n_arm[redo] = rng.binomial(scenario.N_target, 0.9, size=int(redo.sum()))
    control = rng.normal(0.0, sigma, size=n0_total)
    control_cum = np.cumsum(control)
    z = np.empty(K)
    for j in range(K):
        nj = int(n_arm[j])
        ybar_j = rng.normal(theta[j], sigma, size=nj).mean()
        n0j = int(tau[j] * n0_total)
        ybar_0 = control_cum[n0j - 1] / n0j
        z[j] = (ybar_j - ybar_0) / (sigma * math.sqrt(1.0 / n0j + 1.0 / nj))
    return tau, z, nonnull


def gen_platform(scenario: PlatformTrialScenario, seed) -> tuple[np.ndarray, np.ndarray]:
    """P-values (in calendar order of the analysis times) and non-null
    indicators for one platform-trial replicate.

    Every arm is compared against all control outcomes observed by its
    analysis time, which induces the positive correlation of interest.
    Hypotheses are emitted by ascending analysis time, ties broken by arm
    index.
    """
    tau, z, nonnull = _platform_draw(scenario, _rng_for(seed))
    order = np.lexsort((np.arange(scenario.K), tau))
    return pvalue_one_sided(z[order]), nonnull[order]


# ---------------------------------------------------------------------------
# the binary-endpoint platform (exact tests, exact integer fractions)
# ---------------------------------------------------------------------------

KIDNEY_PROCEDURES = ("uncorrected", "bonferroni", "lord2", "lord3",
                     "lord++", "saffron", "lond", "bh")


@dataclass(frozen=True)
class KidneyCell:
    """One procedure's outcome on one realisation, as exact integer
    fractions V/R and TP/m1."""

    false_discoveries: int
    rejections: int
    true_positives: int
    nonnull: int

    @property
    def fdr(self) -> str:
        return f"{self.false_discoveries}/{self.rejections}"

    @property
    def power(self) -> str:
        return f"{self.true_positives}/{self.nonnull}"


def kidney_pvalues(scenario: KidneyTrialScenario, Y0: int, Y) -> list[float]:
    """One-sided exact p-values per arm, in arm-index order."""
    Y = list(Y)
    if len(Y) != scenario.K:
        raise ValueError(f"expected {scenario.K} arm counts, got {len(Y)}")
    if not 0 <= Y0 <= scenario.n0:
        raise ValueError(f"control successes {Y0} outside 0..{scenario.n0}")
    for j, y in enumerate(Y):
        if not 0 <= y <= scenario.n_arm:
            raise ValueError(f"arm {j + 1} successes {y} outside 0..{scenario.n_arm}")
    return [
        fisher_exact_greater(TwoByTwoTable(y, scenario.n_arm - y,
                                           Y0, scenario.n0 - Y0))
        for y in Y
    ]


def eval_kidney(scenario: KidneyTrialScenario, Y0: int, Y,
                procedures=KIDNEY_PROCEDURES) -> dict[str, KidneyCell]:
    """Run the bounded procedures plus offline comparators on one realisation
    and score against the scenario's true effect signs."""
    p = kidney_pvalues(scenario, Y0, Y)
    truth = list(scenario.truth)
    K, alpha = scenario.K, scenario.alpha
    out: dict[str, KidneyCell] = {}
    for name in procedures:
        if name == "uncorrected":
            res = baselines.uncorrected(p, alpha)
            decisions = [j + 1 in res.rejected_indices for j in range(K)]
        elif name == "bh":
            res = baselines.bh(p, alpha)
            decisions = [j + 1 in res.rejected_indices for j in range(K)]
        else:
            kind = ProcedureKind(name)
            config = default_config(kind, alpha=alpha, bound=K)
            decisions = [r.rejected for r in run_stream(config, p)]
        v = sum(1 for d, t in zip(decisions, truth) if d and not t)
        tp = sum(1 for d, t in zip(decisions, truth) if d and t)
        out[name] = KidneyCell(v, int(sum(decisions)), tp, sum(truth))
    return out


# ---------------------------------------------------------------------------
# Monte Carlo estimation
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class EstimateResult:
    """Replicate-averaged operating characteristics of one procedure."""

    label: str
    fdr: float
    fdr_se: float
    power: float | None
    power_se: float | None
    reps: int
    power_reps: int


_OFFLINE = {"bh": baselines.bh, "bh-adjusted": baselines.bh_adjusted,
            "uncorrected": baselines.uncorrected}


def _one_replicate(scenario, procs, seed, rep):
    p, truth = _generate(scenario, np.random.SeedSequence((seed, rep)))
    truth_list = truth.tolist()
    fdps = np.empty(len(procs))
    powers = np.full(len(procs), np.nan)
    for c, (label, proc) in enumerate(procs):
        if isinstance(proc, str):
            res = _OFFLINE[proc](p, _scenario_alpha(scenario))
            decisions = [j + 1 in res.rejected_indices for j in range(len(p))]
        else:
            decisions = [r.rejected for r in run_stream(proc, p)]
        fdp, power = baselines.score(decisions, truth_list)
        fdps[c] = fdp
        if power is not None:
            powers[c] = power
    return fdps, powers


def _generate(scenario, seed):
    if isinstance(scenario, MixtureScenario):
        return gen_mixture(scenario, seed)
    if isinstance(scenario, PlatformTrialScenario):
        return gen_platform(scenario, seed)
    raise TypeError(f"cannot generate from {type(scenario).__name__}")


def _scenario_alpha(scenario) -> float:
    return getattr(scenario, "alpha", 0.05)


def _replicate_chunk(args):
    scenario, procs, seed, lo, hi = args
    fdps = np.empty((hi - lo, len(procs)))
    powers = np.empty((hi - lo, len(procs)))
    for r in range(lo, hi):
        fdps[r - lo], powers[r - lo] = _one_replicate(scenario, procs, seed, r)
    return lo, fdps, powers


def worker_count() -> int:
    env = os.environ.get(THREADS_ENV)
    if env is not None:
        return max(1, int(env))
    return max(1, min(os.cpu_count() or 1, 8))


def estimate_many(procs, scenario, reps: int, seed: int) -> list[EstimateResult]:
    """Estimate FDR and power for several rules on shared replicate data.

    ``procs`` is a list of (label, ProcedureConfig) pairs; the config slot
    may instead be one of the offline rule names "bh", "bh-adjusted" or
    "uncorrected".  Replicate r draws its own generator from (seed, r), so
    results are independent of worker scheduling and bit-reproducible.
    """
    if reps < 1:
        raise ValueError("reps must be >= 1")
    procs = list(procs)
    workers = worker_count()
    fdps = np.empty((reps, len(procs)))
    powers = np.empty((reps, len(procs)))
    if workers == 1 or reps < 64:
        for r in range(reps):
            fdps[r], powers[r] = _one_replicate(scenario, procs, seed, r)
    else:
        chunk = max(32, math.ceil(reps / (workers * 8)))
        tasks = [(scenario, procs, seed, lo, min(lo + chunk, reps))
                 for lo in range(0, reps, chunk)]
        with ProcessPoolExecutor(max_workers=workers) as pool:
            for lo, f, w in pool.map(_replicate_chunk, tasks):
                fdps[lo:lo + len(f)] = f
                powers[lo:lo + len(w)] = w

    results = []
    for c, (label, _) in enumerate(procs):
        acc = baselines.MetricsAccumulator()
        for r in range(reps):
            w = powers[r, c]
            acc.add(fdps[r, c], None if np.isnan(w) else float(w))
        results.append(EstimateResult(label, acc.fdr, acc.fdr_se, acc.power,
                                      acc.power_se, reps, len(acc.powers)))
    return results


def estimate(procedure: ProcedureConfig, scenario, reps: int,
             seed: int) -> EstimateResult:
    """Single-procedure convenience wrapper over :func:`estimate_many`."""
    return estimate_many([(procedure.kind.value, procedure)],
                         scenario, reps, seed)[0]
