"""Online FDR state machines: one incremental level/observe engine per rule.

Every procedure is driven through the same three operations:
``make_stream`` builds a fresh :class:`StreamState` from a validated
:class:`ProcedureConfig`, ``next_level`` computes the upcoming test level
without mutating the state, and ``observe`` consumes one p-value.  A stream
is strictly sequential; distinct streams are independent.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from functools import lru_cache

import numpy as np

from .sequences import (
    Normalization,
    SequenceKind,
    SequenceSpec,
    SequenceTable,
    build_table,
    rebound,
    validate_xi,
)


class ProcedureKind(str, Enum):
    LORD2 = "lord2"
    LORD3 = "lord3"
    LORDPP = "lord++"
    SAFFRON = "saffron"
    LORD_DEP = "lord-dep"
    LOND_INDEP = "lond"
    LOND_DEP = "lond-dep"
    BONFERRONI = "bonferroni"


_WEALTH_KINDS = (ProcedureKind.LORD3, ProcedureKind.LORD_DEP)
_LOND_KINDS = (ProcedureKind.LOND_INDEP, ProcedureKind.LOND_DEP)


class ConfigError(ValueError):
    """A procedure configuration violates one of its invariants."""


class HorizonExhaustedError(RuntimeError):
    """A bounded stream was asked to test beyond its horizon."""


@dataclass(frozen=True)
class ProcedureConfig:
    """Target level, wealth parameters and coefficient sequence of one rule.

    ``lond_original`` switches LOND's multiplier from ``D(i-1) + 1`` to the
    original ``max(D(i-1), 1)`` form; it is off by default.
    """

    kind: ProcedureKind
    alpha: float = 0.05
    w0: float = 0.0
    b0: float = 0.0
    lam: float = 0.5
    sequence: SequenceSpec | None = None
    lond_original: bool = False

    def __post_init__(self) -> None:
        if not 0 < self.alpha < 1:
            raise ConfigError("alpha must lie in (0, 1)")
        if self.sequence is None:
            raise ConfigError("a coefficient sequence is required")
        k = self.kind
        if k in (ProcedureKind.LORD2, ProcedureKind.LORD3):
            if self.w0 < 0:
                raise ConfigError("w0 >= 0 is required")
            if self.b0 <= 0:
                raise ConfigError("b0 > 0 is required")
            if self.w0 + self.b0 > self.alpha + 1e-12:
                raise ConfigError("w0 + b0 <= alpha is required")
        elif k is ProcedureKind.LORDPP:
            if not 0 <= self.w0 <= self.alpha:
                raise ConfigError("0 <= w0 <= alpha is required")
        elif k is ProcedureKind.SAFFRON:
            if not 0 < self.lam < 1:
                raise ConfigError("lambda must lie in (0, 1)")
            if not 0 <= self.w0 < (1 - self.lam) * self.alpha:
                raise ConfigError("w0 < (1 - lambda) * alpha is required")
        elif k is ProcedureKind.LORD_DEP:
            if self.w0 < 0:
                raise ConfigError("w0 >= 0 is required")
            if self.b0 <= 0:
                raise ConfigError("b0 > 0 is required")


@dataclass(frozen=True)
class DecisionRecord:
    """Outcome of testing one hypothesis."""

    index: int
    p: float
    level: float
    rejected: bool
    wealth_after: float | None = None


@dataclass
class StreamState:
    """Sufficient statistics of one running stream."""

    table: SequenceTable
    i: int = 0
    wealth: float | None = None
    wealth_at_discovery: float | None = None
    discoveries: int = 0
    candidates_total: int = 0
    bound: int | None = None
    _harmonic: float = 0.0
    # parallel buffers: rejection times and candidate counts at those times
    _tau: np.ndarray = field(default_factory=lambda: np.zeros(16, dtype=np.int64))
    _cand_at_tau: np.ndarray = field(default_factory=lambda: np.zeros(16, dtype=np.int64))

    @property
    def rejection_times(self) -> list[int]:
        return self._tau[: self.discoveries].tolist()

    def _push_rejection(self, time: int, cand_count: int) -> None:
        k = self.discoveries
        if k == len(self._tau):
            self._tau = np.concatenate([self._tau, np.zeros(k, dtype=np.int64)])
            self._cand_at_tau = np.concatenate(
                [self._cand_at_tau, np.zeros(k, dtype=np.int64)]
            )
        self._tau[k] = time
        self._cand_at_tau[k] = cand_count
        self.discoveries = k + 1


# defaults mirror the simulation-study specification: w0 = alpha/2 and
# b0 = alpha - w0 for the wealth-based rules, lambda = 0.5 with
# w0 = (1 - lambda) * alpha / 2 for the adaptive rule.
def default_sequence(kind: ProcedureKind, alpha: float,
                     bound: int | None = None) -> SequenceSpec:
    """Per-procedure default coefficient sequence."""
    if kind in (ProcedureKind.LORD2, ProcedureKind.LORD3, ProcedureKind.LORDPP):
        return SequenceSpec(SequenceKind.JM_OPTIMAL, Normalization.SUM_ONE,
                            bound=bound)
    if kind is ProcedureKind.SAFFRON:
        return SequenceSpec(SequenceKind.INVERSE_SQUARE, Normalization.SUM_ONE,
                            bound=bound)
    if kind is ProcedureKind.LORD_DEP:
        w0 = alpha / 2
        b0 = alpha - w0
        if bound is None:
            return SequenceSpec(SequenceKind.LOG_POWER, Normalization.XI_WEIGHTED,
                                shape_param=3.0, alpha=alpha, w0=w0, b0=b0)
        return SequenceSpec(SequenceKind.CONSTANT_BOUNDED, Normalization.XI_WEIGHTED,
                            bound=bound, alpha=alpha, w0=w0, b0=b0)
    # LOND (both forms) and Bonferroni
    if bound is None:
        return SequenceSpec(SequenceKind.JM_OPTIMAL, Normalization.SUM_ALPHA,
                            alpha=alpha)
    return SequenceSpec(SequenceKind.UNIFORM, Normalization.SUM_ALPHA,
                        alpha=alpha, bound=bound)


def default_config(kind: ProcedureKind, alpha: float = 0.05,
                   bound: int | None = None, **overrides) -> ProcedureConfig:
    """Config with the simulation-study defaults for ``kind``."""
    params = dict(kind=kind, alpha=alpha,
                  sequence=default_sequence(kind, alpha, bound))
    if kind in (ProcedureKind.LORD2, ProcedureKind.LORD3, ProcedureKind.LORD_DEP):
        params.update(w0=alpha / 2, b0=alpha / 2)
    elif kind is ProcedureKind.LORDPP:
        params.update(w0=alpha / 2)
    elif kind is ProcedureKind.SAFFRON:
        params.update(lam=0.5, w0=(1 - 0.5) * alpha / 2)
    params.update(overrides)
    return ProcedureConfig(**params)


@lru_cache(maxsize=256)
def _table_cache(spec: SequenceSpec) -> SequenceTable:
    return build_table(spec, length_hint=1024)


def _cached_table(spec: SequenceSpec, length_hint: int) -> SequenceTable:
    """One shared table per spec; infinite tables are grown in place."""
    table = _table_cache(spec)
    if spec.bound is None and length_hint > len(table):
        table._extend_to(length_hint)
    return table


def make_stream(config: ProcedureConfig, length_hint: int = 1024) -> StreamState:
    """Validate ``config`` and initialize its stream state.

    Tables are cached per spec and shared between streams; lazy extension is
    internally synchronized.
    """
    spec = config.sequence
    table = _cached_table(spec, length_hint)
    if config.kind is ProcedureKind.LORD_DEP:
        if not validate_xi(table, config.w0, config.b0, config.alpha):
            raise ConfigError(
                "xi sequence violates the dependent-LORD budget inequality"
            )
    if config.kind in _WEALTH_KINDS:
        first = table.coefficient(1)
        if first > 1 + 1e-12:
            raise ConfigError("leading coefficient must be <= 1 to keep wealth "
                              "nonnegative")
    state = StreamState(table=table, bound=spec.bound)
    if config.kind in _WEALTH_KINDS:
        state.wealth = config.w0
        state.wealth_at_discovery = config.w0
    return state


def _payout_sum(table: SequenceTable, gaps: np.ndarray) -> float:
    """Sum of coefficients at the given 1-based index gaps."""
    if len(gaps) == 0:
        return 0.0
    coeffs = table.head(int(gaps.max()))
    if len(gaps) < 24:
        return float(sum(coeffs[g - 1] for g in gaps.tolist()))
    return float(coeffs[gaps - 1].sum())


def next_level(state: StreamState, config: ProcedureConfig) -> float:
    """Test level for hypothesis ``state.i + 1``; does not mutate the state."""
    i = state.i + 1
    if state.bound is not None and i > state.bound:
        raise HorizonExhaustedError(
            f"horizon N={state.bound} exhausted at index {i}; rebound to continue"
        )
    table = state.table
    kind = config.kind
    k = state.discoveries

    if kind is ProcedureKind.LORD2:
        level = table.coefficient(i) * config.w0
        if k:
            gaps = i - state._tau[:k]
            level += config.b0 * _payout_sum(table, gaps)
        return level

    if kind is ProcedureKind.LORD3:
        tau_last = int(state._tau[k - 1]) if k else 0
        return table.coefficient(i - tau_last) * state.wealth_at_discovery

    if kind is ProcedureKind.LORDPP:
        level = table.coefficient(i) * config.w0
        if k:
            level += (config.alpha - config.w0) * table.coefficient(i - int(state._tau[0]))
            if k > 1:
                gaps = i - state._tau[1:k]
                level += config.alpha * _payout_sum(table, gaps)
        return level

    if kind is ProcedureKind.SAFFRON:
        lam, alpha, w0 = config.lam, config.alpha, config.w0
        c_before = state.candidates_total
        tilde = w0 * table.coefficient(i - c_before)
        if k:
            # candidate counts strictly inside (tau_j, i)
            gaps = (i - c_before) - (state._tau[:k] - state._cand_at_tau[:k])
            tilde += ((1 - lam) * alpha - w0) * table.coefficient(int(gaps[0]))
            if k > 1:
                tilde += (1 - lam) * alpha * _payout_sum(table, gaps[1:])
        return min(lam, tilde)

    if kind is ProcedureKind.LORD_DEP:
        return table.coefficient(i) * state.wealth_at_discovery

    if kind in _LOND_KINDS:
        beta = table.coefficient(i)
        if kind is ProcedureKind.LOND_DEP:
            beta /= state._harmonic + 1.0 / i
        mult = max(state.discoveries, 1) if config.lond_original \
            else state.discoveries + 1
        return beta * mult

    # BONFERRONI: the sequence carries the levels (alpha-scaled when SUM_ONE)
    beta = table.coefficient(i)
    if config.sequence.normalization is Normalization.SUM_ONE:
        beta *= config.alpha
    return beta


def observe(state: StreamState, p: float, config: ProcedureConfig) -> DecisionRecord:
    """Consume one p-value: decide, update wealth/history, advance the stream."""
    if not isinstance(p, (int, float)) or math.isnan(p) or not 0.0 <= p <= 1.0:
        raise ValueError(f"p-value must lie in [0, 1], got {p!r}")
    level = next_level(state, config)
    rejected = p <= level
    i = state.i + 1
    kind = config.kind

    if kind in _WEALTH_KINDS:
        state.wealth = state.wealth - level + (config.b0 if rejected else 0.0)
        if rejected:
            state.wealth_at_discovery = state.wealth
    if kind is ProcedureKind.SAFFRON:
        is_candidate = p <= config.lam
        if rejected:
            state._push_rejection(i, state.candidates_total + int(is_candidate))
        state.candidates_total += int(is_candidate)
    elif rejected:
        state._push_rejection(i, 0)
    if kind is ProcedureKind.LOND_DEP:
        state._harmonic += 1.0 / i
    state.i = i
    return DecisionRecord(
        index=i,
        p=float(p),
        level=level,
        rejected=rejected,
        wealth_after=state.wealth,
    )


def run_stream(config: ProcedureConfig, pvalues, length_hint: int | None = None,
               state: StreamState | None = None) -> list[DecisionRecord]:
    """Fold :func:`observe` over ``pvalues`` in order."""
    pvalues = list(pvalues)
    if state is None:
        hint = length_hint if length_hint is not None else max(len(pvalues), 16)
        state = make_stream(config, length_hint=hint)
    records = []
    for offset, p in enumerate(pvalues):
        try:
            records.append(observe(state, p, config))
        except (ValueError, HorizonExhaustedError) as exc:
            raise type(exc)(f"at stream index {state.i + 1}: {exc}") from exc
    return records


def rebound_stream(state: StreamState, config: ProcedureConfig,
                   new_bound: int) -> StreamState:
    """Replace the stream's bounded table, conserving the unspent budget."""
    if state.bound is None:
        raise ConfigError("rebound requires a bounded stream")
    if new_bound <= state.i:
        raise ConfigError(
            f"new horizon {new_bound} must exceed the {state.i} hypotheses tested"
        )
    state.table = rebound(state.table, state.i, new_bound)
    state.bound = new_bound
    return state


def limit_level(config: ProcedureConfig, i: int, length_hint: int = 1024) -> float:
    """Closed-form test level at index ``i`` assuming every prior hypothesis
    was rejected (and, for the adaptive rule, every prior p-value was a
    candidate)."""
    if i < 1:
        raise ValueError("index must be >= 1")
    kind = config.kind
    table = _cached_table(config.sequence, max(length_hint, i))
    alpha, w0, b0 = config.alpha, config.w0, config.b0

    if kind is ProcedureKind.LORD2:
        return table.coefficient(i) * w0 + b0 * table.cumulative_sum(i - 1)

    if kind is ProcedureKind.LORD3:
        g1 = table.coefficient(1)
        decay = (1 - g1) ** (i - 1)
        return g1 * decay * w0 + b0 * (1 - decay)

    if kind is ProcedureKind.LORDPP:
        level = table.coefficient(i) * w0
        if i >= 2:
            level += (alpha - w0) * table.coefficient(i - 1)
            level += alpha * table.cumulative_sum(i - 2)
        return level

    if kind is ProcedureKind.SAFFRON:
        g1 = table.coefficient(1)
        if i == 1:
            return min(config.lam, g1 * w0)
        return min(config.lam, (i - 1) * (1 - config.lam) * alpha * g1)

    if kind is ProcedureKind.LORD_DEP:
        xi = table.head(i)
        if i == 1:
            return float(xi[0]) * w0
        surv = np.cumprod(1.0 - xi[: i - 1])          # prod_{k<=t} (1 - xi_k)
        total = w0 * surv[-1] + b0
        if i >= 3:
            # sum_{j=2}^{i-1} prod_{k=j}^{i-1} (1 - xi_k)
            total += b0 * float(np.sum(surv[-1] / surv[: i - 2]))
        return float(xi[i - 1]) * total

    raise ConfigError(f"no all-rejections closed form for {kind.value}")
