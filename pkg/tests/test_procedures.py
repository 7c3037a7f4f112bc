import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from onfdr.procedures import (
    ConfigError,
    HorizonExhaustedError,
    ProcedureConfig,
    ProcedureKind,
    default_config,
    default_sequence,
    limit_level,
    make_stream,
    next_level,
    observe,
    rebound_stream,
    run_stream,
)
from onfdr.sequences import Normalization, SequenceKind, SequenceSpec

ALL_KINDS = list(ProcedureKind)
LIMIT_KINDS = [ProcedureKind.LORD2, ProcedureKind.LORD3, ProcedureKind.LORDPP,
               ProcedureKind.SAFFRON, ProcedureKind.LORD_DEP]

pvalue_lists = st.lists(
    st.floats(0.0, 1.0, allow_nan=False, width=32), min_size=1, max_size=60)


def uniform_beta(alpha, bound):
    return SequenceSpec(SequenceKind.UNIFORM, Normalization.SUM_ALPHA,
                        alpha=alpha, bound=bound)


class TestConfigValidation:
    def test_lord3_initial_wealth(self):
        cfg = default_config(ProcedureKind.LORD3, alpha=0.05)
        state = make_stream(cfg)
        assert state.wealth == 0.025
        assert state.i == 0 and state.discoveries == 0

    def test_saffron_w0_too_large(self):
        with pytest.raises(ConfigError, match="lambda"):
            default_config(ProcedureKind.SAFFRON, alpha=0.05, w0=0.03)

    def test_lord2_budget_exceeded(self):
        with pytest.raises(ConfigError, match="w0 \\+ b0"):
            default_config(ProcedureKind.LORD2, alpha=0.05, w0=0.04, b0=0.02)

    def test_lond_starts_empty(self):
        cfg = default_config(ProcedureKind.LOND_INDEP, alpha=0.05)
        state = make_stream(cfg)
        assert state.discoveries == 0 and state.rejection_times == []

    def test_invalid_alpha(self):
        with pytest.raises(ConfigError, match="alpha"):
            default_config(ProcedureKind.LORD2, alpha=1.5)

    def test_lord_dep_invalid_xi(self):
        # sequence saturating budget alpha/b0 = 2 fails once the config's
        # actual budget alpha/b0 shrinks below that
        seq = default_sequence(ProcedureKind.LORD_DEP, alpha=0.05)
        cfg = ProcedureConfig(kind=ProcedureKind.LORD_DEP, alpha=0.05,
                              w0=0.01, b0=0.04, sequence=seq)
        with pytest.raises(ConfigError, match="budget inequality"):
            make_stream(cfg)


class TestNextLevel:
    def test_lord2_first_level(self):
        cfg = default_config(ProcedureKind.LORD2, alpha=0.05)
        state = make_stream(cfg)
        g1w0 = 0.0535167709126 * 0.025
        assert next_level(state, cfg) == pytest.approx(g1w0, abs=1e-12)

    def test_next_level_pure(self):
        cfg = default_config(ProcedureKind.SAFFRON, alpha=0.05)
        state = make_stream(cfg)
        first = next_level(state, cfg)
        assert next_level(state, cfg) == first
        assert state.i == 0

    def test_lond_counts_discoveries(self):
        cfg = default_config(ProcedureKind.LOND_INDEP, alpha=0.05,
                             sequence=uniform_beta(0.05, 5))
        state = make_stream(cfg)
        observe(state, 0.005, cfg)
        observe(state, 0.2, cfg)
        assert next_level(state, cfg) == pytest.approx(0.02, abs=1e-12)

    def test_lond_dep_harmonic_rescaling(self):
        cfg = default_config(ProcedureKind.LOND_DEP, alpha=0.05,
                             sequence=uniform_beta(0.05, 5))
        state = make_stream(cfg)
        observe(state, 0.005, cfg)
        observe(state, 0.2, cfg)
        expected = (0.01 / (1 + 1 / 2 + 1 / 3)) * 2
        assert next_level(state, cfg) == pytest.approx(expected, abs=1e-10)
        assert expected == pytest.approx(0.0109091, abs=1e-7)

    def test_saffron_first_level(self):
        cfg = default_config(ProcedureKind.SAFFRON, alpha=0.05)
        state = make_stream(cfg)
        expected = min((6 / math.pi**2) * 0.0125, 0.5)
        assert next_level(state, cfg) == pytest.approx(expected, abs=1e-9)

    def test_lond_original_multiplier(self):
        base = dict(alpha=0.05, sequence=uniform_beta(0.05, 5))
        plus_one = default_config(ProcedureKind.LOND_INDEP, **base)
        original = default_config(ProcedureKind.LOND_INDEP,
                                  lond_original=True, **base)
        for cfg, expect in ((plus_one, 0.02), (original, 0.01)):
            state = make_stream(cfg)
            observe(state, 0.0, cfg)
            assert next_level(state, cfg) == pytest.approx(expect, abs=1e-12)


class TestObserve:
    def test_lord3_no_rejection_spends_wealth(self):
        cfg = default_config(ProcedureKind.LORD3, alpha=0.05)
        rec = observe(make_stream(cfg), 0.9, cfg)
        assert rec.level == pytest.approx(0.0013379, abs=1e-7)
        assert not rec.rejected
        assert rec.wealth_after == pytest.approx(0.0236621, abs=1e-7)

    def test_lord3_rejection_pays_out(self):
        cfg = default_config(ProcedureKind.LORD3, alpha=0.05)
        rec = observe(make_stream(cfg), 0.0001, cfg)
        assert rec.rejected
        assert rec.wealth_after == pytest.approx(0.0486621, abs=1e-7)

    @pytest.mark.parametrize("kind", ALL_KINDS)
    def test_zero_pvalue_rejected(self, kind):
        cfg = default_config(kind, alpha=0.05)
        rec = observe(make_stream(cfg), 0.0, cfg)
        assert rec.rejected

    @pytest.mark.parametrize("bad", [float("nan"), -0.1, 1.5])
    def test_invalid_pvalue(self, bad):
        cfg = default_config(ProcedureKind.LORD2, alpha=0.05)
        with pytest.raises(ValueError):
            observe(make_stream(cfg), bad, cfg)

    def test_tie_is_rejection(self):
        cfg = default_config(ProcedureKind.LOND_INDEP, alpha=0.05,
                             sequence=uniform_beta(0.05, 5))
        rec = observe(make_stream(cfg), 0.01, cfg)
        assert rec.rejected and rec.p == rec.level


class TestRunStream:
    def test_empty(self):
        cfg = default_config(ProcedureKind.LORD2, alpha=0.05)
        assert run_stream(cfg, []) == []

    def test_all_ones_lord2(self):
        cfg = default_config(ProcedureKind.LORD2, alpha=0.05)
        recs = run_stream(cfg, [1.0] * 50)
        assert not any(r.rejected for r in recs)
        table = make_stream(cfg).table
        for r in recs:
            assert r.level == pytest.approx(
                table.coefficient(r.index) * 0.025, abs=1e-15)

    @pytest.mark.parametrize("kind", ALL_KINDS)
    def test_equals_fold_of_observe(self, kind):
        rng = np.random.default_rng(3)
        p = np.round(rng.random(40), 3).tolist()
        cfg = default_config(kind, alpha=0.05)
        folded = []
        state = make_stream(cfg)
        for v in p:
            folded.append(observe(state, v, cfg))
        assert run_stream(cfg, p) == folded

    def test_error_carries_offending_index(self):
        cfg = default_config(ProcedureKind.LORD2, alpha=0.05)
        with pytest.raises(ValueError, match="index 3"):
            run_stream(cfg, [0.5, 0.5, 2.0])

    @pytest.mark.parametrize("kind", ALL_KINDS)
    def test_deterministic(self, kind):
        rng = np.random.default_rng(5)
        p = rng.random(60).tolist()
        cfg = default_config(kind, alpha=0.05)
        assert run_stream(cfg, p) == run_stream(cfg, p)


class TestProperties:
    @settings(max_examples=30, deadline=None)
    @given(p=pvalue_lists, kind=st.sampled_from(ALL_KINDS))
    def test_decision_coherence(self, p, kind):
        cfg = default_config(kind, alpha=0.05)
        for rec in run_stream(cfg, p):
            assert rec.rejected == (rec.p <= rec.level)

    @settings(max_examples=30, deadline=None)
    @given(p=pvalue_lists)
    def test_lord3_wealth_nonnegative(self, p):
        cfg = default_config(ProcedureKind.LORD3, alpha=0.05)
        for rec in run_stream(cfg, p):
            assert rec.wealth_after >= -1e-12

    @settings(max_examples=30, deadline=None)
    @given(p=pvalue_lists)
    def test_lord_dep_levels_nonnegative(self, p):
        # the literal wealth recursion can dip below zero between discoveries
        # (the xi series may sum past 1), but the levels are anchored at the
        # wealth of the last discovery and must stay nonnegative
        cfg = default_config(ProcedureKind.LORD_DEP, alpha=0.05)
        for rec in run_stream(cfg, p):
            assert rec.level >= 0.0

    @settings(max_examples=30, deadline=None)
    @given(p=pvalue_lists)
    def test_lordpp_dominates_lord2(self, p):
        alpha = 0.05
        lord2 = default_config(ProcedureKind.LORD2, alpha=alpha)
        lordpp = default_config(ProcedureKind.LORDPP, alpha=alpha)
        levels2 = [r.level for r in run_stream(lord2, p)]
        levelspp = [r.level for r in run_stream(lordpp, p)]
        for l2, lpp in zip(levels2, levelspp):
            assert lpp >= l2 - 1e-15

    @settings(max_examples=30, deadline=None)
    @given(p=pvalue_lists)
    def test_lond_dominates_bonferroni(self, p):
        seq = default_sequence(ProcedureKind.LOND_INDEP, alpha=0.05)
        lond = default_config(ProcedureKind.LOND_INDEP, alpha=0.05, sequence=seq)
        bonf = default_config(ProcedureKind.BONFERRONI, alpha=0.05, sequence=seq)
        lond_levels = [r.level for r in run_stream(lond, p)]
        bonf_levels = [r.level for r in run_stream(bonf, p)]
        for ll, bl in zip(lond_levels, bonf_levels):
            assert ll >= bl - 1e-15

    @settings(max_examples=20, deadline=None)
    @given(p=pvalue_lists, kind=st.sampled_from(ALL_KINDS), data=st.data())
    def test_online_causality(self, p, kind, data):
        cut = data.draw(st.integers(1, len(p)), label="cut")
        cfg = default_config(kind, alpha=0.05)
        full = run_stream(cfg, p)
        prefix = run_stream(cfg, p[:cut])
        assert full[:cut] == prefix

    @settings(max_examples=25, deadline=None)
    @given(p=pvalue_lists, data=st.data())
    def test_lord2_monotone_payout(self, p, data):
        idx = data.draw(st.integers(0, len(p) - 1), label="idx")
        cfg = default_config(ProcedureKind.LORD2, alpha=0.05)
        before = [r.level for r in run_stream(cfg, p)]
        forced = list(p)
        forced[idx] = 0.0
        after = [r.level for r in run_stream(cfg, forced)]
        for b, a in zip(before[idx + 1:], after[idx + 1:]):
            assert a >= b - 1e-15


class TestLimitLevel:
    @pytest.mark.parametrize("kind", LIMIT_KINDS)
    def test_matches_all_zero_stream(self, kind):
        cfg = default_config(kind, alpha=0.05, bound=300)
        recs = run_stream(cfg, [0.0] * 300)
        for rec in recs:
            assert rec.level == pytest.approx(
                limit_level(cfg, rec.index), abs=1e-10)

    def test_lord3_approaches_payout(self):
        cfg = default_config(ProcedureKind.LORD3, alpha=0.05)
        assert limit_level(cfg, 2000) == pytest.approx(0.025, abs=1e-9)

    def test_saffron_threshold_index(self):
        cfg = default_config(ProcedureKind.SAFFRON, alpha=0.05)
        g1 = 6 / math.pi**2
        threshold = 1 + cfg.lam / ((1 - cfg.lam) * cfg.alpha * g1)
        assert threshold == pytest.approx(33.9, abs=0.1)
        first_capped = math.ceil(threshold)
        assert limit_level(cfg, first_capped) == pytest.approx(cfg.lam)
        assert limit_level(cfg, first_capped - 1) < cfg.lam

    def test_lordpp_uniform_example(self):
        spec = SequenceSpec(SequenceKind.UNIFORM, Normalization.SUM_ONE, bound=10)
        cfg = default_config(ProcedureKind.LORDPP, alpha=0.05, w0=0.02,
                             sequence=spec)
        expected = 0.1 * 0.02 + (0.05 - 0.02) * 0.1 + 0.05 * 0.1
        assert limit_level(cfg, 3) == pytest.approx(expected, abs=1e-12)

    def test_unsupported_kind(self):
        cfg = default_config(ProcedureKind.LOND_INDEP, alpha=0.05)
        with pytest.raises(ConfigError):
            limit_level(cfg, 5)


class TestBoundsAndRebound:
    def test_horizon_exhausted(self):
        cfg = default_config(ProcedureKind.LORD2, alpha=0.05, bound=3)
        state = make_stream(cfg)
        for _ in range(3):
            observe(state, 0.5, cfg)
        with pytest.raises(HorizonExhaustedError):
            next_level(state, cfg)

    def test_rebound_same_horizon_noop(self):
        cfg = default_config(ProcedureKind.LORD2, alpha=0.05, bound=10)
        plain = make_stream(cfg)
        rebounded = make_stream(cfg)
        rebound_stream(rebounded, cfg, 10)
        for p in (0.5, 0.001, 0.2, 0.9):
            assert observe(plain, p, cfg) == observe(rebounded, p, cfg)

    def test_lond_rebound_example(self):
        cfg = default_config(ProcedureKind.LOND_INDEP, alpha=0.05, bound=10)
        state = make_stream(cfg)
        for _ in range(5):
            observe(state, 0.9, cfg)
        rebound_stream(state, cfg, 20)
        rec = observe(state, 0.9, cfg)
        assert rec.level == pytest.approx(0.025 / 15, abs=1e-12)
        assert state.bound == 20

    def test_rebound_conserves_gamma_mass(self):
        cfg = default_config(ProcedureKind.LORD2, alpha=0.05, bound=8)
        state = make_stream(cfg)
        for _ in range(4):
            observe(state, 0.3, cfg)
        rebound_stream(state, cfg, 30)
        spent = state.table.cumulative_sum(4)
        rest = state.table.coefficients[4:].sum()
        assert spent + rest == pytest.approx(1.0, abs=1e-10)
        # stream continues on the new tail without exhausting
        for _ in range(26):
            observe(state, 0.3, cfg)
        with pytest.raises(HorizonExhaustedError):
            next_level(state, cfg)

    def test_rebound_requires_future_horizon(self):
        cfg = default_config(ProcedureKind.LORD2, alpha=0.05, bound=10)
        state = make_stream(cfg)
        for _ in range(5):
            observe(state, 0.5, cfg)
        with pytest.raises(ConfigError):
            rebound_stream(state, cfg, 5)

    def test_rebound_requires_bound(self):
        cfg = default_config(ProcedureKind.LORD2, alpha=0.05)
        with pytest.raises(ConfigError):
            rebound_stream(make_stream(cfg), cfg, 10)


class TestStateInvariants:
    @pytest.mark.parametrize("kind", ALL_KINDS)
    def test_rejection_times_strictly_increasing(self, kind):
        rng = np.random.default_rng(11)
        cfg = default_config(kind, alpha=0.2 if kind.value.startswith("lond")
                             else 0.05)
        state = make_stream(cfg)
        for p in rng.random(80) ** 3:
            observe(state, float(p), cfg)
        times = state.rejection_times
        assert times == sorted(set(times))
        assert state.discoveries == len(times)
        assert all(1 <= t <= state.i for t in times)
