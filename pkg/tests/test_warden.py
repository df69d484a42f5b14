"""Warden mixture divergence, detection and resolvability tests."""

import math

import numpy as np
import pytest

from covertlab.dmc_core import (
    BinaryInputDMC,
    Distribution,
    bernoulli_hamming_source,
    bsc_pair_channel,
    kl_divergence,
)
from covertlab.separation_codec import (
    CodeParams,
    GuardExceededError,
    build_ensemble,
)
from covertlab.warden import (
    CovertnessReport,
    covertness_report,
    detection_bound,
    exact_output_kl,
    lr_test_simulate,
    monte_carlo_kl,
    pinsker_detection_bound,
    pinsker_gap_bound,
    resolvability_scaling_check,
)

CH = bsc_pair_channel(0.1, 0.2)
SRC = bernoulli_hamming_source(0.5)


def make_ensemble(seed=3, **over):
    base = dict(n=8, k=3, rate_R=0.7, alpha_n=0.25, key_count=2,
                target_distortion=0.2)
    base.update(over)
    params = CodeParams(**base)
    return build_ensemble(params, SRC, CH, seed), params


class TestExactKL:
    def test_single_codeword_oracle(self):
        # one message, one key: the mixture is a product law and the
        # divergence is weight * D(Z|1 || Z|0)
        ens, params = make_ensemble(k=1, rate_R=0.0, key_count=1, alpha_n=0.5)
        w = int(ens.weights[0, 0])
        expected = w * kl_divergence(CH.z_given_1, CH.z_given_0)
        assert exact_output_kl(ens, SRC, CH) == pytest.approx(expected, rel=1e-10)

    def test_mixture_below_single_codeword(self):
        # averaging over many codewords can only reduce the divergence
        ens, _ = make_ensemble(key_count=4)
        kl_mix = exact_output_kl(ens, SRC, CH)
        w = ens.params.fixed_weight
        assert kl_mix < w * kl_divergence(CH.z_given_1, CH.z_given_0)
        assert kl_mix > 0.0

    def test_guard(self):
        ens, _ = make_ensemble(n=24, alpha_n=0.1)
        with pytest.raises(GuardExceededError):
            exact_output_kl(ens, SRC, CH)

    def test_warden_singular_is_infinite(self):
        ch = BinaryInputDMC(
            Distribution([0.9, 0.1]), Distribution([0.1, 0.9]),
            Distribution([1.0, 0.0]), Distribution([0.0, 1.0]))
        params = CodeParams(n=6, k=2, rate_R=0.5, alpha_n=0.34, key_count=1,
                            target_distortion=0.25)
        ens = build_ensemble(params, SRC, ch, 2)
        assert exact_output_kl(ens, SRC, ch) == float("inf")


class TestMonteCarloKL:
    def test_matches_exact_within_se(self):
        ens, _ = make_ensemble()
        exact = exact_output_kl(ens, SRC, CH)
        mc, se = monte_carlo_kl(ens, SRC, CH, 50000, 5)
        assert se > 0
        assert abs(mc - exact) < 4 * se

    def test_deterministic_given_seed(self):
        ens, _ = make_ensemble()
        assert monte_carlo_kl(ens, SRC, CH, 500, 9) == \
            monte_carlo_kl(ens, SRC, CH, 500, 9)

    def test_minimum_samples(self):
        ens, _ = make_ensemble()
        with pytest.raises(ValueError):
            monte_carlo_kl(ens, SRC, CH, 50, 1)

    def test_singular_short_circuit(self):
        ch = BinaryInputDMC(
            Distribution([0.9, 0.1]), Distribution([0.1, 0.9]),
            Distribution([1.0, 0.0]), Distribution([0.0, 1.0]))
        params = CodeParams(n=6, k=2, rate_R=0.5, alpha_n=0.34, key_count=1,
                            target_distortion=0.25)
        ens = build_ensemble(params, SRC, ch, 2)
        assert monte_carlo_kl(ens, SRC, ch, 200, 1) == (float("inf"), 0.0)


class TestDetectionBounds:
    def test_values(self):
        assert detection_bound(0.3) == pytest.approx(0.7)
        assert detection_bound(2.0) == 0.0
        assert pinsker_detection_bound(0.5) == pytest.approx(0.5)
        assert pinsker_detection_bound(8.0) == 0.0
        with pytest.raises(ValueError):
            detection_bound(-0.1)
        with pytest.raises(ValueError):
            pinsker_detection_bound(-0.1)

    def test_pinsker_form_is_weaker_near_zero(self):
        # near zero divergence the sqrt form is the binding one
        assert pinsker_detection_bound(0.02) < detection_bound(0.02)


class TestLRTest:
    def test_sum_respects_pinsker_bound(self):
        ens, _ = make_ensemble()
        kl = exact_output_kl(ens, SRC, CH)
        det = lr_test_simulate(ens, SRC, CH, 20000, 5)
        floor = pinsker_detection_bound(kl)
        assert det.alpha_plus_beta >= floor - 4 * det.combined_se

    def test_perfect_detection_on_singular_channel(self):
        ch = BinaryInputDMC(
            Distribution([0.9, 0.1]), Distribution([0.1, 0.9]),
            Distribution([1.0, 0.0]), Distribution([0.0, 1.0]))
        params = CodeParams(n=6, k=2, rate_R=0.5, alpha_n=0.34, key_count=1,
                            target_distortion=0.25)
        ens = build_ensemble(params, SRC, ch, 2)
        det = lr_test_simulate(ens, SRC, ch, 1000, 7)
        assert det.miss_rate == 0.0
        assert det.false_alarm_rate == 0.0

    def test_blind_warden_cannot_do_better_than_chance(self):
        ch = BinaryInputDMC(
            Distribution([0.9, 0.1]), Distribution([0.1, 0.9]),
            Distribution([0.5, 0.5]), Distribution([0.5, 0.5]))
        params = CodeParams(n=6, k=2, rate_R=0.5, alpha_n=0.34, key_count=1,
                            target_distortion=0.25)
        ens = build_ensemble(params, SRC, ch, 2)
        det = lr_test_simulate(ens, SRC, ch, 2000, 7)
        # identical laws: the ratio ties everywhere and the test stays silent
        assert det.alpha_plus_beta == pytest.approx(1.0)

    def test_minimum_trials(self):
        ens, _ = make_ensemble()
        with pytest.raises(ValueError):
            lr_test_simulate(ens, SRC, CH, 500, 1)


class TestResolvability:
    def test_ratio_approaches_one(self):
        rows = resolvability_scaling_check(CH, [100, 1000, 10000, 100000])
        gaps = [abs(r.ratio - 1.0) for r in rows]
        assert gaps == sorted(gaps, reverse=True)
        assert gaps[-1] < 0.01

    def test_alpha_validation(self):
        with pytest.raises(ValueError):
            resolvability_scaling_check(CH, [100], c=2e-2)
        with pytest.raises(ValueError):
            resolvability_scaling_check(CH, [4], c=3.0)

    def test_row_values(self):
        (row,) = resolvability_scaling_check(CH, [400], c=1.0)
        assert row.alpha == pytest.approx(0.05)
        assert row.predicted_nats == pytest.approx(400 * 0.05 ** 2 * 2.25 / 2)


class TestPinskerGap:
    def test_bound_holds_on_small_ensembles(self):
        for seed in (1, 2, 3):
            ens, _ = make_ensemble(seed=seed)
            report = pinsker_gap_bound(ens, SRC, CH)
            assert report.holds
            assert report.kl_mixture_vs_product >= 0.0

    def test_single_codeword_alpha_matched_product(self):
        # with one codeword the mixture is itself a product law, but not
        # the alpha-bar product law, so the gap stays within the bound
        ens, _ = make_ensemble(k=1, rate_R=0.0, key_count=1)
        report = pinsker_gap_bound(ens, SRC, CH)
        assert report.holds


class TestReport:
    def test_covertness_report_roundtrip(self):
        ens, _ = make_ensemble()
        rep = covertness_report(ens, SRC, CH, 3, samples=500, exact=True)
        assert isinstance(rep, CovertnessReport)
        d = rep.to_json()
        assert d["n"] == 8
        assert d["kl_exact_nats"] == pytest.approx(rep.kl_exact)
        assert abs(rep.kl_mc_mean - rep.kl_exact) < 6 * rep.kl_mc_se
