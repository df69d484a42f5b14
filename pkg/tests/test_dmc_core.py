"""Distribution, divergence and channel/source validation tests."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from covertlab.dmc_core import (
    AlphabetMismatchError,
    BinaryInputDMC,
    Distribution,
    SourceSpec,
    ValidationError,
    bernoulli_hamming_source,
    bsc_pair_channel,
    bsc_rows,
    channel_from_json,
    chi_squared,
    kl_divergence,
    mixture,
    product_log_prob,
    source_from_json,
    total_variation,
)

LN2 = math.log(2.0)


def prob_vectors(size=None):
    sizes = st.just(size) if size else st.integers(2, 6)
    return sizes.flatmap(
        lambda m: st.lists(st.floats(1e-3, 1.0), min_size=m, max_size=m)
    ).map(lambda v: Distribution(np.array(v) / np.sum(v)))


class TestDistribution:
    def test_normalizes_float_dust(self):
        d = Distribution([0.5, 0.5 + 5e-10])
        assert math.isclose(float(d.probs.sum()), 1.0, abs_tol=1e-15)

    def test_rejects_bad_sum(self):
        with pytest.raises(ValidationError):
            Distribution([0.5, 0.5 + 5e-9])

    def test_rejects_negative(self):
        with pytest.raises(ValidationError):
            Distribution([1.2, -0.2])

    def test_rejects_nan_and_shape(self):
        with pytest.raises(ValidationError):
            Distribution([0.5, float("nan")])
        with pytest.raises(ValidationError):
            Distribution([[0.5, 0.5]])
        with pytest.raises(ValidationError):
            Distribution([])

    def test_immutable(self):
        d = Distribution([0.3, 0.7])
        with pytest.raises(ValueError):
            d.probs[0] = 0.5

    def test_support_and_len(self):
        d = Distribution([0.0, 0.4, 0.6])
        assert len(d) == 3
        assert list(d.support) == [False, True, True]

    def test_eq_hash(self):
        a = Distribution([0.3, 0.7])
        b = Distribution([0.3, 0.7])
        c = Distribution([0.7, 0.3])
        assert a == b and hash(a) == hash(b)
        assert a != c

    def test_sample_range(self):
        rng = np.random.default_rng(0)
        d = Distribution([0.0, 1.0])
        assert set(d.sample(rng, size=50)) == {1}


class TestDivergences:
    def test_kl_bsc_oracle(self):
        # D((0.2, 0.8) || (0.8, 0.2)) = 0.6 * log 4
        p = Distribution([0.2, 0.8])
        q = Distribution([0.8, 0.2])
        assert kl_divergence(p, q, unit="bits") == pytest.approx(1.2, abs=1e-14)
        assert kl_divergence(p, q) == pytest.approx(0.6 * math.log(4.0), abs=1e-14)

    def test_kl_zero_on_equal(self):
        p = Distribution([0.25, 0.75])
        assert kl_divergence(p, p) == 0.0

    def test_kl_infinite_on_support_violation(self):
        p = Distribution([0.5, 0.5])
        q = Distribution([1.0, 0.0])
        assert kl_divergence(p, q) == float("inf")
        # the reverse direction is finite: 0 log 0 = 0
        assert math.isfinite(kl_divergence(q, p))

    def test_kl_alphabet_mismatch(self):
        with pytest.raises(AlphabetMismatchError):
            kl_divergence(Distribution([0.5, 0.5]), Distribution([0.2, 0.3, 0.5]))

    def test_chi_squared_oracles(self):
        a = Distribution([0.2, 0.8])
        b = Distribution([0.8, 0.2])
        assert chi_squared(a, b) == pytest.approx(2.25, abs=1e-14)
        c = Distribution([0.5, 0.5])
        d = Distribution([0.25, 0.75])
        assert chi_squared(c, d) == pytest.approx(1.0 / 3.0, abs=1e-14)

    def test_chi_squared_zero_denominator(self):
        p = Distribution([0.5, 0.5])
        q = Distribution([1.0, 0.0])
        assert chi_squared(p, q) == float("inf")
        r = Distribution([1.0, 0.0])
        assert chi_squared(r, q) == 0.0

    def test_total_variation_oracle(self):
        assert total_variation(Distribution([0.2, 0.8]),
                               Distribution([0.8, 0.2])) == pytest.approx(0.6)

    def test_mixture(self):
        m = mixture(Distribution([1.0, 0.0]), Distribution([0.0, 1.0]), 0.3)
        np.testing.assert_allclose(m.probs, [0.7, 0.3])
        with pytest.raises(ValueError):
            mixture(Distribution([1.0, 0.0]), Distribution([0.0, 1.0]), 1.5)

    @given(prob_vectors(), prob_vectors())
    @settings(max_examples=60, deadline=None)
    def test_kl_nonnegative_and_chi2_dominates(self, p, q):
        if len(p) != len(q):
            return
        kl = kl_divergence(p, q)
        assert kl >= 0.0
        # log x <= x - 1 gives D(p || q) <= chi^2(p || q) in nats
        assert kl <= chi_squared(p, q) + 1e-12

    @given(prob_vectors(), prob_vectors())
    @settings(max_examples=60, deadline=None)
    def test_pinsker(self, p, q):
        if len(p) != len(q):
            return
        tv = total_variation(p, q)
        assert tv <= math.sqrt(kl_divergence(p, q) / 2.0) + 1e-12

    @given(prob_vectors(size=3), prob_vectors(size=3),
           st.floats(0.0, 1.0))
    @settings(max_examples=60, deadline=None)
    def test_mixture_is_distribution(self, p, q, a):
        m = mixture(p, q, a)
        assert math.isclose(float(m.probs.sum()), 1.0, abs_tol=1e-12)

    @given(prob_vectors(size=4), prob_vectors(size=4))
    @settings(max_examples=40, deadline=None)
    def test_small_mixture_kl_matches_chi2_expansion(self, off, on):
        # KL((1-a) off + a on || off) ~ a^2 chi^2(on || off) / 2 for small a;
        # the expansion parameter is a * max likelihood ratio, so require
        # the ratio bounded for the quadratic term to dominate
        alpha = 0.002
        if float(np.max(on.probs / off.probs)) > 20.0:
            return
        chi2 = chi_squared(on, off)
        if not 1e-6 < chi2 < 1e3:
            return
        kl = kl_divergence(mixture(off, on, alpha), off)
        ratio = kl / (alpha * alpha * chi2 / 2.0)
        assert 0.9 < ratio < 1.1


class TestProductLogProb:
    def test_matches_direct_product(self):
        rows = np.array([[0.8, 0.2], [0.3, 0.7]])
        x = [0, 1, 1, 0]
        z = [0, 1, 0, 1]
        expected = math.log(0.8) + math.log(0.7) + math.log(0.3) + math.log(0.2)
        assert product_log_prob(x, rows, z) == pytest.approx(expected)

    def test_zero_probability_gives_neg_inf(self):
        rows = np.array([[1.0, 0.0], [0.0, 1.0]])
        assert product_log_prob([0], rows, [1]) == float("-inf")

    def test_empty_block(self):
        rows = np.array([[0.5, 0.5], [0.5, 0.5]])
        assert product_log_prob([], rows, []) == 0.0

    def test_index_validation(self):
        rows = np.array([[0.5, 0.5], [0.5, 0.5]])
        with pytest.raises(ValueError):
            product_log_prob([2], rows, [0])
        with pytest.raises(ValueError):
            product_log_prob([0], rows, [5])
        with pytest.raises(ValueError):
            product_log_prob([0, 1], rows, [0])


class TestChannelAndSource:
    def test_bsc_rows(self):
        r0, r1 = bsc_rows(0.1)
        np.testing.assert_allclose(r0.probs, [0.9, 0.1])
        np.testing.assert_allclose(r1.probs, [0.1, 0.9])
        with pytest.raises(ValueError):
            bsc_rows(1.5)

    def test_singularity_flags(self):
        ch = bsc_pair_channel(0.1, 0.2)
        assert not ch.warden_singular and not ch.receiver_singular
        sing = BinaryInputDMC(
            Distribution([0.9, 0.1]), Distribution([0.1, 0.9]),
            Distribution([1.0, 0.0]), Distribution([0.5, 0.5]))
        assert sing.warden_singular
        rsing = BinaryInputDMC(
            Distribution([1.0, 0.0]), Distribution([0.5, 0.5]),
            Distribution([0.8, 0.2]), Distribution([0.2, 0.8]))
        assert rsing.receiver_singular

    def test_row_alphabet_mismatch(self):
        with pytest.raises(AlphabetMismatchError):
            BinaryInputDMC(
                Distribution([0.9, 0.1]), Distribution([0.2, 0.3, 0.5]),
                Distribution([0.8, 0.2]), Distribution([0.2, 0.8]))

    def test_source_validation(self):
        src = bernoulli_hamming_source(0.3)
        np.testing.assert_allclose(src.pmf.probs, [0.7, 0.3])
        assert src.d_max == 1.0
        with pytest.raises(ValidationError):
            SourceSpec([0.5, 0.5], [[0.0, 1.0], [1.0, 0.5]])  # no zero row
        with pytest.raises(ValidationError):
            SourceSpec([0.5, 0.5], [[0.0, -1.0], [1.0, 0.0]])
        with pytest.raises(ValidationError):
            SourceSpec([0.5, 0.5], [[0.0, 1.0]])

    def test_channel_from_json_variants(self, tmp_path):
        doc = {"y_given_0": [0.9, 0.1], "y_given_1": [0.1, 0.9],
               "z_given_0": [0.8, 0.2], "z_given_1": [0.2, 0.8]}
        import json
        ch1 = channel_from_json(doc)
        ch2 = channel_from_json(json.dumps(doc))
        p = tmp_path / "ch.json"
        p.write_text(json.dumps(doc))
        with open(p) as fh:
            ch3 = channel_from_json(fh)
        for ch in (ch1, ch2, ch3):
            np.testing.assert_allclose(ch.z_given_1.probs, [0.2, 0.8])

    def test_channel_from_json_errors(self):
        with pytest.raises(ValidationError, match="missing row"):
            channel_from_json({"y_given_0": [1.0]})
        with pytest.raises(ValidationError, match="z_given_1"):
            channel_from_json({"y_given_0": [0.9, 0.1], "y_given_1": [0.1, 0.9],
                               "z_given_0": [0.8, 0.2], "z_given_1": [0.2, 0.9]})

    def test_source_from_json(self):
        src = source_from_json({"pmf": [0.5, 0.5],
                                "distortion": [[0.0, 1.0], [1.0, 0.0]]})
        assert src.recon_alphabet_size == 2
        with pytest.raises(ValidationError, match="missing key"):
            source_from_json({"pmf": [0.5, 0.5]})
