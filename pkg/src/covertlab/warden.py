"""Warden-side covertness measurement.

The warden's induced output law is the mixture over messages and keys

    Qhat(z^n) = (1/|S|) sum_s sum_m Pr[M=m] Gamma^{(x) n}(z^n | x^n(m, s)),

compared against the all-off product law.  This module computes the KL
divergence between the two exactly (full enumeration, guarded), by Monte
Carlo (sampling z^n from Qhat and evaluating the mixture exactly at the
sampled points), and runs the threshold-1 likelihood-ratio detector.

All divergences are in nats unless stated otherwise.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ._rng import stream
from .dmc_core import LN2, BinaryInputDMC, Distribution, SourceSpec, chi_squared, \
    kl_divergence, mixture
from .separation_codec import (
    CodeEnsemble,
    GuardExceededError,
    all_source_sequences,
    message_distribution,
)

#: largest |Z|^n the exact divergence enumeration will attempt
EXACT_ENUM_GUARD = 1 << 20


@dataclass(frozen=True)
class CovertnessReport:
    """Exact and/or Monte-Carlo KL of the warden's mixture vs the idle law."""

    n: int
    seed: int
    alpha_bar: float
    kl_exact: float | None = None
    kl_mc_mean: float | None = None
    kl_mc_se: float | None = None
    samples: int = 0

    def to_json(self) -> dict:
        return {
            "n": self.n, "seed": self.seed, "alpha_bar": self.alpha_bar,
            "kl_exact_nats": self.kl_exact,
            "kl_mc_mean_nats": self.kl_mc_mean,
            "kl_mc_se_nats": self.kl_mc_se,
            "samples": self.samples,
        }


def _component_weights(ensemble: CodeEnsemble, source: SourceSpec) -> np.ndarray:
    """Mixture weight of each (key, message) component, bank-major."""
    p_m = message_distribution(ensemble, source)
    s_count = ensemble.key_count
    return np.tile(p_m / s_count, s_count)


def _log_ratio_rows(channel: BinaryInputDMC):
    """Per-symbol log ratios log Gamma_Z(z|x) - log Gamma_Z(z|0).

    Returns (delta, base_log) where delta[z] is the on/off log ratio
    extended with a trailing 0 used by the padded support representation.
    """
    z_rows = channel.z_rows
    with np.errstate(divide="ignore", invalid="ignore"):
        delta = np.log(z_rows[1]) - np.log(z_rows[0])
        base = np.log(z_rows[0])
    return delta, base


def exact_output_kl(ensemble: CodeEnsemble, source: SourceSpec,
                    channel: BinaryInputDMC,
                    guard: int = EXACT_ENUM_GUARD) -> float:
    """KL(Qhat^n || Gamma^{(x) n}(.|0^n)) by full output enumeration."""
    n = ensemble.n
    z_size = len(channel.z_given_0)
    if z_size ** n > guard:
        raise GuardExceededError(f"|Z|^n = {z_size ** n} exceeds guard {guard}")
    weights = _component_weights(ensemble, source)
    z_seqs = all_source_sequences(z_size, n, guard)
    with np.errstate(divide="ignore"):
        log_rows = np.log(channel.z_rows)
    # component log-probabilities, (num_sequences, num_components)
    comp = np.empty((z_seqs.shape[0], weights.size))
    c = 0
    for s in range(ensemble.key_count):
        for m in range(ensemble.message_count):
            x = ensemble.codeword_dense(m, s)
            comp[:, c] = log_rows[x[None, :], z_seqs].sum(axis=1)
            c += 1
    with np.errstate(over="ignore", invalid="ignore"):
        q = np.exp(comp) @ weights
    log_p0 = log_rows[0][z_seqs].sum(axis=1) if n else np.zeros(1)
    mass = q > 0.0
    if np.any(mass & np.isneginf(log_p0)):
        return float("inf")
    val = float(np.sum(q[mass] * (np.log(q[mass]) - log_p0[mass])))
    return max(val, 0.0)


def _mixture_log_ratio(z_block: np.ndarray, ensemble: CodeEnsemble,
                       log_weights: np.ndarray, delta: np.ndarray) -> np.ndarray:
    """log(Qhat(z)/P0(z)) for a block of sampled sequences.

    ``delta`` must be finite; callers handle singular channels separately.
    """
    supports = ensemble.supports.reshape(-1, ensemble.supports.shape[-1])
    n_comp, w_max = supports.shape
    flat = supports.reshape(-1)
    out = np.empty(z_block.shape[0])
    # cap the (block, component, weight) workspace
    step = max(1, (1 << 24) // max(1, n_comp * w_max))
    for start in range(0, z_block.shape[0], step):
        zb = z_block[start:start + step]
        d_block = delta[zb]
        # padded support index n addresses this appended zero column
        d_ext = np.concatenate([d_block, np.zeros((zb.shape[0], 1))], axis=1)
        vals = d_ext[:, flat].reshape(zb.shape[0], n_comp, w_max).sum(axis=2)
        scores = vals + log_weights[None, :]
        peak = scores.max(axis=1)
        out[start:start + step] = peak + np.log(
            np.exp(scores - peak[:, None]).sum(axis=1))
    return out


def _sample_warden_outputs(ensemble: CodeEnsemble, weights: np.ndarray,
                           channel: BinaryInputDMC, count: int,
                           rng: np.random.Generator) -> np.ndarray:
    """Draw z^n ~ Qhat by sampling a component then the product channel law."""
    n = ensemble.n
    z_rows = channel.z_rows
    cdf0 = np.cumsum(z_rows[0])
    cdf1 = np.cumsum(z_rows[1])
    comps = rng.choice(weights.size, size=count, p=weights)
    supports = ensemble.supports.reshape(-1, ensemble.supports.shape[-1])
    out = np.minimum(np.searchsorted(cdf0, rng.random((count, n)), side="right"),
                     z_rows.shape[1] - 1)
    # redraw the on-positions of every sample at once; padded entries (index
    # n) are clipped to a scratch column that is dropped afterwards
    pos = supports[comps]
    on_draws = np.minimum(
        np.searchsorted(cdf1, rng.random(pos.shape), side="right"),
        z_rows.shape[1] - 1)
    padded = np.concatenate([out, np.zeros((count, 1), dtype=out.dtype)], axis=1)
    np.put_along_axis(padded, pos.astype(np.int64), on_draws, axis=1)
    return padded[:, :n]


def monte_carlo_kl(ensemble: CodeEnsemble, source: SourceSpec,
                   channel: BinaryInputDMC, samples: int,
                   seed: int) -> tuple[float, float]:
    """Unbiased MC estimate (mean, standard error) of the exact output KL.

    Z^n is sampled from the true mixture and log(Qhat/P0) is evaluated
    exactly at every sampled point, so the estimator's only error is the
    Monte-Carlo spread reported as ``se``.
    """
    if samples < 100:
        raise ValueError("need at least 100 samples")
    if channel.warden_singular and ensemble.weights.max() > 0:
        return float("inf"), 0.0
    batch = max(1, min(4096, (1 << 24) // max(1, ensemble.n)))
    weights = _component_weights(ensemble, source)
    delta, _ = _log_ratio_rows(channel)
    with np.errstate(divide="ignore"):
        log_weights = np.log(np.where(weights > 0, weights, 1.0))
    log_weights[weights == 0.0] = -np.inf
    rng = stream(seed, "warden-mc")
    acc = []
    remaining = samples
    while remaining > 0:
        count = min(batch, remaining)
        z_block = _sample_warden_outputs(ensemble, weights, channel, count, rng)
        vals = _mixture_log_ratio(z_block, ensemble, log_weights, delta)
        if not np.all(np.isfinite(vals)):
            raise RuntimeError("mixture evaluated to zero at a sampled point")
        acc.append(vals)
        remaining -= count
    vals = np.concatenate(acc)
    mean = float(vals.mean())
    se = float(vals.std(ddof=1) / math.sqrt(samples))
    return mean, se


def detection_bound(kl: float) -> float:
    """Lower bound max(0, 1 - kl) on miss + false-alarm probabilities.

    The caller chooses the divergence convention; pass nats or bits as
    desired and interpret accordingly.
    """
    if kl < 0:
        raise ValueError("kl must be nonnegative")
    return max(0.0, 1.0 - kl)


def pinsker_detection_bound(kl_nats: float) -> float:
    """The always-valid form 1 - sqrt(kl/2) of the detection bound."""
    if kl_nats < 0:
        raise ValueError("kl must be nonnegative")
    return max(0.0, 1.0 - math.sqrt(kl_nats / 2.0))


@dataclass(frozen=True)
class DetectionResult:
    miss_rate: float        # declared silent although transmitting
    miss_se: float
    false_alarm_rate: float  # declared transmitting although silent
    false_alarm_se: float
    trials: int

    @property
    def alpha_plus_beta(self) -> float:
        return self.miss_rate + self.false_alarm_rate

    @property
    def combined_se(self) -> float:
        return math.hypot(self.miss_se, self.false_alarm_se)


def lr_test_simulate(ensemble: CodeEnsemble, source: SourceSpec,
                     channel: BinaryInputDMC, trials: int,
                     seed: int) -> DetectionResult:
    """Warden's likelihood-ratio test at threshold 1 under both hypotheses.

    Declares transmission iff Qhat(z)/P0(z) > 1; ties go to the silent
    hypothesis.  Returns empirical miss and false-alarm rates.
    """
    if trials < 1000:
        raise ValueError("need at least 1000 trials")
    weights = _component_weights(ensemble, source)
    delta, _ = _log_ratio_rows(channel)
    with np.errstate(divide="ignore"):
        log_weights = np.log(np.where(weights > 0, weights, 1.0))
    log_weights[weights == 0.0] = -np.inf
    singular = channel.warden_singular and ensemble.weights.max() > 0
    rng = stream(seed, "warden-lr")
    z_rows = channel.z_rows
    cdf0 = np.cumsum(z_rows[0])
    n = ensemble.n

    def statistic(z_block):
        if singular:
            return _singular_log_ratio(z_block, ensemble, channel, log_weights)
        return _mixture_log_ratio(z_block, ensemble, log_weights, delta)

    misses = 0
    alarms = 0
    batch = max(1, min(4096, (1 << 24) // max(1, n)))
    done = 0
    while done < trials:
        count = min(batch, trials - done)
        z1 = _sample_warden_outputs(ensemble, weights, channel, count, rng)
        misses += int(np.sum(statistic(z1) <= 0.0))
        z0 = np.minimum(np.searchsorted(cdf0, rng.random((count, n)), side="right"),
                        z_rows.shape[1] - 1)
        alarms += int(np.sum(statistic(z0) > 0.0))
        done += count
    miss = misses / trials
    fa = alarms / trials
    return DetectionResult(
        miss_rate=miss, miss_se=math.sqrt(max(miss * (1 - miss), 0.0) / trials),
        false_alarm_rate=fa,
        false_alarm_se=math.sqrt(max(fa * (1 - fa), 0.0) / trials),
        trials=trials)


def _singular_log_ratio(z_block, ensemble, channel, log_weights):
    """Exact log ratio when supports differ: +inf where P0 vanishes."""
    with np.errstate(divide="ignore"):
        log_rows = np.log(channel.z_rows)
    supports = ensemble.supports.reshape(-1, ensemble.supports.shape[-1])
    flat_w = ensemble.weights.reshape(-1)
    out = np.empty(z_block.shape[0])
    for b, z in enumerate(z_block):
        base = log_rows[0, z]
        comps = np.empty(supports.shape[0])
        for c in range(supports.shape[0]):
            on = supports[c, : flat_w[c]]
            mask = np.zeros(z.size, dtype=bool)
            mask[on] = True
            comps[c] = log_rows[1, z[mask]].sum() + base[~mask].sum()
        top = comps + log_weights
        peak = top.max()
        log_q = peak + math.log(np.exp(top - peak).sum()) if np.isfinite(peak) \
            else -np.inf
        log_p0 = base.sum()
        if log_q == -np.inf:
            out[b] = -np.inf
        elif np.isneginf(log_p0):
            out[b] = np.inf
        else:
            out[b] = log_q - log_p0
    return out


@dataclass(frozen=True)
class ResolvabilityRow:
    n: int
    alpha: float
    kl_nats: float
    predicted_nats: float

    @property
    def ratio(self) -> float:
        if self.predicted_nats == 0.0:
            return 1.0
        return self.kl_nats / self.predicted_nats


def resolvability_scaling_check(channel: BinaryInputDMC, n_list,
                                c: float = 1.0) -> list[ResolvabilityRow]:
    """Single-letter verification of the square-root law.

    For the fully random Bernoulli(alpha_n) input mixture with
    alpha_n = c / sqrt(n), the induced output law is the product
    Q_alpha^{(x) n}, whose divergence from the idle law is
    n * D(Q_alpha || Gamma(.|0)).  The second-order prediction is
    n * alpha^2 * chi^2 / 2; their ratio tends to 1.
    """
    chi2 = chi_squared(channel.z_given_1, channel.z_given_0)
    rows = []
    for n in n_list:
        alpha = c / math.sqrt(n)
        if alpha * n < 1:
            raise ValueError(f"alpha_n * n < 1 at n={n}")
        if alpha > 1.0:
            raise ValueError(f"alpha_n = {alpha} > 1 at n={n}")
        q_alpha = mixture(channel.z_given_0, channel.z_given_1, alpha)
        kl = n * kl_divergence(q_alpha, channel.z_given_0, unit="nats")
        predicted = n * alpha * alpha * chi2 / 2.0
        rows.append(ResolvabilityRow(n=int(n), alpha=alpha, kl_nats=kl,
                                     predicted_nats=predicted))
    return rows


@dataclass(frozen=True)
class PinskerGapReport:
    gap: float
    bound: float
    kl_mixture_vs_null: float
    kl_product_vs_null: float
    kl_mixture_vs_product: float
    alpha_bar: float

    @property
    def holds(self) -> bool:
        return self.gap <= self.bound + 1e-9


def pinsker_gap_bound(ensemble: CodeEnsemble, source: SourceSpec,
                      channel: BinaryInputDMC,
                      alpha_bar: float | None = None,
                      guard: int = EXACT_ENUM_GUARD) -> PinskerGapReport:
    """Check |KL(Qhat||P0^n) - KL(Qbar^n||P0^n)| against its resolvability bound.

    Qbar is the single-letter mixture at the mean on-fraction alpha_bar;
    the bound is KL(Qhat||Qbar^n) + n log(1/min-support-prob of the idle
    row) * sqrt(KL(Qhat||Qbar^n)/2).
    """
    n = ensemble.n
    if alpha_bar is None:
        alpha_bar = ensemble.mean_on_fraction
    q_bar = mixture(channel.z_given_0, channel.z_given_1, alpha_bar)
    kl_prod = n * kl_divergence(q_bar, channel.z_given_0, unit="nats")
    kl_mix = exact_output_kl(ensemble, source, channel, guard)
    kl_mix_prod = _exact_kl_vs_product(ensemble, source, channel, q_bar, guard)
    p0 = channel.z_given_0.probs
    nabla0 = float(p0[p0 > 0].min())
    bound = kl_mix_prod + n * math.log(1.0 / nabla0) * math.sqrt(kl_mix_prod / 2.0)
    return PinskerGapReport(
        gap=abs(kl_mix - kl_prod), bound=bound,
        kl_mixture_vs_null=kl_mix, kl_product_vs_null=kl_prod,
        kl_mixture_vs_product=kl_mix_prod, alpha_bar=alpha_bar)


def _exact_kl_vs_product(ensemble: CodeEnsemble, source: SourceSpec,
                         channel: BinaryInputDMC, q_ref: Distribution,
                         guard: int) -> float:
    """KL(Qhat^n || q_ref^{(x) n}) by enumeration."""
    n = ensemble.n
    z_size = len(channel.z_given_0)
    if z_size ** n > guard:
        raise GuardExceededError("enumeration guard exceeded")
    weights = _component_weights(ensemble, source)
    z_seqs = all_source_sequences(z_size, n, guard)
    with np.errstate(divide="ignore"):
        log_rows = np.log(channel.z_rows)
        log_ref = np.log(q_ref.probs)
    comp = np.empty((z_seqs.shape[0], weights.size))
    c = 0
    for s in range(ensemble.key_count):
        for m in range(ensemble.message_count):
            x = ensemble.codeword_dense(m, s)
            comp[:, c] = log_rows[x[None, :], z_seqs].sum(axis=1)
            c += 1
    with np.errstate(over="ignore"):
        q = np.exp(comp) @ weights
    ref = log_ref[z_seqs].sum(axis=1)
    mass = q > 0.0
    if np.any(mass & np.isneginf(ref)):
        return float("inf")
    val = float(np.sum(q[mass] * (np.log(q[mass]) - ref[mass])))
    return max(val, 0.0)


def covertness_report(ensemble: CodeEnsemble, source: SourceSpec,
                      channel: BinaryInputDMC, seed: int,
                      samples: int = 0, exact: bool = False) -> CovertnessReport:
    kl_exact = None
    kl_mc = kl_se = None
    if exact:
        kl_exact = exact_output_kl(ensemble, source, channel)
    if samples:
        kl_mc, kl_se = monte_carlo_kl(ensemble, source, channel, samples, seed)
    return CovertnessReport(
        n=ensemble.n, seed=ensemble.seed, alpha_bar=ensemble.mean_on_fraction,
        kl_exact=kl_exact, kl_mc_mean=kl_mc, kl_mc_se=kl_se,
        samples=samples)
