"""Executable separation architecture: source code, keyed covert channel code.

The transmitter compresses a length-k source block to a message index
with a nearest-codeword (minimum-distortion) encoder, maps (message, key)
to a sparse binary codeword, and the receiver runs maximum-likelihood
decoding inside the key's codebook bank followed by a codebook lookup.

Codebooks are a pure function of (seed, params, source); regeneration is
bit-identical, and every Monte-Carlo trial owns a counter-based RNG
stream so parallel or batched execution cannot change results.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace

import numpy as np

from ._rng import stream
from .dmc_core import BinaryInputDMC, SourceSpec
from .limits import distortion_at_rate, rate_distortion

log = logging.getLogger("covertlab")

MODE_IID = "iid-bernoulli"
MODE_FIXED_WEIGHT = "fixed-weight"

#: refuse to materialize codebooks with more message bits than this
MAX_MESSAGE_BITS = 26


class GuardExceededError(RuntimeError):
    """An exact enumeration or codebook size guard was exceeded."""


@dataclass(frozen=True)
class CodeParams:
    """Block and codebook parameters for one operating point.

    ``rate_R`` is nominal bits per source symbol; the message count is
    ``2**ceil(k * rate_R)`` and the realized rate is reported separately.
    ``epsilon`` is the distortion back-off: the source codebook is drawn
    from the output marginal of the rate-distortion test channel at
    ``target_distortion / (1 + epsilon)``.
    """

    n: int
    k: int
    rate_R: float
    alpha_n: float
    key_count: int = 1
    codeword_mode: str = MODE_FIXED_WEIGHT
    epsilon: float = 0.05
    target_distortion: float | None = None

    def __post_init__(self):
        if self.n < 1 or self.k < 1 or self.key_count < 1:
            raise ValueError("n, k and key_count must be positive")
        if not 0.0 < self.alpha_n < 1.0:
            raise ValueError(f"alpha_n must be in (0, 1), got {self.alpha_n!r}")
        if self.rate_R < 0:
            raise ValueError("rate_R must be nonnegative")
        if self.codeword_mode not in (MODE_IID, MODE_FIXED_WEIGHT):
            raise ValueError(f"unknown codeword_mode {self.codeword_mode!r}")
        if self.epsilon < 0:
            raise ValueError("epsilon must be nonnegative")
        if self.target_distortion is not None and self.target_distortion < 0:
            raise ValueError("target_distortion must be nonnegative")
        if self.message_bits > MAX_MESSAGE_BITS:
            raise GuardExceededError(
                f"ceil(k * rate_R) = {self.message_bits} message bits is beyond "
                f"the enumeration guard ({MAX_MESSAGE_BITS})")

    @property
    def message_bits(self) -> int:
        return max(0, math.ceil(self.k * self.rate_R - 1e-12))

    @property
    def message_count(self) -> int:
        return 1 << self.message_bits

    @property
    def realized_rate(self) -> float:
        return self.message_bits / self.k

    @property
    def fixed_weight(self) -> int:
        """Per-codeword Hamming weight in fixed-weight mode (clamped to >= 1)."""
        w = int(round(self.alpha_n * self.n))
        if w < 1:
            log.warning("alpha_n * n = %.3g < 1; clamping codeword weight to 1",
                        self.alpha_n * self.n)
            w = 1
        return min(w, self.n)


@dataclass(frozen=True)
class CodeEnsemble:
    """Materialized source and channel codebooks.

    Channel codewords are stored sparsely: ``supports[s, m]`` holds the
    sorted on-positions of codeword (m, s), padded with ``n`` up to the
    widest weight in the ensemble; ``weights[s, m]`` is the true weight.
    """

    params: CodeParams
    seed: int
    source_codebook: np.ndarray = field(repr=False)  # (M, k) ints
    supports: np.ndarray = field(repr=False)         # (S, M, w_max) int32, pad = n
    weights: np.ndarray = field(repr=False)          # (S, M) int32

    @property
    def n(self) -> int:
        return self.params.n

    @property
    def message_count(self) -> int:
        return self.params.message_count

    @property
    def key_count(self) -> int:
        return self.params.key_count

    @property
    def mean_on_fraction(self) -> float:
        """Mean codeword weight divided by n (unweighted over the ensemble)."""
        return float(self.weights.mean()) / self.n

    def codeword_dense(self, m: int, s: int) -> np.ndarray:
        """Codeword x^n as a dense 0/1 vector."""
        if not 0 <= m < self.message_count:
            raise IndexError(f"message index {m} out of range")
        if not 0 <= s < self.key_count:
            raise IndexError(f"key index {s} out of range")
        x = np.zeros(self.n, dtype=np.uint8)
        x[self.supports[s, m, : self.weights[s, m]]] = 1
        return x


def codebook_marginal(params: CodeParams, source: SourceSpec) -> np.ndarray:
    """Reconstruction-symbol marginal the source codebook is drawn from.

    The marginal of the rate-distortion test channel at the backed-off
    distortion ``D / (1 + epsilon)``; when no target distortion is given
    it is derived from the realized rate via the inverse of R(D).
    """
    if params.target_distortion is not None:
        target = params.target_distortion
    else:
        target = distortion_at_rate(source, params.realized_rate)
    backed_off = target / (1.0 + params.epsilon)
    rd = rate_distortion(source, backed_off)
    marginal = source.pmf.probs @ rd.test_channel
    marginal = np.clip(marginal, 0.0, None)
    return marginal / marginal.sum()


def _sample_supports_fixed(rng: np.random.Generator, count: int, n: int,
                           w: int) -> np.ndarray:
    """count sorted w-subsets of {0..n-1}; rejection for sparse, argsort otherwise."""
    if w * 2 > n:
        order = np.argsort(rng.random((count, n)), axis=1, kind="stable")
        return np.sort(order[:, :w].astype(np.int32), axis=1)
    idx = rng.integers(0, n, size=(count, w), dtype=np.int32)
    idx.sort(axis=1)
    for _ in range(64):
        dup = (np.diff(idx, axis=1) == 0).any(axis=1)
        if not dup.any():
            return idx
        redo = rng.integers(0, n, size=(int(dup.sum()), w), dtype=np.int32)
        redo.sort(axis=1)
        idx[dup] = redo
    raise RuntimeError("failed to draw distinct support indices")  # pragma: no cover


def build_ensemble(params: CodeParams, source: SourceSpec,
                   channel: BinaryInputDMC, seed: int) -> CodeEnsemble:
    """Draw the source codebook and the per-key channel codebook banks."""
    m_count, s_count, n = params.message_count, params.key_count, params.n
    marginal = codebook_marginal(params, source)
    src_rng = stream(seed, "source-codebook")
    source_codebook = src_rng.choice(len(marginal), size=(m_count, params.k),
                                     p=marginal).astype(np.int32)

    if params.codeword_mode == MODE_FIXED_WEIGHT:
        w = params.fixed_weight
        supports = np.empty((s_count, m_count, w), dtype=np.int32)
        for s in range(s_count):
            rng = stream(seed, "channel-codebook", s)
            supports[s] = _sample_supports_fixed(rng, m_count, n, w)
        weights = np.full((s_count, m_count), w, dtype=np.int32)
    else:
        raw = []
        weights = np.empty((s_count, m_count), dtype=np.int32)
        for s in range(s_count):
            rng = stream(seed, "channel-codebook", s)
            bits = rng.random((m_count, n)) < params.alpha_n
            weights[s] = bits.sum(axis=1)
            raw.append([np.flatnonzero(row).astype(np.int32) for row in bits])
        w_max = max(1, int(weights.max()))
        supports = np.full((s_count, m_count, w_max), n, dtype=np.int32)
        for s in range(s_count):
            for m, idx in enumerate(raw[s]):
                supports[s, m, : idx.size] = idx

    source_codebook.setflags(write=False)
    supports.setflags(write=False)
    weights.setflags(write=False)
    return CodeEnsemble(params, seed, source_codebook, supports, weights)


def block_distortions(u_seq: np.ndarray, ensemble: CodeEnsemble,
                      source: SourceSpec) -> np.ndarray:
    """Mean per-symbol distortion of u_seq against every source codeword."""
    u_seq = np.asarray(u_seq, dtype=np.int32)
    return source.distortion[u_seq[None, :], ensemble.source_codebook].mean(axis=1)


def source_encode(u_seq, ensemble: CodeEnsemble, source: SourceSpec) -> int:
    """Minimum-distortion message index; ties break to the lowest index."""
    return int(np.argmin(block_distortions(u_seq, ensemble, source)))


def channel_encode(m: int, s: int, ensemble: CodeEnsemble) -> np.ndarray:
    return ensemble.codeword_dense(m, s)


def sample_channel(x_seq, channel: BinaryInputDMC, which: str,
                   rng: np.random.Generator) -> np.ndarray:
    """Memoryless per-symbol sampling of the Y or Z output sequence."""
    rows = channel.y_rows if which == "Y" else channel.z_rows
    x_seq = np.asarray(x_seq, dtype=np.int64)
    if x_seq.size == 0:
        return np.empty(0, dtype=np.int64)
    cdf = np.cumsum(rows, axis=1)
    u = rng.random(x_seq.size)
    out = np.empty(x_seq.size, dtype=np.int64)
    for v in (0, 1):
        mask = x_seq == v
        if mask.any():
            out[mask] = np.searchsorted(cdf[v], u[mask], side="right")
    return np.minimum(out, rows.shape[1] - 1)


def _sample_output_sparse(support, weight, n, rows, rng):
    """Sample an output block for a sparse codeword.

    Draws the all-off block first and then re-draws the on-positions, in
    a fixed order, so results match regardless of the codeword weight.
    """
    cdf0 = np.cumsum(rows[0])
    cdf1 = np.cumsum(rows[1])
    out = np.searchsorted(cdf0, rng.random(n), side="right")
    on = support[:weight]
    out[on] = np.searchsorted(cdf1, rng.random(weight), side="right")
    return np.minimum(out, rows.shape[1] - 1)


def _log_rows(rows: np.ndarray) -> np.ndarray:
    with np.errstate(divide="ignore"):
        return np.log(rows)


def ml_channel_decode(y_seq, s: int, ensemble: CodeEnsemble,
                      channel: BinaryInputDMC) -> int:
    """Maximum-likelihood message under key s; ties break to the lowest index."""
    if not 0 <= s < ensemble.key_count:
        raise IndexError(f"key index {s} out of range")
    y_seq = np.asarray(y_seq, dtype=np.int64)
    log_rows = _log_rows(channel.y_rows)
    scores = _bank_scores(y_seq, ensemble.supports[s], ensemble.weights[s], log_rows)
    return int(np.argmax(scores))


def _bank_scores(out_seq: np.ndarray, supports: np.ndarray, weights: np.ndarray,
                 log_rows: np.ndarray) -> np.ndarray:
    """log P(out | codeword) for each codeword of one bank, up to a common shift.

    Uses the sparse on-position representation when both rows are finite;
    falls back to exact per-codeword evaluation when a deterministic row
    makes the difference ill-defined.
    """
    n = out_seq.size
    base_terms = log_rows[0, out_seq]
    if np.isfinite(log_rows).all():
        diff = np.append(log_rows[1, out_seq] - log_rows[0, out_seq], 0.0)
        return diff[np.minimum(supports, n)].sum(axis=1)
    # deterministic rows: evaluate each codeword exactly in dense form
    scores = np.empty(supports.shape[0])
    mask = np.zeros(n, dtype=bool)
    for m in range(supports.shape[0]):
        on = supports[m, : weights[m]]
        mask[:] = False
        mask[on] = True
        scores[m] = log_rows[1, out_seq[mask]].sum() + base_terms[~mask].sum()
    return scores


def source_decode(m_hat: int, ensemble: CodeEnsemble) -> np.ndarray:
    if not 0 <= m_hat < ensemble.message_count:
        raise IndexError(f"message index {m_hat} out of range")
    return ensemble.source_codebook[m_hat]


@dataclass(frozen=True)
class ExperimentRecord:
    """One measured operating point of the end-to-end pipeline."""

    n: int
    k: int
    rate_nominal: float
    rate_realized: float
    alpha_n: float
    key_count: int
    codeword_mode: str
    trials: int
    seed: int
    distortion_mean: float
    distortion_se: float
    err_rate: float
    err_se: float

    CSV_FIELDS = ("n", "k", "R_nominal", "R_realized", "alpha_n",
                  "distortion_mean", "distortion_se", "err_rate", "err_se", "seed")

    def csv_values(self) -> dict:
        return {
            "n": self.n, "k": self.k, "R_nominal": self.rate_nominal,
            "R_realized": self.rate_realized, "alpha_n": self.alpha_n,
            "distortion_mean": self.distortion_mean,
            "distortion_se": self.distortion_se,
            "err_rate": self.err_rate, "err_se": self.err_se, "seed": self.seed,
        }


def end_to_end_simulate(params: CodeParams, source: SourceSpec,
                        channel: BinaryInputDMC, trials: int, seed: int,
                        ensemble: CodeEnsemble | None = None) -> ExperimentRecord:
    """Monte-Carlo measurement of block distortion and message error rate.

    Each trial draws an i.i.d. source block and a uniform key from its
    own counter-based stream, runs the full encode / channel / decode
    chain and records the realized distortion and whether the decoded
    message matched.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    if ensemble is None:
        ensemble = build_ensemble(params, source, channel, seed)
    n, k = params.n, params.k
    y_log_rows = _log_rows(channel.y_rows)
    y_rows = channel.y_rows
    pmf = source.pmf.probs
    pmf_cdf = np.cumsum(pmf)
    d_matrix = source.distortion
    distortions = np.empty(trials)
    errors = np.empty(trials, dtype=bool)
    for t in range(trials):
        rng = stream(seed, "trial", t)
        u = np.minimum(np.searchsorted(pmf_cdf, rng.random(k), side="right"),
                       pmf.size - 1)
        s = int(rng.integers(params.key_count))
        m = source_encode(u, ensemble, source)
        y = _sample_output_sparse(ensemble.supports[s, m],
                                  int(ensemble.weights[s, m]), n, y_rows, rng)
        scores = _bank_scores(y, ensemble.supports[s], ensemble.weights[s],
                              y_log_rows)
        m_hat = int(np.argmax(scores))
        u_hat = ensemble.source_codebook[m_hat]
        distortions[t] = d_matrix[u, u_hat].mean()
        errors[t] = m_hat != m
    d_mean = float(math.fsum(distortions) / trials)
    d_se = float(distortions.std(ddof=1) / math.sqrt(trials)) if trials > 1 else 0.0
    e_rate = float(errors.sum()) / trials
    e_se = math.sqrt(max(e_rate * (1 - e_rate), 0.0) / trials)
    return ExperimentRecord(
        n=n, k=k, rate_nominal=params.rate_R, rate_realized=params.realized_rate,
        alpha_n=params.alpha_n, key_count=params.key_count,
        codeword_mode=params.codeword_mode, trials=trials, seed=seed,
        distortion_mean=d_mean, distortion_se=d_se, err_rate=e_rate, err_se=e_se)


# ---------------------------------------------------------------------------
# Exact message statistics (used by the warden module and small-scale tests)

#: largest |U|^k the exact message-distribution enumeration will attempt
MESSAGE_ENUM_GUARD = 1 << 20


def all_source_sequences(alphabet_size: int, k: int,
                         guard: int = MESSAGE_ENUM_GUARD) -> np.ndarray:
    total = alphabet_size ** k
    if total > guard:
        raise GuardExceededError(
            f"|U|^k = {total} exceeds the enumeration guard {guard}")
    idx = np.arange(total)
    places = alphabet_size ** np.arange(k - 1, -1, -1, dtype=np.int64)
    return ((idx[:, None] // places[None, :]) % alphabet_size).astype(np.int32)


def message_distribution(ensemble: CodeEnsemble, source: SourceSpec,
                         guard: int = MESSAGE_ENUM_GUARD) -> np.ndarray:
    """Exact Pr[M = m] induced by the source and the min-distortion encoder."""
    k = ensemble.params.k
    seqs = all_source_sequences(source.source_alphabet_size, k, guard)
    log_p = np.log(np.where(source.pmf.probs > 0, source.pmf.probs, 1.0))
    zero = source.pmf.probs == 0.0
    seq_log_p = log_p[seqs].sum(axis=1)
    if zero.any():
        seq_log_p[np.isin(seqs, np.flatnonzero(zero)).any(axis=1)] = -np.inf
    seq_p = np.exp(seq_log_p)
    p_m = np.zeros(ensemble.message_count)
    if seqs.shape[0] <= 4096:
        for row, pw in zip(seqs, seq_p):
            p_m[source_encode(row, ensemble, source)] += pw
    else:
        # one-hot matmul path: dist[u-seq, m] = sum_i d(u_i, cb[m, i])
        m_count = ensemble.message_count
        au = source.source_alphabet_size
        cb = ensemble.source_codebook  # (M, k)
        w = np.empty((k * au, m_count), dtype=np.float32)
        for i in range(k):
            w[i * au:(i + 1) * au, :] = source.distortion[:, cb[:, i]]
        chunk = max(1, (1 << 25) // m_count)
        for start in range(0, seqs.shape[0], chunk):
            block = seqs[start:start + chunk]
            x = np.zeros((block.shape[0], k * au), dtype=np.float32)
            cols = (np.arange(k) * au)[None, :] + block
            x[np.arange(block.shape[0])[:, None], cols] = 1.0
            m_idx = np.argmin(x @ w, axis=1)
            np.add.at(p_m, m_idx, seq_p[start:start + chunk])
    total = p_m.sum()
    if not math.isclose(total, 1.0, abs_tol=1e-9):
        raise RuntimeError(f"message probabilities sum to {total}")  # pragma: no cover
    return p_m / total


def exact_expected_distortion(ensemble: CodeEnsemble, source: SourceSpec,
                              channel: BinaryInputDMC,
                              guard: int = MESSAGE_ENUM_GUARD) -> float:
    """Exact end-to-end expected distortion by full (u^k, s, y^n) enumeration.

    Only for tiny instances; used as the oracle for composition checks.
    """
    params = ensemble.params
    y_size = len(channel.y_given_0)
    if y_size ** params.n > guard:
        raise GuardExceededError("|Y|^n exceeds the enumeration guard")
    u_seqs = all_source_sequences(source.source_alphabet_size, params.k, guard)
    y_seqs = all_source_sequences(y_size, params.n, guard)
    y_log_rows = _log_rows(channel.y_rows)
    total = 0.0
    for u_row in u_seqs:
        p_u = float(np.prod(source.pmf.probs[u_row]))
        if p_u == 0.0:
            continue
        m = source_encode(u_row, ensemble, source)
        for s in range(params.key_count):
            x = ensemble.codeword_dense(m, s)
            log_probs = y_log_rows[x[None, :], y_seqs].sum(axis=1)
            scores = np.stack([
                _bank_scores(y_row, ensemble.supports[s], ensemble.weights[s],
                             y_log_rows)
                for y_row in y_seqs])
            m_hats = np.argmax(scores, axis=1)
            d_vals = source.distortion[u_row[None, :],
                                       ensemble.source_codebook[m_hats]].mean(axis=1)
            with np.errstate(over="ignore"):
                probs = np.exp(log_probs)
            total += p_u / params.key_count * float(probs @ d_vals)
    return total


def with_target_distortion(params: CodeParams, d: float) -> CodeParams:
    return replace(params, target_distortion=d)
