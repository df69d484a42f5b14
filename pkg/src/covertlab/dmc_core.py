"""Finite-alphabet probability primitives, channel models and divergences.

Everything downstream (capacity formulas, codec simulation, warden
measurements) is built on the three value types defined here:

- ``Distribution``: a validated probability vector over ``{0, ..., m-1}``.
- ``BinaryInputDMC``: the pair of conditional laws to the legitimate
  receiver (Y) and to the warden (Z) for inputs ``{0, 1}``.
- ``SourceSpec``: a memoryless source with a bounded distortion matrix.

Conventions, fixed once and for all:

- all divergences are computed internally in nats; ``unit="bits"`` only
  rescales at the boundary,
- ``0 * log(0/q) = 0`` and the ``0^2/0`` chi-squared term is 0,
- alphabets are index based; symbol labels live in the presentation layer.

All types are immutable after construction and safe to share across
workers.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

LN2 = float(np.log(2.0))

#: absolute slack accepted on sum(probs) before construction fails
SUM_TOLERANCE = 1e-9


class AlphabetMismatchError(ValueError):
    """Two distributions that should share an alphabet do not."""


class ValidationError(ValueError):
    """A probability vector, channel or source failed validation."""


def _as_prob_vector(probs, what: str) -> np.ndarray:
    v = np.asarray(probs, dtype=float)
    if v.ndim != 1 or v.size == 0:
        raise ValidationError(f"{what}: expected a nonempty 1-d vector, got shape {v.shape}")
    if not np.all(np.isfinite(v)):
        raise ValidationError(f"{what}: entries must be finite")
    neg = np.flatnonzero(v < 0)
    if neg.size:
        raise ValidationError(f"{what}: negative entry at index {neg[0]} ({v[neg[0]]!r})")
    s = float(v.sum())
    if abs(s - 1.0) > SUM_TOLERANCE:
        raise ValidationError(f"{what}: entries sum to {s!r}, off by more than {SUM_TOLERANCE}")
    v = v / s
    v.setflags(write=False)
    return v


@dataclass(frozen=True)
class Distribution:
    """Probability vector over an ordered finite alphabet ``0..m-1``.

    Construction normalizes away float dust (sums within 1e-9 of 1) and
    rejects anything worse.
    """

    probs: np.ndarray

    def __init__(self, probs, *, what: str = "Distribution"):
        object.__setattr__(self, "probs", _as_prob_vector(probs, what))

    def __len__(self) -> int:
        return int(self.probs.size)

    @property
    def support(self) -> np.ndarray:
        """Boolean mask of symbols with nonzero probability."""
        return self.probs > 0.0

    def sample(self, rng: np.random.Generator, size=None) -> np.ndarray:
        return rng.choice(len(self), size=size, p=self.probs)

    def __eq__(self, other) -> bool:
        return isinstance(other, Distribution) and np.array_equal(self.probs, other.probs)

    def __hash__(self):
        return hash(self.probs.tobytes())


def _require_same_alphabet(p: Distribution, q: Distribution) -> None:
    if len(p) != len(q):
        raise AlphabetMismatchError(f"alphabet sizes differ: {len(p)} vs {len(q)}")


def kl_divergence(p: Distribution, q: Distribution, unit: str = "nats") -> float:
    """D(p || q); +inf exactly when p puts mass where q has none."""
    _require_same_alphabet(p, q)
    pv, qv = p.probs, q.probs
    mask = pv > 0.0
    if np.any(qv[mask] == 0.0):
        return float("inf")
    val = float(np.sum(pv[mask] * np.log(pv[mask] / qv[mask])))
    val = max(val, 0.0)  # guard float dust on p == q
    return _in_unit(val, unit)


def chi_squared(p: Distribution, q: Distribution) -> float:
    """chi^2(p || q) = sum (p-q)^2 / q, with 0/0 terms contributing 0."""
    _require_same_alphabet(p, q)
    pv, qv = p.probs, q.probs
    diff = pv - qv
    zero_q = qv == 0.0
    if np.any(zero_q & (diff != 0.0)):
        return float("inf")
    keep = ~zero_q
    return float(np.sum(diff[keep] ** 2 / qv[keep]))


def total_variation(p: Distribution, q: Distribution) -> float:
    _require_same_alphabet(p, q)
    return float(0.5 * np.sum(np.abs(p.probs - q.probs)))


def mixture(off: Distribution, on: Distribution, alpha: float) -> Distribution:
    """Convex combination ``(1-alpha)*off + alpha*on``."""
    _require_same_alphabet(off, on)
    if not 0.0 <= alpha <= 1.0:
        raise ValueError(f"alpha must be in [0, 1], got {alpha!r}")
    return Distribution((1.0 - alpha) * off.probs + alpha * on.probs)


def product_log_prob(row_selector, channel_rows, observation) -> float:
    """Sum of log Gamma(z_i | x_i) in nats; -inf if any factor is zero.

    ``channel_rows`` is indexable by input symbol and yields a
    ``Distribution`` (or a 2-d array of rows).
    """
    xs = np.asarray(row_selector, dtype=int)
    zs = np.asarray(observation, dtype=int)
    if xs.shape != zs.shape:
        raise ValueError(f"length mismatch: {xs.shape} vs {zs.shape}")
    if xs.size == 0:
        return 0.0
    rows = _rows_as_matrix(channel_rows)
    if xs.min() < 0 or xs.max() >= rows.shape[0]:
        raise ValueError("input symbol outside channel input alphabet")
    if zs.min() < 0 or zs.max() >= rows.shape[1]:
        raise ValueError("observation symbol outside channel output alphabet")
    probs = rows[xs, zs]
    if np.any(probs == 0.0):
        return float("-inf")
    return float(np.sum(np.log(probs)))


def _rows_as_matrix(channel_rows) -> np.ndarray:
    if isinstance(channel_rows, np.ndarray):
        return channel_rows
    return np.stack([r.probs if isinstance(r, Distribution) else np.asarray(r, float)
                     for r in channel_rows])


def _in_unit(nats: float, unit: str) -> float:
    if unit == "nats":
        return nats
    if unit == "bits":
        return nats / LN2
    raise ValueError(f"unknown unit {unit!r} (expected 'nats' or 'bits')")


def _support_contained(inner: Distribution, outer: Distribution) -> bool:
    return bool(np.all(outer.probs[inner.probs > 0.0] > 0.0))


@dataclass(frozen=True)
class BinaryInputDMC:
    """Conditional laws Y|X and Z|X for the binary input alphabet {0, 1}.

    Input 0 is the off-symbol the transmitter sends when idle.
    """

    y_given_0: Distribution
    y_given_1: Distribution
    z_given_0: Distribution
    z_given_1: Distribution

    def __post_init__(self):
        _require_same_alphabet(self.y_given_0, self.y_given_1)
        _require_same_alphabet(self.z_given_0, self.z_given_1)

    @property
    def warden_singular(self) -> bool:
        """True when the on-symbol reaches warden outputs the off-symbol cannot.

        A single such output lets the warden detect with zero error, so
        covert capacity is undefined.
        """
        return not _support_contained(self.z_given_1, self.z_given_0)

    @property
    def receiver_singular(self) -> bool:
        """True when D(Y|1 || Y|0) is infinite (support violation at Y)."""
        return not _support_contained(self.y_given_1, self.y_given_0)

    @property
    def y_rows(self) -> np.ndarray:
        return np.stack([self.y_given_0.probs, self.y_given_1.probs])

    @property
    def z_rows(self) -> np.ndarray:
        return np.stack([self.z_given_0.probs, self.z_given_1.probs])


def bsc_rows(p: float) -> tuple[Distribution, Distribution]:
    """Rows of a binary symmetric channel with crossover probability p."""
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"crossover probability out of range: {p!r}")
    return Distribution([1.0 - p, p]), Distribution([p, 1.0 - p])


def bsc_pair_channel(p_receiver: float, p_warden: float) -> BinaryInputDMC:
    """BSC(p_receiver) to the receiver, BSC(p_warden) to the warden."""
    y0, y1 = bsc_rows(p_receiver)
    z0, z1 = bsc_rows(p_warden)
    return BinaryInputDMC(y0, y1, z0, z1)


@dataclass(frozen=True)
class SourceSpec:
    """Memoryless source, reconstruction alphabet and distortion matrix.

    Every source symbol must have at least one zero-distortion
    reconstruction; all entries are finite and nonnegative.
    """

    pmf: Distribution
    distortion: np.ndarray = field(repr=False)

    def __init__(self, pmf, distortion):
        if not isinstance(pmf, Distribution):
            pmf = Distribution(pmf, what="SourceSpec.pmf")
        d = np.asarray(distortion, dtype=float)
        if d.ndim != 2 or d.shape[0] != len(pmf):
            raise ValidationError(
                f"distortion must be |U| x |Uhat| with |U|={len(pmf)}, got shape {d.shape}")
        if not np.all(np.isfinite(d)):
            raise ValidationError("distortion entries must be finite")
        if np.any(d < 0):
            raise ValidationError("distortion entries must be nonnegative")
        bad = np.flatnonzero(~(d == 0.0).any(axis=1))
        if bad.size:
            raise ValidationError(
                f"source symbol {bad[0]} has no zero-distortion reconstruction")
        d.setflags(write=False)
        object.__setattr__(self, "pmf", pmf)
        object.__setattr__(self, "distortion", d)

    @property
    def source_alphabet_size(self) -> int:
        return len(self.pmf)

    @property
    def recon_alphabet_size(self) -> int:
        return int(self.distortion.shape[1])

    @property
    def d_max(self) -> float:
        return float(self.distortion.max())


def bernoulli_hamming_source(p_one: float) -> SourceSpec:
    """Binary source with P(U=1) = p_one under Hamming distortion."""
    return SourceSpec([1.0 - p_one, p_one], [[0.0, 1.0], [1.0, 0.0]])


# ---------------------------------------------------------------------------
# JSON loading


def channel_from_json(doc) -> BinaryInputDMC:
    """Build a channel from a dict / JSON string / open file.

    Expected keys: ``y_given_0``, ``y_given_1``, ``z_given_0``, ``z_given_1``.
    """
    obj = _load_obj(doc)
    rows = {}
    for key in ("y_given_0", "y_given_1", "z_given_0", "z_given_1"):
        if key not in obj:
            raise ValidationError(f"channel JSON: missing row {key!r}")
        try:
            rows[key] = Distribution(obj[key], what=f"channel row {key!r}")
        except ValidationError as exc:
            raise ValidationError(f"channel row {key!r}: {exc}") from exc
    return BinaryInputDMC(**rows)


def source_from_json(doc) -> SourceSpec:
    """Build a source from a dict / JSON string / open file.

    Expected keys: ``pmf`` and ``distortion``.
    """
    obj = _load_obj(doc)
    for key in ("pmf", "distortion"):
        if key not in obj:
            raise ValidationError(f"source JSON: missing key {key!r}")
    try:
        pmf = Distribution(obj["pmf"], what="source pmf")
    except ValidationError as exc:
        raise ValidationError(f"source pmf: {exc}") from exc
    return SourceSpec(pmf, obj["distortion"])


def _load_obj(doc):
    if isinstance(doc, dict):
        return doc
    if isinstance(doc, (str, bytes)):
        return json.loads(doc)
    return json.load(doc)
