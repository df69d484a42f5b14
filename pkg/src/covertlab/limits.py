"""Fundamental-limit quantities: covert capacity, rate-distortion, regimes.

The rate-distortion function is evaluated by Blahut-Arimoto in Lagrangian
(slope) form with an outer bisection on the slope to hit the target
distortion; the covert capacity is a closed form in the two single-letter
divergences of the channel.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .dmc_core import (
    LN2,
    BinaryInputDMC,
    Distribution,
    SourceSpec,
    chi_squared,
    kl_divergence,
)

STATUS_OK = "ok"
STATUS_WARDEN_BLIND = "warden-blind"
STATUS_WARDEN_SINGULAR = "warden-singular"
STATUS_RECEIVER_SINGULAR = "receiver-singular"


@dataclass(frozen=True)
class CovertCapacity:
    """Covert capacity with an explicit status tag.

    ``status`` is one of:

    - ``ok``: finite positive (or zero) capacity,
    - ``warden-blind``: the warden's two rows coincide (chi^2 = 0), the
      capacity is +inf,
    - ``warden-singular``: the on-symbol is detectable with zero error,
      the capacity is undefined (``bits``/``nats`` are NaN),
    - ``receiver-singular``: D(Y|1 || Y|0) is infinite, capacity +inf.

    Both unit conventions for the divergence in the numerator are
    reported; the chi-squared in the denominator is unitless either way.
    """

    bits: float
    nats: float
    status: str

    @property
    def defined(self) -> bool:
        return self.status != STATUS_WARDEN_SINGULAR

    @property
    def finite(self) -> bool:
        return self.defined and math.isfinite(self.bits)

    def value(self, unit: str = "bits") -> float:
        if unit == "bits":
            return self.bits
        if unit == "nats":
            return self.nats
        raise ValueError(f"unknown unit {unit!r}")

    def to_json(self) -> dict:
        return {
            "C_covert_bits": None if math.isnan(self.bits) else self.bits,
            "C_covert_nats": None if math.isnan(self.nats) else self.nats,
            "status": self.status,
        }


def covert_capacity(channel: BinaryInputDMC) -> CovertCapacity:
    """sqrt(2) * D(Y|1 || Y|0) / sqrt(chi^2(Z|1 || Z|0)) with status tags."""
    if channel.warden_singular:
        nan = float("nan")
        return CovertCapacity(nan, nan, STATUS_WARDEN_SINGULAR)
    chi2 = chi_squared(channel.z_given_1, channel.z_given_0)
    kl_nats = kl_divergence(channel.y_given_1, channel.y_given_0, unit="nats")
    if channel.receiver_singular:
        inf = float("inf")
        return CovertCapacity(inf, inf, STATUS_RECEIVER_SINGULAR)
    if chi2 == 0.0:
        if kl_nats == 0.0:
            # warden blind *and* receiver blind: nothing to transmit
            return CovertCapacity(0.0, 0.0, STATUS_OK)
        inf = float("inf")
        return CovertCapacity(inf, inf, STATUS_WARDEN_BLIND)
    nats = math.sqrt(2.0) * kl_nats / math.sqrt(chi2)
    return CovertCapacity(nats / LN2, nats, STATUS_OK)


def trivial_distortion(source: SourceSpec) -> float:
    """Best expected distortion of a constant reconstruction (no communication)."""
    return float(np.min(source.pmf.probs @ source.distortion))


def trivial_reconstruction(source: SourceSpec) -> int:
    """Index of the best constant reconstruction; ties go to the lowest index."""
    return int(np.argmin(source.pmf.probs @ source.distortion))


def mutual_information(pu: Distribution, channel_rows, unit: str = "bits") -> float:
    """I(U; Uhat) = sum_u p(u) D(P(.|u) || marginal)."""
    p = pu.probs if isinstance(pu, Distribution) else np.asarray(pu, float)
    rows = np.stack([r.probs if isinstance(r, Distribution) else np.asarray(r, float)
                     for r in channel_rows])
    if rows.shape[0] != p.size:
        raise ValueError(f"need one row per source symbol: {rows.shape[0]} vs {p.size}")
    marginal = p @ rows
    mask = (rows > 0) & (p[:, None] > 0)
    with np.errstate(divide="ignore", invalid="ignore"):
        log_ratio = np.log(rows / marginal[None, :])
    nats = float(np.sum(np.where(mask, p[:, None] * rows * log_ratio, 0.0)))
    nats = max(nats, 0.0)
    return nats if unit == "nats" else nats / LN2


@dataclass(frozen=True)
class RDPoint:
    """One evaluated point of the rate-distortion curve."""

    distortion: float
    rate_bits: float
    test_channel: np.ndarray = field(repr=False)  # rows P(uhat | u)
    iterations: int
    slack: float  # |achieved distortion - target|


@dataclass(frozen=True)
class RateDistortionCurve:
    points: tuple[RDPoint, ...]

    @property
    def distortions(self) -> np.ndarray:
        return np.array([p.distortion for p in self.points])

    @property
    def rates_bits(self) -> np.ndarray:
        return np.array([p.rate_bits for p in self.points])

    def to_csv_rows(self):
        for p in self.points:
            yield {"D": p.distortion, "R_bits": p.rate_bits,
                   "iterations": p.iterations, "slack": p.slack}


def _ba_fixed_slope(p_u: np.ndarray, d: np.ndarray, lam: float,
                    tol_nats: float = 1e-9, max_iter: int = 10000):
    """Blahut-Arimoto at fixed slope lam (nats per distortion unit).

    Returns (rate_nats, expected_distortion, test_channel, iterations).
    """
    n_hat = d.shape[1]
    a = np.exp(-lam * d)  # (|U|, |Uhat|); zero-distortion entries stay 1
    q = np.full(n_hat, 1.0 / n_hat)
    prev_rate = np.inf
    rate = np.inf
    cond = np.empty_like(a)
    for it in range(1, max_iter + 1):
        np.multiply(a, q[None, :], out=cond)
        z = cond.sum(axis=1)
        # rows keep their zero-distortion entry (a=1) so z>0 unless q lost
        # all mass there; restore a uniform floor in that case
        dead = z == 0.0
        if np.any(dead):
            cond[dead] = 1.0 / n_hat
            z[dead] = 1.0
        cond /= z[:, None]
        q = p_u @ cond
        with np.errstate(divide="ignore", invalid="ignore"):
            logratio = np.where(cond > 0, np.log(np.where(cond > 0, cond, 1.0) /
                                                 np.where(q[None, :] > 0, q[None, :], 1.0)), 0.0)
        rate = float(np.sum(p_u[:, None] * cond * logratio))
        if abs(prev_rate - rate) < tol_nats:
            break
        prev_rate = rate
    dist = float(np.sum(p_u[:, None] * cond * d))
    return max(rate, 0.0), dist, cond, it


def rate_distortion(source: SourceSpec, target_d: float,
                    tol_nats: float = 1e-9, max_iter: int = 10000) -> RDPoint:
    """R(D) in bits and the achieving test channel.

    Bisection over the Lagrangian slope; the returned rate is the value of
    the supporting line at the target distortion, so linear segments of
    the curve are handled exactly.
    """
    if target_d < 0:
        raise ValueError(f"distortion must be nonnegative, got {target_d!r}")
    p_u = source.pmf.probs
    d = source.distortion
    d_triv = trivial_distortion(source)
    if target_d >= d_triv - 1e-12:
        uhat = trivial_reconstruction(source)
        cond = np.zeros_like(d)
        cond[:, uhat] = 1.0
        return RDPoint(target_d, 0.0, cond, 0, 0.0)

    total_iter = 0

    def eval_slope(lam):
        nonlocal total_iter
        rate, dist, cond, it = _ba_fixed_slope(p_u, d, lam, tol_nats, max_iter)
        total_iter += it
        return rate, dist, cond

    # find a slope bracketing the target distortion
    lo, hi = 0.0, 1.0
    rate_hi, dist_hi, cond_hi = eval_slope(hi)
    while dist_hi > target_d and hi < 1e8:
        lo = hi
        hi *= 2.0
        rate_hi, dist_hi, cond_hi = eval_slope(hi)
    best = (rate_hi, dist_hi, cond_hi, hi)
    for _ in range(200):
        if hi - lo <= 1e-12 * max(1.0, hi):
            break
        mid = 0.5 * (lo + hi)
        rate_m, dist_m, cond_m = eval_slope(mid)
        if dist_m > target_d:
            lo = mid
        else:
            hi = mid
            best = (rate_m, dist_m, cond_m, mid)
        if abs(dist_m - target_d) < 1e-13:
            best = (rate_m, dist_m, cond_m, mid)
            break
    rate_nats, dist, cond, lam = best
    # supporting-line value at the exact target (dist <= target by choice of side)
    rate_nats = max(rate_nats - lam * (target_d - dist), 0.0)
    rate_bits = rate_nats / LN2
    if rate_bits < 1e-8:
        rate_bits = 0.0
    return RDPoint(target_d, rate_bits, cond, total_iter, abs(dist - target_d))


def rate_distortion_curve(source: SourceSpec, distortions) -> RateDistortionCurve:
    return RateDistortionCurve(tuple(rate_distortion(source, float(dd))
                                     for dd in distortions))


def distortion_at_rate(source: SourceSpec, rate_bits: float, tol: float = 1e-10) -> float:
    """Inverse of R(D): smallest distortion with R(D) <= rate_bits."""
    if rate_bits < 0:
        raise ValueError("rate must be nonnegative")
    if rate_bits == 0.0:
        return trivial_distortion(source)
    if rate_distortion(source, 0.0).rate_bits <= rate_bits:
        return 0.0
    lo, hi = 0.0, trivial_distortion(source)
    for _ in range(100):
        mid = 0.5 * (lo + hi)
        if rate_distortion(source, mid).rate_bits > rate_bits:
            lo = mid
        else:
            hi = mid
        if hi - lo < tol:
            break
    return hi


@dataclass(frozen=True)
class ScalingRegime:
    """How the source length k = f(n) compares to sqrt(n * delta_n).

    ``kind`` is one of ``sublinear-in-sqrt``, ``supralinear-in-sqrt`` or
    ``proportional``; ``gamma`` is present exactly for ``proportional``
    and is the bandwidth-mismatch factor (k ~ sqrt(n delta_n) / gamma).
    """

    kind: str
    gamma: float | None = None

    _KINDS = ("sublinear-in-sqrt", "supralinear-in-sqrt", "proportional")

    def __post_init__(self):
        if self.kind not in self._KINDS:
            raise ValueError(f"unknown regime kind {self.kind!r}")
        if self.kind == "proportional":
            if self.gamma is None or not self.gamma > 0:
                raise ValueError("proportional regime requires gamma > 0")
        elif self.gamma is not None:
            raise ValueError(f"gamma only applies to the proportional regime")


def classify_admissibility(regime: ScalingRegime, r_of_d_bits: float,
                           c_cov: CovertCapacity | float, d: float,
                           d_trivial: float) -> bool:
    """Admissibility of distortion d per the three scaling regimes.

    In the sublinear regime every distortion with finite R(D) is
    admissible; supralinear allows only trivial distortions; the
    proportional regime requires R(D) <= gamma * C_covert (bits).
    """
    if regime.kind == "sublinear-in-sqrt":
        return math.isfinite(r_of_d_bits)
    if regime.kind == "supralinear-in-sqrt":
        return d >= d_trivial
    c_bits = c_cov.bits if isinstance(c_cov, CovertCapacity) else float(c_cov)
    if isinstance(c_cov, CovertCapacity) and not c_cov.defined:
        raise ValueError("covert capacity undefined (warden-singular channel)")
    if math.isinf(c_bits):
        return math.isfinite(r_of_d_bits)
    return r_of_d_bits <= regime.gamma * c_bits


def converse_rate_bound(n: int, k: int, delta_n: float,
                        channel: BinaryInputDMC, unit: str = "bits") -> float:
    """sqrt(n * delta_n) / k * C_covert: no scheme can beat this rate."""
    if n < 1 or k < 1:
        raise ValueError("n and k must be positive")
    if delta_n < 0:
        raise ValueError("delta_n must be nonnegative")
    cap = covert_capacity(channel)
    if not cap.defined:
        raise ValueError("converse bound undefined on a warden-singular channel")
    if delta_n == 0.0:
        return 0.0
    return math.sqrt(n * delta_n) / k * cap.value(unit)
