"""Closed-form outage probability in the low-SNR regime, plus supporting curves.

Everything here is a pure function of its inputs: the k-branch MRC outage CDF
(a regularized lower incomplete gamma), the low-SNR outage formulas for
i.i.d. and correlated Rayleigh channels, their small-argument approximations,
the diversity-multiplexing curve, the piecewise whole-range outage
approximation, and the exact/asymptotic scalar-channel formulas with their
regime boundaries.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, NamedTuple

import mpmath as mp
import numpy as np

from .channel import (
    ChannelDims,
    CorrelationModel,
    FullCorrelation,
    IidCorrelation,
    KroneckerCorrelation,
)

# Degenerate-eigenvalue handling for the partial-fraction CDF.
EIG_GAP_REL = 1e-9           # pairwise relative gap below which eigenvalues collide
EIG_SPLIT_REL = 1e-8         # symmetric split applied to colliding values
ZERO_EIG_REL = 1e-12         # eigenvalues below this (relative) are treated as zero
COEFF_SUM_TOL = 1e-8         # |sum A_k - 1| tolerance
_COND_LIMIT = 1e6            # max |A_k| beyond which float64 evaluation cancels

_GAMMA_TOL = 1e-15
_GAMMA_MAX_ITER = 600


def _as_float_array(x) -> tuple[np.ndarray, bool]:
    arr = np.asarray(x, dtype=float)
    return np.atleast_1d(arr), arr.ndim == 0


def _gamma_p_series(k: int, x: np.ndarray) -> np.ndarray:
    """Series for P(k, x), accurate for x < k + 1."""
    out = np.zeros_like(x)
    nz = x > 0.0
    if not np.any(nz):
        return out
    xv = x[nz]
    ap = float(k)
    term = np.full(xv.shape, 1.0 / k)
    total = term.copy()
    for _ in range(_GAMMA_MAX_ITER):
        ap += 1.0
        term = term * (xv / ap)
        total += term
        if np.all(np.abs(term) < np.abs(total) * _GAMMA_TOL):
            break
    else:
        raise ArithmeticError(f"incomplete gamma series failed to converge (k={k})")
    out[nz] = total * np.exp(k * np.log(xv) - xv - math.lgamma(k))
    return out


def _gamma_q_contfrac(k: int, x: np.ndarray) -> np.ndarray:
    """Modified Lentz continued fraction for Q(k, x), accurate for x >= k + 1."""
    tiny = 1e-300
    b = x + 1.0 - k
    c = np.full_like(x, 1.0 / tiny)
    d = 1.0 / np.where(np.abs(b) < tiny, tiny, b)
    h = d.copy()
    for i in range(1, _GAMMA_MAX_ITER + 1):
        an = -i * (i - k)
        b = b + 2.0
        d = an * d + b
        d = np.where(np.abs(d) < tiny, tiny, d)
        c = b + an / c
        c = np.where(np.abs(c) < tiny, tiny, c)
        d = 1.0 / d
        delta = d * c
        h *= delta
        if np.all(np.abs(delta - 1.0) < _GAMMA_TOL):
            break
    else:
        raise ArithmeticError(f"incomplete gamma continued fraction failed (k={k})")
    return h * np.exp(k * np.log(x) - x - math.lgamma(k))


def mrc_cdf(k: int, x):
    """Outage CDF of a k-branch maximum ratio combiner in i.i.d. Rayleigh fading.

    F_k(x) = 1 - exp(-x) * sum_{i<k} x^i / i!, i.e. the regularized lower
    incomplete gamma P(k, x).  Evaluated in log space with a series for
    x < k + 1 and a continued fraction otherwise, so it stays accurate for
    orders of at least 64 and arguments from 1e-12 to 1e3.

    Accepts a scalar or array ``x`` and returns values in [0, 1].
    """
    if not isinstance(k, (int, np.integer)) or k < 1:
        raise ValueError(f"combiner order k must be a positive integer, got {k}")
    xs, scalar = _as_float_array(x)
    if np.any(xs < 0.0):
        raise ValueError("x must be nonnegative")
    out = np.empty_like(xs)
    ser = xs < k + 1.0
    if np.any(ser):
        out[ser] = _gamma_p_series(int(k), xs[ser])
    if np.any(~ser):
        out[~ser] = 1.0 - _gamma_q_contfrac(int(k), xs[~ser])
    out = np.clip(out, 0.0, 1.0)
    return float(out[0]) if scalar else out


class PartialFractionCdf:
    """Power-gain CDF 1 - sum_k A_k exp(-x / lambda_k) for distinct eigenvalues.

    ``coeffs`` follow the product rule A_k = prod_{i != k} lambda_k /
    (lambda_k - lambda_i) and sum to 1, which pins the CDF to 0 at the
    origin.  Nearly coincident eigenvalues are separated by a deterministic
    symmetric split (recorded in ``split_applied``); when the resulting
    coefficients are large enough that float64 evaluation would cancel
    catastrophically, evaluation transparently switches to arbitrary
    precision.
    """

    def __init__(self, lambdas: np.ndarray, coeffs: np.ndarray, split_applied: bool):
        self.lambdas = lambdas
        self.coeffs = coeffs
        self.split_applied = split_applied
        with np.errstate(over="ignore"):
            self.condition = float(np.max(np.abs(coeffs))) if coeffs.size else 0.0
        self._ill_conditioned = not math.isfinite(self.condition) or self.condition > _COND_LIMIT
        self._validate()

    def _mp_dps(self) -> int:
        # Digits lost to cancellation ~ log10(max |A_k|), recomputed from the
        # eigenvalues since the float64 coefficients may have overflowed.
        lam = self.lambdas
        worst = 0.0
        for k in range(lam.size):
            s = 0.0
            for i in range(lam.size):
                if i != k:
                    s += math.log10(lam[k]) - math.log10(abs(lam[k] - lam[i]))
            worst = max(worst, s)
        return 25 + int(worst)

    def _mp_terms(self):
        lam = [mp.mpf(float(v)) for v in self.lambdas]
        coeffs = []
        for k in range(len(lam)):
            a = mp.mpf(1)
            for i in range(len(lam)):
                if i != k:
                    a *= lam[k] / (lam[k] - lam[i])
            coeffs.append(a)
        return lam, coeffs

    def _cdf_mp(self, xs: np.ndarray) -> np.ndarray:
        with mp.workdps(self._mp_dps()):
            lam, coeffs = self._mp_terms()
            vals = np.empty(xs.shape)
            for j, x in enumerate(xs):
                acc = mp.mpf(1)
                for a, lv in zip(coeffs, lam):
                    acc -= a * mp.e ** (-mp.mpf(float(x)) / lv)
                vals[j] = float(acc)
        return vals

    def cdf(self, x):
        """CDF of the channel power gain; 0 for x <= 0, vectorized over x."""
        xs, scalar = _as_float_array(x)
        out = np.zeros_like(xs)
        pos = xs > 0.0
        if np.any(pos):
            if self._ill_conditioned:
                out[pos] = self._cdf_mp(xs[pos])
            else:
                expo = np.exp(-xs[pos, None] / self.lambdas[None, :])
                out[pos] = 1.0 - expo @ self.coeffs
        out = np.clip(out, 0.0, 1.0)
        return float(out[0]) if scalar else out

    def _validate(self) -> None:
        lam = self.lambdas
        if lam.size == 0:
            raise ValueError("at least one eigenvalue is required")
        if np.any(lam <= 0.0):
            raise ValueError("eigenvalues must be positive")
        gaps = np.diff(np.sort(lam))
        if lam.size > 1 and np.min(gaps) <= EIG_GAP_REL * np.max(lam):
            raise ValueError("eigenvalues not distinct after degeneracy split")
        if self._ill_conditioned:
            with mp.workdps(self._mp_dps()):
                _, coeffs = self._mp_terms()
                err = float(abs(mp.fsum(coeffs) - 1))
        else:
            err = abs(float(np.sum(self.coeffs)) - 1.0)
        if err > COEFF_SUM_TOL:
            raise ValueError(f"partial-fraction coefficients sum to 1 +/- {err:.3e}")
        # Spot-check monotonicity; the formula is a genuine CDF, so any
        # decrease signals numerical trouble.
        grid = np.linspace(0.0, 10.0 * float(np.max(lam)), 33)
        vals = self.cdf(grid)
        if np.any(np.diff(vals) < -1e-9):
            raise ValueError("partial-fraction CDF is not nondecreasing")

    def __repr__(self) -> str:
        return (
            f"PartialFractionCdf(order={self.lambdas.size}, "
            f"split_applied={self.split_applied})"
        )


def _split_degenerate(lam: np.ndarray) -> tuple[np.ndarray, bool]:
    """Separate eigenvalue clusters closer than EIG_GAP_REL relative gaps.

    Clustered values are spread symmetrically about their position in steps
    of 2 * EIG_SPLIT_REL * lam_max (a pair becomes +/- EIG_SPLIT_REL *
    lam_max).  Deterministic: depends only on the sorted values.
    """
    lam = np.sort(lam)
    lam_max = float(lam[-1])
    split = False
    for _ in range(4):
        gap_tol = EIG_GAP_REL * lam_max
        clusters: list[list[int]] = [[0]]
        for i in range(1, lam.size):
            if lam[i] - lam[clusters[-1][-1]] <= gap_tol:
                clusters[-1].append(i)
            else:
                clusters.append([i])
        if all(len(c) == 1 for c in clusters):
            return lam, split
        split = True
        step = 2.0 * EIG_SPLIT_REL * lam_max
        out = lam.copy()
        for cluster in clusters:
            g = len(cluster)
            if g == 1:
                continue
            center = float(np.mean(lam[cluster]))
            offsets = (np.arange(g) - (g - 1) / 2.0) * step
            if center + offsets[0] <= 0.0:
                raise ValueError(
                    "colliding eigenvalues are too close to zero to split; "
                    "drop them before building the partial-fraction CDF"
                )
            out[cluster] = center + offsets
        lam = np.sort(out)
    raise ValueError("eigenvalues could not be separated by the degeneracy split")


def partial_fraction_coeffs(lambdas) -> PartialFractionCdf:
    """Partial-fraction CDF coefficients for positive, distinct eigenvalues.

    Nearly coincident eigenvalues (relative gap below 1e-9) are first moved
    apart by a deterministic symmetric split of 1e-8 times the largest
    eigenvalue; the returned object records that this happened.
    """
    lam = np.asarray(lambdas, dtype=float).ravel()
    if lam.size == 0:
        raise ValueError("at least one eigenvalue is required")
    if np.any(lam <= 0.0) or not np.all(np.isfinite(lam)):
        raise ValueError(f"eigenvalues must be positive and finite, got {lambdas}")
    lam, split = _split_degenerate(lam)
    with np.errstate(over="ignore"):
        diff = lam[:, None] - lam[None, :]
        np.fill_diagonal(diff, 1.0)
        ratios = lam[:, None] / diff
        np.fill_diagonal(ratios, 1.0)
        coeffs = np.prod(ratios, axis=1)
    return PartialFractionCdf(lam, coeffs, split)


def correlation_power_cdf(model: CorrelationModel, dims: ChannelDims) -> PartialFractionCdf:
    """Power-gain CDF of a correlated channel from its correlation eigenvalues.

    Zero eigenvalues (relative to the largest) carry no energy and are
    dropped before the partial-fraction expansion, so singular correlation
    matrices are handled.
    """
    lam = model.eigenvalues(dims)
    lam_max = float(np.max(lam)) if lam.size else 0.0
    if lam_max <= 0.0:
        raise ValueError("correlation matrix has no nonzero eigenvalues")
    return partial_fraction_coeffs(lam[lam > ZERO_EIG_REL * lam_max])


def low_snr_outage(f_h: Callable[[float], float], m: int, r: float) -> float:
    """Low-SNR outage probability F_H(m r) for a power-gain CDF ``f_h``.

    The SNR does not appear: in this regime the outage depends only on the
    multiplexing gain and the channel power-gain statistics.
    """
    if m < 1:
        raise ValueError(f"m must be >= 1, got {m}")
    if r < 0.0:
        raise ValueError(f"multiplexing gain must be >= 0, got {r}")
    return float(f_h(m * r))


def low_snr_outage_iid(dims: ChannelDims, r: float) -> float:
    """Low-SNR outage of the i.i.d. Rayleigh channel: F_{mn}(m r)."""
    if r < 0.0:
        raise ValueError(f"multiplexing gain must be >= 0, got {r}")
    return mrc_cdf(dims.size, dims.m * r)


def low_outage_approx_iid(dims: ChannelDims, r: float) -> float:
    """Small-argument outage approximation (m r)^{mn} / (mn)! for m r << 1."""
    if r < 0.0:
        raise ValueError(f"multiplexing gain must be >= 0, got {r}")
    if r == 0.0:
        return 0.0
    mn = dims.size
    log_p = mn * math.log(dims.m * r) - math.lgamma(mn + 1)
    return min(math.exp(log_p), 1.0)


def low_snr_outage_correlated(model: CorrelationModel, dims: ChannelDims, r: float) -> float:
    """Low-SNR outage of a correlated Rayleigh channel via partial fractions.

    Evaluates the power-gain CDF 1 - sum A_i exp(-m r / lambda_i) over the
    nonzero eigenvalues of the correlation matrix; for Kronecker models the
    eigenvalue set is the outer product of the per-side eigenvalues.
    """
    if r < 0.0:
        raise ValueError(f"multiplexing gain must be >= 0, got {r}")
    if isinstance(model, IidCorrelation):
        return low_snr_outage_iid(dims, r)
    return correlation_power_cdf(model, dims).cdf(dims.m * r)


def _log_det_correlation(model: CorrelationModel, dims: ChannelDims) -> float:
    if isinstance(model, FullCorrelation):
        lam = model.eigenvalues(dims)
        if np.min(lam) <= ZERO_EIG_REL * np.max(lam):
            raise ValueError("correlation matrix is singular; the low-outage "
                             "approximation is undefined")
        return float(np.sum(np.log(lam)))
    if isinstance(model, KroneckerCorrelation):
        tx, rx = model.tx_eigenvalues, model.rx_eigenvalues
        if np.min(tx) <= ZERO_EIG_REL * np.max(tx) or np.min(rx) <= ZERO_EIG_REL * np.max(rx):
            raise ValueError("correlation matrix is singular; the low-outage "
                             "approximation is undefined")
        # det R = (det R_r)^m (det R_t)^n for the separable model.
        return dims.m * float(np.sum(np.log(rx))) + dims.n * float(np.sum(np.log(tx)))
    raise TypeError(f"unsupported correlation model: {model!r}")


def low_outage_approx_correlated(model: CorrelationModel, dims: ChannelDims, r: float) -> float:
    """Small-argument correlated outage (1/det R) (m r)^{mn} / (mn)!.

    Requires a nonsingular correlation matrix.  Under trace normalization
    det R <= 1, so this never falls below the i.i.d. approximation:
    correlation always hurts in the low-outage regime.
    """
    if r < 0.0:
        raise ValueError(f"multiplexing gain must be >= 0, got {r}")
    if isinstance(model, IidCorrelation):
        return low_outage_approx_iid(dims, r)
    log_det = _log_det_correlation(model, dims)
    if r == 0.0:
        return 0.0
    mn = dims.size
    log_p = mn * math.log(dims.m * r) - math.lgamma(mn + 1) - log_det
    return min(math.exp(log_p), 1.0)


@dataclass(frozen=True)
class DmtPoint:
    """One point of the diversity-multiplexing curve."""

    r: float
    d: float


def dmt(dims: ChannelDims, r: float) -> DmtPoint:
    """Diversity gain d(r) = (n - r)(m - r) at integer r, linear in between.

    Defined for 0 <= r <= min(m, n); the curve is piecewise linear between
    the integer anchors, nonincreasing and convex, with d(0) = mn and
    d(min(m, n)) = 0.
    """
    top = dims.min_dim
    if not 0.0 <= r <= top:
        raise ValueError(f"multiplexing gain must be in [0, {top}], got {r}")

    def anchor(j: int) -> float:
        return float((dims.n - j) * (dims.m - j))

    lo = min(int(math.floor(r)), top - 1)
    frac = r - lo
    return DmtPoint(r=float(r), d=(1.0 - frac) * anchor(lo) + frac * anchor(lo + 1))


@dataclass(frozen=True)
class SnrPoint:
    """Average SNR per receive antenna, linear scale."""

    gamma: float

    def __post_init__(self) -> None:
        if not self.gamma > 0.0:
            raise ValueError(f"SNR must be positive, got {self.gamma}")

    @property
    def db(self) -> float:
        return 10.0 * math.log10(self.gamma)

    @classmethod
    def from_db(cls, snr_db: float) -> "SnrPoint":
        return cls(10.0 ** (snr_db / 10.0))


def target_rate(r: float, gamma: float) -> float:
    """Target rate r * ln(1 + gamma) in nats/s/Hz.

    The multiplexing gain scales the rate as a fraction of the non-fading
    AWGN capacity, which keeps the definition meaningful at every SNR.
    """
    if r < 0.0:
        raise ValueError(f"multiplexing gain must be >= 0, got {r}")
    if not gamma > 0.0:
        raise ValueError(f"SNR must be positive, got {gamma}")
    return r * math.log1p(gamma)


def target_rate_low_snr(r: float, gamma: float) -> float:
    """Low-SNR approximation r * gamma of the target rate (gamma << 1 only)."""
    if r < 0.0:
        raise ValueError(f"multiplexing gain must be >= 0, got {r}")
    if not gamma > 0.0:
        raise ValueError(f"SNR must be positive, got {gamma}")
    return r * gamma


@dataclass(frozen=True)
class PiecewiseParams:
    """High-SNR power-law parameters for the whole-range approximation c / gamma^d."""

    c: float
    d: float

    def __post_init__(self) -> None:
        if not self.c > 0.0:
            raise ValueError(f"c must be positive, got {self.c}")
        if self.d < 0.0:
            raise ValueError(f"d must be >= 0, got {self.d}")

    @classmethod
    def for_iid(cls, dims: ChannelDims, r: float, c: float) -> "PiecewiseParams":
        """Parameters with the diversity exponent taken from the i.i.d. curve."""
        return cls(c=c, d=dmt(dims, r).d)


def piecewise_outage(
    dims: ChannelDims,
    r: float,
    gamma: float,
    params: PiecewiseParams,
    f_h: Callable[[float], float],
) -> float:
    """Whole-range outage approximation min[F_H(m r), c / gamma^d], capped at 1.

    Piecewise linear on a log-log scale: the SNR-independent low-SNR plateau
    up to the crossover SNR (c / F_H(m r))^{1/d}, then the high-SNR power
    law.  Accurate at both ends, less so in the transition region.
    """
    if r < 0.0:
        raise ValueError(f"multiplexing gain must be >= 0, got {r}")
    if not gamma > 0.0:
        raise ValueError(f"SNR must be positive, got {gamma}")
    plateau = float(f_h(dims.m * r))
    tail = params.c / gamma**params.d
    return min(plateau, tail, 1.0)


def scalar_outage_exact(r: float, gamma: float) -> float:
    """Exact 1x1 Rayleigh outage at any SNR: F_h(((1+gamma)^r - 1) / gamma).

    Uses expm1/log1p so small rates and SNRs do not lose precision.
    """
    if not 0.0 <= r <= 1.0:
        raise ValueError(f"scalar-channel multiplexing gain must be in [0, 1], got {r}")
    if not gamma > 0.0:
        raise ValueError(f"SNR must be positive, got {gamma}")
    arg = math.expm1(r * math.log1p(gamma)) / gamma
    return -math.expm1(-arg)


class HighSnrOutage(NamedTuple):
    """Two forms of the scalar high-SNR approximation."""

    cdf_form: float     # F_h(1 / gamma^{1-r})
    power_law: float    # 1 / gamma^{1-r}


def scalar_outage_high_snr(r: float, gamma: float) -> HighSnrOutage:
    """Scalar-channel high-SNR approximations, valid once gamma^r >> 1.

    Returns both the CDF form F_h(1/gamma^{1-r}) and the raw power law
    1/gamma^{1-r}, whose log-log slope is the diversity gain 1 - r.
    """
    if not 0.0 < r < 1.0:
        raise ValueError(f"high-SNR approximation needs 0 < r < 1, got {r}")
    if not gamma > 0.0:
        raise ValueError(f"SNR must be positive, got {gamma}")
    power_law = gamma ** (r - 1.0)
    return HighSnrOutage(cdf_form=-math.expm1(-power_law), power_law=power_law)


def scalar_outage_low_snr(r: float) -> float:
    """Scalar-channel low-SNR outage F_h(r) = 1 - exp(-r), SNR-independent."""
    if not 0.0 <= r <= 1.0:
        raise ValueError(f"scalar-channel multiplexing gain must be in [0, 1], got {r}")
    return -math.expm1(-r)


class RegimeBoundaries(NamedTuple):
    """SNR thresholds (linear scale) delimiting the low and high-SNR regimes."""

    gamma_low: float
    gamma_high: float


def regime_boundaries(r: float) -> RegimeBoundaries:
    """Scalar-channel regime boundaries at 10% argument accuracy.

    The low-SNR approximation holds for gamma <= 0.1 regardless of the
    multiplexing gain; the high-SNR one needs gamma >= 10^{1/r}, which grows
    without bound as r -> 0 (r <= 0 is rejected as unbounded).
    """
    if r <= 0.0:
        raise ValueError(f"high-SNR boundary is unbounded for r = {r}")
    if r > 1.0:
        raise ValueError(f"scalar-channel multiplexing gain must be in (0, 1], got {r}")
    return RegimeBoundaries(gamma_low=0.1, gamma_high=10.0 ** (1.0 / r))
