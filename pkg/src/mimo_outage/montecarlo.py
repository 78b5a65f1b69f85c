"""Monte Carlo outage estimation at arbitrary SNR.

Samples channel realizations, evaluates the log-det capacity against the
target rate r * ln(1 + gamma), and reports outage frequencies with Wilson
score intervals.  Trials are processed in fixed-size blocks with one
counter-based RNG substream per block, so the outage count is a pure
function of (parameters, seed, trials): worker count and scheduling never
change the result.
"""

from __future__ import annotations

import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from statistics import NormalDist

import numpy as np

from .analytic import dmt, regime_boundaries, target_rate
from .channel import (
    BLOCK_TRIALS,
    ChannelDims,
    ChannelRealization,
    CorrelationModel,
    block_sampler,
    substream,
)

# Two-sided 95% normal quantile for the Wilson score interval.
_Z95 = NormalDist().inv_cdf(0.975)

MIN_TRIALS = 100


@dataclass(frozen=True)
class OutageEstimate:
    """Monte Carlo outage probability with a 95% Wilson score interval."""

    p_hat: float
    ci_low: float
    ci_high: float
    trials: int
    outage_count: int
    seed: int

    def __post_init__(self) -> None:
        if not 0.0 <= self.ci_low <= self.p_hat <= self.ci_high <= 1.0:
            raise ValueError(
                f"inconsistent estimate: {self.ci_low} <= {self.p_hat} <= {self.ci_high}"
            )

    def overlaps(self, other: "OutageEstimate") -> bool:
        """True when the two 95% intervals intersect."""
        return self.ci_low <= other.ci_high and other.ci_low <= self.ci_high


@dataclass(frozen=True)
class SlopeEstimate:
    """Finite-difference log-log slope of outage vs SNR."""

    slope: float
    gamma_window: tuple[float, float]


@dataclass(frozen=True)
class CalibrationResult:
    """High-SNR power-law constant fitted from Monte Carlo anchors."""

    c: float
    d: float
    anchor_values: tuple[float, ...]
    spread: float   # max/min ratio of the per-anchor values, minus 1

    def __post_init__(self) -> None:
        if not self.c > 0.0:
            raise ValueError(f"calibrated constant must be positive, got {self.c}")


def wilson_interval(successes: int, trials: int, z: float = _Z95) -> tuple[float, float]:
    """Wilson score interval for a binomial proportion.

    Stays valid at tiny success counts (including zero), where the normal
    approximation breaks down.
    """
    if trials < 1:
        raise ValueError(f"trials must be >= 1, got {trials}")
    if not 0 <= successes <= trials:
        raise ValueError(f"successes {successes} out of range for {trials} trials")
    p = successes / trials
    denom = 1.0 + z * z / trials
    center = (p + z * z / (2 * trials)) / denom
    margin = (z / denom) * np.sqrt(p * (1.0 - p) / trials + z * z / (4.0 * trials * trials))
    # the score interval contains p by construction; clamp away the roundoff
    # that would otherwise violate it at p = 0 or p = 1
    return max(0.0, min(float(center - margin), p)), min(1.0, max(float(center + margin), p))


def capacity(H, gamma: float, m: int) -> float:
    """Instantaneous capacity ln det(I + (gamma/m) H H^H) in nats/s/Hz.

    Computed through a Cholesky factorization of the Hermitian positive
    definite Gram matrix on the smaller of the two sides, which matches the
    eigenvalue sum ln(1 + (gamma/m) lambda_i) to high relative accuracy.
    """
    mat = H.matrix if isinstance(H, ChannelRealization) else np.asarray(H, dtype=complex)
    if mat.ndim != 2:
        raise ValueError(f"channel matrix must be 2-D, got shape {mat.shape}")
    if not np.all(np.isfinite(mat.view(float))):
        raise ValueError("channel matrix contains non-finite entries")
    if not gamma > 0.0:
        raise ValueError(f"SNR must be positive, got {gamma}")
    if m < 1:
        raise ValueError(f"m must be >= 1, got {m}")
    return float(_capacity_block(mat[None, :, :], gamma, m)[0])


def _capacity_block(H: np.ndarray, gamma: float, m: int) -> np.ndarray:
    """Capacities of a (count, n, m) stack of channel matrices."""
    n_rx, n_tx = H.shape[-2], H.shape[-1]
    if n_rx <= n_tx:
        gram = np.einsum("bij,bkj->bik", H, H.conj())
    else:
        gram = np.einsum("bji,bjk->bik", H.conj(), H)
    k = gram.shape[-1]
    a = gamma / m
    chol = np.linalg.cholesky(np.eye(k) + a * gram)
    diag = np.einsum("bii->bi", chol).real
    return 2.0 * np.sum(np.log(diag), axis=1)


def _outage_blocks(trials: int) -> list[tuple[int, int]]:
    """(block index, block size) pairs covering ``trials`` in fixed-size blocks."""
    blocks = []
    done = 0
    index = 0
    while done < trials:
        count = min(BLOCK_TRIALS, trials - done)
        blocks.append((index, count))
        done += count
        index += 1
    return blocks


def estimate_outage(
    model: CorrelationModel,
    dims: ChannelDims,
    gamma: float,
    r: float,
    trials: int,
    seed: int,
    workers: int = 1,
) -> OutageEstimate:
    """Monte Carlo outage probability Pr{C < r ln(1 + gamma)}.

    The capacity is compared against the exact target rate (never its
    low-SNR approximation), so the estimate is the approximation-free
    reference at every SNR.  Ties C == R count as non-outage.  The result
    depends only on (model, dims, gamma, r, trials, seed); ``workers`` just
    schedules the fixed trial blocks across threads.
    """
    if trials < MIN_TRIALS:
        raise ValueError(f"trials must be >= {MIN_TRIALS}, got {trials}")
    if workers < 1:
        raise ValueError(f"workers must be >= 1, got {workers}")
    rate = target_rate(r, gamma)
    sampler = block_sampler(model, dims)

    def run_block(spec: tuple[int, int]) -> int:
        index, count = spec
        H = sampler(substream(seed, index), count)
        caps = _capacity_block(H, gamma, dims.m)
        return int(np.count_nonzero(caps < rate))

    blocks = _outage_blocks(trials)
    if workers == 1:
        outages = sum(run_block(b) for b in blocks)
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            outages = sum(pool.map(run_block, blocks))
    ci_low, ci_high = wilson_interval(outages, trials)
    return OutageEstimate(
        p_hat=outages / trials,
        ci_low=ci_low,
        ci_high=ci_high,
        trials=trials,
        outage_count=outages,
        seed=seed,
    )


def estimate_slope(
    model: CorrelationModel,
    dims: ChannelDims,
    r: float,
    gamma_pair: tuple[float, float],
    trials: int,
    seed: int,
    workers: int = 1,
) -> SlopeEstimate:
    """Finite-difference slope of ln P_out vs ln gamma over a two-point window.

    At high SNR the slope approaches minus the diversity gain; in the
    low-SNR plateau it approaches zero.  Both points reuse the same channel
    sample stream (common random numbers), which cancels most of the shared
    Monte Carlo noise out of the difference.
    """
    g1, g2 = gamma_pair
    if g1 == g2:
        raise ValueError("SNR window endpoints must be distinct")
    est1 = estimate_outage(model, dims, g1, r, trials, seed, workers)
    est2 = estimate_outage(model, dims, g2, r, trials, seed, workers)
    for gamma, est in ((g1, est1), (g2, est2)):
        if est.outage_count == 0:
            raise ValueError(
                f"no outage events at gamma={gamma}; increase trials to resolve the slope"
            )
    slope = float(np.log(est2.p_hat / est1.p_hat) / np.log(g2 / g1))
    return SlopeEstimate(slope=slope, gamma_window=(g1, g2))


def calibrate_c(
    model: CorrelationModel,
    dims: ChannelDims,
    r: float,
    anchor_gammas: list[float],
    trials: int,
    seed: int,
    workers: int = 1,
) -> CalibrationResult:
    """Fit the high-SNR power-law constant c from anchors deep in the tail.

    Each anchor contributes p_hat * gamma^{d(r)}; c is their geometric mean
    and the spread diagnostic flags anchors that disagree (a sign some are
    below the power-law regime).  Anchors below the high-SNR boundary only
    warn; zero outage counts are an error.
    """
    if not anchor_gammas:
        raise ValueError("at least one anchor SNR is required")
    if r <= 0.0:
        raise ValueError(
            "calibration needs r > 0: at r = 0 the outage plateau never decays "
            "and the high-SNR regime is unreachable"
        )
    d = dmt(dims, r).d
    if d <= 0.0:
        raise ValueError(f"diversity gain is 0 at r = {r}; there is no power law to fit")
    if r <= 1.0:
        gamma_high = regime_boundaries(r).gamma_high
        low = [g for g in anchor_gammas if g < gamma_high]
        if low:
            warnings.warn(
                f"anchor SNRs {low} are below the high-SNR boundary {gamma_high:.3g}; "
                "the fitted constant may be biased",
                stacklevel=2,
            )
    values = []
    for gamma in anchor_gammas:
        est = estimate_outage(model, dims, gamma, r, trials, seed, workers)
        if est.outage_count == 0:
            raise ValueError(
                f"no outage events at anchor gamma={gamma}; increase trials"
            )
        values.append(est.p_hat * gamma**d)
    c = float(np.exp(np.mean(np.log(values))))
    spread = float(max(values) / min(values)) - 1.0
    return CalibrationResult(c=c, d=d, anchor_values=tuple(values), spread=spread)
