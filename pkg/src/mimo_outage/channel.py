"""Random MIMO channel generation for i.i.d. and spatially correlated Rayleigh fading.

Channels are normalized so the mean squared Frobenius norm of the channel
matrix equals the number of entries (E||H||_F^2 = m*n).  Correlated channels
are generated by coloring an i.i.d. circular complex Gaussian vector with a
factor L of the mn x mn correlation matrix R = E[vec(H) vec(H)^H], where
vec() stacks columns.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Union

import numpy as np

# Tolerances for correlation-matrix validation and factorization.
HERMITIAN_TOL = 1e-12        # max abs elementwise deviation from R^H
EIG_REJECT_REL = 1e-10       # eigenvalues below -EIG_REJECT_REL*lam_max are invalid
TRACE_REL_TOL = 1e-9         # relative tolerance before trace rescaling kicks in
FACTOR_REL_TOL = 1e-8        # required relative Frobenius accuracy of L L^H = R

# Trials per RNG substream block.  Fixed so that Monte Carlo counts depend
# only on (seed, total trials), never on worker count or scheduling.
BLOCK_TRIALS = 1 << 16

_MAX_SEED = 2**64


@dataclass(frozen=True)
class ChannelDims:
    """Antenna counts: ``m`` transmit, ``n`` receive."""

    m: int
    n: int

    def __post_init__(self) -> None:
        if self.m < 1 or self.n < 1:
            raise ValueError(f"antenna counts must be >= 1, got m={self.m}, n={self.n}")

    @property
    def size(self) -> int:
        """Number of channel-matrix entries m*n."""
        return self.m * self.n

    @property
    def min_dim(self) -> int:
        return min(self.m, self.n)


@dataclass(frozen=True)
class ChannelRealization:
    """One draw of the n x m channel matrix."""

    matrix: np.ndarray

    def __post_init__(self) -> None:
        H = np.asarray(self.matrix, dtype=complex)
        if H.ndim != 2:
            raise ValueError(f"channel matrix must be 2-D, got shape {H.shape}")
        if not np.all(np.isfinite(H.view(float))):
            raise ValueError("channel matrix contains non-finite entries")
        object.__setattr__(self, "matrix", H)

    @property
    def power_gain(self) -> float:
        """Squared Frobenius norm of the channel matrix."""
        return float(np.sum(np.abs(self.matrix) ** 2))


def _check_hermitian(mat: np.ndarray, name: str) -> np.ndarray:
    mat = np.asarray(mat, dtype=complex)
    if mat.ndim != 2 or mat.shape[0] != mat.shape[1]:
        raise ValueError(f"{name} must be a square matrix, got shape {mat.shape}")
    asym = np.max(np.abs(mat - mat.conj().T)) if mat.size else 0.0
    if asym > HERMITIAN_TOL:
        raise ValueError(f"{name} is not Hermitian (max deviation {asym:.3e})")
    # Symmetrize so eigh sees an exactly Hermitian input.
    return 0.5 * (mat + mat.conj().T)


def _clamped_eigh(mat: np.ndarray, name: str) -> tuple[np.ndarray, np.ndarray]:
    """Eigendecomposition with small negative eigenvalues clamped to zero.

    Eigenvalues below -EIG_REJECT_REL * lam_max indicate a genuinely
    indefinite matrix and are rejected; values in the clamp band are set
    to 0 so that positive-semidefinite (singular) inputs are accepted.
    """
    w, v = np.linalg.eigh(mat)
    lam_max = float(w[-1]) if w.size else 0.0
    if lam_max < 0.0:
        raise ValueError(f"{name} is negative definite")
    if w.size and float(w[0]) < -EIG_REJECT_REL * max(lam_max, 1.0e-300):
        raise ValueError(
            f"{name} has eigenvalue {w[0]:.3e}, below the PSD tolerance"
        )
    return np.clip(w, 0.0, None), v


def _rescale_to_trace(mat: np.ndarray, target: float, name: str) -> tuple[np.ndarray, bool]:
    tr = float(np.trace(mat).real)
    if tr <= 0.0:
        raise ValueError(f"{name} has nonpositive trace {tr:.3e}")
    if abs(tr - target) <= TRACE_REL_TOL * target:
        return mat, False
    warnings.warn(
        f"{name} trace {tr:.6g} rescaled to {target:.6g} to keep the channel "
        "normalization E||H||_F^2 = m*n",
        stacklevel=3,
    )
    return mat * (target / tr), True


class IidCorrelation:
    """Uncorrelated entries; equivalent to R = identity."""

    rescaled = False

    def eigenvalues(self, dims: ChannelDims) -> np.ndarray:
        return np.ones(dims.size)

    def covariance(self, dims: ChannelDims) -> np.ndarray:
        return np.eye(dims.size, dtype=complex)

    def __repr__(self) -> str:
        return "IidCorrelation()"


class FullCorrelation:
    """Arbitrary mn x mn correlation of vec(H).

    The input must be Hermitian positive semidefinite; its trace is rescaled
    to mn (with a warning and ``rescaled`` flag) when it deviates by more
    than a relative 1e-9.
    """

    def __init__(self, matrix: np.ndarray):
        mat = _check_hermitian(matrix, "R")
        mat, self.rescaled = _rescale_to_trace(mat, float(mat.shape[0]), "R")
        self._eigenvalues, self._eigenvectors = _clamped_eigh(mat, "R")
        self.matrix = mat

    def eigenvalues(self, dims: ChannelDims) -> np.ndarray:
        self._check_dims(dims)
        return self._eigenvalues.copy()

    def covariance(self, dims: ChannelDims) -> np.ndarray:
        self._check_dims(dims)
        return self.matrix.copy()

    def _check_dims(self, dims: ChannelDims) -> None:
        if self.matrix.shape[0] != dims.size:
            raise ValueError(
                f"R is {self.matrix.shape[0]}x{self.matrix.shape[0]} but dims "
                f"(m={dims.m}, n={dims.n}) require {dims.size}x{dims.size}"
            )

    def __repr__(self) -> str:
        return f"FullCorrelation(size={self.matrix.shape[0]})"


class KroneckerCorrelation:
    """Separable correlation: R = R_t^T (x) R_r for transmit/receive sides.

    Sides are individually rescaled to traces m and n when the product
    trace(R_t)*trace(R_r) deviates from mn; only the product enters the
    combined correlation, so the split is a convention.
    """

    def __init__(self, tx: np.ndarray, rx: np.ndarray):
        tx = _check_hermitian(tx, "R_t")
        rx = _check_hermitian(rx, "R_r")
        m, n = tx.shape[0], rx.shape[0]
        prod_trace = float(np.trace(tx).real) * float(np.trace(rx).real)
        if abs(prod_trace - m * n) > TRACE_REL_TOL * m * n:
            tx, _ = _rescale_to_trace(tx, float(m), "R_t")
            rx, _ = _rescale_to_trace(rx, float(n), "R_r")
            self.rescaled = True
        else:
            self.rescaled = False
        self._tx_eigenvalues, _ = _clamped_eigh(tx, "R_t")
        self._rx_eigenvalues, _ = _clamped_eigh(rx, "R_r")
        self.tx = tx
        self.rx = rx

    @property
    def tx_eigenvalues(self) -> np.ndarray:
        return self._tx_eigenvalues.copy()

    @property
    def rx_eigenvalues(self) -> np.ndarray:
        return self._rx_eigenvalues.copy()

    def eigenvalues(self, dims: ChannelDims) -> np.ndarray:
        """All mn products of per-side eigenvalues."""
        self._check_dims(dims)
        return np.outer(self._tx_eigenvalues, self._rx_eigenvalues).ravel()

    def covariance(self, dims: ChannelDims) -> np.ndarray:
        self._check_dims(dims)
        return np.kron(self.tx.T, self.rx)

    def _check_dims(self, dims: ChannelDims) -> None:
        if self.tx.shape[0] != dims.m or self.rx.shape[0] != dims.n:
            raise ValueError(
                f"Kronecker sides are {self.tx.shape[0]}x{self.tx.shape[0]} (Tx) and "
                f"{self.rx.shape[0]}x{self.rx.shape[0]} (Rx); dims require m={dims.m}, n={dims.n}"
            )

    def __repr__(self) -> str:
        return f"KroneckerCorrelation(m={self.tx.shape[0]}, n={self.rx.shape[0]})"


CorrelationModel = Union[IidCorrelation, FullCorrelation, KroneckerCorrelation]


def exponential_correlation(size: int, rho: float) -> np.ndarray:
    """Standard exponential correlation fixture: entries rho**|i-j|.

    The result is Hermitian, positive semidefinite and has trace ``size``.
    """
    if not 0.0 <= rho < 1.0:
        raise ValueError(f"rho must be in [0, 1), got {rho}")
    if size < 1:
        raise ValueError(f"size must be >= 1, got {size}")
    idx = np.arange(size)
    mat = rho ** np.abs(idx[:, None] - idx[None, :])
    # Diagonal is all ones, so the trace already equals size; renormalize
    # anyway to keep the contract explicit.
    return mat * (size / float(np.trace(mat)))


def substream(seed: int, index: int) -> np.random.Generator:
    """Counter-based RNG substream for block ``index`` of stream ``seed``.

    Streams for distinct (seed, index) pairs are statistically independent,
    so results aggregated over blocks do not depend on how blocks are
    scheduled across workers.
    """
    if not 0 <= seed < _MAX_SEED:
        raise ValueError(f"seed must be a 64-bit unsigned integer, got {seed}")
    if index < 0:
        raise ValueError(f"block index must be >= 0, got {index}")
    key = np.array([seed, index], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


def _iid_block(dims: ChannelDims, rng: np.random.Generator, count: int) -> np.ndarray:
    """``count`` i.i.d. unit circular complex Gaussian channel matrices, (count, n, m)."""
    z = rng.standard_normal(size=(count, dims.n, dims.m, 2))
    return (z[..., 0] + 1j * z[..., 1]) / np.sqrt(2.0)


def _correlated_block(
    factor: np.ndarray, dims: ChannelDims, rng: np.random.Generator, count: int
) -> np.ndarray:
    """Colored samples vec(H) = L z, unstacked column-wise to (count, n, m)."""
    z = rng.standard_normal(size=(count, dims.size, 2))
    vec = (z[..., 0] + 1j * z[..., 1]) / np.sqrt(2.0)
    vec = vec @ factor.T
    # vec(H)[i + j*n] = H[i, j]: undo the column stacking.
    return vec.reshape(count, dims.m, dims.n).transpose(0, 2, 1)


def sample_iid(dims: ChannelDims, rng: np.random.Generator) -> ChannelRealization:
    """Draw one i.i.d. Rayleigh-fading channel matrix.

    Entries are independent circularly-symmetric complex Gaussians with zero
    mean and unit variance (real and imaginary parts each have variance 1/2).
    """
    return ChannelRealization(_iid_block(dims, rng, 1)[0])


def correlation_factor(model: CorrelationModel, dims: ChannelDims) -> np.ndarray:
    """mn x mn factor L with L L^H equal to the model covariance.

    Computed from the Hermitian eigendecomposition (never Cholesky) so that
    singular positive-semidefinite correlation matrices are accepted;
    eigenvalues in the small negative clamp band contribute zero columns.
    """
    if isinstance(model, IidCorrelation):
        return np.eye(dims.size, dtype=complex)
    if isinstance(model, FullCorrelation):
        model._check_dims(dims)
        w, v = model._eigenvalues, model._eigenvectors
        return v * np.sqrt(w)
    if isinstance(model, KroneckerCorrelation):
        model._check_dims(dims)
        w, v = np.linalg.eigh(model.covariance(dims))
        return v * np.sqrt(np.clip(w, 0.0, None))
    raise TypeError(f"unsupported correlation model: {model!r}")


def sample_correlated(
    model: CorrelationModel, dims: ChannelDims, rng: np.random.Generator
) -> ChannelRealization:
    """Draw one channel matrix with the given spatial correlation."""
    if isinstance(model, IidCorrelation):
        return sample_iid(dims, rng)
    factor = correlation_factor(model, dims)
    return ChannelRealization(_correlated_block(factor, dims, rng, 1)[0])


def block_sampler(model: CorrelationModel, dims: ChannelDims):
    """Batch sampler ``f(rng, count) -> (count, n, m)`` for Monte Carlo loops.

    The correlation factor is computed once up front; the returned closure is
    pure given (rng state, count) and safe to call from concurrent workers
    with per-block substreams.
    """
    if isinstance(model, IidCorrelation):
        return lambda rng, count: _iid_block(dims, rng, count)
    factor = correlation_factor(model, dims)
    return lambda rng, count: _correlated_block(factor, dims, rng, count)


def power_gain(H) -> float:
    """Channel power gain ||H||_F^2 = sum |h_ij|^2."""
    mat = H.matrix if isinstance(H, ChannelRealization) else np.asarray(H)
    return float(np.sum(np.abs(mat) ** 2))


def empirical_power_cdf(
    model: CorrelationModel,
    dims: ChannelDims,
    x: float,
    trials: int,
    seed: int,
) -> float:
    """Fraction of ``trials`` sampled channels with power gain strictly below ``x``.

    Deterministic given the seed; used as the sampling oracle for the
    closed-form power-gain CDFs.
    """
    if trials < 1:
        raise ValueError(f"trials must be >= 1, got {trials}")
    sampler = block_sampler(model, dims)
    below = 0
    done = 0
    block = 0
    while done < trials:
        count = min(BLOCK_TRIALS, trials - done)
        H = sampler(substream(seed, block), count)
        gains = np.einsum("bij,bij->b", H, H.conj()).real
        below += int(np.count_nonzero(gains < x))
        done += count
        block += 1
    return below / trials


def power_gain_samples(
    model: CorrelationModel,
    dims: ChannelDims,
    trials: int,
    seed: int,
) -> np.ndarray:
    """Array of ``trials`` power-gain draws; deterministic given the seed."""
    if trials < 1:
        raise ValueError(f"trials must be >= 1, got {trials}")
    sampler = block_sampler(model, dims)
    out = np.empty(trials)
    done = 0
    block = 0
    while done < trials:
        count = min(BLOCK_TRIALS, trials - done)
        H = sampler(substream(seed, block), count)
        out[done : done + count] = np.einsum("bij,bij->b", H, H.conj()).real
        done += count
        block += 1
    return out
