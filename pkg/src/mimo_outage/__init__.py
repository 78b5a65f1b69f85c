"""Outage probability of MIMO Rayleigh channels: low-SNR closed forms,
whole-range piecewise approximation, and a Monte Carlo reference simulator."""

__version__ = "0.1.0"

from .analytic import (
    DmtPoint,
    HighSnrOutage,
    PartialFractionCdf,
    PiecewiseParams,
    RegimeBoundaries,
    SnrPoint,
    correlation_power_cdf,
    dmt,
    low_outage_approx_correlated,
    low_outage_approx_iid,
    low_snr_outage,
    low_snr_outage_correlated,
    low_snr_outage_iid,
    mrc_cdf,
    partial_fraction_coeffs,
    piecewise_outage,
    regime_boundaries,
    scalar_outage_exact,
    scalar_outage_high_snr,
    scalar_outage_low_snr,
    target_rate,
    target_rate_low_snr,
)
from .channel import (
    ChannelDims,
    ChannelRealization,
    CorrelationModel,
    FullCorrelation,
    IidCorrelation,
    KroneckerCorrelation,
    block_sampler,
    correlation_factor,
    empirical_power_cdf,
    exponential_correlation,
    power_gain,
    power_gain_samples,
    sample_correlated,
    sample_iid,
    substream,
)
from .montecarlo import (
    CalibrationResult,
    OutageEstimate,
    SlopeEstimate,
    calibrate_c,
    capacity,
    estimate_outage,
    estimate_slope,
    wilson_interval,
)

__all__ = [
    "CalibrationResult",
    "ChannelDims",
    "ChannelRealization",
    "CorrelationModel",
    "DmtPoint",
    "FullCorrelation",
    "HighSnrOutage",
    "IidCorrelation",
    "KroneckerCorrelation",
    "OutageEstimate",
    "PartialFractionCdf",
    "PiecewiseParams",
    "RegimeBoundaries",
    "SlopeEstimate",
    "SnrPoint",
    "block_sampler",
    "calibrate_c",
    "capacity",
    "correlation_factor",
    "correlation_power_cdf",
    "dmt",
    "empirical_power_cdf",
    "estimate_outage",
    "estimate_slope",
    "exponential_correlation",
    "low_outage_approx_correlated",
    "low_outage_approx_iid",
    "low_snr_outage",
    "low_snr_outage_correlated",
    "low_snr_outage_iid",
    "mrc_cdf",
    "partial_fraction_coeffs",
    "piecewise_outage",
    "power_gain",
    "power_gain_samples",
    "regime_boundaries",
    "sample_correlated",
    "sample_iid",
    "scalar_outage_exact",
    "scalar_outage_high_snr",
    "scalar_outage_low_snr",
    "substream",
    "target_rate",
    "target_rate_low_snr",
    "wilson_interval",
]
