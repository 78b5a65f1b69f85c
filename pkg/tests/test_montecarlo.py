"""Monte Carlo estimator: capacity math, determinism, intervals, slopes."""

import math

import numpy as np
import pytest

from mimo_outage.analytic import scalar_outage_exact
from mimo_outage.channel import (
    ChannelDims,
    ChannelRealization,
    FullCorrelation,
    IidCorrelation,
    sample_iid,
    substream,
)
from mimo_outage.montecarlo import (
    OutageEstimate,
    calibrate_c,
    capacity,
    estimate_outage,
    estimate_slope,
    wilson_interval,
)

IID = IidCorrelation()
D11 = ChannelDims(1, 1)
D22 = ChannelDims(2, 2)

F4_AT_2 = 0.1428765395014529
SCALAR_EXACT_HALF_AT_1 = 0.33914019859317207


class TestCapacity:
    def test_zero_channel(self):
        assert capacity(np.zeros((2, 2), dtype=complex), 1.0, 2) == 0.0

    def test_scalar_unit(self):
        assert capacity(np.array([[1.0 + 0j]]), 1.0, 1) == pytest.approx(
            math.log(2.0), rel=1e-14
        )

    def test_identity_2x2(self):
        assert capacity(np.eye(2, dtype=complex), 2.0, 2) == pytest.approx(
            2.0 * math.log(2.0), rel=1e-14
        )

    def test_matches_eigenvalue_sum(self):
        # independent route: eigenvalues of H H^H summed through log1p
        rng = np.random.default_rng(17)
        for m, n in [(1, 1), (2, 2), (2, 3), (4, 2), (3, 3)]:
            for gamma in (1e-3, 1.0, 1e3):
                H = rng.standard_normal((n, m)) + 1j * rng.standard_normal((n, m))
                lam = np.linalg.eigvalsh(H @ H.conj().T)
                expected = float(np.sum(np.log1p((gamma / m) * np.clip(lam, 0.0, None))))
                got = capacity(ChannelRealization(H), gamma, m)
                assert got == pytest.approx(expected, rel=1e-10)

    def test_accepts_realization_and_array(self):
        H = sample_iid(D22, substream(1, 0))
        assert capacity(H, 1.0, 2) == capacity(H.matrix, 1.0, 2)

    def test_rejects_bad_inputs(self):
        with pytest.raises(ValueError):
            capacity(np.array([[np.nan + 0j]]), 1.0, 1)
        with pytest.raises(ValueError):
            capacity(np.eye(2, dtype=complex), 0.0, 2)
        with pytest.raises(ValueError):
            capacity(np.eye(2, dtype=complex), 1.0, 0)


class TestWilsonInterval:
    def test_reference_value(self):
        # score-interval formula at z = 1.9599639845400536, 30-digit arithmetic
        low, high = wilson_interval(15, 100)
        assert low == pytest.approx(0.0930598528366, abs=1e-10)
        assert high == pytest.approx(0.232835595908, abs=1e-10)

    def test_extremes(self):
        low0, high0 = wilson_interval(0, 50)
        assert low0 == 0.0 and 0.0 < high0 < 0.12
        lown, highn = wilson_interval(50, 50)
        assert highn == 1.0 and 0.88 < lown < 1.0

    def test_contains_point_estimate(self):
        rng = np.random.default_rng(5)
        for _ in range(200):
            n = int(rng.integers(1, 10000))
            k = int(rng.integers(0, n + 1))
            low, high = wilson_interval(k, n)
            assert 0.0 <= low <= k / n <= high <= 1.0

    def test_rejects_bad_counts(self):
        with pytest.raises(ValueError):
            wilson_interval(5, 0)
        with pytest.raises(ValueError):
            wilson_interval(7, 5)


class TestEstimateOutage:
    def test_zero_rate_never_outages(self):
        est = estimate_outage(IID, D22, 1.0, 0.0, 1000, seed=1)
        assert est.outage_count == 0
        assert est.p_hat == 0.0
        assert est.ci_low == 0.0

    def test_2x2_low_snr_plateau(self):
        est = estimate_outage(IID, D22, 0.01, 1.0, 10**7, seed=71)
        assert est.p_hat == pytest.approx(F4_AT_2, abs=0.003)

    def test_scalar_matches_exact_formula(self):
        est = estimate_outage(IID, D11, 1.0, 0.5, 10**6, seed=2001)
        assert est.ci_low <= SCALAR_EXACT_HALF_AT_1 <= est.ci_high

    def test_deterministic(self):
        a = estimate_outage(IID, D22, 0.5, 1.0, 200000, seed=9)
        b = estimate_outage(IID, D22, 0.5, 1.0, 200000, seed=9)
        assert a == b

    def test_worker_count_invariance(self):
        # 300000 trials span several blocks plus a partial one
        kwargs = dict(model=IID, dims=D22, gamma=0.01, r=1.0, trials=300000, seed=7)
        counts = {estimate_outage(workers=w, **kwargs).outage_count for w in (1, 8, 64)}
        assert len(counts) == 1

    def test_trial_floor(self):
        with pytest.raises(ValueError):
            estimate_outage(IID, D22, 1.0, 1.0, 99, seed=1)

    def test_monotone_in_gamma_and_r(self):
        ests = [estimate_outage(IID, D22, g, 1.0, 10**5, seed=81) for g in (0.01, 1.0, 100.0)]
        for lo, hi in zip(ests, ests[1:]):
            width = (lo.ci_high - lo.ci_low) + (hi.ci_high - hi.ci_low)
            assert hi.p_hat <= lo.p_hat + width
        ests_r = [estimate_outage(IID, D22, 1.0, r, 10**5, seed=82) for r in (0.5, 1.0, 1.5)]
        for lo, hi in zip(ests_r, ests_r[1:]):
            width = (lo.ci_high - lo.ci_low) + (hi.ci_high - hi.ci_low)
            assert hi.p_hat >= lo.p_hat - width

    def test_low_snr_estimates_snr_independent(self):
        # shared seed: the three estimates differ only through the SNR
        ests = [
            estimate_outage(IID, D22, g, 1.0, 10**6, seed=83)
            for g in (0.001, 0.003, 0.01)
        ]
        for i in range(len(ests)):
            for j in range(i + 1, len(ests)):
                assert ests[i].overlaps(ests[j])

    def test_estimate_invariants(self):
        with pytest.raises(ValueError):
            OutageEstimate(p_hat=0.5, ci_low=0.6, ci_high=0.7, trials=10,
                           outage_count=5, seed=0)


class TestEstimateSlope:
    def test_scalar_high_snr_diversity(self):
        s = estimate_slope(IID, D11, 0.5, (1e3, 1e4), 10**7, seed=61)
        assert s.slope == pytest.approx(-0.5, abs=0.05)

    def test_2x2_full_rate_diversity(self):
        s = estimate_slope(IID, D22, 1.0, (1e3, 1e4), 10**7, seed=62)
        assert s.slope == pytest.approx(-1.0, abs=0.1)

    def test_low_snr_plateau_is_flat(self):
        s = estimate_slope(IID, D22, 1.0, (0.001, 0.01), 10**7, seed=63)
        assert s.slope == pytest.approx(0.0, abs=0.05)

    def test_zero_outage_rejected(self):
        with pytest.raises(ValueError, match="no outage"):
            estimate_slope(IID, D11, 0.1, (1e8, 1e9), 1000, seed=1)

    def test_identical_window_rejected(self):
        with pytest.raises(ValueError):
            estimate_slope(IID, D11, 0.5, (10.0, 10.0), 1000, seed=1)


class TestCoverage:
    def test_wilson_covers_true_value(self):
        # 200 independent runs against the exact scalar outage
        p_true = scalar_outage_exact(0.5, 1.0)
        covered = 0
        for i in range(200):
            est = estimate_outage(IID, D11, 1.0, 0.5, 1500, seed=50000 + i)
            if est.ci_low <= p_true <= est.ci_high:
                covered += 1
        assert covered >= 180


class TestCalibrate:
    def test_scalar_constant_near_one(self):
        result = calibrate_c(IID, D11, 0.5, [1e4], 10**7, seed=64)
        assert result.c == pytest.approx(1.0, rel=0.10)
        assert result.d == 0.5

    def test_2x2_anchor_stability(self):
        result = calibrate_c(IID, D22, 1.0, [1e3, 1e4], 10**7, seed=65)
        assert result.spread < 0.15
        assert result.d == 1.0
        assert result.c > 0.0

    def test_zero_rate_rejected(self):
        with pytest.raises(ValueError, match="r > 0"):
            calibrate_c(IID, D22, 0.0, [1e3], 1000, seed=1)

    def test_max_rate_rejected(self):
        # d(min(m, n)) = 0: no decaying power law to fit
        with pytest.raises(ValueError, match="power law"):
            calibrate_c(IID, D22, 2.0, [1e3], 1000, seed=1)

    def test_zero_outage_anchor_rejected(self):
        with pytest.raises(ValueError, match="anchor"):
            calibrate_c(IID, D11, 0.5, [1e9], 1000, seed=1)

    def test_low_anchor_warns(self):
        with pytest.warns(UserWarning, match="below the high-SNR boundary"):
            calibrate_c(IID, D11, 0.5, [10.0], 10**5, seed=66)


class TestCorrelatedEstimation:
    def test_full_model_estimate(self):
        model = FullCorrelation(np.diag([0.5, 1.5]))
        est = estimate_outage(model, ChannelDims(1, 2), 0.01, 0.2, 10**6, seed=3001)
        # low-SNR closed form for eigenvalues (0.5, 1.5) at m*r = 0.2
        assert est.ci_low <= 0.022400044453398469 <= est.ci_high
