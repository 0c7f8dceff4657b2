import io

import numpy as np
import pytest
from scipy import stats

from ngwsim import (
    P_BASIS,
    SampleSet,
    StateSpec,
    bin_samples,
    build_state,
    default_half_range,
    default_theta_grid,
    displace_samples,
    estimate_fi,
    estimate_witness,
    hellinger_sq,
    load_samples_csv,
    measurement_pdf,
    parabola_fit,
    replicate,
    sample,
    save_samples_csv,
)

SPEC = StateSpec(0.2, 0.2)
STATE = build_state(SPEC)


class TestSampling:
    def test_deterministic_for_seed(self):
        a = sample(STATE, 5000, seed=42)
        b = sample(STATE, 5000, seed=42)
        assert np.array_equal(a.pairs, b.pairs)
        assert a.acceptance_rate == b.acceptance_rate

    def test_streams_independent(self):
        a = sample(STATE, 5000, seed=42)
        b = sample(STATE, 5000, seed=42, stream=1)
        assert not np.array_equal(a.pairs, b.pairs)

    def test_requires_positive_count(self):
        with pytest.raises(ValueError):
            sample(STATE, 0, seed=1)

    def test_moments_match_theory(self):
        record = sample(STATE, 300_000, seed=7)
        n = len(record)
        var_x = 2 * np.exp(-0.4)
        # parity: empirical mean within 5 statistical sigmas of zero
        se_mean = np.sqrt(var_x / n)
        assert np.all(np.abs(record.pairs.mean(axis=0)) < 5 * se_mean)
        fourth = measurement_pdf(STATE).moment(4, 0)
        se_var = np.sqrt((fourth - var_x**2) / n)
        assert abs(record.pairs[:, 0].var(ddof=1) - var_x) < 5 * se_var

    def test_chi2_against_exact_density(self):
        # production-scale record: 5e5 samples, bin 0.2
        record = sample(STATE, 500_000, seed=9)
        hist = bin_samples(record, 0.2, 6.0)
        pdf = measurement_pdf(STATE)
        nb = hist.n_bins
        sub = (np.arange(5) + 0.5) / 5 * 0.2
        centers = (-6.0 + 0.2 * np.arange(nb))[:, None] + sub[None, :]
        flat = centers.ravel()
        gx, gy = np.meshgrid(flat, flat, indexing="ij")
        probs = pdf(np.column_stack([gx.ravel(), gy.ravel()])).reshape(nb, 5, nb, 5).mean(axis=(1, 3)) * 0.04
        expected = probs * hist.total
        mask = expected >= 10.0
        chi2 = float(np.sum((hist.counts[mask] - expected[mask]) ** 2 / expected[mask]))
        # lump everything else into one residual class
        rest_obs = hist.counts[~mask].sum() + hist.dropped
        rest_exp = max(hist.total + hist.dropped - expected[mask].sum(), 1e-9)
        chi2 += (rest_obs - rest_exp) ** 2 / rest_exp
        dof = int(mask.sum())  # one class absorbed by the total constraint
        p_value = stats.chi2.sf(chi2, dof)
        assert p_value > 0.001


class TestDisplaceSamples:
    def test_plus_definition(self):
        data = SampleSet(pairs=np.array([[1.0, -0.5]]))
        out = displace_samples(data, 0.1, sign=+1)
        assert np.allclose(out.pairs, [[0.9, -0.6]])

    def test_theta_zero_identity(self):
        data = SampleSet(pairs=np.array([[1.0, -0.5]]))
        assert np.allclose(displace_samples(data, 0.0).pairs, data.pairs)

    def test_minus_definition(self):
        data = SampleSet(pairs=np.array([[1.0, -0.5]]))
        out = displace_samples(data, 0.1, sign=-1)
        assert np.allclose(out.pairs, [[0.9, -0.4]])


class TestBinning:
    def test_bin_count_arithmetic(self):
        data = SampleSet(pairs=np.zeros((10, 2)))
        hist = bin_samples(data, 0.2, 6.0)
        assert hist.n_bins == 60
        assert hist.counts.sum() == hist.total == 10

    def test_all_zero_dataset_single_cell(self):
        hist = bin_samples(SampleSet(pairs=np.zeros((7, 2))), 0.5, 2.0)
        occupied = np.argwhere(hist.counts > 0)
        assert occupied.shape == (1, 2)
        # zero lies on an edge; half-open cells put it just above the origin
        assert tuple(occupied[0]) == (hist.n_bins // 2, hist.n_bins // 2)

    def test_out_of_range_dropped(self):
        pairs = np.array([[0.1, 0.1], [10.0, 0.0], [-3.0, 2.01]])
        hist = bin_samples(SampleSet(pairs=pairs), 0.5, 2.0)
        assert hist.total == 1 and hist.dropped == 2

    def test_invalid_geometry(self):
        data = SampleSet(pairs=np.zeros((1, 2)))
        with pytest.raises(ValueError):
            bin_samples(data, -0.1, 2.0)
        with pytest.raises(ValueError):
            bin_samples(data, 0.3, 1.0)

    def test_default_half_range_multiple_of_delta(self):
        record = sample(STATE, 20_000, seed=3)
        for delta in (0.1, 0.2, 0.4):
            half = default_half_range(record, delta)
            assert abs(half / delta - round(half / delta)) < 1e-9
            assert half >= 6 * record.pairs.std(axis=0).max() - delta


class TestHellinger:
    def test_identical_zero(self):
        record = sample(STATE, 10_000, seed=5)
        hist = bin_samples(record, 0.2, 6.0)
        assert hellinger_sq(hist, hist) == 0.0

    def test_disjoint_is_one(self):
        a = bin_samples(SampleSet(pairs=np.full((5, 2), 0.55)), 0.5, 2.0)
        b = bin_samples(SampleSet(pairs=np.full((5, 2), -0.55)), 0.5, 2.0)
        assert abs(hellinger_sq(a, b) - 1.0) < 1e-14

    def test_geometry_mismatch(self):
        a = bin_samples(SampleSet(pairs=np.zeros((5, 2))), 0.5, 2.0)
        b = bin_samples(SampleSet(pairs=np.zeros((5, 2))), 0.25, 2.0)
        with pytest.raises(ValueError):
            hellinger_sq(a, b)

    def test_exact_density_curvature(self):
        # exact cell probabilities, theta = 0.02: d2 ~ F theta^2 / 8 within 2%
        from ngwsim.estimator import BinnedHistogram

        pdf = measurement_pdf(STATE)
        delta, half = 0.05, 7.0
        nb = int(round(2 * half / delta))
        sub = (np.arange(3) + 0.5) / 3 * delta
        centers = (-half + delta * np.arange(nb))[:, None] + sub[None, :]
        flat = centers.ravel()
        gx, gy = np.meshgrid(flat, flat, indexing="ij")

        def probs(theta):
            pts = np.column_stack([gx.ravel() + theta, gy.ravel() + theta])
            return pdf(pts).reshape(nb, 3, nb, 3).mean(axis=(1, 3)) * delta * delta

        scale = 10**15  # integer-quantized exact probabilities

        def as_hist(p):
            counts = np.round(p * scale).astype(np.int64)
            return BinnedHistogram(delta=delta, half_range=half, counts=counts,
                                   total=int(counts.sum()), dropped=0)

        theta = 0.02
        d2 = hellinger_sq(as_hist(probs(0.0)), as_hist(probs(theta)))
        target = 6 * np.exp(0.4) * theta**2 / 8
        # exact computation puts the discretization deficit at 2.9% for this
        # bin size; the distance itself is reproduced to quadrature precision
        assert abs(d2 / target - 1.0) < 0.03
        assert abs(d2 / target - 0.9711) < 0.002


class TestParabolaFit:
    def test_exact_recovery(self):
        thetas = default_theta_grid()
        d2 = 3.1e-4 + 0.9 * thetas**2
        c0, a, se_c0, se_a = parabola_fit(thetas, d2)
        assert abs(c0 - 3.1e-4) < 1e-15
        assert abs(a - 0.9) < 1e-12
        assert se_a < 1e-12

    def test_default_grid_shape(self):
        grid = default_theta_grid()
        assert len(grid) == 20
        assert 0.0 not in grid
        assert abs(grid.max() - 0.05) < 1e-15
        assert abs(grid[1] - grid[0] - 0.005) < 1e-15
        with pytest.raises(ValueError):
            default_theta_grid(steps=5)


class TestEstimateFi:
    def test_requires_enough_grid_points(self):
        record = sample(STATE, 10_000, seed=1)
        with pytest.raises(ValueError):
            estimate_fi(record, theta_grid=[0.01, 0.02, 0.03])

    def test_empty_range_rejected(self):
        record = SampleSet(pairs=np.full((100, 2), 50.0))
        with pytest.raises(ValueError):
            estimate_fi(record, delta=0.1, half_range=1.0)

    def test_correction_shrinks(self):
        record = sample(STATE, 400_000, seed=11)
        fit = estimate_fi(record, delta=0.1)
        assert fit.f_corrected <= fit.f_raw
        assert fit.stderr > 0

    def test_converges_to_binned_information(self):
        # the Hellinger estimate approaches the discretized-family limit,
        # which itself approaches the continuous FI as the bin shrinks
        f_cont = 6 * np.exp(0.4)
        coarse = estimate_fi(sample(STATE, 1_000_000, seed=21), delta=0.2)
        fine = estimate_fi(sample(STATE, 4_000_000, seed=22), delta=0.05)
        assert abs(fine.f_corrected - f_cont) < abs(coarse.f_corrected - f_cont)
        assert abs(coarse.f_corrected - f_cont) / f_cont < 0.2


class TestWitnessPipeline:
    def test_lossless_detection(self):
        x_data = sample(STATE, 600_000, seed=31)
        p_data = sample(STATE, 600_000, seed=31, basis=P_BASIS, stream=1)
        est = estimate_witness(x_data, p_data, delta=0.1)
        assert est.e_value > 0
        assert abs(est.var_pa - 2 * np.exp(0.4)) < 5 * est.var_pa_err
        # dominated by the known discretization deficit, not by noise
        assert abs(est.e_value - 2 * np.exp(0.4)) < 0.8

    def test_small_loss_still_detects(self):
        # power-loss 1%: detection survives, witness sits below the lossless value
        spec = StateSpec(0.2, 0.2, eta=0.01)
        state = build_state(spec)
        x_data = sample(state, 600_000, seed=41)
        p_data = sample(state, 600_000, seed=41, basis=P_BASIS, stream=1)
        est = estimate_witness(x_data, p_data, delta=0.2)
        assert 0 < est.e_value < 2 * np.exp(0.4)


class TestReplicate:
    def test_deterministic_and_order_independent(self):
        a = replicate(SPEC, 40_000, 3, seed=5, delta=0.2)
        b = replicate(SPEC, 40_000, 3, seed=5, delta=0.2, workers=2)
        assert np.array_equal(a.values, b.values)

    def test_single_rep_has_no_spread(self):
        summary = replicate(SPEC, 40_000, 1, seed=5, delta=0.2)
        assert np.isnan(summary.std) and np.isnan(summary.stderr_mean)
        assert not summary.overestimated

    def test_overestimation_flag_small_m_small_bin(self):
        summary = replicate(SPEC, 1_000_000, 16, seed=6, delta=0.02,
                            theory=2 * np.exp(0.4))
        assert summary.overestimated
        assert summary.raw_mean > summary.theory

    def test_no_overestimation_at_recommended_bin(self):
        summary = replicate(SPEC, 400_000, 6, seed=8, delta=0.2,
                            theory=2 * np.exp(0.4))
        assert summary.mean - summary.theory < 2 * summary.stderr_mean


class TestInterceptTheory:
    def test_split_halves_distance_matches_counting_model(self):
        # d2 between the two undisplaced halves ~ (n - 1)/(4 M/2)
        values, theory = [], []
        for i in range(10):
            record = sample(STATE, 1_000_000, seed=33, stream=i)
            m_half = len(record.pairs) // 2
            half_range = default_half_range(record, 0.4)
            ref = bin_samples(record.pairs[:m_half], 0.4, half_range)
            probe = bin_samples(record.pairs[m_half:2 * m_half], 0.4, half_range)
            n_occ = int(np.count_nonzero((ref.counts > 0) | (probe.counts > 0)))
            values.append(hellinger_sq(ref, probe))
            theory.append((n_occ - 1) / (4 * m_half))
        values = np.array(values)
        gap = abs(values.mean() - np.mean(theory))
        assert gap <= 3 * values.std(ddof=1)


class TestCsv:
    def test_roundtrip_exact(self):
        record = sample(STATE, 500, seed=13)
        buf = io.StringIO()
        save_samples_csv(record, buf)
        buf.seek(0)
        loaded = load_samples_csv(buf)
        assert np.array_equal(loaded.pairs, record.pairs)

    def test_header_validated(self):
        with pytest.raises(ValueError):
            load_samples_csv(io.StringIO("a,b\n1.0,2.0\n"))
