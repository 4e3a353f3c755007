import numpy as np
import pytest

from homspec.detector import (
    DetectionParams,
    FrameBatch,
    accidental_map,
    covariance_map,
    raw_coincidences,
    simulate_frames,
    simulate_uncorrelated_frames,
)
from homspec.errors import EmptyBatch, InconsistentMarginals
from homspec.interference import (
    MapKind,
    coincidence_probability_cosine,
    port_spectra,
)
from homspec.spectra import WavelengthGrid, gaussian_jsa
from homspec.vapor import DispersionModel, doppler_lifetime

GRID = WavelengthGrid.from_edges(790e-9, 803e-9, 64)
JSA = gaussian_jsa(796.7e-9, 10e-9, -0.9, GRID)
TAU = doppler_lifetime(447.15)
PC = coincidence_probability_cosine(JSA, DispersionModel(od=2.6e3, tau=TAU))
MARGINALS = port_spectra(JSA)

DEFAULTS = dict(chi=4.5455e-4, eta=0.25, f_rep=80e6, t_exp=11e-6)


def empty_batch(n_frames=0):
    return FrameBatch(
        n_frames=n_frames,
        grid_plus=GRID,
        grid_minus=GRID,
        frames=np.zeros(0, np.uint32),
        regions=np.zeros(0, np.uint8),
        bins=np.zeros(0, np.uint16),
    )


class TestDetectionParams:
    def test_repetitions_from_rate_and_exposure(self):
        params = DetectionParams(**DEFAULTS, seed=0)
        assert params.repetitions == 880

    def test_validation(self):
        with pytest.raises(ValueError):
            DetectionParams(chi=-0.1, eta=0.5, f_rep=1.0, t_exp=1.0)
        with pytest.raises(ValueError):
            DetectionParams(chi=0.1, eta=0.0, f_rep=1.0, t_exp=1.0)
        with pytest.raises(ValueError):
            DetectionParams(chi=0.1, eta=0.5, f_rep=1.0, t_exp=0.1)  # R rounds to 0


class TestSimulateFrames:
    def test_no_pairs_no_darks_gives_empty_frames(self):
        params = DetectionParams(chi=0.0, eta=1.0, f_rep=1.0, t_exp=1.0, seed=1)
        batch = simulate_frames(PC, MARGINALS, params, 5_000)
        assert batch.n_events == 0
        assert batch.n_frames == 5_000

    def test_single_repetition_histogram_matches_map(self):
        # eta = 1, R = 1, no darks: each frame holds at most one pair, so the
        # raw coincidence histogram estimates chi * P_c * bin area directly.
        # Binomial oracle per bin pair, 5-sigma allowance.
        small_grid = WavelengthGrid.from_edges(790e-9, 803e-9, 12)
        small_jsa = gaussian_jsa(796.7e-9, 6e-9, -0.7, small_grid)
        pc = coincidence_probability_cosine(small_jsa, DispersionModel(od=400.0, tau=TAU))
        marginals = port_spectra(small_jsa)
        chi = 0.3
        params = DetectionParams(chi=chi, eta=1.0, f_rep=1.0, t_exp=1.0, seed=11)
        n = 200_000
        batch = simulate_frames(pc, marginals, params, n)
        raw = raw_coincidences(batch)
        expected = chi * pc.values * pc.area_nm2
        sigma = np.sqrt(np.maximum(expected * (1 - expected) / n, 1e-12 / n))
        z = (raw.values - expected) / sigma
        assert np.max(np.abs(z)) < 5.0

    def test_mean_occupancy_near_design_value(self):
        # chi * eta tuned so 880 repetitions average 0.2 detected photons.
        params = DetectionParams(**DEFAULTS, seed=2)
        batch = simulate_frames(PC, MARGINALS, params, 100_000)
        per_frame = batch.n_events / batch.n_frames
        assert per_frame == pytest.approx(0.2, rel=0.1)

    def test_deterministic_given_seed(self):
        params = DetectionParams(**DEFAULTS, seed=33)
        a = simulate_frames(PC, MARGINALS, params, 30_000)
        b = simulate_frames(PC, MARGINALS, params, 30_000)
        assert np.array_equal(a.frames, b.frames)
        assert np.array_equal(a.regions, b.regions)
        assert np.array_equal(a.bins, b.bins)
        c = simulate_frames(PC, MARGINALS, DetectionParams(**DEFAULTS, seed=34), 30_000)
        assert not (
            np.array_equal(a.frames, c.frames) and np.array_equal(a.bins, c.bins)
        )

    def test_occupancy_is_binary(self):
        params = DetectionParams(chi=0.02, eta=1.0, f_rep=80e6, t_exp=11e-6, seed=4)
        batch = simulate_frames(PC, MARGINALS, params, 2_000)
        codes = (
            batch.frames.astype(np.int64) << 17
            | batch.regions.astype(np.int64) << 16
            | batch.bins.astype(np.int64)
        )
        assert np.unique(codes).size == batch.n_events
        assert batch.occupancy(0).max() <= 1

    def test_saturation_warning(self):
        params = DetectionParams(chi=0.5, eta=1.0, f_rep=80e6, t_exp=11e-6, seed=5)
        with pytest.warns(RuntimeWarning, match="occupancy"):
            simulate_frames(PC, MARGINALS, params, 50)

    def test_dark_counts_fill_empty_frames(self):
        params = DetectionParams(chi=0.0, eta=1.0, f_rep=1.0, t_exp=1.0,
                                 dark_rate=0.05, seed=6)
        batch = simulate_frames(PC, MARGINALS, params, 50_000)
        per_region_rate = batch.n_events / (2 * batch.n_frames)
        assert per_region_rate == pytest.approx(0.05, rel=0.1)

    def test_marginals_must_normalize(self):
        params = DetectionParams(**DEFAULTS, seed=7)
        bad = (MARGINALS[0] * 1.2, MARGINALS[1])
        with pytest.raises(InconsistentMarginals):
            simulate_frames(PC, bad, params, 10)

    def test_marginals_must_cover_coincidence_rate(self):
        params = DetectionParams(**DEFAULTS, seed=8)
        step = GRID.step_nm
        hot = int(np.argmax(PC.values.sum(axis=1)))
        donor = (hot + 20) % GRID.n_bins
        shifted = MARGINALS[0].copy()
        moved = 0.9 * PC.values[hot, :].sum() * step
        shifted[hot] -= moved
        shifted[donor] += moved
        with pytest.raises(InconsistentMarginals):
            simulate_frames(PC, (shifted, MARGINALS[1]), params, 10)

    def test_marginal_length_checked(self):
        params = DetectionParams(**DEFAULTS, seed=9)
        with pytest.raises(InconsistentMarginals):
            simulate_frames(PC, (MARGINALS[0][:-1], MARGINALS[1]), params, 10)

    def test_requires_probability_map(self):
        params = DetectionParams(**DEFAULTS, seed=10)
        cov = covariance_map(simulate_frames(PC, MARGINALS, params, 1_000))
        with pytest.raises(ValueError):
            simulate_frames(cov, MARGINALS, params, 10)


class TestEstimators:
    def test_all_empty_frames_give_zero_maps(self):
        batch = empty_batch(n_frames=100)
        assert np.all(raw_coincidences(batch).values == 0.0)
        assert np.all(accidental_map(batch).values == 0.0)
        assert np.all(covariance_map(batch).values == 0.0)

    def test_single_frame_pair(self):
        with pytest.warns(RuntimeWarning, match="single frame"):
            batch = FrameBatch(
                n_frames=1,
                grid_plus=GRID,
                grid_minus=GRID,
                frames=np.array([0, 0], np.uint32),
                regions=np.array([0, 1], np.uint8),
                bins=np.array([10, 50], np.uint16),
            )
            raw = raw_coincidences(batch)
        expected = np.zeros((64, 64))
        expected[10, 50] = 1.0
        assert np.array_equal(raw.values, expected)

    def test_disjoint_frames_have_accidentals_but_no_raw(self):
        batch = FrameBatch(
            n_frames=2,
            grid_plus=GRID,
            grid_minus=GRID,
            frames=np.array([0, 1], np.uint32),
            regions=np.array([0, 1], np.uint8),
            bins=np.array([10, 50], np.uint16),
        )
        raw = raw_coincidences(batch)
        acc = accidental_map(batch)
        assert raw.values[10, 50] == 0.0
        assert acc.values[10, 50] == pytest.approx(1.0 / 4.0)

    def test_covariance_is_raw_minus_accidental(self):
        params = DetectionParams(**DEFAULTS, seed=12)
        batch = simulate_frames(PC, MARGINALS, params, 50_000)
        cov = covariance_map(batch)
        diff = raw_coincidences(batch).values - accidental_map(batch).values
        assert np.array_equal(cov.values, diff)
        assert cov.kind is MapKind.COVARIANCE

    def test_uncorrelated_covariance_consistent_with_zero(self):
        params = DetectionParams(chi=1.893939e-4, eta=0.6, f_rep=80e6, t_exp=11e-6,
                                 seed=20260808)
        batch = simulate_uncorrelated_frames(GRID, GRID, MARGINALS, params, 200_000)
        cov_total = covariance_map(batch).values.sum()
        occ_p = np.bincount(batch.frames[batch.regions == 0], minlength=batch.n_frames)
        occ_m = np.bincount(batch.frames[batch.regions == 1], minlength=batch.n_frames)
        se = np.sqrt(occ_p.var() * occ_m.var() / batch.n_frames)
        assert abs(cov_total) < 5.0 * se

    def test_accidental_level_matches_closed_form(self):
        # With R repetitions per frame the accidental map approaches
        # (R*chi*eta)^2 * outer(per-bin landing probabilities); the total is
        # (R*chi*eta)^2 up to binary-pixel saturation losses.
        params = DetectionParams(**DEFAULTS, seed=31)
        batch = simulate_frames(PC, MARGINALS, params, 400_000)
        acc = accidental_map(batch)
        rate = params.repetitions * params.chi * params.eta
        assert acc.values.sum() == pytest.approx(rate**2, rel=0.1)
        expected_shape = np.outer(MARGINALS[0], MARGINALS[1])
        corr = np.corrcoef(acc.values.ravel(), expected_shape.ravel())[0, 1]
        assert corr > 0.95

    def test_covariance_tracks_theory_map_at_scale(self):
        # Self-consistency at production statistics: the covariance estimate
        # from ten million frames correlates strongly with the generating
        # map (Pearson 0.95 measured on this seed; 0.9 asserted).
        grid = WavelengthGrid.from_edges(790e-9, 803e-9, 140)
        jsa = gaussian_jsa(796.7e-9, 10e-9, -0.9, grid)
        pc = coincidence_probability_cosine(jsa, DispersionModel(od=2.6e3, tau=TAU))
        params = DetectionParams(**DEFAULTS, seed=1234)
        batch = simulate_frames(pc, port_spectra(jsa), params, 10_000_000)
        cov = covariance_map(batch)
        pearson = np.corrcoef(cov.values.ravel(), pc.values.ravel())[0, 1]
        assert pearson >= 0.9

    def test_accidental_fraction_shrinks_linearly_with_chi(self):
        ratios = []
        for chi in (4.5455e-4, 4.5455e-5):
            params = DetectionParams(chi=chi, eta=0.25, f_rep=80e6, t_exp=11e-6, seed=99)
            batch = simulate_frames(PC, MARGINALS, params, 300_000)
            acc = accidental_map(batch).values.sum()
            cov = covariance_map(batch).values.sum()
            ratios.append(acc / cov)
        assert ratios[1] < ratios[0] / 3.0

    def test_empty_batch_raises(self):
        with pytest.raises(EmptyBatch):
            raw_coincidences(empty_batch(0))
        with pytest.raises(EmptyBatch):
            accidental_map(empty_batch(0))


class TestFrameBatchValidation:
    def test_bounds_checked(self):
        with pytest.raises(ValueError):
            FrameBatch(
                n_frames=1,
                grid_plus=GRID,
                grid_minus=GRID,
                frames=np.array([2], np.uint32),
                regions=np.array([0], np.uint8),
                bins=np.array([0], np.uint16),
            )
        with pytest.raises(ValueError):
            FrameBatch(
                n_frames=1,
                grid_plus=GRID,
                grid_minus=GRID,
                frames=np.array([0], np.uint32),
                regions=np.array([0], np.uint8),
                bins=np.array([64], np.uint16),
            )
