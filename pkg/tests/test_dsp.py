import numpy as np
import pytest

from tbscreen import dsp
from tbscreen.errors import NumericError


class TestFrameSignal:
    def test_ten_samples_frame_four(self):
        frames = dsp.frame_signal(np.arange(10.0), 4)
        assert frames.shape == (2, 4)
        assert list(dsp.frame_start_indices(10, 4)) == [0, 4]
        np.testing.assert_array_equal(frames[0], [0, 1, 2, 3])
        np.testing.assert_array_equal(frames[1], [4, 5, 6, 7])

    def test_short_signal_zero_padded(self):
        frames = dsp.frame_signal(np.array([1.0, 2.0, 3.0]), 4)
        np.testing.assert_array_equal(frames, [[1.0, 2.0, 3.0, 0.0]])

    def test_074s_cough_at_2048(self):
        # 0.74 s at 44100 Hz is 32634 samples -> floor(32634/2048) = 15 frames
        n = round(0.74 * 44100)
        assert dsp.frame_signal(np.zeros(n), 2048).shape[0] == n // 2048 == 15

    def test_frames_tile_signal_prefix(self):
        rng = np.random.default_rng(0)
        x = rng.normal(size=1000)
        frames = dsp.frame_signal(x, 64)
        np.testing.assert_array_equal(np.concatenate(frames), x[: 64 * len(frames)])

    def test_bad_frame_length(self):
        with pytest.raises(NumericError):
            dsp.frame_signal(np.zeros(8), 0)


class TestPowerSpectrum:
    def test_zero_frame(self):
        np.testing.assert_array_equal(dsp.power_spectrum(np.zeros(16)), np.zeros(9))

    def test_unit_impulse(self):
        # |X(k)| = 1 for all k, so every bin is 1/N
        spec = dsp.power_spectrum(np.eye(8)[0])
        np.testing.assert_allclose(spec, np.full(5, 1.0 / 8.0))

    def test_aligned_sine_leakage(self):
        n = 64
        x = np.sin(2 * np.pi * 4 * np.arange(n) / n)
        spec = dsp.power_spectrum(x)
        assert spec[4] > 1.0
        assert np.delete(spec, 4).max() <= 1e-10

    def test_parseval(self):
        rng = np.random.default_rng(1)
        for n in (16, 64, 256, 2048):
            x = rng.normal(size=n)
            assert abs(dsp.spectrum_energy(dsp.power_spectrum(x)) - np.mean(x**2)) < 1e-9

    def test_non_power_of_two_rejected(self):
        with pytest.raises(NumericError):
            dsp.power_spectrum(np.zeros(100))


class TestMel:
    def test_zero(self):
        assert dsp.mel(0.0) == 0.0

    def test_700hz_closed_form(self):
        assert dsp.mel(700.0) == pytest.approx(2595.0 * np.log10(2.0), abs=1e-12)

    def test_round_trip(self):
        rng = np.random.default_rng(2)
        f = rng.uniform(1.0, 22049.0, 50)
        back = dsp.mel_inverse(dsp.mel(f))
        assert np.max(np.abs(back - f) / f) < 1e-6

    def test_monotone(self):
        f = np.linspace(0, 22050, 500)
        assert np.all(np.diff(dsp.mel(f)) > 0)

    def test_negative_frequency(self):
        with pytest.raises(NumericError):
            dsp.mel(-1.0)


class TestFilterBank:
    def test_linear_40_filters(self):
        fb = dsp.build_filterbank("linear", 40, 2048, 44100)
        assert fb.weights.shape == (40, 1025)
        assert all(np.count_nonzero(row) >= 1 for row in fb.weights)

    def test_rows_peak_at_one(self):
        for kind in ("linear", "mel"):
            fb = dsp.build_filterbank(kind, 40, 2048, 44100)
            np.testing.assert_array_equal(fb.weights.max(axis=1), np.ones(40))

    def test_mel_centers_warp(self):
        fb = dsp.build_filterbank("mel", 26, 2048, 44100)
        centers = fb.center_frequencies_hz
        assert np.all(np.diff(centers) > 0)
        assert np.all(np.diff(np.diff(centers)) > 0)  # spacing grows in Hz

    def test_triangle_sum_closed_form(self):
        # Dotting a row with an all-ones spectrum sums the triangle's bin
        # weights; by the arithmetic series this is (b2 - b0) / 2.
        fb = dsp.build_filterbank("linear", 40, 2048, 44100)
        bins = fb.edge_bins
        expected = (bins[2:] - bins[:-2]) / 2.0
        np.testing.assert_allclose(fb.apply(np.ones(1025)), expected, atol=1e-12)

    def test_no_weight_outside_edges(self):
        fb = dsp.build_filterbank("mel", 20, 1024, 44100)
        assert not fb.weights[:, : fb.edge_bins[0]].any()
        assert not fb.weights[:, fb.edge_bins[-1] + 1 :].any()

    def test_coarse_grid_edges_stay_distinct(self):
        # 26 mel filters at frame length 256: nominal low-frequency edges
        # collide on the coarse FFT grid and must be bumped apart
        fb = dsp.build_filterbank("mel", 26, 256, 44100)
        assert np.all(np.diff(fb.edge_bins) >= 1)
        np.testing.assert_array_equal(fb.weights.max(axis=1), np.ones(26))

    def test_too_many_filters_for_resolution(self):
        with pytest.raises(NumericError):
            dsp.build_filterbank("linear", 200, 256, 44100)

    def test_bad_kind(self):
        with pytest.raises(NumericError):
            dsp.build_filterbank("bark", 10, 1024, 44100)


class TestDct:
    def test_constant_input(self):
        out = dsp.dct_ii(np.full(12, 5.0), 12)
        assert abs(out[0]) > 1.0
        assert np.abs(out[1:]).max() < 1e-12

    def test_energy_preserved_full_length(self):
        rng = np.random.default_rng(3)
        x = rng.normal(size=26)
        out = dsp.dct_ii(x, 26)
        assert abs(np.sum(out**2) - np.sum(x**2)) < 1e-9

    def test_inverse_reconstructs(self):
        rng = np.random.default_rng(4)
        x = rng.normal(size=20)
        mat = dsp.dct_ii_matrix(20)
        assert np.max(np.abs(mat.T @ (mat @ x) - x)) < 1e-9

    def test_basis_vector_response(self):
        basis = dsp.dct_ii_matrix(16)[3]
        out = dsp.dct_ii(basis, 16)
        assert out[3] == pytest.approx(1.0, abs=1e-12)
        assert np.abs(np.delete(out, 3)).max() < 1e-12

    def test_keep_more_than_input_rejected(self):
        with pytest.raises(NumericError):
            dsp.dct_ii(np.zeros(5), 6)
