import numpy as np
import pytest

from tbscreen import features as F
from tbscreen.errors import ConfigError, DataError, DegenerateFrameError, NumericError

from tests.conftest import make_segment

RNG = np.random.default_rng(12)
NOISE = RNG.normal(0.0, 0.2, 32634)  # 0.74 s at 44.1 kHz


class TestFeatureConfig:
    def test_dimension_formula(self):
        assert F.FeatureConfig(n_mfcc=13, n_sections=4).dimension == 164  # 4 * (3*13 + 2)
        assert F.FeatureConfig(n_mfcc=26, n_sections=1).dimension == 80
        assert F.FeatureConfig(n_mfcc=13, n_sections=1, include_deltas=False).dimension == 15
        fb = F.FeatureConfig(feature_kind="log_filterbank", n_filters=60, n_sections=2)
        assert fb.dimension == 2 * (3 * 60 + 2)

    def test_grid_ranges_enforced(self):
        with pytest.raises(ConfigError):
            F.FeatureConfig(frame_length=1000)
        with pytest.raises(ConfigError):
            F.FeatureConfig(n_mfcc=20)
        with pytest.raises(ConfigError):
            F.FeatureConfig(feature_kind="log_filterbank", n_filters=55)
        with pytest.raises(ConfigError):
            F.FeatureConfig(n_sections=5)

    def test_free_mode_lifts_ranges(self):
        cfg = F.FeatureConfig(frame_length=512, n_mfcc=13, free_mode=True)
        assert cfg.frame_length == 512
        assert F.FeatureConfig(n_mfcc=20, free_mode=True).n_mfcc == 20

    def test_names_unique(self):
        cfg = F.FeatureConfig(n_mfcc=13, n_sections=4)
        names = cfg.feature_names()
        assert len(names) == len(set(names)) == 164


class TestMfccFrames:
    def test_long_term_mean_removed(self):
        cfg = F.FeatureConfig(n_mfcc=13)
        mat = F.mfcc_frames(make_segment(NOISE), cfg)
        assert np.max(np.abs(mat.mean(axis=0))) < 1e-9

    def test_frame_count_and_width(self):
        cfg = F.FeatureConfig(n_mfcc=13, frame_length=2048)
        assert F.mfcc_frames(make_segment(NOISE), cfg).shape == (15, 13)

    def test_tones_distinguishable(self):
        t = np.arange(32768) / 44100
        cfg = F.FeatureConfig(n_mfcc=13)
        m1 = F.mfcc_frames(make_segment(np.sin(2 * np.pi * 1000 * t)), cfg, subtract_mean=False)
        m4 = F.mfcc_frames(make_segment(np.sin(2 * np.pi * 4000 * t)), cfg, subtract_mean=False)
        assert np.linalg.norm(m1.mean(axis=0) - m4.mean(axis=0)) > 0.1

    def test_empty_segment(self):
        with pytest.raises(DataError):
            F.mfcc_frames(make_segment(np.zeros(0)), F.FeatureConfig())

    def test_rectangular_window_option(self):
        seg = make_segment(NOISE)
        hamming = F.mfcc_frames(seg, F.FeatureConfig(window="hamming"), subtract_mean=False)
        rect = F.mfcc_frames(seg, F.FeatureConfig(window="rectangular"), subtract_mean=False)
        assert hamming.shape == rect.shape
        assert np.abs(hamming - rect).max() > 1e-6  # windows genuinely differ


class TestLogFilterbankFrames:
    def test_zero_frame_hits_log_floor(self):
        cfg = F.FeatureConfig(feature_kind="log_filterbank", n_filters=40)
        mat = F.log_filterbank_frames(make_segment(np.zeros(2048)), cfg)
        np.testing.assert_allclose(mat, np.log(1e-10))

    def test_sixty_energies_per_frame(self):
        cfg = F.FeatureConfig(feature_kind="log_filterbank", n_filters=60)
        assert F.log_filterbank_frames(make_segment(NOISE), cfg).shape == (15, 60)

    def test_doubling_amplitude_adds_log4(self):
        cfg = F.FeatureConfig(feature_kind="log_filterbank", n_filters=60)
        e1 = F.log_filterbank_frames(make_segment(NOISE), cfg)
        e2 = F.log_filterbank_frames(make_segment(2.0 * NOISE), cfg)
        np.testing.assert_allclose(e2 - e1, np.log(4.0), atol=1e-9)


class TestDeltas:
    def test_constant_sequence(self):
        d, dd = F.deltas(np.full((8, 3), 2.5))
        assert not d.any() and not dd.any()

    def test_linear_ramp_interior(self):
        # d_t = (1*2 + 2*4) / (2 * (1 + 4)) = 1 on the interior of a ramp
        d, _ = F.deltas(np.arange(10.0)[:, None])
        np.testing.assert_allclose(d[2:-2], 1.0)

    def test_single_frame_zero_by_edge_replication(self):
        d, dd = F.deltas(np.array([[7.0, -1.0]]))
        assert not d.any() and not dd.any()

    def test_time_reversal_negates(self):
        m = RNG.normal(size=(12, 4))
        d_fwd, _ = F.deltas(m)
        d_rev, _ = F.deltas(m[::-1])
        np.testing.assert_allclose(d_rev[2:-2], -d_fwd[::-1][2:-2], atol=1e-12)


class TestZcr:
    def test_constant_frame(self):
        assert F.zcr(np.ones(50)) == 0.0

    def test_alternating_frame(self):
        assert F.zcr(np.tile([1.0, -1.0], 512)) == 1.0

    def test_zero_samples_not_crossings(self):
        assert F.zcr(np.array([1.0, 0.0, 1.0, 0.0, 1.0])) == 0.0

    def test_sine_crossing_rate(self):
        t = np.arange(2048) / 44100
        got = F.zcr(np.sin(2 * np.pi * 1000 * t))
        expected = 2 * 1000 * (2048 / 44100) / 2047
        assert got == pytest.approx(expected, abs=1e-3)

    def test_scale_invariance(self):
        x = RNG.normal(size=512)
        assert F.zcr(x) == F.zcr(17.3 * x)

    def test_too_short(self):
        with pytest.raises(NumericError):
            F.zcr(np.array([1.0]))


class TestKurtosis:
    def test_uniform(self):
        x = RNG.uniform(-1, 1, 100_000)
        assert F.kurtosis(x) == pytest.approx(1.8, abs=0.1)

    def test_gaussian(self):
        x = RNG.normal(size=100_000)
        assert F.kurtosis(x) == pytest.approx(3.0, abs=0.15)

    def test_constant_frame_degenerate(self):
        with pytest.raises(DegenerateFrameError):
            F.kurtosis(np.full(100, 3.0))

    def test_scale_invariance(self):
        x = RNG.normal(size=4096)
        assert abs(F.kurtosis(x) - F.kurtosis(0.001 * x)) < 1e-9


class TestAssemble:
    def test_dimensions(self):
        for m, s in [(13, 4), (26, 1), (39, 2)]:
            cfg = F.FeatureConfig(n_mfcc=m, n_sections=s)
            vec = F.assemble(make_segment(NOISE), cfg)
            assert len(vec.values) == cfg.dimension == s * (3 * m + 2)
            assert np.all(np.isfinite(vec.values))

    def test_single_section_equals_global_mean(self):
        cfg = F.FeatureConfig(n_mfcc=13, n_sections=1)
        seg = make_segment(NOISE)
        vec = F.assemble(seg, cfg)
        frames = F._frames_for(seg, cfg)
        static = F._raw_mfcc(frames, cfg, 44100)
        static = static - static.mean(axis=0)
        per_frame = F._per_frame_matrix(static, frames, cfg)
        np.testing.assert_allclose(vec.values, per_frame.mean(axis=0), atol=1e-12)

    def test_two_sections_differ_on_tone_then_noise(self):
        t = np.arange(22050) / 44100
        half1 = np.sin(2 * np.pi * 800 * t)
        half2 = RNG.normal(0, 1e-3, 22050)
        vec = F.assemble(make_segment(np.concatenate([half1, half2])), F.FeatureConfig(n_mfcc=13, n_sections=2))
        d = len(vec.values) // 2
        assert np.linalg.norm(vec.values[:d] - vec.values[d:]) > 0.1

    def test_short_segment_padded_to_sections(self):
        cfg = F.FeatureConfig(n_mfcc=13, n_sections=4)
        vec = F.assemble(make_segment(NOISE[:3000]), cfg)  # yields < 4 natural frames
        assert len(vec.values) == cfg.dimension
        assert np.all(np.isfinite(vec.values))

    def test_empty_segment(self):
        with pytest.raises(DataError):
            F.assemble(make_segment(np.zeros(0)), F.FeatureConfig())


class TestCmn:
    def test_single_cough_recording_zero_mean(self):
        mats = {"r0": [RNG.normal(size=(9, 13))]}
        out = F.cepstral_mean_normalize(mats)
        assert np.max(np.abs(out["r0"][0].mean(axis=0))) < 1e-12

    def test_constant_offset_invariance(self):
        base = [RNG.normal(size=(7, 13)), RNG.normal(size=(11, 13))]
        offset = np.zeros(13)
        offset[4] = 3.7  # constant shift on one coefficient across the recording
        shifted = [m + offset for m in base]
        out_a = F.cepstral_mean_normalize({"r": base})["r"]
        out_b = F.cepstral_mean_normalize({"r": shifted})["r"]
        for a, b in zip(out_a, out_b):
            np.testing.assert_allclose(a, b, atol=1e-12)

    def test_channel_gain_pair_metamorphic(self):
        # The same coughs recorded through channels with different constant
        # gains differ only in the c0 offset, which per-recording CMN removes.
        cfg = F.FeatureConfig(n_mfcc=13, frame_length=2048, n_sections=1)
        segs_a = [
            make_segment(NOISE[:20000], pid="pA", rec="rA"),
            make_segment(NOISE[6000:30000], pid="pA", rec="rA"),
        ]
        segs_b = [
            make_segment(NOISE[:20000] * 4.0, pid="pA", rec="rB"),
            make_segment(NOISE[6000:30000] * 4.0, pid="pA", rec="rB"),
        ]
        ta = F.extract_table(segs_a, cfg)
        tb = F.extract_table(segs_b, cfg)
        np.testing.assert_allclose(ta.X[:, :39], tb.X[:, :39], atol=1e-6)  # static + deltas


class TestExtractTable:
    def test_row_identities(self, small_table, small_corpus):
        _, _, segments, _ = small_corpus
        assert len(small_table) == len(segments)
        assert small_table.dimension == 41
        assert small_table.frame_counts.min() >= 1
        assert len(set(small_table.cough_ids)) == len(segments)

    def test_per_frame_mode(self):
        cfg = F.FeatureConfig(n_mfcc=13, frame_length=2048, n_sections=1)
        segs = [make_segment(NOISE, pid="pA", rec="rA"), make_segment(NOISE[:10000], pid="pA", rec="rA")]
        table = F.extract_table(segs, cfg, per_frame=True)
        assert table.dimension == 3 * 13 + 2
        assert np.all(table.frame_counts == 1)
        assert len(table) == 15 + 4  # frames of each cough
        assert len(set(table.cough_ids)) == 2

    def test_csv_round_trip(self, small_table, tmp_path):
        path = tmp_path / "f.csv"
        small_table.to_csv(path)
        back = F.FeatureTable.from_csv(path)
        assert back.names == small_table.names
        np.testing.assert_array_equal(back.X, small_table.X)
        assert list(back.patient_ids) == list(small_table.patient_ids)
        assert list(back.frame_counts) == list(small_table.frame_counts)

    def test_rejects_empty(self):
        with pytest.raises(DataError):
            F.extract_table([], F.FeatureConfig())
