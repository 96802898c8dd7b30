"""Per-cough feature extraction.

Each cough is framed into non-overlapping frames; per frame we compute a
static spectral descriptor (MFCCs or linearly spaced log-filterbank
energies) plus zero-crossing rate and kurtosis on the raw time-domain
frame. Velocity and acceleration of the static part are appended, the
frames are grouped into contiguous sections, section means are
concatenated, and the result is one fixed-dimension vector per cough.

Mean removal of the static MFCCs (cepstral mean normalization) is done
per recording: the mean over all frames of all coughs in a recording is
subtracted from each coefficient. A segment processed on its own is
treated as a one-cough recording.
"""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path

import numpy as np

from . import dsp
from .corpus import CoughSegment
from .errors import ConfigError, DataError, DegenerateFrameError, NumericError

logger = logging.getLogger(__name__)

MFCC_KIND = "mfcc"
FILTERBANK_KIND = "log_filterbank"

FRAME_LENGTH_CHOICES = (256, 512, 1024, 2048, 4096)
SECTION_CHOICES = (1, 2, 3, 4)
N_MFCC_CHOICES = (13, 26, 39)
N_FILTER_CHOICES = tuple(range(40, 201, 20))

MIN_MEL_FILTERS = 26  # mel bank size is max(n_mfcc, this); the DCT cannot keep more coefficients than filters


@dataclass(frozen=True)
class FeatureConfig:
    feature_kind: str = MFCC_KIND
    n_mfcc: int = 13
    n_filters: int = 60
    frame_length: int = 2048
    n_sections: int = 1
    include_deltas: bool = True
    delta_window: int = 2
    window: str = "hamming"  # "hamming" | "rectangular"
    free_mode: bool = False  # True lifts the hyperparameter-grid range checks

    def __post_init__(self) -> None:
        if self.feature_kind not in (MFCC_KIND, FILTERBANK_KIND):
            raise ConfigError(f"unknown feature_kind {self.feature_kind!r}")
        if self.window not in ("hamming", "rectangular"):
            raise ConfigError(f"unknown window {self.window!r}")
        if self.delta_window < 1:
            raise ConfigError("delta_window must be >= 1")
        if self.free_mode:
            if self.frame_length < 2 or self.n_sections < 1:
                raise ConfigError("frame_length must be >= 2 and n_sections >= 1")
            return
        if self.frame_length not in FRAME_LENGTH_CHOICES:
            raise ConfigError(
                f"frame_length {self.frame_length} outside the grid {FRAME_LENGTH_CHOICES}; "
                "set free_mode=True to allow it"
            )
        if self.n_sections not in SECTION_CHOICES:
            raise ConfigError(f"n_sections {self.n_sections} outside the grid {SECTION_CHOICES}")
        if self.feature_kind == MFCC_KIND and self.n_mfcc not in N_MFCC_CHOICES:
            raise ConfigError(f"n_mfcc {self.n_mfcc} outside the grid {N_MFCC_CHOICES}")
        if self.feature_kind == FILTERBANK_KIND and self.n_filters not in N_FILTER_CHOICES:
            raise ConfigError(f"n_filters {self.n_filters} outside the grid {N_FILTER_CHOICES}")

    @property
    def n_static(self) -> int:
        return self.n_mfcc if self.feature_kind == MFCC_KIND else self.n_filters

    @property
    def frame_dimension(self) -> int:
        """Features per frame: static (+ deltas) + zcr + kurtosis."""
        mult = 3 if self.include_deltas else 1
        return mult * self.n_static + 2

    @property
    def dimension(self) -> int:
        """Assembled per-cough dimension across all sections."""
        return self.n_sections * self.frame_dimension

    def feature_names(self, per_frame: bool = False) -> tuple[str, ...]:
        tag = "mfcc" if self.feature_kind == MFCC_KIND else "fbank"
        base: list[str] = [f"{tag}{k:02d}" for k in range(self.n_static)]
        if self.include_deltas:
            base += [f"d_{tag}{k:02d}" for k in range(self.n_static)]
            base += [f"dd_{tag}{k:02d}" for k in range(self.n_static)]
        base += ["zcr", "kurtosis"]
        if per_frame:
            return tuple(base)
        return tuple(f"s{s + 1}_{name}" for s in range(self.n_sections) for name in base)


@dataclass(frozen=True)
class FeatureVector:
    values: np.ndarray = field(repr=False)
    names: tuple[str, ...] = field(repr=False)
    config: FeatureConfig = field(default_factory=FeatureConfig)


@lru_cache(maxsize=32)
def _bank(kind: str, n_filters: int, frame_length: int, sample_rate: int) -> dsp.FilterBank:
    return dsp.build_filterbank(kind, n_filters, frame_length, sample_rate)


@lru_cache(maxsize=8)
def _window(name: str, length: int) -> np.ndarray:
    w = dsp.hamming_window(length) if name == "hamming" else np.ones(length)
    w.flags.writeable = False
    return w


def _frames_for(segment: CoughSegment, config: FeatureConfig) -> np.ndarray:
    """Frame a segment, zero-padding so at least n_sections frames exist."""
    x = np.asarray(segment.samples, dtype=np.float64)
    needed = config.n_sections * config.frame_length
    if 0 < len(x) < needed and len(x) // config.frame_length < config.n_sections:
        padded = np.zeros(needed)
        padded[: len(x)] = x
        logger.warning(
            "segment %s/%.3fs yields fewer than %d frames; zero-padding",
            segment.recording_id,
            segment.duration_s,
            config.n_sections,
        )
        x = padded
    return dsp.frame_signal(x, config.frame_length)


def _log_energies(frames: np.ndarray, config: FeatureConfig, sample_rate: int, kind: str, n_filters: int) -> np.ndarray:
    bank = _bank(kind, n_filters, config.frame_length, sample_rate)
    windowed = frames * _window(config.window, config.frame_length)
    spectra = np.abs(np.fft.rfft(windowed, axis=1)) ** 2 / config.frame_length
    return np.log(np.maximum(bank.apply(spectra), dsp.LOG_FLOOR))


def _raw_mfcc(frames: np.ndarray, config: FeatureConfig, sample_rate: int) -> np.ndarray:
    n_mel = max(config.n_mfcc, MIN_MEL_FILTERS)
    log_e = _log_energies(frames, config, sample_rate, "mel", n_mel)
    return dsp.dct_ii(log_e, config.n_mfcc)


def mfcc_frames(segment: CoughSegment, config: FeatureConfig, subtract_mean: bool = True) -> np.ndarray:
    """Per-frame MFCC matrix (n_frames, n_mfcc).

    Pipeline per frame: window, power spectrum, mel filterbank of
    max(n_mfcc, 26) filters, log, orthonormal DCT-II keeping n_mfcc
    coefficients. With `subtract_mean` the long-term (per-segment) mean of
    each coefficient is removed; the corpus pipeline disables this and
    applies per-recording normalization instead.
    """
    if len(segment.samples) == 0:
        raise DataError("cannot extract features from an empty segment")
    frames = dsp.frame_signal(segment.samples, config.frame_length)
    coeffs = _raw_mfcc(frames, config, segment.sample_rate_hz)
    if subtract_mean:
        coeffs = coeffs - coeffs.mean(axis=0)
    return coeffs


def log_filterbank_frames(segment: CoughSegment, config: FeatureConfig) -> np.ndarray:
    """Per-frame log energies (n_frames, n_filters) from the linear bank."""
    if len(segment.samples) == 0:
        raise DataError("cannot extract features from an empty segment")
    frames = dsp.frame_signal(segment.samples, config.frame_length)
    return _log_energies(frames, config, segment.sample_rate_hz, "linear", config.n_filters)


def deltas(matrix: np.ndarray, window: int = 2) -> tuple[np.ndarray, np.ndarray]:
    """Velocity and acceleration of a per-frame matrix.

    d_t = sum_{n=1..N} n (c_{t+n} - c_{t-n}) / (2 sum n^2), with edge frames
    replicated for padding; acceleration is the same operator applied to
    the velocities.
    """
    d = _delta_pass(np.asarray(matrix, dtype=np.float64), window)
    return d, _delta_pass(d, window)


def _delta_pass(matrix: np.ndarray, window: int) -> np.ndarray:
    if matrix.ndim != 2:
        raise NumericError(f"expected a 2-D frame matrix, got shape {matrix.shape}")
    padded = np.pad(matrix, ((window, window), (0, 0)), mode="edge")
    denom = 2.0 * sum(n * n for n in range(1, window + 1))
    out = np.zeros_like(matrix)
    t0 = window
    for n in range(1, window + 1):
        out += n * (padded[t0 + n : t0 + n + len(matrix)] - padded[t0 - n : t0 - n + len(matrix)])
    return out / denom


def zcr(frame: np.ndarray) -> float:
    """Zero-crossing rate: fraction of adjacent sample pairs with strictly
    opposite sign. A zero sample never counts as a crossing."""
    x = np.asarray(frame, dtype=np.float64)
    if len(x) < 2:
        raise NumericError(f"zcr needs at least 2 samples, got {len(x)}")
    return float(np.mean(x[1:] * x[:-1] < 0.0))


def kurtosis(frame: np.ndarray) -> float:
    """Sample kurtosis (non-excess): mean(((x - mu)/sigma)^4).

    Raises DegenerateFrameError on zero-variance frames.
    """
    x = np.asarray(frame, dtype=np.float64)
    mu = x.mean()
    m2 = np.mean((x - mu) ** 2)
    if m2 == 0.0:
        raise DegenerateFrameError("kurtosis is undefined for a zero-variance frame")
    return float(np.mean((x - mu) ** 4) / m2**2)


def _frame_stats(frames: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Per-frame (zcr, kurtosis); zero-variance frames contribute 0 so the
    assembled vector stays finite on padded/silent frames."""
    zcrs = np.mean(frames[:, 1:] * frames[:, :-1] < 0.0, axis=1)
    mu = frames.mean(axis=1, keepdims=True)
    centered = frames - mu
    m2 = np.mean(centered**2, axis=1)
    m4 = np.mean(centered**4, axis=1)
    kurt = np.divide(m4, m2**2, out=np.zeros_like(m4), where=m2 > 0.0)
    return zcrs, kurt


def section_slices(n_frames: int, n_sections: int) -> list[slice]:
    """Contiguous equal-count frame groups; the remainder goes to the
    earliest sections."""
    base, rem = divmod(n_frames, n_sections)
    sizes = [base + (1 if s < rem else 0) for s in range(n_sections)]
    slices, start = [], 0
    for size in sizes:
        slices.append(slice(start, start + size))
        start += size
    return slices


def _per_frame_matrix(static: np.ndarray, frames: np.ndarray, config: FeatureConfig) -> np.ndarray:
    """Stack [static | delta | delta-delta | zcr | kurtosis] per frame."""
    parts = [static]
    if config.include_deltas:
        d, dd = deltas(static, config.delta_window)
        parts += [d, dd]
    zcrs, kurt = _frame_stats(frames)
    parts += [zcrs[:, np.newaxis], kurt[:, np.newaxis]]
    return np.hstack(parts)


def _assemble_sections(per_frame: np.ndarray, config: FeatureConfig) -> np.ndarray:
    groups = [per_frame[sl].mean(axis=0) for sl in section_slices(len(per_frame), config.n_sections)]
    return np.concatenate(groups)


def assemble(segment: CoughSegment, config: FeatureConfig, cepstral_mean: np.ndarray | None = None) -> FeatureVector:
    """One fixed-dimension feature vector for a cough.

    `cepstral_mean`, when given, is the per-recording static-coefficient
    mean to subtract (MFCC kind only); otherwise the segment's own mean is
    used.
    """
    if len(segment.samples) == 0:
        raise DataError("cannot extract features from an empty segment")
    frames = _frames_for(segment, config)
    if config.feature_kind == MFCC_KIND:
        static = _raw_mfcc(frames, config, segment.sample_rate_hz)
        static = static - (static.mean(axis=0) if cepstral_mean is None else cepstral_mean)
    else:
        static = _log_energies(frames, config, segment.sample_rate_hz, "linear", config.n_filters)
    values = _assemble_sections(_per_frame_matrix(static, frames, config), config)
    names = config.feature_names()
    assert len(values) == config.dimension
    return FeatureVector(values=values, names=names, config=config)


def cepstral_mean_normalize(matrices_by_recording: dict[str, list[np.ndarray]]) -> dict[str, list[np.ndarray]]:
    """Subtract, per recording and per coefficient, the mean over all frames
    of all coughs in that recording."""
    out: dict[str, list[np.ndarray]] = {}
    for rec_id, matrices in matrices_by_recording.items():
        mean = np.concatenate(matrices, axis=0).mean(axis=0)
        out[rec_id] = [m - mean for m in matrices]
    return out


@dataclass
class FeatureTable:
    """Per-cough (or per-frame) feature rows plus their identities.

    In per-cough mode each row is one cough and `frame_counts` holds the
    cough's frame count; in per-frame mode each row is one frame (same
    cough_id repeated, frame_count 1).
    """

    patient_ids: np.ndarray  # dtype=object, str entries
    cough_ids: np.ndarray
    labels: np.ndarray
    frame_counts: np.ndarray
    X: np.ndarray
    names: tuple[str, ...]

    def __len__(self) -> int:
        return len(self.labels)

    @property
    def dimension(self) -> int:
        return self.X.shape[1]

    def patients(self) -> list[str]:
        seen: dict[str, None] = {}
        for pid in self.patient_ids:
            seen.setdefault(pid, None)
        return list(seen)

    def patient_labels(self) -> dict[str, int]:
        out: dict[str, int] = {}
        for pid, lbl in zip(self.patient_ids, self.labels):
            prev = out.setdefault(pid, int(lbl))
            if prev != int(lbl):
                raise DataError(f"patient {pid!r} appears with both labels")
        return out

    def with_columns(self, indices: list[int] | np.ndarray) -> "FeatureTable":
        idx = np.asarray(indices, dtype=int)
        return FeatureTable(
            patient_ids=self.patient_ids,
            cough_ids=self.cough_ids,
            labels=self.labels,
            frame_counts=self.frame_counts,
            X=self.X[:, idx],
            names=tuple(self.names[i] for i in idx),
        )

    def to_csv(self, path: Path | str) -> None:
        path = Path(path)
        with path.open("w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["patient_id", "cough_id", "label", "frame_count", *self.names])
            for i in range(len(self)):
                writer.writerow(
                    [
                        self.patient_ids[i],
                        self.cough_ids[i],
                        int(self.labels[i]),
                        int(self.frame_counts[i]),
                        *[repr(float(v)) for v in self.X[i]],
                    ]
                )

    @classmethod
    def from_csv(cls, path: Path | str) -> "FeatureTable":
        path = Path(path)
        if not path.is_file():
            raise DataError(f"features file not found: {path}")
        with path.open(newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader, None)
            if header is None or header[:4] != ["patient_id", "cough_id", "label", "frame_count"]:
                raise DataError(f"{path}: not a feature table (unexpected header)")
            names = tuple(header[4:])
            pids, cids, labels, counts, rows = [], [], [], [], []
            for lineno, row in enumerate(reader, start=2):
                if not row:
                    continue
                if len(row) != 4 + len(names):
                    raise DataError(f"{path}:{lineno}: expected {4 + len(names)} columns, got {len(row)}")
                pids.append(row[0])
                cids.append(row[1])
                try:
                    labels.append(int(row[2]))
                    counts.append(int(row[3]))
                    rows.append([float(v) for v in row[4:]])
                except ValueError:
                    raise DataError(f"{path}:{lineno}: unparseable numeric value") from None
        if not rows:
            raise DataError(f"{path}: feature table is empty")
        return cls(
            patient_ids=np.array(pids, dtype=object),
            cough_ids=np.array(cids, dtype=object),
            labels=np.array(labels, dtype=int),
            frame_counts=np.array(counts, dtype=int),
            X=np.array(rows, dtype=np.float64),
            names=names,
        )


def extract_table(segments: list[CoughSegment], config: FeatureConfig, per_frame: bool = False) -> FeatureTable:
    """Extract features for a whole corpus with per-recording mean removal.

    Rows follow the input segment order. Cough ids are
    ``<recording_id>#c<k>`` with k counting coughs within the recording.
    In per-frame mode every frame becomes a row carrying its cough's id
    and the sectioning/averaging step is skipped.
    """
    if not segments:
        raise DataError("no segments to extract features from")

    frames_per_seg: list[np.ndarray] = []
    static_per_seg: list[np.ndarray] = []
    for seg in segments:
        if len(seg.samples) == 0:
            raise DataError(f"empty segment {seg.recording_id} at {seg.start_s:.3f}s")
        frames = _frames_for(seg, config)
        frames_per_seg.append(frames)
        if config.feature_kind == MFCC_KIND:
            static_per_seg.append(_raw_mfcc(frames, config, seg.sample_rate_hz))
        else:
            static_per_seg.append(_log_energies(frames, config, seg.sample_rate_hz, "linear", config.n_filters))

    if config.feature_kind == MFCC_KIND:
        grouped: dict[str, list[int]] = {}
        for i, seg in enumerate(segments):
            grouped.setdefault(seg.recording_id, []).append(i)
        for indices in grouped.values():
            mean = np.concatenate([static_per_seg[i] for i in indices], axis=0).mean(axis=0)
            for i in indices:
                static_per_seg[i] = static_per_seg[i] - mean

    cough_counters: dict[str, int] = {}
    pids, cids, labels, counts, rows = [], [], [], [], []
    for seg, frames, static in zip(segments, frames_per_seg, static_per_seg):
        k = cough_counters.get(seg.recording_id, 0)
        cough_counters[seg.recording_id] = k + 1
        cough_id = f"{seg.recording_id}#c{k:03d}"
        per_frame_matrix = _per_frame_matrix(static, frames, config)
        if per_frame:
            for row in per_frame_matrix:
                pids.append(seg.patient_id)
                cids.append(cough_id)
                labels.append(seg.tb_label)
                counts.append(1)
                rows.append(row)
        else:
            pids.append(seg.patient_id)
            cids.append(cough_id)
            labels.append(seg.tb_label)
            counts.append(len(frames))
            rows.append(_assemble_sections(per_frame_matrix, config))

    return FeatureTable(
        patient_ids=np.array(pids, dtype=object),
        cough_ids=np.array(cids, dtype=object),
        labels=np.array(labels, dtype=int),
        frame_counts=np.array(counts, dtype=int),
        X=np.array(rows, dtype=np.float64),
        names=config.feature_names(per_frame=per_frame),
    )
