"""Corpus ingestion: manifests, annotations, audio segments, SNR, summaries.

File formats:
  - Manifest CSV with header ``patient_id,tb_label,recording_path,age,sex``;
    tb_label is 1 (TB) or 0 (non-TB); age and sex may be empty.
  - Annotation TSV with columns ``recording_id<TAB>start_s<TAB>end_s<TAB>label``;
    label "c" marks a cough span, "b" a breath, "s" speech.
  - Audio is RIFF/WAVE, linear PCM, mono, 16-bit, 44100 Hz by default.

A recording's id is its file stem (path without directory or extension).
"""

from __future__ import annotations

import csv
import math
import wave
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import DataError

DEFAULT_SAMPLE_RATE = 44100

COUGH_LABEL = "c"
BREATH_LABEL = "b"
SPEECH_LABEL = "s"


@dataclass
class PatientRecord:
    patient_id: str
    tb_label: int  # 1 = TB, 0 = non-TB
    recording_paths: list[Path]
    age: int | None = None
    sex: str | None = None


@dataclass
class Span:
    """One annotated time span within a recording."""

    recording_id: str
    start_s: float
    end_s: float
    label: str

    @property
    def duration_s(self) -> float:
        return self.end_s - self.start_s


@dataclass
class CoughSegment:
    """One annotated cough event sliced out of a recording."""

    patient_id: str
    recording_id: str
    start_s: float
    end_s: float
    samples: np.ndarray = field(repr=False)
    sample_rate_hz: int = DEFAULT_SAMPLE_RATE
    tb_label: int = 0

    @property
    def duration_s(self) -> float:
        return self.end_s - self.start_s


@dataclass
class ClassStats:
    n_patients: int
    n_coughs: int
    mean_coughs_per_patient: float
    mean_cough_length_s: float
    total_cough_length_s: float
    mean_snr_db: float | None = None
    sd_snr_db: float | None = None


@dataclass
class CorpusSummary:
    per_class: dict[int, ClassStats]
    total: ClassStats


def recording_id_for(path: Path | str) -> str:
    return Path(path).stem


def parse_manifest(path: Path | str) -> list[PatientRecord]:
    """Read a manifest CSV into one PatientRecord per patient.

    Rows sharing a patient_id are merged (recording paths unioned, order
    preserved) provided their labels agree; conflicting labels are an
    error. Paths are resolved relative to the manifest's directory.
    """
    path = Path(path)
    if not path.is_file():
        raise DataError(f"manifest not found: {path}")
    root = path.parent
    records: dict[str, PatientRecord] = {}
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header[:3]] != ["patient_id", "tb_label", "recording_path"]:
            raise DataError(f"{path}: expected header 'patient_id,tb_label,recording_path,age,sex'")
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not cell.strip() for cell in row):
                continue
            if len(row) < 3:
                raise DataError(f"{path}:{lineno}: expected at least 3 columns, got {len(row)}")
            pid = row[0].strip()
            if not pid:
                raise DataError(f"{path}:{lineno}: empty patient_id")
            label_text = row[1].strip()
            if label_text not in ("0", "1"):
                raise DataError(f"{path}:{lineno}: tb_label must be 0 or 1, got {label_text!r}")
            label = int(label_text)
            rec_path = root / row[2].strip()
            age = _parse_optional_int(row[3] if len(row) > 3 else "", path, lineno, "age")
            sex = row[4].strip() or None if len(row) > 4 else None

            if pid in records:
                rec = records[pid]
                if rec.tb_label != label:
                    raise DataError(f"{path}:{lineno}: conflicting tb_label for patient {pid!r}")
                if rec_path not in rec.recording_paths:
                    rec.recording_paths.append(rec_path)
                if rec.age is None:
                    rec.age = age
                if rec.sex is None:
                    rec.sex = sex
            else:
                records[pid] = PatientRecord(pid, label, [rec_path], age=age, sex=sex)
    if not records:
        raise DataError(f"{path}: manifest contains no patients")
    return list(records.values())


def _parse_optional_int(text: str, path: Path, lineno: int, name: str) -> int | None:
    text = text.strip()
    if not text:
        return None
    try:
        return int(text)
    except ValueError:
        raise DataError(f"{path}:{lineno}: {name} must be an integer, got {text!r}") from None


def parse_annotations(path: Path | str) -> list[Span]:
    """Read an annotation TSV; all labels are kept, sorted by recording then start.

    Use `cough_spans` to pull out the "c" rows only.
    """
    path = Path(path)
    if not path.is_file():
        raise DataError(f"annotation file not found: {path}")
    spans: list[Span] = []
    with path.open() as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line.strip() or line.startswith("#"):
                continue
            parts = line.split("\t")
            if len(parts) != 4:
                raise DataError(f"{path}:{lineno}: expected 4 tab-separated columns, got {len(parts)}")
            rec_id, start_text, end_text, label = (p.strip() for p in parts)
            try:
                start_s = float(start_text)
                end_s = float(end_text)
            except ValueError:
                raise DataError(f"{path}:{lineno}: unparseable time value") from None
            if start_s < 0 or end_s < 0:
                raise DataError(f"{path}:{lineno}: negative time")
            if start_s >= end_s:
                raise DataError(f"{path}:{lineno}: span start {start_s} is not before end {end_s}")
            spans.append(Span(rec_id, start_s, end_s, label))
    spans.sort(key=lambda s: (s.recording_id, s.start_s, s.end_s))
    return spans


def cough_spans(spans: list[Span]) -> list[Span]:
    return [s for s in spans if s.label == COUGH_LABEL]


def read_wav(path: Path | str, expected_rate: int | None = DEFAULT_SAMPLE_RATE) -> tuple[np.ndarray, int]:
    """Decode a mono 16-bit PCM WAV to float samples in [-1, 1].

    Integer amplitudes are scaled by 1 / 2^15. Raises DataError on channel
    count, sample width, or sample-rate mismatches.
    """
    path = Path(path)
    if not path.is_file():
        raise DataError(f"audio file not found: {path}")
    try:
        with wave.open(str(path), "rb") as wf:
            n_channels = wf.getnchannels()
            sampwidth = wf.getsampwidth()
            rate = wf.getframerate()
            n_frames = wf.getnframes()
            raw = wf.readframes(n_frames)
    except wave.Error as exc:
        raise DataError(f"{path}: unsupported audio encoding ({exc})") from exc
    if n_channels != 1:
        raise DataError(f"{path}: expected mono audio, got {n_channels} channels")
    if sampwidth != 2:
        raise DataError(f"{path}: expected 16-bit PCM, got {8 * sampwidth}-bit")
    if expected_rate is not None and rate != expected_rate:
        raise DataError(f"{path}: sample rate {rate} Hz, expected {expected_rate} Hz")
    samples = np.frombuffer(raw, dtype="<i2").astype(np.float64) / 32768.0
    return samples, rate


def write_wav(path: Path | str, samples: np.ndarray, sample_rate: int = DEFAULT_SAMPLE_RATE) -> None:
    """Write float samples in [-1, 1] as mono 16-bit PCM."""
    path = Path(path)
    clipped = np.clip(np.asarray(samples, dtype=np.float64), -1.0, 1.0)
    pcm = np.round(clipped * 32767.0).astype("<i2")
    with wave.open(str(path), "wb") as wf:
        wf.setnchannels(1)
        wf.setsampwidth(2)
        wf.setframerate(sample_rate)
        wf.writeframes(pcm.tobytes())


def load_segments(
    record: PatientRecord,
    spans: list[Span],
    expected_rate: int | None = DEFAULT_SAMPLE_RATE,
) -> list[CoughSegment]:
    """Slice one CoughSegment per cough span out of a patient's recordings.

    Only spans whose recording_id matches one of the patient's recordings
    are considered. Spans must lie within the recording.
    """
    by_recording: dict[str, list[Span]] = {}
    for span in cough_spans(spans):
        by_recording.setdefault(span.recording_id, []).append(span)

    segments: list[CoughSegment] = []
    for rec_path in record.recording_paths:
        rec_id = recording_id_for(rec_path)
        rec_spans = by_recording.get(rec_id, [])
        if not rec_spans:
            continue
        samples, rate = read_wav(rec_path, expected_rate)
        duration = len(samples) / rate
        for span in rec_spans:
            if span.end_s > duration + 0.5 / rate:
                raise DataError(
                    f"{rec_path}: span {span.start_s:.3f}-{span.end_s:.3f}s exceeds "
                    f"recording duration {duration:.3f}s"
                )
            i0 = int(round(span.start_s * rate))
            i1 = min(int(round(span.end_s * rate)), len(samples))
            segments.append(
                CoughSegment(
                    patient_id=record.patient_id,
                    recording_id=rec_id,
                    start_s=span.start_s,
                    end_s=span.end_s,
                    samples=samples[i0:i1].copy(),
                    sample_rate_hz=rate,
                    tb_label=record.tb_label,
                )
            )
    return segments


def estimate_snr(samples: np.ndarray, sample_rate: int, spans: list[Span]) -> float:
    """Signal-to-noise ratio of a recording in dB: 10*log10(Ps/Pn).

    Ps is the mean power over the cough spans; Pn is the mean power over
    the rest of the recording, excluding breath and speech spans as well.
    Returns +inf when the background power is exactly zero (degenerate
    recording); raises DataError when there is no cough span or no
    background region.
    """
    x = np.asarray(samples, dtype=np.float64)
    foreground = np.zeros(len(x), dtype=bool)
    excluded = np.zeros(len(x), dtype=bool)
    for span in spans:
        i0 = max(0, int(round(span.start_s * sample_rate)))
        i1 = min(len(x), int(round(span.end_s * sample_rate)))
        if span.label == COUGH_LABEL:
            foreground[i0:i1] = True
        if span.label in (COUGH_LABEL, BREATH_LABEL, SPEECH_LABEL):
            excluded[i0:i1] = True
    if not foreground.any():
        raise DataError("no cough span to estimate signal power from")
    background = ~excluded
    if not background.any():
        raise DataError("no background region left after excluding annotated spans")
    p_signal = float(np.mean(x[foreground] ** 2))
    p_noise = float(np.mean(x[background] ** 2))
    if p_noise == 0.0:
        return math.inf
    return 10.0 * math.log10(p_signal / p_noise)


def summarize(
    records: list[PatientRecord],
    segments: list[CoughSegment],
    snr_by_recording: dict[str, float] | None = None,
) -> CorpusSummary:
    """Per-class and total corpus statistics.

    When `snr_by_recording` is given, each cough's SNR is looked up by its
    recording and the per-class mean/SD computed over coughs (degenerate
    +inf values are skipped).
    """
    if not records:
        raise DataError("cannot summarize an empty corpus")
    label_of = {r.patient_id: r.tb_label for r in records}
    for seg in segments:
        if seg.patient_id not in label_of:
            raise DataError(f"segment references unknown patient {seg.patient_id!r}")

    def stats_for(labels: set[int]) -> ClassStats:
        pats = [r for r in records if r.tb_label in labels]
        segs = [s for s in segments if label_of[s.patient_id] in labels]
        n_coughs = len(segs)
        total_len = float(sum(s.duration_s for s in segs))
        snrs: list[float] = []
        if snr_by_recording is not None:
            snrs = [
                snr_by_recording[s.recording_id]
                for s in segs
                if math.isfinite(snr_by_recording.get(s.recording_id, math.inf))
            ]
        return ClassStats(
            n_patients=len(pats),
            n_coughs=n_coughs,
            mean_coughs_per_patient=n_coughs / len(pats) if pats else 0.0,
            mean_cough_length_s=total_len / n_coughs if n_coughs else 0.0,
            total_cough_length_s=total_len,
            mean_snr_db=float(np.mean(snrs)) if snrs else None,
            sd_snr_db=float(np.std(snrs)) if snrs else None,
        )

    present = sorted({r.tb_label for r in records})
    return CorpusSummary(
        per_class={lbl: stats_for({lbl}) for lbl in present},
        total=stats_for(set(present)),
    )
