"""Deterministic synthetic cough corpora for pipeline verification.

Each "cough" is a filtered noise burst: white noise shaped in the
frequency domain by a resonance whose centre, bandwidth and temporal
decay differ between the two classes by an amount scaled by the
`separability` parameter (0 = identical classes). Bursts are embedded
in white background noise at a configurable SNR, and the corpus is
written to disk in the exact manifest / annotation / WAV formats the
ingestion code reads.

Everything is a pure function of the config, so repeated runs produce
byte-identical files.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .corpus import DEFAULT_SAMPLE_RATE, write_wav
from .errors import ConfigError

ATTACK_S = 0.008
BROADBAND_FLOOR = 0.02
COUGH_RMS = 0.15

BASE_CENTER_HZ = 1100.0
CENTER_CLASS_SHIFT_HZ = 700.0  # full class-0 to class-1 spread at separability 1
PATIENT_CENTER_JITTER_HZ = 80.0
COUGH_CENTER_JITTER_HZ = 40.0

BASE_BANDWIDTH_HZ = 400.0
BANDWIDTH_CLASS_SHIFT_HZ = 900.0

BASE_DECAY_S = 0.060
DECAY_CLASS_SHIFT_S = 0.034


@dataclass(frozen=True)
class SynthConfig:
    patients_per_class: int = 10
    coughs_per_patient: int = 8
    separability: float = 1.0  # 0 = indistinguishable classes, 1 = full preset spread
    snr_db: float = 30.0
    seed: int = 0
    sample_rate: int = DEFAULT_SAMPLE_RATE
    min_cough_s: float = 0.40
    max_cough_s: float = 0.65
    min_gap_s: float = 0.60
    max_gap_s: float = 1.00


PRESETS = {
    "easy": SynthConfig(patients_per_class=20, separability=1.0),
    "null": SynthConfig(patients_per_class=20, separability=0.0),
}


def preset_config(name: str, seed: int = 0) -> SynthConfig:
    if name not in PRESETS:
        raise ConfigError(f"unknown synth preset {name!r}; available: {sorted(PRESETS)}")
    return replace(PRESETS[name], seed=seed)


@dataclass
class GroundTruth:
    """The generator's own bookkeeping, for verifying corpus summaries."""

    config: SynthConfig
    manifest_path: Path
    annotations_path: Path
    n_patients: dict[int, int] = field(default_factory=dict)
    n_coughs: dict[int, int] = field(default_factory=dict)
    total_cough_length_s: dict[int, float] = field(default_factory=dict)


def _class_params(cls: int, sep: float) -> tuple[float, float, float]:
    """(centre Hz, bandwidth Hz, decay s) for class 0 or 1 at a separability."""
    sign = -0.5 if cls == 0 else 0.5
    center = BASE_CENTER_HZ + sign * sep * CENTER_CLASS_SHIFT_HZ
    bandwidth = BASE_BANDWIDTH_HZ + max(sign, 0.0) * 2 * sep * BANDWIDTH_CLASS_SHIFT_HZ
    decay = BASE_DECAY_S - max(sign, 0.0) * 2 * sep * DECAY_CLASS_SHIFT_S
    return center, bandwidth, decay


def render_cough(
    rng: np.random.Generator,
    n_samples: int,
    sample_rate: int,
    center_hz: float,
    bandwidth_hz: float,
    decay_s: float,
) -> np.ndarray:
    """One noise burst: resonance-shaped spectrum, sharp attack, exponential decay."""
    noise = rng.standard_normal(n_samples)
    spec = np.fft.rfft(noise)
    freqs = np.fft.rfftfreq(n_samples, 1.0 / sample_rate)
    shaping = np.exp(-0.5 * ((freqs - center_hz) / bandwidth_hz) ** 2) + BROADBAND_FLOOR
    shaped = np.fft.irfft(spec * shaping, n_samples)
    t = np.arange(n_samples) / sample_rate
    envelope = np.minimum(t / ATTACK_S, 1.0) * np.exp(-t / decay_s)
    burst = shaped * envelope
    rms = float(np.sqrt(np.mean(burst**2)))
    return burst * (COUGH_RMS / rms)


def generate_synthetic(config: SynthConfig, out_dir: Path | str) -> GroundTruth:
    """Write a two-class synthetic corpus (WAVs, manifest CSV, annotation TSV).

    Patient ids are p000, p001, ...; class 1 patients carry tb_label 1.
    Returns the generator's ground-truth tallies so downstream summaries
    can be checked against them.
    """
    if config.patients_per_class < 1 or config.coughs_per_patient < 1:
        raise ConfigError("patients_per_class and coughs_per_patient must be >= 1")
    if not 0.0 <= config.separability <= 1.0:
        raise ConfigError(f"separability must be in [0, 1], got {config.separability}")
    out_dir = Path(out_dir)
    audio_dir = out_dir / "audio"
    try:
        audio_dir.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise ConfigError(f"cannot create output directory {out_dir}: {exc}") from exc

    rate = config.sample_rate
    truth = GroundTruth(
        config=config,
        manifest_path=out_dir / "manifest.csv",
        annotations_path=out_dir / "annotations.tsv",
        n_patients={0: 0, 1: 0},
        n_coughs={0: 0, 1: 0},
        total_cough_length_s={0: 0.0, 1: 0.0},
    )

    manifest_lines = ["patient_id,tb_label,recording_path,age,sex"]
    annotation_lines: list[str] = []
    patient_index = 0
    for cls in (0, 1):
        center0, bandwidth0, decay0 = _class_params(cls, config.separability)
        for k in range(config.patients_per_class):
            pid = f"p{patient_index:03d}"
            rec_id = f"rec_{pid}"
            rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence([config.seed, cls, k])))
            center_p = center0 + rng.normal(0.0, PATIENT_CENTER_JITTER_HZ)

            coughs: list[np.ndarray] = []
            gaps: list[int] = [int(round(rng.uniform(config.min_gap_s, config.max_gap_s) * rate))]
            for _ in range(config.coughs_per_patient):
                dur = rng.uniform(config.min_cough_s, config.max_cough_s)
                center = center_p + rng.normal(0.0, COUGH_CENTER_JITTER_HZ)
                coughs.append(render_cough(rng, int(round(dur * rate)), rate, center, bandwidth0, decay0))
                gaps.append(int(round(rng.uniform(config.min_gap_s, config.max_gap_s) * rate)))

            total = sum(gaps) + sum(len(c) for c in coughs)
            cough_power = sum(float(np.sum(c**2)) for c in coughs) / sum(len(c) for c in coughs)
            ratio = 10.0 ** (config.snr_db / 10.0)
            noise_std = float(np.sqrt(cough_power / max(ratio - 1.0, 1e-6)))
            signal = rng.normal(0.0, noise_std, total)

            pos = 0
            for burst, gap in zip(coughs, gaps):
                pos += gap
                signal[pos : pos + len(burst)] += burst
                start_s = pos / rate
                end_s = (pos + len(burst)) / rate
                annotation_lines.append(f"{rec_id}\t{start_s!r}\t{end_s!r}\tc")
                truth.n_coughs[cls] += 1
                truth.total_cough_length_s[cls] += end_s - start_s
                pos += len(burst)

            write_wav(audio_dir / f"{rec_id}.wav", signal, rate)
            sex = "m" if patient_index % 2 == 0 else "f"
            manifest_lines.append(f"{pid},{cls},audio/{rec_id}.wav,,{sex}")
            truth.n_patients[cls] += 1
            patient_index += 1

    truth.manifest_path.write_text("\n".join(manifest_lines) + "\n")
    truth.annotations_path.write_text("\n".join(annotation_lines) + "\n")
    return truth
