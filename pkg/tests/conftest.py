import numpy as np
import pytest

from tbscreen import corpus as corpus_mod
from tbscreen import evaluation, features, synth

SMALL_SYNTH = synth.SynthConfig(patients_per_class=8, coughs_per_patient=6, separability=1.0, snr_db=30.0, seed=11)


@pytest.fixture(scope="session")
def small_corpus_dir(tmp_path_factory):
    """One small high-separability corpus shared by the whole session."""
    out = tmp_path_factory.mktemp("small_corpus")
    truth = synth.generate_synthetic(SMALL_SYNTH, out)
    return out, truth


@pytest.fixture(scope="session")
def small_corpus(small_corpus_dir):
    out, truth = small_corpus_dir
    records = corpus_mod.parse_manifest(truth.manifest_path)
    spans = corpus_mod.parse_annotations(truth.annotations_path)
    segments = []
    for record in records:
        segments.extend(corpus_mod.load_segments(record, spans))
    return records, spans, segments, truth


@pytest.fixture(scope="session")
def small_table(small_corpus):
    records, _, segments, _ = small_corpus
    cfg = features.FeatureConfig(n_mfcc=13, frame_length=2048, n_sections=1)
    return features.extract_table(segments, cfg)


@pytest.fixture(scope="session")
def small_plan(small_corpus):
    records, *_ = small_corpus
    return evaluation.make_fold_plan(records, seed=3)


def make_segment(samples, rate=44100, pid="p0", rec="r0", label=0):
    samples = np.asarray(samples, dtype=np.float64)
    return corpus_mod.CoughSegment(
        patient_id=pid,
        recording_id=rec,
        start_s=0.0,
        end_s=len(samples) / rate,
        samples=samples,
        sample_rate_hz=rate,
        tb_label=label,
    )
