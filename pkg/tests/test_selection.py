import numpy as np
import pytest

from tbscreen import features as F
from tbscreen import selection as S
from tbscreen.classifiers import LRSpec
from tbscreen.errors import ConfigError
from tbscreen.evaluation import PatientInfo, RunLog, make_fold_plan


def planted_table(n_patients=24, coughs=5, n_features=10, signal=3.0, signal_index=3, seed=0):
    """One informative feature among pure-noise columns."""
    rng = np.random.default_rng(seed)
    pids, labels, rows = [], [], []
    for p in range(n_patients):
        label = p % 2
        for _ in range(coughs):
            x = rng.normal(size=n_features)
            x[signal_index] = label * signal + rng.normal(0, 0.3)
            pids.append(f"p{p:02d}")
            labels.append(label)
            rows.append(x)
    return F.FeatureTable(
        patient_ids=np.array(pids, dtype=object),
        cough_ids=np.array([f"c{i}" for i in range(len(rows))], dtype=object),
        labels=np.array(labels),
        frame_counts=np.ones(len(rows), dtype=int),
        X=np.array(rows),
        names=tuple(f"f{i:02d}" for i in range(n_features)),
    )


def inner_splits(n_patients=24, seed=5):
    patients = [PatientInfo(f"p{p:02d}", p % 2) for p in range(n_patients)]
    plan = make_fold_plan(patients, seed=seed)
    return list(plan.outer[0].inner_a)


SPEC = LRSpec(nu1=1.0, nu2=0.0)


class TestSfs:
    def test_planted_feature_chosen_first(self):
        trace = S.sfs(planted_table(), inner_splits(), SPEC, max_features=3)
        assert trace.steps[0].feature_name == "f03"
        assert trace.steps[0].mean_auc == pytest.approx(1.0, abs=0.02)

    def test_supersets_never_repeat(self):
        trace = S.sfs(planted_table(), inner_splits(), SPEC)
        indices = [s.feature_index for s in trace.steps]
        assert len(indices) == len(set(indices)) == 10
        assert [s.step for s in trace.steps] == list(range(1, 11))

    def test_chosen_beats_every_rejected_candidate(self):
        trace = S.sfs(planted_table(), inner_splits(), SPEC, max_features=5)
        for step in trace.steps:
            assert step.mean_auc == max(step.candidate_mean_aucs)

    def test_max_features_caps_trace(self):
        trace = S.sfs(planted_table(), inner_splits(), SPEC, max_features=4)
        assert len(trace.steps) == 4

    def test_deterministic(self):
        a = S.sfs(planted_table(), inner_splits(), SPEC, max_features=6)
        b = S.sfs(planted_table(), inner_splits(), SPEC, max_features=6)
        assert a.to_csv_text() == b.to_csv_text()

    def test_tie_breaks_to_lowest_index(self):
        # two identical copies of the informative feature: index 2 must win over 7
        table = planted_table(signal_index=2)
        table.X[:, 7] = table.X[:, 2]
        trace = S.sfs(table, inner_splits(), SPEC, max_features=1)
        assert trace.steps[0].feature_index == 2

    def test_best_prefix_recorded(self):
        trace = S.sfs(planted_table(), inner_splits(), SPEC)
        best = max(trace.steps, key=lambda s: s.mean_auc)
        assert trace.best_auc == best.mean_auc
        assert trace.steps[trace.best_step - 1].mean_auc == trace.best_auc

    def test_run_log_entries(self):
        log = RunLog()
        S.sfs(planted_table(), inner_splits(), SPEC, max_features=2, run_log=log)
        log.assert_disjoint()
        assert sum(log.entries.values()) > 0

    def test_csv_text_shape(self):
        trace = S.sfs(planted_table(), inner_splits(), SPEC, max_features=3)
        lines = trace.to_csv_text().strip().splitlines()
        assert lines[0] == "step,feature_name,mean_auc,sd_auc"
        assert len(lines) == 5  # header + 3 steps + summary comment
        assert lines[-1].startswith("# best_step=")

    def test_single_feature_rejected(self):
        table = planted_table(n_features=1, signal_index=0)
        with pytest.raises(ConfigError):
            S.sfs(table, inner_splits(), SPEC)

    def test_degenerate_single_class_fold_propagates(self):
        from tbscreen.errors import DataError
        from tbscreen.evaluation import Split

        table = planted_table(n_patients=8)
        # training patients all from class 0 (even indices)
        splits = [Split(train=("p00", "p02", "p04"), test=("p01", "p03"))]
        with pytest.raises(DataError, match="single class"):
            S.sfs(table, splits, SPEC, max_features=2)
