"""Nested cross-validation, grid search, ROC machinery, patient scoring.

The fold scheme follows the 5/4/2 pattern: an outer loop of 5
patient-disjoint folds; within each outer training set, a 4-fold inner
loop selects hyperparameters by mean cough-level AUC and a separate
2-fold inner loop fits the equal-error-rate threshold used in the final
patient decision. Every training event is recorded in a run log so
patient leakage can be audited after the fact.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from statistics import stdev

import numpy as np

from .classifiers import ClassifierSpec, TrainedModel, regularization_strength, train
from .errors import ConfigError, DataError, NumericError
from .features import FeatureTable
from .parallel import parallel_map


# ---------------------------------------------------------------------------
# Fold plans


@dataclass(frozen=True)
class Split:
    train: tuple[str, ...]
    test: tuple[str, ...]


@dataclass(frozen=True)
class OuterFold:
    index: int
    train: tuple[str, ...]
    test: tuple[str, ...]
    inner_a: tuple[Split, ...]  # hyperparameter search folds
    inner_b: tuple[Split, ...]  # EER threshold folds


@dataclass(frozen=True)
class FoldPlan:
    outer: tuple[OuterFold, ...]
    seed: int
    n_outer: int
    n_inner_a: int
    n_inner_b: int

    def all_patients(self) -> set[str]:
        out: set[str] = set()
        for fold in self.outer:
            out.update(fold.train)
            out.update(fold.test)
        return out


@dataclass(frozen=True)
class PatientInfo:
    patient_id: str
    tb_label: int
    sex: str | None = None


def _deal_stratified(patients, rng: np.random.Generator, n_folds: int) -> list[list[str]]:
    """Round-robin deal per class (sex-sorted within class) so every fold's
    class count is within one patient of an even share."""
    folds: list[list[str]] = [[] for _ in range(n_folds)]
    by_class: dict[int, list] = {}
    for p in patients:
        by_class.setdefault(int(p.tb_label), []).append(p)
    for label in sorted(by_class):
        group = by_class[label]
        order = rng.permutation(len(group))
        shuffled = [group[i] for i in order]
        shuffled.sort(key=lambda p: p.sex or "")  # stable: keeps the shuffle within each sex
        for i, p in enumerate(shuffled):
            folds[i % n_folds].append(p.patient_id)
    return folds


def _splits_from_folds(folds: list[list[str]]) -> tuple[Split, ...]:
    out = []
    for i, fold in enumerate(folds):
        train = [pid for j, other in enumerate(folds) if j != i for pid in other]
        out.append(Split(train=tuple(sorted(train)), test=tuple(sorted(fold))))
    return tuple(out)


def make_fold_plan(patients, seed: int = 0, n_outer: int = 5, n_inner_a: int = 4, n_inner_b: int = 2) -> FoldPlan:
    """Deterministic nested patient-disjoint fold plan, stratified by class
    (and by sex when present).

    `patients` is any iterable of objects with patient_id, tb_label and sex
    attributes (PatientRecord or PatientInfo).
    """
    patients = list(patients)
    ids = [p.patient_id for p in patients]
    if len(set(ids)) != len(ids):
        raise DataError("duplicate patient_id in fold-plan input")
    by_class: dict[int, int] = {}
    for p in patients:
        by_class[int(p.tb_label)] = by_class.get(int(p.tb_label), 0) + 1
    if len(by_class) < 2:
        raise DataError("fold plan needs patients of both classes")
    inner_min = max(n_inner_a, n_inner_b)
    for label, count in sorted(by_class.items()):
        if count < n_outer:
            raise ConfigError(
                f"class {label} has only {count} patients; {n_outer}-fold outer CV needs at least "
                f"{n_outer} per class (configure smaller fold counts for tiny corpora)"
            )
        if count - math.ceil(count / n_outer) < inner_min:
            raise ConfigError(
                f"class {label} has too few patients ({count}) for {n_inner_a}/{n_inner_b}-fold "
                f"inner loops inside {n_outer}-fold outer CV; configure smaller fold counts"
            )

    by_id = {p.patient_id: p for p in patients}
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence([seed, 0])))
    outer_folds = _deal_stratified(patients, rng, n_outer)

    outer: list[OuterFold] = []
    for k, test_fold in enumerate(outer_folds):
        train_ids = sorted(pid for j, fold in enumerate(outer_folds) if j != k for pid in fold)
        train_patients = [by_id[pid] for pid in train_ids]
        rng_a = np.random.Generator(np.random.PCG64(np.random.SeedSequence([seed, 1 + 2 * k])))
        rng_b = np.random.Generator(np.random.PCG64(np.random.SeedSequence([seed, 2 + 2 * k])))
        inner_a = _splits_from_folds(_deal_stratified(train_patients, rng_a, n_inner_a))
        inner_b = _splits_from_folds(_deal_stratified(train_patients, rng_b, n_inner_b))
        outer.append(
            OuterFold(
                index=k,
                train=tuple(train_ids),
                test=tuple(sorted(test_fold)),
                inner_a=inner_a,
                inner_b=inner_b,
            )
        )
    return FoldPlan(outer=tuple(outer), seed=seed, n_outer=n_outer, n_inner_a=n_inner_a, n_inner_b=n_inner_b)


# ---------------------------------------------------------------------------
# Run log / leakage audit


@dataclass
class RunLog:
    """Record of every (training patients, evaluated patients) pair.

    Identical pairs are merged with a model counter, so grid searches do
    not inflate the log; the audit property is unaffected.
    """

    entries: dict[tuple[str, tuple[str, ...], tuple[str, ...]], int] = field(default_factory=dict)

    def record(self, stage: str, train_patients, test_patients, n_models: int = 1) -> None:
        key = (stage, tuple(sorted(set(train_patients))), tuple(sorted(set(test_patients))))
        self.entries[key] = self.entries.get(key, 0) + n_models

    def assert_disjoint(self) -> None:
        for stage, train, test in self.entries:
            overlap = set(train) & set(test)
            if overlap:
                raise NumericError(f"patient leakage at stage {stage!r}: {sorted(overlap)}")

    def to_text(self) -> str:
        lines = ["# stage | models | train_patients | test_patients"]
        for (stage, train, test), count in self.entries.items():
            lines.append(f"{stage} | {count} | {','.join(train)} | {','.join(test)}")
        return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# ROC / AUC / EER


@dataclass(frozen=True)
class RocCurve:
    """Operating points ordered by decreasing threshold, from (0,0) at
    threshold +inf to (1,1) at the minimum score."""

    thresholds: np.ndarray
    fpr: np.ndarray
    tpr: np.ndarray
    auc: float


def roc_and_auc(scores, labels) -> RocCurve:
    """ROC curve over the unique scores plus trapezoidal AUC.

    The trapezoidal integral ties out with the Mann-Whitney pair statistic
    (concordant pairs plus half the ties over all positive-negative
    pairs).
    """
    s = np.asarray(scores, dtype=np.float64)
    y = np.asarray(labels)
    if len(s) != len(y) or len(s) == 0:
        raise DataError("scores and labels must be equal-length and nonempty")
    n_pos = int(np.sum(y == 1))
    n_neg = len(y) - n_pos
    if n_pos == 0 or n_neg == 0:
        raise NumericError("ROC needs both classes present")

    order = np.argsort(-s, kind="stable")
    s_sorted = s[order]
    pos_sorted = (y[order] == 1).astype(np.float64)
    cum_tp = np.cumsum(pos_sorted)
    cum_fp = np.cumsum(1.0 - pos_sorted)
    # keep one operating point per distinct score: the last index of each block
    distinct = np.nonzero(np.diff(s_sorted))[0]
    block_ends = np.concatenate([distinct, [len(s_sorted) - 1]])

    thresholds = np.concatenate([[math.inf], s_sorted[block_ends]])
    tpr = np.concatenate([[0.0], cum_tp[block_ends] / n_pos])
    fpr = np.concatenate([[0.0], cum_fp[block_ends] / n_neg])
    auc = float(np.sum(np.diff(fpr) * (tpr[1:] + tpr[:-1]) / 2.0))
    return RocCurve(thresholds=thresholds, fpr=fpr, tpr=tpr, auc=auc)


def eer_threshold(curve: RocCurve) -> float:
    """Decision threshold minimizing |FPR - FNR|; ties resolve to the lower
    threshold."""
    diff = np.abs(curve.fpr - (1.0 - curve.tpr))
    best = np.nonzero(diff == diff.min())[0][-1]  # thresholds descend, so last = lowest
    return float(curve.thresholds[best])


def sensitivity_at_specificity(curve: RocCurve, target_specificity: float) -> float:
    """Max TPR subject to FPR <= 1 - target, interpolating linearly on the
    segment that crosses the FPR limit."""
    limit = 1.0 - target_specificity
    best = 0.0
    for i in range(len(curve.fpr)):
        if curve.fpr[i] <= limit:
            best = max(best, float(curve.tpr[i]))
    for i in range(len(curve.fpr) - 1):
        f0, f1 = curve.fpr[i], curve.fpr[i + 1]
        if f0 <= limit < f1 and f1 > f0:
            frac = (limit - f0) / (f1 - f0)
            best = max(best, float(curve.tpr[i] + frac * (curve.tpr[i + 1] - curve.tpr[i])))
    return best


def roc_to_csv_text(curve: RocCurve) -> str:
    lines = ["threshold,fpr,tpr"]
    for thr, fp, tp in zip(curve.thresholds, curve.fpr, curve.tpr):
        lines.append(f"{'inf' if math.isinf(thr) else repr(float(thr))},{repr(float(fp))},{repr(float(tp))}")
    return "\n".join(lines) + "\n"


def roc_from_csv_text(text: str) -> RocCurve:
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines or lines[0] != "threshold,fpr,tpr":
        raise DataError("not a ROC CSV (expected header 'threshold,fpr,tpr')")
    thr, fpr, tpr = [], [], []
    for ln in lines[1:]:
        t, f, y = ln.split(",")
        thr.append(math.inf if t == "inf" else float(t))
        fpr.append(float(f))
        tpr.append(float(y))
    fpr_arr, tpr_arr = np.array(fpr), np.array(tpr)
    auc = float(np.sum(np.diff(fpr_arr) * (tpr_arr[1:] + tpr_arr[:-1]) / 2.0))
    return RocCurve(thresholds=np.array(thr), fpr=fpr_arr, tpr=tpr_arr, auc=auc)


# ---------------------------------------------------------------------------
# Patient scoring


@dataclass(frozen=True)
class PatientScore:
    patient_id: str
    tbi1: float  # fraction of coughs called TB at the EER threshold
    tbi2: float  # frame-weighted mean TB probability
    decision: int
    gamma_ee: float
    gamma: float
    n_coughs: int
    n_frames: int


def score_patient(patient_id: str, cough_probs, frame_counts, gamma_ee: float, gamma: float) -> PatientScore:
    """Patient-level TB indices and the final binary decision.

    `cough_probs` holds one mean per-frame probability per cough;
    `frame_counts` the matching frame counts, so the frame-weighted mean
    of the cough probabilities equals the mean over all frames. The
    patient is called TB when more than half the coughs exceed the EER
    threshold or the frame-weighted mean probability exceeds gamma.
    """
    p_hat = np.asarray(cough_probs, dtype=np.float64)
    k = np.asarray(frame_counts, dtype=np.float64)
    if len(p_hat) == 0:
        raise NumericError(f"patient {patient_id!r} has zero coughs to score")
    if len(p_hat) != len(k):
        raise NumericError("cough_probs and frame_counts must be equal length")
    cough_calls = p_hat >= gamma_ee
    tbi1 = float(cough_calls.mean())
    tbi2 = float((p_hat * k).sum() / k.sum())
    decision = 1 if (tbi1 > 0.5 or tbi2 > gamma) else 0
    return PatientScore(
        patient_id=patient_id,
        tbi1=tbi1,
        tbi2=tbi2,
        decision=decision,
        gamma_ee=gamma_ee,
        gamma=gamma,
        n_coughs=len(p_hat),
        n_frames=int(k.sum()),
    )


# ---------------------------------------------------------------------------
# Confusion metrics


def accuracy(tp: int, fp: int, tn: int, fn: int) -> float:
    total = tp + fp + tn + fn
    return (tp + tn) / total if total else math.nan


def ppv(tp: int, fp: int) -> float:
    return tp / (tp + fp) if tp + fp else math.nan


def npv(tn: int, fn: int) -> float:
    return tn / (fn + tn) if fn + tn else math.nan


# ---------------------------------------------------------------------------
# Grid search and the outer loop


def _row_mask(table: FeatureTable, patient_set: set[str]) -> np.ndarray:
    return np.array([pid in patient_set for pid in table.patient_ids], dtype=bool)


@dataclass
class CoughScores:
    """Per-cough aggregated model outputs for a set of table rows."""

    cough_ids: list[str]
    probs: np.ndarray  # mean per-frame probability per cough
    labels: np.ndarray
    frame_counts: np.ndarray
    patient_ids: list[str]


def cough_scores(model: TrainedModel, table: FeatureTable, mask: np.ndarray) -> CoughScores:
    """Score the masked rows and aggregate frame rows into per-cough means.

    In per-cough tables this is the identity grouping (one row per cough,
    frame count from the table); in per-frame tables all rows sharing a
    cough_id are averaged and counted.
    """
    idx = np.nonzero(mask)[0]
    if len(idx) == 0:
        raise DataError("no rows selected for scoring")
    row_probs = model.predict_proba(table.X[idx])
    order: list[str] = []
    acc: dict[str, list] = {}
    for pos, i in enumerate(idx):
        cid = table.cough_ids[i]
        if cid not in acc:
            order.append(cid)
            acc[cid] = [0.0, 0.0, int(table.labels[i]), table.patient_ids[i]]
        acc[cid][0] += float(row_probs[pos]) * int(table.frame_counts[i])
        acc[cid][1] += int(table.frame_counts[i])
    probs = np.array([acc[c][0] / acc[c][1] for c in order])
    counts = np.array([acc[c][1] for c in order], dtype=int)
    labels = np.array([acc[c][2] for c in order], dtype=int)
    pids = [acc[c][3] for c in order]
    return CoughScores(cough_ids=order, probs=probs, labels=labels, frame_counts=counts, patient_ids=pids)


def fit_on_patients(table: FeatureTable, train_patients, spec: ClassifierSpec) -> TrainedModel:
    mask = _row_mask(table, set(train_patients))
    if not mask.any():
        raise DataError("no training rows for the given patients")
    return train(table.X[mask], table.labels[mask], spec)


def _score_split(table: FeatureTable, split: Split, spec: ClassifierSpec) -> CoughScores:
    model = fit_on_patients(table, split.train, spec)
    return cough_scores(model, table, _row_mask(table, set(split.test)))


def evaluate_spec_on_splits(table: FeatureTable, splits, spec: ClassifierSpec) -> list[float]:
    """Cough-level validation AUC of one spec per split."""
    aucs = []
    for split in splits:
        scored = _score_split(table, split, spec)
        aucs.append(roc_and_auc(scored.probs, scored.labels).auc)
    return aucs


@dataclass
class GridCellResult:
    spec: ClassifierSpec
    mean_auc: float
    fold_aucs: list[float]


def grid_search(
    table: FeatureTable,
    splits,
    grid: list[ClassifierSpec],
    run_log: RunLog | None = None,
    workers: int = 1,
) -> tuple[ClassifierSpec, list[GridCellResult]]:
    """Mean cough-level AUC per grid cell over the inner-A splits; returns
    the argmax cell. Ties go first to the more strongly regularized spec,
    then to declaration order."""
    if not grid:
        raise ConfigError("empty hyperparameter grid")
    results: list[GridCellResult] = []
    first_error: Exception | None = None
    cell_aucs = parallel_map(_grid_cell_worker, [(table, tuple(splits), spec) for spec in grid], workers)
    for spec, outcome in zip(grid, cell_aucs):
        if isinstance(outcome, Exception):
            if first_error is None:
                first_error = outcome
            continue
        results.append(GridCellResult(spec=spec, mean_auc=float(np.mean(outcome)), fold_aucs=outcome))
        if run_log is not None:
            for split in splits:
                run_log.record("grid_search", split.train, split.test)
    if not results:
        assert first_error is not None
        raise first_error

    best = results[0]
    for cell in results[1:]:
        if cell.mean_auc > best.mean_auc:
            best = cell
        elif cell.mean_auc == best.mean_auc and regularization_strength(cell.spec) > regularization_strength(best.spec):
            best = cell
    return best.spec, results


def _grid_cell_worker(args):
    table, splits, spec = args
    try:
        return evaluate_spec_on_splits(table, splits, spec)
    except (DataError, NumericError, ConfigError) as exc:
        return exc


@dataclass
class FoldResult:
    index: int
    spec: ClassifierSpec
    gamma_ee: float
    gamma: float
    patient_auc: float
    patient_scores: list[PatientScore]
    patient_labels: dict[str, int]
    cough_curve: RocCurve  # inner-B pooled validation curve the threshold came from
    grid_cells: list[GridCellResult]


@dataclass
class MetricsReport:
    auc_per_fold: list[float]
    auc_mean: float
    auc_sd: float
    tp: int
    fp: int
    tn: int
    fn: int
    accuracy: float
    ppv: float
    npv: float
    cough_tp: int
    cough_fp: int
    cough_tn: int
    cough_fn: int
    cough_accuracy: float
    cough_ppv: float
    cough_npv: float
    folds: list[FoldResult]
    patient_curve: RocCurve  # pooled outer-test patients, scored by TBI2
    modal_spec: ClassifierSpec

    def sensitivity_at(self, target_specificity: float) -> float:
        """Sensitivity read off the pooled patient ROC at a specificity."""
        return sensitivity_at_specificity(self.patient_curve, target_specificity)


def _confusion(decisions: np.ndarray, labels: np.ndarray) -> tuple[int, int, int, int]:
    tp = int(np.sum((decisions == 1) & (labels == 1)))
    fp = int(np.sum((decisions == 1) & (labels == 0)))
    tn = int(np.sum((decisions == 0) & (labels == 0)))
    fn = int(np.sum((decisions == 0) & (labels == 1)))
    return tp, fp, tn, fn


def evaluate_outer(
    table: FeatureTable,
    plan: FoldPlan,
    grid: list[ClassifierSpec],
    gamma: float | None = None,
    run_log: RunLog | None = None,
    workers: int = 1,
) -> MetricsReport:
    """Run the full nested scheme and report patient-level metrics.

    Per outer fold: grid search on the inner-A splits, EER threshold from
    the pooled inner-B validation scores, retrain the winning spec on the
    whole outer training set, then score the outer-test patients. The
    per-fold patient AUC uses the frame-weighted mean probability (TBI2)
    as the continuous patient score. `gamma` defaults to the fold's EER
    threshold.
    """
    table_patients = set(table.patients())
    plan_patients = plan.all_patients()
    if table_patients != plan_patients:
        missing = plan_patients - table_patients
        extra = table_patients - plan_patients
        raise DataError(f"fold plan and feature table disagree on patients (missing={sorted(missing)}, extra={sorted(extra)})")
    if run_log is None:
        run_log = RunLog()
    labels_by_patient = table.patient_labels()

    folds: list[FoldResult] = []
    pooled_tbi2: list[float] = []
    pooled_patient_labels: list[int] = []
    pooled_decisions: list[int] = []
    pooled_cough_calls: list[int] = []
    pooled_cough_labels: list[int] = []

    for fold in plan.outer:
        best_spec, cells = grid_search(table, fold.inner_a, grid, run_log=run_log, workers=workers)

        b_probs: list[float] = []
        b_labels: list[int] = []
        for split in fold.inner_b:
            scored = _score_split(table, split, best_spec)
            run_log.record("eer_fit", split.train, split.test)
            b_probs.extend(scored.probs.tolist())
            b_labels.extend(scored.labels.tolist())
        inner_curve = roc_and_auc(b_probs, b_labels)
        gamma_ee = eer_threshold(inner_curve)
        fold_gamma = gamma_ee if gamma is None else gamma

        final_model = fit_on_patients(table, fold.train, best_spec).with_threshold(gamma_ee)
        run_log.record("outer_test", fold.train, fold.test)
        scored = cough_scores(final_model, table, _row_mask(table, set(fold.test)))

        by_patient: dict[str, list[int]] = {}
        for i, pid in enumerate(scored.patient_ids):
            by_patient.setdefault(pid, []).append(i)
        patient_scores = [
            score_patient(
                pid,
                scored.probs[idx],
                scored.frame_counts[idx],
                gamma_ee,
                fold_gamma,
            )
            for pid, idx in by_patient.items()
        ]
        fold_labels = {pid: labels_by_patient[pid] for pid in by_patient}
        patient_auc = roc_and_auc(
            [s.tbi2 for s in patient_scores],
            [fold_labels[s.patient_id] for s in patient_scores],
        ).auc

        folds.append(
            FoldResult(
                index=fold.index,
                spec=best_spec,
                gamma_ee=gamma_ee,
                gamma=fold_gamma,
                patient_auc=patient_auc,
                patient_scores=patient_scores,
                patient_labels=fold_labels,
                cough_curve=inner_curve,
                grid_cells=cells,
            )
        )
        pooled_tbi2.extend(s.tbi2 for s in patient_scores)
        pooled_patient_labels.extend(fold_labels[s.patient_id] for s in patient_scores)
        pooled_decisions.extend(s.decision for s in patient_scores)
        pooled_cough_calls.extend((scored.probs >= gamma_ee).astype(int).tolist())
        pooled_cough_labels.extend(scored.labels.tolist())

    run_log.assert_disjoint()

    aucs = [f.patient_auc for f in folds]
    tp, fp, tn, fn = _confusion(np.array(pooled_decisions), np.array(pooled_patient_labels))
    ctp, cfp, ctn, cfn = _confusion(np.array(pooled_cough_calls), np.array(pooled_cough_labels))
    spec_counts: dict[str, tuple[int, ClassifierSpec]] = {}
    for f in folds:
        key = repr(f.spec)
        count, _ = spec_counts.get(key, (0, f.spec))
        spec_counts[key] = (count + 1, f.spec)
    modal_spec = max(spec_counts.values(), key=lambda item: item[0])[1]

    return MetricsReport(
        auc_per_fold=aucs,
        auc_mean=float(np.mean(aucs)),
        auc_sd=float(stdev(aucs)) if len(aucs) > 1 else 0.0,
        tp=tp,
        fp=fp,
        tn=tn,
        fn=fn,
        accuracy=accuracy(tp, fp, tn, fn),
        ppv=ppv(tp, fp),
        npv=npv(tn, fn),
        cough_tp=ctp,
        cough_fp=cfp,
        cough_tn=ctn,
        cough_fn=cfn,
        cough_accuracy=accuracy(ctp, cfp, ctn, cfn),
        cough_ppv=ppv(ctp, cfp),
        cough_npv=npv(ctn, cfn),
        folds=folds,
        patient_curve=roc_and_auc(pooled_tbi2, pooled_patient_labels),
        modal_spec=modal_spec,
    )
