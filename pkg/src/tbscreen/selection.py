"""Greedy sequential forward feature selection.

Starting from the empty set, each step tries every remaining feature
appended to the current set, scores the candidate set by mean cough-level
validation AUC over patient-disjoint splits, and keeps the best one.
Classifier hyperparameters stay fixed throughout (selection is applied to
an already-chosen spec); re-searching the grid per step is intentionally
not done here.
"""

from __future__ import annotations

from dataclasses import dataclass
from statistics import stdev

import numpy as np

from .classifiers import ClassifierSpec
from .errors import ConfigError
from .evaluation import RunLog, Split, evaluate_spec_on_splits
from .features import FeatureTable
from .parallel import parallel_map


@dataclass(frozen=True)
class SfsStep:
    step: int  # 1-based prefix size after this addition
    feature_index: int
    feature_name: str
    mean_auc: float
    sd_auc: float
    candidate_mean_aucs: tuple[float, ...] = ()  # every candidate tried this step, for auditing


@dataclass
class SfsTrace:
    steps: list[SfsStep]
    best_step: int  # prefix size with the highest mean AUC (smallest on ties)
    best_auc: float

    def selected_indices(self, prefix: int | None = None) -> list[int]:
        prefix = self.best_step if prefix is None else prefix
        return [s.feature_index for s in self.steps[:prefix]]

    def to_csv_text(self) -> str:
        lines = ["step,feature_name,mean_auc,sd_auc"]
        for s in self.steps:
            lines.append(f"{s.step},{s.feature_name},{repr(s.mean_auc)},{repr(s.sd_auc)}")
        lines.append(f"# best_step={self.best_step} best_auc={repr(self.best_auc)}")
        return "\n".join(lines) + "\n"


def _candidate_worker(args):
    table, splits, spec, columns = args
    return evaluate_spec_on_splits(table.with_columns(list(columns)), splits, spec)


def sfs(
    table: FeatureTable,
    splits: list[Split],
    spec: ClassifierSpec,
    max_features: int | None = None,
    run_log: RunLog | None = None,
    workers: int = 1,
) -> SfsTrace:
    """Forward selection trace up to `max_features` additions.

    Ties at a step resolve to the lowest feature index. The trace records
    the mean and across-split SD of the validation AUC after every
    addition; `best_step` is the prefix size whose mean AUC peaks.
    """
    n_features = table.dimension
    if n_features < 2:
        raise ConfigError("forward selection needs at least 2 candidate features")
    if max_features is None:
        max_features = n_features
    max_features = min(max_features, n_features)

    chosen: list[int] = []
    remaining = list(range(n_features))
    steps: list[SfsStep] = []
    for step in range(1, max_features + 1):
        tasks = [(table, tuple(splits), spec, tuple(chosen + [f])) for f in remaining]
        fold_aucs = parallel_map(_candidate_worker, tasks, workers)
        means = [float(np.mean(a)) for a in fold_aucs]
        best_pos = int(np.argmax(means))  # argmax keeps the first (lowest index) on ties
        best_feature = remaining[best_pos]
        best_fold_aucs = fold_aucs[best_pos]
        if run_log is not None:
            for split in splits:
                run_log.record("sfs", split.train, split.test, n_models=len(remaining))
        chosen.append(best_feature)
        remaining.remove(best_feature)
        steps.append(
            SfsStep(
                step=step,
                feature_index=best_feature,
                feature_name=table.names[best_feature],
                mean_auc=means[best_pos],
                sd_auc=float(stdev(best_fold_aucs)) if len(best_fold_aucs) > 1 else 0.0,
                candidate_mean_aucs=tuple(means),
            )
        )

    best = max(range(len(steps)), key=lambda i: (steps[i].mean_auc, -i))
    return SfsTrace(steps=steps, best_step=steps[best].step, best_auc=steps[best].mean_auc)
