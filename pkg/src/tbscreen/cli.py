"""Command-line surface: synth | extract | evaluate | sfs | report.

Every command takes ``--config PATH`` (key=value INI, see config.py) plus
``--seed/--workers/--paper-mode/--out`` overrides, validates the
configuration before touching the output directory, and writes
deterministic artifacts so identical configs reproduce identical bytes.

Exit codes: 0 success, 2 config error, 3 data error, 4 numeric failure.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path

from . import corpus as corpus_mod
from .classifiers import spec_to_dict
from .config import PER_FRAME, RunConfig, effective_config_text, load_config
from .errors import ConfigError, DataError, NumericError
from .evaluation import (
    FoldPlan,
    MetricsReport,
    PatientInfo,
    RocCurve,
    RunLog,
    make_fold_plan,
    roc_and_auc,
    roc_from_csv_text,
    roc_to_csv_text,
    sensitivity_at_specificity,
)
from .features import FeatureTable, extract_table
from .selection import sfs
from .synth import generate_synthetic


def _load_corpus_segments(cfg: RunConfig):
    if cfg.manifest is None or cfg.annotations is None:
        raise ConfigError("this command needs corpus paths: set [corpus] manifest and annotations")
    records = corpus_mod.parse_manifest(cfg.manifest)
    spans = corpus_mod.parse_annotations(cfg.annotations)
    segments = []
    for record in records:
        segments.extend(corpus_mod.load_segments(record, spans, expected_rate=cfg.sample_rate))
    if not segments:
        raise DataError("corpus produced no cough segments")
    return records, segments


def _load_table(cfg: RunConfig) -> tuple[FeatureTable, list[PatientInfo]]:
    """Feature table plus patient infos (with sex when a manifest is at hand)."""
    if cfg.features_csv is not None:
        table = FeatureTable.from_csv(cfg.features_csv)
        labels = table.patient_labels()
        patients = [PatientInfo(pid, labels[pid]) for pid in table.patients()]
        return table, patients
    records, segments = _load_corpus_segments(cfg)
    table = extract_table(segments, cfg.features, per_frame=cfg.scoring_mode == PER_FRAME)
    in_table = set(table.patients())
    patients = [
        PatientInfo(r.patient_id, r.tb_label, r.sex) for r in records if r.patient_id in in_table
    ]
    return table, patients


def _fold_plan(cfg: RunConfig, patients) -> FoldPlan:
    return make_fold_plan(patients, seed=cfg.seed, n_outer=cfg.n_outer, n_inner_a=cfg.n_inner_a, n_inner_b=cfg.n_inner_b)


def _prepare_out(cfg: RunConfig) -> Path:
    cfg.out_dir.mkdir(parents=True, exist_ok=True)
    return cfg.out_dir


def _metrics_payload(cfg: RunConfig, report: MetricsReport) -> dict:
    return {
        "auc": {"per_fold": report.auc_per_fold, "mean": report.auc_mean, "sd": report.auc_sd},
        "patient_confusion": {"tp": report.tp, "fp": report.fp, "tn": report.tn, "fn": report.fn},
        "patient_metrics": {"accuracy": report.accuracy, "ppv": report.ppv, "npv": report.npv},
        "cough_confusion": {
            "tp": report.cough_tp,
            "fp": report.cough_fp,
            "tn": report.cough_tn,
            "fn": report.cough_fn,
        },
        "cough_metrics": {
            "accuracy": report.cough_accuracy,
            "ppv": report.cough_ppv,
            "npv": report.cough_npv,
        },
        "folds": [
            {
                "index": f.index,
                "spec": spec_to_dict(f.spec),
                "gamma_ee": f.gamma_ee,
                "gamma": f.gamma,
                "patient_auc": f.patient_auc,
                "patients": [
                    {
                        "patient_id": s.patient_id,
                        "label": f.patient_labels[s.patient_id],
                        "tbi1": s.tbi1,
                        "tbi2": s.tbi2,
                        "decision": s.decision,
                        "n_coughs": s.n_coughs,
                        "n_frames": s.n_frames,
                    }
                    for s in f.patient_scores
                ],
                "grid": [
                    {"spec": spec_to_dict(c.spec), "mean_auc": c.mean_auc, "fold_aucs": c.fold_aucs}
                    for c in f.grid_cells
                ],
            }
            for f in report.folds
        ],
        "modal_spec": spec_to_dict(report.modal_spec),
        "run": {
            "seed": cfg.seed,
            "folds": {"outer": cfg.n_outer, "inner_a": cfg.n_inner_a, "inner_b": cfg.n_inner_b},
            "scoring_mode": cfg.scoring_mode,
            "gamma_override": cfg.gamma,
            "classifier_family": cfg.grid.family,
        },
    }


def cmd_synth(cfg: RunConfig) -> int:
    out = _prepare_out(cfg)
    truth = generate_synthetic(cfg.synth, out)
    (out / "config_echo.ini").write_text(effective_config_text(cfg))
    print(truth.manifest_path)
    return 0


def cmd_extract(cfg: RunConfig) -> int:
    _, segments = _load_corpus_segments(cfg)
    table = extract_table(segments, cfg.features, per_frame=cfg.scoring_mode == PER_FRAME)
    out = _prepare_out(cfg)
    features_path = out / "features.csv"
    table.to_csv(features_path)
    (out / "config_echo.ini").write_text(effective_config_text(cfg))
    print(features_path)
    return 0


def cmd_evaluate(cfg: RunConfig) -> int:
    table, patients = _load_table(cfg)
    plan = _fold_plan(cfg, patients)
    grid = cfg.build_grid()
    run_log = RunLog()

    from .evaluation import evaluate_outer

    report = evaluate_outer(table, plan, grid, gamma=cfg.gamma, run_log=run_log, workers=cfg.workers)

    out = _prepare_out(cfg)
    (out / "metrics.json").write_text(json.dumps(_metrics_payload(cfg, report), sort_keys=True, indent=2) + "\n")
    (out / "roc_patient_pooled.csv").write_text(roc_to_csv_text(report.patient_curve))
    for fold in report.folds:
        curve = roc_and_auc(
            [s.tbi2 for s in fold.patient_scores],
            [fold.patient_labels[s.patient_id] for s in fold.patient_scores],
        )
        (out / f"roc_patient_fold{fold.index}.csv").write_text(roc_to_csv_text(curve))
    (out / "run_log.txt").write_text(run_log.to_text())
    (out / "config_echo.ini").write_text(effective_config_text(cfg))
    print(f"mean patient AUC {report.auc_mean:.4f} +- {report.auc_sd:.4f} over {len(report.folds)} folds")
    print(out / "metrics.json")
    return 0


def cmd_sfs(cfg: RunConfig) -> int:
    table, patients = _load_table(cfg)
    plan = _fold_plan(cfg, patients)
    if not 0 <= cfg.sfs_outer_fold < len(plan.outer):
        raise ConfigError(f"sfs outer_fold {cfg.sfs_outer_fold} out of range 0..{len(plan.outer) - 1}")
    splits = list(plan.outer[cfg.sfs_outer_fold].inner_a)
    run_log = RunLog()
    trace = sfs(
        table,
        splits,
        cfg.single_spec(),
        max_features=cfg.sfs_max_features,
        run_log=run_log,
        workers=cfg.workers,
    )
    run_log.assert_disjoint()
    out = _prepare_out(cfg)
    trace_path = out / "sfs_trace.csv"
    trace_path.write_text(trace.to_csv_text())
    (out / "run_log.txt").write_text(run_log.to_text())
    (out / "config_echo.ini").write_text(effective_config_text(cfg))
    print(f"best prefix {trace.best_step} features, mean AUC {trace.best_auc:.4f}")
    print(trace_path)
    return 0


def _format_metric(value: float) -> str:
    return "n/a" if value is None or (isinstance(value, float) and math.isnan(value)) else f"{value:.4f}"


def cmd_report(cfg: RunConfig, run_dir: Path) -> int:
    run_dir = Path(run_dir)
    metrics_path = run_dir / "metrics.json"
    if not metrics_path.is_file():
        raise DataError(f"no metrics.json under {run_dir}")
    metrics = json.loads(metrics_path.read_text())

    auc = metrics["auc"]
    pm = metrics["patient_metrics"]
    cm = metrics["cough_metrics"]
    print(f"patient AUC: {auc['mean']:.4f} +- {auc['sd']:.4f} over {len(auc['per_fold'])} outer folds")
    print(f"per-fold AUC: {', '.join(f'{a:.4f}' for a in auc['per_fold'])}")
    print(
        f"patient-level accuracy {_format_metric(pm['accuracy'])}  "
        f"PPV {_format_metric(pm['ppv'])}  NPV {_format_metric(pm['npv'])}"
    )
    print(
        f"cough-level accuracy {_format_metric(cm['accuracy'])}  "
        f"PPV {_format_metric(cm['ppv'])}  NPV {_format_metric(cm['npv'])}"
    )
    for fold in metrics["folds"]:
        spec = dict(fold["spec"])
        family = spec.pop("family")
        short = ", ".join(f"{k}={v}" for k, v in sorted(spec.items()) if k not in ("seed", "standardize", "class_weighted"))
        print(f"fold {fold['index']}: AUC {fold['patient_auc']:.4f}  gamma_EE {fold['gamma_ee']:.4f}  {family}({short})")

    pooled_path = run_dir / "roc_patient_pooled.csv"
    curves: list[tuple[str, RocCurve]] = []
    if pooled_path.is_file():
        pooled = roc_from_csv_text(pooled_path.read_text())
        curves.append(("pooled", pooled))
        for target in cfg.specificities:
            sens = sensitivity_at_specificity(pooled, target)
            print(f"sensitivity at {target:.0%} specificity: {sens:.4f}")
    for fold_csv in sorted(run_dir.glob("roc_patient_fold*.csv")):
        curves.append((fold_csv.stem.replace("roc_patient_", ""), roc_from_csv_text(fold_csv.read_text())))

    combined = run_dir / "combined_roc.csv"
    lines = ["source,threshold,fpr,tpr"]
    for name, curve in curves:
        for thr, fp, tp in zip(curve.thresholds, curve.fpr, curve.tpr):
            thr_text = "inf" if math.isinf(thr) else repr(float(thr))
            lines.append(f"{name},{thr_text},{repr(float(fp))},{repr(float(tp))}")
    combined.write_text("\n".join(lines) + "\n")
    print(combined)
    return 0


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="key=value INI config file")
    common.add_argument("--seed", type=int, help="override the run seed")
    common.add_argument("--workers", type=int, help="worker processes for fold/grid/candidate parallelism")
    common.add_argument("--paper-mode", action="store_true", help="lock hyperparameters to the reference search grids")
    common.add_argument("--out", type=Path, help="output directory")

    parser = argparse.ArgumentParser(prog="tbscreen", description="Cough-audio TB screening pipeline")
    sub = parser.add_subparsers(dest="command", required=True)

    p_synth = sub.add_parser("synth", parents=[common], help="generate a synthetic verification corpus")
    p_synth.add_argument("--preset", choices=["easy", "null"], help="named synthetic corpus preset")

    p_extract = sub.add_parser("extract", parents=[common], help="extract per-cough features to CSV")
    p_extract.add_argument("--manifest", type=Path)
    p_extract.add_argument("--annotations", type=Path)

    p_eval = sub.add_parser("evaluate", parents=[common], help="nested cross-validation evaluation")
    p_eval.add_argument("--manifest", type=Path)
    p_eval.add_argument("--annotations", type=Path)
    p_eval.add_argument("--features", dest="features_csv", type=Path, help="use an existing features CSV")

    p_sfs = sub.add_parser("sfs", parents=[common], help="sequential forward feature selection")
    p_sfs.add_argument("--manifest", type=Path)
    p_sfs.add_argument("--annotations", type=Path)
    p_sfs.add_argument("--features", dest="features_csv", type=Path)
    p_sfs.add_argument("--max-features", type=int)

    p_report = sub.add_parser("report", parents=[common], help="summarize an evaluation run directory")
    p_report.add_argument("run_dir", type=Path)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    overrides = {
        "seed": getattr(args, "seed", None),
        "workers": getattr(args, "workers", None),
        "paper_mode": getattr(args, "paper_mode", False),
        "out": getattr(args, "out", None),
        "manifest": getattr(args, "manifest", None),
        "annotations": getattr(args, "annotations", None),
        "features_csv": getattr(args, "features_csv", None),
        "preset": getattr(args, "preset", None),
        "max_features": getattr(args, "max_features", None),
    }
    try:
        cfg = load_config(args.config, overrides)
        if args.command == "synth":
            return cmd_synth(cfg)
        if args.command == "extract":
            return cmd_extract(cfg)
        if args.command == "evaluate":
            return cmd_evaluate(cfg)
        if args.command == "sfs":
            return cmd_sfs(cfg)
        if args.command == "report":
            return cmd_report(cfg, args.run_dir)
        raise ConfigError(f"unknown command {args.command!r}")
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 3
    except NumericError as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
