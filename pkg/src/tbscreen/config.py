"""Run configuration: INI config file, defaults, and paper-mode validation.

One structured key=value config file drives every CLI command;
command-line flags override file values, which override built-in
defaults. Paper mode locks feature hyperparameters and classifier grids
to the reference search ranges:

  frame length 2^8..2^12, sections 1..4, 13/26/39 MFCCs, 40..200 (step
  20) linear filters; LR nu1 in 10^-7..10^7 with the l1 weight on a 0.05
  grid (l2 weight = 1 - l1); KNN neighbours 10..100 step 10, leaf size
  5..30 step 5; SVM C and RBF gamma in 10^-7..10^7; MLP hidden neurons
  10..100 step 10, l2 in 10^-7..10^5, learning rate on a 0.05 grid.
"""

from __future__ import annotations

import configparser
import math
from dataclasses import dataclass, field
from pathlib import Path

from .classifiers import ClassifierSpec, KNNSpec, LRSpec, MLPSpec, SVMSpec
from .errors import ConfigError
from .features import FeatureConfig
from .parallel import default_workers
from .synth import SynthConfig, preset_config

PER_COUGH = "per_cough"
PER_FRAME = "per_frame"

POW10_GRID = tuple(10.0**k for k in range(-7, 8))
MLP_L2_GRID = tuple(10.0**k for k in range(-7, 6))
STEP05_GRID = tuple(round(0.05 * k, 2) for k in range(0, 21))
KNN_K_GRID = tuple(range(10, 101, 10))
KNN_LEAF_GRID = tuple(range(5, 31, 5))
MLP_HIDDEN_GRID = tuple(range(10, 101, 10))

DEFAULT_SPECIFICITIES = (0.70, 0.95)


def _in_grid(value: float, grid: tuple[float, ...]) -> bool:
    return any(math.isclose(value, g, rel_tol=1e-9, abs_tol=1e-12) for g in grid)


@dataclass
class GridConfig:
    """Per-family hyperparameter value lists the grid is built from."""

    family: str = "lr"
    lr_nu1: tuple[float, ...] = (0.01, 1.0, 100.0)
    lr_nu2: tuple[float, ...] = (0.0, 0.5, 1.0)
    knn_k: tuple[int, ...] = (10, 30, 50)
    knn_leaf: tuple[int, ...] = (30,)
    svm_c: tuple[float, ...] = (0.1, 1.0, 10.0)
    svm_gamma: tuple[float, ...] = (0.01, 0.1, 1.0)
    svm_kernel: tuple[str, ...] = ("rbf",)
    mlp_hidden: tuple[int, ...] = (10, 30)
    mlp_l2: tuple[float, ...] = (1e-4, 1e-2)
    mlp_lr: tuple[float, ...] = (0.05, 0.1)
    mlp_epochs: int = 500
    class_weighted: bool = False
    standardize: str = "default"  # "default" | "on" | "off"
    seed: int = 0

    def _standardize_flag(self) -> bool | None:
        return {"default": None, "on": True, "off": False}[self.standardize]

    def build(self) -> list[ClassifierSpec]:
        """Grid cells in declaration order (used for deterministic ties)."""
        std = self._standardize_flag()
        common = dict(seed=self.seed, class_weighted=self.class_weighted, standardize=std)
        if self.family == "lr":
            return [LRSpec(nu1=n1, nu2=n2, **common) for n1 in self.lr_nu1 for n2 in self.lr_nu2]
        if self.family == "knn":
            return [KNNSpec(n_neighbors=k, leaf_size=lf, **common) for k in self.knn_k for lf in self.knn_leaf]
        if self.family == "svm":
            cells: list[ClassifierSpec] = []
            for kernel in self.svm_kernel:
                for c in self.svm_c:
                    if kernel == "linear":
                        cells.append(SVMSpec(c=c, kernel="linear", **common))
                    else:
                        cells.extend(SVMSpec(c=c, kernel="rbf", gamma=g, **common) for g in self.svm_gamma)
            return cells
        if self.family == "mlp":
            return [
                MLPSpec(n_hidden=h, l2=l2, learning_rate=lr, epochs=self.mlp_epochs, **common)
                for h in self.mlp_hidden
                for l2 in self.mlp_l2
                for lr in self.mlp_lr
            ]
        raise ConfigError(f"unknown classifier family {self.family!r}")

    def validate_paper_mode(self) -> None:
        per_family = {
            "lr": [("lr_nu1", self.lr_nu1, POW10_GRID), ("lr_nu2", self.lr_nu2, STEP05_GRID)],
            "knn": [("knn_k", self.knn_k, KNN_K_GRID), ("knn_leaf", self.knn_leaf, KNN_LEAF_GRID)],
            "svm": [("svm_c", self.svm_c, POW10_GRID), ("svm_gamma", self.svm_gamma, POW10_GRID)],
            "mlp": [
                ("mlp_hidden", self.mlp_hidden, MLP_HIDDEN_GRID),
                ("mlp_l2", self.mlp_l2, MLP_L2_GRID),
                ("mlp_lr", self.mlp_lr, STEP05_GRID),
            ],
        }
        if self.family not in per_family:
            raise ConfigError(f"unknown classifier family {self.family!r}")
        checks = per_family[self.family]
        for name, values, grid in checks:
            for v in values:
                if not _in_grid(float(v), tuple(float(g) for g in grid)):
                    raise ConfigError(f"paper mode: {name} value {v} is outside the reference grid")


PAPER_GRIDS = {
    "lr": dict(lr_nu1=POW10_GRID, lr_nu2=STEP05_GRID),
    "knn": dict(knn_k=KNN_K_GRID, knn_leaf=KNN_LEAF_GRID),
    "svm": dict(svm_c=POW10_GRID, svm_gamma=POW10_GRID, svm_kernel=("linear", "rbf")),
    "mlp": dict(mlp_hidden=MLP_HIDDEN_GRID, mlp_l2=MLP_L2_GRID, mlp_lr=STEP05_GRID),
}


@dataclass
class RunConfig:
    seed: int = 0
    workers: int = field(default_factory=default_workers)  # --workers 1 forces serial runs
    paper_mode: bool = False
    out_dir: Path = Path("runs/out")

    manifest: Path | None = None
    annotations: Path | None = None
    features_csv: Path | None = None
    sample_rate: int = 44100

    features: FeatureConfig = field(default_factory=FeatureConfig)
    grid: GridConfig = field(default_factory=GridConfig)

    n_outer: int = 5
    n_inner_a: int = 4
    n_inner_b: int = 2

    scoring_mode: str = PER_COUGH
    gamma: float | None = None  # None -> per-fold EER threshold

    synth: SynthConfig = field(default_factory=SynthConfig)
    synth_preset: str | None = None

    sfs_max_features: int | None = None
    sfs_outer_fold: int = 0

    specificities: tuple[float, ...] = DEFAULT_SPECIFICITIES

    def validate(self) -> None:
        if self.scoring_mode not in (PER_COUGH, PER_FRAME):
            raise ConfigError(f"scoring mode must be {PER_COUGH!r} or {PER_FRAME!r}")
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")
        if min(self.n_outer, self.n_inner_a, self.n_inner_b) < 2:
            raise ConfigError("all fold counts must be >= 2")
        for s in self.specificities:
            if not 0.0 < s < 1.0:
                raise ConfigError(f"specificity target {s} outside (0, 1)")
        if not 0.0 <= self.synth.separability <= 1.0:
            raise ConfigError(f"separability must be in [0, 1], got {self.synth.separability}")
        if self.synth.patients_per_class < 1 or self.synth.coughs_per_patient < 1:
            raise ConfigError("synth patients_per_class and coughs_per_patient must be >= 1")
        if self.paper_mode:
            if self.features.free_mode:
                raise ConfigError("paper mode forbids free_mode feature settings")
            self.grid.validate_paper_mode()

    def build_grid(self) -> list[ClassifierSpec]:
        grid = self.grid
        grid.seed = self.seed
        return grid.build()

    def single_spec(self) -> ClassifierSpec:
        """The fixed spec used by forward selection: the first grid cell.

        Configure single-value hyperparameter lists to pin it exactly.
        """
        return self.build_grid()[0]


def _get(parser: configparser.ConfigParser, section: str, key: str, fallback=None):
    if parser.has_option(section, key):
        value = parser.get(section, key).strip()
        return value if value != "" else fallback
    return fallback


def _floats(text: str) -> tuple[float, ...]:
    return tuple(float(v) for v in text.split(",") if v.strip())


def _ints(text: str) -> tuple[int, ...]:
    return tuple(int(v) for v in text.split(",") if v.strip())


def _bool(text: str | bool) -> bool:
    if isinstance(text, bool):
        return text
    if text.lower() in ("1", "true", "yes", "on"):
        return True
    if text.lower() in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"cannot parse boolean value {text!r}")


def load_config(path: Path | str | None, overrides: dict | None = None) -> RunConfig:
    """Build the effective RunConfig: defaults, then the file, then overrides."""
    overrides = dict(overrides or {})
    parser = configparser.ConfigParser()
    if path is not None:
        path = Path(path)
        if not path.is_file():
            raise ConfigError(f"config file not found: {path}")
        try:
            parser.read(path)
        except configparser.Error as exc:
            raise ConfigError(f"cannot parse config file {path}: {exc}") from exc

    cfg = RunConfig()
    base = path.parent if path is not None else Path(".")
    try:
        cfg.seed = int(_get(parser, "run", "seed", cfg.seed))
        cfg.workers = int(_get(parser, "run", "workers", cfg.workers))
        cfg.paper_mode = _bool(_get(parser, "run", "paper_mode", cfg.paper_mode))
        out = _get(parser, "run", "out")
        if out is not None:
            cfg.out_dir = base / out

        manifest = _get(parser, "corpus", "manifest")
        annotations = _get(parser, "corpus", "annotations")
        features_csv = _get(parser, "corpus", "features_csv")
        cfg.manifest = base / manifest if manifest else None
        cfg.annotations = base / annotations if annotations else None
        cfg.features_csv = base / features_csv if features_csv else None
        cfg.sample_rate = int(_get(parser, "corpus", "sample_rate", cfg.sample_rate))

        cfg.features = FeatureConfig(
            feature_kind=_get(parser, "features", "kind", "mfcc"),
            n_mfcc=int(_get(parser, "features", "n_mfcc", 13)),
            n_filters=int(_get(parser, "features", "n_filters", 60)),
            frame_length=int(_get(parser, "features", "frame_length", 2048)),
            n_sections=int(_get(parser, "features", "sections", 1)),
            include_deltas=_bool(_get(parser, "features", "deltas", True)),
            window=_get(parser, "features", "window", "hamming"),
            free_mode=_bool(_get(parser, "features", "free_mode", False)),
        )

        grid = GridConfig()
        grid.family = _get(parser, "classifier", "family", grid.family)
        for key, kind in [
            ("lr_nu1", "float"),
            ("lr_nu2", "float"),
            ("svm_c", "float"),
            ("svm_gamma", "float"),
            ("mlp_l2", "float"),
            ("mlp_lr", "float"),
            ("knn_k", "int"),
            ("knn_leaf", "int"),
            ("mlp_hidden", "int"),
        ]:
            raw = _get(parser, "classifier", key)
            if raw is not None:
                setattr(grid, key, _floats(raw) if kind == "float" else _ints(raw))
        kernels = _get(parser, "classifier", "svm_kernel")
        if kernels is not None:
            grid.svm_kernel = tuple(k.strip() for k in kernels.split(","))
        grid.mlp_epochs = int(_get(parser, "classifier", "mlp_epochs", grid.mlp_epochs))
        class_weighted_raw = _get(parser, "classifier", "class_weighted")
        if class_weighted_raw is not None:
            grid.class_weighted = _bool(class_weighted_raw)
        grid.standardize = _get(parser, "classifier", "standardize", grid.standardize)
        cfg.grid = grid

        cfg.n_outer = int(_get(parser, "folds", "outer", cfg.n_outer))
        cfg.n_inner_a = int(_get(parser, "folds", "inner_a", cfg.n_inner_a))
        cfg.n_inner_b = int(_get(parser, "folds", "inner_b", cfg.n_inner_b))

        cfg.scoring_mode = _get(parser, "scoring", "mode", cfg.scoring_mode)
        gamma = _get(parser, "scoring", "gamma")
        cfg.gamma = float(gamma) if gamma is not None else None

        preset = _get(parser, "synth", "preset")
        cfg.synth_preset = preset
        if preset is not None:
            cfg.synth = preset_config(preset, seed=cfg.seed)
        else:
            cfg.synth = SynthConfig(
                patients_per_class=int(_get(parser, "synth", "patients_per_class", 10)),
                coughs_per_patient=int(_get(parser, "synth", "coughs_per_patient", 8)),
                separability=float(_get(parser, "synth", "separability", 1.0)),
                snr_db=float(_get(parser, "synth", "snr_db", 30.0)),
                seed=cfg.seed,
                sample_rate=cfg.sample_rate,
            )

        max_feats = _get(parser, "sfs", "max_features")
        cfg.sfs_max_features = int(max_feats) if max_feats is not None else None
        cfg.sfs_outer_fold = int(_get(parser, "sfs", "outer_fold", cfg.sfs_outer_fold))

        spec_text = _get(parser, "report", "specificities")
        if spec_text is not None:
            cfg.specificities = _floats(spec_text)
    except (ValueError, KeyError) as exc:
        raise ConfigError(f"invalid config value: {exc}") from exc

    _apply_overrides(cfg, overrides)
    # class imbalance handling defaults off but is part of the locked
    # paper-mode recipe; an explicit config value still wins
    if cfg.paper_mode and class_weighted_raw is None:
        cfg.grid.class_weighted = True
    cfg.validate()
    return cfg


def _apply_overrides(cfg: RunConfig, overrides: dict) -> None:
    if overrides.get("seed") is not None:
        cfg.seed = int(overrides["seed"])
        cfg.synth = replace_seed(cfg.synth, cfg.seed)
    if overrides.get("workers") is not None:
        cfg.workers = int(overrides["workers"])
    if overrides.get("paper_mode"):
        cfg.paper_mode = True
    if overrides.get("out") is not None:
        cfg.out_dir = Path(overrides["out"])
    if overrides.get("manifest") is not None:
        cfg.manifest = Path(overrides["manifest"])
    if overrides.get("annotations") is not None:
        cfg.annotations = Path(overrides["annotations"])
    if overrides.get("features_csv") is not None:
        cfg.features_csv = Path(overrides["features_csv"])
    if overrides.get("preset") is not None:
        cfg.synth_preset = overrides["preset"]
        cfg.synth = preset_config(overrides["preset"], seed=cfg.seed)
    if overrides.get("max_features") is not None:
        cfg.sfs_max_features = int(overrides["max_features"])


def replace_seed(synth: SynthConfig, seed: int) -> SynthConfig:
    from dataclasses import replace

    return replace(synth, seed=seed)


def effective_config_text(cfg: RunConfig) -> str:
    """The resolved configuration as INI text, echoed into every run
    directory so a run is reproducible from its outputs alone."""
    f = cfg.features
    g = cfg.grid
    s = cfg.synth
    lines = [
        "[run]",
        f"seed = {cfg.seed}",
        f"workers = {cfg.workers}",
        f"paper_mode = {str(cfg.paper_mode).lower()}",
        f"out = {cfg.out_dir}",
        "",
        "[corpus]",
        f"manifest = {cfg.manifest or ''}",
        f"annotations = {cfg.annotations or ''}",
        f"features_csv = {cfg.features_csv or ''}",
        f"sample_rate = {cfg.sample_rate}",
        "",
        "[features]",
        f"kind = {f.feature_kind}",
        f"n_mfcc = {f.n_mfcc}",
        f"n_filters = {f.n_filters}",
        f"frame_length = {f.frame_length}",
        f"sections = {f.n_sections}",
        f"deltas = {str(f.include_deltas).lower()}",
        f"window = {f.window}",
        f"free_mode = {str(f.free_mode).lower()}",
        "",
        "[classifier]",
        f"family = {g.family}",
        f"lr_nu1 = {','.join(repr(v) for v in g.lr_nu1)}",
        f"lr_nu2 = {','.join(repr(v) for v in g.lr_nu2)}",
        f"knn_k = {','.join(str(v) for v in g.knn_k)}",
        f"knn_leaf = {','.join(str(v) for v in g.knn_leaf)}",
        f"svm_c = {','.join(repr(v) for v in g.svm_c)}",
        f"svm_gamma = {','.join(repr(v) for v in g.svm_gamma)}",
        f"svm_kernel = {','.join(g.svm_kernel)}",
        f"mlp_hidden = {','.join(str(v) for v in g.mlp_hidden)}",
        f"mlp_l2 = {','.join(repr(v) for v in g.mlp_l2)}",
        f"mlp_lr = {','.join(repr(v) for v in g.mlp_lr)}",
        f"mlp_epochs = {g.mlp_epochs}",
        f"class_weighted = {str(g.class_weighted).lower()}",
        f"standardize = {g.standardize}",
        "",
        "[folds]",
        f"outer = {cfg.n_outer}",
        f"inner_a = {cfg.n_inner_a}",
        f"inner_b = {cfg.n_inner_b}",
        "",
        "[scoring]",
        f"mode = {cfg.scoring_mode}",
        f"gamma = {'' if cfg.gamma is None else repr(cfg.gamma)}",
        "",
        "[synth]",
        f"preset = {cfg.synth_preset or ''}",
        f"patients_per_class = {s.patients_per_class}",
        f"coughs_per_patient = {s.coughs_per_patient}",
        f"separability = {repr(s.separability)}",
        f"snr_db = {repr(s.snr_db)}",
        "",
        "[sfs]",
        f"max_features = {'' if cfg.sfs_max_features is None else cfg.sfs_max_features}",
        f"outer_fold = {cfg.sfs_outer_fold}",
        "",
        "[report]",
        f"specificities = {','.join(repr(v) for v in cfg.specificities)}",
    ]
    return "\n".join(lines) + "\n"
