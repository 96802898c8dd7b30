"""Four classifier families with a uniform train / predict-probability contract.

All four are implemented natively on numpy:
  - logistic regression with an elastic-net penalty, trained by full-batch
    gradient descent (l1 handled by sub-gradient) with backtracking line
    search;
  - k-nearest neighbours with Euclidean distance (the leaf-size
    hyperparameter tunes a spatial index only and never changes
    predictions; the exact brute-force search used here satisfies that
    trivially);
  - a soft-margin SVM (linear or RBF kernel) trained by deterministic SMO,
    with a Platt-style sigmoid fitted on training decision values to emit
    probabilities;
  - a one-hidden-layer ReLU MLP with sigmoid output, trained by seeded
    per-example stochastic gradient descent with an l2 penalty.

Training is deterministic: identical (data, spec, seed) give identical
models and predictions.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import ClassVar

import numpy as np

from .errors import ConfigError, DataError, NumericError

MODEL_FORMAT_VERSION = 1

LR_MAX_ITER = 10_000
LR_LOSS_TOL = 1e-7
SVM_KKT_TOL = 1e-4
SVM_MAX_PASSES = 2_000
MLP_DEFAULT_EPOCHS = 500


# ---------------------------------------------------------------------------
# Specs


@dataclass(frozen=True)
class BaseSpec:
    seed: int = 0
    class_weighted: bool = False
    standardize: bool | None = None  # None = family default

    @property
    def wants_standardize(self) -> bool:
        if self.standardize is not None:
            return self.standardize
        return self.family in ("svm", "mlp")  # type: ignore[attr-defined]


@dataclass(frozen=True)
class LRSpec(BaseSpec):
    """Elastic-net logistic regression.

    `nu1` is the regularization strength in the inverse sense: the overall
    penalty weight is lambda = 1 / nu1 (a huge nu1 means almost no
    penalty). `nu2` and `nu3` weight the l1 and l2 terms; nu3 defaults to
    1 - nu2.
    """

    family: ClassVar[str] = "lr"
    nu1: float = 1.0
    nu2: float = 0.5
    nu3: float | None = None

    def __post_init__(self) -> None:
        if self.nu1 <= 0:
            raise ConfigError("nu1 must be positive")
        if self.nu3 is None:
            object.__setattr__(self, "nu3", 1.0 - self.nu2)
        if self.nu2 < 0 or self.nu3 < 0:
            raise ConfigError("nu2 and nu3 must be nonnegative")


@dataclass(frozen=True)
class KNNSpec(BaseSpec):
    family: ClassVar[str] = "knn"
    n_neighbors: int = 10
    leaf_size: int = 30

    def __post_init__(self) -> None:
        if self.n_neighbors < 1:
            raise ConfigError("n_neighbors must be >= 1")
        if self.leaf_size < 1:
            raise ConfigError("leaf_size must be >= 1")


@dataclass(frozen=True)
class SVMSpec(BaseSpec):
    family: ClassVar[str] = "svm"
    c: float = 1.0  # soft-margin regularization strength
    kernel: str = "rbf"
    gamma: float = 1.0  # RBF kernel coefficient

    def __post_init__(self) -> None:
        if self.c <= 0:
            raise ConfigError("c must be positive")
        if self.kernel not in ("linear", "rbf"):
            raise ConfigError(f"unknown kernel {self.kernel!r}")
        if self.gamma <= 0:
            raise ConfigError("gamma must be positive")


@dataclass(frozen=True)
class MLPSpec(BaseSpec):
    family: ClassVar[str] = "mlp"
    n_hidden: int = 10
    l2: float = 1e-4
    learning_rate: float = 0.1
    epochs: int = MLP_DEFAULT_EPOCHS

    def __post_init__(self) -> None:
        if self.n_hidden < 1:
            raise ConfigError("n_hidden must be >= 1")
        if self.l2 < 0 or self.learning_rate < 0:
            raise ConfigError("l2 and learning_rate must be nonnegative")
        if self.epochs < 1:
            raise ConfigError("epochs must be >= 1")


ClassifierSpec = LRSpec | KNNSpec | SVMSpec | MLPSpec

_SPEC_CLASSES = {"lr": LRSpec, "knn": KNNSpec, "svm": SVMSpec, "mlp": MLPSpec}


def regularization_strength(spec: ClassifierSpec) -> float:
    """Comparable 'how strongly regularized' scale, used to break AUC ties
    in grid search in favour of the simpler model."""
    if isinstance(spec, LRSpec):
        return 1.0 / spec.nu1
    if isinstance(spec, KNNSpec):
        return float(spec.n_neighbors)
    if isinstance(spec, SVMSpec):
        return 1.0 / spec.c
    return spec.l2


# ---------------------------------------------------------------------------
# Trained models


@dataclass
class Scaler:
    mean: np.ndarray
    scale: np.ndarray

    @classmethod
    def fit(cls, X: np.ndarray) -> "Scaler":
        mean = X.mean(axis=0)
        scale = X.std(axis=0)
        scale[scale == 0.0] = 1.0
        return cls(mean=mean, scale=scale)

    def transform(self, X: np.ndarray) -> np.ndarray:
        return (X - self.mean) / self.scale


@dataclass
class TrainedModel:
    """Base for all trained classifiers; immutable by convention after
    training. `decision_threshold` carries the EER threshold fitted in the
    inner cross-validation loop, when one has been attached."""

    spec: ClassifierSpec
    feature_dim: int
    scaler: Scaler | None = None
    n_iterations: int = 0
    final_loss: float | None = None
    decision_threshold: float | None = None

    def with_threshold(self, threshold: float) -> "TrainedModel":
        return replace(self, decision_threshold=threshold)

    def _prepare(self, x: np.ndarray) -> np.ndarray:
        arr = np.asarray(x, dtype=np.float64)
        single = arr.ndim == 1
        if single:
            arr = arr[np.newaxis, :]
        if arr.ndim != 2 or arr.shape[1] != self.feature_dim:
            raise NumericError(f"expected feature dimension {self.feature_dim}, got shape {np.shape(x)}")
        if self.scaler is not None:
            arr = self.scaler.transform(arr)
        return arr

    def predict_proba(self, x: np.ndarray):
        arr = self._prepare(x)
        probs = self._proba(arr)
        return float(probs[0]) if np.ndim(x) == 1 else probs

    def _proba(self, X: np.ndarray) -> np.ndarray:  # pragma: no cover - abstract
        raise NotImplementedError


def predict_proba(model: TrainedModel, x: np.ndarray):
    return model.predict_proba(x)


def _sigmoid(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z, dtype=np.float64)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


@dataclass
class LogisticModel(TrainedModel):
    intercept: float = 0.0
    coef: np.ndarray = field(default_factory=lambda: np.zeros(0))
    loss_trace: list[float] = field(default_factory=list, repr=False)

    def _proba(self, X: np.ndarray) -> np.ndarray:
        return _sigmoid(self.intercept + X @ self.coef)


@dataclass
class KnnModel(TrainedModel):
    train_X: np.ndarray = field(default_factory=lambda: np.zeros((0, 0)), repr=False)
    train_y: np.ndarray = field(default_factory=lambda: np.zeros(0), repr=False)

    def _proba(self, X: np.ndarray) -> np.ndarray:
        k = self.spec.n_neighbors
        out = np.empty(len(X))
        for i, q in enumerate(X):
            d2 = np.sum((self.train_X - q) ** 2, axis=1)
            nearest = np.argsort(d2, kind="stable")[:k]
            out[i] = self.train_y[nearest].mean()
        return out


@dataclass
class SvmModel(TrainedModel):
    support_X: np.ndarray = field(default_factory=lambda: np.zeros((0, 0)), repr=False)
    dual_coef: np.ndarray = field(default_factory=lambda: np.zeros(0), repr=False)  # alpha_i * y_i
    bias: float = 0.0
    platt_a: float = -1.0
    platt_b: float = 0.0

    def decision_value(self, x: np.ndarray):
        arr = self._prepare(x)
        vals = self._decision(arr)
        return float(vals[0]) if np.ndim(x) == 1 else vals

    def _decision(self, X: np.ndarray) -> np.ndarray:
        if self.spec.kernel == "linear":
            K = X @ self.support_X.T
        else:
            d2 = ((X[:, np.newaxis, :] - self.support_X[np.newaxis, :, :]) ** 2).sum(axis=2)
            K = np.exp(-self.spec.gamma * d2)
        return K @ self.dual_coef + self.bias

    def _proba(self, X: np.ndarray) -> np.ndarray:
        return _sigmoid(-(self.platt_a * self._decision(X) + self.platt_b))


@dataclass
class MlpModel(TrainedModel):
    w1: np.ndarray = field(default_factory=lambda: np.zeros((0, 0)), repr=False)
    b1: np.ndarray = field(default_factory=lambda: np.zeros(0), repr=False)
    w2: np.ndarray = field(default_factory=lambda: np.zeros(0), repr=False)
    b2: float = 0.0

    def _proba(self, X: np.ndarray) -> np.ndarray:
        hidden = np.maximum(X @ self.w1 + self.b1, 0.0)
        return _sigmoid(hidden @ self.w2 + self.b2)


# ---------------------------------------------------------------------------
# Training


def _sample_weights(y: np.ndarray, class_weighted: bool) -> np.ndarray:
    if not class_weighted:
        return np.ones(len(y))
    n = len(y)
    n_pos = int(y.sum())
    n_neg = n - n_pos
    w = np.where(y == 1, n / (2.0 * n_pos), n / (2.0 * n_neg))
    return w


def _check_training_data(X: np.ndarray, y: np.ndarray, need_both_classes: bool = True) -> tuple[np.ndarray, np.ndarray]:
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if X.ndim != 2 or len(X) != len(y):
        raise DataError(f"bad training shapes: X {X.shape}, y {y.shape}")
    if len(X) == 0:
        raise DataError("empty training set")
    if not np.all(np.isfinite(X)):
        raise NumericError("training features contain non-finite values")
    if not np.all((y == 0) | (y == 1)):
        raise DataError("labels must be binary 0/1")
    if need_both_classes and (y.min() == y.max()):
        raise DataError("training data contains a single class")
    return X, y


def lr_loss_and_gradient(
    intercept: float,
    coef: np.ndarray,
    X: np.ndarray,
    y: np.ndarray,
    weights: np.ndarray,
    lam: float,
    nu2: float,
    nu3: float,
) -> tuple[float, float, np.ndarray]:
    """Penalized logistic loss and its (sub)gradient.

    loss = weighted mean log-loss + lam * (nu2 * ||coef||_1 + nu3 * ||coef||_2^2);
    the intercept is unpenalized and the l1 subgradient at zero is taken
    as zero.
    """
    z = intercept + X @ coef
    signed = np.where(y == 1, -z, z)
    losses = np.logaddexp(0.0, signed)  # log(1 + exp(-y~ z)) stably
    w_total = weights.sum()
    data_loss = float((weights * losses).sum() / w_total)
    penalty = lam * (nu2 * np.abs(coef).sum() + nu3 * float(coef @ coef))
    residual = weights * (_sigmoid(z) - y) / w_total
    grad_coef = X.T @ residual + lam * (nu2 * np.sign(coef) + 2.0 * nu3 * coef)
    grad_intercept = float(residual.sum())
    return data_loss + penalty, grad_intercept, grad_coef


def train_lr(X: np.ndarray, y: np.ndarray, spec: LRSpec) -> LogisticModel:
    """Gradient descent with backtracking line search; stops when the loss
    improves by less than LR_LOSS_TOL or after LR_MAX_ITER iterations."""
    X, y = _check_training_data(X, y)
    scaler = Scaler.fit(X) if spec.wants_standardize else None
    Xs = scaler.transform(X) if scaler else X
    weights = _sample_weights(y, spec.class_weighted)
    lam = 1.0 / spec.nu1

    intercept = 0.0
    coef = np.zeros(X.shape[1])
    loss, g_a, g_b = lr_loss_and_gradient(intercept, coef, Xs, y, weights, lam, spec.nu2, spec.nu3)
    trace = [loss]
    iterations = 0
    for _ in range(LR_MAX_ITER):
        gnorm2 = g_a * g_a + float(g_b @ g_b)
        if gnorm2 == 0.0:
            break
        step, accepted = 1.0, False
        while step > 1e-20:
            cand_a = intercept - step * g_a
            cand_b = coef - step * g_b
            cand_loss, cand_ga, cand_gb = lr_loss_and_gradient(
                cand_a, cand_b, Xs, y, weights, lam, spec.nu2, spec.nu3
            )
            if cand_loss <= loss - 1e-4 * step * gnorm2:
                accepted = True
                break
            step *= 0.5
        if not accepted:
            break
        improvement = loss - cand_loss
        intercept, coef, loss, g_a, g_b = cand_a, cand_b, cand_loss, cand_ga, cand_gb
        trace.append(loss)
        iterations += 1
        if improvement < LR_LOSS_TOL:
            break
    return LogisticModel(
        spec=spec,
        feature_dim=X.shape[1],
        scaler=scaler,
        n_iterations=iterations,
        final_loss=loss,
        intercept=intercept,
        coef=coef,
        loss_trace=trace,
    )


def train_knn(X: np.ndarray, y: np.ndarray, spec: KNNSpec) -> KnnModel:
    X, y = _check_training_data(X, y, need_both_classes=False)
    if spec.n_neighbors > len(X):
        raise DataError(f"n_neighbors {spec.n_neighbors} exceeds training size {len(X)}")
    scaler = Scaler.fit(X) if spec.wants_standardize else None
    Xs = scaler.transform(X) if scaler else X
    return KnnModel(spec=spec, feature_dim=X.shape[1], scaler=scaler, train_X=Xs.copy(), train_y=y.copy())


def _kernel_matrix(X: np.ndarray, spec: SVMSpec) -> np.ndarray:
    if spec.kernel == "linear":
        return X @ X.T
    d2 = ((X[:, np.newaxis, :] - X[np.newaxis, :, :]) ** 2).sum(axis=2)
    return np.exp(-spec.gamma * d2)


def fit_platt(decisions: np.ndarray, y: np.ndarray, max_iter: int = 100) -> tuple[float, float]:
    """Fit P(y=1 | f) = sigmoid(-(A f + B)) on training decision values by
    Newton descent with backtracking, using the standard smoothed targets."""
    n_pos = float(np.sum(y == 1))
    n_neg = float(len(y) - n_pos)
    t = np.where(y == 1, (n_pos + 1.0) / (n_pos + 2.0), 1.0 / (n_neg + 2.0))
    a, b = 0.0, float(np.log((n_neg + 1.0) / (n_pos + 1.0)))

    def objective(a_: float, b_: float) -> float:
        z = a_ * decisions + b_
        return float(np.sum(np.logaddexp(0.0, z) - (1.0 - t) * z))

    obj = objective(a, b)
    for _ in range(max_iter):
        z = a * decisions + b
        p = _sigmoid(-z)
        dz = t - p  # dF/dz per point
        g_a = float(np.sum(decisions * dz))
        g_b = float(np.sum(dz))
        if abs(g_a) < 1e-10 and abs(g_b) < 1e-10:
            break
        w = p * (1.0 - p)
        h_aa = float(np.sum(decisions * decisions * w)) + 1e-12
        h_ab = float(np.sum(decisions * w))
        h_bb = float(np.sum(w)) + 1e-12
        det = h_aa * h_bb - h_ab * h_ab
        if abs(det) < 1e-18:
            break
        da = -(h_bb * g_a - h_ab * g_b) / det
        db = -(h_aa * g_b - h_ab * g_a) / det
        step = 1.0
        while step > 1e-10:
            cand = objective(a + step * da, b + step * db)
            if cand < obj - 1e-12:
                a, b, obj = a + step * da, b + step * db, cand
                break
            step *= 0.5
        else:
            break
    return a, b


def train_svm(X: np.ndarray, y01: np.ndarray, spec: SVMSpec) -> SvmModel:
    """Deterministic SMO on the soft-margin dual.

    Second multipliers are chosen by the maximal |E_i - E_j| heuristic;
    scanning stops when a full pass changes nothing (KKT satisfied within
    SVM_KKT_TOL). Probabilities come from a Platt sigmoid fitted on the
    training decision values.
    """
    X, y01 = _check_training_data(X, y01)
    scaler = Scaler.fit(X) if spec.wants_standardize else None
    Xs = scaler.transform(X) if scaler else X
    y = np.where(y01 == 1, 1.0, -1.0)
    weights = _sample_weights(y01, spec.class_weighted)
    c_i = spec.c * weights
    n = len(Xs)

    K = _kernel_matrix(Xs, spec)
    alpha = np.zeros(n)
    bias = 0.0
    f = np.zeros(n)  # decision values for training points

    def try_pair(i: int, j: int) -> bool:
        """Analytic two-multiplier update; returns True when alphas moved."""
        nonlocal bias, f
        e_i = f[i] - y[i]
        e_j = f[j] - y[j]
        if y[i] != y[j]:
            low = max(0.0, alpha[j] - alpha[i])
            high = min(c_i[j], c_i[i] + alpha[j] - alpha[i])
        else:
            low = max(0.0, alpha[i] + alpha[j] - c_i[i])
            high = min(c_i[j], alpha[i] + alpha[j])
        if high - low < 1e-12:
            return False
        eta = K[i, i] + K[j, j] - 2.0 * K[i, j]
        if eta <= 1e-12:
            return False
        alpha_j_new = float(np.clip(alpha[j] + y[j] * (e_i - e_j) / eta, low, high))
        if abs(alpha_j_new - alpha[j]) < 1e-12:
            return False
        alpha_i_new = alpha[i] + y[i] * y[j] * (alpha[j] - alpha_j_new)
        d_i = (alpha_i_new - alpha[i]) * y[i]
        d_j = (alpha_j_new - alpha[j]) * y[j]
        b1 = bias - e_i - d_i * K[i, i] - d_j * K[i, j]
        b2 = bias - e_j - d_i * K[i, j] - d_j * K[j, j]
        if 0.0 < alpha_i_new < c_i[i]:
            new_bias = b1
        elif 0.0 < alpha_j_new < c_i[j]:
            new_bias = b2
        else:
            new_bias = 0.5 * (b1 + b2)
        f = f + d_i * K[i] + d_j * K[j] + (new_bias - bias)
        alpha[i], alpha[j], bias = alpha_i_new, alpha_j_new, new_bias
        return True

    passes = 0
    while passes < SVM_MAX_PASSES:
        changed = 0
        for i in range(n):
            r = (f[i] - y[i]) * y[i]
            if not ((r < -SVM_KKT_TOL and alpha[i] < c_i[i]) or (r > SVM_KKT_TOL and alpha[i] > 0.0)):
                continue
            # Second choice: largest |E_i - E_j| first, falling back through
            # the rest so a clipped pair cannot stall the whole sweep.
            order = np.argsort(-np.abs((f - y) - (f[i] - y[i])), kind="stable")
            for j in order:
                if j != i and try_pair(i, int(j)):
                    changed += 1
                    break
        passes += 1
        if changed == 0:
            break

    support = alpha > 1e-12
    if not support.any():  # fully regularized-away model: keep one row for shape
        support = np.zeros(n, dtype=bool)
        support[0] = True
    decisions = f
    platt_a, platt_b = fit_platt(decisions, y01)
    hinge = np.maximum(0.0, 1.0 - y * f)
    dual = alpha * y
    objective = 0.5 * float(dual @ K @ dual) + float(np.sum(c_i * hinge))
    return SvmModel(
        spec=spec,
        feature_dim=X.shape[1],
        scaler=scaler,
        n_iterations=passes,
        final_loss=objective,
        support_X=Xs[support].copy(),
        dual_coef=(alpha * y)[support],
        bias=bias,
        platt_a=platt_a,
        platt_b=platt_b,
    )


def glorot_limits(fan_in: int, fan_out: int) -> float:
    return float(np.sqrt(6.0 / (fan_in + fan_out)))


def mlp_loss_and_gradient(
    w1: np.ndarray,
    b1: np.ndarray,
    w2: np.ndarray,
    b2: float,
    X: np.ndarray,
    y: np.ndarray,
    weights: np.ndarray,
    l2: float,
) -> tuple[float, np.ndarray, np.ndarray, np.ndarray, float]:
    """Full-batch penalized cross-entropy loss and its backpropagated
    gradient; the l2 penalty is l2/(2n) * (||w1||^2 + ||w2||^2), biases
    unpenalized."""
    n = len(X)
    w_total = weights.sum()
    z1 = X @ w1 + b1
    hidden = np.maximum(z1, 0.0)
    z2 = hidden @ w2 + b2
    p = _sigmoid(z2)
    signed = np.where(y == 1, -z2, z2)
    data_loss = float((weights * np.logaddexp(0.0, signed)).sum() / w_total)
    penalty = l2 / (2.0 * n) * (float(np.sum(w1 * w1)) + float(np.sum(w2 * w2)))

    dz2 = weights * (p - y) / w_total
    g_w2 = hidden.T @ dz2 + (l2 / n) * w2
    g_b2 = float(dz2.sum())
    dh = np.outer(dz2, w2)
    dh[z1 <= 0.0] = 0.0
    g_w1 = X.T @ dh + (l2 / n) * w1
    g_b1 = dh.sum(axis=0)
    return data_loss + penalty, g_w1, g_b1, g_w2, g_b2


def train_mlp(X: np.ndarray, y: np.ndarray, spec: MLPSpec) -> MlpModel:
    """Per-example SGD over a fixed epoch budget with seeded shuffling.

    Weights start from a seeded uniform +-sqrt(6/(fan_in+fan_out)) draw,
    biases from zero. Raises NumericError if the loss becomes non-finite.
    """
    X, y = _check_training_data(X, y)
    scaler = Scaler.fit(X) if spec.wants_standardize else None
    Xs = scaler.transform(X) if scaler else X
    weights = _sample_weights(y, spec.class_weighted)
    n, dim = Xs.shape
    rng = np.random.Generator(np.random.PCG64(spec.seed))

    lim1 = glorot_limits(dim, spec.n_hidden)
    lim2 = glorot_limits(spec.n_hidden, 1)
    w1 = rng.uniform(-lim1, lim1, size=(dim, spec.n_hidden))
    b1 = np.zeros(spec.n_hidden)
    w2 = rng.uniform(-lim2, lim2, size=spec.n_hidden)
    b2 = 0.0

    lr = spec.learning_rate
    w_total = weights.sum()
    with np.errstate(over="ignore", invalid="ignore"):  # divergence is caught explicitly below
        for epoch in range(spec.epochs):
            for i in rng.permutation(n):
                x_i = Xs[i]
                z1 = x_i @ w1 + b1
                hidden = np.maximum(z1, 0.0)
                p = float(_sigmoid(np.array([hidden @ w2 + b2]))[0])
                scale = n * weights[i] / w_total
                dz2 = scale * (p - y[i])
                dh = dz2 * w2
                dh[z1 <= 0.0] = 0.0
                w2 -= lr * (dz2 * hidden + (spec.l2 / n) * w2)
                b2 -= lr * dz2
                w1 -= lr * (np.outer(x_i, dh) + (spec.l2 / n) * w1)
                b1 -= lr * dh
            if not (np.all(np.isfinite(w1)) and np.all(np.isfinite(w2))):
                raise NumericError(f"MLP training diverged at epoch {epoch + 1}")

    loss, *_ = mlp_loss_and_gradient(w1, b1, w2, b2, Xs, y, weights, spec.l2)
    if not np.isfinite(loss):
        raise NumericError("MLP training diverged (non-finite final loss)")
    return MlpModel(
        spec=spec,
        feature_dim=dim,
        scaler=scaler,
        n_iterations=spec.epochs * n,
        final_loss=loss,
        w1=w1,
        b1=b1,
        w2=w2,
        b2=b2,
    )


_TRAINERS = {"lr": train_lr, "knn": train_knn, "svm": train_svm, "mlp": train_mlp}


def train(X: np.ndarray, y: np.ndarray, spec: ClassifierSpec) -> TrainedModel:
    return _TRAINERS[spec.family](X, y, spec)


# ---------------------------------------------------------------------------
# Serialization


def spec_to_dict(spec: ClassifierSpec) -> dict:
    out = asdict(spec)
    out["family"] = spec.family
    return out


def spec_from_dict(data: dict) -> ClassifierSpec:
    data = dict(data)
    family = data.pop("family")
    if family not in _SPEC_CLASSES:
        raise DataError(f"unknown classifier family {family!r}")
    return _SPEC_CLASSES[family](**data)


def save_model(model: TrainedModel, path: Path | str) -> None:
    """Write a model as versioned JSON (family tag, dims, parameter arrays,
    spec echo)."""
    payload: dict = {
        "format_version": MODEL_FORMAT_VERSION,
        "family": model.spec.family,
        "spec": spec_to_dict(model.spec),
        "feature_dim": model.feature_dim,
        "n_iterations": model.n_iterations,
        "final_loss": model.final_loss,
        "decision_threshold": model.decision_threshold,
        "scaler": None
        if model.scaler is None
        else {"mean": model.scaler.mean.tolist(), "scale": model.scaler.scale.tolist()},
    }
    if isinstance(model, LogisticModel):
        payload["params"] = {"intercept": model.intercept, "coef": model.coef.tolist()}
    elif isinstance(model, KnnModel):
        payload["params"] = {"train_X": model.train_X.tolist(), "train_y": model.train_y.tolist()}
    elif isinstance(model, SvmModel):
        payload["params"] = {
            "support_X": model.support_X.tolist(),
            "dual_coef": model.dual_coef.tolist(),
            "bias": model.bias,
            "platt_a": model.platt_a,
            "platt_b": model.platt_b,
        }
    elif isinstance(model, MlpModel):
        payload["params"] = {
            "w1": model.w1.tolist(),
            "b1": model.b1.tolist(),
            "w2": model.w2.tolist(),
            "b2": model.b2,
        }
    else:  # pragma: no cover
        raise NumericError(f"cannot serialize model type {type(model).__name__}")
    Path(path).write_text(json.dumps(payload, sort_keys=True))


def load_model(path: Path | str) -> TrainedModel:
    path = Path(path)
    if not path.is_file():
        raise DataError(f"model file not found: {path}")
    payload = json.loads(path.read_text())
    version = payload.get("format_version")
    if version != MODEL_FORMAT_VERSION:
        raise DataError(f"{path}: unsupported model format version {version!r}")
    spec = spec_from_dict(payload["spec"])
    common = dict(
        spec=spec,
        feature_dim=payload["feature_dim"],
        n_iterations=payload["n_iterations"],
        final_loss=payload["final_loss"],
        decision_threshold=payload["decision_threshold"],
        scaler=None
        if payload["scaler"] is None
        else Scaler(mean=np.array(payload["scaler"]["mean"]), scale=np.array(payload["scaler"]["scale"])),
    )
    params = payload["params"]
    if spec.family == "lr":
        return LogisticModel(intercept=params["intercept"], coef=np.array(params["coef"]), **common)
    if spec.family == "knn":
        return KnnModel(train_X=np.array(params["train_X"]), train_y=np.array(params["train_y"]), **common)
    if spec.family == "svm":
        return SvmModel(
            support_X=np.array(params["support_X"]),
            dual_coef=np.array(params["dual_coef"]),
            bias=params["bias"],
            platt_a=params["platt_a"],
            platt_b=params["platt_b"],
            **common,
        )
    return MlpModel(
        w1=np.array(params["w1"]),
        b1=np.array(params["b1"]),
        w2=np.array(params["w2"]),
        b2=params["b2"],
        **common,
    )
