"""Linear softmax classifier and the real-vs-synthetic transfer audit.

backbone: linear. The classifier is multinomial logistic regression on
embedded features, trained with minibatch SGD plus momentum from a zero
initialization. It stands in for a deep backbone in the audit protocol:
what matters is that the identical model, optimizer and budget are
applied to real and synthetic training sets, so any gap in test AUC is
attributable to the data.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import embedding, stats
from .errors import DivergenceDetected, ShapeMismatch, SingleClass
from .stats import BootstrapCI, ConfusionMatrix, RocCurve
from .tensor_io import LabeledDataset


@dataclass
class TrainConfig:
    learning_rate: float = 1e-4
    momentum: float = 0.9
    epochs: int = 20
    batch_size: int = 32
    seed: int = 0

    def __post_init__(self):
        if self.learning_rate <= 0.0:
            raise ValueError("learning_rate must be positive")
        if not 0.0 <= self.momentum < 1.0:
            raise ValueError("momentum must be in [0, 1)")
        if self.epochs < 1:
            raise ValueError("epochs must be at least 1")
        if self.batch_size < 1:
            raise ValueError("batch_size must be at least 1")

    def to_dict(self) -> dict:
        return {
            "learning_rate": self.learning_rate,
            "momentum": self.momentum,
            "epochs": self.epochs,
            "batch_size": self.batch_size,
            "seed": self.seed,
        }


@dataclass
class LinearClassifier:
    weights: np.ndarray  # (K, d)
    bias: np.ndarray     # (K,)
    loss_history: list[float] = field(default_factory=list)

    @property
    def n_classes(self) -> int:
        return self.weights.shape[0]

    @property
    def feature_dim(self) -> int:
        return self.weights.shape[1]


def _softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=1, keepdims=True)


def _check_features(model: LinearClassifier, features: np.ndarray) -> np.ndarray:
    x = np.asarray(features, dtype=np.float64)
    if x.ndim != 2:
        raise ValueError("features must be (N, d)")
    if x.shape[1] != model.feature_dim:
        raise ShapeMismatch(
            f"feature width {x.shape[1]}, model expects {model.feature_dim}"
        )
    return x


def loss_and_grad(model: LinearClassifier, features, labels):
    """Mean cross-entropy and its analytic gradient (d_weights, d_bias)."""
    x = _check_features(model, features)
    y = np.asarray(labels, dtype=np.int64)
    if y.shape[0] != x.shape[0]:
        raise ValueError("features and labels must align")
    k = model.n_classes
    if np.any(y < 0) or np.any(y >= k):
        raise ValueError(f"label outside [0, {k})")
    n = x.shape[0]
    logits = x @ model.weights.T + model.bias
    # log-sum-exp form keeps the loss finite for large logits
    shifted = logits - logits.max(axis=1, keepdims=True)
    log_probs = shifted - np.log(np.exp(shifted).sum(axis=1, keepdims=True))
    loss = float(-log_probs[np.arange(n), y].mean())
    g = np.exp(log_probs)
    g[np.arange(n), y] -= 1.0
    g /= n
    return loss, (g.T @ x, g.sum(axis=0))


def predict_proba(model: LinearClassifier, features) -> np.ndarray:
    x = _check_features(model, features)
    return _softmax(x @ model.weights.T + model.bias)


def train(features, labels, config: TrainConfig, n_classes: int | None = None) -> LinearClassifier:
    """Minibatch SGD with momentum from zero weights; seeded shuffles.

    The last incomplete batch of each epoch is kept. Loss is recorded
    before training and after every epoch; a non-finite loss aborts.
    """
    x = np.asarray(features, dtype=np.float64)
    y = np.asarray(labels, dtype=np.int64)
    if x.ndim != 2 or y.shape[0] != x.shape[0]:
        raise ValueError("features must be (N, d) aligned with labels")
    if x.shape[0] == 0:
        raise ValueError("empty training set")
    present = np.unique(y)
    if present.size < 2:
        raise SingleClass("training labels contain a single class")
    k = int(n_classes if n_classes is not None else y.max() + 1)
    if np.any(y < 0) or np.any(y >= k):
        raise ValueError(f"label outside [0, {k})")
    model = LinearClassifier(
        weights=np.zeros((k, x.shape[1])),
        bias=np.zeros(k),
    )
    vel_w = np.zeros_like(model.weights)
    vel_b = np.zeros_like(model.bias)
    rng = np.random.default_rng(config.seed)
    loss, _ = loss_and_grad(model, x, y)
    model.loss_history.append(loss)
    n = x.shape[0]
    for _ in range(config.epochs):
        perm = rng.permutation(n)
        for start in range(0, n, config.batch_size):
            batch = perm[start:start + config.batch_size]
            _, (gw, gb) = loss_and_grad(model, x[batch], y[batch])
            vel_w = config.momentum * vel_w + gw
            vel_b = config.momentum * vel_b + gb
            model.weights -= config.learning_rate * vel_w
            model.bias -= config.learning_rate * vel_b
        loss, _ = loss_and_grad(model, x, y)
        if not np.isfinite(loss):
            raise DivergenceDetected(f"loss became {loss} during training")
        model.loss_history.append(loss)
    return model


# ---------------------------------------------------------------------------
# evaluation and the paired audit


@dataclass
class ClassifierEvaluation:
    auc_macro: float
    ci: BootstrapCI
    per_class_auc: list[float]
    curves: list[RocCurve]
    macro_curve: RocCurve
    confusion: ConfusionMatrix

    def to_dict(self) -> dict:
        return {
            "auc_macro": self.auc_macro,
            "ci": self.ci.to_dict(),
            "per_class_auc": self.per_class_auc,
            "confusion": self.confusion.to_lists(),
        }


@dataclass
class DiversityAudit:
    backbone: str
    config: TrainConfig
    real: ClassifierEvaluation
    synth: ClassifierEvaluation
    auc_gap: float

    def to_dict(self) -> dict:
        return {
            "backbone": self.backbone,
            "config": self.config.to_dict(),
            "f_real": self.real.to_dict(),
            "f_synth": self.synth.to_dict(),
            "auc_gap": self.auc_gap,
        }


def _macro_auc_rows(rows: np.ndarray, k: int) -> float:
    """Mean one-vs-rest AUC from stacked (probs | label) rows.

    Classes missing a side in the resample are skipped; refining a
    piecewise-linear curve onto a union grid preserves its integral, so
    this mean equals the macro-averaged curve's AUC up to roundoff.
    """
    probs = rows[:, :k]
    labels = rows[:, k].astype(np.int64)
    aucs = []
    for c in range(k):
        y = (labels == c).astype(np.int64)
        pos = int(y.sum())
        if 0 < pos < y.size:
            aucs.append(stats.roc_curve(probs[:, c], y).auc)
    if not aucs:
        return 0.5
    return float(np.mean(aucs))


def evaluate(model: LinearClassifier, features, labels, n_resamples: int = 2000,
             alpha: float = 0.05, seed: int = 0) -> ClassifierEvaluation:
    """One-vs-rest ROC per class, macro average, BCa interval, confusion."""
    x = _check_features(model, features)
    y = np.asarray(labels, dtype=np.int64)
    probs = predict_proba(model, x)
    k = model.n_classes
    curves = []
    per_class = []
    for c in range(k):
        curve = stats.roc_curve(probs[:, c], stats.one_vs_rest(y, c))
        curves.append(curve)
        per_class.append(curve.auc)
    macro_curve = stats.macro_average(curves)
    rows = np.column_stack([probs, y.astype(np.float64)])
    ci = stats.bca_interval(
        rows, lambda r: _macro_auc_rows(r, k), n_resamples, alpha, seed
    )
    return ClassifierEvaluation(
        auc_macro=macro_curve.auc,
        ci=ci,
        per_class_auc=per_class,
        curves=curves,
        macro_curve=macro_curve,
        confusion=stats.confusion(probs, y),
    )


def diversity_audit(real_train: LabeledDataset, synth_train: LabeledDataset,
                    test: LabeledDataset, model: "embedding.EmbeddingModel",
                    config: TrainConfig | None = None, n_resamples: int = 2000,
                    alpha: float = 0.05, bootstrap_seed: int = 0) -> DiversityAudit:
    """Train twins on real and synthetic data; compare test AUC.

    Both classifiers get the same embedded feature space, config, seed
    and bootstrap, so the protocol is symmetric in its two training sets.
    """
    for name, ds in (("real_train", real_train), ("synth_train", synth_train),
                     ("test", test)):
        if len(ds) == 0:
            raise ValueError(f"{name} is empty")
    if config is None:
        config = TrainConfig()
    test_x = embedding.transform(model, test)
    test_y = test.label_codes()
    evals = []
    for ds in (real_train, synth_train):
        clf = train(embedding.transform(model, ds), ds.label_codes(), config, n_classes=3)
        evals.append(evaluate(clf, test_x, test_y, n_resamples, alpha, bootstrap_seed))
    real_eval, synth_eval = evals
    return DiversityAudit(
        backbone="linear",
        config=config,
        real=real_eval,
        synth=synth_eval,
        auc_gap=real_eval.auc_macro - synth_eval.auc_macro,
    )
