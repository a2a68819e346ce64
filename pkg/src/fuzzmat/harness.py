"""Dataset manifests, feature tables, a class-weighted one-hidden-layer MLP,
group-aware cross-validation and confusion-matrix reports."""
from __future__ import annotations

import csv
import json
import os
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Optional, Sequence

import numpy as np

from .features import FeatureVector, feature_pipeline, parse_pipeline
from .image import attach_mask, load_image


def worker_count():
    """Thread cap from FUZZMAT_THREADS (0 or unset: let the executor decide)."""
    raw = os.environ.get("FUZZMAT_THREADS", "").strip()
    try:
        n = int(raw) if raw else 0
    except ValueError:
        raise ValueError(f"FUZZMAT_THREADS must be an integer, got {raw!r}") from None
    return None if n <= 0 else n


def _ordered_map(fn, items):
    workers = worker_count()
    if workers == 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


# ---------------------------------------------------------------- manifests


@dataclass(frozen=True)
class ManifestRecord:
    path: str
    label: str
    group: str
    mask: Optional[str] = None


@dataclass
class DatasetManifest:
    records: list
    source: Optional[str] = None

    def __len__(self):
        return len(self.records)

    def __iter__(self):
        return iter(self.records)

    @property
    def classes(self):
        return sorted({r.label for r in self.records})


def load_manifest(path) -> DatasetManifest:
    """Read a ``path,label,group[,mask]`` CSV; relative paths resolve against its directory."""
    path = os.fspath(path)
    base = os.path.dirname(os.path.abspath(path))
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        fields = [f.strip() for f in (reader.fieldnames or [])]
        missing = [c for c in ("path", "label", "group") if c not in fields]
        if missing:
            raise ValueError(f"{path}: manifest is missing column(s) {', '.join(missing)}")
        records = []
        for lineno, row in enumerate(reader, start=2):
            row = {k.strip(): (v or "").strip() for k, v in row.items() if k is not None}

            def resolve(p, what):
                full = p if os.path.isabs(p) else os.path.join(base, p)
                if not os.path.exists(full):
                    raise FileNotFoundError(f"{path}, row {lineno}: {what} {p!r} not found")
                return full

            mask = row.get("mask") or None
            records.append(ManifestRecord(
                resolve(row["path"], "image"), row["label"], row["group"],
                resolve(mask, "mask") if mask else None,
            ))
    manifest = DatasetManifest(records, path)
    if len(manifest.classes) < 2:
        warnings.warn(f"{path}: manifest has fewer than two classes; training will fail")
    return manifest


# ------------------------------------------------------------- feature tables


@dataclass
class FeatureTable:
    X: np.ndarray
    names: tuple
    labels: np.ndarray
    groups: np.ndarray
    paths: tuple = ()

    def __len__(self):
        return self.X.shape[0]

    @property
    def classes(self):
        return sorted(set(self.labels.tolist()))

    def subset(self, idx):
        idx = np.asarray(idx)
        paths = tuple(self.paths[i] for i in idx) if self.paths else ()
        return FeatureTable(self.X[idx], self.names, self.labels[idx], self.groups[idx], paths)

    def to_csv(self):
        lines = [",".join(["path", "label", "group", *self.names])]
        paths = self.paths or ("",) * len(self)
        for p, lab, grp, row in zip(paths, self.labels, self.groups, self.X):
            lines.append(",".join([p, lab, grp, *(repr(float(v)) for v in row)]))
        return "\n".join(lines) + "\n"


def image_features(record: ManifestRecord, pipelines) -> FeatureVector:
    image = load_image(record.path)
    if record.mask:
        image = attach_mask(image, load_image(record.mask))
    return FeatureVector.concat(feature_pipeline(image, p) for p in pipelines)


def extract_feature_table(manifest: DatasetManifest, pipelines: Sequence) -> FeatureTable:
    """One row per manifest record (manifest order), one column per feature."""
    pipelines = [parse_pipeline(p) if isinstance(p, str) else p for p in pipelines]
    if not pipelines:
        raise ValueError("no pipelines given")

    def one(rec):
        try:
            return image_features(rec, pipelines)
        except Exception as exc:
            raise RuntimeError(f"feature extraction failed for {rec.path}: {exc}") from exc

    vectors = _ordered_map(one, list(manifest.records))
    names = vectors[0].names if vectors else ()
    X = np.vstack([v.values for v in vectors]) if vectors else np.zeros((0, 0))
    return FeatureTable(
        X, names,
        np.array([r.label for r in manifest.records], dtype=object),
        np.array([r.group for r in manifest.records], dtype=object),
        tuple(r.path for r in manifest.records),
    )


# ----------------------------------------------------------------------- MLP


@dataclass(frozen=True)
class MLPConfig:
    hidden_units: int = 11
    epochs: int = 500
    learning_rate: float = 0.01
    momentum: float = 0.9
    seed: int = 0
    class_weighting: bool = True
    adaptive: bool = True

    def __post_init__(self):
        if self.hidden_units < 1:
            raise ValueError("hidden_units must be >= 1")
        if self.epochs < 0:
            raise ValueError("epochs must be >= 0")
        if not self.learning_rate > 0:
            raise ValueError("learning_rate must be positive")
        if not 0 <= self.momentum < 1:
            raise ValueError("momentum must lie in [0, 1)")


RATE_UP, RATE_DOWN = 1.2, 0.5
RATE_MIN, RATE_MAX = 1e-6, 1.0


def class_weights(y, n_classes):
    """Per-class loss weight n / (K * n_c); classes with no samples get weight 0."""
    counts = np.bincount(y, minlength=n_classes).astype(np.float64)
    w = np.zeros(n_classes)
    present = counts > 0
    w[present] = len(y) / (n_classes * counts[present])
    return w


class Standardizer:
    """z-score fitted on a training split; constant columns are dropped."""

    def __init__(self, X):
        self.mean = X.mean(axis=0)
        std = X.std(axis=0)
        self.keep = std > 1e-12 * np.maximum(1.0, np.abs(self.mean))
        if not self.keep.any():
            raise ValueError("every feature column is constant on the training split")
        if not self.keep.all():
            warnings.warn(f"dropping {int((~self.keep).sum())} constant feature column(s)")
        self.std = np.where(self.keep, std, 1.0)

    def __call__(self, X):
        return ((X - self.mean) / self.std)[:, self.keep]


def _sigmoid(z):
    return 0.5 * (1.0 + np.tanh(0.5 * z))


def _softmax(z):
    z = z - z.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


class MLP:
    """One sigmoid hidden layer, softmax output, weighted cross-entropy."""

    def __init__(self, n_in, n_hidden, n_out, rng, prior=None):
        a = np.sqrt(6.0 / (n_in + n_hidden))
        self.shapes = [(n_in, n_hidden), (n_hidden,), (n_hidden, n_out), (n_out,)]
        W1 = rng.uniform(-a, a, size=(n_in, n_hidden))
        b1 = np.zeros(n_hidden)
        # zero output weights + log-prior bias: an untrained net predicts the prior
        W2 = np.zeros((n_hidden, n_out))
        b2 = np.log(prior) if prior is not None else np.zeros(n_out)
        self.theta = np.concatenate([W1.ravel(), b1, W2.ravel(), b2])

    def unpack(self, theta):
        out, k = [], 0
        for shape in self.shapes:
            n = int(np.prod(shape))
            out.append(theta[k:k + n].reshape(shape))
            k += n
        return out

    def forward(self, X, theta=None):
        W1, b1, W2, b2 = self.unpack(self.theta if theta is None else theta)
        A1 = _sigmoid(X @ W1 + b1)
        return A1, _softmax(A1 @ W2 + b2)

    def predict_proba(self, X):
        return self.forward(X)[1]

    def loss_and_grad(self, theta, X, Y, sample_w):
        """Mean weighted cross-entropy and its gradient w.r.t. the flat parameter vector."""
        W1, b1, W2, b2 = self.unpack(theta)
        n = X.shape[0]
        A1 = _sigmoid(X @ W1 + b1)
        P = _softmax(A1 @ W2 + b2)
        loss = -np.sum(sample_w * np.log(np.sum(P * Y, axis=1) + 1e-300)) / n
        dZ2 = (P - Y) * sample_w[:, None] / n
        dW2 = A1.T @ dZ2
        db2 = dZ2.sum(axis=0)
        dZ1 = (dZ2 @ W2.T) * A1 * (1.0 - A1)
        dW1 = X.T @ dZ1
        db1 = dZ1.sum(axis=0)
        return loss, np.concatenate([dW1.ravel(), db1, dW2.ravel(), db2])


@dataclass
class TrainedModel:
    classes: list
    standardizer: Standardizer
    net: object
    loss_history: list = field(default_factory=list)

    def predict_proba(self, X):
        return self.net.predict_proba(self.standardizer(np.asarray(X, dtype=np.float64)))

    def predict(self, X):
        return [self.classes[k] for k in np.argmax(self.predict_proba(X), axis=1)]


def _encode(labels, classes):
    index = {c: k for k, c in enumerate(classes)}
    return np.array([index[c] for c in labels], dtype=np.int64)


def fit_mlp(X, y, n_classes, config: MLPConfig):
    """Train on standardized inputs ``X`` and integer labels ``y``; returns (net, losses)."""
    rng = np.random.default_rng(config.seed)
    w = class_weights(y, n_classes) if config.class_weighting else np.ones(n_classes)
    mass = np.bincount(y, minlength=n_classes) * w
    prior = np.maximum(mass / mass.sum(), 1e-12)
    net = MLP(X.shape[1], config.hidden_units, n_classes, rng, prior)
    Y = np.eye(n_classes)[y]
    sw = w[y]
    rate = np.full(net.theta.size, config.learning_rate)
    velocity = np.zeros(net.theta.size)
    prev_grad = np.zeros(net.theta.size)
    losses = []
    for _ in range(config.epochs):
        loss, grad = net.loss_and_grad(net.theta, X, Y, sw)
        losses.append(loss)
        if config.adaptive:
            agree = prev_grad * grad
            rate = np.where(agree > 0, rate * RATE_UP, np.where(agree < 0, rate * RATE_DOWN, rate))
            rate = np.clip(rate, RATE_MIN, RATE_MAX)
            prev_grad = grad
        velocity = config.momentum * velocity - rate * grad
        net.theta = net.theta + velocity
    return net, losses


def _check_classes(table):
    classes = table.classes
    if len(classes) < 2:
        raise ValueError(f"training needs at least two classes, got {classes}")
    return classes


def train_mlp(table: FeatureTable, config: MLPConfig = MLPConfig()) -> TrainedModel:
    classes = _check_classes(table)
    std = Standardizer(np.asarray(table.X, dtype=np.float64))
    y = _encode(table.labels, classes)
    net, losses = fit_mlp(std(table.X), y, len(classes), config)
    return TrainedModel(classes, std, net, losses)


class _Centroids:
    def __init__(self, centroids):
        self.centroids = centroids

    def predict_proba(self, X):
        d2 = ((X[:, None, :] - self.centroids[None, :, :]) ** 2).sum(axis=2)
        return _softmax(-d2)


def train_centroid(table: FeatureTable, config: MLPConfig = None) -> TrainedModel:
    """Nearest-centroid baseline on standardized features."""
    classes = _check_classes(table)
    std = Standardizer(np.asarray(table.X, dtype=np.float64))
    Z = std(table.X)
    y = _encode(table.labels, classes)
    cents = np.vstack([Z[y == k].mean(axis=0) for k in range(len(classes))])
    return TrainedModel(classes, std, _Centroids(cents))


CLASSIFIERS = {"mlp": train_mlp, "centroid": train_centroid}


# ------------------------------------------------------------ cross-validation


@dataclass(frozen=True)
class LeaveOneGroupOut:
    def __str__(self):
        return "leave-one-group-out"

    def folds(self, groups):
        uniq = sorted(set(groups.tolist()))
        if len(uniq) < 2:
            raise ValueError("leave-one-group-out needs at least two groups")
        return [np.flatnonzero(groups == g) for g in uniq]


@dataclass(frozen=True)
class KFold:
    k: int
    seed: int = 0

    def __str__(self):
        return f"kfold(k={self.k}, seed={self.seed})"

    def folds(self, groups):
        uniq = sorted(set(groups.tolist()))
        if self.k < 2:
            raise ValueError("k-fold needs k >= 2")
        if self.k > len(uniq):
            raise ValueError(f"k={self.k} exceeds the number of groups ({len(uniq)})")
        order = np.random.default_rng(self.seed).permutation(len(uniq))
        chunks = np.array_split(order, self.k)
        out = []
        for chunk in chunks:
            chosen = {uniq[i] for i in chunk}
            out.append(np.flatnonzero([g in chosen for g in groups]))
        return out


def parse_scheme(text):
    """``logo`` | ``kfold:K`` | ``kfold:K:SEED``."""
    if text in ("logo", "leave-one-group-out"):
        return LeaveOneGroupOut()
    parts = text.split(":")
    if parts[0] == "kfold" and len(parts) in (2, 3):
        return KFold(int(parts[1]), int(parts[2]) if len(parts) == 3 else 0)
    raise ValueError(f"unknown scheme {text!r}; expected logo or kfold:K[:SEED]")


@dataclass
class LevelReport:
    classes: list
    counts: np.ndarray  # rows = true class, cols = predicted

    @property
    def confusion(self):
        rows = self.counts.sum(axis=1, keepdims=True)
        return np.divide(100.0 * self.counts, rows, out=np.zeros(self.counts.shape),
                         where=rows > 0)

    @property
    def per_class(self):
        return np.diag(self.confusion).copy()

    @property
    def overall(self):
        total = self.counts.sum()
        return 100.0 * np.trace(self.counts) / total if total else 0.0

    def as_dict(self):
        return {
            "classes": list(self.classes),
            "confusion": np.round(self.confusion, 6).tolist(),
            "counts": self.counts.tolist(),
            "perClass": dict(zip(self.classes, np.round(self.per_class, 6).tolist())),
            "overall": round(float(self.overall), 6),
        }


def level_report(classes, truth, predicted):
    k = len(classes)
    t = _encode(truth, classes)
    p = _encode(predicted, classes)
    counts = np.zeros((k, k), dtype=np.int64)
    np.add.at(counts, (t, p), 1)
    return LevelReport(list(classes), counts)


@dataclass
class EvalReport:
    scheme: str
    folds: int
    cell: LevelReport
    image: LevelReport
    config: dict

    def as_dict(self):
        return {"scheme": self.scheme, "folds": self.folds,
                "cellLevel": self.cell.as_dict(), "imageLevel": self.image.as_dict(),
                "config": self.config}

    def to_json(self):
        return json.dumps(self.as_dict(), indent=2, sort_keys=True) + "\n"


def majority_vote(classes, groups, probs, labels):
    """Per group: the most frequent predicted class, ties to the higher mean probability.

    Returns (group ids, true labels, predicted labels) in sorted group order.
    """
    pred = np.argmax(probs, axis=1)
    gids, truth, out = [], [], []
    for g in sorted(set(groups.tolist())):
        idx = np.flatnonzero(groups == g)
        votes = np.bincount(pred[idx], minlength=len(classes))
        conf = probs[idx].mean(axis=0)
        best = max(range(len(classes)), key=lambda k: (votes[k], conf[k], -k))
        lab_votes = {}
        for lab in labels[idx]:
            lab_votes[lab] = lab_votes.get(lab, 0) + 1
        true = min(lab_votes, key=lambda lab: (-lab_votes[lab], lab))
        gids.append(g)
        truth.append(true)
        out.append(classes[best])
    return gids, truth, out


def cross_validate(table: FeatureTable, config: MLPConfig = MLPConfig(), scheme=None,
                   classifier="mlp") -> EvalReport:
    """Train/test over group-respecting folds and report at cell and image level.

    Fold ``i`` trains with seed ``config.seed + i``; standardization is fitted on the
    training split only.
    """
    scheme = scheme or LeaveOneGroupOut()
    if isinstance(scheme, str):
        scheme = parse_scheme(scheme)
    trainer = CLASSIFIERS[classifier]
    classes = _check_classes(table)
    folds = scheme.folds(table.groups)
    n = len(table)

    def run(item):
        i, test = item
        train = np.setdiff1d(np.arange(n), test)
        cfg = MLPConfig(**{**asdict(config), "seed": config.seed + i})
        present = sorted(set(table.labels[train].tolist()))
        if len(present) < 2:
            raise ValueError(f"fold {i}: training split holds a single class {present}; "
                             "use fewer folds or another seed")
        model = trainer(table.subset(train), cfg)
        proba = model.predict_proba(table.X[test])
        # map the fold's class list onto the global one
        full = np.zeros((len(test), len(classes)))
        for k, c in enumerate(model.classes):
            full[:, classes.index(c)] = proba[:, k]
        return test, full

    probs = np.zeros((n, len(classes)))
    for test, p in _ordered_map(run, list(enumerate(folds))):
        probs[test] = p
    cell_pred = [classes[k] for k in np.argmax(probs, axis=1)]
    cell = level_report(classes, table.labels.tolist(), cell_pred)
    _, truth, img_pred = majority_vote(classes, table.groups, probs, table.labels)
    image = level_report(classes, truth, img_pred)
    cfg = dict(asdict(config), classifier=classifier)
    return EvalReport(str(scheme), len(folds), cell, image, cfg)


def evaluate_manifest(manifest: DatasetManifest, pipelines, config: MLPConfig = MLPConfig(),
                      scheme=None, classifier="mlp") -> EvalReport:
    return cross_validate(extract_feature_table(manifest, pipelines), config, scheme, classifier)


def _render_level(title, lvl: LevelReport):
    width = max(6, *(len(c) for c in lvl.classes)) + 1
    lines = [title, " " * width + "".join(f"{c:>{width}}" for c in lvl.classes)]
    for c, row in zip(lvl.classes, lvl.confusion):
        lines.append(f"{c:<{width}}" + "".join(f"{v:>{width}.1f}" for v in row))
    lines.append("per-class accuracy: " + ", ".join(
        f"{c}={v:.1f}" for c, v in zip(lvl.classes, lvl.per_class)))
    lines.append(f"overall accuracy: {lvl.overall:.1f}")
    return "\n".join(lines)


def render_report(report: EvalReport) -> str:
    """Row-normalized confusion matrices (percent, one decimal) at both levels."""
    head = f"scheme: {report.scheme} ({report.folds} folds)"
    return "\n\n".join([
        head,
        _render_level("cell level", report.cell),
        _render_level("image level", report.image),
    ]) + "\n"
