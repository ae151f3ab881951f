"""Training-set sampling, scaling and the station-presence classifiers."""

from __future__ import annotations

import base64
import json
import pickle
from pathlib import Path
from typing import Callable, Mapping, Optional, Union

import numpy as np
from joblib import Parallel, delayed
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.ensemble import AdaBoostClassifier
from sklearn.neighbors import KNeighborsClassifier
from sklearn.preprocessing import MinMaxScaler, StandardScaler
from sklearn.tree import DecisionTreeClassifier
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

from .config import ConfigError, ExperimentConfig, derive_seed

MODEL_FORMAT = "hexstation-model/1"


class SamplingError(ValueError):
    pass


class FitError(ValueError):
    pass


# --------------------------------------------------------------------------
# sampling


def sample_training_set(labels: Mapping[str, bool], ratio: float, rng: np.random.Generator) -> list[str]:
    """All positive cells plus ``floor(ratio * P)`` distinct random negatives."""
    if not ratio >= 1:
        raise SamplingError(f"imbalance ratio must be >= 1, got {ratio}")
    pos = sorted(c for c, v in labels.items() if v)
    neg = sorted(c for c, v in labels.items() if not v)
    want = int(np.floor(ratio * len(pos) + 1e-9))
    if want > len(neg):
        raise SamplingError(
            f"ratio {ratio} needs {want} negative cells but only {len(neg)} exist "
            f"(short by {want - len(neg)})"
        )
    picked = rng.choice(len(neg), size=want, replace=False) if want else np.array([], dtype=int)
    return pos + [neg[i] for i in sorted(picked)]


# --------------------------------------------------------------------------
# scaling


def fit_scaler(X, kind: str):
    """Fitted scaler state; ``None`` for the identity."""
    X = check_array(X, dtype=np.float64)
    if kind == "none":
        return None
    if kind == "minmax":
        return MinMaxScaler(clip=False).fit(X)
    if kind == "standard":
        return StandardScaler().fit(X)
    raise ConfigError(f"unknown scaler {kind!r}")


def apply_scaler(state, X) -> np.ndarray:
    X = check_array(X, dtype=np.float64)
    return X.copy() if state is None else state.transform(X)


# --------------------------------------------------------------------------
# classifiers


def _canonical_order(X: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Row permutation that sorts (X, y) lexicographically."""
    keys = np.column_stack([X, y]).T[::-1]
    return np.lexsort(keys)


def _class_weights(y: np.ndarray) -> np.ndarray:
    classes, counts = np.unique(y, return_counts=True)
    w = {c: len(y) / (len(classes) * n) for c, n in zip(classes, counts)}
    return np.array([w[v] for v in y])


class VotingForestClassifier(ClassifierMixin, BaseEstimator):
    """Bagged CART trees whose probability is the fraction of positive votes.

    Trees use Gini impurity, ``sqrt(n_features)`` candidates per split and no
    depth limit. ``class_weight`` reweights samples over the whole training
    set (``'balanced'``) or within each bootstrap (``'balanced_subsample'``).
    """

    def __init__(self, n_estimators=100, max_features="sqrt", class_weight=None, random_state=None, n_jobs=None):
        self.n_estimators = n_estimators
        self.max_features = max_features
        self.class_weight = class_weight
        self.random_state = random_state
        self.n_jobs = n_jobs

    def fit(self, X, y):
        X, y = check_X_y(X, y, dtype=np.float64)
        y = y.astype(int)
        self.classes_ = np.unique(y)
        if len(self.classes_) < 2:
            raise FitError("training labels contain a single class")
        if self.class_weight not in (None, "balanced", "balanced_subsample"):
            raise ConfigError(f"unknown class_weight {self.class_weight!r}")
        self.n_features_in_ = X.shape[1]
        seeds = np.random.SeedSequence(self.random_state).generate_state(self.n_estimators)
        global_w = _class_weights(y) if self.class_weight == "balanced" else None

        def grow(seed):
            rng = np.random.default_rng(seed)
            idx = rng.integers(0, len(y), len(y))
            Xb, yb = X[idx], y[idx]
            if self.class_weight == "balanced_subsample":
                w = _class_weights(yb)
            elif global_w is not None:
                w = global_w[idx]
            else:
                w = None
            tree = DecisionTreeClassifier(max_features=self.max_features, random_state=int(seed) & 0x7FFFFFFF)
            return tree.fit(Xb, yb, sample_weight=w)

        if self.n_jobs in (None, 1):
            self.estimators_ = [grow(s) for s in seeds]
        else:
            self.estimators_ = Parallel(n_jobs=self.n_jobs, prefer="threads")(delayed(grow)(s) for s in seeds)
        return self

    def votes(self, X) -> np.ndarray:
        """(n_trees, n_rows) matrix of 0/1 votes."""
        check_is_fitted(self, "estimators_")
        X = check_array(X, dtype=np.float64)
        return np.vstack([t.predict(X) for t in self.estimators_]).astype(float)

    def predict_proba(self, X) -> np.ndarray:
        p = self.votes(X).mean(axis=0)
        return np.column_stack([1.0 - p, p])

    def predict(self, X):
        return (self.predict_proba(X)[:, 1] >= 0.5).astype(int)


class SoftmaxMLPClassifier(ClassifierMixin, BaseEstimator):
    """Network with layer sizes (n_features, hidden, 2).

    ReLU hidden layer, softmax output, cross-entropy loss, Adam updates on
    shuffled mini-batches.
    """

    def __init__(self, hidden=20, epochs=200, batch_size=32, learning_rate=1e-3, random_state=None):
        self.hidden = hidden
        self.epochs = epochs
        self.batch_size = batch_size
        self.learning_rate = learning_rate
        self.random_state = random_state

    def fit(self, X, y):
        X, y = check_X_y(X, y, dtype=np.float64)
        y = y.astype(int)
        self.classes_ = np.unique(y)
        if len(self.classes_) < 2:
            raise FitError("training labels contain a single class")
        n, d = X.shape
        self.n_features_in_ = d
        self.layer_sizes_ = (d, self.hidden, 2)
        rng = np.random.default_rng(self.random_state)
        params = [
            rng.normal(0.0, np.sqrt(2.0 / d), (d, self.hidden)),
            np.zeros(self.hidden),
            rng.normal(0.0, np.sqrt(1.0 / self.hidden), (self.hidden, 2)),
            np.zeros(2),
        ]
        m = [np.zeros_like(p) for p in params]
        v = [np.zeros_like(p) for p in params]
        Y = np.eye(2)[y]
        t = 0
        b1, b2, eps = 0.9, 0.999, 1e-8
        self.loss_curve_ = []
        for _ in range(self.epochs):
            order = rng.permutation(n)
            for start in range(0, n, self.batch_size):
                sl = order[start : start + self.batch_size]
                grads = self._grads(params, X[sl], Y[sl])
                t += 1
                for p, g, mi, vi in zip(params, grads, m, v):
                    mi *= b1
                    mi += (1 - b1) * g
                    vi *= b2
                    vi += (1 - b2) * g * g
                    p -= self.learning_rate * (mi / (1 - b1**t)) / (np.sqrt(vi / (1 - b2**t)) + eps)
            P = self._forward(params, X)[2]
            self.loss_curve_.append(float(-np.mean(np.log(P[np.arange(n), y] + 1e-12))))
        self.coefs_ = params
        return self

    @staticmethod
    def _forward(params, X):
        W1, b1, W2, b2 = params
        z = X @ W1 + b1
        h = np.maximum(z, 0.0)
        logits = h @ W2 + b2
        logits -= logits.max(axis=1, keepdims=True)
        e = np.exp(logits)
        return z, h, e / e.sum(axis=1, keepdims=True)

    def _grads(self, params, X, Y):
        W1, b1, W2, b2 = params
        z, h, P = self._forward(params, X)
        g = (P - Y) / len(X)
        gh = (g @ W2.T) * (z > 0)
        return [X.T @ gh, gh.sum(axis=0), h.T @ g, g.sum(axis=0)]

    def predict_proba(self, X):
        check_is_fitted(self, "coefs_")
        X = check_array(X, dtype=np.float64)
        return self._forward(self.coefs_, X)[2]

    def predict(self, X):
        return (self.predict_proba(X)[:, 1] >= 0.5).astype(int)


_PLUGINS: dict[str, Callable[[ExperimentConfig, int], BaseEstimator]] = {}


def register_classifier(name: str, factory: Callable[[ExperimentConfig, int], BaseEstimator]) -> None:
    """Register a plugin classifier; ``factory(cfg, seed)`` returns an unfitted estimator."""
    _PLUGINS[name] = factory


def unregister_classifier(name: str) -> None:
    _PLUGINS.pop(name, None)


def make_classifier(cfg: ExperimentConfig, seed: int, n_train: Optional[int] = None) -> BaseEstimator:
    kind = cfg.classifier
    if kind == "random_forest":
        cw = None if cfg.class_balance_mode == "normal" else cfg.class_balance_mode
        return VotingForestClassifier(class_weight=cw, random_state=seed)
    if kind == "knn":
        k = 5 if n_train is None else max(1, min(5, n_train))
        return KNeighborsClassifier(n_neighbors=k)
    if kind == "adaboost":
        return AdaBoostClassifier(DecisionTreeClassifier(max_depth=1), n_estimators=50, random_state=seed)
    if kind == "mlp":
        return SoftmaxMLPClassifier(random_state=seed)
    if kind == "plugin":
        if cfg.plugin not in _PLUGINS:
            raise ConfigError(f"no classifier registered under {cfg.plugin!r}")
        return _PLUGINS[cfg.plugin](cfg, seed)
    raise ConfigError(f"unknown classifier {kind!r}")


class StationModel(ClassifierMixin, BaseEstimator):
    """Scaler plus classifier, fitted on a canonically ordered training set.

    ``predict_proba`` returns the usual (n, 2) array; ``positive_proba`` the
    station probability column.
    """

    def __init__(self, config: Optional[ExperimentConfig] = None, seed: Optional[int] = None):
        self.config = config
        self.seed = seed

    def fit(self, X, y):
        cfg = self.config or ExperimentConfig()
        X, y = check_X_y(X, y, dtype=np.float64)
        y = np.asarray(y).astype(int)
        if len(np.unique(y)) < 2:
            raise FitError("training labels contain a single class")
        order = _canonical_order(X, y)
        X, y = X[order], y[order]
        seed = derive_seed(cfg.seed) if self.seed is None else int(self.seed)
        self.scaler_ = fit_scaler(X, cfg.scaler)
        self.classifier_ = make_classifier(cfg, seed, n_train=len(y))
        self.classifier_.fit(apply_scaler(self.scaler_, X), y)
        self.classes_ = np.array([0, 1])
        self.n_features_in_ = X.shape[1]
        self.threshold_ = cfg.threshold
        return self

    def _check(self, X) -> np.ndarray:
        check_is_fitted(self, "classifier_")
        X = check_array(X, dtype=np.float64)
        if X.shape[1] != self.n_features_in_:
            raise ValueError(f"model expects {self.n_features_in_} features, got {X.shape[1]}")
        return X

    def positive_proba(self, X) -> np.ndarray:
        X = self._check(X)
        P = self.classifier_.predict_proba(apply_scaler(self.scaler_, X))
        classes = list(getattr(self.classifier_, "classes_", [0, 1]))
        return np.clip(P[:, classes.index(1)], 0.0, 1.0)

    def predict_proba(self, X) -> np.ndarray:
        p = self.positive_proba(X)
        return np.column_stack([1.0 - p, p])

    def predict(self, X, threshold: Optional[float] = None) -> np.ndarray:
        t = self.threshold_ if threshold is None else threshold
        return (self.positive_proba(X) >= t).astype(int)

    def to_json(self) -> dict:
        check_is_fitted(self, "classifier_")
        cfg = self.config or ExperimentConfig()
        return {
            "format": MODEL_FORMAT,
            "config": cfg.to_dict(),
            "seed": self.seed,
            "feature_dim": int(self.n_features_in_),
            "classifier": cfg.classifier,
            "payload": base64.b64encode(pickle.dumps((self.scaler_, self.classifier_))).decode("ascii"),
        }

    @classmethod
    def from_json(cls, d: dict) -> "StationModel":
        if d.get("format") != MODEL_FORMAT:
            raise ValueError(f"not a model file (format {d.get('format')!r})")
        m = cls(ExperimentConfig.from_dict(d["config"]), d.get("seed"))
        m.scaler_, m.classifier_ = pickle.loads(base64.b64decode(d["payload"]))
        m.n_features_in_ = d["feature_dim"]
        m.classes_ = np.array([0, 1])
        m.threshold_ = m.config.threshold
        return m

    def save(self, path: Union[str, Path]) -> None:
        Path(path).write_text(json.dumps(self.to_json()), encoding="utf-8")

    @classmethod
    def load(cls, path: Union[str, Path]) -> "StationModel":
        return cls.from_json(json.loads(Path(path).read_text(encoding="utf-8")))


def fit_classifier(X, y, cfg: ExperimentConfig, seed: Optional[int] = None) -> StationModel:
    return StationModel(cfg, seed).fit(X, y)


def predict_proba(model: StationModel, X) -> np.ndarray:
    """Station probability per row."""
    return model.positive_proba(X)
