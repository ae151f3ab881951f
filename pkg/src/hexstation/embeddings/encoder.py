"""Single-bottleneck autoencoder for reducing sparse tag vectors."""

from __future__ import annotations

import json
from pathlib import Path
from typing import Union

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted

from ..config import ConfigError

FORMAT = "hexstation-encoder/1"


class Autoencoder(TransformerMixin, BaseEstimator):
    """Affine encoder with ReLU bottleneck and affine decoder, trained on MSE.

    Inputs are min-max scaled with statistics from the training data. Weights
    start from the principal subspace of the scaled data (codes shifted to be
    positive, so no unit starts dead) unless ``init='random'``, and are then
    updated with Adam on shuffled mini-batches. After every epoch the
    full-data loss is checked; an epoch that would increase it is rolled back
    and the step size halved, so ``loss_curve_`` never increases.

    Parameters
    ----------
    bottleneck : int
        Output dimension of :meth:`transform`.
    epochs, batch_size, learning_rate : training schedule.
    random_state : int
        Seeds initialisation and batch order; equal seeds give equal weights.
    init : {'pca', 'random'}
    """

    def __init__(self, bottleneck=300, epochs=200, batch_size=32, learning_rate=0.003, random_state=0, init="pca"):
        self.bottleneck = bottleneck
        self.epochs = epochs
        self.batch_size = batch_size
        self.learning_rate = learning_rate
        self.random_state = random_state
        self.init = init

    def _scale(self, X):
        return (X - self.min_) * self.inv_range_

    def fit(self, X, y=None):
        X = check_array(X, dtype=np.float64)
        n, d = X.shape
        if self.bottleneck >= d:
            raise ConfigError(f"bottleneck {self.bottleneck} must be smaller than input dim {d}")
        if self.bottleneck < 1:
            raise ConfigError("bottleneck must be positive")
        if n < 10:
            raise ValueError(f"need at least 10 training vectors, got {n}")
        self.n_features_in_ = d
        self.min_ = X.min(axis=0)
        rng_ = X.max(axis=0) - self.min_
        self.inv_range_ = np.where(rng_ > 0, 1.0 / np.where(rng_ > 0, rng_, 1.0), 0.0)
        Xs = self._scale(X)

        rng = np.random.default_rng(self.random_state)
        if self.init == "pca":
            params = _pca_init(Xs, self.bottleneck, rng)
        elif self.init == "random":
            params = _random_init(Xs, self.bottleneck, rng)
        else:
            raise ConfigError(f"unknown init {self.init!r}")
        m = [np.zeros_like(p) for p in params]
        v = [np.zeros_like(p) for p in params]
        t = 0
        lr = self.learning_rate
        b1, b2, eps = 0.9, 0.999, 1e-8

        loss = _loss(params, Xs)
        self.loss_curve_ = [loss]
        for _ in range(self.epochs):
            saved = ([p.copy() for p in params], [a.copy() for a in m], [a.copy() for a in v], t)
            order = rng.permutation(n)
            for start in range(0, n, self.batch_size):
                xb = Xs[order[start : start + self.batch_size]]
                grads = _grads(params, xb)
                t += 1
                for p, g, mi, vi in zip(params, grads, m, v):
                    mi *= b1
                    mi += (1 - b1) * g
                    vi *= b2
                    vi += (1 - b2) * g * g
                    p -= lr * (mi / (1 - b1**t)) / (np.sqrt(vi / (1 - b2**t)) + eps)
            new = _loss(params, Xs)
            if new > loss:
                params, m, v, t = saved
                lr *= 0.5
            else:
                loss = new
            self.loss_curve_.append(loss)
        self.W_enc_, self.b_enc_, self.W_dec_, self.b_dec_ = params
        self.reconstruction_loss_ = loss
        self.n_epochs_ = self.epochs
        return self

    def transform(self, X) -> np.ndarray:
        check_is_fitted(self, "W_enc_")
        X = check_array(X, dtype=np.float64)
        if X.shape[1] != self.n_features_in_:
            raise ValueError(f"expected {self.n_features_in_} features, got {X.shape[1]}")
        return np.maximum(self._scale(X) @ self.W_enc_ + self.b_enc_, 0.0)

    def reconstruct(self, X) -> np.ndarray:
        """Reconstruction in the scaled input space."""
        return self.transform(X) @ self.W_dec_ + self.b_dec_

    def reconstruction_mse(self, X) -> float:
        X = check_array(X, dtype=np.float64)
        return float(np.mean((self.reconstruct(X) - self._scale(X)) ** 2))

    def baseline_mse(self, X) -> float:
        """MSE of predicting each column's mean (scaled space)."""
        Xs = self._scale(check_array(X, dtype=np.float64))
        return float(np.mean((Xs - Xs.mean(axis=0)) ** 2))

    def to_json(self) -> dict:
        check_is_fitted(self, "W_enc_")
        return {
            "format": FORMAT,
            "params": self.get_params(),
            "input_dim": int(self.n_features_in_),
            "bottleneck_dim": int(self.bottleneck),
            "epochs": int(self.n_epochs_),
            "final_loss": float(self.reconstruction_loss_),
            "loss_curve": [float(x) for x in self.loss_curve_],
            "min": self.min_.tolist(),
            "inv_range": self.inv_range_.tolist(),
            "W_enc": self.W_enc_.tolist(),
            "b_enc": self.b_enc_.tolist(),
            "W_dec": self.W_dec_.tolist(),
            "b_dec": self.b_dec_.tolist(),
        }

    @classmethod
    def from_json(cls, d: dict) -> "Autoencoder":
        if d.get("format") != FORMAT:
            raise ValueError(f"not an encoder file (format {d.get('format')!r})")
        enc = cls(**d["params"])
        enc.n_features_in_ = d["input_dim"]
        enc.n_epochs_ = d["epochs"]
        enc.reconstruction_loss_ = d["final_loss"]
        enc.loss_curve_ = d["loss_curve"]
        enc.min_ = np.array(d["min"])
        enc.inv_range_ = np.array(d["inv_range"])
        enc.W_enc_ = np.array(d["W_enc"])
        enc.b_enc_ = np.array(d["b_enc"])
        enc.W_dec_ = np.array(d["W_dec"])
        enc.b_dec_ = np.array(d["b_dec"])
        return enc

    def save(self, path: Union[str, Path]) -> None:
        Path(path).write_text(json.dumps(self.to_json()))

    @classmethod
    def load(cls, path: Union[str, Path]) -> "Autoencoder":
        return cls.from_json(json.loads(Path(path).read_text()))


def _random_init(Xs, h, rng):
    d = Xs.shape[1]
    return [
        rng.normal(0.0, 1.0 / d, (d, h)),
        np.ones(h),
        rng.normal(0.0, np.sqrt(1.0 / h), (h, d)),
        Xs.mean(axis=0),
    ]


def _pca_init(Xs, h, rng):
    """Weights reproducing the rank-h PCA reconstruction through the ReLU.

    Units beyond the data rank get small random encoder weights and a zero
    decoder row, so they start silent and are trained from there.
    """
    mean = Xs.mean(axis=0)
    _, S, Vt = np.linalg.svd(Xs - mean, full_matrices=False)
    r = min(h, int(np.sum(S > S[0] * 1e-10)) if len(S) and S[0] > 0 else 0)
    We, be, Wd, bd = _random_init(Xs, h, rng)
    Wd[:] = 0.0
    if r:
        V = Vt[:r].T
        codes = (Xs - mean) @ V
        lo, span = codes.min(axis=0), np.ptp(codes, axis=0)
        shift = -lo + 0.1 * span + 1e-3
        We[:, :r] = V
        be[:r] = shift - mean @ V
        Wd[:r] = V.T
        bd = mean - shift @ V.T
    return [We, be, Wd, bd]


def _forward(params, X):
    We, be, Wd, bd = params
    z = X @ We + be
    h = np.maximum(z, 0.0)
    return z, h, h @ Wd + bd


def _loss(params, X) -> float:
    return float(np.mean((_forward(params, X)[2] - X) ** 2))


def _grads(params, X):
    We, be, Wd, bd = params
    z, h, out = _forward(params, X)
    g_out = 2.0 * (out - X) / X.size
    gWd = h.T @ g_out
    gbd = g_out.sum(axis=0)
    gh = g_out @ Wd.T
    gz = gh * (z > 0)
    return [X.T @ gz, gz.sum(axis=0), gWd, gbd]


def train_encoder(X, bottleneck: int, seed: int = 0, **kw) -> Autoencoder:
    return Autoencoder(bottleneck=bottleneck, random_state=seed, **kw).fit(X)


def encode(enc: Autoencoder, v) -> np.ndarray:
    v = np.asarray(v, dtype=np.float64)
    single = v.ndim == 1
    if v.shape[-1] != enc.n_features_in_:
        raise ValueError(f"vector has dim {v.shape[-1]}, encoder expects {enc.n_features_in_}")
    out = enc.transform(v.reshape(1, -1) if single else v)
    return out[0] if single else out
