"""Combining a cell's vector with averaged rings of its neighbours."""

from __future__ import annotations

from typing import Mapping, Sequence

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin

from .. import hexgrid

NEIGHBOURHOOD_METHODS = ("concatenate", "average", "diminishing", "diminishing_squared")


def neighbourhood_weights(K: int, method: str) -> np.ndarray:
    """Per-ring weights (unnormalised) for the averaging methods."""
    k = np.arange(K + 1, dtype=float)
    if method == "average":
        return np.ones(K + 1)
    if method == "diminishing":
        return 1.0 / (k + 1.0)
    if method == "diminishing_squared":
        return 1.0 / (k + 1.0) ** 2
    raise ValueError(f"no weights for neighbourhood method {method!r}")


def ring_average(cell: str, k: int, region_vectors: Mapping[str, np.ndarray], dim: int | None = None) -> np.ndarray:
    """Mean vector of the cells at distance ``k``.

    Cells without a vector count as zeros but stay in the denominator.
    """
    members = hexgrid.ring(cell, k)
    if dim is None:
        dim = len(next(iter(region_vectors.values())))
    acc = np.zeros(dim)
    for c in members:
        v = region_vectors.get(c)
        if v is not None:
            acc += v
    return acc / len(members)


def combine_neighbourhood(rings: Sequence[np.ndarray], method: str) -> np.ndarray:
    """Merge ring vectors ``t_0..t_K`` into one neighbourhood vector."""
    if method not in NEIGHBOURHOOD_METHODS:
        raise ValueError(f"unknown neighbourhood method {method!r}")
    T = [np.asarray(t, dtype=float) for t in rings]
    if not T:
        raise ValueError("at least the ring-0 vector is required")
    if len({t.shape for t in T}) != 1 or T[0].ndim != 1:
        raise ValueError("ring vectors must all be 1-D with the same dimension")
    if method == "concatenate":
        return np.concatenate(T)
    w = neighbourhood_weights(len(T) - 1, method)
    return (w @ np.vstack(T)) / w.sum()


class NeighbourhoodEmbedder(TransformerMixin, BaseEstimator):
    """Turns a cell -> region-vector table into neighbourhood features.

    ``transform`` takes a list of cells and returns one row per cell.
    """

    def __init__(self, K: int = 5, method: str = "diminishing_squared"):
        self.K = K
        self.method = method

    def fit(self, cells=None, y=None, region_vectors=None):
        if self.method not in NEIGHBOURHOOD_METHODS:
            raise ValueError(f"unknown neighbourhood method {self.method!r}")
        if int(self.K) != self.K or self.K < 0:
            raise ValueError("K must be a non-negative integer")
        if region_vectors is not None:
            self.region_vectors_ = region_vectors
        return self

    def transform(self, cells, region_vectors: Mapping[str, np.ndarray] | None = None) -> np.ndarray:
        table = region_vectors if region_vectors is not None else self.region_vectors_
        dim = len(next(iter(table.values())))
        K = int(self.K)
        out = []
        for cell in cells:
            ring_vecs = []
            for members in hexgrid.rings(cell, K):
                acc = np.zeros(dim)
                for c in members:
                    v = table.get(c)
                    if v is not None:
                        acc += v
                ring_vecs.append(acc / len(members))
            out.append(combine_neighbourhood(ring_vecs, self.method))
        width = dim * (K + 1) if self.method == "concatenate" else dim
        return np.vstack(out) if out else np.zeros((0, width))
