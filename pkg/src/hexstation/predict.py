"""Whole-city probability maps and their GeoJSON/CSV export."""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Optional, Union

import numpy as np
from joblib import Parallel, delayed

from . import hexgrid
from .config import ConfigError, ExperimentConfig
from .evaluation import _check_dataset, _feature_rows, _train_iteration
from .features import FeatureBuilder
from .study_area import CityDataset

DEFAULT_THRESHOLD = 0.5


@dataclass
class PredictionMap:
    """Mean station probability per cell.

    ``probabilities`` always holds every cell; :meth:`filtered` is the view
    with cells below ``threshold`` removed.
    """

    city: str
    resolution: int
    probabilities: dict
    iterations_averaged: int = 1
    threshold: float = DEFAULT_THRESHOLD
    labels: Optional[dict] = None
    per_iteration: Optional[list] = field(default=None, repr=False)
    seed: Optional[int] = None

    def __post_init__(self):
        if not 0.0 <= self.threshold <= 1.0:
            raise ValueError(f"threshold must lie in [0, 1], got {self.threshold}")
        for c, p in self.probabilities.items():
            if not (math.isfinite(p) and 0.0 <= p <= 1.0):
                raise ValueError(f"probability of {c} is {p}, expected a value in [0, 1]")

    def filtered(self, threshold: Optional[float] = None) -> dict:
        t = self.threshold if threshold is None else threshold
        return {c: p for c, p in sorted(self.probabilities.items()) if p >= t}

    def write_csv(self, path: Union[str, Path]) -> None:
        with open(path, "w", newline="", encoding="utf-8") as f:
            w = csv.writer(f, lineterminator="\n")
            header = ["cell", "probability"] + (["station"] if self.labels is not None else [])
            w.writerow(header)
            for c in sorted(self.probabilities):
                row = [c, repr(float(self.probabilities[c]))]
                if self.labels is not None:
                    row.append(int(bool(self.labels.get(c, False))))
                w.writerow(row)

    def to_json(self) -> dict:
        return {
            "city": self.city,
            "resolution": self.resolution,
            "iterations_averaged": self.iterations_averaged,
            "threshold": self.threshold,
            "seed": self.seed,
            "probabilities": {c: float(p) for c, p in sorted(self.probabilities.items())},
            "labels": None if self.labels is None else {c: bool(v) for c, v in sorted(self.labels.items())},
        }

    @classmethod
    def from_json(cls, d: dict) -> "PredictionMap":
        return cls(
            d["city"], d["resolution"], dict(d["probabilities"]), d["iterations_averaged"],
            d["threshold"], d.get("labels"), seed=d.get("seed"),
        )


def _predict_iteration(cfg, train, rows, X_eval, i) -> np.ndarray:
    model, _ = _train_iteration(cfg, train, rows, i, split=False)
    return model.positive_proba(X_eval)


def predict_city(
    train_ds: CityDataset,
    eval_ds: CityDataset,
    cfg: ExperimentConfig,
    iterations: int = 100,
    threshold: float = DEFAULT_THRESHOLD,
    keep_iterations: bool = False,
    n_jobs: Optional[int] = None,
) -> PredictionMap:
    """Average the station probability of every eval cell over independently trained models.

    Model ``i`` is trained on a fresh sample of ``train_ds`` seeded by
    ``(cfg.seed, i)``. Pass the same dataset twice for a same-city map.

    Raises
    ------
    MissingEmbeddingError
        If ``eval_ds`` carries a precomputed embedding table that lacks cells.
    """
    if iterations < 1:
        raise ValueError("iterations must be positive")
    _check_dataset(cfg, train_ds)
    if eval_ds.resolution != train_ds.resolution:
        raise ConfigError("train and eval datasets have different resolutions")
    builder = FeatureBuilder(cfg).fit(train_ds)
    rows = _feature_rows(builder, train_ds)
    cells = sorted(eval_ds.cells)
    X_eval = builder.transform(eval_ds, cells)
    if X_eval.shape[1] != len(next(iter(rows.values()))):
        raise ConfigError("embedding dims of train and eval cities differ")
    maps = Parallel(n_jobs=n_jobs)(
        delayed(_predict_iteration)(cfg, train_ds, rows, X_eval, i) for i in range(iterations)
    )
    P = np.vstack(maps)
    mean = P.mean(axis=0)
    return PredictionMap(
        eval_ds.city,
        eval_ds.resolution,
        {c: float(p) for c, p in zip(cells, mean)},
        iterations,
        threshold,
        dict(eval_ds.labels),
        [dict(zip(cells, map(float, row))) for row in P] if keep_iterations else None,
        cfg.seed,
    )


def cell_ring(cell: str) -> list[list[float]]:
    """Closed lon/lat ring of a cell boundary."""
    pts = [[v.lon, v.lat] for v in hexgrid.cell_boundary(cell)]
    return pts + [pts[0]]


def export_geojson(
    pm: PredictionMap, labels: Optional[Mapping[str, bool]] = None, filtered: bool = True
) -> bytes:
    """FeatureCollection with one polygon per retained cell.

    Properties are ``cell``, ``probability`` and, when labels are known,
    ``station``. Coordinates are lon/lat.
    """
    labels = pm.labels if labels is None else labels
    cells = pm.filtered() if filtered else dict(sorted(pm.probabilities.items()))
    feats = []
    for c, p in cells.items():
        props = {"cell": c, "probability": float(p)}
        if labels is not None:
            props["station"] = bool(labels.get(c, False))
        feats.append(
            {
                "type": "Feature",
                "id": c,
                "geometry": {"type": "Polygon", "coordinates": [cell_ring(c)]},
                "properties": props,
            }
        )
    doc = {
        "type": "FeatureCollection",
        "features": feats,
        "properties": {
            "city": pm.city,
            "resolution": pm.resolution,
            "threshold": pm.threshold,
            "iterations_averaged": pm.iterations_averaged,
            "seed": pm.seed,
        },
    }
    return json.dumps(doc, ensure_ascii=False, sort_keys=True).encode("utf-8")
