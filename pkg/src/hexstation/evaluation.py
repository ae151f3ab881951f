"""Metrics, repeated experiments, sweeps, cross-city transfer and city statistics."""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Optional, Sequence, Union

import h3
import numpy as np
from joblib import Parallel, delayed
from sklearn.model_selection import train_test_split

from . import hexgrid
from .config import ConfigError, ExperimentConfig, derive_seed
from .features import FeatureBuilder
from .learning import StationModel, sample_training_set
from .osm.tags import CATEGORIES
from .study_area import CityDataset

log = logging.getLogger(__name__)

METRICS = ("accuracy", "balanced_accuracy", "precision", "recall", "f1", "custom")
MIN_POSITIVES = 5
MIN_CITY_STATIONS = 100


class DatasetError(ValueError):
    pass


@dataclass
class MetricsReport:
    """Metric means and standard deviations over ``iterations`` runs.

    A metric that is undefined in some runs (no actual positives for recall,
    no predicted positives for precision) is averaged over the runs where it
    is defined; ``undefined[m]`` counts the others. A metric undefined in
    every run has mean NaN.
    """

    means: dict
    stds: dict
    iterations: int = 1
    undefined: dict = field(default_factory=dict)

    def __getattr__(self, name):
        if name in METRICS:
            return self.means[name]
        raise AttributeError(name)

    def is_defined(self, metric: str) -> bool:
        return not math.isnan(self.means[metric])

    def row(self) -> dict:
        out = {}
        for m in METRICS:
            out[f"{m}_mean"] = self.means[m]
        for m in METRICS:
            out[f"{m}_std"] = self.stds[m]
        for m in METRICS:
            out[f"{m}_undefined"] = self.undefined.get(m, 0)
        out["iterations"] = self.iterations
        return out

    @classmethod
    def aggregate(cls, reports: Sequence["MetricsReport"]) -> "MetricsReport":
        if not reports:
            raise ValueError("nothing to aggregate")
        means, stds, undefined = {}, {}, {}
        for m in METRICS:
            vals = np.array([r.means[m] for r in reports], dtype=float)
            ok = vals[~np.isnan(vals)]
            undefined[m] = sum(r.undefined.get(m, 0) for r in reports)
            means[m] = float(ok.mean()) if len(ok) else math.nan
            stds[m] = float(ok.std()) if len(ok) else math.nan
        return cls(means, stds, sum(r.iterations for r in reports), undefined)


# --------------------------------------------------------------------------
# metrics


def station_distances(cells: Iterable[str], station_cells: Iterable[str], max_k: int = 10_000) -> dict:
    """Grid distance from each cell to the nearest station cell.

    Multi-source breadth-first search over the grid, started from all
    station cells and stopped once every requested cell has been reached.
    Cells are absent from the result when there are no station cells.
    """
    want = set(cells)
    sources = set(station_cells)
    if not want or not sources:
        return {}
    out = {c: 0 for c in want & sources}
    seen = set(sources)
    frontier = sources
    k = 0
    while len(out) < len(want) and frontier and k < max_k:
        k += 1
        nxt = set()
        for c in frontier:
            nxt.update(h3.grid_disk(c, 1))
        nxt -= seen
        seen |= nxt
        for c in nxt & want:
            out[c] = k
        frontier = nxt
    for c in want - set(out):
        out[c] = hexgrid.distance_to_nearest(c, sources)
    return out


def compute_metrics(
    pred: Mapping[str, bool],
    labels: Mapping[str, bool],
    station_cells: Iterable[str],
    distances: Optional[Mapping[str, int]] = None,
) -> MetricsReport:
    """Confusion-matrix metrics plus the distance-discounted custom score.

    In the custom score a true positive or true negative scores 1, a false
    negative 0 and a false positive ``1 / (k + 1)`` with ``k`` the grid
    distance to the nearest station cell; the score is averaged over all
    evaluated cells.
    """
    if set(pred) != set(labels):
        raise ValueError("predictions and labels must cover the same cells")
    if not pred:
        raise ValueError("cannot score an empty set of cells")
    cells = sorted(pred)
    p = np.array([bool(pred[c]) for c in cells])
    y = np.array([bool(labels[c]) for c in cells])
    tp = int(np.sum(p & y))
    tn = int(np.sum(~p & ~y))
    fp = int(np.sum(p & ~y))
    fn = int(np.sum(~p & y))
    n = len(cells)

    fp_cells = [c for c, pi, yi in zip(cells, p, y) if pi and not yi]
    if fp_cells:
        if distances is None or any(c not in distances for c in fp_cells):
            distances = station_distances(fp_cells, station_cells)
        fp_score = sum(1.0 / (distances[c] + 1) for c in fp_cells if distances.get(c) is not None)
    else:
        fp_score = 0.0

    nan = math.nan
    tpr = tp / (tp + fn) if tp + fn else nan
    tnr = tn / (tn + fp) if tn + fp else nan
    if math.isnan(tpr):
        bal = tnr
    elif math.isnan(tnr):
        bal = tpr
    else:
        bal = 0.5 * (tpr + tnr)
    means = {
        "accuracy": (tp + tn) / n,
        "balanced_accuracy": bal,
        "precision": tp / (tp + fp) if tp + fp else nan,
        "recall": tpr,
        # 2TP / (2TP + FP + FN) is 0 whenever precision + recall is 0
        "f1": 2 * tp / (2 * tp + fp + fn) if 2 * tp + fp + fn else nan,
        "custom": (tp + tn + fp_score) / n,
    }
    undefined = {m: int(math.isnan(v)) for m, v in means.items()}
    return MetricsReport(means, {m: 0.0 for m in METRICS}, 1, undefined)


# --------------------------------------------------------------------------
# experiments


def _check_dataset(cfg: ExperimentConfig, ds: CityDataset) -> None:
    if ds.resolution != cfg.resolution:
        raise ConfigError(f"{ds.city} is built at resolution {ds.resolution}, config asks for {cfg.resolution}")
    if len(ds.positives) < MIN_POSITIVES:
        raise DatasetError(f"{ds.city} has {len(ds.positives)} station cells, at least {MIN_POSITIVES} are needed")


def _feature_rows(builder: FeatureBuilder, ds: CityDataset) -> dict[str, np.ndarray]:
    cells = sorted(ds.cells)
    X = builder.transform(ds, cells)
    return dict(zip(cells, X))


def _stack(rows: Mapping[str, np.ndarray], cells: Sequence[str]) -> np.ndarray:
    return np.vstack([rows[c] for c in cells])


def _train_iteration(cfg: ExperimentConfig, ds: CityDataset, rows: Mapping, i: int, split: bool):
    """Sample, optionally split 80/20, fit. Returns (model, test cells)."""
    seed = derive_seed(cfg.seed, i)
    rng = np.random.default_rng(seed)
    cells = sample_training_set(ds.labels, cfg.imbalance_ratio, rng)
    y = np.array([int(ds.labels[c]) for c in cells])
    test: list[str] = []
    if split:
        cells, test = train_test_split(cells, test_size=0.2, stratify=y, random_state=seed % 2**32)
        y = np.array([int(ds.labels[c]) for c in cells])
    model = StationModel(cfg, seed=derive_seed(cfg.seed, i, 1)).fit(_stack(rows, cells), y)
    return model, sorted(test)


def _one_iteration(cfg, ds, rows, distances, i) -> MetricsReport:
    model, test = _train_iteration(cfg, ds, rows, i, split=True)
    pred = model.predict(_stack(rows, test), threshold=cfg.threshold)
    return compute_metrics(
        dict(zip(test, pred.astype(bool))), {c: ds.labels[c] for c in test}, ds.station_cells, distances
    )


def run_experiment(
    cfg: ExperimentConfig, ds: CityDataset, n_jobs: Optional[int] = None, builder: Optional[FeatureBuilder] = None
) -> MetricsReport:
    """Repeated sample/split/fit/score on one city.

    Iteration ``i`` draws its training sample, its stratified 80/20 split and
    its model seed from ``(cfg.seed, i)``, so reports do not depend on
    ``n_jobs``.
    """
    _check_dataset(cfg, ds)
    builder = builder or FeatureBuilder(cfg).fit(ds)
    rows = _feature_rows(builder, ds)
    distances = station_distances(ds.cells, ds.station_cells)
    reports = Parallel(n_jobs=n_jobs)(
        delayed(_one_iteration)(cfg, ds, rows, distances, i) for i in range(cfg.iterations)
    )
    return MetricsReport.aggregate(reports)


@dataclass
class SweepRow:
    config: ExperimentConfig
    report: Optional[MetricsReport] = None
    error: Optional[str] = None

    def as_dict(self) -> dict:
        d = {k: v for k, v in self.config.to_dict().items() if k != "schema"}
        if self.report is not None:
            d.update(self.report.row())
        else:
            d.update({f"{m}_mean": math.nan for m in METRICS})
            d.update({f"{m}_std": math.nan for m in METRICS})
            d.update({f"{m}_undefined": 0 for m in METRICS})
            d["iterations"] = 0
        d["error"] = self.error or ""
        return d


def sweep(
    grid: Sequence[ExperimentConfig],
    ds: Union[CityDataset, Mapping[int, CityDataset]],
    n_jobs: Optional[int] = None,
) -> list[SweepRow]:
    """One report per config, in grid order.

    ``ds`` may map resolution to dataset for grids that vary the
    resolution. A failing config is recorded with its error message and the
    sweep moves on.
    """
    grid = list(grid)
    if not grid:
        raise ValueError("empty parameter grid")
    out = []
    for cfg in grid:
        try:
            city = ds[cfg.resolution] if isinstance(ds, Mapping) else ds
            out.append(SweepRow(cfg, run_experiment(cfg, city, n_jobs=n_jobs)))
        except Exception as e:  # noqa: BLE001 - every failure is reported in the table
            log.warning("config %s failed: %s", cfg, e)
            out.append(SweepRow(cfg, error=f"{type(e).__name__}: {e}"))
    return out


def _fmt(v) -> str:
    if isinstance(v, float):
        return "nan" if math.isnan(v) else repr(v)
    if v is None:
        return ""
    return str(v)


def write_results_csv(rows: Sequence[SweepRow], path: Union[str, Path]) -> None:
    dicts = [r.as_dict() for r in rows]
    if not dicts:
        raise ValueError("no rows to write")
    with open(path, "w", newline="", encoding="utf-8") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(list(dicts[0]))
        for d in dicts:
            w.writerow([_fmt(v) for v in d.values()])


# --------------------------------------------------------------------------
# transfer


def _transfer_iteration(cfg, train, rows_train, eval_ds, X_eval, eval_cells, distances, i) -> MetricsReport:
    model, _ = _train_iteration(cfg, train, rows_train, i, split=False)
    pred = model.predict(X_eval, threshold=cfg.threshold).astype(bool)
    return compute_metrics(dict(zip(eval_cells, pred)), eval_ds.labels, eval_ds.station_cells, distances)


def cross_city(
    train: CityDataset,
    eval_ds: CityDataset,
    cfg: ExperimentConfig,
    iterations: int = 100,
    n_jobs: Optional[int] = None,
) -> MetricsReport:
    """Train on samples of one city and score every cell of another."""
    _check_dataset(cfg, train)
    if eval_ds.resolution != train.resolution:
        raise ConfigError(f"resolutions differ: {train.city}={train.resolution}, {eval_ds.city}={eval_ds.resolution}")
    builder = FeatureBuilder(cfg).fit(train)
    rows_train = _feature_rows(builder, train)
    eval_cells = sorted(eval_ds.cells)
    X_eval = builder.transform(eval_ds, eval_cells)
    d_train = len(next(iter(rows_train.values())))
    if X_eval.shape[1] != d_train:
        raise ConfigError(
            f"embedding dims differ: {train.city} has {d_train}, {eval_ds.city} has {X_eval.shape[1]}"
        )
    if not eval_ds.positives:
        log.warning("%s has no station cells; recall is undefined", eval_ds.city)
    distances = station_distances(eval_cells, eval_ds.station_cells)
    reports = Parallel(n_jobs=n_jobs)(
        delayed(_transfer_iteration)(cfg, train, rows_train, eval_ds, X_eval, eval_cells, distances, i)
        for i in range(iterations)
    )
    return MetricsReport.aggregate(reports)


@dataclass
class TransferMatrix:
    """Rows are training cities, columns evaluation cities."""

    cities: list
    recall: np.ndarray
    accuracy: np.ndarray
    reports: dict = field(default_factory=dict)

    def write_csv(self, out_dir: Union[str, Path]) -> tuple[Path, Path]:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        paths = []
        for name, M in (("recall", self.recall), ("accuracy", self.accuracy)):
            p = out_dir / f"transfer_{name}.csv"
            with open(p, "w", newline="", encoding="utf-8") as f:
                w = csv.writer(f, lineterminator="\n")
                w.writerow(["train\\eval", *self.cities])
                for city, row in zip(self.cities, M):
                    w.writerow([city, *[_fmt(float(v)) for v in row]])
            paths.append(p)
        return paths[0], paths[1]


def transfer_matrix(
    cities: Sequence[CityDataset], cfg: ExperimentConfig, iterations: int = 100, n_jobs: Optional[int] = None
) -> TransferMatrix:
    """Cross-city runs for every ordered pair, cities ordered by station count."""
    if len(cities) < 2:
        raise ValueError("a transfer matrix needs at least two cities")
    names = [c.city for c in cities]
    if len(set(names)) != len(names):
        raise ValueError("city names must be unique")
    order = sorted(cities, key=lambda c: (-len(c.positives), c.city))
    n = len(order)
    R = np.full((n, n), math.nan)
    A = np.full((n, n), math.nan)
    reports = {}
    for i, tr in enumerate(order):
        for j, ev in enumerate(order):
            rep = cross_city(tr, ev, cfg, iterations=iterations, n_jobs=n_jobs)
            reports[(tr.city, ev.city)] = rep
            R[i, j] = rep.means["recall"]
            A[i, j] = rep.means["accuracy"]
    return TransferMatrix([c.city for c in order], R, A, reports)


def random_baseline_recall(ds: CityDataset) -> float:
    """Expected recall of a classifier that says "station" at the city's positive rate."""
    return len(ds.positives) / len(ds.cells)


# --------------------------------------------------------------------------
# descriptive statistics


@dataclass
class EdaReport:
    cities: list
    stations: dict
    cells: dict
    population_per_station: dict
    category_totals: dict
    category_means: dict
    normalized: dict
    selected: dict = field(default_factory=dict)

    def write_csv(self, path: Union[str, Path]) -> None:
        cats = [c.value for c in CATEGORIES]
        with open(path, "w", newline="", encoding="utf-8") as f:
            w = csv.writer(f, lineterminator="\n")
            w.writerow(
                ["city", "stations", "selected", "cells", "population_per_station"]
                + [f"total_{c}" for c in cats]
                + [f"norm_{c}" for c in cats]
            )
            for city in self.cities:
                w.writerow(
                    [city, self.stations[city], int(self.selected.get(city, False)), self.cells[city],
                     _fmt(self.population_per_station.get(city))]
                    + [_fmt(float(self.category_totals[city][c])) for c in cats]
                    + [_fmt(float(self.normalized[city][c])) for c in cats]
                )


def select_cities(station_counts: Mapping[str, int], min_stations: int = MIN_CITY_STATIONS) -> list[str]:
    """Cities with at least ``min_stations`` stations, sorted by name.

    Smaller systems give too few positive cells to learn from.
    """
    return sorted(c for c, n in station_counts.items() if n >= min_stations)


def population_per_station(population: float, n_stations: int) -> float:
    if n_stations == 0:
        raise ZeroDivisionError("city has no stations; population per station is undefined")
    return population / n_stations


def eda_stats(
    datasets: Sequence[CityDataset],
    populations: Optional[Mapping[str, float]] = None,
    min_stations: int = MIN_CITY_STATIONS,
) -> EdaReport:
    """Per-city station counts, object totals and normalized per-cell means.

    Per-cell means of each category are min-max normalized across cities; a
    category with equal means everywhere (including the single-city case)
    normalizes to 0.
    """
    if not datasets:
        raise ValueError("no datasets given")
    populations = populations or {}
    cities = [d.city for d in datasets]
    stations, cells, pps, totals, means = {}, {}, {}, {}, {}
    for ds in datasets:
        if ds.resolution != 9:
            log.warning("%s is built at resolution %d; category statistics are usually compared at 9", ds.city, ds.resolution)
        stations[ds.city] = len(ds.stations)
        cells[ds.city] = len(ds.cells)
        if ds.city in populations:
            pps[ds.city] = population_per_station(populations[ds.city], len(ds.stations))
        t = {c.value: 0.0 for c in CATEGORIES}
        for cell in ds.cells:
            b = ds.buckets.get(cell)
            if b is None:
                continue
            for cat, v in b.counts.items():
                t[getattr(cat, "value", cat)] += v
        totals[ds.city] = t
        means[ds.city] = {k: v / len(ds.cells) for k, v in t.items()}
    normalized = {city: {} for city in cities}
    for c in CATEGORIES:
        col = np.array([means[city][c.value] for city in cities])
        lo, span = col.min(), col.max() - col.min()
        for city, v in zip(cities, col):
            normalized[city][c.value] = float((v - lo) / span) if span > 0 else 0.0
    chosen = set(select_cities(stations, min_stations))
    selected = {c: c in chosen for c in cities}
    return EdaReport(cities, stations, cells, pps, totals, means, normalized, selected)
