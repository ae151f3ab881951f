"""File-based per-city store.

Layout under the store root::

    <city>/objects.jsonl          ingested OSM objects
    <city>/stations.csv           lat,lon,id
    <city>/meta.json              provenance of the ingest
    <city>/buckets_r<res>.jsonl   per-cell object buckets
    <city>/labels_r<res>.csv      cell,label over the study area
    <city>/emb_<key>_r<res>.csv   region vectors (cell, v0, v1, ...)
    <city>/encoder_<key>_r<res>.json
"""

from __future__ import annotations

import csv
import json
import os
import re
import tempfile
from pathlib import Path
from typing import Optional, Union

import numpy as np

from .osm.ingest import GeoObject, StationRecord, load_stations, read_jsonl, write_jsonl, write_stations
from .study_area import CityDataset, read_buckets, read_labels, write_buckets, write_labels

DEFAULT_STORE = "hexstation-store"
_CITY_RE = re.compile(r"^[A-Za-z0-9][A-Za-z0-9_.\- ]*$")


def store_root(path: Optional[Union[str, Path]] = None) -> Path:
    return Path(path or os.environ.get("HEXSTATION_STORE", DEFAULT_STORE))


def _atomic_write(path: Path, data: bytes) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "wb") as f:
            f.write(data)
        os.replace(tmp, path)
    except BaseException:
        Path(tmp).unlink(missing_ok=True)
        raise


class CityStore:
    def __init__(self, root: Union[str, Path], city: str):
        if not _CITY_RE.match(city):
            raise ValueError(f"invalid city name {city!r}")
        self.root = Path(root)
        self.city = city
        self.dir = self.root / city

    # paths
    @property
    def objects_path(self) -> Path:
        return self.dir / "objects.jsonl"

    @property
    def stations_path(self) -> Path:
        return self.dir / "stations.csv"

    @property
    def meta_path(self) -> Path:
        return self.dir / "meta.json"

    def buckets_path(self, res: int) -> Path:
        return self.dir / f"buckets_r{res}.jsonl"

    def labels_path(self, res: int) -> Path:
        return self.dir / f"labels_r{res}.csv"

    def embedding_path(self, key: str, res: int) -> Path:
        return self.dir / f"emb_{key}_r{res}.csv"

    def encoder_path(self, key: str, res: int) -> Path:
        return self.dir / f"encoder_{key}_r{res}.json"

    def _need(self, p: Path, hint: str) -> Path:
        if not p.exists():
            raise FileNotFoundError(f"{p} not found; run `hexstation {hint} --city {self.city}` first")
        return p

    # objects / stations
    def write_objects(self, objects, source: str) -> int:
        self.dir.mkdir(parents=True, exist_ok=True)
        n = write_jsonl(objects, self.objects_path)
        self.update_meta(objects_source=source, objects=n)
        return n

    def read_objects(self) -> list[GeoObject]:
        return read_jsonl(self._need(self.objects_path, "ingest"))

    def write_stations(self, stations: list[StationRecord], source: str) -> None:
        self.dir.mkdir(parents=True, exist_ok=True)
        write_stations(stations, self.stations_path)
        self.update_meta(stations_source=source, stations=len(stations))

    def read_stations(self) -> list[StationRecord]:
        return load_stations(self._need(self.stations_path, "stations").read_bytes(), self.city)

    def read_meta(self) -> dict:
        return json.loads(self.meta_path.read_text(encoding="utf-8")) if self.meta_path.exists() else {"city": self.city}

    def update_meta(self, **kw) -> None:
        meta = self.read_meta()
        meta.update(kw)
        _atomic_write(self.meta_path, (json.dumps(meta, indent=2, sort_keys=True) + "\n").encode("utf-8"))

    # study area
    def write_area(self, ds: CityDataset) -> None:
        self.dir.mkdir(parents=True, exist_ok=True)
        write_buckets(ds.buckets, self.buckets_path(ds.resolution))
        write_labels(ds.labels, self.labels_path(ds.resolution))

    def load_dataset(self, res: int, embeddings: bool = True) -> CityDataset:
        labels = read_labels(self._need(self.labels_path(res), f"area --res {res}"))
        buckets = read_buckets(self._need(self.buckets_path(res), f"area --res {res}"))
        stations = self.read_stations() if self.stations_path.exists() else []
        ds = CityDataset(self.city, res, frozenset(labels), labels, stations, buckets)
        if embeddings:
            for p in sorted(self.dir.glob(f"emb_*_r{res}.csv")):
                key = p.name[len("emb_") : -len(f"_r{res}.csv")]
                ds.embeddings[key] = read_embedding_csv(p)
        return ds


def write_embedding_csv(table: dict, path: Union[str, Path]) -> None:
    cells = sorted(table)
    dim = len(table[cells[0]]) if cells else 0
    with open(path, "w", newline="", encoding="utf-8") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(["cell"] + [f"v{i}" for i in range(dim)])
        for c in cells:
            w.writerow([c] + [repr(float(v)) for v in table[c]])


def read_embedding_csv(path: Union[str, Path]) -> dict:
    out = {}
    with open(path, newline="", encoding="utf-8") as f:
        r = csv.reader(f)
        header = next(r)
        if not header or header[0] != "cell":
            raise ValueError(f"{path}: not an embedding table")
        for row in r:
            if row:
                out[row[0]] = np.array([float(v) for v in row[1:]])
    return out
