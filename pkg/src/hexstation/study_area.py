"""Labeled cell universe of a city and per-cell object buckets."""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Optional, Union

import h3
import numpy as np
import shapely
from shapely.geometry import LineString, MultiPolygon, Point, Polygon

from . import hexgrid
from .geometry import LocalProjection
from .osm.ingest import GeoObject, StationRecord
from .osm.tags import ROAD_CATEGORIES, SHAPE_CATEGORIES, Category, categories, classify

log = logging.getLogger(__name__)

STATION_BUFFER_M = 2000.0
# polygons below this projected area are treated as degenerate
MIN_AREA_M2 = 1e-6


@dataclass
class CellBucket:
    """Everything known about the objects touching one cell.

    ``counts`` is per intersected object; ``point_counts`` covers objects not
    marked as areas (points and non-road lines). Tag measures are keyed by the
    deciding ``key=value`` pair so any vocabulary can be applied later.
    """

    cell: str
    counts: dict = field(default_factory=dict)
    point_counts: dict = field(default_factory=dict)
    area_sums: dict = field(default_factory=dict)
    length_sums: dict = field(default_factory=dict)
    tag_counts: dict = field(default_factory=dict)
    tag_areas: dict = field(default_factory=dict)

    _FIELDS = ("counts", "point_counts", "area_sums", "length_sums", "tag_counts", "tag_areas")

    def merge(self, other: "CellBucket") -> "CellBucket":
        out = CellBucket(self.cell)
        for name in self._FIELDS:
            acc = dict(getattr(self, name))
            for k, v in getattr(other, name).items():
                acc[k] = acc.get(k, 0) + v
            setattr(out, name, acc)
        return out

    def _add(self, name: str, key, value) -> None:
        d = getattr(self, name)
        d[key] = d.get(key, 0) + value

    def to_json(self) -> dict:
        d = {"cell": self.cell}
        for name in self._FIELDS:
            d[name] = {str(k): v for k, v in sorted(getattr(self, name).items(), key=lambda kv: str(kv[0]))}
        return d

    @classmethod
    def from_json(cls, d: dict) -> "CellBucket":
        b = cls(d["cell"])
        for name in ("counts", "point_counts", "area_sums", "length_sums"):
            setattr(b, name, {Category(k): v for k, v in d.get(name, {}).items()})
        b.tag_counts = dict(d.get("tag_counts", {}))
        b.tag_areas = dict(d.get("tag_areas", {}))
        return b

    def __eq__(self, other):
        if not isinstance(other, CellBucket) or other.cell != self.cell:
            return NotImplemented
        return all(
            _close_dicts(getattr(self, n), getattr(other, n)) for n in self._FIELDS
        )


def _close_dicts(a: dict, b: dict) -> bool:
    if set(a) != set(b):
        return False
    return all(np.isclose(a[k], b[k], rtol=1e-9, atol=1e-9) for k in a)


@dataclass
class CityDataset:
    city: str
    resolution: int
    cells: frozenset
    labels: dict
    stations: list = field(default_factory=list)
    buckets: dict = field(default_factory=dict)
    #: precomputed region-vector tables keyed by method (e.g. ``"CC"``, ``"ST300"``)
    embeddings: dict = field(default_factory=dict)

    def __post_init__(self):
        self.cells = frozenset(self.cells)
        if set(self.labels) != set(self.cells):
            raise ValueError("labels must be defined for exactly the dataset cells")

    @property
    def positives(self) -> list[str]:
        return sorted(c for c, v in self.labels.items() if v)

    @property
    def negatives(self) -> list[str]:
        return sorted(c for c, v in self.labels.items() if not v)

    @property
    def station_cells(self) -> frozenset:
        return frozenset(self.positives)

    def centroid(self) -> hexgrid.LatLng:
        return study_centre(self.cells)


def build_study_area(
    stations: Iterable[StationRecord], res: int, radius: float = STATION_BUFFER_M
) -> set[str]:
    """Union of station buffers, in cells."""
    stations = list(stations)
    if not stations:
        raise ValueError("at least one station is required to build a study area")
    out: set[str] = set()
    for s in stations:
        out |= hexgrid.cells_within_radius(s.position.lat, s.position.lon, radius, res)
    return out


def label_cells(cells: Iterable[str], stations: Iterable[StationRecord]) -> dict[str, bool]:
    cells = set(cells)
    if not cells:
        return {}
    res = hexgrid.resolution(next(iter(cells)))
    hits = {hexgrid.cell_of(s.position.lat, s.position.lon, res) for s in stations}
    return {c: c in hits for c in sorted(cells)}


def study_centre(cells: Iterable[str]) -> hexgrid.LatLng:
    pts = np.array([h3.cell_to_latlng(c) for c in cells])
    if len(pts) == 0:
        raise ValueError("empty cell set")
    return hexgrid.LatLng(float(pts[:, 0].mean()), float(pts[:, 1].mean()))


class _CellGeometry:
    """Projected cell polygons cached per cell."""

    def __init__(self, proj: LocalProjection, res: int):
        self.proj = proj
        self.res = res
        self.step = 0.25 * min(
            h3.average_hexagon_edge_length(res, unit="m"),
            hexgrid.RESOLUTION_TABLE.get(res, (np.inf,))[0],
        )
        self._polys: dict[str, Polygon] = {}

    def polygon(self, cell: str) -> Polygon:
        p = self._polys.get(cell)
        if p is None:
            b = hexgrid.cell_boundary(cell)
            xs, ys = self.proj.forward([v.lon for v in b], [v.lat for v in b])
            p = Polygon(list(zip(xs, ys)))
            self._polys[cell] = p
        return p

    def cell_at_xy(self, x, y) -> list[str]:
        lon, lat = self.proj.inverse(x, y)
        return [h3.latlng_to_cell(la, lo, self.res) for la, lo in zip(np.atleast_1d(lat), np.atleast_1d(lon))]

    def candidates(self, geom_xy, geom_ll) -> set[str]:
        """Superset of the cells a projected line/polygon can touch."""
        pts = []
        lines = []
        if isinstance(geom_xy, LineString):
            lines.append(geom_xy)
        else:
            parts = geom_xy.geoms if isinstance(geom_xy, MultiPolygon) else [geom_xy]
            for p in parts:
                lines.append(p.exterior)
                lines.extend(p.interiors)
        for ln in lines:
            n = max(2, int(np.ceil(ln.length / self.step)) + 1)
            d = np.linspace(0.0, ln.length, n)
            pts.append(shapely.get_coordinates(shapely.line_interpolate_point(ln, d)))
        xy = np.vstack(pts)
        seeds = set(self.cell_at_xy(xy[:, 0], xy[:, 1]))
        cand = hexgrid.neighbours(seeds)
        if not isinstance(geom_ll, LineString):
            parts = geom_ll.geoms if isinstance(geom_ll, MultiPolygon) else [geom_ll]
            for p in parts:
                shp = h3.LatLngPoly(
                    [(y, x) for x, y in p.exterior.coords[:-1]],
                    *[[(y, x) for x, y in r.coords[:-1]] for r in p.interiors],
                )
                try:
                    cand.update(h3.h3shape_to_cells(shp, self.res))
                except h3.H3BaseException:
                    # slivers can defeat polyfill; boundary samples already cover them
                    log.debug("polyfill failed, using boundary cells only")
        return cand


def _is_area(geom) -> bool:
    return isinstance(geom, (Polygon, MultiPolygon))


def assign_objects(
    cells: Iterable[str],
    objects: Iterable[GeoObject],
    projection: Optional[LocalProjection] = None,
    restrict: bool = False,
) -> dict[str, CellBucket]:
    """Distribute objects over the cells they touch.

    Points count in their containing cell; lines and polygons are clipped
    against every intersected cell and contribute their clipped length or
    area there, and one count per intersected cell. Buckets are produced for
    every touched cell unless ``restrict`` limits them to ``cells``.
    """
    cells = set(cells)
    if not cells:
        raise ValueError("empty cell set")
    res = hexgrid.resolution(next(iter(cells)))
    if projection is None:
        c = study_centre(cells)
        projection = LocalProjection(c.lat, c.lon)
    geo = _CellGeometry(projection, res)
    buckets: dict[str, CellBucket] = {}

    def bucket(cell: str) -> CellBucket:
        b = buckets.get(cell)
        if b is None:
            b = buckets[cell] = CellBucket(cell)
        return b

    for obj in objects:
        cats = categories(obj.tags)
        if not cats:
            continue
        tag = classify(obj.tags).tag
        for cell, measure in _touched(obj, geo):
            b = bucket(cell)
            area_like = _is_area(obj.geometry)
            for cat in cats:
                b._add("counts", cat, 1)
                if cat in ROAD_CATEGORIES:
                    if not area_like:
                        b._add("length_sums", cat, measure)
                elif cat is Category.WATER:
                    if area_like:
                        b._add("area_sums", cat, measure)
                elif area_like:
                    b._add("area_sums", cat, measure)
                else:
                    b._add("point_counts", cat, 1)
            if cats[0] in SHAPE_CATEGORIES:
                if area_like:
                    b._add("tag_areas", tag, measure)
                else:
                    b._add("tag_counts", tag, 1)

    if restrict:
        buckets = {c: b for c, b in buckets.items() if c in cells}
    return dict(sorted(buckets.items()))


def _touched(obj: GeoObject, geo: _CellGeometry) -> list[tuple[str, float]]:
    """(cell, clipped measure) pairs for one object."""
    g = obj.geometry
    if isinstance(g, Point):
        return [(h3.latlng_to_cell(g.y, g.x, geo.res), 0.0)]
    gxy = geo.proj.project(g)
    if isinstance(gxy, LineString):
        if gxy.length <= 0.0:
            log.info("object %s is a zero-length line; counted without length", obj.id)
            return [(c, 0.0) for c in sorted(set(_vertex_cells(g, geo.res)))]
        measure = shapely.length
    else:
        if not gxy.is_valid:
            gxy = shapely.union_all([p for p in shapely.get_parts(shapely.make_valid(gxy)) if _is_area(p)])
        if gxy.is_empty or gxy.area <= MIN_AREA_M2:
            log.info("object %s has zero area; counted without area", obj.id)
            return [(c, 0.0) for c in sorted(set(_vertex_cells(g, geo.res)))]
        measure = shapely.area
    cand = sorted(geo.candidates(gxy, g))
    polys = np.array([geo.polygon(c) for c in cand], dtype=object)
    vals = measure(shapely.intersection(polys, gxy))
    return [(c, float(v)) for c, v in zip(cand, vals) if v > 0.0]


def _vertex_cells(g, res: int) -> list[str]:
    coords = shapely.get_coordinates(g)
    return [h3.latlng_to_cell(y, x, res) for x, y in coords]


def build_city_dataset(
    city: str,
    stations: list[StationRecord],
    objects: Iterable[GeoObject],
    res: int,
    radius: float = STATION_BUFFER_M,
) -> CityDataset:
    cells = build_study_area(stations, res, radius)
    labels = label_cells(cells, stations)
    buckets = assign_objects(cells, objects)
    return CityDataset(city, res, frozenset(cells), labels, list(stations), buckets)


def write_buckets(buckets: dict, path: Union[str, Path]) -> None:
    with open(path, "w", encoding="utf-8") as f:
        for cell in sorted(buckets):
            f.write(json.dumps(buckets[cell].to_json(), sort_keys=True))
            f.write("\n")


def read_buckets(path: Union[str, Path]) -> dict[str, CellBucket]:
    out = {}
    with open(path, encoding="utf-8") as f:
        for line in f:
            if line.strip():
                b = CellBucket.from_json(json.loads(line))
                out[b.cell] = b
    return out


def write_labels(labels: dict, path: Union[str, Path]) -> None:
    with open(path, "w", encoding="utf-8") as f:
        f.write("cell,label\n")
        for c in sorted(labels):
            f.write(f"{c},{int(bool(labels[c]))}\n")


def read_labels(path: Union[str, Path]) -> dict[str, bool]:
    out = {}
    with open(path, encoding="utf-8") as f:
        header = f.readline().strip()
        if header != "cell,label":
            raise ValueError(f"{path}: unexpected header {header!r}")
        for line in f:
            if line.strip():
                c, v = line.strip().split(",")
                out[hexgrid.validate_cell(c)] = v == "1"
    return out
