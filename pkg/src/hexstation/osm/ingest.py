"""Reading OSM GeoJSON extracts and station registries, and JSONL persistence of objects."""

from __future__ import annotations

import csv
import io
import json
import logging
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Iterator, Optional, Union

from shapely.geometry import mapping, shape
from shapely.geometry.base import BaseGeometry

from ..hexgrid import LatLng, validate_latlng

log = logging.getLogger(__name__)

SUPPORTED_GEOMETRIES = ("Point", "LineString", "Polygon", "MultiPolygon")


class GeoJSONError(ValueError):
    """Malformed GeoJSON input; ``offset`` is the byte position of the problem."""

    def __init__(self, msg: str, offset: Optional[int] = None):
        super().__init__(msg if offset is None else f"{msg} (byte offset {offset})")
        self.offset = offset


class StationFileError(ValueError):
    def __init__(self, msg: str, line: Optional[int] = None):
        super().__init__(msg if line is None else f"line {line}: {msg}")
        self.line = line


@dataclass
class GeoObject:
    id: str
    geometry: BaseGeometry  # lon/lat, shapely
    tags: dict[str, str] = field(default_factory=dict)

    @property
    def geom_type(self) -> str:
        return self.geometry.geom_type

    def to_feature(self) -> dict:
        return {
            "type": "Feature",
            "id": self.id,
            "geometry": _geojson_geometry(self.geometry),
            "properties": dict(self.tags),
        }


@dataclass(frozen=True)
class StationRecord:
    city: str
    position: LatLng
    external_id: Optional[str] = None


def _geojson_geometry(geom: BaseGeometry) -> dict:
    m = mapping(geom)

    def listify(c):
        if isinstance(c, (tuple, list)) and c and isinstance(c[0], (tuple, list)):
            return [listify(x) for x in c]
        return list(c)

    return {"type": m["type"], "coordinates": listify(m["coordinates"])}


def _tags_from_properties(props) -> dict[str, str]:
    if not props:
        return {}
    tags = {}
    for k, v in props.items():
        if v is None or isinstance(v, (dict, list)):
            continue
        if isinstance(v, bool):
            v = "yes" if v else "no"
        tags[str(k)] = str(v)
    return tags


def _decode(stream: Union[bytes, str]) -> str:
    if isinstance(stream, str):
        return stream
    try:
        return stream.decode("utf-8-sig")
    except UnicodeDecodeError as e:
        raise GeoJSONError(f"input is not UTF-8: {e.reason}", e.start) from None


def feature_to_object(feat: dict, fallback_id: str) -> Optional[GeoObject]:
    """Convert one GeoJSON feature, or return None (with a warning) if unusable."""
    geom = feat.get("geometry")
    fid = feat.get("id")
    props = feat.get("properties") or {}
    if fid is None:
        fid = props.get("@id", props.get("id", fallback_id))
    fid = str(fid)
    if not geom:
        log.warning("feature %s has no geometry, skipped", fid)
        return None
    gtype = geom.get("type")
    if gtype not in SUPPORTED_GEOMETRIES:
        log.warning("feature %s has unsupported geometry type %s, skipped", fid, gtype)
        return None
    try:
        g = shape(geom)
    except Exception as e:  # shapely raises several types on bad coordinates
        log.warning("feature %s has invalid coordinates (%s), skipped", fid, e)
        return None
    if g.is_empty:
        log.warning("feature %s has empty geometry, skipped", fid)
        return None
    tags = {k: v for k, v in _tags_from_properties(props).items() if k not in ("@id",)}
    return GeoObject(fid, g, tags)


def parse_geojson(stream: Union[bytes, str]) -> list[GeoObject]:
    """Parse a GeoJSON FeatureCollection into objects, one per usable feature."""
    text = _decode(stream)
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as e:
        raise GeoJSONError(f"malformed JSON: {e.msg}", len(text[: e.pos].encode("utf-8"))) from None
    if not isinstance(doc, dict) or doc.get("type") != "FeatureCollection":
        raise GeoJSONError("top-level object is not a FeatureCollection", 0)
    feats = doc.get("features")
    if not isinstance(feats, list):
        raise GeoJSONError("FeatureCollection has no 'features' array", 0)
    out = []
    for i, feat in enumerate(feats):
        if not isinstance(feat, dict):
            log.warning("feature #%d is not an object, skipped", i)
            continue
        obj = feature_to_object(feat, f"f{i}")
        if obj is not None:
            out.append(obj)
    return out


def serialize_geojson(objects: Iterable[GeoObject]) -> bytes:
    doc = {"type": "FeatureCollection", "features": [o.to_feature() for o in objects]}
    return json.dumps(doc, ensure_ascii=False).encode("utf-8")


def write_jsonl(objects: Iterable[GeoObject], path: Union[str, Path]) -> int:
    n = 0
    path = Path(path)
    tmp = path.with_suffix(path.suffix + ".tmp")
    with open(tmp, "w", encoding="utf-8") as f:
        for o in objects:
            f.write(json.dumps(o.to_feature(), ensure_ascii=False, sort_keys=True))
            f.write("\n")
            n += 1
    os.replace(tmp, path)
    return n


def iter_jsonl(path: Union[str, Path]) -> Iterator[GeoObject]:
    with open(path, encoding="utf-8") as f:
        for lineno, line in enumerate(f, 1):
            if not line.strip():
                continue
            obj = feature_to_object(json.loads(line), f"l{lineno}")
            if obj is not None:
                yield obj


def read_jsonl(path: Union[str, Path]) -> list[GeoObject]:
    return list(iter_jsonl(path))


def _station_from_point(lat, lon, city, ext_id, where) -> StationRecord:
    try:
        pos = validate_latlng(float(lat), float(lon))
    except (TypeError, ValueError) as e:
        raise StationFileError(str(e), where) from None
    return StationRecord(city, pos, None if ext_id in (None, "") else str(ext_id))


def load_stations(stream: Union[bytes, str], city: str) -> list[StationRecord]:
    """Read stations from CSV (``lat,lon[,id]`` header) or GeoJSON points."""
    text = _decode(stream)
    if text.lstrip().startswith("{"):
        return _stations_from_geojson(text, city)
    if not text.strip():
        return []
    reader = csv.reader(io.StringIO(text))
    header = [h.strip().lower() for h in next(reader)]
    if "lat" not in header or "lon" not in header:
        raise StationFileError("station CSV header must contain lat and lon", 1)
    ilat, ilon = header.index("lat"), header.index("lon")
    iid = header.index("id") if "id" in header else None
    out = []
    for lineno, row in enumerate(reader, 2):
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) <= max(ilat, ilon):
            raise StationFileError("too few columns", lineno)
        ext = row[iid] if iid is not None and iid < len(row) else None
        out.append(_station_from_point(row[ilat], row[ilon], city, ext, lineno))
    return out


def _stations_from_geojson(text: str, city: str) -> list[StationRecord]:
    out = []
    for i, obj in enumerate(parse_geojson(text)):
        if obj.geom_type != "Point":
            raise StationFileError(f"station feature {obj.id} is not a Point", i + 1)
        ext = obj.tags.get("id", obj.id)
        out.append(_station_from_point(obj.geometry.y, obj.geometry.x, city, ext, i + 1))
    return out


def write_stations(stations: Iterable[StationRecord], path: Union[str, Path]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(["lat", "lon", "id"])
        for s in stations:
            w.writerow([repr(s.position.lat), repr(s.position.lon), s.external_id or ""])
