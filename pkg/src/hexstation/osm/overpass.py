"""Optional network fetch of OSM objects for a named administrative area.

Every successful response is cached on disk, so downstream steps can be
replayed offline. Settings may be overridden with ``HEXSTATION_OVERPASS_URL``,
``HEXSTATION_NOMINATIM_URL``, ``HEXSTATION_TIMEOUT`` and ``HEXSTATION_CACHE_DIR``.
"""

from __future__ import annotations

import hashlib
import logging
import os
import time
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Optional

import requests
from shapely.geometry import LineString, MultiPolygon, Point, Polygon

from .ingest import GeoObject, feature_to_object, parse_geojson, serialize_geojson
from .tags import _rules, CATEGORIES

log = logging.getLogger(__name__)

DEFAULT_OVERPASS = "https://overpass-api.de/api/interpreter"
DEFAULT_NOMINATIM = "https://nominatim.openstreetmap.org/search"

# tags whose closed ways are areas rather than rings
_AREA_KEYS = {
    "building", "landuse", "leisure", "natural", "amenity", "shop", "tourism",
    "historic", "water", "aeroway", "sport", "place", "area", "healthcare", "office",
}


class AreaLookupError(LookupError):
    pass


class FetchError(RuntimeError):
    pass


@dataclass
class OverpassConfig:
    endpoint: str = field(default_factory=lambda: os.environ.get("HEXSTATION_OVERPASS_URL", DEFAULT_OVERPASS))
    nominatim: str = field(default_factory=lambda: os.environ.get("HEXSTATION_NOMINATIM_URL", DEFAULT_NOMINATIM))
    timeout: float = field(default_factory=lambda: float(os.environ.get("HEXSTATION_TIMEOUT", "180")))
    cache_dir: Path = field(
        default_factory=lambda: Path(os.environ.get("HEXSTATION_CACHE_DIR", Path.home() / ".cache" / "hexstation"))
    )
    retries: int = 3
    backoff: float = 2.0
    offline: bool = False


def _query_keys() -> list[str]:
    keys = {"highway"}
    for cat in CATEGORIES:
        keys.update(_rules()[cat])
    return sorted(keys)


def build_query(area_id: int, timeout: float) -> str:
    parts = "".join(f'nwr["{k}"](area.a);' for k in _query_keys())
    return f"[out:json][timeout:{int(timeout)}];area({area_id})->.a;({parts});out geom;"


def _request(method: str, url: str, cfg: OverpassConfig, **kw) -> requests.Response:
    last = None
    for attempt in range(cfg.retries):
        try:
            r = requests.request(method, url, timeout=cfg.timeout, **kw)
            if r.status_code in (429, 502, 503, 504):
                raise FetchError(f"HTTP {r.status_code} from {url}")
            r.raise_for_status()
            return r
        except (requests.RequestException, FetchError) as e:
            last = e
            log.warning("request to %s failed (%s), attempt %d/%d", url, e, attempt + 1, cfg.retries)
            if attempt + 1 < cfg.retries:
                time.sleep(cfg.backoff * (2**attempt))
    raise FetchError(f"giving up on {url}: {last}")


def lookup_area(area_name: str, cfg: OverpassConfig) -> int:
    """Resolve an area name to an Overpass area id via the name-lookup service."""
    r = _request("GET", cfg.nominatim, cfg, params={"q": area_name, "format": "json", "limit": 5})
    for hit in r.json():
        if hit.get("osm_type") == "relation":
            return 3600000000 + int(hit["osm_id"])
        if hit.get("osm_type") == "way":
            return 2400000000 + int(hit["osm_id"])
    raise AreaLookupError(f"area {area_name!r} not found")


def _ring(geom: list) -> list[tuple[float, float]]:
    return [(p["lon"], p["lat"]) for p in geom]


def element_to_object(el: dict) -> Optional[GeoObject]:
    tags = el.get("tags") or {}
    oid = f"{el['type']}/{el['id']}"
    t = el["type"]
    if t == "node":
        g = Point(el["lon"], el["lat"])
    elif t == "way":
        coords = _ring(el.get("geometry") or [])
        if len(coords) < 2:
            return None
        closed = len(coords) >= 4 and coords[0] == coords[-1]
        if closed and (set(tags) & _AREA_KEYS) and tags.get("area") != "no":
            g = Polygon(coords)
        else:
            g = LineString(coords)
    elif t == "relation":
        outers = []
        for m in el.get("members") or []:
            coords = _ring(m.get("geometry") or [])
            if m.get("role") == "outer" and len(coords) >= 4 and coords[0] == coords[-1]:
                outers.append(Polygon(coords))
        if not outers:
            return None
        g = outers[0] if len(outers) == 1 else MultiPolygon(outers)
    else:
        return None
    feat = {"type": "Feature", "id": oid, "geometry": g.__geo_interface__, "properties": tags}
    return feature_to_object(feat, oid)


def fetch_overpass(
    area_name: str, endpoint: Optional[str] = None, cfg: Optional[OverpassConfig] = None
) -> list[GeoObject]:
    """Download objects inside a named area, with an on-disk response cache."""
    cfg = cfg or OverpassConfig()
    if endpoint:
        cfg = replace(cfg, endpoint=endpoint)
    key = hashlib.sha256(f"{cfg.endpoint}\n{cfg.nominatim}\n{area_name}".encode()).hexdigest()[:24]
    cached = Path(cfg.cache_dir) / f"overpass_{key}.geojson"
    if cached.exists():
        return parse_geojson(cached.read_bytes())
    if cfg.offline:
        raise FetchError(f"no cached response for {area_name!r} and offline mode is on")
    area_id = lookup_area(area_name, cfg)
    r = _request("POST", cfg.endpoint, cfg, data={"data": build_query(area_id, cfg.timeout)})
    try:
        elements = r.json().get("elements", [])
    except ValueError as e:
        raise FetchError(f"endpoint returned non-JSON: {e}") from None
    objects = [o for o in map(element_to_object, elements) if o is not None]
    payload = serialize_geojson(objects)
    cached.parent.mkdir(parents=True, exist_ok=True)
    tmp = cached.with_suffix(".tmp")
    tmp.write_bytes(payload)
    os.replace(tmp, cached)
    # re-parse so the live result equals any later cached replay
    return parse_geojson(payload)
