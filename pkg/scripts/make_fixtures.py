"""Generate the synthetic fixture cities under tests/data/.

Each city is a cluster of stations with an urban density profile around its
centre. Station cells get more sustenance, shop and transport objects than
ordinary cells; a share of non-station cells are "decoys" with a similar but
weaker profile, so the classes overlap instead of separating perfectly.

    python scripts/make_fixtures.py [--out tests/data]
"""

from __future__ import annotations

import argparse
import json
import math
from pathlib import Path

import h3
import numpy as np
from shapely.geometry import Point, Polygon

from hexstation import hexgrid
from hexstation.osm.ingest import StationRecord
from hexstation.study_area import build_study_area

RES = 9
M_PER_DEG = 111_195.0

CITIES = {
    "alphaville": dict(lat=50.0614, lon=19.9366, n_stations=20, spread=1000.0, seed=11),
    "betatown": dict(lat=52.2297, lon=21.0122, n_stations=15, spread=1000.0, seed=23),
}

POI_TAGS = {
    "sustenance": [("amenity", "cafe"), ("amenity", "restaurant"), ("amenity", "fast_food"), ("amenity", "pub")],
    "shops": [("shop", "bakery"), ("shop", "clothes"), ("shop", "supermarket"), ("shop", "convenience")],
    "transport": [("highway", "bus_stop"), ("public_transport", "platform"), ("railway", "tram_stop")],
    "education": [("amenity", "school"), ("amenity", "university")],
    "tourism": [("tourism", "hotel"), ("tourism", "museum")],
    "healthcare": [("amenity", "pharmacy"), ("amenity", "clinic")],
    "finances": [("amenity", "bank"), ("amenity", "atm")],
}

# mean objects per cell: (station cell, decoy cell, ordinary cell at the centre)
RATES = {
    "sustenance": (5.0, 3.5, 1.6),
    "shops": (4.0, 3.0, 1.3),
    "transport": (2.0, 1.2, 0.5),
    "education": (0.4, 0.3, 0.3),
    "tourism": (0.8, 0.5, 0.3),
    "healthcare": (0.6, 0.4, 0.3),
    "finances": (0.8, 0.5, 0.3),
}
DECOY_SHARE = 0.15
# share of station cells drawn with the ordinary profile instead of the station one
WEAK_STATION_SHARE = 0.3
DECOY_SCALE_M = 1000.0
CYCLEWAY_SHARE = 0.6


def offset(lat, lon, dx, dy):
    return lat + dy / M_PER_DEG, lon + dx / (M_PER_DEG * math.cos(math.radians(lat)))


def place_stations(rng, lat0, lon0, n, spread):
    out, cells = [], set()
    for _ in range(100_000):
        if len(out) == n:
            break
        r = spread * math.sqrt(rng.random())
        a = 2 * math.pi * rng.random()
        lat, lon = offset(lat0, lon0, r * math.cos(a), r * math.sin(a))
        c = h3.latlng_to_cell(lat, lon, RES)
        if c in cells:
            continue
        cells.add(c)
        out.append((round(lat, 7), round(lon, 7)))
    if len(out) < n:
        raise RuntimeError(f"could not place {n} stations in distinct cells")
    return out


def point_in(rng, cell):
    poly = Polygon([(v.lon, v.lat) for v in hexgrid.cell_boundary(cell)])
    x0, y0, x1, y1 = poly.bounds
    while True:
        x, y = x0 + (x1 - x0) * rng.random(), y0 + (y1 - y0) * rng.random()
        if poly.contains(Point(x, y)):
            return round(x, 7), round(y, 7)


def square(lon, lat, half_m):
    la0, lo0 = offset(lat, lon, -half_m, -half_m)
    la1, lo1 = offset(lat, lon, half_m, half_m)
    ring = [[lo0, la0], [lo1, la0], [lo1, la1], [lo0, la1], [lo0, la0]]
    return [[[round(x, 7), round(y, 7)] for x, y in ring]]


def feature(fid, gtype, coords, tags):
    return {"type": "Feature", "id": fid, "geometry": {"type": gtype, "coordinates": coords}, "properties": tags}


def make_city(name, lat, lon, n_stations, spread, seed):
    rng = np.random.default_rng(seed)
    stations = place_stations(rng, lat, lon, n_stations, spread)
    recs = [StationRecord(name, hexgrid.LatLng(a, b)) for a, b in stations]
    cells = sorted(build_study_area(recs, RES))
    station_cells = {h3.latlng_to_cell(a, b, RES) for a, b in stations}
    negatives = [c for c in cells if c not in station_cells]
    # decoys favour the centre, where the stations are
    dist = np.array([hexgrid.haversine_m(hexgrid.centroid(c), hexgrid.LatLng(lat, lon)) for c in negatives])
    w = np.exp(-dist / DECOY_SCALE_M)
    decoys = set(rng.choice(negatives, size=int(DECOY_SHARE * len(negatives)), replace=False, p=w / w.sum()).tolist())
    ordered = sorted(station_cells)
    weak = set(rng.choice(ordered, size=int(round(WEAK_STATION_SHARE * len(ordered))), replace=False).tolist())

    feats = []
    fid = 0

    def add(gtype, coords, tags):
        nonlocal fid
        feats.append(feature(f"{name}/{fid}", gtype, coords, tags))
        fid += 1

    for c in cells:
        cl = hexgrid.centroid(c)
        d = hexgrid.haversine_m(cl, hexgrid.LatLng(lat, lon))
        urban = math.exp(-d / 2500.0)
        kind = 0 if c in station_cells and c not in weak else 1 if c in decoys else 2
        for cat, rates in RATES.items():
            lam = rates[kind] * (1.0 if kind < 2 else urban)
            for _ in range(rng.poisson(lam)):
                k, v = POI_TAGS[cat][rng.integers(len(POI_TAGS[cat]))]
                add("Point", list(point_in(rng, c)), {k: v})
        for _ in range(rng.poisson(2.0 + 3.0 * urban)):
            x, y = point_in(rng, c)
            add("Polygon", square(x, y, 6.0 + 6.0 * rng.random()), {"building": "yes"})
        if rng.random() < 0.05:
            x, y = point_in(rng, c)
            add("Polygon", square(x, y, 40.0), {"leisure": "park"})

    # street grid every ~450 m, short cycleways through busy cells
    half = spread + 2600.0
    for i, t in enumerate(np.arange(-half, half + 1, 450.0)):
        kind = "primary" if i % 4 == 0 else "residential"
        a = offset(lat, lon, t, -half)
        b = offset(lat, lon, t, half)
        add("LineString", [[round(a[1], 7), round(a[0], 7)], [round(b[1], 7), round(b[0], 7)]], {"highway": kind})
        a = offset(lat, lon, -half, t)
        b = offset(lat, lon, half, t)
        add("LineString", [[round(a[1], 7), round(a[0], 7)], [round(b[1], 7), round(b[0], 7)]], {"highway": kind})
    busy = [c for c in cells if (c in station_cells and c not in weak) or c in decoys]
    for c in busy:
        if rng.random() >= CYCLEWAY_SHARE:
            continue
        s_lat, s_lon = hexgrid.centroid(c)
        a = offset(s_lat, s_lon, -150.0, -60.0)
        b = offset(s_lat, s_lon, 150.0, 60.0)
        add("LineString", [[round(a[1], 7), round(a[0], 7)], [round(b[1], 7), round(b[0], 7)]], {"highway": "cycleway"})

    # one lake on the outskirts
    la, lo = offset(lat, lon, -spread - 1500.0, spread + 900.0)
    add("Polygon", square(lo, la, 220.0), {"natural": "water"})

    return stations, {"type": "FeatureCollection", "features": feats}, {
        "city": name,
        "resolution": RES,
        "seed": seed,
        "stations": len(stations),
        "station_cells": len(station_cells),
        "study_cells": len(cells),
        "objects": len(feats),
        "decoy_share": DECOY_SHARE,
        "weak_station_share": WEAK_STATION_SHARE,
    }


def main(argv=None):
    ap = argparse.ArgumentParser()
    ap.add_argument("--out", default=str(Path(__file__).resolve().parent.parent / "tests" / "data"))
    args = ap.parse_args(argv)
    for name, params in CITIES.items():
        stations, fc, manifest = make_city(name, **params)
        d = Path(args.out) / name
        d.mkdir(parents=True, exist_ok=True)
        (d / "objects.geojson").write_text(json.dumps(fc, separators=(",", ":")) + "\n", encoding="utf-8")
        with open(d / "stations.csv", "w", encoding="utf-8") as f:
            f.write("lat,lon,id\n")
            for i, (a, b) in enumerate(stations):
                f.write(f"{a!r},{b!r},{name[:1]}{i:03d}\n")
        (d / "manifest.json").write_text(json.dumps(manifest, indent=2) + "\n", encoding="utf-8")
        print(manifest)


if __name__ == "__main__":
    main()
