"""Independent reference computations used by the tests."""

from __future__ import annotations

from collections import Counter

import h3
import numpy as np
from shapely import contains_xy, get_coordinates, line_interpolate_point
from shapely.geometry import LineString, Polygon

from hexstation.geometry import LocalProjection


def shoelace(xy) -> float:
    xy = np.asarray(xy, dtype=float)
    x, y = xy[:, 0], xy[:, 1]
    return 0.5 * abs(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1)))


def _cells_of_xy(proj: LocalProjection, x, y, res: int) -> list[str]:
    lon, lat = proj.inverse(np.asarray(x), np.asarray(y))
    return [h3.latlng_to_cell(float(a), float(b), res) for a, b in zip(lat, lon)]


def mc_area_split(poly_xy: Polygon, proj: LocalProjection, res: int, n: int, rng) -> tuple[float, dict]:
    """Shoelace area and per-cell area from ``n`` uniform samples inside the polygon."""
    x0, y0, x1, y1 = poly_xy.bounds
    xs, ys = [], []
    got = 0
    while got < n:
        bx = rng.uniform(x0, x1, 2 * n)
        by = rng.uniform(y0, y1, 2 * n)
        keep = contains_xy(poly_xy, bx, by)
        xs.append(bx[keep])
        ys.append(by[keep])
        got += int(keep.sum())
    xs = np.concatenate(xs)[:n]
    ys = np.concatenate(ys)[:n]
    total = shoelace(poly_xy.exterior.coords)
    counts = Counter(_cells_of_xy(proj, xs, ys, res))
    return total, {c: total * k / n for c, k in counts.items()}


def mc_length_split(line_xy: LineString, proj: LocalProjection, res: int, n: int, rng) -> dict:
    """Per-cell length from ``n`` points drawn uniformly by arc length."""
    d = rng.uniform(0.0, line_xy.length, n)
    xy = get_coordinates(line_interpolate_point(line_xy, d))
    counts = Counter(_cells_of_xy(proj, xy[:, 0], xy[:, 1], res))
    return {c: line_xy.length * k / n for c, k in counts.items()}


def naive_confusion(pred: dict, labels: dict) -> dict:
    tp = tn = fp = fn = 0
    for c in pred:
        p, y = bool(pred[c]), bool(labels[c])
        if p and y:
            tp += 1
        elif not p and not y:
            tn += 1
        elif p:
            fp += 1
        else:
            fn += 1
    return {"tp": tp, "tn": tn, "fp": fp, "fn": fn}


def random_polygon(rng, cx, cy, r_max, n_vertices=None) -> Polygon:
    """Star-shaped simple polygon around (cx, cy)."""
    n = n_vertices or int(rng.integers(3, 12))
    ang = np.sort(rng.uniform(0, 2 * np.pi, n))
    rad = rng.uniform(0.2 * r_max, r_max, n)
    return Polygon(list(zip(cx + rad * np.cos(ang), cy + rad * np.sin(ang))))


def random_line(rng, cx, cy, r_max) -> LineString:
    n = int(rng.integers(2, 7))
    pts = rng.uniform(-r_max, r_max, (n, 2)) + [cx, cy]
    return LineString(pts)
