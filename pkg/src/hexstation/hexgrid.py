"""Hexagonal grid arithmetic on top of the H3 discrete global grid.

Cells are handled as 15-character lowercase hex strings, which is also the
form written to every file this package produces.
"""

from __future__ import annotations

import math
from collections import deque
from typing import Iterable, NamedTuple

import h3

EARTH_RADIUS_M = 6371007.180918475

#: resolution -> (average edge length in m, average area in ha) as published for H3
RESOLUTION_TABLE = {
    9: (174.38, 10.53),
    10: (65.91, 1.50),
    11: (24.91, 0.21),
}
PIPELINE_RESOLUTIONS = tuple(RESOLUTION_TABLE)


class LatLng(NamedTuple):
    lat: float
    lon: float


def validate_latlng(lat: float, lon: float) -> LatLng:
    lat = float(lat)
    lon = float(lon)
    if math.isnan(lat) or math.isnan(lon):
        raise ValueError("coordinates must not be NaN")
    if not -90.0 <= lat <= 90.0:
        raise ValueError(f"latitude {lat} outside [-90, 90]")
    if not -180.0 <= lon <= 180.0:
        raise ValueError(f"longitude {lon} outside [-180, 180]")
    if lon == -180.0:
        lon = 180.0
    return LatLng(lat, lon)


def validate_resolution(res: int) -> int:
    if isinstance(res, bool) or int(res) != res or not 0 <= int(res) <= 15:
        raise ValueError(f"resolution must be an integer in 0..15, got {res!r}")
    return int(res)


def validate_cell(cell: str) -> str:
    if not isinstance(cell, str) or not h3.is_valid_cell(cell):
        raise ValueError(f"invalid cell id {cell!r}")
    return cell


def cell_of(lat: float, lon: float, res: int) -> str:
    """Return the cell at ``res`` containing the point."""
    p = validate_latlng(lat, lon)
    return h3.latlng_to_cell(p.lat, p.lon, validate_resolution(res))


def resolution(cell: str) -> int:
    return h3.get_resolution(validate_cell(cell))


def is_pentagon(cell: str) -> bool:
    return h3.is_pentagon(cell)


def centroid(cell: str) -> LatLng:
    return LatLng(*h3.cell_to_latlng(cell))


def _check_k(k: int) -> int:
    if int(k) != k or k < 0:
        raise ValueError(f"k must be a non-negative integer, got {k!r}")
    return int(k)


def ring(cell: str, k: int) -> set[str]:
    """Cells at exactly grid distance ``k`` from ``cell``."""
    k = _check_k(k)
    if k == 0:
        return {cell}
    try:
        return set(h3.grid_ring(cell, k))
    except h3.H3BaseException:
        # pentagon distortion; fall back to set difference of disks
        return disk(cell, k) - disk(cell, k - 1)


def disk(cell: str, k: int) -> set[str]:
    """Union of ``ring(cell, i)`` for ``i`` in ``0..k``."""
    return set(h3.grid_disk(cell, _check_k(k)))


def rings(cell: str, k: int) -> list[set[str]]:
    """``[ring(cell, 0), ..., ring(cell, k)]`` computed from one disk expansion."""
    k = _check_k(k)
    out = [{cell}]
    seen = {cell}
    frontier = [cell]
    for _ in range(k):
        nxt = set()
        for c in frontier:
            for n in h3.grid_disk(c, 1):
                if n not in seen:
                    nxt.add(n)
        seen |= nxt
        out.append(nxt)
        frontier = list(nxt)
    return out


def grid_distance(a: str, b: str) -> int:
    """Minimal number of adjacency steps between two cells of equal resolution."""
    ra, rb = resolution(a), resolution(b)
    if ra != rb:
        raise ValueError(f"cells have different resolutions ({ra} vs {rb})")
    try:
        return h3.grid_distance(a, b)
    except h3.H3BaseException:
        return _bfs_distance(a, b)


def _bfs_distance(a: str, b: str, limit: int = 10_000) -> int:
    if a == b:
        return 0
    seen = {a}
    queue = deque([(a, 0)])
    while queue:
        c, d = queue.popleft()
        if d >= limit:
            break
        for n in h3.grid_disk(c, 1):
            if n == b:
                return d + 1
            if n not in seen:
                seen.add(n)
                queue.append((n, d + 1))
    raise ValueError(f"no path between {a} and {b} within {limit} steps")


def distance_to_nearest(cell: str, targets: set[str], max_k: int = 200) -> int | None:
    """Grid distance from ``cell`` to the closest member of ``targets``.

    Returns None when ``targets`` is empty.
    """
    if not targets:
        return None
    if cell in targets:
        return 0
    seen = {cell}
    frontier = {cell}
    for k in range(1, max_k + 1):
        nxt = set()
        for c in frontier:
            nxt.update(h3.grid_disk(c, 1))
        nxt -= seen
        if nxt & targets:
            return k
        seen |= nxt
        frontier = nxt
    return min(grid_distance(cell, t) for t in targets)


def haversine_m(a: LatLng, b: LatLng) -> float:
    lat1, lon1, lat2, lon2 = map(math.radians, (a[0], a[1], b[0], b[1]))
    h = math.sin((lat2 - lat1) / 2) ** 2 + math.cos(lat1) * math.cos(lat2) * math.sin((lon2 - lon1) / 2) ** 2
    return 2 * EARTH_RADIUS_M * math.asin(min(1.0, math.sqrt(h)))


def cells_within_radius(lat: float, lon: float, radius: float, res: int) -> set[str]:
    """Cells whose centroid lies within ``radius`` metres of the point.

    The cell containing the point is always included. Implemented as a
    flood fill over adjacency, expanding only through qualifying cells.
    """
    if radius < 0 or math.isnan(radius):
        raise ValueError(f"radius must be non-negative, got {radius}")
    p = validate_latlng(lat, lon)
    origin = cell_of(p.lat, p.lon, res)
    out = {origin}
    seen = {origin}
    queue = deque([origin])
    while queue:
        c = queue.popleft()
        for n in h3.grid_disk(c, 1):
            if n in seen:
                continue
            seen.add(n)
            if haversine_m(p, centroid(n)) <= radius:
                out.add(n)
                queue.append(n)
    return out


def cell_boundary(cell: str) -> list[LatLng]:
    """Boundary vertices, counterclockwise in lon/lat, first vertex not repeated."""
    verts = [LatLng(lat, lon) for lat, lon in h3.cell_to_boundary(validate_cell(cell))]
    # shoelace sign in (lon, lat); positive is counterclockwise
    s = 0.0
    for (la1, lo1), (la2, lo2) in zip(verts, verts[1:] + verts[:1]):
        s += lo1 * la2 - lo2 * la1
    if s < 0:
        verts.reverse()
    return verts


def cell_area_m2(cell: str) -> float:
    return h3.cell_area(cell, unit="m^2")


def to_int(cell: str) -> int:
    return h3.str_to_int(cell)


def neighbours(cells: Iterable[str]) -> set[str]:
    out: set[str] = set()
    for c in cells:
        out.update(h3.grid_disk(c, 1))
    return out
