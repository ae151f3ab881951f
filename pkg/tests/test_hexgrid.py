import math
from collections import deque

import h3
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from shapely.geometry import Point, Polygon

from hexstation import hexgrid
from hexstation.geometry import LocalProjection

# city-scale box, no pentagons nearby
LAT0, LAT1, LON0, LON1 = 50.0, 50.1, 19.8, 20.0


def random_cells(n, res, seed=0):
    rng = np.random.default_rng(seed)
    return [
        hexgrid.cell_of(float(la), float(lo), res)
        for la, lo in zip(rng.uniform(LAT0, LAT1, n), rng.uniform(LON0, LON1, n))
    ]


def bfs_distance(a, b, limit=50):
    if a == b:
        return 0
    seen, q = {a}, deque([(a, 0)])
    while q:
        c, d = q.popleft()
        for n in h3.grid_disk(c, 1):
            if n == b:
                return d + 1
            if n not in seen and d + 1 < limit:
                seen.add(n)
                q.append((n, d + 1))
    raise AssertionError("unreachable")


def bfs_ring(c, k):
    dist = {c: 0}
    q = deque([c])
    while q:
        x = q.popleft()
        if dist[x] == k:
            continue
        for n in h3.grid_disk(x, 1):
            if n not in dist:
                dist[n] = dist[x] + 1
                q.append(n)
    return {x for x, d in dist.items() if d == k}


class TestCellOf:
    def test_round_trip(self):
        for res in (9, 10, 11):
            for c in random_cells(200, res):
                p = hexgrid.centroid(c)
                assert hexgrid.cell_of(p.lat, p.lon, res) == c

    def test_nearby_points_same_cell(self):
        c = random_cells(1, 9)[0]
        p = hexgrid.centroid(c)
        dlat = 1.0 / 111_195.0
        assert hexgrid.cell_of(p.lat + dlat, p.lon, 9) == c

    @pytest.mark.parametrize("lat,lon", [(95, 0), (-91, 0), (0, 181), (float("nan"), 0), (0, float("inf"))])
    def test_invalid_coordinates(self, lat, lon):
        with pytest.raises(ValueError):
            hexgrid.cell_of(lat, lon, 9)

    def test_invalid_resolution(self):
        with pytest.raises(ValueError):
            hexgrid.cell_of(50, 20, 16)

    def test_mean_area_res9(self):
        areas = [hexgrid.cell_area_m2(c) for c in random_cells(1000, 9)]
        assert np.mean(areas) / 1e4 == pytest.approx(hexgrid.RESOLUTION_TABLE[9][1], rel=0.15)

    def test_id_format(self):
        c = random_cells(1, 9)[0]
        assert len(c) == 15 and c == c.lower()
        assert hexgrid.resolution(c) == 9


class TestRingDisk:
    def test_k0(self):
        c = random_cells(1, 10)[0]
        assert hexgrid.ring(c, 0) == {c}
        assert hexgrid.disk(c, 0) == {c}

    @pytest.mark.parametrize("k", [1, 2, 3, 5])
    def test_cardinalities(self, k):
        for c in random_cells(20, 9, seed=k):
            assert len(hexgrid.ring(c, k)) == 6 * k
            assert len(hexgrid.disk(c, k)) == 3 * k * k + 3 * k + 1

    def test_ring_matches_bfs(self):
        for c in random_cells(10, 11):
            for k in (1, 2, 3):
                assert hexgrid.ring(c, k) == bfs_ring(c, k)

    def test_disk_monotone_and_union(self):
        c = random_cells(1, 9)[0]
        for k in range(1, 5):
            assert hexgrid.disk(c, k) >= hexgrid.disk(c, k - 1)
            assert hexgrid.disk(c, k) == set().union(*(hexgrid.ring(c, i) for i in range(k + 1)))

    def test_rings_list(self):
        c = random_cells(1, 9)[0]
        rs = hexgrid.rings(c, 3)
        assert [len(r) for r in rs] == [1, 6, 12, 18]

    def test_negative_k(self):
        with pytest.raises(ValueError):
            hexgrid.ring(random_cells(1, 9)[0], -1)

    def test_pentagon_does_not_crash(self):
        p = h3.get_pentagons(9)[0]
        assert hexgrid.is_pentagon(p)
        assert len(hexgrid.ring(p, 1)) == 5
        assert len(hexgrid.cell_boundary(p)) >= 5
        assert hexgrid.grid_distance(p, next(iter(hexgrid.ring(p, 1)))) == 1


class TestGridDistance:
    def test_identity_and_ring(self):
        c = random_cells(1, 10)[0]
        assert hexgrid.grid_distance(c, c) == 0
        for n in hexgrid.ring(c, 1):
            assert hexgrid.grid_distance(c, n) == 1

    def test_matches_bfs(self):
        rng = np.random.default_rng(3)
        for a in random_cells(100, 10, seed=4):
            k = int(rng.integers(0, 11))
            ring = sorted(hexgrid.ring(a, k))
            b = ring[int(rng.integers(len(ring)))]
            assert hexgrid.grid_distance(a, b) == bfs_distance(a, b) == k

    def test_metric_axioms(self):
        rng = np.random.default_rng(5)
        base = random_cells(1, 9)[0]
        pool = sorted(hexgrid.disk(base, 6))
        for _ in range(200):
            a, b, c = (pool[i] for i in rng.integers(0, len(pool), 3))
            dab = hexgrid.grid_distance(a, b)
            assert dab == hexgrid.grid_distance(b, a)
            assert (dab == 0) == (a == b)
            assert hexgrid.grid_distance(a, c) <= dab + hexgrid.grid_distance(b, c)

    def test_mixed_resolution(self):
        a = random_cells(1, 9)[0]
        with pytest.raises(ValueError):
            hexgrid.grid_distance(a, h3.cell_to_children(a)[0])

    def test_distance_to_nearest(self):
        c = random_cells(1, 9)[0]
        far = next(iter(hexgrid.ring(c, 4)))
        near = next(iter(hexgrid.ring(c, 2)))
        assert hexgrid.distance_to_nearest(c, {far, near}) == 2
        assert hexgrid.distance_to_nearest(c, {c}) == 0
        assert hexgrid.distance_to_nearest(c, set()) is None


class TestRadius:
    def brute(self, lat, lon, radius, res):
        c = hexgrid.cell_of(lat, lon, res)
        edge = h3.average_hexagon_edge_length(res, unit="m")
        k = math.ceil(radius / (edge * math.sqrt(3))) + 2
        p = hexgrid.LatLng(lat, lon)
        return {x for x in hexgrid.disk(c, k) if hexgrid.haversine_m(hexgrid.centroid(x), p) <= radius} | {c}

    def test_radius_zero(self):
        assert hexgrid.cells_within_radius(50.05, 19.9, 0, 9) == {hexgrid.cell_of(50.05, 19.9, 9)}

    def test_negative_radius(self):
        with pytest.raises(ValueError):
            hexgrid.cells_within_radius(50.05, 19.9, -1, 9)

    @pytest.mark.parametrize("radius,res", [(2000, 9), (700, 10), (300, 11), (155, 9)])
    def test_matches_brute_force(self, radius, res):
        rng = np.random.default_rng(radius)
        for la, lo in zip(rng.uniform(LAT0, LAT1, 5), rng.uniform(LON0, LON1, 5)):
            assert hexgrid.cells_within_radius(la, lo, radius, res) == self.brute(la, lo, radius, res)

    def test_two_km_res9_count(self):
        n = len(hexgrid.cells_within_radius(50.05, 19.9, 2000, 9))
        assert 100 <= n <= 170

    def test_monotone_in_radius(self):
        prev = set()
        for r in (0, 100, 400, 900, 2000):
            cur = hexgrid.cells_within_radius(50.05, 19.9, r, 10)
            assert cur >= prev
            prev = cur


class TestBoundary:
    def test_hexagon_ccw_contains_centroid(self):
        for c in random_cells(50, 9):
            b = hexgrid.cell_boundary(c)
            assert len(b) == 6
            poly = Polygon([(v.lon, v.lat) for v in b])
            assert poly.exterior.is_ccw
            p = hexgrid.centroid(c)
            assert poly.contains(Point(p.lon, p.lat))

    @pytest.mark.parametrize("res", [9, 10, 11])
    def test_projected_area(self, res):
        areas = []
        for c in random_cells(100, res):
            p = hexgrid.centroid(c)
            proj = LocalProjection(p.lat, p.lon)
            b = hexgrid.cell_boundary(c)
            xs, ys = proj.forward([v.lon for v in b], [v.lat for v in b])
            areas.append(Polygon(list(zip(xs, ys))).area)
        assert np.mean(areas) / 1e4 == pytest.approx(hexgrid.RESOLUTION_TABLE[res][1], rel=0.2)


@settings(max_examples=200, deadline=None)
@given(
    lat=st.floats(-80, 80, allow_nan=False),
    lon=st.floats(-179.9, 180, allow_nan=False),
    res=st.sampled_from([9, 10, 11]),
)
def test_property_round_trip(lat, lon, res):
    c = hexgrid.cell_of(lat, lon, res)
    p = hexgrid.centroid(c)
    assert hexgrid.cell_of(p.lat, p.lon, res) == c
    assert hexgrid.distance_to_nearest(c, {c}) == 0
