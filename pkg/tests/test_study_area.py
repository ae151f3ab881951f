import numpy as np
import pytest
from shapely.geometry import LineString, Point, Polygon

from hexstation import hexgrid
from hexstation.geometry import LocalProjection
from hexstation.osm import GeoObject, StationRecord
from hexstation.osm.tags import Category
from hexstation.study_area import (
    CellBucket,
    CityDataset,
    assign_objects,
    build_study_area,
    label_cells,
    read_buckets,
    read_labels,
    write_buckets,
    write_labels,
)

from .oracles import mc_area_split, mc_length_split, random_line, random_polygon, shoelace

LAT, LON = 50.06, 19.94


def station(lat=LAT, lon=LON):
    return StationRecord("t", hexgrid.LatLng(lat, lon))


def offset(lat, lon, dx, dy):
    return lat + dy / 111_195.0, lon + dx / (111_195.0 * np.cos(np.radians(lat)))


class TestStudyArea:
    def test_one_station(self):
        assert build_study_area([station()], 9) == hexgrid.cells_within_radius(LAT, LON, 2000, 9)

    def test_far_stations_disjoint(self):
        b = offset(LAT, LON, 10_000, 0)
        one = build_study_area([station()], 9)
        two = build_study_area([station(*b)], 9)
        both = build_study_area([station(), station(*b)], 9)
        assert not one & two
        assert len(both) == len(one) + len(two)

    def test_monotone(self):
        a = build_study_area([station()], 10)
        b = build_study_area([station(), station(*offset(LAT, LON, 900, 300))], 10)
        assert a <= b

    def test_empty(self):
        with pytest.raises(ValueError):
            build_study_area([], 9)


class TestLabels:
    def test_centroid_station(self):
        c = hexgrid.cell_of(LAT, LON, 9)
        p = hexgrid.centroid(c)
        cells = build_study_area([station(p.lat, p.lon)], 9)
        labels = label_cells(cells, [station(p.lat, p.lon)])
        assert labels[c] is True
        assert sum(labels.values()) == 1

    def test_recount(self):
        rng = np.random.default_rng(0)
        sts = [station(*offset(LAT, LON, *rng.uniform(-1500, 1500, 2))) for _ in range(30)]
        cells = build_study_area(sts, 10)
        labels = label_cells(cells, sts)
        expected = {hexgrid.cell_of(s.position.lat, s.position.lon, 10) for s in sts} & cells
        assert {c for c, v in labels.items() if v} == expected

    def test_dataset_invariant(self):
        with pytest.raises(ValueError):
            CityDataset("x", 9, {"a"}, {"b": True})


class TestAssign:
    def test_point_counts_once(self):
        c = hexgrid.cell_of(LAT, LON, 9)
        p = hexgrid.centroid(c)
        b = assign_objects({c}, [GeoObject("p", Point(p.lon, p.lat), {"shop": "bakery"})])
        assert list(b) == [c]
        assert b[c].counts == {Category.SHOPS: 1}
        assert b[c].point_counts == {Category.SHOPS: 1}
        assert b[c].tag_counts == {"shop=bakery": 1}

    def test_road_split_between_two_cells(self):
        c = hexgrid.cell_of(LAT, LON, 9)
        n = sorted(hexgrid.ring(c, 1))[0]
        pc, pn = hexgrid.centroid(c), hexgrid.centroid(n)
        proj = LocalProjection(pc.lat, pc.lon)
        (xc, xn), (yc, yn) = proj.forward([pc.lon, pn.lon], [pc.lat, pn.lat])
        mx, my = (xc + xn) / 2, (yc + yn) / 2
        u = np.array([xn - xc, yn - yc]) / np.hypot(xn - xc, yn - yc)
        a, b = np.array([mx, my]) - 150 * u, np.array([mx, my]) + 150 * u
        lon, lat = proj.inverse(np.array([a[0], b[0]]), np.array([a[1], b[1]]))
        road = GeoObject("r", LineString(list(zip(lon, lat))), {"highway": "residential"})
        out = assign_objects({c, n}, [road], projection=proj)
        assert set(out) == {c, n}
        total = sum(out[x].length_sums[Category.ROADS_DRIVE] for x in out)
        assert total == pytest.approx(300, rel=0.01)
        for x in (c, n):
            assert out[x].length_sums[Category.ROADS_DRIVE] == pytest.approx(150, rel=0.05)
            assert out[x].counts[Category.ROADS_DRIVE] == 1
            assert Category.ROADS_DRIVE not in out[x].area_sums

    def test_polygon_inside_one_cell(self):
        c = hexgrid.cell_of(LAT, LON, 9)
        p = hexgrid.centroid(c)
        proj = LocalProjection(p.lat, p.lon)
        ring_xy = np.array([(-30, -20), (35, -25), (40, 30), (-10, 45), (-35, 10)], dtype=float)
        lon, lat = proj.inverse(ring_xy[:, 0], ring_xy[:, 1])
        poly = GeoObject("b", Polygon(list(zip(lon, lat))), {"leisure": "park"})
        out = assign_objects({c}, [poly], projection=proj)
        assert list(out) == [c]
        assert out[c].area_sums[Category.LEISURE] == pytest.approx(shoelace(ring_xy), rel=0.005)
        assert out[c].tag_areas == {"leisure=park": pytest.approx(shoelace(ring_xy), rel=0.005)}

    def test_water_area_only(self):
        c = hexgrid.cell_of(LAT, LON, 9)
        p = hexgrid.centroid(c)
        proj = LocalProjection(p.lat, p.lon)
        sq = np.array([(-20, -20), (20, -20), (20, 20), (-20, 20)], dtype=float)
        lon, lat = proj.inverse(sq[:, 0], sq[:, 1])
        lake = GeoObject("w", Polygon(list(zip(lon, lat))), {"natural": "water"})
        river = GeoObject("v", LineString(list(zip(lon, lat))), {"natural": "water"})
        out = assign_objects({c}, [lake, river], projection=proj)[c]
        assert out.area_sums[Category.WATER] == pytest.approx(1600, rel=0.005)
        assert out.length_sums == {}

    def test_polygon_with_hole(self):
        c = hexgrid.cell_of(LAT, LON, 9)
        p = hexgrid.centroid(c)
        proj = LocalProjection(p.lat, p.lon)
        outer = np.array([(-60, -60), (60, -60), (60, 60), (-60, 60)], dtype=float)
        hole = np.array([(-20, -20), (-20, 20), (20, 20), (20, -20)], dtype=float)
        o_ll = list(zip(*proj.inverse(outer[:, 0], outer[:, 1])))
        h_ll = list(zip(*proj.inverse(hole[:, 0], hole[:, 1])))
        obj = GeoObject("h", Polygon(o_ll, [h_ll]), {"leisure": "park"})
        out = assign_objects({c}, [obj], projection=proj)[c]
        assert out.area_sums[Category.LEISURE] == pytest.approx(120**2 - 40**2, rel=0.005)

    def test_degenerate_geometry_counts_without_measure(self, caplog):
        c = hexgrid.cell_of(LAT, LON, 9)
        p = hexgrid.centroid(c)
        line = GeoObject("z", LineString([(p.lon, p.lat), (p.lon, p.lat)]), {"highway": "residential"})
        flat = GeoObject("f", Polygon([(p.lon, p.lat), (p.lon + 1e-4, p.lat), (p.lon + 2e-4, p.lat)]), {"leisure": "park"})
        caplog.set_level("INFO")
        out = assign_objects({c}, [line, flat])[c]
        assert out.counts[Category.ROADS_DRIVE] == 1
        assert out.length_sums[Category.ROADS_DRIVE] == 0
        assert out.counts[Category.LEISURE] == 1
        assert "zero" in caplog.text

    def test_excluded_and_unmatched_ignored(self):
        c = hexgrid.cell_of(LAT, LON, 9)
        p = hexgrid.centroid(c)
        objs = [
            GeoObject("a", Point(p.lon, p.lat), {"amenity": "bicycle_rental"}),
            GeoObject("b", Point(p.lon, p.lat), {"foo": "bar"}),
        ]
        assert assign_objects({c}, objs) == {}

    def test_conservation_monte_carlo(self):
        rng = np.random.default_rng(1)
        c = hexgrid.cell_of(LAT, LON, 10)
        p = hexgrid.centroid(c)
        proj = LocalProjection(p.lat, p.lon)
        for i in range(4):
            poly = random_polygon(rng, 0, 0, 250)
            line = random_line(rng, 0, 0, 300)
            objs = [
                GeoObject("p", proj.unproject(poly), {"leisure": "park"}),
                GeoObject("l", proj.unproject(line), {"highway": "residential"}),
            ]
            out = assign_objects({c}, objs, projection=proj)
            area = {x: b.area_sums.get(Category.LEISURE, 0) for x, b in out.items()}
            length = {x: b.length_sums.get(Category.ROADS_DRIVE, 0) for x, b in out.items()}
            assert sum(area.values()) == pytest.approx(poly.area, rel=0.01)
            assert sum(length.values()) == pytest.approx(line.length, rel=0.01)
            est_total, est = mc_area_split(poly, proj, 10, 20_000, rng)
            assert est_total == pytest.approx(poly.area, rel=0.03)
            for x in set(est) | set(area):
                assert abs(area.get(x, 0) - est.get(x, 0)) <= 0.03 * poly.area
            est = mc_length_split(line, proj, 10, 20_000, rng)
            for x in set(est) | set(length):
                assert abs(length.get(x, 0) - est.get(x, 0)) <= 0.03 * line.length

    def test_order_independent(self, alphaville):
        from hexstation.osm import parse_geojson

        from .conftest import DATA

        objs = parse_geojson((DATA / "alphaville" / "objects.geojson").read_bytes())[:300]
        cells = set(alphaville.cells)
        rng = np.random.default_rng(0)
        a = assign_objects(cells, objs)
        b = assign_objects(cells, [objs[i] for i in rng.permutation(len(objs))])
        assert a == b

    def test_restrict(self):
        c = hexgrid.cell_of(LAT, LON, 9)
        n = sorted(hexgrid.ring(c, 2))[0]
        p = hexgrid.centroid(n)
        obj = GeoObject("p", Point(p.lon, p.lat), {"shop": "bakery"})
        assert n in assign_objects({c}, [obj])
        assert assign_objects({c}, [obj], restrict=True) == {}


class TestBucket:
    def test_merge_is_additive(self):
        a = CellBucket("x", counts={Category.SHOPS: 2}, area_sums={Category.LEISURE: 1.5})
        b = CellBucket("x", counts={Category.SHOPS: 1, Category.SPORT: 4}, tag_counts={"shop=bakery": 1})
        m = a.merge(b)
        assert m.counts == {Category.SHOPS: 3, Category.SPORT: 4}
        assert m.area_sums == {Category.LEISURE: 1.5}
        assert m.tag_counts == {"shop=bakery": 1}
        assert a.merge(b) == b.merge(a)

    def test_persistence(self, tmp_path, alphaville):
        write_buckets(alphaville.buckets, tmp_path / "b.jsonl")
        write_labels(alphaville.labels, tmp_path / "l.csv")
        assert read_buckets(tmp_path / "b.jsonl") == alphaville.buckets
        assert read_labels(tmp_path / "l.csv") == alphaville.labels


def test_fixture_dataset_matches_manifest(alphaville, betatown):
    from .conftest import fixture_manifest

    for ds in (alphaville, betatown):
        m = fixture_manifest(ds.city)
        assert len(ds.cells) == m["study_cells"]
        assert len(ds.positives) == m["station_cells"]
