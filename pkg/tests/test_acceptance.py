"""Acceptance criteria, one test each, with their time budgets.

Each test prints a ``PASS``/``FAIL`` line; the lines are also collected in the
terminal summary.
"""

import contextlib
import filecmp
import time
from collections import deque

import h3
import numpy as np
from scipy.stats import spearmanr

from hexstation import hexgrid
from hexstation.config import ExperimentConfig
from hexstation.embeddings import CC_DIM, SA_DIM, combine_neighbourhood, embed_region, train_encoder
from hexstation.evaluation import (
    compute_metrics,
    random_baseline_recall,
    run_experiment,
    sweep,
    transfer_matrix,
)
from hexstation.geometry import LocalProjection
from hexstation.osm import GeoObject
from hexstation.osm.tags import Category, build_all_tag_vocab, selected_vocabulary
from hexstation.study_area import CellBucket, assign_objects

from .conftest import ACCEPTANCE_LINES
from .oracles import mc_area_split, mc_length_split, random_line, random_polygon
from .pipeline import build_store, run_outputs


@contextlib.contextmanager
def criterion(n, name, budget=None):
    info = {}
    t0 = time.perf_counter()
    try:
        yield info
        dt = time.perf_counter() - t0
        if budget is not None:
            assert dt < budget, f"took {dt:.1f}s, budget {budget}s"
    except BaseException as e:
        dt = time.perf_counter() - t0
        line = f"FAIL {n}: {name} ({dt:.1f}s) {type(e).__name__}: {str(e).splitlines()[0] if str(e) else ''}"
        ACCEPTANCE_LINES.append(line)
        print(line)
        raise
    detail = ", ".join(f"{k}={v}" for k, v in info.items())
    line = f"PASS {n}: {name} ({dt:.1f}s){' ' + detail if detail else ''}"
    ACCEPTANCE_LINES.append(line)
    print(line)


# ---------------------------------------------------------------------------
# 1


def _bfs_dist(a, b, limit=8):
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
    return None


def _sphere_points(rng, n):
    lat = np.degrees(np.arcsin(rng.uniform(-1, 1, n)))
    lon = rng.uniform(-180, 180, n)
    return lat, lon


def test_1_grid_suite():
    with criterion(1, "grid suite", budget=10) as info:
        rng = np.random.default_rng(1)
        checked_card = 0
        for res in range(16):
            lat, lon = _sphere_points(rng, 1000)
            cells = [hexgrid.cell_of(float(a), float(b), res) for a, b in zip(lat, lon)]
            for c in cells:
                p = hexgrid.centroid(c)
                assert hexgrid.cell_of(p.lat, p.lon, res) == c
                k = int(rng.integers(1, 4))
                near = hexgrid.disk(c, k + 1)
                if not any(h3.is_pentagon(x) for x in near):
                    # cardinalities only hold away from the 12 pentagons
                    assert len(hexgrid.ring(c, k)) == 6 * k
                    assert len(hexgrid.disk(c, k)) == 3 * k * k + 3 * k + 1
                    checked_card += 1
                pts = sorted(hexgrid.disk(c, 2))
                a, b = pts[int(rng.integers(len(pts)))], pts[int(rng.integers(len(pts)))]
                dab = hexgrid.grid_distance(a, b)
                assert dab == _bfs_dist(a, b)
                assert dab == hexgrid.grid_distance(b, a)
                assert (dab == 0) == (a == b)
                assert dab <= hexgrid.grid_distance(a, c) + hexgrid.grid_distance(c, b)
        info["cells"] = 16 * 1000
        info["cardinality_checked"] = checked_card


# ---------------------------------------------------------------------------
# 2


def test_2_geometry_conservation():
    with criterion(2, "geometry conservation", budget=60) as info:
        rng = np.random.default_rng(2)
        res = 10
        worst = 0.0
        for i in range(50):
            lat, lon = 50.0 + rng.uniform(-0.5, 0.5), 19.9 + rng.uniform(-0.5, 0.5)
            c = hexgrid.cell_of(lat, lon, res)
            p = hexgrid.centroid(c)
            proj = LocalProjection(p.lat, p.lon)
            if i % 2 == 0:
                shape = random_polygon(rng, 0, 0, 300)
                obj = GeoObject("p", proj.unproject(shape), {"leisure": "park"})
                out = assign_objects(hexgrid.disk(c, 8), [obj], projection=proj)
                got = {x: b.area_sums.get(Category.LEISURE, 0.0) for x, b in out.items()}
                total, est = mc_area_split(shape, proj, res, 100_000, rng)
            else:
                shape = random_line(rng, 0, 0, 400)
                obj = GeoObject("l", proj.unproject(shape), {"highway": "residential"})
                out = assign_objects(hexgrid.disk(c, 8), [obj], projection=proj)
                got = {x: b.length_sums.get(Category.ROADS_DRIVE, 0.0) for x, b in out.items()}
                total = shape.length
                est = mc_length_split(shape, proj, res, 100_000, rng)
            assert abs(sum(got.values()) - total) <= 0.01 * total
            err = max(abs(got.get(x, 0.0) - est.get(x, 0.0)) for x in set(got) | set(est)) / total
            assert err <= 0.01, f"shape {i}: per-cell split off by {err:.4f} of total"
            worst = max(worst, err)
        info["shapes"] = 50
        info["worst_cell_error"] = f"{worst:.4f}"


# ---------------------------------------------------------------------------
# 3


def test_3_embedding_algebra(alphaville):
    with criterion(3, "embedding algebra") as info:
        st_vocab = selected_vocabulary()
        at_vocab = build_all_tag_vocab([{"shop": "bakery"}, {"amenity": "cafe"}, {"leisure": "park"}])
        empty = CellBucket("x")
        assert embed_region(empty, "CC").shape == (CC_DIM,) == (20,)
        assert embed_region(empty, "SA").shape == (SA_DIM,) == (36,)
        assert embed_region(empty, "ST", st_vocab).shape == (888,)
        bs = list(alphaville.buckets.values())
        rng = np.random.default_rng(3)
        for _ in range(100):
            a, b = (bs[i] for i in rng.choice(len(bs), 2, replace=False))
            b = CellBucket(a.cell, **{f: getattr(b, f) for f in CellBucket._FIELDS})
            for m, voc in (("CC", None), ("SA", None), ("ST", st_vocab), ("AT", at_vocab)):
                lhs = embed_region(a.merge(b), m, voc)
                assert np.allclose(lhs, embed_region(a, m, voc) + embed_region(b, m, voc), rtol=0, atol=1e-9)
        probes = 0
        for _ in range(300):
            K, N = int(rng.integers(0, 7)), int(rng.integers(1, 40))
            T = [rng.normal(size=N) for _ in range(K + 1)]
            for m, p in (("average", 0), ("diminishing", 1), ("diminishing_squared", 2)):
                w = [1.0 / (k + 1) ** p for k in range(K + 1)]
                brute = sum(wk * t for wk, t in zip(w, T)) / sum(w)
                assert np.max(np.abs(combine_neighbourhood(T, m) - brute)) <= 1e-9
            cat = combine_neighbourhood(T, "concatenate")
            assert cat.shape == (N * (K + 1),)
            assert np.array_equal(cat, np.concatenate(T))
            probes += 1
        info["weighting_probes"] = probes


# ---------------------------------------------------------------------------
# 4


def test_4_custom_metric():
    with criterion(4, "custom metric") as info:
        s = hexgrid.cell_of(50.06, 19.94, 9)
        n1 = sorted(hexgrid.ring(s, 1))[0]
        r = compute_metrics({n1: True}, {n1: False}, [s])
        assert r.custom == 0.5
        cells = sorted(hexgrid.disk(s, 6))
        rng = np.random.default_rng(4)
        equal = 0
        for _ in range(1000):
            sub = [cells[i] for i in rng.choice(len(cells), int(rng.integers(1, 60)), replace=False)]
            labels = {c: bool(rng.random() < 0.2) for c in sub}
            pred = {c: bool(rng.random() < 0.3) for c in sub}
            stations = [c for c in cells if c in labels and labels[c]] or [s]
            m = compute_metrics(pred, labels, stations)
            assert m.custom >= m.accuracy - 1e-15
            if not any(pred[c] and not labels[c] for c in sub):
                assert m.custom == m.accuracy
                equal += 1
        info["sets"] = 1000
        info["fp_free_sets"] = equal


# ---------------------------------------------------------------------------
# 5


def _inversions(values, direction):
    """Adjacent pairs that go against ``direction`` (+1 up, -1 down), with their size."""
    return [(i, abs(b - a)) for i, (a, b) in enumerate(zip(values, values[1:])) if (b - a) * direction < 0]


def test_5_imbalance_direction(alphaville):
    with criterion(5, "imbalance direction", budget=120) as info:
        base = ExperimentConfig(resolution=9, iterations=100, seed=0)
        grid = [base.with_(imbalance_ratio=float(r)) for r in (1, 2, 3, 4, 5)]
        rows = sweep(grid, alphaville)
        assert all(r.error is None for r in rows), [r.error for r in rows]
        recall = [r.report.recall for r in rows]
        accuracy = [r.report.accuracy for r in rows]
        inv = _inversions(recall, -1) + _inversions(accuracy, +1)
        assert len(inv) <= 1 and all(size <= 0.01 for _, size in inv), f"inversions {inv}"
        rho_r = spearmanr([1, 2, 3, 4, 5], recall).correlation
        rho_a = spearmanr([1, 2, 3, 4, 5], accuracy).correlation
        assert rho_r < 0 and rho_a > 0
        info["recall"] = "/".join(f"{v:.3f}" for v in recall)
        info["accuracy"] = "/".join(f"{v:.3f}" for v in accuracy)
        info["spearman"] = f"{rho_r:.2f},{rho_a:.2f}"


# ---------------------------------------------------------------------------
# 6


def test_6_final_hyperparameters(alphaville):
    with criterion(6, "final-hyperparameter smoke", budget=60) as info:
        cfg = ExperimentConfig(
            resolution=9,
            region_method="CC",
            neighbourhood_method="diminishing_squared",
            neighbourhood_K=5,
            scaler="minmax",
            imbalance_ratio=2.5,
            classifier="random_forest",
            iterations=10,
            seed=0,
        )
        assert len(alphaville.positives) == 20
        rep = run_experiment(cfg, alphaville)
        info["cells"] = len(alphaville.cells)
        info["f1"] = f"{rep.f1:.3f}"
        assert rep.f1 >= 0.6


# ---------------------------------------------------------------------------
# 7


def test_7_transfer(alphaville, betatown):
    with criterion(7, "transfer harness", budget=300) as info:
        cfg = ExperimentConfig(resolution=9, seed=0)
        tm = transfer_matrix([alphaville, betatown], cfg, iterations=100)
        assert tm.recall.shape == (2, 2) and np.isfinite(tm.recall).all()
        by_name = {c.city: c for c in (alphaville, betatown)}
        for i, city in enumerate(tm.cities):
            base = random_baseline_recall(by_name[city])
            assert tm.recall[i, i] > base, f"{city}: {tm.recall[i, i]} vs baseline {base}"
            info[city] = f"{tm.recall[i, i]:.3f}>{base:.3f}"


# ---------------------------------------------------------------------------
# 8


def test_8_cli_determinism(tmp_path):
    with criterion(8, "CLI determinism") as info:
        stores = [build_store(tmp_path / f"s{i}") for i in (0, 1)]
        compared = 0
        for city in ("alphaville", "betatown"):
            a, b = stores[0] / city, stores[1] / city
            names = sorted(p.name for p in a.iterdir())
            assert names == sorted(p.name for p in b.iterdir())
            for n in names:
                assert filecmp.cmp(a / n, b / n, shallow=False), f"store file {city}/{n} differs"
                compared += 1
        outs = [run_outputs(tmp_path / f"o{i}", stores[i], 42) for i in (0, 1)]
        for name in outs[0]:
            assert outs[0][name].read_bytes() == outs[1][name].read_bytes(), f"{name} differs"
            compared += 1
        info["files_compared"] = compared


# ---------------------------------------------------------------------------
# 9


def test_9_encoder():
    with criterion(9, "encoder") as info:
        rng = np.random.default_rng(9)
        X = rng.random((1000, 3)) @ rng.random((3, 24))
        enc = train_encoder(X, 3, seed=0)
        mse = enc.reconstruction_mse(X)
        curve = enc.loss_curve_
        assert mse < 1e-3
        assert all(b <= a for a, b in zip(curve, curve[1:]))
        info["mse"] = f"{mse:.2e}"
        info["epochs"] = len(curve) - 1
