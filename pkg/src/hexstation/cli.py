"""``hexstation`` command line.

Typical pipeline for one city::

    hexstation ingest   --city krakow --geojson krakow.geojson
    hexstation stations --city krakow --file stations.csv
    hexstation area     --city krakow --res 9
    hexstation embed    --city krakow --res 9 --method CC
    hexstation eval     --city krakow --config cfg.json --seed 42
    hexstation predict  --city krakow --config cfg.json --seed 42 --out pred.json
    hexstation export   --pred pred.json --out krakow.geojson
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from pathlib import Path
from typing import Optional, Sequence

import numpy as np
from sklearn.model_selection import ParameterGrid

from . import __version__
from .config import ConfigError, ExperimentConfig
from .embeddings import RegionEmbedder, train_encoder
from .evaluation import (
    eda_stats,
    run_experiment,
    sweep,
    transfer_matrix,
    write_results_csv,
    SweepRow,
)
from .features import FeatureBuilder
from .learning import StationModel, sample_training_set
from .osm import fetch_overpass, load_stations, parse_geojson
from .predict import PredictionMap, export_geojson, predict_city
from .store import CityStore, store_root, write_embedding_csv
from .study_area import STATION_BUFFER_M, build_city_dataset

log = logging.getLogger("hexstation")


class CLIError(Exception):
    pass


# --------------------------------------------------------------------------
# helpers


def _store(args, city: Optional[str] = None) -> CityStore:
    city = city or args.city
    if not city:
        raise CLIError("--city is required")
    return CityStore(store_root(args.store), city)


def _config(args) -> ExperimentConfig:
    """Config file, then flag overrides. A missing seed is drawn and reported."""
    raw = {}
    if args.config:
        cfg = ExperimentConfig.load(args.config)
        raw = json.loads(Path(args.config).read_text(encoding="utf-8"))
    else:
        cfg = ExperimentConfig()
    over = {}
    if getattr(args, "res", None) is not None:
        over["resolution"] = args.res
    if getattr(args, "iterations", None) is not None and args.command in ("eval", "sweep"):
        over["iterations"] = args.iterations
    if args.seed is not None:
        over["seed"] = args.seed
    elif "seed" not in raw:
        over["seed"] = int(np.random.SeedSequence().entropy % 2**63)
        print(f"hexstation: using random seed {over['seed']} (pass --seed to replay)", file=sys.stderr)
    return cfg.with_(**over)


def _resolution(args) -> int:
    """--res, else the config file's resolution, else the config default."""
    if args.res is not None:
        return args.res
    if args.config:
        return ExperimentConfig.load(args.config).resolution
    return ExperimentConfig().resolution


def _write_bytes(path: str, data: bytes) -> None:
    p = Path(path)
    p.parent.mkdir(parents=True, exist_ok=True)
    p.write_bytes(data)


# --------------------------------------------------------------------------
# commands


def cmd_ingest(args) -> int:
    st = _store(args)
    if args.geojson:
        objs = parse_geojson(Path(args.geojson).read_bytes())
        src = str(args.geojson)
    elif args.fetch:
        objs = fetch_overpass(args.fetch, endpoint=args.endpoint)
        src = f"overpass:{args.fetch}"
    else:
        raise CLIError("ingest needs --geojson FILE or --fetch AREA")
    n = st.write_objects(objs, src)
    print(f"{st.city}: {n} objects -> {st.objects_path}")
    return 0


def cmd_stations(args) -> int:
    st = _store(args)
    stations = load_stations(Path(args.file).read_bytes(), st.city)
    st.write_stations(stations, str(args.file))
    print(f"{st.city}: {len(stations)} stations -> {st.stations_path}")
    return 0


def cmd_area(args) -> int:
    st = _store(args)
    res = _resolution(args)
    ds = build_city_dataset(st.city, st.read_stations(), st.read_objects(), res, args.radius)
    st.write_area(ds)
    print(f"{st.city}: {len(ds.cells)} cells, {len(ds.positives)} with stations, {len(ds.buckets)} buckets")
    return 0


def cmd_embed(args) -> int:
    st = _store(args)
    res = _resolution(args)
    ds = st.load_dataset(res, embeddings=False)
    emb = RegionEmbedder(args.method).fit(ds.buckets)
    cells = sorted(ds.cells)
    table = emb.table({c: ds.buckets[c] for c in cells if c in ds.buckets})
    zero = np.zeros(emb.n_features_out_)
    table = {c: table.get(c, zero) for c in cells}
    key = args.method
    if args.encoder_dim:
        seed = args.seed if args.seed is not None else 0
        X = np.vstack([table[c] for c in cells])
        enc = train_encoder(X, args.encoder_dim, seed=seed, epochs=args.epochs)
        key = f"{args.method}{args.encoder_dim}"
        enc.save(st.encoder_path(key, res))
        table = dict(zip(cells, enc.transform(X)))
    out = args.out or st.embedding_path(key, res)
    write_embedding_csv(table, out)
    print(f"{st.city}: {len(table)} x {len(next(iter(table.values())))} {key} vectors -> {out}")
    return 0


def cmd_train(args) -> int:
    cfg = _config(args)
    ds = _store(args).load_dataset(cfg.resolution)
    builder = FeatureBuilder(cfg).fit(ds)
    cells = sample_training_set(ds.labels, cfg.imbalance_ratio, np.random.default_rng(cfg.seed))
    X = builder.transform(ds, cells)
    y = np.array([int(ds.labels[c]) for c in cells])
    model = StationModel(cfg).fit(X, y)
    out = args.out or "model.json"
    model.save(out)
    print(f"trained {cfg.classifier} on {len(cells)} cells ({int(y.sum())} positive) -> {out}")
    return 0


def cmd_eval(args) -> int:
    cfg = _config(args)
    ds = _store(args).load_dataset(cfg.resolution)
    rep = run_experiment(cfg, ds, n_jobs=args.jobs)
    out = args.out or "results.csv"
    write_results_csv([SweepRow(cfg, rep)], out)
    print(" ".join(f"{m}={v:.4f}" for m, v in rep.means.items()))
    return 0


def _grid(args, base: ExperimentConfig) -> list[ExperimentConfig]:
    if not args.grid:
        return [base]
    doc = json.loads(Path(args.grid).read_text(encoding="utf-8"))
    if isinstance(doc, list):
        return [base.with_(**d) for d in doc]
    keys = sorted(doc)
    return [base.with_(**{k: p[k] for k in keys}) for p in ParameterGrid({k: list(doc[k]) for k in keys})]


def cmd_sweep(args) -> int:
    base = _config(args)
    grid = _grid(args, base)
    st = _store(args)
    datasets = {r: st.load_dataset(r) for r in sorted({c.resolution for c in grid})}
    rows = sweep(grid, datasets, n_jobs=args.jobs)
    out = args.out or "results.csv"
    write_results_csv(rows, out)
    failed = sum(1 for r in rows if r.error)
    print(f"{len(rows)} configs, {failed} failed -> {out}")
    return 0


def cmd_transfer(args) -> int:
    cfg = _config(args)
    if not args.city or len(args.city) < 2:
        raise CLIError("transfer needs at least two --city flags")
    cities = [_store(args, c).load_dataset(cfg.resolution) for c in args.city]
    tm = transfer_matrix(cities, cfg, iterations=args.iterations or 100, n_jobs=args.jobs)
    r, a = tm.write_csv(args.out or ".")
    print(f"{len(tm.cities)} cities -> {r}, {a}")
    return 0


def cmd_predict(args) -> int:
    cfg = _config(args)
    eval_ds = _store(args).load_dataset(cfg.resolution)
    train_ds = _store(args, args.train_city).load_dataset(cfg.resolution) if args.train_city else eval_ds
    pm = predict_city(train_ds, eval_ds, cfg, iterations=args.iterations or 100, threshold=args.threshold, n_jobs=args.jobs)
    out = args.out or "prediction.json"
    _write_bytes(out, (json.dumps(pm.to_json(), sort_keys=True) + "\n").encode("utf-8"))
    if args.csv:
        pm.write_csv(args.csv)
    print(f"{pm.city}: {len(pm.filtered())} of {len(pm.probabilities)} cells >= {pm.threshold} -> {out}")
    return 0


def cmd_export(args) -> int:
    pm = PredictionMap.from_json(json.loads(Path(args.pred).read_text(encoding="utf-8")))
    if args.threshold is not None:
        pm.threshold = args.threshold
    data = export_geojson(pm, filtered=not args.all)
    out = args.out or "prediction.geojson"
    _write_bytes(out, data)
    print(f"{pm.city}: exported -> {out}")
    return 0


def cmd_stats(args) -> int:
    if not args.city:
        raise CLIError("stats needs at least one --city")
    res = _resolution(args)
    datasets = [_store(args, c).load_dataset(res, embeddings=False) for c in args.city]
    pops = {}
    if args.population:
        with open(args.population, newline="", encoding="utf-8") as f:
            for row in csv.DictReader(f):
                pops[row["city"]] = float(row["population"])
    rep = eda_stats(datasets, pops, min_stations=args.min_stations)
    out = args.out or "stats.csv"
    rep.write_csv(out)
    for c in rep.cities:
        pps = rep.population_per_station.get(c)
        print(f"{c}: {rep.stations[c]} stations" + (f", {pps:.1f} people per station" if pps is not None else ""))
    return 0


# --------------------------------------------------------------------------
# parser


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--store", help="store root (default $HEXSTATION_STORE or ./hexstation-store)")
    common.add_argument("--seed", type=int, help="seed for all randomness")
    common.add_argument("--res", type=int, help="grid resolution")
    common.add_argument("--out", help="output path")
    common.add_argument("--config", help="ExperimentConfig JSON file")
    common.add_argument("-v", "--verbose", action="store_true")

    p = argparse.ArgumentParser(prog="hexstation", description="Bicycle-station prediction on hexagonal cells.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True, metavar="COMMAND")

    def add(name, fn, help, multi_city=False):
        sp = sub.add_parser(name, parents=[common], help=help, description=help)
        if multi_city:
            sp.add_argument("--city", action="append", help="city name (repeatable)")
        else:
            sp.add_argument("--city", help="city name")
        sp.set_defaults(func=fn)
        return sp

    sp = add("ingest", cmd_ingest, "store OSM objects from a GeoJSON file or an Overpass fetch")
    g = sp.add_mutually_exclusive_group()
    g.add_argument("--geojson", help="GeoJSON FeatureCollection")
    g.add_argument("--fetch", metavar="AREA", help="area name to download")
    sp.add_argument("--endpoint", help="Overpass endpoint URL")

    sp = add("stations", cmd_stations, "store a station list (CSV lat,lon[,id] or GeoJSON points)")
    sp.add_argument("--file", required=True)

    sp = add("area", cmd_area, "build the study area, labels and cell buckets")
    sp.add_argument("--radius", type=float, default=STATION_BUFFER_M, help="station buffer in metres")

    sp = add("embed", cmd_embed, "write region vectors for every study-area cell")
    sp.add_argument("--method", choices=("CC", "SA", "ST", "AT"), default="CC")
    sp.add_argument("--encoder-dim", type=int, help="reduce with an autoencoder to this size")
    sp.add_argument("--epochs", type=int, default=200)

    for name, fn, help in (
        ("train", cmd_train, "fit one model on a sampled training set"),
        ("eval", cmd_eval, "repeated train/test evaluation on one city"),
        ("sweep", cmd_sweep, "evaluate a grid of configs"),
    ):
        sp = add(name, fn, help)
        sp.add_argument("--iterations", type=int)
        sp.add_argument("--jobs", type=int, help="parallel workers")
        if name == "sweep":
            sp.add_argument("--grid", help="JSON object of lists, or a list of overrides")

    sp = add("transfer", cmd_transfer, "cross-city transfer matrix", multi_city=True)
    sp.add_argument("--iterations", type=int, help="iterations per city pair (default 100)")
    sp.add_argument("--jobs", type=int)

    sp = add("predict", cmd_predict, "whole-city probability map")
    sp.add_argument("--train-city", help="train on this city instead of --city")
    sp.add_argument("--iterations", type=int, help="models averaged (default 100)")
    sp.add_argument("--threshold", type=float, default=0.5)
    sp.add_argument("--csv", help="also write cell,probability CSV here")
    sp.add_argument("--jobs", type=int)

    sp = add("export", cmd_export, "GeoJSON of a probability map")
    sp.add_argument("--pred", required=True, help="prediction JSON written by `predict`")
    sp.add_argument("--threshold", type=float, help="override the map's threshold")
    sp.add_argument("--all", action="store_true", help="keep cells below the threshold")

    sp = add("stats", cmd_stats, "station and object statistics per city", multi_city=True)
    sp.add_argument("--population", help="CSV with city,population columns")
    sp.add_argument("--min-stations", type=int, default=100, help="station count needed to mark a city as selected")
    return p


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (CLIError, ConfigError, FileNotFoundError, ValueError, OSError, KeyError) as e:
        msg = e.args[0] if isinstance(e, KeyError) and e.args else e
        print(f"hexstation {args.command}: error: {msg}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
