"""Batch command-line surface: synth | parse | fuse | train | evaluate |
importance | gridsearch | track-export.

Every command is idempotent for identical inputs and writes a ``run.json``
(config digest, seeds, package version) sufficient to reproduce its outputs.
"""
from __future__ import annotations

import argparse
import csv
import json
import os
import sys

import numpy as np

from . import __version__
from .config import RunConfig, apply_overrides, load_config
from .errors import ShipfuelError
from .evaluation import (CvReport, HyperGrid, baseline_protocol, evaluate_families,
                         grid_search, kfold_split)
from .grids import daily_mean, load_grid
from .models import ModelSpec, save_model
from .pipeline import build_pipeline, read_fused_csv, to_design_matrix, write_fused_csv
from .reports import parse_report_table, read_report_rows, timezone_policy
from .synth import DefectSpec, FuelLaw, generate_voyage, inject_defects, write_corpus

FAMILY_CHOICES = ("ridge", "svr", "forest", "boost")


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = load_config(args.config)
        cfg = apply_overrides(cfg, args)
        os.makedirs(cfg.out_dir, exist_ok=True)
        args.handler(cfg, args)
    except ShipfuelError as exc:
        _emit_error(args, exc)
        return 2
    except (OSError, ValueError, KeyError) as exc:
        _emit_error(args, exc)
        return 2
    return 0


def _emit_error(args, exc) -> None:
    payload = {"error": type(exc).__name__, "message": str(exc),
               "command": getattr(args, "command", None)}
    print(json.dumps(payload, sort_keys=True), file=sys.stderr)


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="shipfuel",
                                     description="ship fuel consumption modelling pipeline")
    parser.add_argument("--config", default=None, help="INI run configuration")
    parser.add_argument("--seed", type=int, default=None)
    parser.add_argument("--k", type=int, default=None, help="cross-validation folds")
    parser.add_argument("--objective", choices=("r2", "rmse"), default=None)
    parser.add_argument("--min-fuel", dest="min_fuel", type=float, default=None,
                        help="startup filter threshold in t/day")
    parser.add_argument("--outlier", default=None, help="iqr:<k> or zscore:<k>")
    parser.add_argument("--reports", default=None, help="raw report CSV path")
    parser.add_argument("--grids", default=None, help="comma-separated grid files")
    parser.add_argument("--out", default=None, help="output directory")

    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic corpus with a known fuel law")
    p.set_defaults(handler=cmd_synth)

    p = sub.add_parser("parse", help="parse raw reports into normalized records")
    p.set_defaults(handler=cmd_parse)

    p = sub.add_parser("fuse", help="run the fusion pipeline; writes fused.csv + coverage.json")
    p.add_argument("--no-daily-average", action="store_true",
                   help="skip averaging sub-daily grids before fusing")
    p.set_defaults(handler=cmd_fuse)

    p = sub.add_parser("train", help="fit one model family on fused.csv")
    p.add_argument("--family", choices=FAMILY_CHOICES, required=True)
    p.set_defaults(handler=cmd_train)

    p = sub.add_parser("evaluate", help="baseline + advanced k-fold tables")
    p.set_defaults(handler=cmd_evaluate)

    p = sub.add_parser("importance", help="forest feature importance ranking")
    p.add_argument("--include-rpm", action="store_true",
                   help="keep engine rpm in the ranking output")
    p.set_defaults(handler=cmd_importance)

    p = sub.add_parser("gridsearch", help="exhaustive hyperparameter search")
    p.add_argument("--family", choices=FAMILY_CHOICES, required=True)
    p.set_defaults(handler=cmd_gridsearch)

    p = sub.add_parser("track-export", help="waypoints as CSV + GeoJSON for plotting")
    p.set_defaults(handler=cmd_track_export)

    return parser


def _write_run_json(cfg: RunConfig, command: str, outputs: list) -> None:
    payload = {
        "command": command,
        "version": __version__,
        "outputs": sorted(outputs),
    }
    payload.update(cfg.describe())
    path = os.path.join(cfg.out_dir, "run.json")
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=1, sort_keys=True)
        fh.write("\n")


def _load_records(cfg: RunConfig):
    if not cfg.reports_path:
        raise ShipfuelError("no report path: set [paths] reports or --reports")
    rows = read_report_rows(cfg.reports_path)
    result = parse_report_table(rows, cfg.report_schema, timezone_policy(cfg.tz_policy))
    return result


def _load_grids(cfg: RunConfig, average: bool = True):
    grids = []
    for path in cfg.grid_paths:
        grid = load_grid(path)
        if average and grid.time_axis.step.total_seconds() < 86400:
            grid = daily_mean(grid)
        grids.append(grid)
    return grids


def _load_fused(cfg: RunConfig):
    path = os.path.join(cfg.out_dir, "fused.csv")
    if not os.path.exists(path):
        raise ShipfuelError(f"{path} not found; run `shipfuel fuse` first")
    return read_fused_csv(path)


def _family_specs(cfg: RunConfig) -> list:
    return [ModelSpec(family=f, params=dict(cfg.model_params[f])) for f in FAMILY_CHOICES]


def _write_cv(report: CvReport, out_dir: str, stem: str) -> list:
    csv_path = os.path.join(out_dir, f"{stem}_cv.csv")
    txt_path = os.path.join(out_dir, f"{stem}_cv.txt")
    with open(csv_path, "w", encoding="utf-8") as fh:
        fh.write(report.to_csv())
    with open(txt_path, "w", encoding="utf-8") as fh:
        fh.write(report.to_text())
    return [csv_path, txt_path]


# ---------------------------------------------------------------------------
# commands

def cmd_synth(cfg: RunConfig, args) -> None:
    s = cfg.synth
    law = FuelLaw(seed=int(s.get("seed", 11)),
                  noise_sigma_frac=float(s.get("sigma_frac", 0.05)))
    corpus = generate_voyage(law, n_days=int(s.get("n_days", 296)))
    spec = DefectSpec(state_rows=int(s.get("state_rows", 30)),
                      startup_rows=int(s.get("startup_rows", 4)),
                      outlier_rows=int(s.get("outlier_rows", 5)),
                      missing_cell_rate=float(s.get("missing_cell_rate", 0.01)),
                      seed=int(s.get("seed", 11)))
    rows, book = inject_defects(corpus.raw_rows, spec)
    paths = write_corpus(corpus, cfg.out_dir, defect_book=book, rows=rows)
    _write_run_json(cfg, "synth", [paths["reports"], paths["manifest"]] + paths["grids"])
    print(f"wrote {paths['reports']} ({len(rows)} rows), "
          f"{len(paths['grids'])} grids, {paths['manifest']}")


def cmd_parse(cfg: RunConfig, args) -> None:
    result = _load_records(cfg)
    out_path = os.path.join(cfg.out_dir, "records.csv")
    fields = ["timestamp_utc", "lat", "lon", "sog_avg_24h", "engine_rpm_avg_24h",
              "propeller_slip", "wind_dir", "wind_force", "swell_dir", "swell_force",
              "current_dir", "current_speed", "fuel_ulsfo_me", "fuel_ulsfo_boiler",
              "fuel_mgo_me", "fuel_mgo_boiler", "fuel_mgo_aux", "draft_fwd",
              "draft_aft", "next_port", "state_flags"]
    with open(out_path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(fields)
        for r in result.records:
            row = []
            for name in fields:
                if name == "timestamp_utc":
                    row.append(r.timestamp_utc.isoformat())
                elif name == "lat":
                    row.append("" if r.position is None else repr(r.position.lat))
                elif name == "lon":
                    row.append("" if r.position is None else repr(r.position.lon))
                elif name == "state_flags":
                    row.append(";".join(sorted(f.value for f in r.state_flags)))
                else:
                    v = getattr(r, name)
                    if v is None:
                        row.append("")
                    elif hasattr(v, "name"):
                        row.append(v.name)
                    else:
                        row.append(repr(v) if isinstance(v, float) else str(v))
            writer.writerow(row)
    summary_path = os.path.join(cfg.out_dir, "parse.json")
    with open(summary_path, "w", encoding="utf-8") as fh:
        json.dump({"rows_in": len(result.records) + len(result.rejected),
                   "records": len(result.records),
                   "rejected": [{"row": e.row_index, "column": e.column,
                                 "reason": e.reason} for e in result.rejected]},
                  fh, indent=1, sort_keys=True)
        fh.write("\n")
    _write_run_json(cfg, "parse", [out_path, summary_path])
    print(f"wrote {out_path}: {len(result.records)} records, "
          f"{len(result.rejected)} rejected")


def cmd_fuse(cfg: RunConfig, args) -> None:
    result = _load_records(cfg)
    average = cfg.daily_average and not getattr(args, "no_daily_average", False)
    grids = _load_grids(cfg, average=average)
    pipe = build_pipeline(grids=grids,
                          step_names=cfg.pipeline_steps or None,
                          missing_threshold=cfg.missing_threshold,
                          redundant=cfg.redundant,
                          outlier_method=cfg.outlier_method,
                          outlier_k=cfg.outlier_k,
                          min_fuel=cfg.min_fuel,
                          min_speed=cfg.min_speed)
    dataset = pipe.fit_transform(result.records)
    fused_path = os.path.join(cfg.out_dir, "fused.csv")
    write_fused_csv(dataset, fused_path)
    coverage_path = os.path.join(cfg.out_dir, "coverage.json")
    report = dict(pipe.report_)
    report["rejected_rows"] = len(result.rejected)
    with open(coverage_path, "w", encoding="utf-8") as fh:
        json.dump(report, fh, indent=1, sort_keys=True)
        fh.write("\n")
    _write_run_json(cfg, "fuse", [fused_path, coverage_path])
    print(f"wrote {fused_path}: {dataset.n_rows} rows x {len(dataset.columns)} columns")


def cmd_train(cfg: RunConfig, args) -> None:
    dataset = _load_fused(cfg)
    dm = to_design_matrix(dataset)
    spec = ModelSpec(family=args.family, params=dict(cfg.model_params[args.family]))
    model = spec.build(seed=cfg.seed)
    model.fit(dm.X, dm.y)
    model_path = os.path.join(cfg.out_dir, f"model_{args.family}.json")
    save_model(model, model_path)
    _write_run_json(cfg, "train", [model_path])
    print(f"wrote {model_path} (n={dm.n}, p={dm.p})")


def cmd_evaluate(cfg: RunConfig, args) -> None:
    dataset = _load_fused(cfg)
    dm = to_design_matrix(dataset)
    folds = kfold_split(dm.n, cfg.k, cfg.seed)
    specs = _family_specs(cfg)
    baseline = baseline_protocol(dm, folds, specs, seed=cfg.seed)
    advanced = evaluate_families(specs, dm, folds, seed=cfg.seed)
    outputs = _write_cv(baseline, cfg.out_dir, "baseline")
    outputs += _write_cv(advanced, cfg.out_dir, "advanced")
    _write_run_json(cfg, "evaluate", outputs)
    print(advanced.to_text())
    print(f"wrote {', '.join(sorted(outputs))}")


def cmd_importance(cfg: RunConfig, args) -> None:
    dataset = _load_fused(cfg)
    dm = to_design_matrix(dataset)
    spec = ModelSpec(family="forest", params=dict(cfg.model_params["forest"]))
    model = spec.build(seed=cfg.seed)
    model.fit(dm.X, dm.y)
    scores = model.feature_importances()
    ranked = sorted(zip(dm.column_names, scores), key=lambda kv: (-kv[1], kv[0]))
    if not args.include_rpm:
        ranked = [(n, s) for n, s in ranked if n != "engine_rpm_avg_24h"]
    out_path = os.path.join(cfg.out_dir, "importance.csv")
    with open(out_path, "w", encoding="utf-8") as fh:
        fh.write("feature,importance\n")
        for name, score in ranked:
            fh.write(f"{name},{repr(float(score))}\n")
    _write_run_json(cfg, "importance", [out_path])
    print(f"wrote {out_path} ({len(ranked)} features)")


def cmd_gridsearch(cfg: RunConfig, args) -> None:
    dataset = _load_fused(cfg)
    dm = to_design_matrix(dataset)
    folds = kfold_split(dm.n, cfg.k, cfg.seed)
    grid = HyperGrid(axes=cfg.hyper_grids[args.family])
    best, table = grid_search(args.family, grid, dm, folds,
                              objective=cfg.objective, seed=cfg.seed)
    best_path = os.path.join(cfg.out_dir, f"best_{args.family}.json")
    with open(best_path, "w", encoding="utf-8") as fh:
        json.dump({"family": best.family, "params": best.params,
                   "objective": cfg.objective}, fh, indent=1, sort_keys=True)
        fh.write("\n")
    table_path = os.path.join(cfg.out_dir, f"gridsearch_{args.family}.csv")
    axis_names = list(cfg.hyper_grids[args.family].keys())
    stat_names = list(table[0]["stats"].keys()) if table else []
    with open(table_path, "w", encoding="utf-8") as fh:
        fh.write(",".join(axis_names + stat_names) + "\n")
        for entry in table:
            cells = [str(entry["params"][a]) for a in axis_names]
            cells += [repr(entry["stats"][s]) for s in stat_names]
            fh.write(",".join(cells) + "\n")
    _write_run_json(cfg, "gridsearch", [best_path, table_path])
    print(f"best {args.family}: {best.params}; wrote {best_path}, {table_path}")


def cmd_track_export(cfg: RunConfig, args) -> None:
    result = _load_records(cfg)
    points = [(r.timestamp_utc.isoformat(), r.position.lat, r.position.lon)
              for r in result.records if r.position is not None]
    csv_path = os.path.join(cfg.out_dir, "waypoints.csv")
    with open(csv_path, "w", encoding="utf-8") as fh:
        fh.write("timestamp_utc,lat,lon\n")
        for stamp, lat, lon in points:
            fh.write(f"{stamp},{repr(lat)},{repr(lon)}\n")
    features = [{
        "type": "Feature",
        "geometry": {"type": "Point", "coordinates": [lon, lat]},
        "properties": {"time": stamp},
    } for stamp, lat, lon in points]
    features.append({
        "type": "Feature",
        "geometry": {"type": "LineString",
                     "coordinates": [[lon, lat] for _, lat, lon in points]},
        "properties": {"kind": "track"},
    })
    geojson_path = os.path.join(cfg.out_dir, "waypoints.geojson")
    with open(geojson_path, "w", encoding="utf-8") as fh:
        json.dump({"type": "FeatureCollection", "features": features},
                  fh, indent=1, sort_keys=True)
        fh.write("\n")
    _write_run_json(cfg, "track-export", [csv_path, geojson_path])
    print(f"wrote {csv_path} and {geojson_path} ({len(points)} points)")


if __name__ == "__main__":
    sys.exit(main())
