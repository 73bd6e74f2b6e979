"""Command-line entry points for the staged pipeline.

Subcommands
-----------
simulate    generate a random medium, sensing matrix, and measurement set
learn-dict  unordered dictionary estimate from one measurement set
cluster     consensus dictionary from several dictionary estimates
order-grid  permute dictionary columns onto the image grid
image       migration image of a measurement through an ordered dictionary
evaluate    column-correlation metrics of an estimate against a reference

Every stage reads an optional TOML/JSON configuration (`--config`), writes
its artifacts into `--out` (default: `$SCATTER_SUPERRES_OUT` or the current
directory), and records a `manifest.json` with the configuration hash,
seeds, and produced files.  Matrices travel between stages as CMX files.
"""

from __future__ import annotations

import argparse
import csv
import datetime
import json
import os
import sys
from pathlib import Path
from typing import List, Optional

import numpy as np

from . import cluster as cluster_mod
from . import gridorder, imaging, sparsedict, wavefield
from .cmx import read_cmx, write_cmx
from .config import ExperimentConfig, config_hash, load_config

__all__ = ["main", "build_parser"]

_OUT_ENV = "SCATTER_SUPERRES_OUT"


# ----------------------------------------------------------------------
# plumbing

def _resolve_out(args) -> Path:
    out = args.out or os.environ.get(_OUT_ENV) or "."
    path = Path(out)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _resolve_config(args) -> ExperimentConfig:
    cfg = load_config(args.config) if args.config else ExperimentConfig()
    overrides = {}
    for name in ("seed_medium", "seed_data", "workers"):
        value = getattr(args, name, None)
        if value is not None:
            overrides[name] = value
    return cfg.with_overrides(**overrides) if overrides else cfg


def _write_manifest(out: Path, stage: str, cfg: ExperimentConfig,
                    artifacts: List[str], extra: Optional[dict] = None):
    manifest = {
        "stage": stage,
        "created": datetime.datetime.now(datetime.timezone.utc).isoformat(),
        "config_hash": config_hash(cfg),
        "config": cfg.to_dict(),
        "artifacts": sorted(artifacts),
    }
    if extra:
        manifest.update(extra)
    path = out / "manifest.json"
    path.write_text(json.dumps(manifest, indent=2) + "\n")
    return path


def _write_csv(path: Path, header: List[str], rows):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        writer.writerows(rows)


def _load_dictionary(path) -> sparsedict.Dictionary:
    return sparsedict.Dictionary(read_cmx(path)).normalize()


# ----------------------------------------------------------------------
# stages

def cmd_simulate(args) -> int:
    cfg = _resolve_config(args)
    out = _resolve_out(args)
    medium = cfg.make_medium()
    geometry = cfg.make_array()
    grid = cfg.make_grid()
    sensing = wavefield.assemble_sensing_matrix(medium, geometry, grid)
    data = wavefield.generate_dataset(sensing, cfg.n_samples, cfg.sparsity,
                                      amplitude_law=cfg.amplitude_law,
                                      seed=cfg.seed_data)
    write_cmx(sensing.normalized(), out / "sensing.cmx")
    write_cmx(data.measurements, out / "measurements.cmx")
    _write_csv(out / "medium.csv", ["x", "y", "z", "tau_re", "tau_im"],
               [[*map(float, p), float(t.real), float(t.imag)]
                for p, t in zip(medium.scatterer_positions,
                                medium.scatterer_amplitudes)])
    _write_csv(out / "grid.csv", ["index", "x", "y", "z"],
               [[k, *map(float, p)] for k, p in enumerate(grid.grid_points)])
    _write_manifest(out, "simulate", cfg,
                    ["sensing.cmx", "measurements.cmx", "medium.csv",
                     "grid.csv"],
                    {"data_dim": int(geometry.data_dim),
                     "n_grid_points": grid.n_points})
    print(f"simulate: wrote {cfg.n_samples} measurements of dimension "
          f"{geometry.data_dim} to {out}")
    return 0


def cmd_learn_dict(args) -> int:
    cfg = _resolve_config(args)
    out = _resolve_out(args)
    data = wavefield.DataSet(read_cmx(args.measurements))
    params = cfg.gelma_params()
    n_produce = max(cfg.k_effective,
                    int(round(cfg.k_effective * cfg.overproduce_factor)))
    step1 = sparsedict.Step1Params(sparsity=cfg.sparsity,
                                   seed=cfg.seed_algorithm)
    init = sparsedict.step1_initialize(data, n_produce, step1)
    refined = sparsedict.refine_dictionary(init, data, params,
                                           outer_iters=cfg.outer_iters,
                                           sparsity=cfg.sparsity)
    pruned = sparsedict.prune_dictionary(refined.dictionary, data,
                                         cfg.k_effective, params,
                                         sparsity=cfg.sparsity)
    final = sparsedict.refine_dictionary(pruned, data, params,
                                         outer_iters=cfg.outer_iters,
                                         sparsity=cfg.sparsity)
    write_cmx(final.dictionary.normalize().columns, out / "dictionary.cmx")
    _write_csv(out / "residuals.csv", ["iteration", "residual"],
               list(enumerate(map(float, final.residuals))))
    _write_manifest(out, "learn-dict", cfg,
                    ["dictionary.cmx", "residuals.csv"],
                    {"input": str(args.measurements),
                     "final_residual": float(final.residuals[-1])})
    print(f"learn-dict: {cfg.k_effective} columns, final coding residual "
          f"{final.residuals[-1]:.3e}")
    return 0


def cmd_cluster(args) -> int:
    cfg = _resolve_config(args)
    out = _resolve_out(args)
    dictionaries = [_load_dictionary(p) for p in args.stage_input]
    pool = cluster_mod.ColumnPool.from_dictionaries(dictionaries)
    consensus, sizes = cluster_mod.consensus_dictionary(
        pool, cfg.dbscan_eps, cfg.dbscan_c_min, cfg.k_effective)
    write_cmx(consensus.columns, out / "consensus.cmx")
    _write_csv(out / "cluster_sizes.csv", ["cluster", "size"],
               list(enumerate(map(int, sizes))))
    _write_manifest(out, "cluster", cfg,
                    ["consensus.cmx", "cluster_sizes.csv"],
                    {"inputs": [str(p) for p in args.stage_input],
                     "pool_size": int(pool.vectors.shape[1])})
    print(f"cluster: {consensus.n_atoms} consensus columns from a pool of "
          f"{pool.vectors.shape[1]}")
    return 0


def _parse_anchor(text: str):
    parts = text.split(",")
    if len(parts) != 3:
        raise argparse.ArgumentTypeError(
            "anchor must be 'column,i_cross,i_range'")
    col, icross, irange = (int(p) for p in parts)
    return col, (icross, irange)


def cmd_order_grid(args) -> int:
    cfg = _resolve_config(args)
    out = _resolve_out(args)
    dictionary = _load_dictionary(args.dictionary)
    grid = cfg.make_grid()
    if args.anchor:
        anchors = [(col, np.asarray(pos, dtype=float))
                   for col, pos in args.anchor]
    elif args.truth:
        # corner anchors derived by matching against a reference matrix;
        # evaluation-style usage when the true sensing matrix is at hand
        truth = read_cmx(args.truth)
        perm, _ = sparsedict.match_columns(dictionary, truth)
        idx = gridorder.grid_index_coordinates(grid)
        anchors = [(int(perm[c]), idx[c])
                   for c in gridorder.corner_anchor_indices(grid)]
    else:
        print("order-grid: need --anchor entries or --truth", file=sys.stderr)
        return 2
    result = gridorder.order_columns(dictionary, grid, anchors,
                                     neighbor_count=cfg.neighbor_count,
                                     refine=cfg.mds_refine,
                                     allow_reflection=cfg.allow_reflection)
    ordered = dictionary.columns[:, result.permutation]
    write_cmx(ordered, out / "ordered.cmx")
    _write_csv(out / "permutation.csv", ["grid_index", "column"],
               list(enumerate(map(int, result.permutation))))
    _write_csv(out / "embedding.csv", ["column", "u", "v"],
               [[k, float(u), float(v)]
                for k, (u, v) in enumerate(result.alignment.embedding.coordinates)])
    _write_manifest(out, "order-grid", cfg,
                    ["ordered.cmx", "permutation.csv", "embedding.csv"],
                    {"input": str(args.dictionary),
                     "anchor_residuals":
                         [float(r) for r in result.alignment.anchor_residuals]})
    print(f"order-grid: placed {dictionary.n_atoms} columns; mean anchor "
          f"residual {np.mean(result.alignment.anchor_residuals):.3f} cells")
    return 0


def cmd_image(args) -> int:
    cfg = _resolve_config(args)
    out = _resolve_out(args)
    dictionary = _load_dictionary(args.dictionary)
    measurements = read_cmx(args.measurements)
    grid = cfg.make_grid()
    col = args.measurement_index
    if not 0 <= col < measurements.shape[1]:
        print(f"image: measurement index {col} out of range "
              f"[0, {measurements.shape[1]})", file=sys.stderr)
        return 2
    img = imaging.migrate(dictionary, measurements[:, col], grid)
    _write_csv(out / "image.csv", ["grid_index", "i_cross", "i_range", "value"],
               [[k, k % grid.n_cross, k // grid.n_cross, float(v)]
                for k, v in enumerate(img.values)])
    _write_manifest(out, "image", cfg, ["image.csv"],
                    {"dictionary": str(args.dictionary),
                     "measurements": str(args.measurements),
                     "measurement_index": col,
                     "peak_indices": [int(i) for i in img.peak_indices]})
    print(f"image: peak grid indices {list(map(int, img.peak_indices))}")
    return 0


def cmd_evaluate(args) -> int:
    cfg = _resolve_config(args)
    out = _resolve_out(args)
    estimate = _load_dictionary(args.estimate)
    truth = read_cmx(args.truth)
    assignment, corrs = sparsedict.match_columns(estimate, truth)
    bijective = len(np.unique(assignment)) == len(assignment)
    metrics = {
        "n_columns": int(len(corrs)),
        "correlation_min": float(np.min(corrs)),
        "correlation_mean": float(np.mean(corrs)),
        "correlation_median": float(np.median(corrs)),
        "n_below_0.95": int(np.sum(corrs < 0.95)),
        "assignment_bijective": bool(bijective),
    }
    (out / "metrics.json").write_text(json.dumps(metrics, indent=2) + "\n")
    _write_csv(out / "correlations.csv",
               ["true_column", "matched_column", "correlation"],
               [[t, int(assignment[t]), float(corrs[t])]
                for t in range(len(corrs))])
    _write_manifest(out, "evaluate", cfg, ["metrics.json", "correlations.csv"],
                    {"estimate": str(args.estimate),
                     "truth": str(args.truth)})
    print(f"evaluate: min |corr| {metrics['correlation_min']:.4f}, "
          f"mean {metrics['correlation_mean']:.4f}, "
          f"bijective={bijective}")
    return 0


# ----------------------------------------------------------------------
# parser

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="scatter-superres",
        description="Blind sensing-matrix estimation and super-resolved "
                    "imaging through a scattering medium.")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, default=None,
                        help="TOML or JSON configuration file")
    common.add_argument("--out", type=Path, default=None,
                        help=f"output directory (default ${_OUT_ENV} or .)")
    common.add_argument("--seed-medium", dest="seed_medium", type=int,
                        default=None, help="override the medium seed")
    common.add_argument("--seed-data", dest="seed_data", type=int,
                        default=None, help="override the measurement seed")
    common.add_argument("--workers", type=int, default=None,
                        help="worker processes for parallel stages")

    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", parents=[common],
                       help="generate medium, sensing matrix, measurements")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("learn-dict", parents=[common],
                       help="estimate an unordered dictionary from data")
    p.add_argument("measurements", type=Path, help="measurements CMX file")
    p.set_defaults(func=cmd_learn_dict)

    p = sub.add_parser("cluster", parents=[common],
                       help="consensus dictionary from several estimates")
    p.add_argument("--stage-input", action="append", required=True,
                   type=Path, metavar="DICT.CMX",
                   help="dictionary estimate (repeatable)")
    p.set_defaults(func=cmd_cluster)

    p = sub.add_parser("order-grid", parents=[common],
                       help="permute dictionary columns onto the image grid")
    p.add_argument("dictionary", type=Path, help="dictionary CMX file")
    p.add_argument("--anchor", action="append", type=_parse_anchor,
                   metavar="COL,I_CROSS,I_RANGE",
                   help="known column placement (repeat >= 3 times)")
    p.add_argument("--truth", type=Path, default=None,
                   help="reference sensing CMX to derive corner anchors")
    p.set_defaults(func=cmd_order_grid)

    p = sub.add_parser("image", parents=[common],
                       help="migration image of one measurement")
    p.add_argument("dictionary", type=Path, help="ordered dictionary CMX")
    p.add_argument("measurements", type=Path, help="measurements CMX file")
    p.add_argument("--measurement-index", type=int, default=0,
                   help="column of the measurement matrix to image")
    p.set_defaults(func=cmd_image)

    p = sub.add_parser("evaluate", parents=[common],
                       help="column correlations against a reference matrix")
    p.add_argument("estimate", type=Path, help="estimated dictionary CMX")
    p.add_argument("truth", type=Path, help="reference sensing CMX")
    p.set_defaults(func=cmd_evaluate)

    return parser


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":  # pragma: no cover
    raise SystemExit(main())
