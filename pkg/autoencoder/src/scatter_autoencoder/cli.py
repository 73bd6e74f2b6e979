"""Command line: train L realizations and export the decoder pool.

    scatter-autoencoder train --config cfg.toml --realizations 5 --out DIR

The config file (TOML or JSON) names the training and validation CMX1
files and overrides network/schedule fields:

    [data]
    measurements = "measurements.cmx"     # or "train"/"validation" split
    validation = "validation.cmx"

    [network]
    hidden_dims = [512, 256]
    latent_dim = 64

    [training]
    epochs = 1000
    learning_rate = 1e-5
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from .cmx import read_cmx
from .network import NetworkSpec
from .training import TrainSpec, export_pool, train_realization

try:
    import tomllib
except ModuleNotFoundError:                       # python < 3.11
    import tomli as tomllib

_NETWORK_KEYS = {"hidden_dims", "latent_dim", "activation_epsilon",
                 "batch_norm"}
_TRAINING_KEYS = {"epochs", "learning_rate", "sparsity_weight",
                  "batch_size", "unit_decoder", "seed"}


def load_config(path: Path) -> dict:
    raw = Path(path).read_bytes()
    if path.suffix == ".json":
        cfg = json.loads(raw)
    else:
        cfg = tomllib.loads(raw.decode())
    for section in cfg:
        if section not in ("data", "network", "training"):
            raise ValueError(f"unknown config section {section!r}")
    data = cfg.get("data", {})
    if "measurements" not in data:
        raise ValueError("config must name a [data] measurements file")
    unknown = set(cfg.get("network", {})) - _NETWORK_KEYS
    unknown |= set(cfg.get("training", {})) - _TRAINING_KEYS
    if unknown:
        raise ValueError(f"unknown config keys: {sorted(unknown)}")
    return cfg


def cmd_train(args: argparse.Namespace) -> int:
    config_path = Path(args.config)
    cfg = load_config(config_path)
    base = config_path.parent
    measurements = read_cmx(base / cfg["data"]["measurements"])
    if "validation" in cfg["data"]:
        validation = read_cmx(base / cfg["data"]["validation"])
    else:
        # hold out a deterministic 3/8 tail split
        n_train = measurements.shape[1] * 5 // 8
        measurements, validation = (measurements[:, :n_train],
                                    measurements[:, n_train:])
    net = NetworkSpec(input_dim=measurements.shape[0],
                      **{k: tuple(v) if k == "hidden_dims" else v
                         for k, v in cfg.get("network", {}).items()})
    train_kwargs = dict(cfg.get("training", {}))
    base_seed = int(train_kwargs.pop("seed", 0))
    results = []
    for i in range(args.realizations):
        spec = TrainSpec(seed=base_seed + i, **train_kwargs)
        result = train_realization(measurements, validation, net, spec)
        tag = " (flagged)" if result.flagged else ""
        print(f"realization {i}: final train loss "
              f"{result.trace.train_total[-1]:.4e}, validation "
              f"{result.trace.validation_total[-1]:.4e}{tag}")
        results.append(result)
    manifest = export_pool(results, args.out)
    print(f"wrote {manifest}")
    return 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="scatter-autoencoder",
        description="train decoder-column estimators on unlabeled array data")
    sub = parser.add_subparsers(dest="command", required=True)
    p_train = sub.add_parser("train", help="train L realizations")
    p_train.add_argument("--config", required=True)
    p_train.add_argument("--realizations", type=int, default=1)
    p_train.add_argument("--out", required=True)
    p_train.set_defaults(func=cmd_train)
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
