"""Command line front end for the covert semantic pipeline.

``semantic-dnn train --config cfg.json`` trains both stages for a single
configuration, prints a JSON metrics report, and saves model weights.
``semantic-dnn grid --config grid.json --out results.csv`` trains the
model grid and writes one CSV row per (model, n, k) pipeline.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys
from pathlib import Path

import torch

from .config import TrainConfig
from .data import load_dataset
from .train import run_models, train_and_evaluate

EXIT_OK = 0
EXIT_CONFIG = 2

log = logging.getLogger("semantic_dnn")


def _load_json(path: str) -> dict:
    try:
        with open(path) as fh:
            return json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        print(f"semantic-dnn: cannot read config {path}: {exc}",
              file=sys.stderr)
        raise SystemExit(EXIT_CONFIG)


def _config_from_doc(doc: dict) -> TrainConfig:
    try:
        return TrainConfig.from_json(doc)
    except (TypeError, ValueError) as exc:
        print(f"semantic-dnn: invalid config: {exc}", file=sys.stderr)
        raise SystemExit(EXIT_CONFIG)


def _save_artifacts(out_dir: Path, record: dict, config: TrainConfig) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    stage1, stage2 = record["stage1"], record["stage2"]
    torch.save({
        "config": config.to_json(),
        "encoder": stage1.encoder.state_dict(),
        "classifier": stage1.classifier.state_dict(),
        "channel_encoder": stage2.channel_encoder.state_dict(),
        "channel_decoder": stage2.channel_decoder.state_dict(),
    }, out_dir / f"model_n{config.n}_k{config.k}.pt")


def cmd_train(args) -> int:
    config = _config_from_doc(_load_json(args.config))
    data = load_dataset(seed=config.seed)
    record = train_and_evaluate(config, data)
    _save_artifacts(Path(args.artifacts), record, config)
    report = {key: record[key] for key in
              ("n", "k", "stage1_test_accuracy", "accuracy",
               "final_distortion", "final_covert_gap")}
    report["stage2_history"] = record["stage2"].history
    json.dump(report, sys.stdout, indent=2)
    print()
    return EXIT_OK


GRID_FIELDS = ("model", "n", "k", "accuracy", "stage1_accuracy",
               "final_distortion", "k_star_flag")


def cmd_grid(args) -> int:
    doc = _load_json(args.config)
    if "models" not in doc or not isinstance(doc["models"], list):
        print("semantic-dnn: grid config needs a 'models' list",
              file=sys.stderr)
        return EXIT_CONFIG
    base = _config_from_doc(doc.get("base", {}))
    data = load_dataset(seed=base.seed)
    rows = run_models(base, doc["models"], data)
    with open(args.out, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=GRID_FIELDS)
        writer.writeheader()
        for row in rows:
            writer.writerow(row)
    log.info("wrote %d rows to %s", len(rows), args.out)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="semantic-dnn",
        description="covert semantic communication experiments")
    sub = parser.add_subparsers(dest="command", required=True)

    p_train = sub.add_parser("train", help="train one configuration")
    p_train.add_argument("--config", required=True)
    p_train.add_argument("--artifacts", default="artifacts")
    p_train.set_defaults(func=cmd_train)

    p_grid = sub.add_parser("grid", help="train a model grid, write CSV")
    p_grid.add_argument("--config", required=True)
    p_grid.add_argument("--out", required=True)
    p_grid.set_defaults(func=cmd_grid)
    return parser


def main(argv=None) -> int:
    logging.basicConfig(
        level=os.environ.get("SEMANTIC_DNN_LOG", "WARNING").upper(),
        format="%(levelname)s %(name)s: %(message)s")
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
