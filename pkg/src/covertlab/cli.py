"""Command-line front end: limits, simulation, warden checks, scaling sweeps.

All subcommands read a single JSON config file and write CSV or JSON
results.  Identical config + seed produce byte-identical output (the
timestamp header can be suppressed with ``--no-timestamp``).

Exit codes: 0 success, 2 config error, 3 enumeration guard exceeded.
"""

from __future__ import annotations

import argparse
import csv
import datetime
import io
import json
import logging
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from . import limits as lim
from . import separation_codec as codec
from . import warden as war
from .dmc_core import (
    BinaryInputDMC,
    SourceSpec,
    ValidationError,
    channel_from_json,
    chi_squared,
    kl_divergence,
    source_from_json,
)

log = logging.getLogger("covertlab")

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_GUARD = 3


class ConfigError(Exception):
    pass


def _fmt(x) -> str:
    if isinstance(x, float):
        return format(x, ".17g")
    return str(x)


def _setup_logging():
    level = os.environ.get("COVERT_LAB_LOG", "warn").lower()
    levels = {"error": logging.ERROR, "warn": logging.WARNING,
              "info": logging.INFO, "debug": logging.DEBUG}
    logging.basicConfig(level=levels.get(level, logging.WARNING),
                        format="%(levelname)s %(name)s: %(message)s")


def _load_config(path: str) -> dict:
    try:
        with open(path) as fh:
            return json.load(fh)
    except FileNotFoundError as exc:
        raise ConfigError(f"config file not found: {path}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path}: invalid JSON at line {exc.lineno}: "
                          f"{exc.msg}") from exc


def _load_channel(cfg: dict, base: str) -> BinaryInputDMC:
    return _load_doc(cfg, "channel", base, channel_from_json)


def _load_source(cfg: dict, base: str) -> SourceSpec:
    return _load_doc(cfg, "source", base, source_from_json)


def _load_doc(cfg, key, base, loader):
    if key not in cfg:
        raise ConfigError(f"config missing {key!r}")
    spec = cfg[key]
    try:
        if isinstance(spec, dict):
            return loader(spec)
        path = spec if os.path.isabs(spec) else os.path.join(base, spec)
        with open(path) as fh:
            return loader(fh)
    except FileNotFoundError as exc:
        raise ConfigError(f"{key} file not found: {spec}") from exc
    except (ValidationError, json.JSONDecodeError) as exc:
        raise ConfigError(f"invalid {key}: {exc}") from exc


def _open_out(path, header_comment: str | None):
    fh = open(path, "w", newline="") if path else sys.stdout
    if header_comment is not None:
        fh.write(header_comment + "\n")
    return fh


def _timestamp_line(args) -> str | None:
    if args.no_timestamp:
        return None
    return "# generated " + datetime.datetime.now(datetime.timezone.utc).isoformat()


# ---------------------------------------------------------------------------
# limits


def cmd_limits(args) -> int:
    cfg = _load_config(args.config)
    base = os.path.dirname(os.path.abspath(args.config))
    channel = _load_channel(cfg, base)
    source = _load_source(cfg, base)
    cap = lim.covert_capacity(channel)
    d_triv = lim.trivial_distortion(source)
    report = {"covert_capacity": cap.to_json(), "D_trivial": d_triv}

    verdicts = []
    for entry in cfg.get("admissibility", []):
        regime = lim.ScalingRegime(entry["kind"], entry.get("gamma"))
        d = float(entry["D"])
        r_of_d = lim.rate_distortion(source, d).rate_bits
        admissible = lim.classify_admissibility(regime, r_of_d, cap, d, d_triv)
        verdicts.append({"kind": regime.kind, "gamma": regime.gamma, "D": d,
                         "R_of_D_bits": r_of_d,
                         "admissible": bool(admissible)})
    if verdicts:
        report["admissibility"] = verdicts

    if "curve_grid" in cfg:
        grid = cfg["curve_grid"]
        ds = np.linspace(float(grid["start"]), float(grid["stop"]),
                         int(grid["count"]))
        curve = lim.rate_distortion_curve(source, ds)
        curve_out = cfg.get("curve_out")
        if curve_out:
            path = curve_out if os.path.isabs(curve_out) else os.path.join(base, curve_out)
            with open(path, "w", newline="") as fh:
                writer = csv.writer(fh)
                writer.writerow(["D", "R_bits", "iterations", "slack"])
                for row in curve.to_csv_rows():
                    writer.writerow([_fmt(row["D"]), _fmt(row["R_bits"]),
                                     row["iterations"], _fmt(row["slack"])])
            report["curve_csv"] = path
        else:
            report["curve"] = [{"D": p.distortion, "R_bits": p.rate_bits}
                               for p in curve.points]

    out = json.dumps(report, indent=2, sort_keys=True)
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(out + "\n")
    else:
        print(out)
    return EXIT_OK


# ---------------------------------------------------------------------------
# simulate


def _params_from_cfg(cfg: dict) -> codec.CodeParams:
    try:
        return codec.CodeParams(
            n=int(cfg["n"]), k=int(cfg["k"]), rate_R=float(cfg["rate_R"]),
            alpha_n=float(cfg["alpha_n"]), key_count=int(cfg.get("key_count", 1)),
            codeword_mode=cfg.get("codeword_mode", codec.MODE_FIXED_WEIGHT),
            epsilon=float(cfg.get("epsilon", 0.05)),
            target_distortion=cfg.get("target_distortion"))
    except KeyError as exc:
        raise ConfigError(f"simulate config missing key {exc}") from exc
    except (ValueError, TypeError) as exc:
        raise ConfigError(f"bad simulate config: {exc}") from exc


def cmd_simulate(args) -> int:
    cfg = _load_config(args.config)
    base = os.path.dirname(os.path.abspath(args.config))
    channel = _load_channel(cfg, base)
    source = _load_source(cfg, base)
    params = _params_from_cfg(cfg)
    trials = int(args.trials or cfg.get("trials", 1000))
    seed = int(args.seed if args.seed is not None else cfg.get("seed", 0))
    record = codec.end_to_end_simulate(params, source, channel, trials, seed)
    fh = _open_out(args.out, _timestamp_line(args))
    writer = csv.writer(fh)
    writer.writerow(codec.ExperimentRecord.CSV_FIELDS)
    writer.writerow([_fmt(record.csv_values()[f])
                     for f in codec.ExperimentRecord.CSV_FIELDS])
    if fh is not sys.stdout:
        fh.close()
    return EXIT_OK


# ---------------------------------------------------------------------------
# warden


def cmd_warden(args) -> int:
    cfg = _load_config(args.config)
    base = os.path.dirname(os.path.abspath(args.config))
    channel = _load_channel(cfg, base)
    source = _load_source(cfg, base)
    params = _params_from_cfg(cfg)
    seed = int(args.seed if args.seed is not None else cfg.get("seed", 0))
    ensemble = codec.build_ensemble(params, source, channel, seed)
    report = war.covertness_report(
        ensemble, source, channel, seed,
        samples=int(cfg.get("samples", 0)), exact=bool(cfg.get("exact", False)))
    out = report.to_json()
    kl = report.kl_exact if report.kl_exact is not None else report.kl_mc_mean
    if kl is not None and math.isfinite(kl):
        out["detection_bound_nats_convention"] = war.detection_bound(kl)
        out["detection_bound_bits_convention"] = war.detection_bound(
            kl / math.log(2.0))
        out["detection_bound_pinsker"] = war.pinsker_detection_bound(kl)
    lr_trials = int(cfg.get("lr_trials", 0))
    if lr_trials:
        det = war.lr_test_simulate(ensemble, source, channel, lr_trials, seed)
        out["lr_test"] = {
            "miss_rate": det.miss_rate, "miss_se": det.miss_se,
            "false_alarm_rate": det.false_alarm_rate,
            "false_alarm_se": det.false_alarm_se, "trials": det.trials,
        }
    text = json.dumps(out, indent=2, sort_keys=True)
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text + "\n")
    else:
        print(text)
    return EXIT_OK


# ---------------------------------------------------------------------------
# sweep

SWEEP_FIELDS = ("n", "k", "R_nominal", "R_realized", "alpha_n",
                "distortion_mean", "distortion_se", "err_rate", "err_se",
                "seed", "delta_n", "kl_nats", "kl_se_nats", "kl_mode",
                "target_D", "R_of_D_bits", "converse_bound_bits", "flags")


def _delta_for(rule: dict, n: int) -> float:
    kind = rule.get("kind", "constant")
    value = float(rule.get("value", 0.02))
    if kind == "constant":
        return value
    if kind == "inverse-log":
        return value / math.log(n)
    raise ConfigError(f"unknown delta rule kind {kind!r}")


def _k_for(rule: dict, n: int, delta_n: float, index: int) -> int:
    kind = rule.get("kind", "sqrt")
    if kind == "sqrt":
        gamma = float(rule.get("gamma", 1.0))
        k = round(math.sqrt(n * delta_n) / gamma)
    elif kind == "linear":
        k = round(float(rule.get("c", 0.125)) * n)
    elif kind == "fixed":
        k = int(rule["values"][index])
    else:
        raise ConfigError(f"unknown k rule kind {kind!r}")
    return max(1, int(k))


def _alpha_for(rule: dict, n: int, delta_n: float, message_bits: int,
               channel: BinaryInputDMC, index: int) -> float:
    kind = rule.get("kind", "budget")
    if kind == "budget":
        chi2 = chi_squared(channel.z_given_1, channel.z_given_0)
        if chi2 <= 0:
            raise ConfigError("budget alpha rule needs chi^2 > 0")
        alpha = math.sqrt(2.0 * delta_n / (n * chi2))
    elif kind == "rate-matched":
        margin = float(rule.get("margin", 3.0))
        d_y = kl_divergence(channel.y_given_1, channel.y_given_0, unit="bits")
        if not (d_y > 0 and math.isfinite(d_y)):
            raise ConfigError("rate-matched alpha rule needs finite D(Y|1||Y|0) > 0")
        alpha = margin * max(message_bits, 1) / (n * d_y)
    elif kind == "fixed":
        alpha = float(rule["values"][index])
    else:
        raise ConfigError(f"unknown alpha rule kind {kind!r}")
    return min(max(alpha, 1.0 / (2 * n)), 0.5)


def _sweep_point(task: dict) -> dict:
    """One sweep operating point; pure function of the task dict."""
    channel = channel_from_json(task["channel"])
    source = source_from_json(task["source"])
    params = codec.CodeParams(
        n=task["n"], k=task["k"], rate_R=task["rate_R"], alpha_n=task["alpha_n"],
        key_count=task["key_count"], codeword_mode=task["codeword_mode"],
        epsilon=task["epsilon"], target_distortion=task.get("target_distortion"))
    seed = task["seed"]
    delta_n = task["delta_n"]
    ensemble = codec.build_ensemble(params, source, channel, seed)
    record = codec.end_to_end_simulate(params, source, channel, task["trials"],
                                       seed, ensemble=ensemble)

    kl = kl_se = float("nan")
    kl_mode = "unavailable"
    flags = []
    z_size = len(channel.z_given_0)
    mixture_small = ensemble.message_count * params.key_count <= 1024
    try:
        if params.n <= 16 and z_size ** params.n <= war.EXACT_ENUM_GUARD \
                and mixture_small:
            kl = war.exact_output_kl(ensemble, source, channel)
            kl_se = 0.0
            kl_mode = "exact"
        elif task["kl_samples"] > 0:
            kl, kl_se = war.monte_carlo_kl(ensemble, source, channel,
                                           task["kl_samples"], seed)
            kl_mode = "mc"
    except codec.GuardExceededError:
        flags.append("kl-guard-exceeded")

    if params.target_distortion is not None:
        target_d = params.target_distortion
    else:
        target_d = lim.distortion_at_rate(source, params.realized_rate)
    r_of_d = lim.rate_distortion(source, target_d).rate_bits
    converse = lim.converse_rate_bound(params.n, params.k, delta_n, channel)

    if math.isfinite(kl) and kl > delta_n:
        flags.append("covertness-violated")
    covert_ok = math.isfinite(kl) and kl <= delta_n
    reliable = record.err_rate <= 0.05
    distortion_ok = record.distortion_mean <= target_d
    if covert_ok and reliable and distortion_ok and r_of_d > 1.1 * converse:
        flags.append("converse-violated")

    row = record.csv_values()
    row.update({
        "delta_n": delta_n, "kl_nats": kl, "kl_se_nats": kl_se,
        "kl_mode": kl_mode, "target_D": target_d, "R_of_D_bits": r_of_d,
        "converse_bound_bits": converse, "flags": "|".join(flags)})
    return row


def sweep_rows(cfg: dict, base: str, seed: int, trials: int | None,
               jobs: int = 1) -> list[dict]:
    channel = _load_channel(cfg, base)
    source = _load_source(cfg, base)
    channel_doc = {
        "y_given_0": channel.y_given_0.probs.tolist(),
        "y_given_1": channel.y_given_1.probs.tolist(),
        "z_given_0": channel.z_given_0.probs.tolist(),
        "z_given_1": channel.z_given_1.probs.tolist()}
    source_doc = {"pmf": source.pmf.probs.tolist(),
                  "distortion": source.distortion.tolist()}
    n_list = [int(n) for n in cfg.get("n_list", [])]
    if not n_list:
        raise ConfigError("sweep config needs a nonempty n_list")
    if any(n < 4 for n in n_list):
        raise ConfigError("every n must be >= 4")
    delta_rule = cfg.get("delta_rule", {"kind": "constant", "value": 0.02})
    k_rule = cfg.get("k_rule", {"kind": "sqrt", "gamma": 1.0})
    alpha_rule = cfg.get("alpha_rule", {"kind": "budget"})
    rate_r = float(cfg.get("rate_R", 0.5))
    tasks = []
    for i, n in enumerate(n_list):
        delta_n = _delta_for(delta_rule, n)
        k = _k_for(k_rule, n, delta_n, i)
        message_bits = max(0, math.ceil(k * rate_r - 1e-12))
        alpha = _alpha_for(alpha_rule, n, delta_n, message_bits, channel, i)
        tasks.append({
            "channel": channel_doc, "source": source_doc,
            "n": n, "k": k, "rate_R": rate_r, "alpha_n": alpha,
            "key_count": int(cfg.get("key_count", 1)),
            "codeword_mode": cfg.get("codeword_mode", codec.MODE_FIXED_WEIGHT),
            "epsilon": float(cfg.get("epsilon", 0.05)),
            "target_distortion": cfg.get("target_distortion"),
            "delta_n": delta_n,
            "trials": trials if trials is not None else int(cfg.get("trials", 1000)),
            "kl_samples": int(cfg.get("kl_samples", 0)),
            "seed": seed})
    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            rows = list(pool.map(_sweep_point, tasks))
    else:
        rows = [_sweep_point(t) for t in tasks]
    rows.sort(key=lambda r: (r["n"], r["k"]))
    return rows


def cmd_sweep(args) -> int:
    cfg = _load_config(args.config)
    base = os.path.dirname(os.path.abspath(args.config))
    seed = int(args.seed if args.seed is not None else cfg.get("seed", 0))
    trials = int(args.trials) if args.trials else None
    rows = sweep_rows(cfg, base, seed, trials, jobs=args.jobs)
    fh = _open_out(args.out, _timestamp_line(args))
    writer = csv.writer(fh)
    writer.writerow(SWEEP_FIELDS)
    for row in rows:
        writer.writerow([_fmt(row[f]) for f in SWEEP_FIELDS])
    if fh is not sys.stdout:
        fh.close()
    return EXIT_OK


# ---------------------------------------------------------------------------
# plotdata

PLOT_SERIES = (("distortion", "distortion_mean", "distortion_se"),
               ("error_rate", "err_rate", "err_se"),
               ("kl_nats", "kl_nats", "kl_se_nats"))


def cmd_plotdata(args) -> int:
    try:
        with open(args.csv_in) as fh:
            lines = [ln for ln in fh if not ln.startswith("#")]
    except FileNotFoundError:
        raise ConfigError(f"input CSV not found: {args.csv_in}")
    reader = csv.DictReader(io.StringIO("".join(lines)))
    rows = list(reader)
    fh = _open_out(args.out, _timestamp_line(args))
    writer = csv.writer(fh)
    writer.writerow(["series", "n", "value", "stderr"])
    for series, value_col, se_col in PLOT_SERIES:
        for row in rows:
            if value_col not in (row or {}):
                raise ConfigError(f"input CSV missing column {value_col!r}")
            writer.writerow([series, row["n"], row[value_col], row.get(se_col, "")])
    if fh is not sys.stdout:
        fh.close()
    return EXIT_OK


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="covertlab",
        description="Covert joint source-channel coding laboratory")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, needs_config=True):
        if needs_config:
            p.add_argument("--config", required=True, help="JSON config path")
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--trials", type=int, default=None)
        p.add_argument("--jobs", type=int, default=1)
        p.add_argument("--out", default=None, help="output path (default stdout)")
        p.add_argument("--no-timestamp", action="store_true",
                       help="suppress the timestamp header line")

    p = sub.add_parser("limits", help="capacity / rate-distortion report")
    common(p)
    p.set_defaults(func=cmd_limits)

    p = sub.add_parser("simulate", help="one end-to-end operating point")
    common(p)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("warden", help="covertness and detection measurement")
    common(p)
    p.set_defaults(func=cmd_warden)

    p = sub.add_parser("sweep", help="scaling sweep over blocklengths")
    common(p)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("plotdata", help="tidy long-format plot data from a sweep CSV")
    p.add_argument("csv_in", help="sweep CSV input")
    common(p, needs_config=False)
    p.set_defaults(func=cmd_plotdata)

    return parser


def main(argv=None) -> int:
    _setup_logging()
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except codec.GuardExceededError as exc:
        print(f"guard exceeded: {exc}", file=sys.stderr)
        return EXIT_GUARD


if __name__ == "__main__":
    sys.exit(main())
