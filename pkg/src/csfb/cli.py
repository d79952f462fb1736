"""Command-line entry point for configuring and running experiment sweeps.

Exit codes: 0 success, 2 invalid configuration, 3 infeasible sweep (every
point skipped), 4 I/O failure.
"""

from __future__ import annotations

import argparse
import csv
import logging
import os
import sys
from typing import Sequence

import yaml

from .channels import SystemParams
from .harness import (CSV_COLUMNS, ConfigError, ExperimentConfig, SCENARIOS,
                      WISHART_SCENARIOS, emit_csv, emit_plot_data, preset,
                      run_experiment, sweep_points)

log = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_INFEASIBLE = 3
EXIT_IO = 4


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="csfb",
        description="Monte-Carlo sweeps of shared-channel opportunistic feedback")
    sub = parser.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", help="run a sweep and emit CSV or plot data")
    run.add_argument("--scenario", choices=SCENARIOS, default=None,
                     help="named preset (default: custom)")
    run.add_argument("--users", type=int, default=None, help="number of users n")
    run.add_argument("--antennas", type=int, default=None,
                     help="transmit antennas / beams p")
    run.add_argument("--snr-db", type=float, default=None,
                     help="downlink SNR in dB (per-beam rho unless --snr-is-total)")
    run.add_argument("--snr-is-total", action="store_true", default=None,
                     help="interpret --snr-db as total power, rho = P/p")
    run.add_argument("--fb-snr-db", type=float, default=None,
                     help="feedback channel SNR in dB")
    run.add_argument("--sigma", type=float, default=None,
                     help="feedback noise level, overrides --fb-snr-db")
    run.add_argument("--mode", choices=("analog", "digital"), default=None)
    run.add_argument("--recovery", choices=("maxcorr", "lasso"), default=None)
    run.add_argument("--sparsity", default=None,
                     help="target sparsity s, single value or comma list")
    run.add_argument("--c-half", default=None,
                     help="channel-count constant c/2, single value or comma list")
    run.add_argument("--thresholds", default=None,
                     help="threshold count k, single value or comma list")
    run.add_argument("--groups", type=int, default=None,
                     help="block count for block-diagonal matrices")
    run.add_argument("--budget-bits", default=None,
                     help="digital bit budgets p*k*r, single value or comma list")
    run.add_argument("--trials", type=int, default=None)
    run.add_argument("--seed", type=int, default=None)
    run.add_argument("--workers", type=int, default=None,
                     help="parallel worker processes (default 1)")
    run.add_argument("--ceil", action="store_true", default=None,
                     help="round channel counts up instead of to nearest")
    run.add_argument("--literal-wishart", action="store_true", default=None,
                     help="use the uncorrected closed forms in fig7/fig8")
    run.add_argument("--out", default=None,
                     help="output path; .csv writes CSV, anything else plot data")
    run.add_argument("--config", default=None,
                     help="YAML file, one sweep per document; flags override")
    run.add_argument("-v", "--verbose", action="count", default=0)
    return parser


def _as_list(value, cast) -> tuple:
    if isinstance(value, (list, tuple)):
        return tuple(cast(x) for x in value)
    return tuple(cast(x) for x in str(value).split(","))


_FLAG_KEYS = ("scenario", "users", "antennas", "snr_db", "snr_is_total",
              "fb_snr_db", "sigma", "mode", "recovery", "sparsity", "c_half",
              "thresholds", "groups", "budget_bits", "trials", "seed",
              "workers", "ceil", "literal_wishart", "out")


def config_from_options(opts: dict) -> ExperimentConfig:
    """Build an ExperimentConfig from flag-named options on top of the
    scenario preset."""
    unknown = set(opts) - set(_FLAG_KEYS)
    if unknown:
        raise ConfigError(f"unknown option(s): {', '.join(sorted(unknown))}")
    scenario = opts.get("scenario") or "custom"
    over: dict = {}
    try:
        if any(opts.get(key) is not None
               for key in ("users", "antennas", "snr_db", "snr_is_total")):
            n = 100 if opts.get("users") is None else int(opts["users"])
            p = 4 if opts.get("antennas") is None else int(opts["antennas"])
            snr_db = 10.0 if opts.get("snr_db") is None else float(opts["snr_db"])
            snr = 10.0 ** (snr_db / 10.0)
            rho = snr / p if opts.get("snr_is_total") else snr
            over["params"] = SystemParams(n=n, p=p, rho=rho)
        if opts.get("fb_snr_db") is not None:
            over["fb_snr"] = 10.0 ** (float(opts["fb_snr_db"]) / 10.0)
        if opts.get("sigma") is not None:
            over["sigma"] = float(opts["sigma"])
        if opts.get("mode") is not None:
            over["mode"] = opts["mode"]
        if opts.get("recovery") is not None:
            over["recovery"] = opts["recovery"]
            over["recoveries"] = ()
        if opts.get("sparsity") is not None:
            over["s_grid"] = _as_list(opts["sparsity"], int)
        if opts.get("c_half") is not None:
            over["c_half_grid"] = _as_list(opts["c_half"], float)
        if opts.get("thresholds") is not None:
            over["k_grid"] = _as_list(opts["thresholds"], int)
        if opts.get("groups") is not None:
            over["groups"] = int(opts["groups"])
        if opts.get("budget_bits") is not None:
            over["budget_bits"] = _as_list(opts["budget_bits"], int)
        if opts.get("trials") is not None:
            over["trials"] = int(opts["trials"])
        if opts.get("seed") is not None:
            over["seed"] = int(opts["seed"])
        if opts.get("workers") is not None:
            over["workers"] = int(opts["workers"])
        if opts.get("ceil") is not None:
            over["ceil_channels"] = bool(opts["ceil"])
        if opts.get("literal_wishart") is not None:
            over["literal_wishart"] = bool(opts["literal_wishart"])
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc
    return preset(scenario, **over)


def _load_documents(path: str) -> list[dict]:
    try:
        with open(path) as fh:
            docs = [doc for doc in yaml.safe_load_all(fh) if doc is not None]
    except OSError as exc:
        raise OSError(f"cannot read {path}: {exc}") from exc
    except yaml.YAMLError as exc:
        raise ConfigError(f"malformed config {path}: {exc}") from exc
    for doc in docs:
        if not isinstance(doc, dict):
            raise ConfigError(f"each document in {path} must be a mapping")
    return docs


def _emit(rows, out: str | None) -> None:
    if out is None:
        writer = csv.writer(sys.stdout, lineterminator="\n")
        writer.writerow(CSV_COLUMNS)
        for row in rows:
            writer.writerow(row.formatted())
    elif out.endswith(".csv"):
        emit_csv(rows, out)
    else:
        emit_plot_data(rows, out)


def _indexed(path: str, index: int) -> str:
    root, ext = os.path.splitext(path)
    return f"{root}_{index}{ext}"


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    level = (logging.WARNING, logging.INFO, logging.DEBUG)[min(args.verbose, 2)]
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")

    flags = {key: getattr(args, key) for key in _FLAG_KEYS}
    try:
        if args.config is not None:
            docs = _load_documents(args.config)
            if not docs:
                raise ConfigError(f"{args.config} holds no documents")
        else:
            docs = [{}]
        merged = []
        for doc in docs:
            opts = {str(k).replace("-", "_"): v for k, v in doc.items()}
            opts.update({k: v for k, v in flags.items() if v is not None})
            merged.append(opts)

        for i, opts in enumerate(merged):
            out = opts.pop("out", None)
            if out is not None and len(merged) > 1:
                out = _indexed(out, i)
            config = config_from_options(opts)
            rows = list(run_experiment(config))
            if not rows:
                candidates = (len(sweep_points(config))
                              or (config.scenario in WISHART_SCENARIOS))
                log.error("sweep %d produced no rows (%s)", i,
                          "all points infeasible" if candidates
                          else "empty sweep grid")
                return EXIT_INFEASIBLE
            points = sweep_points(config)
            if (any(pt.recovery != "dedicated" for pt in points)
                    and all(row.recovery == "dedicated" for row in rows)):
                log.error("sweep %d: every requested grid cell was skipped; "
                          "only baseline rows remain", i)
                return EXIT_INFEASIBLE
            _emit(rows, out)
    except ConfigError as exc:
        log.error("invalid configuration: %s", exc)
        return EXIT_CONFIG
    except OSError as exc:
        log.error("%s", exc)
        return EXIT_IO
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
