"""Command-line entry point: ``protqubit <subcommand> [--config PATH] [--out DIR] ...``."""

from __future__ import annotations

import argparse
import json
import sys

from .config import ConfigError, ExperimentConfig, config_from_dict, load_config
from .figures import PANELS, reproduce_figures
from .runner import resolve_threads, run_config

SUBCOMMANDS = {
    "init-sweep": "init_sweep",
    "manip-sweep": "manip_sweep",
    "splitting-scan": "splitting_scan",
    "spectrum-flow": "spectrum_flow",
    "classify": "classify",
}


def _seed_list(text: str) -> list[int]:
    """'0,1,2' or '0-19' or a mix: '0-4,10'."""
    seeds = []
    for part in text.split(","):
        part = part.strip()
        if not part:
            continue
        if "-" in part:
            a, b = part.split("-", 1)
            seeds.extend(range(int(a), int(b) + 1))
        else:
            seeds.append(int(part))
    if not seeds:
        raise argparse.ArgumentTypeError("empty seed list")
    return seeds


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="protqubit", description="Protected-qubit lattice experiments.")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in list(SUBCOMMANDS) + ["reproduce-figures"]:
        p = sub.add_parser(name)
        p.add_argument("--config", help="YAML experiment config")
        p.add_argument("--out", default=None, help="output directory")
        p.add_argument("--seeds", type=_seed_list, default=None, help="seed list, e.g. 0-19 or 1,5,7")
        p.add_argument("--threads", type=int, default=None, help="worker threads (default: $THREADS or 1)")
        if name == "classify":
            p.add_argument("strings", nargs="*", help='Pauli strings such as "Y11 Y12"')
            p.add_argument("-n", type=int, default=None, help="lattice size when no config is given")
            p.add_argument("--pair", nargs=2, action="append", metavar=("U", "V"), default=None,
                           help="manipulation and noise axes for a scaling prediction")
        if name == "reproduce-figures":
            p.add_argument("--panels", nargs="+", choices=PANELS, default=list(PANELS))
    return parser


def _config_for(args) -> ExperimentConfig:
    kind = SUBCOMMANDS[args.command]
    if args.config:
        cfg = load_config(args.config)
        if cfg.kind != kind:
            raise ConfigError("kind", f"config is {cfg.kind!r} but the subcommand runs {kind!r}")
    elif kind == "classify":
        raw = {"schema_version": 1, "kind": kind, "lattice": {"n": args.n or 2},
               "classify": {"strings": args.strings, "pairs": args.pair or []}}
        return config_from_dict(raw)
    else:
        cfg = config_from_dict({"schema_version": 1, "kind": kind})
    if kind == "classify" and (args.strings or args.pair):
        raw = cfg.to_dict()
        raw["classify"]["strings"] = args.strings or raw["classify"]["strings"]
        raw["classify"]["pairs"] = args.pair or raw["classify"]["pairs"]
        cfg = config_from_dict(raw)
    if args.seeds is not None:
        cfg = cfg.with_seeds(args.seeds)
    return cfg


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        threads = resolve_threads(args.threads)
    except ValueError as e:
        print(f"error: --threads: {e}", file=sys.stderr)
        return 2
    if args.command == "reproduce-figures":
        runs = reproduce_figures(args.out or "figures", tuple(args.panels), args.seeds, threads)
        failed = [p for p, r in runs.items() if not r.ok]
        for p, r in runs.items():
            print(f"{p}: {r.summary['status']} -> {r.out_dir}")
        return 1 if failed else 0
    try:
        cfg = _config_for(args)
    except ConfigError as e:
        print(f"invalid config: {e}", file=sys.stderr)
        return 2
    out = args.out if args.out is not None else f"runs/{cfg.kind}-{cfg.config_hash()[:12]}"
    run = run_config(cfg, out, threads=threads)
    if cfg.kind == "classify":
        print(json.dumps(run.summary["results"], indent=2, sort_keys=True))
    else:
        print(f"{cfg.kind}: {run.summary['status']}, {len(run.rows)} records -> {out}")
    for fail in run.summary["failures"]:
        print(f"failed task {fail['task']}: {fail['error']}", file=sys.stderr)
    return 0 if run.ok else 1


if __name__ == "__main__":
    sys.exit(main())
