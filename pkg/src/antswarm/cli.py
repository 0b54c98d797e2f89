"""Command line entry point: single runs, experiment presets and heatmap export."""

from __future__ import annotations

import argparse
import dataclasses
import logging
import sys
from pathlib import Path

from .experiments import experiment_preset, format_report
from .gridio import export_heatmap
from .sim import RunConfig, apply_overrides, load_config, run
from .weather import MODES


def _onoff(text: str) -> bool:
    low = text.lower()
    if low in ("on", "true", "1", "yes"):
        return True
    if low in ("off", "false", "0", "no"):
        return False
    raise argparse.ArgumentTypeError(f"expected on/off, got {text!r}")


def parse_seeds(text: str) -> list[int]:
    """Accept '0..9', '3' or '1,4,7'."""
    text = text.strip()
    if ".." in text:
        lo, hi = text.split("..", 1)
        a, b = int(lo), int(hi)
        if b < a:
            raise argparse.ArgumentTypeError(f"empty seed range {text!r}")
        return list(range(a, b + 1))
    try:
        return [int(s) for s in text.split(",") if s.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad seed list {text!r}") from None


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="antswarm", description=__doc__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="run one simulation")
    r.add_argument("--config", type=Path, help="flat key = value config file")
    r.add_argument("--seed", type=int)
    r.add_argument("--team-size", type=int)
    r.add_argument("--pf", type=_onoff)
    r.add_argument("--coord", type=_onoff)
    r.add_argument("--weather", choices=MODES)
    r.add_argument("--horizon", type=float)
    r.add_argument("--out", type=Path)

    e = sub.add_parser("experiment", help="run an experiment preset over seeds")
    e.add_argument("--preset", type=int, choices=(1, 2, 3), required=True)
    e.add_argument("--seeds", type=parse_seeds, default=list(range(10)))
    e.add_argument("--config", type=Path, help="base config applied to every arm")
    e.add_argument("--out", type=Path)

    h = sub.add_parser("heatmap", help="convert a grid CSV into a PGM image")
    h.add_argument("--in", dest="inp", type=Path, required=True)
    h.add_argument("--out", type=Path, required=True)
    return p


def _run_config(args) -> RunConfig:
    cfg = load_config(args.config) if args.config else RunConfig()
    flags = {"seed": args.seed, "team_size": args.team_size, "pf_enabled": args.pf,
             "coordination_enabled": args.coord, "weather": args.weather, "horizon_s": args.horizon,
             "out": str(args.out) if args.out else None}
    cfg = apply_overrides(cfg, {k: v for k, v in flags.items() if v is not None})
    cfg.validate()
    return cfg


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "run":
            res = run(_run_config(args))
            sys.stdout.write(res.metrics_csv)
        elif args.command == "experiment":
            base = load_config(args.config) if args.config else RunConfig()
            base = dataclasses.replace(base, out=None)
            report = experiment_preset(args.preset, args.seeds, args.out, base)
            print(format_report(report))
        else:
            export_heatmap(args.inp, args.out)
    except (ValueError, KeyError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
