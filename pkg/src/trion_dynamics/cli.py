"""Command-line interface.

Subcommands mirror the modelled experiments (rabi, ramsey, coherence, map,
zeeman) plus `fit` for post-hoc analysis of a run directory and `selftest`
for the built-in verification battery.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .config import ConfigError, apply_override, parse_config
from .runner import refit, run

EXPERIMENT_COMMANDS = ("rabi", "ramsey", "coherence", "map", "zeeman")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="trion-dynamics",
        description=(
            "Simulate the optically driven four-level trion qubit: Rabi "
            "oscillations, Ramsey interference, coherence decay, complete "
            "coherent control, and Zeeman line positions."
        ),
    )
    sub = parser.add_subparsers(dest="command", required=True)

    for name, text in (
        ("rabi", "signal vs single-pulse area"),
        ("ramsey", "signal vs fine interpulse delay"),
        ("coherence", "fringe amplitude vs coarse delay, with decay fit"),
        ("map", "2-D signal map over (area, fine delay)"),
        ("zeeman", "transition energies vs magnetic field"),
    ):
        p = sub.add_parser(name, help=text)
        p.add_argument("--config", type=Path, help="JSON config (or a manifest.json)")
        p.add_argument("--out", type=Path, help="output directory")
        p.add_argument(
            "--detuning", type=float, help="laser detuning in GHz (overrides config)"
        )
        p.add_argument(
            "--set",
            dest="overrides",
            action="append",
            default=[],
            metavar="KEY=VALUE",
            help="config override, e.g. system.gamma_spont=0.5 or b_max=5",
        )

    p_fit = sub.add_parser("fit", help="fit an existing run directory")
    p_fit.add_argument("run_dir", type=Path)
    p_fit.add_argument(
        "--measured", type=Path, help="measured power,counts CSV (rabi calibration)"
    )

    sub.add_parser("selftest", help="run the verification battery")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)

    if args.command == "selftest":
        from .selftest import run_selftest

        return 1 if run_selftest() else 0

    if args.command == "fit":
        if not (args.run_dir / "manifest.json").exists():
            print(f"no manifest.json in {args.run_dir}", file=sys.stderr)
            return 2
        return refit(args.run_dir, args.measured)

    try:
        data = {}
        if args.config is not None:
            data = json.loads(Path(args.config).read_text())
            if "config" in data and isinstance(data.get("config"), dict):
                data = data["config"]
        data["experiment"] = args.command
        if args.detuning is not None:
            data.setdefault("sequence", {})["detuning_ghz"] = args.detuning
        for item in args.overrides:
            if "=" not in item:
                parser.error(f"--set expects KEY=VALUE, got {item!r}")
            key, _, value = item.partition("=")
            apply_override(data, key.strip(), value.strip())
        config = parse_config(json.dumps(data))
    except (ConfigError, json.JSONDecodeError, OSError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2

    return run(config, out_dir=args.out)


if __name__ == "__main__":
    sys.exit(main())
