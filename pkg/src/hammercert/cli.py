"""Command-line entry point: constants, check-index, certify, solve, report."""

from __future__ import annotations

import argparse
import json
import sys
from importlib import resources
from pathlib import Path

from . import __version__
from . import report as rpt
from .config import load_config, parse_config
from .errors import HammerCertError

BUNDLED = ("example1", "example2")


def bundled_config_text(name: str) -> str:
    return resources.files("hammercert").joinpath("data", f"{name}.cfg").read_text()


def _load(ref: str):
    """A config path, or the name of a bundled example."""
    if ref in BUNDLED and not Path(ref).exists():
        return parse_config(bundled_config_text(ref), f"<bundled {ref}>")
    return load_config(ref)


def _rho_list(text: str) -> list[float]:
    try:
        vals = [float(x) for x in text.replace(",", " ").split()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad rho list {text!r}") from None
    if not vals or any(v <= 0 for v in vals):
        raise argparse.ArgumentTypeError("rho values must be positive")
    return vals


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="hammercert", description=(
        "Certify nontrivial solutions of perturbed Hammerstein integral equations."))
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)
    help_cfg = "config file, or 'example1' / 'example2' for a bundled problem"

    c = sub.add_parser("constants", help="kernel, cone and comparison-operator constants")
    c.add_argument("config", help=help_cfg)
    c = sub.add_parser("check-index", help="index conditions at the given radii")
    c.add_argument("config", help=help_cfg)
    c.add_argument("--rho", type=_rho_list, required=True, help="comma-separated radii")
    c = sub.add_parser("certify", help="match conditions to a solution-count certificate")
    c.add_argument("config", help=help_cfg)
    c = sub.add_parser("solve", help="compute a solution and write it as CSV")
    c.add_argument("config", help=help_cfg)
    c.add_argument("--outdir", type=Path, default=Path("."), help="directory for the CSV curve")
    c = sub.add_parser("report", help="full JSON report (constants, certificate, solution)")
    c.add_argument("config", help=help_cfg)
    c.add_argument("--out", type=Path, required=True, help="JSON report path")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = _load(args.config)
        if args.command == "constants":
            doc, code = rpt.run_constants(cfg), rpt.EXIT_OK
        elif args.command == "check-index":
            doc, code = rpt.run_check_index(cfg, args.rho), rpt.EXIT_OK
        elif args.command == "certify":
            doc, code = rpt.run_certify(cfg)
        elif args.command == "solve":
            doc, code = rpt.run_solve(cfg, args.outdir)
        else:
            doc, code = rpt.run_report(cfg, args.out)
            summary = {"report": str(args.out), "pattern": doc["certificate"]["pattern"],
                       "solution_count": doc["certificate"]["solution_count"]}
            sys.stdout.write(json.dumps(summary) + "\n")
            return code
    except HammerCertError as exc:
        sys.stderr.write(json.dumps(exc.to_dict()) + "\n")
        return rpt.EXIT_ERROR
    sys.stdout.write(rpt.dumps(doc))
    return code


if __name__ == "__main__":
    sys.exit(main())
