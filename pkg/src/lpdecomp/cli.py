"""Command-line front end.

Subcommands map to artifact groups of the runner; `run` produces the whole
bundle and `verify` executes the identity suite without writing tables.
Flags override config-file values, which override built-in defaults.
"""
from __future__ import annotations

import argparse
import sys

from .config import load_config
from .runner import run, verify
from .util import LPDecompError

_COMMANDS = (
    ("fit-linear", "OLS local projections: IRF table with HAC bands"),
    ("fit-forest", "forest local projections: IRF table with tree bands"),
    ("decompose", "per-horizon weight / contribution / evidence tables"),
    ("concentration", "top-Q% weight and contribution shares per horizon"),
    ("robustness", "trimmed estimates and expanding/rolling window paths"),
    ("cluster", "k-means over conditional IRFs and cluster-level IRFs"),
    ("verify", "run the algebraic identity suite and report max violations"),
    ("run", "all enabled artifact groups plus charts and a manifest"),
)

_PARTS = {
    "fit-linear": frozenset({"linear-irf"}),
    "fit-forest": frozenset({"forest-irf"}),
    "decompose": frozenset({"decompose"}),
    "concentration": frozenset({"concentration"}),
    "robustness": frozenset({"robustness"}),
    "cluster": frozenset({"cluster"}),
}

_NEEDS_LINEAR = {"fit-linear", "decompose", "robustness"}
_NEEDS_FOREST = {"fit-forest", "cluster"}


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="INI config file; flags override its values")
    p.add_argument(
        "--set",
        action="append",
        default=[],
        metavar="SECTION.KEY=VALUE",
        help="override any config field, repeatable",
    )
    p.add_argument("--data", help="CSV file with a date column")
    p.add_argument("--output", help="output directory")
    p.add_argument("--target", help="outcome column")
    p.add_argument("--shock", help="shock column")
    p.add_argument("--controls", help="comma-separated control columns")
    p.add_argument("--lags", type=int, help="lag order")
    p.add_argument("--horizons", type=int, help="max horizon H")
    p.add_argument("--delta", type=float, help="dose in shock units, signed")
    p.add_argument("--estimator", choices=("linear", "forest", "both"))
    p.add_argument("--trees", type=int, help="trees per forest")
    p.add_argument("--seed", type=int, help="forest seed")
    p.add_argument(
        "--subsample",
        metavar="START:END",
        help="inclusive date range; either side may be empty, e.g. 1960:",
    )


_FLAG_FIELDS = {
    "data": ("data", "path"),
    "output": ("output", "directory"),
    "target": ("data", "target"),
    "shock": ("data", "shock"),
    "controls": ("data", "controls"),
    "lags": ("data", "lags"),
    "horizons": ("data", "horizons"),
    "delta": ("estimator", "delta"),
    "estimator": ("estimator", "kind"),
    "trees": ("forest", "trees"),
    "seed": ("forest", "seed"),
    "subsample": ("data", "subsample"),
}


def _overrides(args: argparse.Namespace) -> dict[tuple[str, str], str]:
    out: dict[tuple[str, str], str] = {}
    for flag, field in _FLAG_FIELDS.items():
        value = getattr(args, flag.replace("-", "_"))
        if value is not None:
            out[field] = str(value)
    for item in args.set:
        if "=" not in item or "." not in item.split("=", 1)[0]:
            raise LPDecompError(
                f"--set expects SECTION.KEY=VALUE, got {item!r}"
            )
        field, _, value = item.partition("=")
        sec, _, key = field.partition(".")
        out[(sec.strip(), key.strip())] = value.strip()
    return out


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="lpdecomp",
        description="Local projections with exact weight decompositions",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, blurb in _COMMANDS:
        _add_common(sub.add_parser(name, help=blurb))
    args = parser.parse_args(argv)
    try:
        cfg = load_config(args.config, _overrides(args))
        return _dispatch(args.command, cfg)
    except LPDecompError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def _dispatch(command: str, cfg) -> int:
    if command in _NEEDS_LINEAR and not cfg.wants("linear"):
        raise LPDecompError(f"{command} needs the linear estimator (estimator.kind)")
    if command in _NEEDS_FOREST and not cfg.wants("forest"):
        raise LPDecompError(f"{command} needs the forest estimator (estimator.kind)")

    if command == "verify":
        checks = verify(cfg)
        ok = True
        for c in checks:
            status = "PASS" if c.passed else "FAIL"
            print(
                f"{c.name}: max violation {c.max_violation:.3e} "
                f"(tolerance {c.tolerance:.0e}) {status}"
            )
            ok = ok and c.passed
        print("all identities hold" if ok else "identity violations found")
        return 0 if ok else 1

    result = run(cfg, _PARTS.get(command))
    for name in result.artifacts:
        print(f"wrote {result.output_dir}/{name}")
    for c in result.checks:
        print(
            f"self-check {c.name}: max violation {c.max_violation:.3e} "
            f"(tolerance {c.tolerance:.0e}) {'PASS' if c.passed else 'FAIL'}"
        )
    return 0


if __name__ == "__main__":
    sys.exit(main())
