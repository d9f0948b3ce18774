"""Command-line entry point: ``run``, ``compare`` and ``presets``.

Exit codes: 0 when every declared tolerance is met, 1 on a tolerance
failure, 2 on a configuration or runtime error.
"""
from __future__ import annotations

import argparse
import sys
from importlib import resources

from .config import KINDS, SCHEMAS, ConfigError, parse_config, quick_overrides
from .experiments import ExperimentError, run
from .report import compare, format_comparison, write_outputs

EXIT_OK, EXIT_FAIL, EXIT_ERROR = 0, 1, 2


def preset_names() -> list[str]:
    return sorted(p.name[:-4] for p in resources.files("mboa.presets").iterdir() if p.name.endswith(".cfg"))


def preset_text(name: str) -> str:
    """Text of preset ``name``; a bare kind resolves to its own preset file."""
    names = preset_names()
    if name not in names:
        raise ConfigError(f"no preset {name!r}; available: {', '.join(names)}")
    return resources.files("mboa.presets").joinpath(name + ".cfg").read_text()


def _load(path: str) -> str:
    if path.endswith(".cfg") or "/" in path:
        with open(path) as fh:
            return fh.read()
    return preset_text(path)


def _cmd_run(args) -> int:
    cfg = parse_config(_load(args.config))
    if args.quick:
        cfg = cfg.with_overrides(**{k.replace(".", "__"): v for k, v in quick_overrides(cfg.kind).items()})
    if args.samples is not None:
        if "numerics.samples" not in SCHEMAS[cfg.kind]:
            print(f"note: kind {cfg.kind!r} has no sample count; --samples ignored", file=sys.stderr)
        else:
            cfg = cfg.with_overrides(numerics__samples=args.samples)
    if args.seed is not None:
        cfg = cfg.with_overrides(experiment__seed=args.seed)
    report = run(cfg)
    paths = write_outputs(report, args.out)
    for m in report.metrics:
        status = "info" if m.relation == "info" else ("PASS" if m.passed else "FAIL")
        tol = "" if m.relation == "info" else f" {m.relation} {m.tolerance!r}"
        print(f"[{status}] {m.name} = {m.value!r}{tol}  ({' vs '.join(m.methods)})")
    for f in report.flags:
        print(f"flag: {f}")
    print(f"report: {paths['report']}  ({report.wall_clock:.1f} s)")
    return EXIT_OK if report.passed else EXIT_FAIL


def _cmd_compare(args) -> int:
    print(format_comparison(compare(args.reports, args.window)))
    return EXIT_OK


def _cmd_presets(args) -> int:
    if args.action == "list":
        for n in preset_names():
            print(n)
        return EXIT_OK
    if args.name is None:
        raise ConfigError("presets show needs a kind or preset name")
    sys.stdout.write(preset_text(args.name))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="mboa", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)
    r = sub.add_parser("run", help="run one experiment configuration")
    r.add_argument("config", help="path to a .cfg file or a preset name")
    r.add_argument("--out", help="output directory (overrides output.dir)")
    r.add_argument("--seed", type=int)
    r.add_argument("--samples", type=int, help="override numerics.samples")
    r.add_argument("--quick", action="store_true", help="reduced-cost settings")
    r.set_defaults(fn=_cmd_run)
    c = sub.add_parser("compare", help="compare methods within and across reports")
    c.add_argument("reports", nargs="+", help="JSON report sidecars or CSV files")
    c.add_argument("--window", type=float, nargs=2, metavar=("T0", "T1"))
    c.set_defaults(fn=_cmd_compare)
    p = sub.add_parser("presets", help=f"list or show presets ({', '.join(KINDS)})")
    p.add_argument("action", choices=("list", "show"))
    p.add_argument("name", nargs="?")
    p.set_defaults(fn=_cmd_presets)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except (ConfigError, ExperimentError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_ERROR
