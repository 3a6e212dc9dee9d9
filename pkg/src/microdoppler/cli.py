"""Command line: ``microdoppler {run,compare,sweep,validate} <config>``.

``<config>`` is a path or the name of a bundled config. Outputs go to
``$MICRODOPPLER_OUT/<name>`` (default ``./runs/<name>``) unless ``--out`` is
given. With ``--check`` the exit code is 1 when any configured check fails.
Config errors exit with 2.
"""
from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path

from . import pipeline
from .pipeline import ConfigError

ENV_OUT = "MICRODOPPLER_OUT"


def _out_dir(args, name: str) -> Path:
    if args.out:
        return Path(args.out)
    return Path(os.environ.get(ENV_OUT, "runs")) / name


def _fmt(v, spec: str = ".2f") -> str:
    return "-" if v is None else format(v, spec)


def _cmd_run(args) -> int:
    cfg = pipeline.load_config(args.config)
    if args.seed is not None:
        cfg.seed = args.seed
    out = _out_dir(args, cfg.name)
    rep = pipeline.run(cfg, out)
    m = rep.metrics
    print(f"{rep.name}: method={m['method']} resolved={m['resolved_count']} "
          f"sidelobe_db={_fmt(m['sidelobe_db'])} runtime={rep.runtime:.3f}s")
    for c in rep.checks:
        print(f"  {'PASS' if c.passed else 'FAIL'} {c.name}: value={c.value} threshold={c.threshold}")
    print(f"wrote {', '.join(rep.outputs)} to {out}")
    return 1 if args.check and not rep.passed else 0


def _cmd_compare(args) -> int:
    cfg = pipeline.load_config(args.config)
    if args.seed is not None:
        cfg.seed = args.seed
    out = _out_dir(args, cfg.name)
    rows = pipeline.compare(cfg, out)
    print(f"{'method':<10} {'resolved':>9} {'rmse_bins':>10} {'sidelobe_db':>12} {'runtime_s':>10}")
    for r in rows:
        print(f"{r.label:<10} {f'{r.resolved_count}/{r.n_truth}':>9} "
              f"{_fmt(r.frequency_rmse_bins, '.3f'):>10} {_fmt(r.sidelobe_db):>12} "
              f"{r.runtime:>10.3f}")
    print(f"wrote compare.csv to {out}")
    return 0


def _cmd_sweep(args) -> int:
    cfg = pipeline.load_config(args.config)
    out = _out_dir(args, cfg.name)
    rep = pipeline.sweep(cfg, out)
    for key, rate in rep.pass_rates.items():
        print(f"  {key}: {rate:.3f} (required {cfg.required_pass_rate})")
    for row in rep.phase_rows:
        print(f"  L={row['L']} m={row['measurements']} success={row['success_rate']:.2f}")
    print(f"{rep.name}: {'PASS' if rep.passed else 'FAIL'} in {rep.runtime:.2f}s; wrote to {out}")
    return 1 if args.check and not rep.passed else 0


def _cmd_validate(args) -> int:
    cfg = pipeline.load_config(args.config)
    parts = []
    if cfg.stages:
        parts.append("stages " + " -> ".join(s["type"] for s in cfg.stages))
    if cfg.methods:
        parts.append(f"{len(cfg.methods)} compare methods")
    if cfg.seeds:
        parts.append(f"{len(cfg.seeds)} seeds")
    if cfg.phase_transition is not None:
        parts.append("phase transition")
    print(f"{cfg.name}: ok ({'; '.join(parts)})")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="microdoppler", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="verb", required=True)
    for verb, fn, help_ in (("run", _cmd_run, "run one stage chain"),
                            ("compare", _cmd_compare, "tabulate several methods on one scene"),
                            ("sweep", _cmd_sweep, "Monte-Carlo over seeds or phase transition"),
                            ("validate", _cmd_validate, "check a config without running it")):
        sp = sub.add_parser(verb, help=help_)
        sp.add_argument("config", help="config path or bundled config name")
        sp.set_defaults(func=fn)
        if verb != "validate":
            sp.add_argument("--out", help=f"output directory (default ${ENV_OUT}/<name>)")
            sp.add_argument("--check", action="store_true",
                            help="exit 1 if any configured check fails")
        if verb in ("run", "compare"):
            sp.add_argument("--seed", type=int, help="override the config seed")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
