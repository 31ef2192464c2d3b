"""Command line: ``pairfuzz {fuzz,collect,experiment,analyze,ablate}``.

Every campaign flag mirrors a key of the flat ``key = value`` config file
given with ``--config``; values resolve CLI > file > built-in default.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from . import campaign as C
from .stats import report
from .strategy import FIRST_MUTATOR_MODES, LENGTH_MODES, MODES
from .targets import builtin_targets

log = logging.getLogger("pairfuzz")


def _fraction(text: str) -> float:
    try:
        if "/" in text:
            num, den = text.split("/", 1)
            return float(num) / float(den)
        return float(text)
    except (ValueError, ZeroDivisionError):
        raise argparse.ArgumentTypeError(f"not a number or fraction: {text!r}") from None


def _int(text: str) -> int:
    try:
        return int(text.replace("_", ""))
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None


def _add_config_flags(p: argparse.ArgumentParser) -> None:
    """One flag per CampaignConfig key; all default to None (= not given)."""
    g = p.add_argument_group("campaign configuration")
    g.add_argument("--config", help="flat key = value config file")
    g.add_argument("--target", choices=[t.name for t in builtin_targets()])
    g.add_argument("--mode", choices=MODES, help="mutation strategy")
    g.add_argument("--first-mutator-mode", choices=FIRST_MUTATOR_MODES)
    g.add_argument("--length-mode", choices=LENGTH_MODES)
    g.add_argument("--t-train-fraction", type=_fraction, help="training share of the budget, e.g. 1/24")
    g.add_argument("--cross-matrix", help="pair-count CSV learned on another target")
    g.add_argument("--seed", type=_int, help="rng seed (master seed for multi-trial commands)")
    g.add_argument("--budget", type=_int, help="target executions per trial")
    g.add_argument("--trials", type=_int, help="trials per strategy")
    g.add_argument("--output-dir", help="where records, CSVs and reports go")
    g.add_argument("--max-input-size", type=_int)
    g.add_argument("--bucketing", action=argparse.BooleanOptionalAction, default=None,
                   help="count hit-count buckets as distinct coverage")
    g.add_argument("--energy-base", type=_int)
    g.add_argument("--energy-unproductive-factor", type=float)
    g.add_argument("--energy-min", type=_int)
    g.add_argument("--energy-max", type=_int)
    g.add_argument("--explore-fraction", type=_fraction)
    g.add_argument("--epsilon", type=float)
    g.add_argument("--seeds-dir", help="directory of seed files (default: the target's seeds)")
    g.add_argument("--dictionary", help="token dictionary file")
    g.add_argument("--weights", help="32 comma-separated mutator weights")
    g.add_argument("--time-budget", type=float, help="wall-clock seconds instead of an execution budget")
    g.add_argument("--engine", choices=("kernel", "reference"))
    g.add_argument("--label", help="strategy name in summaries")


_CONFIG_KEYS = [f for f in C.CampaignConfig.__dataclass_fields__]


def config_from_args(args: argparse.Namespace, **forced) -> C.CampaignConfig:
    overrides = {k: getattr(args, k, None) for k in _CONFIG_KEYS}
    overrides.update(forced)
    try:
        return C.load_config(args.config, **overrides).validate()
    except TypeError as exc:
        raise C.ConfigError(str(exc)) from None


def _need_output(cfg: C.CampaignConfig, command: str) -> Path:
    if not cfg.output_dir:
        raise C.ConfigError(f"{command} needs --output-dir (or output_dir in the config file)")
    return Path(cfg.output_dir)


def cmd_fuzz(args) -> int:
    cfg = config_from_args(args)
    record = C.run_trial(cfg)
    if cfg.output_dir:
        record.save(cfg.output_dir)
    bugs = ",".join(sorted({c.bug_id for c in record.crashes})) or "-"
    print(f"{cfg.target} {cfg.name} seed={record.seed} executions={record.executions} "
          f"coverage={record.final_coverage} interesting={len(record.interesting)} bugs={bugs}")
    return 0


def cmd_collect(args) -> int:
    cfg = config_from_args(args)
    out = _need_output(cfg, "collect")
    results = C.collect_dataset(cfg, cfg.trials, cfg.seed, out, args.workers)
    for k, (matrix, interesting) in enumerate(results, 1):
        print(f"trial {k}: {matrix.total} credited pairs, {interesting} interesting inputs")
    print(f"wrote {len(results)} matrices to {out / 'matrices'}")
    return 0


def cmd_experiment(args) -> int:
    cfg = config_from_args(args)
    out = _need_output(cfg, "experiment")
    strategies = [s.strip() for s in args.strategies.split(",") if s.strip()]
    targets = [t.strip() for t in args.targets.split(",")] if args.targets else [cfg.target]
    configs = [cfg.replace(target=t, mode=s, label=None) for t in targets for s in strategies]
    for c in configs:
        c.validate()
    rows = C.run_experiment(configs, cfg.trials, cfg.seed, out, args.workers)
    print(f"{len(rows)} trials -> {out / 'summary.csv'}")
    written = report.analyze_directory([out], out / "report")
    print((written["comparison"].with_suffix(".txt")).read_text(encoding="utf-8"), end="")
    return 0


def cmd_analyze(args) -> int:
    written = report.analyze_directory(args.directories, args.out, args.baseline)
    for name, path in written.items():
        print(f"== {name} ({path})")
        print(path.with_suffix(".txt").read_text(encoding="utf-8"))
    return 0


def cmd_ablate(args) -> int:
    cfg = config_from_args(args)
    out = _need_output(cfg, "ablate")
    C.run_ablation(cfg, cfg.trials, cfg.seed, out, args.workers, cfg.cross_matrix, args.donor)
    written = report.analyze_directory([out], out / "report")
    print(written["ablation"].with_suffix(".txt").read_text(encoding="utf-8"), end="")
    print(f"table: {written['ablation_table']}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="pairfuzz", description="Greybox fuzzing with pairwise mutator scheduling.")
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("fuzz", help="run a single trial")
    _add_config_flags(p)
    p.set_defaults(func=cmd_fuzz)

    p = sub.add_parser("collect", help="training-only trials; one pair-count matrix per trial")
    _add_config_flags(p)
    p.add_argument("--workers", type=_int, default=1, help="parallel trial processes")
    p.set_defaults(func=cmd_collect)

    p = sub.add_parser("experiment", help="compare strategies over repeated trials")
    _add_config_flags(p)
    p.add_argument("--strategies", default="pairwise,random_matrix,fixed",
                   help="comma-separated strategy modes")
    p.add_argument("--targets", help="comma-separated targets (default: --target)")
    p.add_argument("--workers", type=_int, default=1, help="parallel trial processes")
    p.set_defaults(func=cmd_experiment)

    p = sub.add_parser("analyze", help="report tables for experiment or collect directories")
    p.add_argument("directories", nargs="+")
    p.add_argument("--out", help="report directory (default: <first directory>/report)")
    p.add_argument("--baseline", help="compare every strategy against this one only")
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("ablate", help="run the variant grid on one target")
    _add_config_flags(p)
    p.add_argument("--donor", help="target whose pair counts feed the cross-program variant")
    p.add_argument("--workers", type=_int, default=1, help="parallel trial processes")
    p.set_defaults(func=cmd_ablate)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except C.ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    except (FileNotFoundError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
