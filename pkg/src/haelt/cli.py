"""Command-line entry point: ``haelt <command> [--config PATH] [--seed N] [--out DIR]``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .config import RunConfig
from .exceptions import ConfigError, HaeltError
from .model.network import VARIANTS

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERICAL = 0, 1, 2, 3


class _Parser(argparse.ArgumentParser):
    """argparse exits with 2 on usage errors; this CLI reserves 2 for data errors."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="YAML run configuration")
    common.add_argument("--seed", type=int, help="master seed (overrides the config)")
    common.add_argument("--out", type=Path, help="output file or run directory")
    common.add_argument("--variant", choices=VARIANTS, help="model variant")
    common.add_argument("-v", "--verbose", action="store_true", help="log progress")

    parser = _Parser(prog="haelt", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    sub.add_parser("synth", parents=[common], help="write a synthetic OHLCV CSV")
    sub.add_parser("prepare", parents=[common],
                   help="run preprocessing and write the dataset manifest and features")
    sub.add_parser("train", parents=[common], help="train one variant into a run directory")
    sub.add_parser("ablate", parents=[common], help="train all variants and compare")
    sub.add_parser("baselines", parents=[common], help="fit logistic, ARIMA and GARCH baselines")
    p = sub.add_parser("importance", parents=[common], help="permutation importance for a run")
    p.add_argument("run_dir", type=Path, nargs="?", help="trained run directory")
    p.add_argument("--repeats", type=int, help="permutations per feature")
    p = sub.add_parser("report", parents=[common], help="emit plot-ready data for a run")
    p.add_argument("run_dir", type=Path, nargs="?", help="trained run directory")
    return parser


def _config(args) -> RunConfig:
    cfg = RunConfig.load(args.config) if args.config else RunConfig()
    if args.seed is not None:
        cfg.seed = args.seed
        cfg.train.seed = args.seed
    else:
        cfg.train.seed = cfg.seed
    if args.out is not None:
        cfg.out = str(args.out)
    if args.variant is not None:
        cfg.model.variant = args.variant
    return cfg


def _cmd_synth(args, cfg: RunConfig) -> int:
    from .synthetic import generate
    from .seeding import derive_seed
    seed = args.seed if args.seed is not None else derive_seed(cfg.seed, "data")
    spec = cfg.data.synthetic_spec(seed)
    if args.seed is not None:
        spec.seed = args.seed
    out = Path(args.out) if args.out else Path(cfg.out) / "synthetic.csv"
    if out.suffix.lower() != ".csv":
        out = out / "synthetic.csv"
    out.parent.mkdir(parents=True, exist_ok=True)
    generate(spec).to_csv(out)
    print(out)
    return EXIT_OK


def _cmd_prepare(args, cfg: RunConfig) -> int:
    from .evaluation import write_json
    from .pipeline import load_and_prepare
    data = load_and_prepare(cfg)
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    write_json(out / "dataset_manifest.json", data.manifest())
    print(json.dumps({"windows": len(data.dataset), "split_sizes": list(data.split.sizes)}))
    return EXIT_OK


def _cmd_train(args, cfg: RunConfig) -> int:
    from .pipeline import run_train
    res = run_train(cfg)
    print(res["test"].to_json(), end="")
    return EXIT_OK


def _cmd_ablate(args, cfg: RunConfig) -> int:
    from .pipeline import run_ablation
    rows = run_ablation(cfg)
    print((Path(cfg.out) / "ablation.csv").read_text(), end="")
    return EXIT_OK if all(r["status"] == "ok" for r in rows) else EXIT_NUMERICAL


def _cmd_baselines(args, cfg: RunConfig) -> int:
    from .pipeline import run_baselines
    print(json.dumps(run_baselines(cfg), sort_keys=True, indent=2))
    return EXIT_OK


def _run_dir(args, cfg: RunConfig) -> Path:
    if getattr(args, "run_dir", None) is not None:
        return args.run_dir
    return Path(cfg.out)


def _cmd_importance(args, cfg: RunConfig) -> int:
    from .pipeline import run_importance
    if args.repeats is not None and args.repeats < 1:
        raise ConfigError("--repeats must be >= 1")
    result = run_importance(_run_dir(args, cfg), args.repeats, args.seed)
    top = sorted(result.items(), key=lambda kv: -kv[1]["importance"])[:5]
    for name, d in top:
        print(f"{name}\t{d['importance']:.4f}")
    return EXIT_OK


def _cmd_report(args, cfg: RunConfig) -> int:
    from .pipeline import run_report
    print(run_report(_run_dir(args, cfg), cfg.importance.top))
    return EXIT_OK


COMMANDS = {"synth": _cmd_synth, "prepare": _cmd_prepare, "train": _cmd_train,
            "ablate": _cmd_ablate, "baselines": _cmd_baselines,
            "importance": _cmd_importance, "report": _cmd_report}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = _config(args)
        return COMMANDS[args.command](args, cfg)
    except HaeltError as exc:
        print(f"haelt {args.command}: {exc}", file=sys.stderr)
        return exc.exit_code
    except OSError as exc:
        print(f"haelt {args.command}: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
