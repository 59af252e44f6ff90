"""Command line: ``blindbeam {train,eval,compare}``."""

from __future__ import annotations

import argparse
import logging
import sys

from . import harness
from .config import ConfigError, RunConfig, load_config

VARIANT_CHOICES = ("proposed", "vanilla", "bs-oracle", "angle-oracle")


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="blindbeam", description="Blind BS selection and beam alignment with DDPG.")
    p.add_argument("-v", "--verbose", action="store_true", help="log training progress")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--config", help="TOML run configuration (defaults apply when omitted)")
        sp.add_argument("--out", help="output directory (overrides out_dir)")

    t = sub.add_parser("train", help="train one variant; writes rate-evolution CSVs and checkpoints")
    common(t)
    t.add_argument("--variant", required=True, choices=VARIANT_CHOICES)
    t.add_argument("--seed", type=int, action="append",
                   help="seed to train (repeatable; default: the config's seeds)")

    e = sub.add_parser("eval", help="evaluate a checkpoint or baseline; writes a rate CDF CSV")
    common(e)
    e.add_argument("--policy", required=True, help="checkpoint path or one of: random, oracle, los_oracle, sweep")
    e.add_argument("--seed", type=int, help="evaluation seed (default: first config seed)")
    e.add_argument("--n-observations", type=int, help="steps to evaluate (default: eval.n_observations)")

    c = sub.add_parser("compare", help="train all variants, evaluate them and the baselines")
    common(c)
    return p


def _config(path) -> RunConfig:
    return load_config(path) if path else RunConfig()


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(asctime)s %(levelname)s %(message)s")
    try:
        cfg = _config(args.config)
        out = args.out or cfg.out_dir
        if args.command == "train":
            res = harness.run_training(cfg, args.variant, args.seed, out)
            for seed, curve in res.curves.items():
                print(f"{res.variant} seed={seed} final_episode_rate={curve[-1]:.4f} checkpoint={res.checkpoints[seed]}")
            print(f"wrote {', '.join(str(p) for p in res.csv_paths)}")
        elif args.command == "eval":
            summary = harness.run_eval(args.policy, cfg, args.n_observations, out, args.seed)
            print(summary.line())
            print(f"wrote {summary.csv_path}")
        else:
            results = harness.compare(cfg, out)
            print(harness.summary_table(results))
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (FileNotFoundError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
