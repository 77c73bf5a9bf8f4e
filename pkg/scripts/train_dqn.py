"""Train a Q-network with the shipped recipe for one filter.

    python scripts/train_dqn.py [--filter pf|ekf] [--episodes N] [--out DIR]

Writes qnet.fwq, training_log.csv and config.yaml under runs/dqn_<filter>/train by default.
"""
import argparse
import sys
from pathlib import Path

from firewatch.cli import main

ROOT = Path(__file__).resolve().parents[1]
RECIPES = {"pf": "train_dqn.yaml", "ekf": "train_dqn_ekf.yaml"}

if __name__ == "__main__":
    p = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    p.add_argument("--episodes", type=int)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--filter", choices=sorted(RECIPES), default="pf")
    p.add_argument("--out")
    args = p.parse_args()
    out = args.out or str(ROOT / "runs" / f"dqn_{args.filter}" / "train")
    argv = ["train", "--config", str(ROOT / "configs" / RECIPES[args.filter]), "--out", out, "--seed", str(args.seed)]
    if args.episodes is not None:
        argv += ["--episodes", str(args.episodes)]
    sys.exit(main(argv))
