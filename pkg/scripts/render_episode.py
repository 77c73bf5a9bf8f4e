"""Simulate one evaluation episode and write its rasters.

    python scripts/render_episode.py [--policy heuristic] [--seed 1000] [--out runs/example]
"""
import argparse
import sys
from pathlib import Path

from firewatch.cli import main

ROOT = Path(__file__).resolve().parents[1]

if __name__ == "__main__":
    p = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    p.add_argument("--policy", default="dqn")
    p.add_argument("--filter", default="pf")
    p.add_argument("--seed", type=int, default=1000)
    p.add_argument("--out", default=str(ROOT / "runs" / "example"))
    args = p.parse_args()
    sys.exit(main([
        "simulate", "--config", str(ROOT / "configs" / "evaluate.yaml"),
        "--policy", args.policy, "--filter", args.filter, "--seed", str(args.seed),
        "--out", args.out, "--set", "output.snapshot_every=5",
    ]))
