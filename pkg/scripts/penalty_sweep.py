"""Overfire-penalty sweep: each controller at penalties 0, -0.5 and -2.

    python scripts/penalty_sweep.py [--seeds 20] [--out runs/penalty_sweep]

Controllers: DQN over the particle filter, DQN over the Kalman bank (wind
scored by a passive particle filter), the heuristic orbit and the random
baseline.  Results land in <out>/aggregate.csv, one row per
(controller, penalty), ready to plot each metric against cells flown over.
"""
import argparse
import json
from dataclasses import replace
from pathlib import Path

from firewatch.config import load_config
from firewatch.harness import sweep, variants

ROOT = Path(__file__).resolve().parents[1]
EKF_WEIGHTS = ROOT / "runs" / "dqn_ekf" / "train" / "qnet.fwq"
PENALTIES = (0.0, -0.5, -2.0)
CONTROLLERS = (("dqn_pf", "dqn", "pf"), ("dqn_ekf", "dqn", "ekf+pf-eval"), ("heuristic_pf", "heuristic", "pf"), ("random_pf", "random", "pf"))

if __name__ == "__main__":
    p = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    p.add_argument("--seeds", type=int, default=20)
    p.add_argument("--out", default=str(ROOT / "runs" / "penalty_sweep"))
    p.add_argument("--workers", type=int, default=1)
    args = p.parse_args()
    base = load_config(ROOT / "configs" / "evaluate.yaml")
    base = replace(base, seeds=base.seeds[: args.seeds])
    configs = []
    for name, kind, filt in CONTROLLERS:
        policy = replace(base.policy, kind=kind)
        if filt.startswith("ekf"):
            policy = replace(policy, weights=str(EKF_WEIGHTS))
        cfg = replace(base, name=name, filter=filt, policy=policy)
        configs += variants(cfg, overfire=PENALTIES)
    for row in sweep(configs, args.out, workers=args.workers):
        print(json.dumps(row))
