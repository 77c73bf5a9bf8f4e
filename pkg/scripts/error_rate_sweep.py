"""Observation-error sweep: DQN over each filter at 10, 15, 25 and 35% flips.

    python scripts/error_rate_sweep.py [--seeds 20] [--out runs/error_rate_sweep]

Prints, per filter, how much the fire-cells-observed metric drops relative to
the 10% condition.
"""
import argparse
import json
from dataclasses import replace
from pathlib import Path

from firewatch.config import load_config
from firewatch.harness import sweep, variants

ROOT = Path(__file__).resolve().parents[1]
EKF_WEIGHTS = ROOT / "runs" / "dqn_ekf" / "train" / "qnet.fwq"
ERROR_RATES = (0.10, 0.15, 0.25, 0.35)

if __name__ == "__main__":
    p = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    p.add_argument("--seeds", type=int, default=20)
    p.add_argument("--out", default=str(ROOT / "runs" / "error_rate_sweep"))
    p.add_argument("--workers", type=int, default=1)
    args = p.parse_args()
    base = load_config(ROOT / "configs" / "evaluate.yaml")
    base = replace(base, seeds=base.seeds[: args.seeds])
    configs = []
    ekf_policy = replace(base.policy, weights=str(EKF_WEIGHTS))
    for name, filt, policy in (("dqn_pf", "pf", base.policy), ("dqn_ekf", "ekf+pf-eval", ekf_policy)):
        configs += variants(replace(base, name=name, filter=filt, policy=policy), error_rates=ERROR_RATES)
    rows = sweep(configs, args.out, workers=args.workers)
    for row in rows:
        print(json.dumps(row))
    for name in ("dqn_pf", "dqn_ekf"):
        mine = [r for r in rows if r["config"].startswith(name + "_")]
        ref = mine[0]["cells_observed"]
        drops = ", ".join(f"{r['error_rate']:.0%}: {1 - r['cells_observed'] / ref:+.1%}" for r in mine)
        print(f"{name} observed-cell drop vs 10%: {drops}")
