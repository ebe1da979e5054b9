"""Train the Catch agent and watch the per-epoch metrics.

The full desk profile (configs/catch_desk.cfg) takes tens of minutes; pass a
frame budget to try something shorter:

    python demos/06_train_catch.py 60000
"""
import logging
import sys
from pathlib import Path

from deepq.config import load_config
from deepq.harness import read_metrics, train

logging.basicConfig(level=logging.INFO, format="%(message)s")

cfg = load_config(Path(__file__).parent.parent / "configs" / "catch_desk.cfg")
if len(sys.argv) > 1:
    cfg = cfg.replace(train__total_frames=int(sys.argv[1]))
out = Path(sys.argv[2] if len(sys.argv) > 2 else "runs/demo_catch")

result = train(cfg, out)
print()
print(f"{'epoch':>5} {'frames':>8} {'reward':>7} {'avg max Q':>9}")
for row in read_metrics(out / "metrics.csv"):
    print(f"{row['epoch']:5d} {row['frames_seen']:8d} {row['avg_episode_reward']:7.3f} {row['avg_max_q']:9.4f}")
print()
print("final evaluation:", result.summary["final_eval_avg_reward"],
      "random policy:", result.summary["random_policy_return"])
