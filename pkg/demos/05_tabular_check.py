"""Run the full learning loop (replay, minibatches, RMSProp, semi-gradient
targets) with a lookup table in place of the network, on an MDP small enough
to solve exactly. With a purely random behaviour policy the table should
converge to the value-iteration answer."""
from pathlib import Path

import numpy as np

from deepq.config import load_config
from deepq.harness import run_tabular_oracle

cfg = load_config(Path(__file__).parent.parent / "configs" / "tiny_mdp.cfg")
for steps in (20_000, 60_000, 200_000):
    learned, optimal = run_tabular_oracle(cfg, steps)
    print(f"{steps:7d} steps: max |Q - Q*| = {np.max(np.abs(learned - optimal)):.2e}")

np.set_printoptions(precision=3, suppress=True)
print("Q* (rows are states, columns actions):")
print(optimal)
