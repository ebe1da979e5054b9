"""Replay memory: a fixed-capacity ring that forgets the oldest transition and
hands back uniform random minibatches (with replacement)."""
import numpy as np

from deepq.replay import ReplayMemory, Transition

mem = ReplayMemory(capacity=5)
for i in range(8):
    mem.push(Transition(phi_before=i, action=0, reward=0.0, phi_after=i + 1, terminal=False))
print("stored, oldest first:", [t.phi_before for t in mem.contents()])

rng = np.random.default_rng(0)
draws = [t.phi_before for t in mem.sample(50_000, rng)]
values, counts = np.unique(draws, return_counts=True)
for v, c in zip(values, counts):
    print(f"  transition {v}: drawn {c / len(draws):.3f} of the time")
