"""Catch: a 24x24 pixel game where a ball falls straight down and a 3-pixel
paddle on the bottom row has to be under it when it lands.

We look at one frame, then compare three ways of playing: uniformly random,
a hand-written tracker, and the exact numbers the enumeration oracles give.
"""
import numpy as np

from deepq.environments import Catch, optimal_catch_return, random_catch_return
from deepq.harness import make_phi, run_episodes
from deepq.preprocessing import PreprocConfig

env = Catch()
frame = env.reset(seed=7)
print("frame", frame.pixels.shape, "ball column", env.ball_col, "paddle left", env.paddle_left)
for row in frame.pixels[:, :, 0]:
    print("".join("#" if v else "." for v in row))

# Network inputs are stacks of the last 4 frames scaled to [0, 1].
phi = make_phi(PreprocConfig.identity(24, 24))


def random_policy(state, rng):
    return int(rng.integers(3))


def tracker(state, rng):
    # newest plane, ball is the only lit pixel above the bottom row
    plane = np.asarray(state)[-1]
    ball = np.flatnonzero(plane[:-1].max(axis=0))
    paddle = np.flatnonzero(plane[-1]).mean()
    return 1 if len(ball) == 0 else 1 + int(np.sign(ball[0] - paddle))


for k in (1, 4):
    rnd = np.mean(run_episodes(random_policy, Catch(), phi, 2000, seed=0, frame_skip=k))
    print(f"frame skip {k}: random policy {rnd:+.3f} (exact {random_catch_return(env, k):+.3f}), "
          f"best achievable {optimal_catch_return(env, k):+.3f}")

print("tracker, 500 episodes:", np.mean(run_episodes(tracker, Catch(), phi, 500, seed=1)))
