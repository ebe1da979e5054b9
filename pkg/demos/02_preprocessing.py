"""From a raw 210x160 RGB screen to the 4x84x84 network input.

Each step is shown separately: luma grayscale, area-average downsample to
84x110, an 84x84 crop of the playing area, and stacking of the last four
processed frames (the first frame is repeated at the start of an episode).
"""
import numpy as np

from deepq.environments import Frame
from deepq.nn import ATARI_GEOMETRY, init_params
from deepq.preprocessing import PreprocConfig, crop, downsample, phi_append, stack_states, to_grayscale

rng = np.random.default_rng(0)
cfg = PreprocConfig.atari()
print("atari profile:", cfg)

screens = [Frame(rng.integers(0, 256, (210, 160, 3)).astype(np.uint8)) for _ in range(6)]
gray = to_grayscale(screens[0])
small = downsample(gray, 84, 110)
cropped = crop(small, cfg.crop_rect)
print("rgb", screens[0].pixels.shape, "-> gray", gray.shape, "-> downsampled", small.shape,
      "-> cropped", cropped.shape)

state = None
for i, screen in enumerate(screens):
    state = phi_append(state, screen, cfg)
    # the top-left pixel of each plane tells us which screen it came from
    print(f"after screen {i}: plane corners", np.round(np.asarray(state)[:, 0, 0], 3))

q = init_params(ATARI_GEOMETRY, 0).forward(stack_states([state]))
print("untrained Q values for the last state:", np.round(q[0], 4))
