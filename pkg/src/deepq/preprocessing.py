"""Frame preprocessing: grayscale, area downsampling, crop, and a fixed-depth
stack of the most recent processed planes."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .environments import Frame
from .errors import ConfigError, InputError

LUMA_WEIGHTS = (0.299, 0.587, 0.114)


def _round_half_up(x):
    # small guard so exact .5 values that picked up float noise still round up
    return np.floor(x + 0.5 + 1e-9)


def to_grayscale(frame: Frame, weights=LUMA_WEIGHTS) -> np.ndarray:
    """uint8 [H, W] luminance plane; single-channel frames pass through."""
    px = frame.pixels
    if px.shape[2] == 1:
        return px[:, :, 0].copy()
    gray = px.astype(np.float64) @ np.asarray(weights, dtype=np.float64)
    return np.clip(_round_half_up(gray), 0, 255).astype(np.uint8)


def _area_matrix(src: int, dst: int) -> np.ndarray:
    # dst x src matrix of fractional overlaps between target boxes and source pixels
    scale = src / dst
    edges = np.arange(dst + 1) * scale
    lo, hi = edges[:-1, None], edges[1:, None]
    pix = np.arange(src)[None, :]
    overlap = np.clip(np.minimum(hi, pix + 1) - np.maximum(lo, pix), 0, None)
    return overlap / scale


def downsample(plane: np.ndarray, target_width: int, target_height: int) -> np.ndarray:
    """Area-average a uint8 plane down to ``target_height`` x ``target_width``."""
    h, w = plane.shape
    if target_width > w or target_height > h or min(target_width, target_height) < 1:
        raise InputError(f"cannot resample {h}x{w} to {target_height}x{target_width}")
    if (target_height, target_width) == (h, w):
        return plane.copy()
    out = _area_matrix(h, target_height) @ plane.astype(np.float64) @ _area_matrix(w, target_width).T
    return np.clip(_round_half_up(out), 0, 255).astype(np.uint8)


def crop(plane: np.ndarray, rect) -> np.ndarray:
    """Copy of the sub-rectangle ``rect = (x, y, width, height)``."""
    x, y, w, h = rect
    ph, pw = plane.shape
    if x < 0 or y < 0 or w < 1 or h < 1 or x + w > pw or y + h > ph:
        raise InputError(f"crop {rect} outside a {ph}x{pw} plane")
    return plane[y:y + h, x:x + w].copy()


@dataclass(frozen=True)
class PreprocConfig:
    target_size: tuple[int, int]          # (width, height) after downsampling
    crop_rect: tuple[int, int, int, int]  # (x, y, width, height) within the downsampled plane
    stack_depth: int = 4
    grayscale_weights: tuple[float, float, float] = LUMA_WEIGHTS
    source_size: tuple[int, int] | None = None  # (width, height) of raw frames, if pinned

    def __post_init__(self):
        problems = []
        tw, th = self.target_size
        x, y, w, h = self.crop_rect
        if min(tw, th) < 1:
            problems.append("downsample target must be positive")
        if x < 0 or y < 0 or w < 1 or h < 1 or x + w > tw or y + h > th:
            problems.append(f"crop rect {self.crop_rect} outside the {tw}x{th} downsampled image")
        if self.stack_depth < 1:
            problems.append("stack_depth must be at least 1")
        if len(self.grayscale_weights) != 3 or abs(sum(self.grayscale_weights) - 1) > 1e-6:
            problems.append("grayscale weights must be 3 reals summing to 1")
        if self.source_size is not None and (self.source_size[0] < tw or self.source_size[1] < th):
            problems.append("downsample target larger than the source frame")
        if problems:
            raise ConfigError(problems)

    @property
    def output_shape(self) -> tuple[int, int, int]:
        return (self.stack_depth, self.crop_rect[3], self.crop_rect[2])

    @classmethod
    def identity(cls, width: int, height: int, stack_depth: int = 4) -> "PreprocConfig":
        """Profile for small frames: no resampling, full-frame crop, scale and stack only."""
        return cls((width, height), (0, 0, width, height), stack_depth, source_size=(width, height))

    @classmethod
    def atari(cls) -> "PreprocConfig":
        # 210x160 RGB -> 110x84 -> 84x84 rows 18..101 (drops the score band, keeps the floor)
        return cls((84, 110), (0, 18, 84, 84), 4, source_size=(160, 210))


def preprocess(frame: Frame, config: PreprocConfig) -> np.ndarray:
    """Single processed plane, float32 in [0, 1]."""
    if config.source_size is not None and (frame.width, frame.height) != tuple(config.source_size):
        raise InputError(f"frame is {frame.width}x{frame.height}, config expects "
                         f"{config.source_size[0]}x{config.source_size[1]}")
    plane = to_grayscale(frame, config.grayscale_weights)
    plane = downsample(plane, *config.target_size)
    plane = crop(plane, config.crop_rect)
    out = plane.astype(np.float32) / np.float32(255.0)
    out.flags.writeable = False
    return out


@dataclass(frozen=True, eq=False)
class PhiState:
    """The last ``stack_depth`` processed planes, oldest first.

    Planes are shared read-only arrays, so consecutive states cost one plane each.
    """

    planes: tuple

    def __array__(self, dtype=None, copy=None):
        arr = np.stack(self.planes)
        return arr if dtype is None else arr.astype(dtype)

    @property
    def shape(self) -> tuple[int, ...]:
        return (len(self.planes), *self.planes[0].shape)


def phi_append(state: PhiState | None, frame: Frame, config: PreprocConfig) -> PhiState:
    """Push a new frame into the history; ``None`` starts a new episode by
    filling the stack with copies of the first processed frame."""
    plane = preprocess(frame, config)
    if state is None:
        return PhiState((plane,) * config.stack_depth)
    if state.planes[0].shape != plane.shape or len(state.planes) != config.stack_depth:
        raise InputError("frame does not match the geometry of the existing stack")
    return PhiState(state.planes[1:] + (plane,))


def stack_states(states) -> np.ndarray:
    """Batch [B, ...] from a sequence of PhiStates or plain arrays."""
    first = states[0]
    if isinstance(first, PhiState):
        depth = len(first.planes)
        return np.array([p for s in states for p in s.planes]).reshape(len(states), depth, *first.planes[0].shape)
    return np.stack([np.asarray(s) for s in states])
