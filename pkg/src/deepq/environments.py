"""Small pixel environments (Catch, GridWorld) and an explicit tabular MDP with
a value-iteration solver used as a ground-truth oracle.

All randomness is confined to ``reset``; ``step`` is deterministic.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, InputError, ProtocolError


@dataclass(frozen=True, eq=False)
class Frame:
    """Raw screen image, ``pixels`` is uint8 [height, width, channels]."""

    pixels: np.ndarray

    def __post_init__(self):
        p = self.pixels
        if p.dtype != np.uint8 or p.ndim != 3 or p.shape[2] not in (1, 3):
            raise InputError(f"frame pixels must be uint8 [H, W, 1|3], got {p.dtype} {p.shape}")
        p.flags.writeable = False

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def channels(self) -> int:
        return self.pixels.shape[2]


@dataclass(frozen=True)
class StepResult:
    frame: object
    reward: float
    terminal: bool
    ticks: int = 1


@dataclass(frozen=True)
class EnvSpec:
    name: str
    num_actions: int
    height: int
    width: int
    channels: int
    max_episode_steps: int
    palette: tuple = ()


class Environment:
    """Shared reset/step bookkeeping: step counting, truncation, protocol checks."""

    spec: EnvSpec

    def __init__(self):
        self._steps = 0
        self._done = True
        self._started = False

    @property
    def num_actions(self) -> int:
        return self.spec.num_actions

    def reset(self, seed: int = 0):
        self._steps = 0
        self._done = False
        self._started = True
        self._reset(np.random.default_rng(seed))
        return self._observe()

    def step(self, action: int) -> StepResult:
        if not self._started or self._done:
            raise ProtocolError("step called on a terminated environment; reset first")
        if not 0 <= int(action) < self.spec.num_actions:
            raise InputError(f"action {action} outside [0, {self.spec.num_actions})")
        reward, terminal = self._advance(int(action))
        self._steps += 1
        if self._steps >= self.spec.max_episode_steps:
            terminal = True
        self._done = terminal
        return StepResult(self._observe(), float(reward), bool(terminal))

    def _reset(self, rng):
        raise NotImplementedError

    def _advance(self, action):
        raise NotImplementedError

    def _observe(self):
        raise NotImplementedError


class Catch(Environment):
    """Ball falls one row per tick from a random top-row column; a 3-wide paddle
    on the bottom row moves left/stay/right. +1 for a catch, -1 for a miss."""

    def __init__(self, width: int = 24, height: int = 24, paddle_width: int = 3,
                 max_episode_steps: int | None = None):
        super().__init__()
        if width < paddle_width or paddle_width < 1 or height < 2:
            raise ConfigError("catch needs height >= 2 and 1 <= paddle_width <= width")
        self.paddle_width = paddle_width
        self.spec = EnvSpec("catch", 3, height, width, 1,
                            max_episode_steps or height, (0, 255))
        self.ball_row = self.ball_col = 0
        self.paddle_left = (width - paddle_width) // 2

    def _reset(self, rng):
        self.ball_row = 0
        self.ball_col = int(rng.integers(self.spec.width))
        self.paddle_left = (self.spec.width - self.paddle_width) // 2

    def _advance(self, action):
        limit = self.spec.width - self.paddle_width
        self.paddle_left = min(max(self.paddle_left + action - 1, 0), limit)
        self.ball_row += 1
        if self.ball_row < self.spec.height - 1:
            return 0.0, False
        caught = self.paddle_left <= self.ball_col < self.paddle_left + self.paddle_width
        return (1.0 if caught else -1.0), True

    def _observe(self):
        pixels = np.zeros((self.spec.height, self.spec.width, 1), dtype=np.uint8)
        pixels[-1, self.paddle_left:self.paddle_left + self.paddle_width] = 255
        pixels[self.ball_row, self.ball_col] = 255
        return Frame(pixels)


class GridWorld(Environment):
    """12x12 grid drawn as 2x2-pixel cells. Start (1,1), goal (10,10) +1,
    pit (5,5) -1; actions up/down/left/right clamp at the walls."""

    EMPTY, PIT, GOAL, AGENT = 0, 85, 170, 255
    MOVES = ((-1, 0), (1, 0), (0, -1), (0, 1))

    def __init__(self, size: int = 12, cell: int = 2, start=(1, 1), goal=(10, 10),
                 pit=(5, 5), max_episode_steps: int = 200):
        super().__init__()
        self.size, self.cell = size, cell
        self.start, self.goal, self.pit = tuple(start), tuple(goal), tuple(pit)
        self.spec = EnvSpec("gridworld", 4, size * cell, size * cell, 1, max_episode_steps,
                            (self.EMPTY, self.PIT, self.GOAL, self.AGENT))
        self.position = self.start

    def _reset(self, rng):
        self.position = self.start

    def _advance(self, action):
        dr, dc = self.MOVES[action]
        r, c = self.position
        self.position = (min(max(r + dr, 0), self.size - 1), min(max(c + dc, 0), self.size - 1))
        if self.position == self.goal:
            return 1.0, True
        if self.position == self.pit:
            return -1.0, True
        return 0.0, False

    def _paint(self, grid, cell, value):
        r, c = cell
        k = self.cell
        grid[r * k:(r + 1) * k, c * k:(c + 1) * k] = value

    def _observe(self):
        pixels = np.zeros((self.spec.height, self.spec.width, 1), dtype=np.uint8)
        self._paint(pixels, self.pit, self.PIT)
        self._paint(pixels, self.goal, self.GOAL)
        self._paint(pixels, self.position, self.AGENT)
        return Frame(pixels)


@dataclass(frozen=True, eq=False)
class TinyMdp:
    """Deterministic finite MDP given as explicit [S, A] tables."""

    transitions: np.ndarray
    rewards: np.ndarray
    terminal_states: frozenset = field(default_factory=frozenset)
    gamma: float = 0.9
    start_state: int | None = None

    def __post_init__(self):
        t = np.asarray(self.transitions, dtype=np.int64)
        r = np.asarray(self.rewards, dtype=np.float64)
        object.__setattr__(self, "transitions", t)
        object.__setattr__(self, "rewards", r)
        object.__setattr__(self, "terminal_states", frozenset(int(s) for s in self.terminal_states))
        problems = []
        if t.ndim != 2 or t.shape != r.shape:
            problems.append("transition and reward tables must both be [S, A]")
        elif t.size and (t.min() < 0 or t.max() >= t.shape[0]):
            problems.append("transitions must land in [0, S)")
        if any(not 0 <= s < len(t) for s in self.terminal_states):
            problems.append("terminal state out of range")
        if not 0 < self.gamma <= 1:
            problems.append("gamma must lie in (0, 1]")
        if self.start_state is not None and not 0 <= self.start_state < len(t):
            problems.append("start_state out of range")
        if problems:
            raise ConfigError(problems)

    @property
    def num_states(self) -> int:
        return self.transitions.shape[0]

    @property
    def num_actions(self) -> int:
        return self.transitions.shape[1]

    @property
    def terminal_mask(self) -> np.ndarray:
        mask = np.zeros(self.num_states, dtype=bool)
        mask[list(self.terminal_states)] = True
        return mask


def bellman_backup(mdp: TinyMdp, q: np.ndarray) -> np.ndarray:
    """One application of the optimality operator; terminal rows stay zero."""
    future = np.where(mdp.terminal_mask, 0.0, q.max(axis=1))
    new_q = mdp.rewards + mdp.gamma * future[mdp.transitions]
    new_q[mdp.terminal_mask] = 0.0
    return new_q


def value_iteration(mdp: TinyMdp, tolerance: float = 1e-10, max_sweeps: int = 1_000_000) -> np.ndarray:
    """Optimal action values Q*[S, A] by repeated Bellman backups."""
    q = np.zeros(mdp.transitions.shape)
    for _ in range(max_sweeps):
        new_q = bellman_backup(mdp, q)
        change = np.max(np.abs(new_q - q)) if q.size else 0.0
        q = new_q
        if change < tolerance:
            return q
    raise RuntimeError("value iteration did not converge; does every episode terminate?")


class TinyMdpEnv(Environment):
    """Runs a TinyMdp; observations are one-hot state vectors, not frames."""

    def __init__(self, mdp: TinyMdp, max_episode_steps: int = 10_000):
        super().__init__()
        self.mdp = mdp
        self.spec = EnvSpec("tinymdp", mdp.num_actions, 1, mdp.num_states, 1, max_episode_steps)
        self.state = 0

    def _reset(self, rng):
        if self.mdp.start_state is not None:
            self.state = self.mdp.start_state
        else:
            starts = np.flatnonzero(~self.mdp.terminal_mask)
            self.state = int(starts[rng.integers(len(starts))])

    def _advance(self, action):
        reward = self.mdp.rewards[self.state, action]
        self.state = int(self.mdp.transitions[self.state, action])
        return reward, self.state in self.mdp.terminal_states

    def _observe(self):
        obs = np.zeros(self.mdp.num_states)
        obs[self.state] = 1.0
        return obs


def make_env(name: str, **params) -> Environment:
    name = name.lower()
    if name == "catch":
        return Catch(**params)
    if name == "gridworld":
        return GridWorld(**params)
    if name == "tinymdp":
        mdp = params.pop("mdp")
        return TinyMdpEnv(mdp, **params)
    raise ConfigError(f"unknown environment {name!r}")


def _catch_geometry(env_or_spec):
    if isinstance(env_or_spec, Catch):
        return env_or_spec.spec.width, env_or_spec.spec.height, env_or_spec.paddle_width
    return env_or_spec


def _decision_ticks(height, frame_skip):
    """Ticks consumed by each agent decision until the ball lands."""
    ticks_left = height - 1
    while ticks_left > 0:
        n = min(frame_skip, ticks_left)
        ticks_left -= n
        yield n


def optimal_catch_return(env: Catch | tuple, frame_skip: int = 1) -> float:
    """Expected return of the best policy, by exhaustive reachability search.

    For every ball column, the set of paddle positions reachable when the ball
    lands is enumerated; the optimal policy catches the ball iff some reachable
    paddle covers that column.
    """
    width, height, paddle_width = _catch_geometry(env)
    limit = width - paddle_width
    reachable = {limit // 2}
    for n in _decision_ticks(height, frame_skip):
        reachable = {min(max(p + d * n, 0), limit) for p in reachable for d in (-1, 0, 1)}
    total = 0.0
    for col in range(width):
        caught = any(p <= col < p + paddle_width for p in reachable)
        total += 1.0 if caught else -1.0
    return total / width


def random_catch_return(env: Catch | tuple, frame_skip: int = 1) -> float:
    """Exact expected return of the uniform-random policy.

    Propagates the paddle-position distribution decision by decision (each
    action held for ``frame_skip`` ticks) and averages the catch probability
    over the uniformly drawn ball column.
    """
    width, height, paddle_width = _catch_geometry(env)
    limit = width - paddle_width
    dist = np.zeros(limit + 1)
    dist[limit // 2] = 1.0
    for n in _decision_ticks(height, frame_skip):
        new = np.zeros_like(dist)
        for d in (-1, 0, 1):
            np.add.at(new, np.clip(np.arange(limit + 1) + d * n, 0, limit), dist / 3.0)
        dist = new
    total = 0.0
    for col in range(width):
        lefts = np.arange(limit + 1)
        p_catch = dist[(lefts <= col) & (col < lefts + paddle_width)].sum()
        total += 2.0 * p_catch - 1.0
    return total / width
