"""Deep Q-learning control: epsilon-greedy acting, reward clipping, frame
skipping, bootstrapped targets and the replay-driven update loop."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .environments import StepResult
from .errors import ConfigError, TrainingError
from .nn import rmsprop_step
from .preprocessing import stack_states
from .replay import ReplayMemory, Transition


@dataclass(frozen=True)
class EpsilonSchedule:
    start: float = 1.0
    end: float = 0.1
    anneal_frames: int = 100_000

    def __post_init__(self):
        if not 0 <= self.end <= self.start <= 1:
            raise ConfigError("epsilon schedule needs 0 <= end <= start <= 1")
        if self.anneal_frames < 1:
            raise ConfigError("anneal_frames must be positive")


@dataclass(frozen=True)
class AgentConfig:
    gamma: float = 0.99
    frame_skip: int = 4
    clip_rewards: bool = True
    batch_size: int = 32
    warmup_size: int = 1000
    schedule: EpsilonSchedule = field(default_factory=EpsilonSchedule)

    def __post_init__(self):
        problems = []
        if not 0 <= self.gamma <= 1:
            problems.append("gamma must lie in [0, 1]")
        if self.frame_skip < 1:
            problems.append("frame_skip must be at least 1")
        if self.batch_size < 1:
            problems.append("batch_size must be at least 1")
        if self.warmup_size < 0:
            problems.append("warmup_size must be non-negative")
        if problems:
            raise ConfigError(problems)


def epsilon_at(schedule: EpsilonSchedule, frame_count: int) -> float:
    """Linear anneal from ``start`` to ``end`` over ``anneal_frames``, then flat."""
    if frame_count >= schedule.anneal_frames:
        return schedule.end
    frac = frame_count / schedule.anneal_frames
    return schedule.start + (schedule.end - schedule.start) * frac


def clip_reward(r: float) -> float:
    if r > 0:
        return 1.0
    if r < 0:
        return -1.0
    return 0.0


def greedy_action(q_row) -> int:
    # np.argmax returns the first maximum, i.e. ties go to the lowest index
    return int(np.argmax(q_row))


def select_action(params, phi, eps: float, rng: np.random.Generator) -> int:
    if rng.random() < eps:
        return int(rng.integers(params.num_actions))
    return greedy_action(params.forward(stack_states([phi]))[0])


def skip_step(env, action: int, k: int, clip: bool) -> StepResult:
    """Repeat ``action`` for up to ``k`` ticks, stopping at a terminal tick.

    Rewards are summed over the executed ticks and clipped once.
    """
    total = 0.0
    for tick in range(1, k + 1):
        result = env.step(action)
        total += result.reward
        if result.terminal:
            break
    reward = clip_reward(total) if clip else total
    return StepResult(result.frame, reward, result.terminal, tick)


def compute_targets(params, batch, gamma: float) -> np.ndarray:
    """r for terminal transitions, r + gamma * max_a' Q(next, a') otherwise."""
    rewards = np.array([t.reward for t in batch], dtype=np.float64)
    terminal = np.array([t.terminal for t in batch], dtype=bool)
    if terminal.all():
        return rewards.astype(params.dtype)
    next_q = params.forward(stack_states([t.phi_after for t in batch])).max(axis=1)
    return np.where(terminal, rewards, rewards + gamma * next_q).astype(params.dtype)


def train_step(params, rms, memory: ReplayMemory, config: AgentConfig, rng):
    """One minibatch update, or ``None`` while the memory is below warm-up size.

    Targets are computed first and treated as constants by the gradient.
    """
    if memory.count < max(config.warmup_size, 1):
        return None
    batch = memory.sample(config.batch_size, rng)
    targets = compute_targets(params, batch, config.gamma)
    states = stack_states([t.phi_before for t in batch])
    actions = np.array([t.action for t in batch])
    loss, grads = params.loss_and_grad(states, actions, targets)
    if not np.isfinite(loss):
        raise TrainingError(f"non-finite loss {loss}")
    params, rms = rmsprop_step(params, grads, rms)
    return params, rms, loss


def identity_phi(state, observation):
    return observation


class DeepQLearner:
    """Owns the environment, replay memory, parameters and optimizer state, and
    advances them one agent decision at a time.

    ``phi(previous_state_or_None, frame)`` turns raw observations into network
    inputs; ``None`` marks the start of an episode.
    """

    def __init__(self, env, params, rms, config: AgentConfig, memory: ReplayMemory,
                 phi=identity_phi, seed: int = 0):
        self.env = env
        self.params = params
        self.rms = rms
        self.config = config
        self.memory = memory
        self.phi = phi
        self.env_rng, self.act_rng, self.replay_rng = np.random.default_rng(seed).spawn(3)
        self.frames_seen = 0
        self.decisions = 0
        self.updates = 0
        self.episodes = 0
        self.state = None
        self.losses: list[float] = []

    @property
    def epsilon(self) -> float:
        return epsilon_at(self.config.schedule, self.frames_seen)

    def _start_episode(self):
        frame = self.env.reset(seed=int(self.env_rng.integers(2**31)))
        self.state = self.phi(None, frame)

    def step(self):
        if self.state is None:
            self._start_episode()
        cfg = self.config
        action = select_action(self.params, self.state, self.epsilon, self.act_rng)
        result = skip_step(self.env, action, cfg.frame_skip, cfg.clip_rewards)
        next_state = self.phi(self.state, result.frame)
        self.memory.push(Transition(self.state, action, result.reward, next_state, result.terminal))
        self.frames_seen += result.ticks
        self.decisions += 1
        out = train_step(self.params, self.rms, self.memory, cfg, self.replay_rng)
        if out is not None:
            self.params, self.rms, loss = out
            self.losses.append(loss)
            self.updates += 1
        if result.terminal:
            self.state = None
            self.episodes += 1
        else:
            self.state = next_state
        return result

    def run_until(self, frames: int):
        while self.frames_seen < frames:
            self.step()

    def run_decisions(self, n: int):
        for _ in range(n):
            self.step()

    def drain_losses(self) -> list[float]:
        out, self.losses = self.losses, []
        return out
