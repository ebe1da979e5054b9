"""Training/evaluation driver: runs the learner, records metrics, writes
checkpoints, and produces value traces."""
from __future__ import annotations

import csv
import functools
import json
import logging
import math
import time
from dataclasses import asdict, dataclass, fields
from pathlib import Path

import numpy as np

from .agent import DeepQLearner, greedy_action, select_action, skip_step
from .checkpoint import save_checkpoint
from .config import TrainConfig
from .environments import Catch, random_catch_return, value_iteration
from .errors import InputError, OutputError, TrainingError
from .nn import init_params, init_tabular, rmsprop_init
from .preprocessing import PreprocConfig, phi_append, stack_states
from .replay import ReplayMemory

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class MetricsRow:
    epoch: int
    frames_seen: int
    avg_episode_reward: float
    episodes_evaluated: int
    avg_max_q: float
    train_loss_mean: float
    epsilon_current: float
    wall_clock_seconds: float


# wall-clock time goes to a separate file so metrics.csv is reproducible byte for byte
METRICS_COLUMNS = [f.name for f in fields(MetricsRow) if f.name != "wall_clock_seconds"]


@dataclass(frozen=True)
class TraceRow:
    step: int
    max_q: float
    action: int
    reward: float


def make_phi(preproc: PreprocConfig):
    return functools.partial(phi_append, config=preproc)


def _derive_seed(*keys) -> int:
    return int(np.random.SeedSequence([int(k) for k in keys]).generate_state(1)[0])


def collect_heldout(env, phi, size: int, seed: int, frame_skip: int = 1,
                    stream_length: int | None = None) -> list:
    """Reservoir-sample ``size`` states visited by a uniform-random policy.

    The policy runs for ``stream_length`` decisions (default ``10 * size``);
    every visited state, episode starts included, is one stream element.
    """
    if size < 1:
        raise InputError("held-out size must be positive")
    stream_length = max(stream_length or 10 * size, size)
    rng = np.random.default_rng(seed)
    reservoir = []
    state = None
    for i in range(stream_length):
        if state is None:
            state = phi(None, env.reset(seed=int(rng.integers(2**31))))
        if i < size:
            reservoir.append(state)
        else:
            j = int(rng.integers(i + 1))
            if j < size:
                reservoir[j] = state
        result = skip_step(env, int(rng.integers(env.num_actions)), frame_skip, clip=False)
        state = None if result.terminal else phi(state, result.frame)
    return reservoir


def avg_max_q(params, heldout, chunk: int = 256) -> float:
    """Mean over states of the largest predicted action value."""
    if not heldout:
        raise InputError("held-out set is empty")
    maxes = [params.forward(stack_states(heldout[i:i + chunk])).max(axis=1)
             for i in range(0, len(heldout), chunk)]
    return float(np.mean(np.concatenate(maxes).astype(np.float64)))


def run_episodes(policy, env, phi, episodes: int, seed: int, frame_skip: int = 1):
    """Play full episodes with ``policy(state, rng) -> action``; returns the
    list of unclipped episode returns."""
    rng = np.random.default_rng(seed)
    returns = []
    for _ in range(episodes):
        state = phi(None, env.reset(seed=int(rng.integers(2**31))))
        total = 0.0
        while True:
            result = skip_step(env, policy(state, rng), frame_skip, clip=False)
            total += result.reward
            if result.terminal:
                break
            state = phi(state, result.frame)
        returns.append(total)
    return returns


def evaluate(params, env, phi, episodes: int, epsilon: float = 0.05, seed: int = 0,
             frame_skip: int = 1):
    """Average unclipped return of the epsilon-greedy policy over ``episodes``."""
    if episodes < 1:
        raise InputError("need at least one evaluation episode")
    policy = lambda state, rng: select_action(params, state, epsilon, rng)  # noqa: E731
    returns = run_episodes(policy, env, phi, episodes, seed, frame_skip)
    return float(np.mean(returns)), returns


def trace_values(params, env, phi, seed: int, max_steps: int, frame_skip: int = 1) -> list:
    """Greedy episode logging the max predicted Q at every decision."""
    rows = []
    state = phi(None, env.reset(seed=seed))
    for step in range(max_steps):
        q = params.forward(stack_states([state]))[0]
        action = greedy_action(q)
        result = skip_step(env, action, frame_skip, clip=False)
        rows.append(TraceRow(step, float(q.max()), action, result.reward))
        if result.terminal:
            break
        state = phi(state, result.frame)
    return rows


def write_trace_csv(rows, path_or_file):
    _write_csv(path_or_file, [f.name for f in fields(TraceRow)], [asdict(r) for r in rows])


def _fmt(value):
    if isinstance(value, float):
        return "nan" if math.isnan(value) else repr(value)
    return str(value)


def _write_csv(target, columns, dict_rows):
    def emit(fh):
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(columns)
        for row in dict_rows:
            writer.writerow([_fmt(row[c]) for c in columns])

    if hasattr(target, "write"):
        emit(target)
        return
    path = Path(target)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", newline="", encoding="utf-8") as fh:
            emit(fh)
    except OSError as exc:
        raise OutputError(f"cannot write {path}: {exc.strerror or exc}") from exc


def read_metrics(path) -> list[dict]:
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.DictReader(fh))
    return [{k: (int(v) if k in ("epoch", "frames_seen", "episodes_evaluated") else float(v))
             for k, v in row.items()} for row in rows]


def sign_changes(series) -> int:
    """Number of sign flips in the first differences, zero steps skipped."""
    diffs = np.diff(np.asarray(series, dtype=float))
    signs = np.sign(diffs[diffs != 0])
    return int(np.count_nonzero(signs[1:] != signs[:-1]))


@dataclass
class TrainResult:
    params: object
    rms: object
    rows: list
    summary: dict
    output_dir: Path


def build_learner(config: TrainConfig):
    env = config.make_env()
    preproc = config.preproc(env)
    geometry = config.geometry(env)
    v = config.values
    params = init_params(geometry, _derive_seed(config.seed, 0))
    rms = rmsprop_init(params, v["rmsprop.decay"], v["rmsprop.epsilon"], v["rmsprop.learning_rate"])
    learner = DeepQLearner(env, params, rms, config.agent, ReplayMemory(v["replay.capacity"]),
                           phi=make_phi(preproc), seed=_derive_seed(config.seed, 1))
    return learner, preproc


def train(config: TrainConfig, output_dir=None) -> TrainResult:
    """Run deep Q-learning for ``train.total_frames`` emulator frames.

    Writes into the output directory: ``metrics.csv`` (one row per epoch,
    epoch 0 is the untrained network), ``timing.csv``, ``checkpoints/``,
    ``final.dqnc``, ``summary.json`` and the resolved ``config.txt``.
    """
    out = Path(output_dir or config.output_dir)
    v = config.values
    learner, preproc = build_learner(config)
    phi = make_phi(preproc)
    skip = config.agent.frame_skip
    eval_env = config.make_env()
    try:
        out.mkdir(parents=True, exist_ok=True)
        (out / "config.txt").write_text(config.to_text(), encoding="utf-8")
    except OSError as exc:
        raise OutputError(f"cannot prepare output directory {out}: {exc.strerror or exc}") from exc

    heldout = collect_heldout(config.make_env(), phi, v["train.heldout_size"],
                              _derive_seed(config.seed, 2), skip)
    rows: list[MetricsRow] = []
    started = time.perf_counter()

    def record(epoch):
        avg, rets = evaluate(learner.params, eval_env, phi, v["train.eval_episodes"],
                             v["train.eval_epsilon"], _derive_seed(config.seed, 3, epoch), skip)
        losses = learner.drain_losses()
        row = MetricsRow(epoch, learner.frames_seen, avg, len(rets),
                         avg_max_q(learner.params, heldout),
                         float(np.mean(losses)) if losses else float("nan"),
                         learner.epsilon, time.perf_counter() - started)
        rows.append(row)
        _write_csv(out / "metrics.csv", METRICS_COLUMNS, [asdict(r) for r in rows])
        _write_csv(out / "timing.csv", ["epoch", "frames_seen", "wall_clock_seconds"],
                   [asdict(r) for r in rows])
        if epoch:
            save_checkpoint(learner.params, learner.rms, out / "checkpoints" / f"epoch_{epoch:04d}.dqnc")
        log.info("epoch %d frames %d reward %.3f avg_max_q %.4f loss %.5f eps %.3f",
                 epoch, row.frames_seen, row.avg_episode_reward, row.avg_max_q,
                 row.train_loss_mean, row.epsilon_current)

    record(0)
    every = v["train.eval_every_frames"]
    next_eval = every
    epoch = 0
    try:
        while learner.frames_seen < config.total_frames:
            learner.step()
            if learner.frames_seen >= next_eval or learner.frames_seen >= config.total_frames:
                epoch += 1
                record(epoch)
                while next_eval <= learner.frames_seen:
                    next_eval += every
    except TrainingError:
        save_checkpoint(learner.params, learner.rms, out / "diagnostic.dqnc")
        raise

    save_checkpoint(learner.params, learner.rms, out / "final.dqnc")
    final_avg, final_rets = evaluate(learner.params, eval_env, phi, v["train.final_eval_episodes"],
                                     v["train.eval_epsilon"], _derive_seed(config.seed, 4), skip)
    summary = {
        "frames_seen": learner.frames_seen,
        "decisions": learner.decisions,
        "updates": learner.updates,
        "training_episodes": learner.episodes,
        "epochs": epoch,
        "final_eval_avg_reward": final_avg,
        "final_eval_episodes": len(final_rets),
        "final_eval_epsilon": v["train.eval_epsilon"],
        "final_avg_max_q": avg_max_q(learner.params, heldout),
    }
    if isinstance(eval_env, Catch):
        summary["random_policy_return"] = float(random_catch_return(eval_env, skip))
    try:
        (out / "summary.json").write_text(json.dumps(summary, indent=2) + "\n", encoding="utf-8")
    except OSError as exc:
        raise OutputError(f"cannot write {out / 'summary.json'}: {exc.strerror or exc}") from exc
    return TrainResult(learner.params, learner.rms, rows, summary, out)


def run_tabular_oracle(config: TrainConfig, steps: int):
    """Deep Q-learning with a lookup-table Q on the config's TinyMdp.

    Returns ``(learned_q, optimal_q)``, both [S, A]. No action is ever taken
    in a terminal state, so those rows of the table are never trained; their
    value is zero by definition and is reported as such.
    """
    mdp = config.tiny_mdp()
    env = config.make_env()
    v = config.values
    params = init_tabular(mdp.num_states, mdp.num_actions, _derive_seed(config.seed, 0))
    rms = rmsprop_init(params, v["rmsprop.decay"], v["rmsprop.epsilon"], v["rmsprop.learning_rate"])
    learner = DeepQLearner(env, params, rms, config.agent, ReplayMemory(v["replay.capacity"]),
                           seed=_derive_seed(config.seed, 1))
    learner.run_decisions(steps)
    learned = learner.params.tensors["table"].T.copy()
    learned[mdp.terminal_mask] = 0.0
    return learned, value_iteration(mdp, 1e-12)
