import numpy as np
import pytest

from deepq.config import parse_config
from deepq.environments import Catch, StepResult, random_catch_return
from deepq.errors import InputError
from deepq.harness import (
    METRICS_COLUMNS, avg_max_q, collect_heldout, evaluate, make_phi, read_metrics, run_episodes,
    sign_changes, trace_values, train,
)
from deepq.nn import CATCH_GEOMETRY, init_params
from deepq.preprocessing import PreprocConfig

# what the network sees (the Catch profile's trimmed frame) and the full frame
PHI = make_phi(parse_config("").preproc(Catch()))
FULL_PHI = make_phi(PreprocConfig.identity(24, 24))


def constant_catch_params(row):
    p = init_params(CATCH_GEOMETRY, 0)
    tensors = {k: np.zeros_like(v) for k, v in p.tensors.items()}
    tensors["out_b"] = np.asarray(row, dtype=np.float32)
    return p.replace(tensors)


def tracking_policy(state, rng):
    """Move the paddle centre toward the ball column, read off the newest frame."""
    plane = np.asarray(state)[-1]
    ball = np.flatnonzero(plane[:-1].max(axis=0))
    paddle = np.flatnonzero(plane[-1])
    if len(ball) == 0:
        return 1
    centre = paddle.mean()
    return 1 + int(np.sign(ball[0] - centre))


# --- held-out set --------------------------------------------------------

def test_heldout_size_and_determinism():
    a = collect_heldout(Catch(), PHI, 500, seed=1)
    b = collect_heldout(Catch(), PHI, 500, seed=1)
    assert len(a) == 500
    assert all(np.array_equal(np.asarray(x), np.asarray(y)) for x, y in zip(a, b))
    distinct = {np.asarray(x).tobytes() for x in a}
    assert len(distinct) > 100


def test_heldout_size_one_and_zero():
    assert len(collect_heldout(Catch(), PHI, 1, seed=0)) == 1
    with pytest.raises(InputError):
        collect_heldout(Catch(), PHI, 0, seed=0)


class CounterEnv:
    """Never-ending episode whose observation is the step index."""
    num_actions = 1

    def reset(self, seed=None):
        self.t = 0
        return self.t

    def step(self, action):
        self.t += 1
        return StepResult(self.t, 0.0, False)


def test_heldout_reservoir_is_uniform_over_stream():
    """Each of 40 stream positions should be kept with probability 4/40."""
    runs = 2000
    hits = np.zeros(40)
    for seed in range(runs):
        hits[collect_heldout(CounterEnv(), lambda s, f: f, 4, seed, stream_length=40)] += 1
    sigma = np.sqrt(runs * 0.1 * 0.9)
    assert np.all(np.abs(hits - runs * 0.1) < 5 * sigma)


def test_avg_max_q_examples():
    heldout = collect_heldout(Catch(), PHI, 50, seed=0)
    assert avg_max_q(constant_catch_params([1.0, 2.0, 3.0]), heldout) == pytest.approx(3.0)
    assert avg_max_q(constant_catch_params([-1.0, -1.0, -1.0]), heldout[:1]) == pytest.approx(-1.0)
    with pytest.raises(InputError):
        avg_max_q(constant_catch_params([0, 0, 0]), [])


# --- evaluation ----------------------------------------------------------

def test_evaluate_one_episode_and_zero():
    avg, rets = evaluate(init_params(CATCH_GEOMETRY, 0), Catch(), PHI, 1, seed=0)
    assert len(rets) == 1 and avg in (-1.0, 1.0)
    with pytest.raises(InputError):
        evaluate(init_params(CATCH_GEOMETRY, 0), Catch(), PHI, 0)


def test_hand_coded_tracker_is_optimal():
    rets = run_episodes(tracking_policy, Catch(), FULL_PHI, 1000, seed=0, frame_skip=1)
    assert np.mean(rets) == 1.0


def test_random_policy_matches_exact_value():
    """Monte Carlo of the epsilon=1 policy against the enumerated return."""
    exact = random_catch_return(Catch(), frame_skip=4)
    n = 100_000
    avg, rets = evaluate(init_params(CATCH_GEOMETRY, 0), Catch(), PHI, n, epsilon=1.0, seed=5,
                         frame_skip=4)
    sigma = np.std(rets, ddof=1) / np.sqrt(n)
    assert abs(avg - exact) < 3 * sigma


def test_evaluate_does_not_touch_params():
    params = init_params(CATCH_GEOMETRY, 0)
    before = {k: v.copy() for k, v in params.tensors.items()}
    a = evaluate(params, Catch(), PHI, 20, seed=3)
    b = evaluate(params, Catch(), PHI, 20, seed=3)
    assert a == b
    assert all(np.array_equal(before[k], params.tensors[k]) for k in before)


def test_trace_bounded_and_deterministic():
    params = init_params(CATCH_GEOMETRY, 1)
    env = Catch()
    rows = trace_values(params, env, PHI, seed=4, max_steps=1000)
    assert 1 <= len(rows) <= env.spec.max_episode_steps
    assert rows == trace_values(params, Catch(), PHI, seed=4, max_steps=1000)
    assert len(trace_values(params, Catch(), PHI, seed=4, max_steps=3)) == 3


def test_sign_changes():
    assert sign_changes([1, 2, 3, 4]) == 0
    assert sign_changes([1, 2, 1, 2]) == 2
    assert sign_changes([1, 1, 2, 2, 1]) == 1
    assert sign_changes([5]) == 0


# --- training driver -----------------------------------------------------

SMOKE = parse_config("").replace(train__total_frames=1000, train__eval_every_frames=400,
                                 train__eval_episodes=3, train__final_eval_episodes=5,
                                 train__heldout_size=20, replay__warmup_size=50)


def test_smoke_train_writes_artifacts(tmp_path):
    result = train(SMOKE, tmp_path)
    rows = read_metrics(tmp_path / "metrics.csv")
    assert list(rows[0]) == METRICS_COLUMNS
    assert [r["epoch"] for r in rows] == list(range(len(rows)))
    assert rows[0]["frames_seen"] == 0 and rows[-1]["frames_seen"] >= 1000
    assert rows[-1]["episodes_evaluated"] == 3
    assert all(np.isfinite(r["avg_max_q"]) for r in rows)
    s = result.summary
    assert s["frames_seen"] >= 1000 and s["final_eval_episodes"] == 5
    assert s["random_policy_return"] == pytest.approx(-0.75)
    for name in ("final.dqnc", "summary.json", "timing.csv", "config.txt"):
        assert (tmp_path / name).exists()
    assert len(list((tmp_path / "checkpoints").glob("*.dqnc"))) == len(rows) - 1
