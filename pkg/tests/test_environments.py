import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from deepq.environments import (
    Catch, GridWorld, TinyMdp, TinyMdpEnv, bellman_backup, make_env,
    optimal_catch_return, random_catch_return, value_iteration,
)
from deepq.errors import ConfigError, InputError, ProtocolError


def catch_with_ball(col, seed_limit=10_000):
    """A freshly reset Catch whose ball sits in column ``col``."""
    env = Catch()
    for seed in range(seed_limit):
        env.reset(seed)
        if env.ball_col == col:
            return env
    raise AssertionError("no seed puts the ball there")


# --- Catch ---------------------------------------------------------------

def test_catch_reset_deterministic():
    env = Catch()
    a = env.reset(5).pixels.copy()
    b = env.reset(5).pixels.copy()
    assert np.array_equal(a, b)


def test_catch_reset_layout():
    frame = Catch().reset(3)
    px = frame.pixels[:, :, 0]
    assert (frame.width, frame.height, frame.channels) == (24, 24, 1)
    assert np.count_nonzero(px[0]) == 1
    assert np.count_nonzero(px[-1]) == 3
    lit = np.flatnonzero(px[-1])
    assert list(lit) == list(range(lit[0], lit[0] + 3))
    assert np.count_nonzero(px[1:-1]) == 0
    assert set(np.unique(px)) <= {0, 255}


def test_catch_reward_on_catch_and_miss():
    env = catch_with_ball(11)        # paddle covers 10..12 and stays put
    rewards = [env.step(1) for _ in range(23)]
    assert [r.reward for r in rewards[:-1]] == [0.0] * 22
    assert rewards[-1].reward == 1.0 and rewards[-1].terminal
    env = catch_with_ball(0)
    for _ in range(22):
        assert not env.step(2).terminal
    last = env.step(2)
    assert last.reward == -1.0 and last.terminal


def test_catch_step_after_terminal_and_bad_action():
    env = catch_with_ball(11)
    with pytest.raises(InputError):
        env.step(3)
    for _ in range(23):
        res = env.step(1)
    assert res.terminal
    with pytest.raises(ProtocolError):
        env.step(1)
    with pytest.raises(ProtocolError):
        Catch().step(1)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**31 - 1), st.lists(st.integers(0, 2), min_size=30, max_size=30))
def test_catch_episode_properties(seed, actions):
    env = Catch()
    env.reset(seed)
    rewards = []
    for step, a in enumerate(actions, 1):
        res = env.step(a)
        assert res.frame.pixels.shape == (24, 24, 1)
        assert set(np.unique(res.frame.pixels)) <= {0, 255}
        rewards.append(res.reward)
        if res.terminal:
            break
    assert res.terminal and step <= env.spec.max_episode_steps
    nonzero = [r for r in rewards if r != 0]
    assert len(nonzero) == 1 and rewards[-1] in (-1.0, 1.0)
    # same seed + same actions -> same trajectory
    env2 = Catch()
    env2.reset(seed)
    for a in actions[:step]:
        res2 = env2.step(a)
    assert np.array_equal(res2.frame.pixels, res.frame.pixels)


# --- GridWorld -----------------------------------------------------------

def test_gridworld_reset_layout():
    frame = GridWorld().reset(0)
    px = frame.pixels[:, :, 0]
    assert px.shape == (24, 24)
    assert np.all(px[2:4, 2:4] == 255)        # agent at (1, 1)
    assert np.all(px[20:22, 20:22] == 170)    # goal at (10, 10)
    assert np.all(px[10:12, 10:12] == 85)     # pit at (5, 5)
    assert np.count_nonzero(px) == 12


def test_gridworld_rewards():
    env = GridWorld()
    env.reset(0)
    res = env.step(1)                          # down -> (2, 1)
    assert res.reward == 0.0 and not res.terminal
    res = env.step(0)
    res = env.step(0)
    res = env.step(0)                          # clamped at the top wall
    assert env.position == (0, 1)
    env.reset(0)
    for a in [1, 1, 1, 1, 3, 3, 3]:
        res = env.step(a)                      # (5,1) -> (5,4)
    res = env.step(3)
    assert env.position == (5, 5) and res.reward == -1.0 and res.terminal
    env.reset(0)
    for a in [1] * 9 + [3] * 8:
        res = env.step(a)
    res = env.step(3)
    assert env.position == (10, 10) and res.reward == 1.0 and res.terminal


def test_gridworld_truncates():
    env = GridWorld()
    env.reset(0)
    for i in range(200):
        res = env.step(0)
    assert res.terminal and res.reward == 0.0


def test_make_env():
    assert isinstance(make_env("catch"), Catch)
    assert isinstance(make_env("GridWorld"), GridWorld)
    with pytest.raises(ConfigError):
        make_env("pong")


# --- TinyMdp + value iteration -------------------------------------------

def test_value_iteration_absorbing_state():
    mdp = TinyMdp([[0]] * 1, [[0.0]], frozenset(), gamma=0.9)
    assert np.all(value_iteration(mdp, 1e-12) == 0)


def test_value_iteration_one_step_episode():
    mdp = TinyMdp([[1, 0], [1, 1]], [[1.0, 0.0], [0.0, 0.0]], {1}, gamma=0.9)
    q = value_iteration(mdp, 1e-12)
    assert q[0, 0] == pytest.approx(1.0)
    assert q[0, 1] == pytest.approx(0.9)


def test_value_iteration_three_state_chain():
    mdp = TinyMdp([[1], [2], [2]], [[0.0], [1.0], [0.0]], {2}, gamma=0.9)
    q = value_iteration(mdp, 1e-12)
    assert q[0, 0] == pytest.approx(0.9)
    assert q[1, 0] == pytest.approx(1.0)


def brute_force_q(mdp, horizon=60):
    """Best discounted return over every action sequence (deterministic MDP)."""
    q = np.zeros(mdp.transitions.shape)
    for s in range(mdp.num_states):
        if s in mdp.terminal_states:
            continue
        for a in range(mdp.num_actions):
            # dynamic programming over a finite horizon from (s, a)
            best = {}
            def v(state, left):
                if state in mdp.terminal_states or left == 0:
                    return 0.0
                key = (state, left)
                if key not in best:
                    best[key] = max(mdp.rewards[state, b] + mdp.gamma * v(mdp.transitions[state, b], left - 1)
                                    for b in range(mdp.num_actions))
                return best[key]
            q[s, a] = mdp.rewards[s, a] + mdp.gamma * v(mdp.transitions[s, a], horizon)
    return q


@settings(max_examples=25, deadline=None)
@given(st.integers(2, 6), st.integers(2, 3), st.integers(0, 2**31))
def test_value_iteration_bellman_residual(states, actions, seed):
    rng = np.random.default_rng(seed)
    mdp = TinyMdp(rng.integers(0, states, size=(states, actions)),
                  rng.choice([-1.0, 0.0, 0.5, 1.0], size=(states, actions)),
                  frozenset(rng.choice(states, size=1).tolist()), gamma=0.8)
    tol = 1e-8
    q = value_iteration(mdp, tol)
    assert np.max(np.abs(bellman_backup(mdp, q) - q)) < tol
    # finite-horizon brute force agrees up to gamma^horizon
    np.testing.assert_allclose(q, brute_force_q(mdp), atol=1e-5)


def test_tinymdp_validation():
    with pytest.raises(ConfigError):
        TinyMdp([[0, 5]], [[0.0, 0.0]])
    with pytest.raises(ConfigError):
        TinyMdp([[0, 0]], [[0.0]])


def test_tinymdp_env_one_hot():
    mdp = TinyMdp([[1], [2], [2]], [[0.0], [1.0], [0.0]], {2}, start_state=0)
    env = TinyMdpEnv(mdp)
    obs = env.reset(0)
    assert list(obs) == [1, 0, 0]
    res = env.step(0)
    assert list(res.frame) == [0, 1, 0] and res.reward == 0
    res = env.step(0)
    assert res.terminal and res.reward == 1.0


# --- Catch oracles -------------------------------------------------------

def reachable_by_enumeration(width, height, paddle, frame_skip):
    """Enumerate every action sequence (tiny geometries only)."""
    decisions = -(-(height - 1) // frame_skip)
    limit = width - paddle
    finals = set()
    for seq in itertools.product((-1, 0, 1), repeat=decisions):
        p = limit // 2
        ticks = height - 1
        for d in seq:
            n = min(frame_skip, ticks)
            for _ in range(n):
                p = min(max(p + d, 0), limit)
            ticks -= n
        finals.add(p)
    return np.mean([1.0 if any(p <= c < p + paddle for p in finals) else -1.0 for c in range(width)])


def test_optimal_catch_return_default():
    assert optimal_catch_return(Catch()) == 1.0
    assert optimal_catch_return(Catch(), frame_skip=4) == 1.0


@pytest.mark.parametrize("geom,skip", [((9, 5, 1), 1), ((12, 4, 1), 1), ((10, 6, 2), 2), ((8, 7, 3), 3)])
def test_optimal_catch_return_matches_enumeration(geom, skip):
    assert optimal_catch_return(geom, skip) == pytest.approx(reachable_by_enumeration(*geom, skip))


def test_degenerate_full_width_paddle():
    assert optimal_catch_return((3, 24, 3)) == 1.0
    assert random_catch_return((3, 24, 3)) == 1.0


def test_random_catch_return_monte_carlo():
    """Exact enumeration vs 100k simulated random-policy episodes."""
    exact = random_catch_return(Catch())
    assert exact == pytest.approx(2 * 3 / 24 - 1)
    rng = np.random.default_rng(123)
    env = Catch()
    n = 100_000
    returns = np.empty(n)
    actions = rng.integers(0, 3, size=(n, 23)).tolist()
    for i in range(n):
        env.reset(seed=i)
        for a in actions[i]:
            res = env.step(a)
            if res.terminal:
                break
        returns[i] = res.reward
    sigma = returns.std(ddof=1) / np.sqrt(n)
    assert abs(returns.mean() - exact) < 3 * sigma


def test_random_catch_return_with_paddle_dependence():
    # narrow frame where clamping matters: compare DP against direct enumeration of action sequences
    width, height, paddle, skip = 5, 5, 1, 1
    exact = random_catch_return((width, height, paddle), skip)
    total = 0.0
    seqs = list(itertools.product((0, 1, 2), repeat=height - 1))
    for col in range(width):
        for seq in seqs:
            p = (width - paddle) // 2
            for a in seq:
                p = min(max(p + a - 1, 0), width - paddle)
            total += 1.0 if p <= col < p + paddle else -1.0
    assert exact == pytest.approx(total / (width * len(seqs)))
