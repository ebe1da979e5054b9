"""Deep Q-learning with experience replay, built on numpy.

Modules:
    nn              Q-network forward/backward, RMSProp, gradient oracle
    environments    Catch, GridWorld, TinyMdp + value iteration
    preprocessing   grayscale / downsample / crop / frame stacking
    replay          ring-buffer replay memory
    agent           epsilon-greedy control and the update loop
    config          ``key = value`` training configuration
    checkpoint      binary parameter checkpoints
    harness         training runs, evaluation, metrics, value traces
"""
from .agent import AgentConfig, DeepQLearner, EpsilonSchedule
from .config import TrainConfig, load_config, parse_config
from .environments import Catch, GridWorld, TinyMdp, TinyMdpEnv, make_env, value_iteration
from .nn import Geometry, QNetParams, init_params, qnet_backward, qnet_forward
from .preprocessing import PhiState, PreprocConfig, phi_append
from .replay import ReplayMemory, Transition

__version__ = "0.1.0"
