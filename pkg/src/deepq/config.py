"""Training configuration: flat ``key = value`` text with dotted keys.

    # comments start with '#'
    env.name = catch
    agent.gamma = 0.99
    preproc.grayscale_weights = 0.299, 0.587, 0.114

Every key has a default (the desk-scale Catch profile), so an empty file is a
valid configuration. Unknown keys and bad values are collected and reported
together.
"""
from __future__ import annotations

from dataclasses import dataclass, field

from .agent import AgentConfig, EpsilonSchedule
from .environments import Environment, TinyMdp, make_env
from .errors import ConfigError
from .nn import ConvLayer, Geometry
from .preprocessing import LUMA_WEIGHTS, PreprocConfig


def _bool(text):
    t = text.strip().lower()
    if t in ("true", "yes", "1", "on"):
        return True
    if t in ("false", "no", "0", "off"):
        return False
    raise ValueError(f"expected a boolean, got {text!r}")


def _floats(text):
    return tuple(float(v) for v in text.replace(",", " ").split())


def _ints(text):
    return tuple(int(v) for v in text.replace(",", " ").split())


def _table(cast):
    def parse(text):
        rows = [r for r in text.split(";") if r.strip()]
        return tuple(tuple(cast(v) for v in row.replace(",", " ").split()) for row in rows)
    return parse


def _optional_int(text):
    return None if text.strip().lower() in ("", "none") else int(text)


def _sampling(text):
    if text.strip() != "with_replacement":
        raise ValueError("only 'with_replacement' sampling is supported")
    return text.strip()


# key -> (parser, default)
SCHEMA = {
    "seed": (int, 0),
    "output_dir": (str, "runs/catch"),
    "env.name": (str, "catch"),
    "preproc.target_width": (_optional_int, None),
    "preproc.target_height": (_optional_int, None),
    "preproc.crop_x": (_optional_int, None),
    "preproc.crop_y": (_optional_int, None),
    "preproc.crop_width": (_optional_int, None),
    "preproc.crop_height": (_optional_int, None),
    "preproc.stack_depth": (int, 4),
    "preproc.grayscale_weights": (_floats, LUMA_WEIGHTS),
    "net.conv1_channels": (int, 8),
    "net.conv1_kernel": (int, 3),
    "net.conv1_stride": (int, 1),
    "net.conv2_channels": (int, 16),
    "net.conv2_kernel": (int, 3),
    "net.conv2_stride": (int, 2),
    "net.hidden": (int, 64),
    "agent.gamma": (float, 0.99),
    "agent.frame_skip": (int, 4),
    "agent.clip_rewards": (_bool, True),
    "agent.batch_size": (int, 32),
    "agent.eps_start": (float, 1.0),
    "agent.eps_end": (float, 0.1),
    "agent.anneal_frames": (int, 100_000),
    "replay.capacity": (int, 50_000),
    "replay.warmup_size": (int, 1_000),
    "replay.sampling": (_sampling, "with_replacement"),
    "rmsprop.learning_rate": (float, 2.5e-4),
    "rmsprop.decay": (float, 0.95),
    "rmsprop.epsilon": (float, 1e-6),
    "train.total_frames": (int, 500_000),
    "train.eval_every_frames": (int, 10_000),
    "train.eval_episodes": (int, 100),
    "train.eval_epsilon": (float, 0.05),
    "train.final_eval_episodes": (int, 500),
    "train.heldout_size": (int, 500),
}

# environment-specific keys, only legal with the matching env.name
ENV_SCHEMA = {
    "catch": {
        "env.width": (int, 24),
        "env.height": (int, 24),
        "env.paddle_width": (int, 3),
    },
    "gridworld": {
        "env.size": (int, 12),
        "env.cell": (int, 2),
        "env.max_episode_steps": (int, 200),
    },
    "tinymdp": {
        "env.transitions": (_table(int), None),
        "env.rewards": (_table(float), None),
        "env.terminal_states": (_ints, ()),
        "env.start_state": (_optional_int, None),
        "env.gamma": (float, 0.9),
        "env.max_episode_steps": (int, 10_000),
    },
}


@dataclass(frozen=True)
class TrainConfig:
    values: dict = field(default_factory=dict)
    agent: AgentConfig = field(default_factory=AgentConfig)

    def __getitem__(self, key):
        return self.values[key]

    @property
    def env_name(self) -> str:
        return self.values["env.name"]

    @property
    def seed(self) -> int:
        return self.values["seed"]

    @property
    def output_dir(self) -> str:
        return self.values["output_dir"]

    @property
    def total_frames(self) -> int:
        return self.values["train.total_frames"]

    def env_params(self) -> dict:
        return {k.split(".", 1)[1]: self.values[k] for k in ENV_SCHEMA[self.env_name]}

    def tiny_mdp(self) -> TinyMdp:
        p = self.env_params()
        return TinyMdp(p["transitions"], p["rewards"], frozenset(p["terminal_states"]),
                       p["gamma"], p["start_state"])

    def make_env(self) -> Environment:
        if self.env_name == "tinymdp":
            return make_env("tinymdp", mdp=self.tiny_mdp(),
                            max_episode_steps=self.values["env.max_episode_steps"])
        return make_env(self.env_name, **self.env_params())

    def _layers(self):
        v = self.values
        return (ConvLayer(v["net.conv1_channels"], v["net.conv1_kernel"], v["net.conv1_stride"]),
                ConvLayer(v["net.conv2_channels"], v["net.conv2_kernel"], v["net.conv2_stride"]))

    def preproc(self, env: Environment) -> PreprocConfig:
        """With no target size set, frames are resampled to the largest size
        the network covers completely, so every pixel reaches Q (valid
        convolutions drop trailing rows/columns when strides do not divide
        evenly). With no crop keys set, the whole resampled frame is used."""
        v = self.values
        tw, th = v["preproc.target_width"], v["preproc.target_height"]
        if tw is None and th is None:
            full = Geometry(v["preproc.stack_depth"], env.spec.height, env.spec.width,
                            *self._layers(), v["net.hidden"], env.num_actions).validate()
            th, tw = full.covered_extent
        else:
            tw, th = tw or env.spec.width, th or env.spec.height
        x, y = v["preproc.crop_x"] or 0, v["preproc.crop_y"] or 0
        rect = (x, y, v["preproc.crop_width"] or tw - x, v["preproc.crop_height"] or th - y)
        return PreprocConfig((tw, th), rect, v["preproc.stack_depth"],
                             tuple(v["preproc.grayscale_weights"]),
                             source_size=(env.spec.width, env.spec.height))

    def geometry(self, env: Environment) -> Geometry:
        depth, h, w = self.preproc(env).output_shape
        geo = Geometry(depth, h, w, *self._layers(), self.values["net.hidden"], env.num_actions).validate()
        if geo.covered_extent != (h, w):
            rows, cols = geo.covered_extent
            raise ConfigError(f"preproc: the network only sees the first {rows} rows and {cols} "
                              f"columns of its {h}x{w} input; resize or crop to {rows}x{cols} "
                              f"(or leave the target and crop keys unset to fit automatically)")
        return geo

    def replace(self, **overrides) -> "TrainConfig":
        """Copy with some keys changed; dots in keys are written as ``__``."""
        return build_config({**self.values, **{k.replace("__", "."): v for k, v in overrides.items()}})

    def to_text(self) -> str:
        lines = []
        for key, value in self.values.items():
            if isinstance(value, tuple) and value and isinstance(value[0], tuple):
                value = "; ".join(" ".join(str(x) for x in row) for row in value)
            elif isinstance(value, tuple):
                value = ", ".join(str(x) for x in value)
            elif isinstance(value, bool):
                value = str(value).lower()
            lines.append(f"{key} = {'none' if value is None else value}")
        return "\n".join(lines) + "\n"


def _read_pairs(text: str, problems: list) -> dict:
    pairs = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            problems.append(f"line {lineno}: expected 'key = value'")
            continue
        key, value = (s.strip() for s in line.split("=", 1))
        if key in pairs:
            problems.append(f"line {lineno}: duplicate key {key!r}")
        pairs[key] = value
    return pairs


def parse_config(text: str) -> TrainConfig:
    problems: list[str] = []
    pairs = _read_pairs(text, problems)
    env_name = pairs.get("env.name", SCHEMA["env.name"][1]).strip().lower()
    if env_name not in ENV_SCHEMA:
        problems.append(f"env.name: unknown environment {env_name!r}")
        env_name = "catch"
    schema = {**SCHEMA, **ENV_SCHEMA[env_name]}
    values = {}
    for key, raw in pairs.items():
        if key not in schema:
            problems.append(f"{key}: unknown key")
            continue
        try:
            values[key] = schema[key][0](raw)
        except ValueError as exc:
            problems.append(f"{key}: {exc}")
    values["env.name"] = env_name
    try:
        config = build_config(values)
    except ConfigError as exc:
        problems.extend(exc.problems)
    if problems:
        raise ConfigError(problems)
    return config


def build_config(values: dict) -> TrainConfig:
    """Apply defaults to already-typed ``values`` and validate the result."""
    env_name = values.get("env.name", "catch")
    schema = {**SCHEMA, **ENV_SCHEMA.get(env_name, {})}
    unknown = [k for k in values if k not in schema]
    if unknown:
        raise ConfigError([f"{k}: unknown key" for k in unknown])
    full = {k: values.get(k, default) for k, (_, default) in schema.items()}
    problems = []

    def check(cond, message):
        if not cond:
            problems.append(message)

    check(full["train.total_frames"] >= 1, "train.total_frames: must be at least 1")
    check(full["train.eval_every_frames"] >= 1, "train.eval_every_frames: must be at least 1")
    check(full["train.eval_episodes"] >= 1, "train.eval_episodes: must be at least 1")
    check(full["train.final_eval_episodes"] >= 1, "train.final_eval_episodes: must be at least 1")
    check(full["train.heldout_size"] >= 1, "train.heldout_size: must be at least 1")
    check(0 <= full["train.eval_epsilon"] <= 1, "train.eval_epsilon: must lie in [0, 1]")
    check(full["replay.capacity"] >= 1, "replay.capacity: must be at least 1")
    check(full["rmsprop.learning_rate"] > 0, "rmsprop.learning_rate: must be positive")
    check(0 < full["rmsprop.decay"] < 1, "rmsprop.decay: must lie in (0, 1)")
    check(full["rmsprop.epsilon"] > 0, "rmsprop.epsilon: must be positive")
    if env_name == "tinymdp":
        check(full["env.transitions"] is not None, "env.transitions: required for tinymdp")
        check(full["env.rewards"] is not None, "env.rewards: required for tinymdp")

    agent = None
    try:
        schedule = EpsilonSchedule(full["agent.eps_start"], full["agent.eps_end"],
                                   full["agent.anneal_frames"])
        agent = AgentConfig(full["agent.gamma"], full["agent.frame_skip"],
                            full["agent.clip_rewards"], full["agent.batch_size"],
                            full["replay.warmup_size"], schedule)
    except ConfigError as exc:
        problems.extend(exc.problems)
    config = TrainConfig(full, agent)
    if not problems:
        # geometry chain, crop bounds, MDP tables
        try:
            env = config.make_env()
            if env_name != "tinymdp":
                config.geometry(env)
        except ConfigError as exc:
            problems.extend(exc.problems)
    if problems:
        raise ConfigError(problems)
    return config


def load_config(path) -> TrainConfig:
    with open(path, encoding="utf-8") as fh:
        return parse_config(fh.read())
