"""Exception types raised across the package."""


class DeepQError(Exception):
    """Base class for every error raised by deepq."""

    kind = "error"


class ConfigError(DeepQError, ValueError):
    kind = "config"

    def __init__(self, problems):
        if isinstance(problems, str):
            problems = [problems]
        self.problems = list(problems)
        super().__init__("; ".join(self.problems))


class ShapeError(DeepQError, ValueError):
    kind = "shape"


class InputError(DeepQError, ValueError):
    kind = "input"


class ProtocolError(DeepQError, RuntimeError):
    kind = "protocol"


class StateError(DeepQError, RuntimeError):
    kind = "state"


class TrainingError(DeepQError, RuntimeError):
    kind = "training"


class CheckpointError(DeepQError, ValueError):
    """Checkpoint file could not be decoded; ``field`` names the offending part."""

    kind = "format"

    def __init__(self, field, message):
        self.field = field
        super().__init__(f"{field}: {message}")


class OutputError(DeepQError, OSError):
    kind = "io"
