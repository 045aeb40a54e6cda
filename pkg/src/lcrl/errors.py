"""Exception types shared across the library."""


class LcrlError(Exception):
    """Base class for library errors."""


class ShapeError(LcrlError):
    """Operands have inconsistent or unsupported dimensions."""


class GraphError(LcrlError):
    """Autodiff misuse, e.g. backward() on a tensor with no recorded graph."""


class ConfigError(LcrlError):
    """Invalid configuration value (bad learning rate, odd K, unknown field, ...)."""


class EpisodeError(LcrlError):
    """Environment stepped after the episode already ended."""


class NotReadyError(LcrlError):
    """Replay buffer holds fewer transitions than its minimum fill level."""
