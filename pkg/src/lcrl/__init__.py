"""DQN training stack with a locally constrained representation auxiliary loss."""

__version__ = "0.1.0"
