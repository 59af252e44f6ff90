"""Blind mmWave beam alignment with a hybrid-action DDPG agent."""

__version__ = "0.1.0"
