"""Recurrent PPO trading agent with xLSTM actor and critic towers."""

__version__ = "0.1.0"
