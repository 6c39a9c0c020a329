"""Peer-to-peer energy trading with MADDPG battery agents and network tariffs."""

__version__ = "0.1.0"
