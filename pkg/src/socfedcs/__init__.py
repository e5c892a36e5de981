"""Round-based simulator and optimization library for multi-tier
federated-learning client selection in mobile networks."""

__version__ = "0.1.0"
