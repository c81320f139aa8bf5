"""Semantics-aware scheduling of downlink UAV command-and-control traffic.

Subpackages: channel (air-to-ground link), traffic (packet streams),
semantics (value-of-information scores), env (per-TTI scheduling
environment), neural (recurrent Q-network), agent (DDQN training and
reference policies), harness (experiment campaigns and file formats).
"""

__version__ = "0.1.0"
