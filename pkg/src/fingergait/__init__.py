"""Planar in-hand reorientation testbed.

A small, fully deterministic stack for studying how exploration trees turn
into reset distributions for reinforcement learning on an in-hand rotation
task: a planar three-finger hand, a quasi-dynamic contact simulator, two
rapidly-exploring tree planners, reset-set extraction, and an on-policy
actor-critic trainer with manual gradients.
"""

__version__ = "0.1.0"
