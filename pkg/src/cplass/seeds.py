"""Deterministic seed derivation for batch work.

Every batch driver derives per-task generators from a master seed as
``SeedSequence(master, spawn_key=(index,))``; the assignment depends only on
the task index, never on scheduling order, so parallel runs reproduce serial
ones bit for bit.
"""

from __future__ import annotations

import numpy as np

__all__ = ["child_sequence", "child_rng"]


def child_sequence(master_seed: int, index: int) -> np.random.SeedSequence:
    """The ``index``-th child seed sequence of a master seed."""
    return np.random.SeedSequence(master_seed, spawn_key=(index,))


def child_rng(master_seed: int, index: int) -> np.random.Generator:
    """Generator seeded from :func:`child_sequence`."""
    return np.random.default_rng(child_sequence(master_seed, index))
