#!/usr/bin/env python3
"""
Seeding Utility Module

Every run is reproducible from its master seed. Repeats get disjoint child
seeds from numpy's SeedSequence, so they can run in any order (or
concurrently) without sharing a random stream.
"""

import numpy as np


def repeat_seeds(master_seed: int, repeats: int) -> list:
    """One independent 32-bit seed per repeat, derived from the master seed"""
    children = np.random.SeedSequence(master_seed).spawn(repeats)
    return [int(child.generate_state(1)[0]) for child in children]


def make_rng(seed: int) -> np.random.Generator:
    return np.random.default_rng(seed)
