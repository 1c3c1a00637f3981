"""Seeded random corpora shared by the tests and by the constant calibration."""
from __future__ import annotations

import numpy as np

from magnls.grid import Grid
from magnls.scenarios import random_divergence_free, random_nonvanishing_field, random_smooth_field

CORPUS_SIZE = 100
SEED = 20261014


def field_pairs(grid: Grid, count: int = CORPUS_SIZE, seed: int = SEED, a_amplitude: float = 1.0):
    """(u, A) pairs: smooth complex u, real divergence-free A."""
    rng = np.random.default_rng(seed)
    for _ in range(count):
        u = random_smooth_field(grid, rng, 4, amplitude=rng.uniform(0.2, 2.0))
        A = random_divergence_free(grid, rng, 3, amplitude=rng.uniform(0.0, a_amplitude))
        yield u, A


def nonvanishing_pairs(grid: Grid, count: int = CORPUS_SIZE, seed: int = SEED):
    rng = np.random.default_rng(seed)
    for _ in range(count):
        u = random_nonvanishing_field(grid, rng)
        A = random_divergence_free(grid, rng, 3, amplitude=rng.uniform(0.0, 1.0))
        yield u, A


def real_fields(grid: Grid, count: int = CORPUS_SIZE, seed: int = SEED):
    rng = np.random.default_rng(seed)
    for _ in range(count):
        yield random_smooth_field(grid, rng, 6, amplitude=rng.uniform(0.1, 3.0)).real


def complex_fields(grid: Grid, count: int = CORPUS_SIZE, seed: int = SEED):
    rng = np.random.default_rng(seed)
    for _ in range(count):
        yield random_smooth_field(grid, rng, 6, amplitude=rng.uniform(0.1, 3.0))


def standard_corpus_grids():
    return [Grid(1, 128, 32.0), Grid(2, 32, 16.0)]
