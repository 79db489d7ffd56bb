"""Brownian increments on delay grids, with coupled coarse/fine refinement.

Stream derivation is pinned so results are reproducible and order
independent: path ``i`` draws from a Philox(4x64-10) bit generator keyed by
``SeedSequence(entropy=seed, spawn_key=(path_index,))``, transformed by
numpy's ziggurat ``standard_normal`` and scaled by ``sqrt(delta)``.  Paths
can therefore be generated in any order, or in parallel, without changing
any stream.

Refinement works by aggregation: increments are generated at the finest
grid in play and coarser drivers are obtained by summing blocks of fine
increments (:func:`coarsen`).  All levels then share one underlying
Brownian motion, which is what makes pathwise comparison of schemes across
step sizes meaningful.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch, IncompatibleFactor, InvalidRange
from .model import DelayGrid


@dataclass(frozen=True)
class BrownianPath:
    """Increments of one Brownian path over a grid.

    ``increments[l, j]`` is component ``j`` of B(t_{l+1}) - B(t_l) for
    l = 0 .. total_steps - 1.  ``seed`` and ``path_index`` record the stream
    the path was drawn from (coarsened paths keep the originals).
    """

    grid: DelayGrid
    noise_dim: int
    increments: np.ndarray
    seed: int
    path_index: int

    def __post_init__(self):
        if self.noise_dim < 1:
            raise InvalidRange("noise_dim must be >= 1")
        if self.increments.shape != (self.grid.total_steps, self.noise_dim):
            raise DimensionMismatch(
                f"increments shape {self.increments.shape} does not match "
                f"({self.grid.total_steps}, {self.noise_dim})"
            )

    def partial_sums(self) -> np.ndarray:
        """B(t_l) - B(0) for l = 0 .. total_steps, shape (M + 1, noise_dim)."""
        out = np.zeros((self.grid.total_steps + 1, self.noise_dim))
        np.cumsum(self.increments, axis=0, out=out[1:])
        return out

    def to_bytes(self) -> bytes:
        """Increments as little-endian float64, row-major [step][component]."""
        return np.ascontiguousarray(self.increments, dtype="<f8").tobytes()


def generate(grid: DelayGrid, noise_dim: int, seed: int, path_index: int) -> BrownianPath:
    """Draw the increments of path ``path_index`` from the stream family ``seed``.

    Each component of each increment is an independent draw from
    N(0, delta).  Regenerating with identical arguments is bit-exact.
    """
    if noise_dim < 1:
        raise InvalidRange("noise_dim must be >= 1")
    if seed < 0 or path_index < 0:
        raise InvalidRange("seed and path_index must be non-negative integers")
    ss = np.random.SeedSequence(entropy=seed, spawn_key=(path_index,))
    rng = np.random.Generator(np.random.Philox(ss))
    scale = math.sqrt(grid.delta)
    increments = rng.standard_normal((grid.total_steps, noise_dim)) * scale
    return BrownianPath(grid, noise_dim, increments, seed, path_index)


def coarsen(path: BrownianPath, factor: int) -> BrownianPath:
    """Aggregate blocks of ``factor`` fine increments into one coarse driver.

    Coarse increment ``l`` is the sum of fine increments
    ``factor*l .. factor*l + factor - 1``, so both paths sample the same
    underlying Brownian motion.  ``factor`` must be an integer >= 2 dividing
    both the delay and the horizon step counts.
    """
    if factor != int(factor) or factor < 2:
        raise IncompatibleFactor(f"factor must be an integer >= 2, got {factor}")
    factor = int(factor)
    grid = path.grid
    if grid.total_steps % factor or grid.steps_per_delay % factor:
        raise IncompatibleFactor(
            f"factor {factor} does not divide step counts "
            f"({grid.steps_per_delay} per delay, {grid.total_steps} total)"
        )
    coarse_grid = DelayGrid(
        grid.tau, grid.horizon, grid.steps_per_delay // factor, grid.total_steps // factor
    )
    blocks = path.increments.reshape(grid.total_steps // factor, factor, path.noise_dim)
    return BrownianPath(
        coarse_grid, path.noise_dim, _pairwise_block_sum(blocks), path.seed, path.path_index
    )


def _pairwise_block_sum(blocks: np.ndarray) -> np.ndarray:
    """Sum axis 1 by pairing adjacent entries, so that coarsening by 2 twice
    is bit-identical to coarsening by 4 in one go."""
    while blocks.shape[1] > 1:
        width = blocks.shape[1]
        if width % 2:
            paired = blocks[:, : width - 1 : 2] + blocks[:, 1::2]
            blocks = np.concatenate([paired, blocks[:, -1:]], axis=1)
        else:
            blocks = blocks[:, 0::2] + blocks[:, 1::2]
    return blocks[:, 0]
