"""Explicit Euler scheme for neutral stochastic delay equations.

The discrete recursion advances the difference X(t) - D(X(t - tau)):

    X(t_{l+1}) = D(X(t_{l+1} - tau)) + X(t_l) - D(X(t_l - tau))
                 + b(X(t_l), X(t_l - tau), t_l) * delta
                 + sigma(X(t_l), X(t_l - tau), t_l) @ dB_l

with X = xi on [-tau, 0].  Because the step divides the delay, the delayed
state is a pure index shift (l - N) and is always already computed, so the
scheme stays fully explicit.

:func:`refine_to` evaluates the continuous-time interpolation of a coarse
solution on a finer grid that shares the same Brownian motion: within a
coarse cell [l*D, (l+1)*D] the drift and diffusion arguments (including the
time) stay frozen at the left endpoint,

    X(t) = D(X(t - tau)) + X(l*D) - D(X(l*D - tau))
           + b(...) * (t - l*D) + sigma(...) @ (B(t) - B(l*D)),

which reproduces the discrete values at the coarse nodes exactly and needs
only fine-grid quantities (the delayed term recurses forward in time
through already-interpolated values).
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .brownian import BrownianPath, coarsen
from .errors import (
    DimensionMismatch,
    IncompatibleGrids,
    IncompatibleNoise,
    InvalidRange,
    NonFiniteState,
)
from .model import DelayGrid, InitialSegment, NsddeModel

# Relative slack when matching a step ratio to an integer.
_RATIO_RTOL = 1e-9


@dataclass(frozen=True)
class PathGrid:
    """One solution path sampled on a delay grid.

    ``values[l + N]`` is the state at grid index ``l`` for
    ``l = -N .. M`` (indices up to 0 hold the sampled initial segment).
    ``noise`` is the Brownian path that drove the solution.  Construction
    fails with :class:`NonFiniteState` if any entry is NaN or infinite —
    diverged paths are reported, never silently kept.
    """

    grid: DelayGrid
    values: np.ndarray
    noise: BrownianPath

    def __post_init__(self):
        n_rows = self.grid.steps_per_delay + self.grid.total_steps + 1
        if self.values.ndim != 2 or self.values.shape[0] != n_rows:
            raise DimensionMismatch(
                f"values shape {self.values.shape} does not match grid ({n_rows} rows)"
            )
        finite = np.isfinite(self.values).all(axis=1)
        if not finite.all():
            bad = int(np.argmin(finite)) - self.grid.steps_per_delay
            raise NonFiniteState(bad, self.grid.time(bad))

    @property
    def state_dim(self) -> int:
        return self.values.shape[1]

    def value(self, index: int) -> np.ndarray:
        """State at signed grid index in [-steps_per_delay, total_steps]."""
        if not -self.grid.steps_per_delay <= index <= self.grid.total_steps:
            raise InvalidRange(f"index {index} outside grid")
        return self.values[index + self.grid.steps_per_delay]


@dataclass(frozen=True)
class PerturbationSeries:
    """Deviation of a path from its last coarse-grid value.

    ``values[j + N]`` holds X(floor-to-coarse(t_j)) - X(t_j) on the fine
    grid; identically zero on [-tau, 0] and at coarse grid points.
    """

    grid: DelayGrid
    coarse_step: float
    values: np.ndarray


def grid_floor_index(delta: float, t: float) -> int:
    """Largest l with l * delta <= t, computed through exact rationals.

    Ratios within relative 1e-9 of an integer snap to it, so grid times
    that only differ from an exact multiple by floating-point rounding are
    treated as lying on the grid.
    """
    if delta <= 0.0:
        raise InvalidRange(f"delta must be positive, got {delta}")
    if t < 0.0:
        raise InvalidRange(f"t must be non-negative, got {t}")
    ratio = Fraction(t) / Fraction(delta)
    nearest = round(ratio)
    if abs(ratio - nearest) <= _RATIO_RTOL * max(1, abs(nearest)):
        return int(nearest)
    return int(ratio // 1)


def grid_floor(delta: float, t: float) -> float:
    """Project t onto the last grid multiple of delta: floor(t / delta) * delta."""
    return float(grid_floor_index(delta, t) * Fraction(delta))


def simulate(
    model: NsddeModel, xi: InitialSegment, grid: DelayGrid, noise: BrownianPath
) -> PathGrid:
    """Run the explicit scheme over the grid, driven by the given increments.

    Raises :class:`NonFiniteState` with the first offending step if the
    path blows up.  Evaluators must return numpy arrays of shape
    ``(state_dim,)`` for drift/neutral and ``(state_dim, noise_dim)`` for
    the diffusion.
    """
    if model.delay != grid.tau:
        raise IncompatibleGrids(f"model delay {model.delay} != grid delay {grid.tau}")
    if noise.grid != grid:
        raise IncompatibleNoise("noise was generated on a different grid")
    if noise.noise_dim != model.noise_dim:
        raise DimensionMismatch(
            f"noise dimension {noise.noise_dim} != model noise_dim {model.noise_dim}"
        )
    if xi.dim != model.state_dim:
        raise DimensionMismatch(f"segment dimension {xi.dim} != state_dim {model.state_dim}")

    n_delay, n_steps = grid.steps_per_delay, grid.total_steps
    vals = np.empty((n_delay + n_steps + 1, model.state_dim))
    vals[: n_delay + 1] = xi.sample(grid)

    neutral, drift, diffusion = model.neutral, model.drift, model.diffusion
    times = grid.times
    steps = noise.increments
    dt = grid.delta
    with np.errstate(all="ignore"):
        for l in range(n_steps):
            il = l + n_delay
            x = vals[il]
            y = vals[l]
            t = times[il]
            vals[il + 1] = (
                neutral(vals[l + 1]) + x - neutral(y)
                + drift(x, y, t) * dt
                + diffusion(x, y, t) @ steps[l]
            )
    return PathGrid(grid, vals, noise)


def refine_to(
    path: PathGrid,
    model: NsddeModel,
    xi: InitialSegment,
    fine_grid: DelayGrid,
    fine_noise: BrownianPath,
) -> PathGrid:
    """Evaluate the continuous interpolation of ``path`` on a nested finer grid.

    ``fine_noise`` must coarsen exactly (bitwise) onto the increments that
    produced ``path`` — the interpolation is only meaningful against the
    same Brownian motion.  Coarse grid values are copied, so the refined
    path agrees with ``path`` at coarse nodes bit-exactly.  With equal
    steps the input path is returned unchanged.
    """
    coarse = path.grid
    if fine_grid.tau != coarse.tau or model.delay != coarse.tau:
        raise IncompatibleGrids("grids must share the delay")
    if fine_grid.steps_per_delay % coarse.steps_per_delay:
        raise IncompatibleGrids(
            f"fine steps per delay {fine_grid.steps_per_delay} not a multiple "
            f"of coarse {coarse.steps_per_delay}"
        )
    factor = fine_grid.steps_per_delay // coarse.steps_per_delay
    if fine_grid.total_steps != factor * coarse.total_steps:
        raise IncompatibleGrids("grids do not share the horizon")
    if fine_noise.grid != fine_grid:
        raise IncompatibleNoise("fine noise was generated on a different grid")
    if fine_noise.noise_dim != model.noise_dim or xi.dim != model.state_dim:
        raise DimensionMismatch("state or noise dimensions disagree")
    if model.state_dim != path.state_dim:
        raise DimensionMismatch("model state_dim does not match the path")
    if factor == 1:
        if not np.array_equal(fine_noise.increments, path.noise.increments):
            raise IncompatibleNoise("noise does not match the increments that drove the path")
        return path
    if not np.array_equal(coarsen(fine_noise, factor).increments, path.noise.increments):
        raise IncompatibleNoise("noise does not coarsen onto the increments that drove the path")

    n_fine, n_coarse = fine_grid.steps_per_delay, coarse.steps_per_delay
    cells = coarse.total_steps
    out = np.empty((n_fine + fine_grid.total_steps + 1, model.state_dim))
    out[: n_fine + 1] = xi.sample(fine_grid)

    neutral, drift, diffusion = model.neutral, model.drift, model.diffusion
    cvals = path.values
    bsum = fine_noise.partial_sums()
    times = fine_grid.times
    # Exact in-cell offsets r * tau / n_fine for r = 1 .. factor - 1.
    frac_tau = Fraction(coarse.tau)
    offs = [float(r * frac_tau / n_fine) for r in range(factor)]

    with np.errstate(all="ignore"):
        for l in range(cells):
            j0 = l * factor
            x = cvals[l + n_coarse]
            y = cvals[l]
            t0 = times[j0 + n_fine]
            base = x - neutral(y)
            bval = drift(x, y, t0)
            sval = diffusion(x, y, t0)
            b0 = bsum[j0]
            for r in range(1, factor):
                j = j0 + r
                out[j + n_fine] = (
                    neutral(out[j]) + base + bval * offs[r] + sval @ (bsum[j] - b0)
                )
            out[j0 + factor + n_fine] = cvals[l + 1 + n_coarse]
    return PathGrid(fine_grid, out, fine_noise)


def perturbation(coarse_on_fine: PathGrid, coarse_step: float) -> PerturbationSeries:
    """Series X(floor-to-coarse(t)) - X(t) over the fine grid of a refined path.

    ``coarse_step`` must be an integer multiple of the path's grid step and
    divide both the delay and the horizon.
    """
    grid = coarse_on_fine.grid
    ratio = coarse_step / grid.delta
    factor = round(ratio)
    if factor < 1 or abs(ratio - factor) > _RATIO_RTOL * factor:
        raise IncompatibleGrids(
            f"coarse step {coarse_step} is not a multiple of the grid step {grid.delta}"
        )
    if grid.steps_per_delay % factor or grid.total_steps % factor:
        raise IncompatibleGrids(f"coarse step {coarse_step} does not divide delay and horizon")

    n_delay = grid.steps_per_delay
    vals = coarse_on_fine.values
    idx = np.arange(grid.total_steps + 1)
    anchor = (idx // factor) * factor
    out = np.zeros_like(vals)
    out[n_delay:] = vals[anchor + n_delay] - vals[idx + n_delay]
    return PerturbationSeries(grid, coarse_step, out)


def truncation_time(path: PathGrid, radius: float) -> float | None:
    """First grid time t >= 0 with |X(t)| > radius / 3, or None if never."""
    if radius <= 0.0:
        raise InvalidRange(f"radius must be positive, got {radius}")
    n_delay = path.grid.steps_per_delay
    norms = np.linalg.norm(path.values[n_delay:], axis=1)
    exceeded = norms > radius / 3.0
    if not exceeded.any():
        return None
    return float(path.grid.times[n_delay + int(np.argmax(exceeded))])
