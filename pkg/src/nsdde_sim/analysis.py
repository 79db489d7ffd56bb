"""Monte Carlo studies built on the coupled Euler scheme.

The central construction: per path, increments are generated once at the
finest step of a ladder, every coarser level is driven by block sums of
those increments (:func:`nsdde_sim.brownian.coarsen`), each level's
solution is interpolated back onto the finest grid, and levels are compared
pathwise in the sup norm over grid points.  Convergence in probability is
then read off the exceedance fractions P(sup-difference > epsilon) along
the ladder.

Paths that blow up are excluded from aggregates and reported separately
via ``diverged_count`` — they are never silently dropped.  All aggregation
is by path index, so results do not depend on execution order; the
optional ``threads`` argument only fans out independent path work.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .brownian import coarsen, generate
from .errors import DegenerateSampling, IncompatibleGrids, InvalidRange, NonFiniteState
from .euler import PathGrid, refine_to, simulate
from .model import DelayGrid, InitialSegment, NsddeModel, make_grid


def _run_paths(worker, n_paths: int, threads: int) -> list:
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(worker, range(n_paths)))
    return [worker(i) for i in range(n_paths)]


def _ladder_grids(tau: float, horizon: float, ladder) -> list[DelayGrid]:
    if len(ladder) < 1:
        raise InvalidRange("ladder must contain at least one step")
    if any(d2 >= d1 for d1, d2 in zip(ladder, ladder[1:])):
        raise InvalidRange(f"ladder must be strictly decreasing, got {list(ladder)}")
    grids = [make_grid(tau, horizon, d) for d in ladder]
    for g1, g2 in zip(grids, grids[1:]):
        if g2.steps_per_delay % g1.steps_per_delay:
            raise IncompatibleGrids(
                f"ladder steps {g1.delta} and {g2.delta} are not nested"
            )
    return grids


@dataclass(frozen=True)
class LevelPairRow:
    """Sup-difference statistics between two consecutive ladder levels."""

    level_pair: str
    delta_coarse: float
    delta_fine: float
    epsilon: float
    n_paths: int
    exceed_count: int
    diverged_count: int
    sup_diffs: np.ndarray  # per-path sup differences, diverged paths omitted

    @property
    def p_hat(self) -> float:
        valid = self.n_paths - self.diverged_count
        return self.exceed_count / valid if valid else 0.0

    @property
    def mean_sup_diff(self) -> float:
        return float(self.sup_diffs.mean()) if self.sup_diffs.size else 0.0

    @property
    def max_sup_diff(self) -> float:
        return float(self.sup_diffs.max()) if self.sup_diffs.size else 0.0

    @property
    def suspect(self) -> bool:
        """True when more than 1% of paths diverged at this level pair.

        Such a row is still reported, but its statistics rest on a
        conditioned sample and should not be trusted at face value.
        """
        return self.diverged_count > 0.01 * self.n_paths


@dataclass(frozen=True)
class ConvergenceTable:
    ladder: tuple
    epsilon: float
    n_paths: int
    rows: tuple


def converge_study(
    model: NsddeModel,
    xi: InitialSegment,
    tau: float,
    horizon: float,
    ladder,
    epsilon: float,
    n_paths: int,
    seed: int,
    threads: int = 1,
) -> ConvergenceTable:
    """Coupled refinement study across a ladder of nested steps.

    For every path the same finest-grid increments drive all levels; each
    level is refined onto the finest grid and consecutive levels are
    compared by their sup difference over grid points in [0, horizon].
    """
    if len(ladder) < 2:
        raise InvalidRange("a convergence study needs at least two ladder levels")
    if epsilon <= 0.0:
        raise InvalidRange(f"epsilon must be positive, got {epsilon}")
    if n_paths < 1:
        raise InvalidRange("n_paths must be >= 1")
    if model.delay != tau:
        raise IncompatibleGrids(f"model delay {model.delay} != requested delay {tau}")
    grids = _ladder_grids(tau, horizon, ladder)
    fine = grids[-1]
    factors = [fine.steps_per_delay // g.steps_per_delay for g in grids]
    skip = fine.steps_per_delay  # compare on [0, horizon] only

    def worker(index: int):
        fine_noise = generate(fine, model.noise_dim, seed, index)
        refined = []
        for grid, factor in zip(grids, factors):
            noise = coarsen(fine_noise, factor) if factor > 1 else fine_noise
            try:
                path = simulate(model, xi, grid, noise)
                refined.append(refine_to(path, model, xi, fine, fine_noise).values[skip:])
            except NonFiniteState:
                refined.append(None)
        sups = []
        for lo, hi in zip(refined, refined[1:]):
            if lo is None or hi is None:
                sups.append(None)
            else:
                sups.append(float(np.linalg.norm(lo - hi, axis=1).max()))
        return sups

    results = _run_paths(worker, n_paths, threads)
    rows = []
    for pair_index in range(len(grids) - 1):
        sups = np.array(
            [r[pair_index] for r in results if r[pair_index] is not None], dtype=float
        )
        diverged = n_paths - sups.size
        rows.append(
            LevelPairRow(
                level_pair=f"{pair_index}-{pair_index + 1}",
                delta_coarse=grids[pair_index].delta,
                delta_fine=grids[pair_index + 1].delta,
                epsilon=epsilon,
                n_paths=n_paths,
                exceed_count=int((sups > epsilon).sum()),
                diverged_count=diverged,
                sup_diffs=sups,
            )
        )
    return ConvergenceTable(tuple(ladder), epsilon, n_paths, tuple(rows))


def exceedance_trend_ok(table: ConvergenceTable, z: float = 1.96) -> bool:
    """True when exceedance fractions are non-increasing along the ladder,
    allowing upticks within a z-score band of the pooled binomial error."""
    for lo, hi in zip(table.rows, table.rows[1:]):
        n1 = max(lo.n_paths - lo.diverged_count, 1)
        n2 = max(hi.n_paths - hi.diverged_count, 1)
        p1, p2 = lo.p_hat, hi.p_hat
        band = z * np.sqrt(p1 * (1 - p1) / n1 + p2 * (1 - p2) / n2)
        if p2 - p1 > band + 1e-12:
            return False
    return True


@dataclass(frozen=True)
class PerturbationRow:
    level: int
    delta: float
    mean_abs_integral: float
    mean_weighted_integral: float
    diverged_count: int


@dataclass(frozen=True)
class PerturbationTable:
    radius: float
    n_paths: int
    rows: tuple


def perturbation_integrability(
    model: NsddeModel,
    xi: InitialSegment,
    tau: float,
    horizon: float,
    ladder,
    n_paths: int,
    seed: int,
    radius: float,
    weight: Callable[[float], float],
    threads: int = 1,
) -> PerturbationTable:
    """Mean integrals of the deviation from the last coarse node, per level.

    For each ladder level the solution is refined onto the finest grid and
    the deviation p(t) = X(floor-to-coarse(t)) - X(t) is integrated over
    [0, min(horizon, first time |X| > radius/3)], both plainly and with the
    time weight applied.  Quadrature is per fine interval with the
    interval's own coarse anchor, so the piecewise behaviour of p at
    coarse nodes is integrated exactly (the estimator reproduces the
    closed form c*M*delta^2/2 for constant drift to rounding error).
    """
    if radius <= 0.0 or n_paths < 1:
        raise InvalidRange("need a positive radius and n_paths >= 1")
    if model.delay != tau:
        raise IncompatibleGrids(f"model delay {model.delay} != requested delay {tau}")
    grids = _ladder_grids(tau, horizon, ladder)
    fine = grids[-1]
    factors = [fine.steps_per_delay // g.steps_per_delay for g in grids]
    n_fine, m_fine = fine.steps_per_delay, fine.total_steps
    delta_f = fine.delta
    times = fine.times[n_fine:]
    weights = np.array([float(weight(float(t))) for t in times])
    threshold = radius / 3.0

    # interval anchors: coarse cell start for each fine interval j -> j+1
    interval_idx = np.arange(m_fine)
    anchor_per_level = [(interval_idx // f) * f for f in factors]

    def worker(index: int):
        fine_noise = generate(fine, model.noise_dim, seed, index)
        out = []
        for grid, factor, anchors in zip(grids, factors, anchor_per_level):
            noise = coarsen(fine_noise, factor) if factor > 1 else fine_noise
            try:
                path = simulate(model, xi, grid, noise)
                ref = refine_to(path, model, xi, fine, fine_noise).values[n_fine:]
            except NonFiniteState:
                out.append(None)
                continue
            norms = np.linalg.norm(ref, axis=1)
            exceeded = norms > threshold
            stop = int(np.argmax(exceeded)) if exceeded.any() else m_fine
            if stop == 0:
                out.append((0.0, 0.0))
                continue
            cells = anchors[:stop]
            left = np.linalg.norm(ref[cells] - ref[:stop], axis=1)
            right = np.linalg.norm(ref[cells] - ref[1 : stop + 1], axis=1)
            abs_int = 0.5 * delta_f * float((left + right).sum())
            w_int = 0.5 * delta_f * float(
                (left * weights[:stop] + right * weights[1 : stop + 1]).sum()
            )
            out.append((abs_int, w_int))
        return out

    results = _run_paths(worker, n_paths, threads)
    rows = []
    for level, grid in enumerate(grids):
        vals = [r[level] for r in results if r[level] is not None]
        diverged = n_paths - len(vals)
        if vals:
            abs_mean = float(np.mean([v[0] for v in vals]))
            w_mean = float(np.mean([v[1] for v in vals]))
        else:
            abs_mean = w_mean = 0.0
        rows.append(PerturbationRow(level, grid.delta, abs_mean, w_mean, diverged))
    return PerturbationTable(radius, n_paths, tuple(rows))


@dataclass(frozen=True)
class MomentReport:
    """Second-moment summaries of |X| over [0, horizon].

    ``sup_mean_square`` is the largest grid-time mean of |X(t)|^2 and
    ``std_error`` its Monte Carlo standard error at the attaining time
    ``sup_time``; ``mean_sup_square`` averages the pathwise suprema.
    """

    delta: float
    n_paths: int
    diverged_count: int
    sup_mean_square: float
    mean_sup_square: float
    std_error: float
    sup_time: float


def estimate_moments(
    model: NsddeModel,
    xi: InitialSegment,
    tau: float,
    horizon: float,
    delta: float,
    n_paths: int,
    seed: int,
    threads: int = 1,
) -> MomentReport:
    """Estimate sup-of-mean-square and mean-of-sup-square over grid times."""
    if n_paths < 2:
        raise InvalidRange("need n_paths >= 2 for a standard error")
    if model.delay != tau:
        raise IncompatibleGrids(f"model delay {model.delay} != requested delay {tau}")
    grid = make_grid(tau, horizon, delta)
    n0 = grid.steps_per_delay

    def worker(index: int):
        noise = generate(grid, model.noise_dim, seed, index)
        try:
            path = simulate(model, xi, grid, noise)
        except NonFiniteState:
            return None
        sq = np.einsum("ij,ij->i", path.values[n0:], path.values[n0:])
        return sq

    results = _run_paths(worker, n_paths, threads)
    curves = [r for r in results if r is not None]
    diverged = n_paths - len(curves)
    if not curves:
        raise DegenerateSampling("every simulated path diverged")
    stacked = np.array(curves)
    mean_curve = stacked.mean(axis=0)
    peak = int(np.argmax(mean_curve))
    used = stacked.shape[0]
    spread = float(stacked[:, peak].std(ddof=1)) if used > 1 else 0.0
    return MomentReport(
        delta=grid.delta,
        n_paths=n_paths,
        diverged_count=diverged,
        sup_mean_square=float(mean_curve[peak]),
        mean_sup_square=float(stacked.max(axis=1).mean()),
        std_error=spread / np.sqrt(used),
        sup_time=float(grid.times[n0 + peak]),
    )


def power_split_bound(a, b, p: float, epsilon: float):
    """Both sides of |a+b|^p <= (1 + eps^(1/(p-1)))^(p-1) (|a|^p + |b|^p / eps).

    Accepts scalars or arrays; returns (lhs, rhs) elementwise.  Valid for
    p > 1 and epsilon > 0.
    """
    if p <= 1.0:
        raise InvalidRange(f"p must exceed 1, got {p}")
    if epsilon <= 0.0:
        raise InvalidRange(f"epsilon must be positive, got {epsilon}")
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    lhs = np.abs(a + b) ** p
    # the constant can overflow double precision for p near 1; the bound
    # then holds trivially, so saturate to inf rather than raise
    with np.errstate(over="ignore", invalid="ignore"):
        constant = (1.0 + np.float64(epsilon) ** (1.0 / (p - 1.0))) ** (p - 1.0)
        term = np.abs(a) ** p + np.abs(b) ** p / epsilon
        rhs = constant * term
    if np.isinf(constant):
        rhs = np.where(term == 0.0, 0.0, rhs)
    return lhs, rhs


def check_contraction_sup_bound(
    path: PathGrid, neutral, kappa: float, p: float = 2.0
) -> tuple[bool, int | None]:
    """Prefix inequality tying sup |X| to sup |X - D(X_delayed)|.

    For every prefix L >= 0 checks

        sup_{l<=L} |X(t_l)|^p <= kappa/(1-kappa) * ||xi||^p
                                 + sup_{l<=L} |X(t_l) - D(X(t_l - tau))|^p
                                   / (1-kappa)^p

    where ||xi|| is the sup over the sampled initial segment.  Holds for
    any path of a model whose neutral map is a kappa-contraction with
    D(0) = 0.  Returns (ok, first violating prefix index or None).
    """
    if not 0.0 < kappa < 1.0:
        raise InvalidRange(f"kappa must lie in (0, 1), got {kappa}")
    if p <= 1.0:
        raise InvalidRange(f"p must exceed 1, got {p}")
    n0 = path.grid.steps_per_delay
    norms = np.linalg.norm(path.values, axis=1)
    seg_norm = float(norms[: n0 + 1].max())

    states = path.values[n0:]
    delayed = path.values[: path.grid.total_steps + 1]
    diff_norms = np.empty(len(states))
    for l in range(len(states)):
        dv = np.asarray(neutral(delayed[l]), dtype=float)
        diff_norms[l] = np.linalg.norm(states[l] - dv)

    sup_state = np.maximum.accumulate(norms[n0:])
    sup_diff = np.maximum.accumulate(diff_norms)
    lhs = sup_state**p
    rhs = (kappa / (1.0 - kappa)) * seg_norm**p + sup_diff**p / (1.0 - kappa) ** p
    bad = lhs > rhs + 1e-9 * np.maximum(1.0, rhs)
    if bad.any():
        return False, int(np.argmax(bad))
    return True, None
