"""Extremal search over function tables by smoothed projected gradient ascent.

The objective is the log of an inequality ratio. Both sides are rewritten
with a smoothed vector norm: each squared component gains eps^2 before the
q-th power sum, which makes every objective differentiable and strictly
positive, so the log never sees zero. The sup norm is handled through a
finite surrogate power. Iterates live in the mean-zero subspace (every
objective kills constants), steps use backtracking halving and accept only
strict increases, and each restart draws its start from its own seeded
stream. Scoring between restarts uses the exact evaluators, never the
smoothed values.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from .averaging import box_average_array, check_radius
from .inequalities import (
    RatioReport,
    approximation_ratio,
    enflo_ratio,
    format_cell,
    pisier_ratio,
    scaled_enflo_ratio,
    smoothing_ratio,
)
from .torus import FunctionTable, TorusGeometry, as_exponent, as_norm, sign_vectors

__all__ = [
    "OptimizationConfig",
    "SearchOutcome",
    "ScanRow",
    "SCAN_CSV_COLUMNS",
    "SEARCH_OBJECTIVES",
    "maximize_ratio",
    "gradient_check",
    "default_k_rule",
    "scan_grid",
]

SEARCH_OBJECTIVES = ("scaled_enflo", "smoothing", "approximation", "enflo", "pisier")

# sup norm surrogate power for the smoothed objective only
_SUP_SURROGATE_POWER = 16.0

_MAX_BACKTRACKS = 40
_MAX_DEGENERATE_RESAMPLES = 50


@dataclass(frozen=True)
class OptimizationConfig:
    """Ascent knobs. seed may be a tuple for nested deterministic streams."""

    restarts: int = 6
    iterations: int = 120
    step: float = 0.5
    seed: int | tuple = 0
    smoothing_eps: float = 1e-6

    def __post_init__(self) -> None:
        if not isinstance(self.restarts, int) or self.restarts < 1:
            raise ValueError("restarts must be a positive integer")
        if not isinstance(self.iterations, int) or self.iterations < 1:
            raise ValueError("iterations must be a positive integer")
        if not self.step > 0:
            raise ValueError("step must be positive")
        if not self.smoothing_eps > 0:
            raise ValueError("smoothing_eps must be positive")
        _seed_tuple(self.seed)


def _seed_tuple(seed) -> tuple[int, ...]:
    if isinstance(seed, (tuple, list)):
        if not all(isinstance(s, int) and s >= 0 for s in seed):
            raise ValueError("seed tuple entries must be nonnegative integers")
        return tuple(seed)
    if not isinstance(seed, int) or seed < 0:
        raise ValueError("seed must be a nonnegative integer or a tuple of them")
    return (seed,)


def _smooth_piece(diff: np.ndarray, p: float, q_eff: float, eps: float):
    """Mean smoothed q-norm^p over leading axes, and its gradient in diff."""
    sq = diff * diff + eps * eps
    s = np.sum(sq ** (q_eff / 2.0), axis=-1)
    nrm = s ** (1.0 / q_eff)
    count = nrm.size
    value = float(np.sum(nrm**p)) / count
    weight = (p / count) * nrm ** (p - q_eff)
    grad = weight[..., None] * sq ** ((q_eff - 2.0) / 2.0) * diff
    return value, grad


def _min_mag(*diffs: np.ndarray) -> float:
    worst = math.inf
    for diff in diffs:
        mags = np.sqrt(np.sum(diff * diff, axis=-1))
        if mags.size:
            worst = min(worst, float(mags.min()))
    return worst


@dataclass(frozen=True)
class _Objective:
    name: str
    value_grad: object
    report: object
    min_diff: object


def _make_objective(
    name: str,
    geometry: TorusGeometry,
    d: int,
    norm,
    p: float,
    k: int | None,
    eps: float,
) -> _Objective:
    norm = as_norm(norm)
    p = as_exponent(p)
    q_eff = _SUP_SURROGATE_POWER if math.isinf(norm.q) else float(norm.q)
    n, m = geometry.n, geometry.m
    shape = geometry.shape + (d,)
    grid_axes = tuple(range(n))
    all_axes = tuple(range(n))

    def edge_value_grad(nd):
        total = 0.0
        grad = np.zeros_like(nd)
        for axis in grid_axes:
            diff = np.roll(nd, -1, axis=axis) - nd
            v, g = _smooth_piece(diff, p, q_eff, eps)
            total += v
            grad += np.roll(g, 1, axis=axis) - g
        return total, grad

    def edge_diffs(nd):
        return [np.roll(nd, -1, axis=a) - nd for a in grid_axes]

    if name == "scaled_enflo":
        half = m // 2
        scale = float(m) ** p

        def value_grad(vals):
            nd = vals.reshape(shape)
            diff = np.roll(nd, (-half,) * n, axis=grid_axes) - nd
            lhs, g = _smooth_piece(diff, p, q_eff, eps)
            # the half shift is an involution, hence self adjoint
            glhs = np.roll(g, (half,) * n, axis=grid_axes) - g
            rhs, grhs = edge_value_grad(nd)
            return (
                lhs,
                glhs.reshape(vals.shape),
                scale * rhs,
                scale * grhs.reshape(vals.shape),
            )

        def min_diff(vals):
            nd = vals.reshape(shape)
            diff = np.roll(nd, (-half,) * n, axis=grid_axes) - nd
            return _min_mag(diff, *edge_diffs(nd))

        def report(f):
            return scaled_enflo_ratio(f, norm, p)

    elif name == "approximation":

        def value_grad(vals):
            nd = vals.reshape(shape)
            averaged = box_average_array(geometry, vals, all_axes, k)
            lhs, g = _smooth_piece((averaged - vals).reshape(shape), p, q_eff, eps)
            gflat = g.reshape(vals.shape)
            glhs = box_average_array(geometry, gflat, all_axes, k) - gflat
            rhs, grhs = edge_value_grad(nd)
            scale = float(k - 1) ** p * float(n) ** (p - 1.0)
            return lhs, glhs, scale * rhs, scale * grhs.reshape(vals.shape)

        def min_diff(vals):
            nd = vals.reshape(shape)
            averaged = box_average_array(geometry, vals, all_axes, k)
            return _min_mag((averaged - vals).reshape(shape), *edge_diffs(nd))

        def report(f):
            return approximation_ratio(f, k, norm, p)

    elif name == "smoothing":
        signs = sign_vectors(n)

        def diagonal_diffs(averaged_nd):
            out = []
            for epsv in signs:
                fwd = np.roll(averaged_nd, tuple(int(-e) for e in epsv), axis=grid_axes)
                bwd = np.roll(averaged_nd, tuple(int(e) for e in epsv), axis=grid_axes)
                out.append(fwd - bwd)
            return out

        def value_grad(vals):
            nd = vals.reshape(shape)
            averaged = box_average_array(geometry, vals, all_axes, k)
            and_view = averaged.reshape(shape)
            lhs = 0.0
            gavg = np.zeros_like(and_view)
            for epsv in signs:
                shifts = tuple(int(-e) for e in epsv)
                back = tuple(int(e) for e in epsv)
                diff = np.roll(and_view, shifts, axis=grid_axes) - np.roll(
                    and_view, back, axis=grid_axes
                )
                v, g = _smooth_piece(diff, p, q_eff, eps)
                lhs += v
                gavg += np.roll(g, back, axis=grid_axes)
                gavg -= np.roll(g, shifts, axis=grid_axes)
            count = float(signs.shape[0])
            lhs /= count
            # the box operator is self adjoint, so pull the chain rule through it
            glhs = box_average_array(geometry, gavg.reshape(vals.shape) / count, all_axes, k)
            rhs, grhs = edge_value_grad(nd)
            return lhs, glhs, rhs, grhs.reshape(vals.shape)

        def min_diff(vals):
            nd = vals.reshape(shape)
            averaged = box_average_array(geometry, vals, all_axes, k).reshape(shape)
            return _min_mag(*diagonal_diffs(averaged), *edge_diffs(nd))

        def report(f):
            return smoothing_ratio(f, k, norm, p)

    elif name == "enflo":
        if m != 2:
            raise ValueError("the enflo objective needs a hypercube table")

        def value_grad(vals):
            nd = vals.reshape(shape)
            diff = np.roll(nd, (1,) * n, axis=grid_axes) - nd
            lhs, g = _smooth_piece(diff, p, q_eff, eps)
            glhs = np.roll(g, (1,) * n, axis=grid_axes) - g
            rhs = 0.0
            grhs = np.zeros_like(nd)
            for axis in grid_axes:
                adiff = np.roll(nd, 1, axis=axis) - nd
                v, g = _smooth_piece(adiff, p, q_eff, eps)
                rhs += v
                grhs += np.roll(g, 1, axis=axis) - g
            return lhs, glhs.reshape(vals.shape), rhs, grhs.reshape(vals.shape)

        def min_diff(vals):
            nd = vals.reshape(shape)
            anti = np.roll(nd, (1,) * n, axis=grid_axes) - nd
            return _min_mag(anti, *[np.roll(nd, 1, axis=a) - nd for a in grid_axes])

        def report(f):
            return enflo_ratio(f, norm, p)

    elif name == "pisier":
        if m != 2:
            raise ValueError("the pisier objective needs a hypercube table")
        if not 2 <= n <= 8:
            raise ValueError("the pisier objective needs n in [2, 8]")
        signs = sign_vectors(n).astype(np.float64)
        scale = (math.e * math.log(n)) ** p

        def combo_tensor(nd, count):
            derivs = np.empty((n, count * d))
            for axis in grid_axes:
                derivs[axis] = (np.roll(nd, 1, axis=axis) - nd).reshape(-1)
            return derivs, (signs @ derivs).reshape(signs.shape[0], count, d)

        def value_grad(vals):
            count = vals.shape[0]
            nd = vals.reshape(shape)
            centered = vals - vals.mean(axis=0)
            lhs, g = _smooth_piece(centered, p, q_eff, eps)
            glhs = g - g.mean(axis=0)
            _, combos = combo_tensor(nd, count)
            inner, w = _smooth_piece(combos, p, q_eff, eps)
            per_axis = np.einsum("sj,sxc->jxc", signs, w)
            grhs = np.zeros_like(nd)
            for axis in grid_axes:
                gj = per_axis[axis].reshape(shape)
                # each derivative factor is its own adjoint on the hypercube
                grhs += np.roll(gj, 1, axis=axis) - gj
            return lhs, glhs, scale * inner, scale * grhs.reshape(vals.shape)

        def min_diff(vals):
            count = vals.shape[0]
            nd = vals.reshape(shape)
            centered = vals - vals.mean(axis=0)
            _, combos = combo_tensor(nd, count)
            return _min_mag(centered, combos)

        def report(f):
            return pisier_ratio(f, norm, p)

    else:
        raise ValueError(f"unknown objective {name!r}")

    return _Objective(name=name, value_grad=value_grad, report=report, min_diff=min_diff)


def _project(vals: np.ndarray) -> np.ndarray:
    return vals - vals.mean(axis=0, keepdims=True)


def _ascend(values: np.ndarray, value_grad, step: float, iterations: int):
    """Backtracking ascent on log lhs - log rhs; returns (values, trace, accepted)."""
    vals = _project(values)
    lhs, glhs, rhs, grhs = value_grad(vals)
    best = math.log(lhs) - math.log(rhs)
    trace = [best]
    accepted = 0
    for _ in range(iterations):
        direction = _project(glhs / lhs - grhs / rhs)
        stepsize = step
        moved = False
        for _ in range(_MAX_BACKTRACKS):
            cand = _project(vals + stepsize * direction)
            clhs, cglhs, crhs, cgrhs = value_grad(cand)
            objective = math.log(clhs) - math.log(crhs)
            if objective > best:
                vals, lhs, glhs, rhs, grhs = cand, clhs, cglhs, crhs, cgrhs
                best = objective
                accepted += 1
                moved = True
                break
            stepsize *= 0.5
        trace.append(best)
        if not moved:
            break
    return vals, trace, accepted


@dataclass(frozen=True)
class SearchOutcome:
    """Best table found, its exact report, and which restart produced it."""

    table: FunctionTable
    report: RatioReport
    best_restart: int
    accepted_steps: int
    trace: tuple[float, ...]


def _maximize_full(
    objective: _Objective,
    geometry: TorusGeometry,
    d: int,
    cfg: OptimizationConfig,
) -> SearchOutcome:
    base = _seed_tuple(cfg.seed)
    best = None
    for r in range(cfg.restarts):
        rng = np.random.default_rng(base + (r,))
        start = None
        for _ in range(_MAX_DEGENERATE_RESAMPLES):
            cand = FunctionTable.random_gaussian(geometry, d, rng)
            if not objective.report(cand).degenerate:
                start = cand
                break
        if start is None:
            continue
        vals, trace, accepted = _ascend(
            start.values, objective.value_grad, cfg.step, cfg.iterations
        )
        table = FunctionTable(geometry, vals)
        report = objective.report(table)
        if report.degenerate:
            continue
        if best is None or report.ratio > best.report.ratio:
            best = SearchOutcome(table, report, r, accepted, tuple(trace))
    if best is None:
        raise RuntimeError("every restart produced a degenerate table")
    return best


def maximize_ratio(
    objective: str,
    geometry: TorusGeometry,
    d: int = 1,
    norm=2.0,
    p=2.0,
    k: int | None = None,
    config: OptimizationConfig | None = None,
) -> tuple[FunctionTable, RatioReport]:
    """Search for a table maximizing the named inequality ratio."""
    cfg = config if config is not None else OptimizationConfig()
    norm = as_norm(norm)
    p = as_exponent(p)
    if objective not in SEARCH_OBJECTIVES:
        raise ValueError(f"unknown objective {objective!r}")
    if objective in ("smoothing", "approximation"):
        if k is None:
            raise ValueError(f"objective {objective!r} requires a radius k")
        check_radius(k, geometry.m)
    elif k is not None:
        raise ValueError(f"objective {objective!r} does not take a radius")
    obj = _make_objective(objective, geometry, d, norm, p, k, cfg.smoothing_eps)
    out = _maximize_full(obj, geometry, d, cfg)
    return out.table, out.report


def gradient_check(
    objective: str,
    f: FunctionTable,
    norm,
    p,
    h: float = 1e-5,
    k: int | None = None,
    smoothing_eps: float = 1e-6,
) -> float:
    """Worst relative error of the analytic gradient against central differences.

    Checks the smoothed log-ratio objective at the given table over 20
    coordinates. Refuses p = 1 and tables whose smallest difference vector
    sits at the smoothing scale; both would compare derivatives across a
    near kink, where finite differences say nothing.
    """
    norm = as_norm(norm)
    p = as_exponent(p)
    if not p > 1:
        raise ValueError("gradient checks need p above 1")
    obj = _make_objective(objective, f.geometry, f.d, norm, p, k, smoothing_eps)
    vals = f.values
    if obj.min_diff(vals) < 10.0 * smoothing_eps:
        raise ValueError("table has differences at the smoothing scale")
    lhs, glhs, rhs, grhs = obj.value_grad(vals)
    grad = (glhs / lhs - grhs / rhs).reshape(-1)
    flat = vals.reshape(-1)
    rng = np.random.default_rng(0)
    picks = rng.choice(flat.size, size=min(20, flat.size), replace=False)
    worst = 0.0
    for j in picks:
        plus = flat.copy()
        plus[j] += h
        minus = flat.copy()
        minus[j] -= h
        lp, _, rp, _ = obj.value_grad(plus.reshape(vals.shape))
        lm, _, rm, _ = obj.value_grad(minus.reshape(vals.shape))
        numeric = ((math.log(lp) - math.log(rp)) - (math.log(lm) - math.log(rm))) / (2 * h)
        denom = max(abs(numeric), abs(grad[j]), 1e-8)
        worst = max(worst, abs(numeric - grad[j]) / denom)
    return worst


def default_k_rule(n: int, m: int) -> int:
    """Largest odd radius at most min(m/2 - 1, ceil(n log n)), at least 1."""
    target = 1 if n == 1 else math.ceil(n * math.log(n))
    best = min(m // 2 - 1, target)
    if best % 2 == 0:
        best -= 1
    return max(best, 1)


SCAN_CSV_COLUMNS = (
    "objective",
    "n",
    "m",
    "k",
    "p",
    "q",
    "d",
    "empirical_theta",
    "lhs",
    "rhs",
    "restarts",
    "iterations",
    "seed",
)


@dataclass(frozen=True)
class ScanRow:
    """One search cell: the maximized ratio re-expressed as a scaling exponent."""

    objective: str
    n: int
    m: int | None
    k: int | None
    p: float
    q: float
    d: int
    empirical_theta: float
    lhs: float
    rhs: float
    restarts: int
    iterations: int
    seed: int
    k_capped: bool = False
    best_restart: int = 0

    def to_csv_row(self) -> list[str]:
        return [
            self.objective,
            format_cell(self.n),
            format_cell(self.m),
            format_cell(self.k),
            format_cell(self.p),
            format_cell(self.q),
            format_cell(self.d),
            format_cell(self.empirical_theta),
            format_cell(self.lhs),
            format_cell(self.rhs),
            format_cell(self.restarts),
            format_cell(self.iterations),
            format_cell(self.seed),
        ]


def scan_grid(
    n_values,
    m_values,
    k_rule=None,
    p=2.0,
    q=2.0,
    d: int = 1,
    config: OptimizationConfig | None = None,
    threads: int = 1,
) -> list[ScanRow]:
    """Maximize the half-shift ratio over an (n, m) grid.

    Each cell runs an independent search seeded by (base seed, cell index),
    so results do not depend on the thread count. The radius column records
    what the radius rule picks for the cell; the half-shift objective itself
    does not use it.
    """
    cfg = config if config is not None else OptimizationConfig()
    if not isinstance(cfg.seed, int):
        raise ValueError("scan_grid needs an integer base seed")
    rule = k_rule if k_rule is not None else default_k_rule
    norm = as_norm(q)
    p = as_exponent(p)
    cells = []
    for n in n_values:
        for m in m_values:
            if m % 4 != 0:
                raise ValueError("scan values of m must be divisible by 4")
            cells.append((int(n), int(m)))

    def run(ci: int) -> ScanRow:
        n, m = cells[ci]
        geometry = TorusGeometry(n, m)
        k = rule(n, m)
        check_radius(k, m)
        capped = k < rule(n, 1 << 30)
        cell_cfg = replace(cfg, seed=(cfg.seed, ci))
        obj = _make_objective("scaled_enflo", geometry, d, norm, p, None, cfg.smoothing_eps)
        out = _maximize_full(obj, geometry, d, cell_cfg)
        return ScanRow(
            objective="scaled_enflo",
            n=n,
            m=m,
            k=k,
            p=p,
            q=norm.q,
            d=d,
            empirical_theta=out.report.ratio ** (1.0 / p),
            lhs=out.report.lhs,
            rhs=out.report.rhs,
            restarts=cfg.restarts,
            iterations=out.accepted_steps,
            seed=cfg.seed,
            k_capped=capped,
            best_restart=out.best_restart,
        )

    if threads <= 1:
        return [run(ci) for ci in range(len(cells))]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(run, range(len(cells))))
