"""Constrained optimization over simplices and stochastic kernels.

Three pieces live here:

* exhaustive search over the rational grid of joint distributions with
  denominator k, intersected with exact marginal constraints and an
  optional mutual-information cap;
* local refinement from the best grid point, moving inside the
  marginal-preserving affine subspace and rejecting steps that break
  the information constraint;
* 1-D golden-section search, including the concave search over the
  tilting parameter rho used by the exponent routines.

Everything is deterministic: grid points are visited in a fixed
lexicographic order, ties in value are broken by the lowest index, and
parallel evaluation reduces over fixed chunk boundaries so the result
is independent of the worker count.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Iterator

import numpy as np

from .measures import (
    Distribution,
    DistributionError,
    compositions,
    mutual_information_array,
)

#: Slack applied to the information constraint at grid points.
INFO_SLACK = 1e-9

_INVPHI = (math.sqrt(5.0) - 1.0) / 2.0
_INVPHI2 = (3.0 - math.sqrt(5.0)) / 2.0


class InfeasibleGridError(ValueError):
    """The requested grid cannot represent the constraints.

    Carries a human-readable diagnostic; when a marginal is not exactly
    representable at the resolution, ``suggestion`` holds the nearest
    integer composition (counts summing to the resolution).
    """

    def __init__(self, message: str, suggestion: np.ndarray | None = None):
        super().__init__(message)
        self.suggestion = suggestion


@dataclass(frozen=True)
class GridSpec:
    """Resolution and refinement knobs for grid searches.

    ``resolution`` is the denominator k: grid distributions have all
    entries in {0, 1/k, ..., 1}.  ``inner_budget`` caps the number of
    enumerated points in nested searches; callers coarsen automatically
    when the nominal resolution would blow past it.  ``workers`` and
    ``chunk_size`` control deterministic parallel evaluation.
    """

    resolution: int
    refine: bool = True
    refine_tolerance: float = 1e-7
    max_refine_iters: int = 500
    inner_budget: int = 2_000_000
    chunk_size: int = 1 << 18
    workers: int = 1

    def __post_init__(self) -> None:
        if self.resolution < 2:
            raise DistributionError(f"grid resolution must be >= 2, got {self.resolution}")
        if self.refine_tolerance <= 0 or self.max_refine_iters < 1:
            raise DistributionError("refinement parameters must be positive")
        if self.inner_budget < 1 or self.chunk_size < 1 or self.workers < 1:
            raise DistributionError("budget, chunk size and workers must be >= 1")


@dataclass(frozen=True)
class FeasibleSet:
    """Constraints on a joint distribution of the given shape.

    Either marginal may be pinned to a fixed distribution; an optional
    upper bound on the mutual information of the joint completes the
    set.  The information bound is enforced with slack ``INFO_SLACK``
    at grid points and by step rejection during refinement.
    """

    shape: tuple[int, int]
    row_margin: Distribution | None = None
    col_margin: Distribution | None = None
    info_bound: float | None = None

    def __post_init__(self) -> None:
        r, c = self.shape
        if r < 1 or c < 1:
            raise DistributionError(f"bad joint shape {self.shape}")
        if self.row_margin is not None and self.row_margin.size != r:
            raise DistributionError("row margin size does not match shape")
        if self.col_margin is not None and self.col_margin.size != c:
            raise DistributionError("column margin size does not match shape")
        if self.info_bound is not None and self.info_bound < 0:
            raise DistributionError("information bound must be >= 0 when present")

    def contains(self, joint: np.ndarray, margin_tol: float = 1e-9) -> bool:
        if joint.shape != self.shape or np.any(joint < -margin_tol):
            return False
        if self.row_margin is not None:
            if np.max(np.abs(joint.sum(axis=1) - self.row_margin.p)) > margin_tol:
                return False
        if self.col_margin is not None:
            if np.max(np.abs(joint.sum(axis=0) - self.col_margin.p)) > margin_tol:
                return False
        if self.info_bound is not None:
            if mutual_information_array(np.maximum(joint, 0.0)) > self.info_bound + INFO_SLACK:
                return False
        return True


@dataclass(frozen=True)
class GridSearchResult:
    value: float
    argmin: np.ndarray
    index: int
    n_feasible: int
    refined: bool


def margin_counts(margin: Distribution, k: int) -> np.ndarray:
    """k times the margin as exact integers; reject non-grid margins.

    The error carries the nearest representable composition (largest
    remainder rounding) so callers can retry with a valid composition.
    """
    target = margin.p * k
    counts = np.rint(target)
    if np.max(np.abs(target - counts)) > 1e-9:
        near = nearest_grid_composition(margin.p, k)
        raise InfeasibleGridError(
            f"margin times resolution {k} is not integral; "
            f"nearest representable counts: {near.tolist()}",
            suggestion=near,
        )
    return counts.astype(np.int64)


def nearest_grid_composition(margin: np.ndarray, k: int) -> np.ndarray:
    """Largest-remainder rounding of k*margin to integer counts summing to k."""
    target = np.asarray(margin, dtype=np.float64) * k
    base = np.floor(target).astype(np.int64)
    short = k - int(base.sum())
    if short > 0:
        order = np.argsort(-(target - base), kind="stable")
        base[order[:short]] += 1
    return base


def _bounded_compositions(total: int, caps: tuple[int, ...]) -> Iterator[tuple[int, ...]]:
    # Lexicographically ascending compositions of `total` with per-part caps.
    if len(caps) == 1:
        if total <= caps[0]:
            yield (total,)
        return
    tail_room = sum(caps[1:])
    for first in range(min(total, caps[0]) + 1):
        if total - first <= tail_room:
            for rest in _bounded_compositions(total - first, caps[1:]):
                yield (first,) + rest


def enumerate_margin_tables(row_counts: np.ndarray, col_counts: np.ndarray) -> Iterator[np.ndarray]:
    """Integer contingency tables with the given margins, in lex order.

    Lex order means the first row varies slowest and rows themselves are
    produced lexicographically; the final row is forced by the column
    margins.
    """
    r = len(row_counts)
    col0 = np.asarray(col_counts, dtype=np.int64)

    def rec(i: int, rows: list[tuple[int, ...]], col_left: np.ndarray) -> Iterator[np.ndarray]:
        if i == r - 1:
            if np.all(col_left >= 0) and col_left.sum() == row_counts[i]:
                yield np.array(rows + [tuple(int(c) for c in col_left)], dtype=np.int64)
            return
        for comp in _bounded_compositions(int(row_counts[i]), tuple(int(c) for c in col_left)):
            yield from rec(i + 1, rows + [comp], col_left - np.array(comp, dtype=np.int64))

    if int(row_counts.sum()) != int(col0.sum()):
        return iter(())
    return rec(0, [], col0.copy())


def _grid_points(feasible: FeasibleSet, grid: GridSpec) -> Iterator[np.ndarray]:
    """All grid joints meeting the marginal constraints, in lex order.

    Both margins pinned: contingency tables divided by k.  One margin
    pinned: a denominator-k kernel row per positive-mass conditioning
    symbol (works even when the pinned margin itself is off-grid).  No
    margins: the whole simplex grid.
    """
    k = grid.resolution
    rows, cols = feasible.shape
    rm, cm = feasible.row_margin, feasible.col_margin
    if rm is not None and cm is not None:
        rc = margin_counts(rm, k)
        cc = margin_counts(cm, k)
        for table in enumerate_margin_tables(rc, cc):
            yield table.astype(np.float64) / k
    elif rm is not None or cm is not None:
        transpose = rm is None
        margin = (cm if transpose else rm).p
        n_free = rows if transpose else cols
        options = compositions(k, n_free).astype(np.float64) / k
        pos = [i for i in range(margin.size) if margin[i] > 0]
        idx = np.zeros(len(pos), dtype=np.int64)
        n_opt = options.shape[0]
        base = np.zeros((margin.size, n_free))
        base[margin <= 0] = 1.0 / n_free  # dead rows: any kernel, pick uniform
        while True:
            joint = base.copy()
            for slot, i in enumerate(pos):
                joint[i] = options[idx[slot]]
            joint = joint * margin[:, None]
            yield joint.T.copy() if transpose else joint
            # odometer increment, last slot fastest
            slot = len(pos) - 1
            while slot >= 0:
                idx[slot] += 1
                if idx[slot] < n_opt:
                    break
                idx[slot] = 0
                slot -= 1
            if slot < 0:
                break
    else:
        for comp in compositions(k, rows * cols):
            yield comp.astype(np.float64).reshape(rows, cols) / k


def grid_minimize(
    objective: Callable[[np.ndarray], float],
    feasible: FeasibleSet,
    grid: GridSpec,
) -> GridSearchResult:
    """Exhaustive minimum of the objective over the feasible grid.

    The objective receives a plain (rows, cols) array representing the
    joint.  Ties in value go to the earliest grid index.  When
    ``grid.refine`` is set, projected coordinate descent polishes the
    best grid point inside the marginal-preserving subspace.

    Raises InfeasibleGridError when no grid point satisfies the
    constraints (resolution too coarse).
    """
    bound = feasible.info_bound
    best_val = math.inf
    best_arg: np.ndarray | None = None
    best_idx = -1
    n_feasible = 0
    for i, joint in enumerate(_grid_points(feasible, grid)):
        if bound is not None and mutual_information_array(joint) > bound + INFO_SLACK:
            continue
        n_feasible += 1
        v = objective(joint)
        if v < best_val:
            best_val, best_arg, best_idx = v, joint, i
    if best_arg is None:
        raise InfeasibleGridError(
            f"no feasible grid point at resolution {grid.resolution}: resolution too coarse"
        )
    refined = False
    if grid.refine and math.isfinite(best_val):
        new_val, new_arg = refine_joint(objective, best_arg, feasible, grid)
        if new_val < best_val:
            best_val, best_arg, refined = new_val, new_arg, True
    return GridSearchResult(best_val, best_arg, best_idx, n_feasible, refined)


def grid_maximize(
    objective: Callable[[np.ndarray], float],
    feasible: FeasibleSet,
    grid: GridSpec,
) -> GridSearchResult:
    """Mirror of grid_minimize; ties go to the earliest grid index."""
    res = grid_minimize(lambda p: -objective(p), feasible, grid)
    return GridSearchResult(-res.value, res.argmin, res.index, res.n_feasible, res.refined)


def move_directions(feasible: FeasibleSet) -> list[np.ndarray]:
    """Unit moves spanning the constraint-preserving subspace.

    Both margins pinned: 2x2 minor swaps.  Row margin pinned: transfers
    within a row.  Column margin pinned: transfers within a column.  No
    margins: transfers between any two cells.
    """
    rows, cols = feasible.shape
    dirs: list[np.ndarray] = []

    def d(assign: list[tuple[int, int, float]]) -> np.ndarray:
        m = np.zeros((rows, cols))
        for i, j, v in assign:
            m[i, j] = v
        return m

    if feasible.row_margin is not None and feasible.col_margin is not None:
        for i1 in range(rows):
            for i2 in range(i1 + 1, rows):
                for j1 in range(cols):
                    for j2 in range(j1 + 1, cols):
                        dirs.append(
                            d([(i1, j1, 1.0), (i2, j2, 1.0), (i1, j2, -1.0), (i2, j1, -1.0)])
                        )
    elif feasible.row_margin is not None:
        for i in range(rows):
            for j1 in range(cols):
                for j2 in range(j1 + 1, cols):
                    dirs.append(d([(i, j1, 1.0), (i, j2, -1.0)]))
    elif feasible.col_margin is not None:
        for j in range(cols):
            for i1 in range(rows):
                for i2 in range(i1 + 1, rows):
                    dirs.append(d([(i1, j, 1.0), (i2, j, -1.0)]))
    else:
        flat = [(i, j) for i in range(rows) for j in range(cols)]
        for a in range(len(flat)):
            for b in range(a + 1, len(flat)):
                i1, j1 = flat[a]
                i2, j2 = flat[b]
                dirs.append(d([(i1, j1, 1.0), (i2, j2, -1.0)]))
    return dirs


def _step_range(p: np.ndarray, direction: np.ndarray) -> tuple[float, float]:
    # Largest interval [lo, hi] with p + t*direction >= 0 elementwise.
    lo, hi = -math.inf, math.inf
    it = np.nditer(direction, flags=["multi_index"])
    for v in it:
        dv = float(v)
        if dv == 0.0:
            continue
        cell = float(p[it.multi_index])
        if dv > 0:
            lo = max(lo, -cell / dv)
        else:
            hi = min(hi, cell / -dv)
    if lo == -math.inf:
        lo = 0.0
    if hi == math.inf:
        hi = 0.0
    return lo, hi


def refine_joint(
    objective: Callable[[np.ndarray], float],
    start: np.ndarray,
    feasible: FeasibleSet,
    grid: GridSpec,
) -> tuple[float, np.ndarray]:
    """Coordinate descent along constraint-preserving directions.

    Sweeps all directions with a golden-section line search on each;
    steps that violate the information bound are rejected.  Stops when a
    full sweep improves by less than ``grid.refine_tolerance`` or after
    ``grid.max_refine_iters`` sweeps.  Never returns a worse point than
    ``start``.
    """
    p = start.copy()
    cur = objective(p)
    bound = feasible.info_bound
    dirs = move_directions(feasible)
    tol = grid.refine_tolerance
    for _ in range(grid.max_refine_iters):
        sweep_gain = 0.0
        for direction in dirs:
            lo, hi = _step_range(p, direction)
            if hi - lo <= 1e-15:
                continue

            def along(t: float) -> float:
                return objective(np.maximum(p + t * direction, 0.0))

            t_best, f_best = golden_section_minimize(along, lo, hi, tol * 1e-2)
            if f_best < cur - 1e-15 and abs(t_best) > 0:
                cand = np.maximum(p + t_best * direction, 0.0)
                if bound is not None and mutual_information_array(cand) > bound + INFO_SLACK:
                    continue
                sweep_gain += cur - f_best
                p, cur = cand, f_best
        if sweep_gain < tol:
            break
    return cur, p


def golden_section_minimize(
    f: Callable[[float], float], lo: float, hi: float, tol: float, max_iters: int = 200
) -> tuple[float, float]:
    """Golden-section minimum of a unimodal function on [lo, hi].

    Endpoints are evaluated too, so boundary minima are exact; among
    ties the leftmost probed point wins.  Returns (argmin, value).
    """
    if hi < lo:
        raise ValueError(f"empty interval [{lo}, {hi}]")
    flo = f(lo)
    if hi == lo:
        return lo, flo
    fhi = f(hi)
    best_x, best_f = (lo, flo) if flo <= fhi else (hi, fhi)
    a, b = lo, hi
    h = b - a
    c = a + _INVPHI2 * h
    d = a + _INVPHI * h
    fc, fd = f(c), f(d)
    for _ in range(max_iters):
        if h <= tol:
            break
        if fc < fd:
            b, d, fd = d, c, fc
            h = b - a
            c = a + _INVPHI2 * h
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            h = b - a
            d = a + _INVPHI * h
            fd = f(d)
    for x, fx in ((c, fc), (d, fd)):
        if fx < best_f:
            best_x, best_f = x, fx
    return best_x, best_f


def concave_search_rho(
    inner: Callable[[float], float], lo: float = 1.0, hi: float = 64.0, tol: float = 1e-9
) -> tuple[float, float, bool]:
    """Maximum of a concave function of rho on [lo, hi].

    The inner function is typically a pointwise minimum of affine
    functions of rho, hence concave.  Returns (rho_star, value,
    boundary_flag) with boundary_flag set when the maximum sits against
    the upper cap, signaling the true supremum may be beyond it.
    """
    if not (lo >= 1.0 and hi >= lo):
        raise ValueError(f"rho interval must satisfy 1 <= lo <= hi, got [{lo}, {hi}]")
    x, neg = golden_section_minimize(lambda r: -inner(r), lo, hi, tol)
    return x, -neg, (hi - x) < max(tol, 1e-9)


def ordered_chunk_map(
    fn: Callable[[int, int], object], n_items: int, chunk_size: int, workers: int
) -> list[object]:
    """Apply fn(start, stop) over fixed chunks; results in chunk order.

    Chunk boundaries depend only on chunk_size, never on the worker
    count, so any downstream reduction done in list order is bit-stable
    across worker counts.
    """
    spans = [(s, min(s + chunk_size, n_items)) for s in range(0, n_items, chunk_size)]
    if not spans:
        return []
    if workers <= 1 or len(spans) == 1:
        return [fn(s, e) for s, e in spans]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(lambda se: fn(se[0], se[1]), spans))
