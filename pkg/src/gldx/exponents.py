"""Error-exponent objectives for stochastic metric decoding.

The expurgated exponent of a constant-composition code under a
generalized likelihood decoder is a nested optimization: an inner
infimum over channel-behavior kernels given a codeword coupling, an
outer infimum over couplings with both marginals pinned to the code
composition, and (in the penalized form) a supremum over a tilting
parameter rho.  This module turns those objectives into concrete grid
computations on top of the optimizer module:

* ``competitor_score_exponent``: the typical score accumulated by the
  crowd of wrong codewords at a given output composition, as a function
  of the rate;
* ``pairwise_confusion_exponent``: the exponential cost of confusing a
  particular pair coupling, combining channel divergence, conditional
  information, and a clipped score deficit;
* ``expurgated_exponent`` / ``maxmin_exponent``: the constrained and
  penalized outer forms, which coincide for metrics affine in the joint
  type;
* ``exponent_form``: picks the form sanctioned for the metric at hand
  and reports the gap between the two as a diagnostic.

Values live on the extended real line; +inf is produced by support
analysis (a forbidden cell carrying unavoidable mass), never by
floating-point overflow.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass
from typing import Iterable

import numpy as np

from .measures import (
    Channel,
    Distribution,
    DistributionError,
    JointDistribution,
    compositions,
    mutual_information_array,
)
from .metrics import AffineMetric, Metric
from .optimizer import (
    INFO_SLACK,
    FeasibleSet,
    GridSpec,
    InfeasibleGridError,
    concave_search_rho,
    enumerate_margin_tables,
    golden_section_minimize,
    margin_counts,
    move_directions,
    ordered_chunk_map,
)

_ALPHA_BATCH = 64  # fixed sub-batch height so BLAS shapes never vary


def _entropy_rows(a: np.ndarray) -> np.ndarray:
    # Entropy along the last axis with the 0*ln(0)=0 convention.
    safe = np.where(a > 0, a, 1.0)
    return -np.sum(a * np.log(safe), axis=-1)


@dataclass(frozen=True)
class ExponentQuery:
    """One exponent computation: rate, composition, channel, metric.

    ``epsilon`` is the rate back-off used by the simulator's good-code
    check; exponent computations themselves use epsilon = 0.
    ``rho_max`` caps the search over the tilting parameter.
    """

    rate: float
    composition: Distribution
    channel: Channel
    metric: Metric
    epsilon: float = 0.0
    rho_max: float = 64.0

    def __post_init__(self) -> None:
        if self.rate < 0:
            raise DistributionError(f"rate must be >= 0, got {self.rate}")
        if self.epsilon < 0:
            raise DistributionError("epsilon must be >= 0")
        if self.rho_max < 1:
            raise DistributionError(f"rho_max must be >= 1, got {self.rho_max}")
        if self.composition.size != self.channel.input_size:
            raise DistributionError("composition size does not match channel input")
        if (
            self.metric.x_size != self.channel.input_size
            or self.metric.y_size != self.channel.output_size
        ):
            raise DistributionError("metric shape does not match channel")


@dataclass
class ExponentResult:
    """Outcome of an exponent computation.

    ``value`` is in nats and satisfies value >= -rate.  ``argmin`` is
    the minimizing codeword-pair coupling.  ``rho_star`` and
    ``boundary_flag`` describe the tilting search when one ran;
    ``gap`` is constrained-form minus penalized-form when both were
    computed.  ``form`` says which form ``value`` came from.
    """

    value: float
    argmin: np.ndarray | None
    rho_star: float | None
    boundary_flag: bool
    gap: float | None
    resolution: int
    form: str
    expurgated_value: float | None = None
    maxmin_value: float | None = None
    note: str = ""

    def to_json(self, runtime_ms: float | None = None) -> dict:
        return {
            "value": self.value,
            "rho_star": self.rho_star,
            "boundary_flag": self.boundary_flag,
            "gap": self.gap,
            "argmin": None if self.argmin is None else [[float(v) for v in r] for r in self.argmin],
            "resolution": self.resolution,
            "runtime_ms": runtime_ms,
            "form": self.form,
            "expurgated": self.expurgated_value,
            "maxmin": self.maxmin_value,
            "note": self.note,
        }


class CompetitorScoreEvaluator:
    """Supremum of score minus information over output-conditional kernels.

    For a fixed output composition q_y, evaluates

        sup { score(joint) - I(input; output) } + rate

    over kernels (one input distribution per output symbol) whose
    mutual information with q_y stays at or below the rate.  The
    independent kernel is always feasible, so the value is finite
    unless the score is -inf on the whole feasible set.

    Kernels are enumerated on the rational grid with denominator
    ``resolution`` (capped so the enumeration stays within ``budget``
    points).  The grid supremum never exceeds the true supremum.  Two
    metric families short-circuit exactly: a constant metric gives
    value + rate (the independent kernel is optimal), and the
    empirical-mutual-information metric gives rate (score cancels the
    information term on the feasible set).
    """

    def __init__(
        self,
        metric: Metric,
        rate: float,
        y_size: int,
        resolution: int,
        budget: int = 300_000,
    ):
        if rate < 0:
            raise DistributionError(f"rate must be >= 0, got {rate}")
        if metric.y_size != y_size:
            raise DistributionError("metric output size does not match y_size")
        self.metric = metric
        self.rate = float(rate)
        self.y_size = y_size
        self.kx = metric.x_size
        self._memo: dict[tuple, float] = {}
        cells = metric.cells if metric.is_affine else None
        if not metric.is_affine:
            self.mode = "emi"
            self.effective_resolution = 0
            return
        finite = cells[np.isfinite(cells)]
        if finite.size == cells.size and np.all(cells == cells.flat[0]):
            self.mode = "const"
            self._const = float(cells.flat[0])
            self.effective_resolution = 0
            return
        self.mode = "scan"
        k = 1
        for cand in range(2, resolution + 1):
            if math.comb(cand + self.kx - 1, self.kx - 1) ** y_size > budget:
                break
            k = cand
        self.effective_resolution = k
        opts_counts = compositions(k, self.kx)
        opts = opts_counts.astype(np.float64) / k
        n_opt = opts.shape[0]
        row_h = _entropy_rows(opts)
        # Per-option, per-output score with -inf awareness.
        neg = np.isneginf(cells)
        cfin = np.where(neg, 0.0, cells)
        sfin = opts @ cfin  # (n_opt, y_size)
        sbad = (opts > 0).astype(np.float64) @ neg.astype(np.float64) > 0
        n_kern = n_opt**y_size
        idx = np.arange(n_kern, dtype=np.int64)
        digits = np.empty((n_kern, y_size), dtype=np.int64)
        for y in range(y_size):
            digits[:, y] = (idx // n_opt ** (y_size - 1 - y)) % n_opt
        self._row_entropy = row_h[digits]  # (n_kern, y_size)
        self._kernel_rows = opts[digits]  # (n_kern, y_size, kx)
        ycols = np.arange(y_size)
        self._score_fin = sfin[digits, ycols]  # (n_kern, y_size)
        self._score_bad = sbad[digits, ycols].astype(np.float64)

    def value(self, q_y: np.ndarray) -> float:
        """Value at one output composition, memoized."""
        q = np.asarray(q_y, dtype=np.float64)
        if self.mode == "emi":
            return self.rate
        if self.mode == "const":
            return self._const + self.rate
        key = tuple(np.round(q, 12))
        hit = self._memo.get(key)
        if hit is not None:
            return hit
        out = float(self._scan(q[None, :])[0])
        self._memo[key] = out
        return out

    def value_batch(self, rows: np.ndarray) -> np.ndarray:
        """Values for a stack of output compositions; not memoized.

        Rows are processed in fixed-height sub-batches so the result
        for a given row depends only on that row.
        """
        rows = np.asarray(rows, dtype=np.float64)
        if self.mode in ("emi", "const"):
            base = self.rate if self.mode == "emi" else self._const + self.rate
            return np.full(rows.shape[0], base)
        n = rows.shape[0]
        out = np.empty(n)
        for s in range(0, n, _ALPHA_BATCH):
            block = rows[s : s + _ALPHA_BATCH]
            if block.shape[0] < _ALPHA_BATCH:
                pad = np.repeat(block[-1:], _ALPHA_BATCH - block.shape[0], axis=0)
                padded = np.vstack([block, pad])
                out[s : s + block.shape[0]] = self._scan(padded)[: block.shape[0]]
            else:
                out[s : s + _ALPHA_BATCH] = self._scan(block)
        return out

    def _scan(self, qys: np.ndarray) -> np.ndarray:
        # (B, y_size) -> (B,) grid suprema; kernel-chunked for memory.
        b = qys.shape[0]
        n_kern = self._row_entropy.shape[0]
        best = np.full(b, -math.inf)
        qpos = (qys > 0).astype(np.float64)
        step = max(1, (1 << 21) // max(b * self.kx, 1))
        with np.errstate(invalid="ignore"):
            for s in range(0, n_kern, step):
                e = min(s + step, n_kern)
                cond_h = qys @ self._row_entropy[s:e].T  # (B, C)
                marg = np.tensordot(qys, self._kernel_rows[s:e], axes=([1], [1]))
                info = np.maximum(_entropy_rows(marg) - cond_h, 0.0)
                score_fin = qys @ self._score_fin[s:e].T
                bad = qpos @ self._score_bad[s:e].T > 0
                score = np.where(bad, -math.inf, score_fin)
                obj = np.where(info <= self.rate + INFO_SLACK, score - info, -math.inf)
                np.maximum(best, obj.max(axis=1), out=best)
        return best + self.rate


def competitor_score_exponent(
    rate: float,
    q_y: Distribution,
    channel: Channel,
    metric: Metric,
    resolution: int,
) -> float:
    """Score floor of the wrong-codeword crowd at output composition q_y.

    Grid evaluation at the given resolution; see
    CompetitorScoreEvaluator for the exact objective and the exact
    special cases.
    """
    if q_y.size != channel.output_size:
        raise DistributionError("q_y size does not match channel output")
    ev = CompetitorScoreEvaluator(metric, rate, channel.output_size, resolution)
    return ev.value(q_y.p)


@dataclass
class InnerSolution:
    value: float
    kernels: dict[tuple[int, int], np.ndarray] | None
    inner_resolution: int
    note: str = ""


class ConfusionExponentSolver:
    """Inner infimum of the pairwise-confusion objective.

    Given a coupling of two codewords (a joint over input pairs with
    both marginals equal to the composition), minimizes over one
    output distribution per positive-mass pair cell:

        sum_cells weight * D(cell kernel || channel row)
        + [max(score(joint with first word), competitor floor)
           - score(joint with second word)]_+

    The divergence part separates across cells; the clipped deficit
    couples cells only through the output-side marginals.  An
    exhaustive grid scan over per-cell kernels (chunked, deterministic)
    is followed by coordinate-descent refinement of the best point.
    """

    def __init__(
        self,
        channel: Channel,
        metric: Metric,
        rate: float,
        grid: GridSpec,
        score_eval: CompetitorScoreEvaluator,
    ):
        self.channel = channel
        self.metric = metric
        self.rate = float(rate)
        self.grid = grid
        self.score_eval = score_eval
        self.W = channel.matrix
        self.l = channel.output_size
        self.kx = channel.input_size
        self._per_res: dict[int, tuple] = {}
        self._floor_cache: dict[int, tuple[np.ndarray, np.ndarray] | None] = {}
        if metric.is_affine:
            cells = metric.cells
            self._mneg = np.isneginf(cells)
            self._mfin = np.where(self._mneg, 0.0, cells)
        else:
            self._mneg = None
            self._mfin = None

    # -- per-resolution tables ------------------------------------------

    def _tables(self, k_in: int) -> tuple:
        cached = self._per_res.get(k_in)
        if cached is not None:
            return cached
        counts = compositions(k_in, self.l)
        opts = counts.astype(np.float64) / k_in
        n_opt = opts.shape[0]
        # Divergence of each grid kernel against each channel row.
        dopt = np.empty((self.kx, n_opt))
        with np.errstate(divide="ignore", invalid="ignore"):
            logopts = np.where(opts > 0, np.log(np.where(opts > 0, opts, 1.0)), 0.0)
            for x in range(self.kx):
                wrow = self.W[x]
                lw = np.where(wrow > 0, np.log(np.where(wrow > 0, wrow, 1.0)), 0.0)
                contrib = np.where(opts > 0, opts * (logopts - lw[None, :]), 0.0)
                fin = np.maximum(contrib.sum(axis=1), 0.0)
                hole = ((opts > 0) & (wrow == 0)[None, :]).any(axis=1)
                dopt[x] = np.where(hole, math.inf, fin)
        if self.metric.is_affine:
            gsc = np.empty((self.kx, n_opt))
            for x in range(self.kx):
                fin = opts @ self._mfin[x]
                bad = ((opts > 0) & self._mneg[x][None, :]).any(axis=1)
                gsc[x] = np.where(bad, -math.inf, fin)
        else:
            gsc = None
        out = (counts, opts, dopt, gsc)
        self._per_res[k_in] = out
        return out

    def inner_resolution(self, n_cells: int) -> int:
        """Largest denominator whose full scan fits the budget."""
        k = 1
        for cand in range(2, self.grid.resolution + 1):
            if math.comb(cand + self.l - 1, self.l - 1) ** n_cells > self.grid.inner_budget:
                break
            k = cand
        return k

    # -- exhaustive scan -------------------------------------------------

    def solve(
        self,
        coupling: np.ndarray,
        counts: np.ndarray | None = None,
        *,
        refine: bool | None = None,
        warm: dict[tuple[int, int], np.ndarray] | None = None,
        skip_grid: bool = False,
        max_sweeps: int | None = None,
        line_tol: float | None = None,
    ) -> InnerSolution:
        """Inner minimum for one coupling.

        ``counts`` (integer table summing to the outer resolution)
        enables exact integer keying of output compositions during the
        scan.  ``skip_grid`` starts refinement from ``warm`` kernels
        (missing cells start at the channel row) without scanning;
        used by the outer polish where the scan would dominate.
        """
        do_refine = self.grid.refine if refine is None else refine
        cells = [
            (x, xp, float(coupling[x, xp]))
            for x in range(self.kx)
            for xp in range(self.kx)
            if coupling[x, xp] > 0
        ]
        if not cells:
            raise DistributionError("empty coupling")
        s = len(cells)
        k_in = self.inner_resolution(s)
        note = "" if k_in >= self.grid.resolution else f"inner grid capped at 1/{k_in}"
        if self.score_eval.mode == "const":
            # Constant score: both word scores cancel, the floor sits
            # exactly rate above them, so the clipped deficit is rate for
            # every kernel stack; the divergence infimum is 0 at the
            # channel rows.
            stack = np.stack([self.W[x] for x, _, _ in cells])
            return InnerSolution(self.rate, self._stack_dict(cells, stack), k_in, note)
        opt_counts, opts, dopt, gsc = self._tables(k_in)

        if skip_grid:
            stack = np.empty((s, self.l))
            for r, (x, xp, _) in enumerate(cells):
                if warm is not None and (x, xp) in warm:
                    stack[r] = warm[(x, xp)]
                else:
                    stack[r] = self.W[x]
            value, stack = self._refine_stack(cells, stack, max_sweeps, line_tol)
            return InnerSolution(value, self._stack_dict(cells, stack), k_in, note)

        value, digits = self._scan(cells, counts, k_in)
        if not math.isfinite(value):
            # Support analysis: every kernel combination is forbidden, so
            # the continuous infimum is +inf as well (grid vertices cover
            # every support pattern).
            return InnerSolution(
                math.inf, None, k_in, "support-forced +inf: no kernel avoids a forbidden cell"
            )
        stack = opts[digits]
        if do_refine:
            value, stack = self._refine_stack(cells, stack, max_sweeps, line_tol)
        return InnerSolution(value, self._stack_dict(cells, stack), k_in, note)

    @staticmethod
    def _stack_dict(cells, stack) -> dict[tuple[int, int], np.ndarray]:
        return {(x, xp): stack[r].copy() for r, (x, xp, _) in enumerate(cells)}

    def _scan(self, cells, counts, k_in) -> tuple[float, np.ndarray]:
        opt_counts, opts, dopt, gsc = self._tables(k_in)
        n_opt = opts.shape[0]
        s = len(cells)
        n_combo = n_opt**s
        w = np.array([c[2] for c in cells])
        dvec = [w[r] * dopt[cells[r][0]] for r in range(s)]
        affine = self.metric.is_affine
        if affine:
            gx = [w[r] * gsc[cells[r][0]] for r in range(s)]
            gxp = [w[r] * gsc[cells[r][1]] for r in range(s)]
        wopts = [w[r] * opts for r in range(s)]
        exact = counts is not None
        if exact:
            cvec = np.array(
                [int(round(counts[cells[r][0], cells[r][1]])) for r in range(s)], dtype=np.int64
            )
            den = int(self.grid.resolution) * k_in
            if (den + 1) ** self.l > 2**62:
                exact = False
        place = [n_opt ** (s - 1 - r) for r in range(s)]
        floor_table = self._floor_table(den, n_combo) if exact else None

        def chunk(start: int, stop: int) -> tuple[float, int]:
            idx = np.arange(start, stop, dtype=np.int64)
            c = idx.size
            digs = [(idx // place[r]) % n_opt for r in range(s)]
            dsum = np.zeros(c)
            for r in range(s):
                dsum += dvec[r][digs[r]]
            if exact:
                qy_int = np.zeros((c, self.l), dtype=np.int64)
                for r in range(s):
                    qy_int += cvec[r] * opt_counts[digs[r]]
                qy = qy_int.astype(np.float64) / den
            else:
                qy = np.zeros((c, self.l))
                for r in range(s):
                    qy += wopts[r][digs[r]]
            if affine:
                g1 = np.zeros(c)
                g2 = np.zeros(c)
                for r in range(s):
                    g1 += gx[r][digs[r]]
                    g2 += gxp[r][digs[r]]
            else:
                jxy = np.zeros((c, self.kx, self.l))
                jxpy = np.zeros((c, self.kx, self.l))
                for r in range(s):
                    jxy[:, cells[r][0], :] += wopts[r][digs[r]]
                    jxpy[:, cells[r][1], :] += wopts[r][digs[r]]
                g1 = self._mi_stack(jxy)
                g2 = self._mi_stack(jxpy)
            floor = self._floor_for_scan(
                qy, qy_int if exact else None, den if exact else 0, floor_table
            )
            with np.errstate(invalid="ignore"):
                bracket = np.where(
                    np.isneginf(g2),
                    math.inf,
                    np.maximum(np.maximum(g1, floor) - g2, 0.0),
                )
                total = dsum + bracket
            j = int(np.argmin(total))
            return float(total[j]), start + j

        results = ordered_chunk_map(chunk, n_combo, self.grid.chunk_size, self.grid.workers)
        best_v, best_i = math.inf, -1
        for v, i in results:
            if v < best_v:
                best_v, best_i = v, i
        if best_i < 0 or not math.isfinite(best_v):
            return math.inf, np.zeros(s, dtype=np.int64)
        digits = np.array([(best_i // place[r]) % n_opt for r in range(s)], dtype=np.int64)
        return best_v, digits

    @staticmethod
    def _mi_stack(j: np.ndarray) -> np.ndarray:
        hx = _entropy_rows(j.sum(axis=2))
        hy = _entropy_rows(j.sum(axis=1))
        hxy = _entropy_rows(j.reshape(j.shape[0], -1))
        return np.maximum(hx + hy - hxy, 0.0)

    def _floor_table(self, den: int, n_combo: int) -> tuple[np.ndarray, np.ndarray] | None:
        """Floor values for every output composition with denominator den.

        Built once per denominator, in a fixed enumeration order, before
        any parallel chunk runs; chunks then do exact-key lookups.  Only
        built when cheaper than re-evaluating per-chunk uniques.
        """
        if self.score_eval.mode != "scan":
            return None
        if den in self._floor_cache:
            return self._floor_cache[den]
        rows = math.comb(den + self.l - 1, self.l - 1)
        n_kern = self.score_eval._row_entropy.shape[0]
        n_chunks = -(-n_combo // self.grid.chunk_size)
        est_scan_evals = n_chunks * min(self.grid.chunk_size, n_combo, rows)
        table = None
        if rows <= min(40000, est_scan_evals) and rows * n_kern <= 5 * 10**8:
            ints = compositions(den, self.l)
            powers = (den + 1) ** np.arange(self.l, dtype=np.int64)
            keys = ints @ powers
            order = np.argsort(keys)
            vals = self.score_eval.value_batch(ints.astype(np.float64) / den)
            table = (keys[order], vals[order])
        self._floor_cache[den] = table
        return table

    def _floor_for_scan(
        self,
        qy: np.ndarray,
        qy_int: np.ndarray | None,
        den: int,
        table: tuple[np.ndarray, np.ndarray] | None = None,
    ) -> np.ndarray:
        if self.score_eval.mode in ("emi", "const"):
            return self.score_eval.value_batch(qy[:1]).repeat(qy.shape[0])
        if qy_int is not None and table is not None:
            powers = (den + 1) ** np.arange(self.l, dtype=np.int64)
            pos = np.searchsorted(table[0], qy_int @ powers)
            return table[1][pos]
        if qy_int is not None:
            powers = (den + 1) ** np.arange(self.l, dtype=np.int64)
            keys = qy_int @ powers
            uniq, first, inverse = np.unique(keys, return_index=True, return_inverse=True)
        else:
            rounded = np.round(qy, 12)
            uniq, first, inverse = np.unique(
                rounded, axis=0, return_index=True, return_inverse=True
            )
        vals = self.score_eval.value_batch(qy[first])
        return vals[inverse]

    # -- refinement -------------------------------------------------------

    def stack_value(self, cells, stack: np.ndarray) -> float:
        """Objective at one kernel stack (row r is the cell-r kernel)."""
        total_d = 0.0
        for r, (x, _, wt) in enumerate(cells):
            row = stack[r]
            wrow = self.W[x]
            for y in range(self.l):
                v = row[y]
                if v <= 0:
                    continue
                if wrow[y] <= 0:
                    return math.inf
                total_d += wt * v * math.log(v / wrow[y])
        w = np.array([c[2] for c in cells])
        qy = (w[:, None] * stack).sum(axis=0)
        if self.metric.is_affine:
            g1 = g2 = 0.0
            for r, (x, xp, wt) in enumerate(cells):
                row = stack[r]
                pos = row > 0
                if np.any(pos & self._mneg[x]):
                    g1 = -math.inf
                if g1 != -math.inf:
                    g1 += wt * float(np.dot(row, self._mfin[x]))
                if np.any(pos & self._mneg[xp]):
                    g2 = -math.inf
                if g2 != -math.inf:
                    g2 += wt * float(np.dot(row, self._mfin[xp]))
        else:
            jxy = np.zeros((self.kx, self.l))
            jxpy = np.zeros((self.kx, self.l))
            for r, (x, xp, wt) in enumerate(cells):
                jxy[x] += wt * stack[r]
                jxpy[xp] += wt * stack[r]
            g1 = float(self._mi_stack(jxy[None])[0])
            g2 = float(self._mi_stack(jxpy[None])[0])
        if g2 == -math.inf:
            return math.inf
        floor = self.score_eval.value(qy)
        top = max(g1, floor)
        bracket = max(top - g2, 0.0) if top != -math.inf else 0.0
        return max(total_d, 0.0) + bracket

    def _refine_stack(
        self, cells, stack: np.ndarray, max_sweeps: int | None, line_tol: float | None = None
    ) -> tuple[float, np.ndarray]:
        cur = self.stack_value(cells, stack)
        s = len(cells)
        tol = self.grid.refine_tolerance
        if line_tol is None:
            line_tol = max(tol * 1e-2, 1e-15)
        sweeps = self.grid.max_refine_iters if max_sweeps is None else max_sweeps
        dirs = [
            (r, y1, y2) for r in range(s) for y1 in range(self.l) for y2 in range(y1 + 1, self.l)
        ]
        for _ in range(sweeps):
            gain = 0.0
            for r, y1, y2 in dirs:
                lo = -stack[r, y1]
                hi = stack[r, y2]
                if hi - lo <= 1e-15:
                    continue

                def along(t: float) -> float:
                    cand = stack.copy()
                    cand[r, y1] = max(cand[r, y1] + t, 0.0)
                    cand[r, y2] = max(cand[r, y2] - t, 0.0)
                    return self.stack_value(cells, cand)

                t_best, f_best = golden_section_minimize(along, lo, hi, line_tol)
                if f_best < cur - 1e-15:
                    stack[r, y1] = max(stack[r, y1] + t_best, 0.0)
                    stack[r, y2] = max(stack[r, y2] - t_best, 0.0)
                    gain += cur - f_best
                    cur = f_best
            if gain < tol:
                break
        return cur, stack


def pairwise_confusion_exponent(
    coupling: JointDistribution,
    rate: float,
    channel: Channel,
    metric: Metric,
    resolution: int | GridSpec,
) -> float:
    """Confusion cost of one codeword-pair coupling at the given rate.

    The coupling must have equal row and column marginals (both are the
    code composition) within 1e-9.  Returns +inf when support analysis
    forces every kernel into a forbidden cell.
    """
    grid = resolution if isinstance(resolution, GridSpec) else GridSpec(resolution)
    p = coupling.p
    if p.shape[0] != p.shape[1] or p.shape[0] != channel.input_size:
        raise DistributionError("coupling must be square over the channel input alphabet")
    rm = p.sum(axis=1)
    cm = p.sum(axis=0)
    if np.max(np.abs(rm - cm)) > 1e-9:
        raise DistributionError(
            f"coupling marginals disagree by {np.max(np.abs(rm - cm)):.3e} (limit 1e-9)"
        )
    ev = CompetitorScoreEvaluator(metric, rate, channel.output_size, grid.resolution)
    solver = ConfusionExponentSolver(channel, metric, rate, grid, ev)
    return solver.solve(p).value


# ---------------------------------------------------------------------------
# Outer forms.


@dataclass
class _Pipeline:
    tables: list[np.ndarray]
    couplings: list[np.ndarray]
    info: np.ndarray
    confusion: np.ndarray
    solver: ConfusionExponentSolver
    inner_note: str


def _prepare(query: ExponentQuery, grid: GridSpec) -> _Pipeline:
    k = grid.resolution
    comp_counts = margin_counts(query.composition, k)
    tables = [t for t in enumerate_margin_tables(comp_counts, comp_counts)]
    if not tables:
        raise InfeasibleGridError(
            f"no couplings with both marginals at resolution {k}: resolution too coarse"
        )
    couplings = [t.astype(np.float64) / k for t in tables]
    info = np.array([mutual_information_array(p) for p in couplings])
    ev = CompetitorScoreEvaluator(
        query.metric, query.rate, query.channel.output_size, k
    )
    solver = ConfusionExponentSolver(query.channel, query.metric, query.rate, grid, ev)
    vals = np.empty(len(tables))
    note = ""
    for i, (t, p) in enumerate(zip(tables, couplings)):
        sol = solver.solve(p, t, refine=False)
        vals[i] = sol.value
        if sol.note and not note:
            note = sol.note
    return _Pipeline(tables, couplings, info, vals, solver, note)


def _polish_coupling(
    pipe: _Pipeline,
    query: ExponentQuery,
    grid: GridSpec,
    start: int,
    rho: float | None,
) -> tuple[np.ndarray, float]:
    """Continuous descent of the outer objective from a grid coupling.

    Objective is confusion + information (constrained form, rho None)
    or confusion + rho*(information - rate) (penalized form).  The
    information cap applies only to the constrained form and is
    enforced by step rejection.  Returns the final coupling and value.
    """
    solver = pipe.solver
    rate = query.rate
    comp = query.composition
    p = pipe.couplings[start].copy()
    full = solver.solve(p, pipe.tables[start], refine=True)
    warm = full.kernels

    def total(conf: float, joint: np.ndarray) -> float:
        info = mutual_information_array(joint)
        if rho is None:
            if info > rate + INFO_SLACK:
                return math.inf
            return conf + info
        return conf + rho * (info - rate)

    cur = total(full.value, p)
    feas = FeasibleSet((p.shape[0], p.shape[1]), row_margin=comp, col_margin=comp)
    dirs = move_directions(feas)
    radius = 1.5 / grid.resolution
    for _ in range(2):
        gain = 0.0
        for d in dirs:
            lo, hi = -math.inf, math.inf
            nz = np.argwhere(d != 0)
            for i, j in nz:
                dv = d[i, j]
                if dv > 0:
                    lo = max(lo, -p[i, j] / dv)
                else:
                    hi = min(hi, p[i, j] / -dv)
            lo = max(lo, -radius)
            hi = min(hi, radius)
            if hi - lo <= 1e-12:
                continue

            def along(t: float) -> float:
                cand = np.maximum(p + t * d, 0.0)
                if not np.any(cand.sum(axis=1) * cand.sum(axis=0)):
                    return math.inf
                sol = solver.solve(
                    cand, None, skip_grid=True, warm=warm, max_sweeps=2, line_tol=1e-4
                )
                return total(sol.value, cand)

            t_best, f_best = golden_section_minimize(along, lo, hi, max(1e-4, (hi - lo) * 1e-3))
            if f_best < cur - 1e-12 and t_best != 0.0:
                p = np.maximum(p + t_best * d, 0.0)
                sol = solver.solve(
                    p, None, skip_grid=True, warm=warm, max_sweeps=8, line_tol=1e-6
                )
                warm = sol.kernels
                new = total(sol.value, p)
                if new < cur:
                    gain += cur - new
                    cur = new
        if gain < grid.refine_tolerance:
            break
    final = solver.solve(p, None, skip_grid=True, warm=warm, max_sweeps=None)
    cur = min(cur, total(final.value, p))
    return p, cur


def _expurgated_from(pipe: _Pipeline, query: ExponentQuery, grid: GridSpec) -> ExponentResult:
    rate = query.rate
    feas = pipe.info <= rate + INFO_SLACK
    if not np.any(feas):
        raise InfeasibleGridError(
            f"no coupling satisfies the information cap {rate:g} at resolution "
            f"{grid.resolution}: resolution too coarse"
        )
    objective = np.where(feas, pipe.confusion + pipe.info - rate, math.inf)
    i_star = int(np.argmin(objective))
    value = float(objective[i_star])
    argmin = pipe.couplings[i_star]
    note = pipe.inner_note
    if not math.isfinite(value):
        return ExponentResult(
            math.inf,
            argmin,
            None,
            False,
            None,
            grid.resolution,
            "constrained",
            note="support-forced +inf: every feasible coupling hits a forbidden cell",
        )
    if grid.refine:
        p, polished = _polish_coupling(pipe, query, grid, i_star, rho=None)
        if polished - rate < value:
            value = polished - rate
            argmin = p
    return ExponentResult(
        value, argmin, None, False, None, grid.resolution, "constrained", note=note
    )


def _maxmin_from(pipe: _Pipeline, query: ExponentQuery, grid: GridSpec) -> ExponentResult:
    rate = query.rate
    conf = pipe.confusion
    info = pipe.info
    if not np.any(np.isfinite(conf)):
        return ExponentResult(
            math.inf,
            None,
            None,
            False,
            None,
            grid.resolution,
            "penalized",
            note="support-forced +inf: every coupling hits a forbidden cell",
        )

    def inner(rho: float) -> float:
        return float(np.min(conf + rho * (info - rate)))

    rho_star, value, boundary = concave_search_rho(inner, 1.0, query.rho_max, 1e-9)
    scores = conf + rho_star * (info - rate)
    i_star = int(np.argmin(scores))
    argmin = pipe.couplings[i_star]
    if grid.refine and math.isfinite(value):
        p, polished = _polish_coupling(pipe, query, grid, i_star, rho=rho_star)
        if polished < value:
            value = polished
            argmin = p
    return ExponentResult(
        value,
        argmin,
        rho_star,
        boundary,
        None,
        grid.resolution,
        "penalized",
        note=pipe.inner_note,
    )


def _as_grid(resolution: int | GridSpec) -> GridSpec:
    return resolution if isinstance(resolution, GridSpec) else GridSpec(resolution)


def expurgated_exponent(query: ExponentQuery, resolution: int | GridSpec) -> ExponentResult:
    """Constrained form: min over couplings with capped information.

    Minimizes confusion + information - rate over couplings whose
    mutual information stays at or below the rate, both marginals
    pinned to the composition.  The reported value never falls below
    -rate.
    """
    grid = _as_grid(resolution)
    pipe = _prepare(query, grid)
    res = _expurgated_from(pipe, query, grid)
    res.expurgated_value = res.value
    return res


def maxmin_exponent(query: ExponentQuery, resolution: int | GridSpec) -> ExponentResult:
    """Penalized form: sup over tilting of the unconstrained min.

    For each rho in [1, rho_max], minimizes confusion +
    rho*(information - rate) over all couplings with pinned marginals;
    the concave search over rho returns the best tilting.
    ``boundary_flag`` warns that the supremum sat against rho_max,
    meaning the true supremum may be at even larger tilting.
    """
    grid = _as_grid(resolution)
    pipe = _prepare(query, grid)
    res = _maxmin_from(pipe, query, grid)
    res.maxmin_value = res.value
    return res


def exponent_form(query: ExponentQuery, resolution: int | GridSpec) -> ExponentResult:
    """Both forms at once, returning the one sanctioned for the metric.

    Metrics affine in the joint type allow the exchange of the tilting
    supremum with the coupling minimum, so the constrained form is the
    exponent and the gap (constrained minus penalized) is a diagnostic
    near zero.  For other metrics the penalized form is the honest
    lower bound and is returned, with the gap still recorded.
    """
    grid = _as_grid(resolution)
    pipe = _prepare(query, grid)
    exp_res = _expurgated_from(pipe, query, grid)
    max_res = _maxmin_from(pipe, query, grid)
    if math.isinf(exp_res.value) and math.isinf(max_res.value):
        gap = None
    else:
        gap = exp_res.value - max_res.value
    primary = exp_res if query.metric.is_affine else max_res
    return ExponentResult(
        value=primary.value,
        argmin=primary.argmin,
        rho_star=max_res.rho_star,
        boundary_flag=max_res.boundary_flag,
        gap=gap,
        resolution=grid.resolution,
        form=primary.form,
        expurgated_value=exp_res.value,
        maxmin_value=max_res.value,
        note=primary.note,
    )


def rate_sweep(query: ExponentQuery, rates: Iterable[float], resolution: int | GridSpec) -> list[ExponentResult]:
    """exponent_form at each rate; rates must be sorted ascending.

    Caches that depend on the rate are rebuilt per rate, so each entry
    matches an independent direct call exactly.
    """
    rates = [float(r) for r in rates]
    if any(b < a for a, b in zip(rates, rates[1:])):
        raise DistributionError("rates must be sorted ascending")
    out = []
    for r in rates:
        out.append(exponent_form(dataclasses.replace(query, rate=r), resolution))
    return out


def exchanged_objective(
    triple: np.ndarray,
    rho: float,
    rate: float,
    composition: Distribution,
    channel: Channel,
    metric: Metric,
    score_eval: CompetitorScoreEvaluator | None = None,
    resolution: int = 16,
) -> float:
    """The exchanged outer objective on a joint over (input, pair, output).

    For a triple joint q with both input-side marginals equal to the
    composition, evaluates

        -E_q ln[ W(out|in) comp(in) comp(pair) ] - H(q)
        + rho * (I(in; pair) - rate) + clipped score deficit.

    Affine metrics make every term convex in q on the fixed-marginal
    set, which is what justifies exchanging the tilting supremum with
    the coupling minimum; the midpoint-convexity property tests probe
    exactly this expression.  Requires rho >= 0.
    """
    if rho < 0:
        raise DistributionError(f"rho must be >= 0, got {rho}")
    q = np.asarray(triple, dtype=np.float64)
    kx = channel.input_size
    l = channel.output_size
    if q.shape != (kx, kx, l):
        raise DistributionError(f"triple shape {q.shape} does not match ({kx}, {kx}, {l})")
    w = channel.matrix
    comp = composition.p
    lin = 0.0
    for x in range(kx):
        for xp in range(kx):
            for y in range(l):
                v = q[x, xp, y]
                if v <= 0:
                    continue
                if w[x, y] <= 0 or comp[x] <= 0 or comp[xp] <= 0:
                    return math.inf
                lin -= v * math.log(w[x, y] * comp[x] * comp[xp])
    neg_entropy = float(np.sum(np.where(q > 0, q * np.log(np.where(q > 0, q, 1.0)), 0.0)))
    pair = q.sum(axis=2)
    penalty = rho * (mutual_information_array(pair) - rate)
    if score_eval is None:
        score_eval = CompetitorScoreEvaluator(metric, rate, l, resolution)
    joint_first = q.sum(axis=1)
    joint_second = q.sum(axis=0)
    g1 = metric.score_array(joint_first)
    g2 = metric.score_array(joint_second)
    if g2 == -math.inf:
        return math.inf
    floor = score_eval.value(q.sum(axis=(0, 1)))
    top = max(g1, floor)
    bracket = max(top - g2, 0.0) if top != -math.inf else 0.0
    return lin + neg_entropy + penalty + bracket
