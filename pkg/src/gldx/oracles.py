"""Brute-force reference implementations for cross-checking.

Everything here is written for clarity and independence, not speed:
plain Python loops over explicitly enumerated grids, no refinement, no
caching beyond simple memo dicts, and no reuse of the optimizer
module's enumeration code.  The verification suites compare these
values against the production path at equal resolution.
"""

from __future__ import annotations

import itertools
import math

import numpy as np

from .measures import Channel, Distribution
from .metrics import Metric


def _compositions(total: int, parts: int):
    # All nonnegative integer tuples of the given length summing to total.
    if parts == 1:
        yield (total,)
        return
    for first in range(total + 1):
        for rest in _compositions(total - first, parts - 1):
            yield (first,) + rest


def _entropy(vec) -> float:
    h = 0.0
    for v in vec:
        if v > 0:
            h -= v * math.log(v)
    return max(h, 0.0)


def _mutual_information(joint) -> float:
    joint = [list(r) for r in joint]
    rows = [sum(r) for r in joint]
    cols = [sum(r[j] for r in joint) for j in range(len(joint[0]))]
    flat = [v for r in joint for v in r]
    return max(0.0, _entropy(rows) + _entropy(cols) - _entropy(flat))


def _affine_score(joint, cells) -> float:
    total = 0.0
    for i, row in enumerate(joint):
        for j, v in enumerate(row):
            if v <= 0:
                continue
            c = cells[i][j]
            if c == -math.inf:
                return -math.inf
            total += v * c
    return total


def _score(joint, metric: Metric) -> float:
    if metric.is_affine:
        return _affine_score(joint, metric.cells.tolist())
    return _mutual_information(joint)


def _kl(q, w) -> float:
    total = 0.0
    for qv, wv in zip(q, w):
        if qv <= 0:
            continue
        if wv <= 0:
            return math.inf
        total += qv * math.log(qv / wv)
    return max(total, 0.0)


def naive_score_floor(
    rate: float, q_y, metric: Metric, resolution: int
) -> float:
    """Exhaustive-grid version of competitor_score_exponent.

    Enumerates every denominator-``resolution`` kernel (one input
    distribution per output symbol) and takes the best feasible
    score-minus-information value, plus the rate.
    """
    q_y = list(np.asarray(q_y, dtype=np.float64))
    kx = metric.x_size
    l = metric.y_size
    options = [tuple(c / resolution for c in comp) for comp in _compositions(resolution, kx)]
    best = -math.inf
    for pick in itertools.product(range(len(options)), repeat=l):
        joint = [[options[pick[y]][x] * q_y[y] for y in range(l)] for x in range(kx)]
        marg = [sum(joint[x]) for x in range(kx)]
        cond = sum(q_y[y] * _entropy(options[pick[y]]) for y in range(l))
        info = max(0.0, _entropy(marg) - cond)
        if info > rate + 1e-9:
            continue
        g = _score(joint, metric)
        if g - info > best:
            best = g - info
    return best + rate


class _FloorMemo:
    def __init__(self, rate: float, metric: Metric, resolution: int):
        self.rate = rate
        self.metric = metric
        self.resolution = resolution
        self.cache: dict[tuple, float] = {}

    def __call__(self, q_y) -> float:
        key = tuple(round(float(v), 12) for v in q_y)
        if key not in self.cache:
            self.cache[key] = naive_score_floor(self.rate, q_y, self.metric, self.resolution)
        return self.cache[key]


def naive_confusion(
    coupling,
    rate: float,
    channel: Channel,
    metric: Metric,
    inner_resolution: int,
    floor_resolution: int | None = None,
    floor: _FloorMemo | None = None,
) -> float:
    """Exhaustive-grid version of pairwise_confusion_exponent."""
    p = np.asarray(coupling, dtype=np.float64)
    w = channel.matrix.tolist()
    kx, l = channel.input_size, channel.output_size
    cells = [(x, xp, float(p[x, xp])) for x in range(kx) for xp in range(kx) if p[x, xp] > 0]
    if floor is None:
        floor = _FloorMemo(rate, metric, floor_resolution or inner_resolution)
    options = [
        tuple(c / inner_resolution for c in comp) for comp in _compositions(inner_resolution, l)
    ]
    n_opt = len(options)
    # Per-cell lookup tables so the combo loop is pure accumulation.
    dcost = [[wt * _kl(options[j], w[x]) for j in range(n_opt)] for (x, xp, wt) in cells]
    affine = metric.is_affine
    if affine:
        ctab = metric.cells.tolist()

        def cell_score(xrow: int, j: int) -> float:
            total = 0.0
            for y in range(l):
                if options[j][y] <= 0:
                    continue
                c = ctab[xrow][y]
                if c == -math.inf:
                    return -math.inf
                total += options[j][y] * c
            return total

        s1 = [[wt * cell_score(x, j) for j in range(n_opt)] for (x, xp, wt) in cells]
        s2 = [[wt * cell_score(xp, j) for j in range(n_opt)] for (x, xp, wt) in cells]
    best = math.inf
    for pick in itertools.product(range(n_opt), repeat=len(cells)):
        d = 0.0
        for r, j in enumerate(pick):
            d += dcost[r][j]
            if d == math.inf:
                break
        if d == math.inf:
            continue
        qy = [0.0] * l
        for r, j in enumerate(pick):
            wt = cells[r][2]
            for y in range(l):
                qy[y] += wt * options[j][y]
        if affine:
            g1 = 0.0
            g2 = 0.0
            for r, j in enumerate(pick):
                g1 += s1[r][j]
                g2 += s2[r][j]
        else:
            jxy = [[0.0] * l for _ in range(kx)]
            jxpy = [[0.0] * l for _ in range(kx)]
            for r, j in enumerate(pick):
                x, xp, wt = cells[r]
                for y in range(l):
                    jxy[x][y] += wt * options[j][y]
                    jxpy[xp][y] += wt * options[j][y]
            g1 = _mutual_information(jxy)
            g2 = _mutual_information(jxpy)
        if g2 == -math.inf:
            continue
        top = max(g1, floor(qy))
        val = d + (max(top - g2, 0.0) if top != -math.inf else 0.0)
        if val < best:
            best = val
    return best


def _naive_tables(counts):
    # Contingency tables with equal row and column margins `counts`.
    k = len(counts)
    rows = [list(_compositions(int(c), k)) for c in counts]
    for combo in itertools.product(*rows):
        ok = True
        for j in range(k):
            if sum(combo[i][j] for i in range(k)) != counts[j]:
                ok = False
                break
        if ok:
            yield combo


def naive_expurgated(
    rate: float,
    composition: Distribution,
    channel: Channel,
    metric: Metric,
    outer_resolution: int,
    inner_resolution: int,
    floor_resolution: int | None = None,
) -> float:
    """Nested double-grid version of expurgated_exponent (no refinement)."""
    k = outer_resolution
    counts = [int(round(v * k)) for v in composition.p]
    if sum(counts) != k or any(abs(v * k - c) > 1e-9 for v, c in zip(composition.p, counts)):
        raise ValueError("composition is not on the outer grid")
    floor = _FloorMemo(rate, metric, floor_resolution or inner_resolution)
    best = math.inf
    for table in _naive_tables(counts):
        p = np.array(table, dtype=np.float64) / k
        info = _mutual_information(p.tolist())
        if info > rate + 1e-9:
            continue
        conf = naive_confusion(p, rate, channel, metric, inner_resolution, floor=floor)
        val = conf + info - rate
        if val < best:
            best = val
    return best


def naive_maxmin(
    rate: float,
    composition: Distribution,
    channel: Channel,
    metric: Metric,
    outer_resolution: int,
    inner_resolution: int,
    rho_max: float = 64.0,
    rho_points: int = 2000,
    floor_resolution: int | None = None,
) -> float:
    """Dense-grid version of maxmin_exponent: rho sweep times table scan."""
    k = outer_resolution
    counts = [int(round(v * k)) for v in composition.p]
    floor = _FloorMemo(rate, metric, floor_resolution or inner_resolution)
    rows = []
    for table in _naive_tables(counts):
        p = np.array(table, dtype=np.float64) / k
        info = _mutual_information(p.tolist())
        conf = naive_confusion(p, rate, channel, metric, inner_resolution, floor=floor)
        rows.append((conf, info))
    best = -math.inf
    for rho in np.linspace(1.0, rho_max, rho_points):
        val = min(conf + rho * (info - rate) for conf, info in rows)
        if val > best:
            best = val
    return best
