"""Desk-scale simulation of stochastic metric decoding.

Covers the runnable side of the theory: constant-composition codebooks,
the randomized decoder that picks messages with probability
proportional to exp(n * score), exact error probabilities by output
enumeration, Monte Carlo estimation with reproducible per-block random
streams, the good-code floor check, half-expurgation, and the
tilted-average inequality that drives the expurgation argument.

Reproducibility contract: every routine that consumes randomness takes
an explicit numpy Generator; Monte Carlo work derives one child stream
per fixed-size trial block from a master seed, so results are
bit-identical for any worker count.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np

from .measures import Channel, Distribution, DistributionError
from .metrics import Metric
from .exponents import CompetitorScoreEvaluator
from .optimizer import ordered_chunk_map

log = logging.getLogger(__name__)

_MC_BLOCK = 4096  # trials per derived stream; fixed so workers cannot matter
_ENUM_BUDGET = 1 << 24


@dataclass(frozen=True)
class Codebook:
    """A constant-composition code: M words of length n, one shared type."""

    words: np.ndarray
    composition: Distribution

    def __post_init__(self) -> None:
        w = np.asarray(self.words, dtype=np.int64)
        if w.ndim != 2 or w.shape[0] < 1 or w.shape[1] < 1:
            raise DistributionError(f"words must be a nonempty (M, n) array, got {w.shape}")
        kx = self.composition.size
        if w.min() < 0 or w.max() >= kx:
            raise DistributionError("codeword symbol outside the composition alphabet")
        n = w.shape[1]
        target = self.composition.p * n
        counts = np.rint(target)
        if np.max(np.abs(target - counts)) > 1e-9:
            raise DistributionError(f"composition is not integral at blocklength {n}")
        counts = counts.astype(np.int64)
        for i, word in enumerate(w):
            if not np.array_equal(np.bincount(word, minlength=kx), counts):
                raise DistributionError(f"word {i} does not have the code composition")
        w = np.ascontiguousarray(w)
        w.flags.writeable = False
        object.__setattr__(self, "words", w)

    @property
    def size(self) -> int:
        return self.words.shape[0]

    @property
    def blocklength(self) -> int:
        return self.words.shape[1]

    @property
    def rate(self) -> float:
        return math.log(self.size) / self.blocklength

    @staticmethod
    def from_words(words) -> "Codebook":
        w = np.asarray(words, dtype=np.int64)
        kx = int(w.max()) + 1
        counts = np.bincount(w[0], minlength=kx)
        return Codebook(w, Distribution(counts / w.shape[1]))


@dataclass(frozen=True)
class SimConfig:
    """Knobs for one simulation run."""

    n: int
    M: int
    trials: int
    seed: int
    epsilon: float | None = None

    def __post_init__(self) -> None:
        if self.n < 1 or self.M < 2 or self.trials < 1:
            raise DistributionError("need n >= 1, M >= 2, trials >= 1")
        if self.epsilon is not None and self.epsilon <= 0:
            raise DistributionError("epsilon must be positive when given")

    def effective_epsilon(self) -> float:
        # At desk scale the back-off must beat the 1/n type granularity.
        if self.epsilon is not None:
            return self.epsilon
        return max(0.01, 2.0 * math.log(2.0) / self.n)


@dataclass(frozen=True)
class GoodCodeReport:
    """Outcome of the competitor-floor check over all (message, output)."""

    holds: bool
    worst_margin: float
    witness: tuple[int, tuple[int, ...]]
    exhaustive: bool
    n_checked: int
    epsilon: float

    def to_json(self) -> dict:
        return {
            "holds": self.holds,
            "worst_margin": self.worst_margin,
            "witness_message": self.witness[0],
            "witness_output": list(self.witness[1]),
            "exhaustive": self.exhaustive,
            "n_checked": self.n_checked,
            "epsilon": self.epsilon,
        }


def nearest_valid_blocklength(q_x: Distribution, n: int, span: int = 10000) -> int | None:
    """Closest blocklength to n at which n times the composition is integral."""
    for delta in range(0, span + 1):
        for cand in ((n - delta, n + delta) if delta else (n,)):
            if cand >= 1:
                target = q_x.p * cand
                if np.max(np.abs(target - np.rint(target))) <= 1e-9:
                    return cand
    return None


def sample_code(q_x: Distribution, n: int, M: int, rng: np.random.Generator) -> Codebook:
    """M independent uniform draws from the type class of q_x.

    Each word is a random permutation of the fixed symbol multiset.
    Rejects non-integral compositions, naming the nearest blocklength
    that works.
    """
    if n < 1 or M < 1:
        raise DistributionError("need n >= 1 and M >= 1")
    target = q_x.p * n
    counts = np.rint(target)
    if np.max(np.abs(target - counts)) > 1e-9:
        near = nearest_valid_blocklength(q_x, n)
        hint = f"; nearest valid blocklength is {near}" if near is not None else ""
        raise DistributionError(f"composition is not integral at blocklength {n}{hint}")
    multiset = np.repeat(np.arange(q_x.size), counts.astype(np.int64))
    words = np.stack([rng.permutation(multiset) for _ in range(M)])
    return Codebook(words, q_x)


# ---------------------------------------------------------------------------
# Decoder.


def _word_scores(words: np.ndarray, y: np.ndarray, metric: Metric) -> np.ndarray:
    """Total score n*g(joint type of word and y) for every word; exact sums.

    For affine metrics the total is a plain sum of cell values along the
    block, so no type matrix is ever formed.
    """
    if metric.is_affine:
        return metric.cells[words, y[None, :]].sum(axis=1)
    m, n = words.shape
    kx, l = metric.x_size, metric.y_size
    code = words * l + y[None, :]
    counts = np.zeros((m, kx * l))
    np.add.at(counts, (np.repeat(np.arange(m), n), code.reshape(-1)), 1.0)
    counts /= n
    j = counts.reshape(m, kx, l)
    hx = _ent(j.sum(axis=2))
    hy = _ent(j.sum(axis=1))
    hxy = _ent(counts)
    return n * np.maximum(hx + hy - hxy, 0.0)


def _ent(a: np.ndarray) -> np.ndarray:
    safe = np.where(a > 0, a, 1.0)
    return -np.sum(a * np.log(safe), axis=-1)


def _softmax_rows(scores: np.ndarray) -> np.ndarray:
    """Row-wise softmax with max subtraction; all -inf rows go uniform."""
    m = scores.shape[-1]
    mx = np.max(scores, axis=-1, keepdims=True)
    degenerate = ~np.isfinite(mx[..., 0])
    with np.errstate(invalid="ignore"):
        shifted = np.where(np.isfinite(mx), scores - mx, 0.0)
    e = np.exp(shifted)
    e = np.where(np.isneginf(scores), 0.0, e)
    tot = e.sum(axis=-1, keepdims=True)
    out = np.where(degenerate[..., None], 1.0 / m, e / np.where(tot > 0, tot, 1.0))
    return out


def gld_posterior(codebook: Codebook, y, metric: Metric) -> Distribution:
    """Decoder's distribution over messages given the output block y.

    Probabilities are proportional to exp(n * score).  If every score
    is -inf the posterior is defined as uniform (degenerate case,
    logged); such outputs carry no channel mass under a matched metric.
    """
    y = np.asarray(y, dtype=np.int64)
    if y.shape != (codebook.blocklength,):
        raise DistributionError("output length does not match the codebook blocklength")
    scores = _word_scores(codebook.words, y, metric)
    if not np.any(np.isfinite(scores)):
        log.debug("all-forbidden output %s: posterior set to uniform", y)
    return Distribution(_softmax_rows(scores[None, :])[0])


def gld_decode(codebook: Codebook, y, metric: Metric, rng: np.random.Generator) -> int:
    """One sample from gld_posterior, via a single inverse-CDF uniform."""
    post = gld_posterior(codebook, y, metric)
    u = rng.random()
    c = np.cumsum(post.p)
    return int(min(np.searchsorted(c, u, side="right"), codebook.size - 1))


# ---------------------------------------------------------------------------
# Error probability.


def _output_blocks(l: int, n: int, start: int, stop: int) -> np.ndarray:
    idx = np.arange(start, stop, dtype=np.int64)
    out = np.empty((idx.size, n), dtype=np.int64)
    for t in range(n):
        out[:, t] = (idx // l ** (n - 1 - t)) % l
    return out


def _block_scores(words: np.ndarray, ys: np.ndarray, metric: Metric) -> np.ndarray:
    """Scores for a block of outputs: (n_outputs, M)."""
    m, n = words.shape
    if metric.is_affine:
        out = np.empty((ys.shape[0], m))
        for j in range(m):
            out[:, j] = metric.cells[words[j][None, :], ys].sum(axis=1)
        return out
    kx, l = metric.x_size, metric.y_size
    out = np.empty((ys.shape[0], m))
    c = ys.shape[0]
    rows = np.repeat(np.arange(c), n)
    for j in range(m):
        code = (words[j][None, :] * l + ys).reshape(-1)
        counts = np.zeros((c, kx * l))
        np.add.at(counts, (rows, code), 1.0)
        counts /= n
        t = counts.reshape(c, kx, l)
        mi = np.maximum(_ent(t.sum(axis=2)) + _ent(t.sum(axis=1)) - _ent(counts), 0.0)
        out[:, j] = n * mi
    return out


def exact_error_probability(
    codebook: Codebook,
    m: int,
    channel: Channel,
    metric: Metric,
    budget: int = _ENUM_BUDGET,
    workers: int = 1,
) -> float:
    """Exact decoding error for message m by full output enumeration.

    Sums W(y | word m) * (1 - posterior_m(y)) over every output block
    in lexicographic order with a fixed-order reduction.  Rejects runs
    whose output space exceeds the budget, pointing at Monte Carlo.
    """
    n = codebook.blocklength
    l = channel.output_size
    total_outputs = l**n
    if total_outputs > budget:
        raise DistributionError(
            f"output space {l}^{n} exceeds the enumeration budget {budget}; "
            "use monte_carlo_error instead"
        )
    if not (0 <= m < codebook.size):
        raise DistributionError(f"message index {m} out of range")
    word = codebook.words[m]
    with np.errstate(divide="ignore"):
        logw = np.where(channel.matrix > 0, np.log(np.where(channel.matrix > 0, channel.matrix, 1.0)), -math.inf)

    def chunk(start: int, stop: int) -> float:
        ys = _output_blocks(l, n, start, stop)
        lp = logw[word[None, :], ys].sum(axis=1)
        wmass = np.exp(lp)
        scores = _block_scores(codebook.words, ys, metric)
        post = _softmax_rows(scores)
        return float(np.dot(wmass, 1.0 - post[:, m]))

    parts = ordered_chunk_map(chunk, total_outputs, 1 << 14, workers)
    return min(max(math.fsum(parts), 0.0), 1.0)


def monte_carlo_error(
    codebook: Codebook,
    m: int,
    channel: Channel,
    metric: Metric,
    trials: int,
    rng: np.random.Generator,
    workers: int = 1,
) -> tuple[float, float]:
    """Monte Carlo estimate of the decoding error for message m.

    Sends word m through the channel and decodes, counting errors.
    Trials are grouped in fixed blocks, each with its own random stream
    derived from a master seed drawn once from ``rng``; the estimate is
    therefore identical for any worker count.  Returns (estimate,
    standard error).
    """
    if trials < 1:
        raise DistributionError("trials must be >= 1")
    if not (0 <= m < codebook.size):
        raise DistributionError(f"message index {m} out of range")
    master = int(rng.integers(1 << 63))
    word = codebook.words[m]
    n = codebook.blocklength
    cumw = np.cumsum(channel.matrix, axis=1)
    n_blocks = (trials + _MC_BLOCK - 1) // _MC_BLOCK

    def block(b0: int, b1: int) -> int:
        errors = 0
        for b in range(b0, b1):
            count = min(_MC_BLOCK, trials - b * _MC_BLOCK)
            sub = np.random.Generator(np.random.PCG64(np.random.SeedSequence((master, b))))
            u = sub.random((count, n + 1))
            ys = np.empty((count, n), dtype=np.int64)
            for t in range(n):
                ys[:, t] = np.searchsorted(cumw[word[t]], u[:, t], side="right")
            np.clip(ys, 0, channel.output_size - 1, out=ys)
            scores = _block_scores(codebook.words, ys, metric)
            post = _softmax_rows(scores)
            c = np.cumsum(post, axis=1)
            picks = (c > u[:, n][:, None]).argmax(axis=1)
            errors += int(np.sum(picks != m))
        return errors

    parts = ordered_chunk_map(block, n_blocks, 1, workers)
    p = sum(parts) / trials
    return p, math.sqrt(max(p * (1.0 - p), 0.0) / trials)


# ---------------------------------------------------------------------------
# Good-code property.


def check_good_code(
    codebook: Codebook,
    epsilon: float,
    metric: Metric,
    rate: float | None = None,
    *,
    floor_resolution: int = 16,
    budget: int = _ENUM_BUDGET,
    samples: int = 20000,
    rng: np.random.Generator | None = None,
    workers: int = 1,
) -> GoodCodeReport:
    """Verify the competitor-score floor for every message and output.

    For each message m and output y, the sum of exp(n * score) over the
    other codewords must reach exp(n * floor(rate - epsilon, type of
    y)).  worst_margin is the minimum of (1/n) ln(sum) minus the floor;
    the property holds when it is nonnegative.  Outputs beyond the
    enumeration budget are sampled instead, with ``exhaustive`` False.
    """
    m_count = codebook.size
    if m_count < 2:
        raise DistributionError("need at least two codewords")
    n = codebook.blocklength
    l = metric.y_size
    r = codebook.rate if rate is None else float(rate)
    if epsilon < 0 or epsilon > r:
        raise DistributionError(f"epsilon must lie in [0, rate]; got {epsilon} vs rate {r:g}")
    evaluator = CompetitorScoreEvaluator(metric, r - epsilon, l, floor_resolution)
    total_outputs = l**n
    exhaustive = total_outputs <= budget

    worst = [math.inf, (0, (0,) * n)]

    def process(ys: np.ndarray) -> None:
        scores = _block_scores(codebook.words, ys, metric)  # (C, M)
        c = ys.shape[0]
        types = np.zeros((c, l))
        np.add.at(types, (np.repeat(np.arange(c), n), ys.reshape(-1)), 1.0)
        types /= n
        uniq, first, inverse = np.unique(
            np.round(types, 12), axis=0, return_index=True, return_inverse=True
        )
        floors = evaluator.value_batch(types[first])[inverse]
        mx = scores.max(axis=1, keepdims=True)
        mx = np.where(np.isfinite(mx), mx, 0.0)
        e = np.where(np.isneginf(scores), 0.0, np.exp(scores - mx))
        tot = e.sum(axis=1, keepdims=True)
        with np.errstate(divide="ignore"):
            rest = np.maximum(tot - e, 0.0)
            lhs = (mx + np.where(rest > 0, np.log(np.where(rest > 0, rest, 1.0)), -math.inf)) / n
        margin = lhs - floors[:, None]
        flat = int(np.argmin(margin))
        yi, mi = divmod(flat, m_count)
        if margin[yi, mi] < worst[0]:
            worst[0] = float(margin[yi, mi])
            worst[1] = (int(mi), tuple(int(v) for v in ys[yi]))

    if exhaustive:
        spans = [(s, min(s + (1 << 14), total_outputs)) for s in range(0, total_outputs, 1 << 14)]
        for s, e_ in spans:
            process(_output_blocks(l, n, s, e_))
        checked = total_outputs
    else:
        gen = rng if rng is not None else np.random.default_rng(0)
        checked = min(samples, total_outputs)
        ys = gen.integers(0, l, size=(checked, n), dtype=np.int64)
        process(ys)

    return GoodCodeReport(
        holds=worst[0] >= 0,
        worst_margin=worst[0],
        witness=worst[1],
        exhaustive=exhaustive,
        n_checked=checked,
        epsilon=epsilon,
    )


# ---------------------------------------------------------------------------
# Expurgation.


def kept_indices(error_probs) -> np.ndarray:
    """Indices of the better half: smallest ceil(M/2) error probabilities.

    Ties break toward the smaller original index; the returned indices
    are sorted ascending.
    """
    probs = np.asarray(error_probs, dtype=np.float64)
    m = probs.size
    if m < 2:
        raise DistributionError("need at least two messages to expurgate")
    keep = (m + 1) // 2
    order = np.lexsort((np.arange(m), probs))
    return np.sort(order[:keep])


def half_expurgate(codebook: Codebook, error_probs) -> Codebook:
    """Drop the worse half of the code, keeping ceil(M/2) messages."""
    probs = np.asarray(error_probs, dtype=np.float64)
    if probs.size != codebook.size:
        raise DistributionError("error_probs length does not match the code size")
    idx = kept_indices(probs)
    return Codebook(codebook.words[idx], codebook.composition)


def markov_bound_check(
    codebook: Codebook,
    channel: Channel,
    metric: Metric,
    rho: float,
    error_probs=None,
) -> tuple[float, float, bool]:
    """Tilted-average inequality behind the expurgation step.

    lhs = (2/M) * sum of error_probs^(1/rho); rhs = (max error over the
    kept half)^(1/rho).  Must hold (lhs >= rhs - 1e-12) for every code
    and every rho >= 1.
    """
    if rho < 1:
        raise DistributionError(f"rho must be >= 1, got {rho}")
    if error_probs is None:
        error_probs = [
            exact_error_probability(codebook, m, channel, metric) for m in range(codebook.size)
        ]
    probs = np.asarray(error_probs, dtype=np.float64)
    m = probs.size
    lhs = float((2.0 / m) * np.sum(probs ** (1.0 / rho)))
    kept = kept_indices(probs)
    rhs = float(np.max(probs[kept]) ** (1.0 / rho))
    return lhs, rhs, lhs >= rhs - 1e-12


def empirical_exponent(
    q_x: Distribution,
    rate: float,
    channel: Channel,
    metric: Metric,
    n_list,
    codes_per_n: int,
    rng: np.random.Generator,
) -> list[dict]:
    """Finite-n exponent estimates from sampled expurgated codes.

    For each blocklength: draw codes, compute exact per-message errors,
    keep each code's better half, recompute errors within the kept code
    (fewer competitors can only help), and record the best (smallest)
    worst-case error across codes as -ln(err)/n.  Zero error is
    reported as +inf.  M = max(2, round(exp(n * rate))); the effective
    rate ln(M)/n is reported alongside.
    """
    master = int(rng.integers(1 << 63))
    out = []
    for n in n_list:
        m_size = max(2, int(round(math.exp(n * rate))))
        best = math.inf
        for c in range(codes_per_n):
            sub = np.random.Generator(np.random.PCG64(np.random.SeedSequence((master, n, c))))
            code = sample_code(q_x, n, m_size, sub)
            probs = [
                exact_error_probability(code, m, channel, metric) for m in range(m_size)
            ]
            pruned = half_expurgate(code, probs)
            worst = max(
                exact_error_probability(pruned, m, channel, metric)
                for m in range(pruned.size)
            )
            if worst < best:
                best = worst
        exponent = math.inf if best <= 0 else -math.log(best) / n
        out.append(
            {
                "n": int(n),
                "M": m_size,
                "effective_rate": math.log(m_size) / n,
                "best_max_error": best,
                "exponent": exponent,
            }
        )
    return out
