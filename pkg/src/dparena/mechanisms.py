"""Differentially private answering algorithms.

Noisy per-query release (Laplace), one-shot randomized response over sign
vectors, offline prefix release through an exponential mechanism over
small synthetic datasets, the BetweenThresholds halting comparator, the
online interior-point algorithm built on it, a noisy sorted partition,
and the adaptive threshold answerer that fans each query out to one
interior-point instance per chunk.

Privacy-parameter preconditions are validated with warnings rather than
hard failures so that lower-bound experiments can deliberately run
mechanisms outside their safe regimes.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from itertools import combinations_with_replacement
from typing import Optional, Sequence, Union

import numpy as np

from .core import (
    ConfigError,
    Dataset,
    ParameterError,
    PrivacyWarning,
    ProtocolError,
    laplace_sample,
)
from .protocol import Mechanism, Symbol
from .queries import (
    PrefixQuery,
    Query,
    StatisticalQuery,
    ThresholdQuery,
    as_sign_vector,
    eval_prefix,
    eval_statistical,
    restrict_universe,
)


# ---------------------------------------------------------------------------
# Per-query Laplace baseline
# ---------------------------------------------------------------------------


def laplace_mechanism(
    x: Dataset, q: Query, epsilon_per_query: float, rng: np.random.Generator
) -> float:
    """The exact answer plus Laplace(1/(n*epsilon)) noise, reported raw.

    Answers are deliberately not clamped to [0,1].
    """
    if not epsilon_per_query > 0:
        raise ParameterError(f"epsilon must be positive, got {epsilon_per_query}")
    truth = eval_statistical(q, x)
    return truth + laplace_sample(1.0 / (len(x) * epsilon_per_query), rng)


# ---------------------------------------------------------------------------
# Randomized response over sign vectors
# ---------------------------------------------------------------------------


def randomized_response_vector(
    x: Union[Dataset, np.ndarray, Sequence[int]], alpha: float, rng: np.random.Generator
) -> np.ndarray:
    """A noisy copy of a sign vector: each bit kept with probability (1+alpha)/2.

    The privacy claim (every per-bit likelihood ratio is at most
    e^(3*alpha)) requires alpha < 1/2; larger values are permitted for
    experiments but draw a :class:`PrivacyWarning`.
    """
    if not 0.0 < alpha < 1.0:
        raise ParameterError(f"alpha must lie in (0,1), got {alpha}")
    if alpha >= 0.5:
        warnings.warn(
            f"alpha={alpha} >= 1/2: randomized response carries no privacy claim here",
            PrivacyWarning,
            stacklevel=2,
        )
    xv = as_sign_vector(x)
    flips = rng.random(xv.shape[0]) < (1.0 - alpha) / 2.0
    return np.where(flips, -xv, xv).astype(np.int8)


# ---------------------------------------------------------------------------
# Exponential mechanism over synthetic datasets, and offline prefix release
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ExpMechConfig:
    """Configuration for the synthetic-dataset exponential mechanism.

    ``synthetic_size`` is the number of rows in each candidate dataset;
    all multisets of that size over the finite universe are enumerated,
    so ``comb(|X| + m - 1, m)`` must stay at or below ``candidate_cap``.
    """

    synthetic_size: int
    epsilon: float
    candidate_cap: int = 200_000

    def __post_init__(self) -> None:
        if self.synthetic_size < 1:
            raise ParameterError("synthetic_size must be at least 1")
        if not self.epsilon > 0:
            raise ParameterError(f"epsilon must be positive, got {self.epsilon}")


def synthetic_candidates(universe_size: int, m: int, cap: int) -> np.ndarray:
    """All size-m multisets over a universe of the given size, as count rows."""
    if universe_size < 1:
        raise ParameterError("universe must be nonempty")
    total = math.comb(universe_size + m - 1, m)
    if total > cap:
        raise ConfigError(
            f"enumerating {total} candidate datasets needs candidate_cap >= {total}, "
            f"got {cap}"
        )
    out = np.zeros((total, universe_size), dtype=np.int64)
    for row, combo in enumerate(combinations_with_replacement(range(universe_size), m)):
        for u in combo:
            out[row, u] += 1
    return out


def query_value_matrix(queries: Sequence, universe: Sequence) -> np.ndarray:
    """Per-element query values, shape (k, |universe|)."""
    k = len(queries)
    mat = np.zeros((k, len(universe)), dtype=np.float64)
    for j, q in enumerate(queries):
        if isinstance(q, PrefixQuery):
            mat[j] = [eval_prefix(q, u) for u in universe]
        elif isinstance(q, StatisticalQuery):
            mat[j] = [int(q.predicate(u)) for u in universe]
        elif callable(q):
            mat[j] = [int(q(u)) for u in universe]
        else:
            raise ParameterError(f"{type(q).__name__} cannot be tabulated over a universe")
    return mat


def exp_mech_scores(
    candidates: np.ndarray, query_matrix: np.ndarray, counts: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """Worst-query error of every candidate against the true histogram."""
    n = int(counts.sum())
    if n == 0:
        raise ParameterError("true histogram is empty")
    m = int(candidates[0].sum())
    truth = query_matrix @ counts / n
    cand_answers = candidates @ query_matrix.T / m
    scores = np.abs(cand_answers - truth).max(axis=1)
    return scores, truth


def exp_mech_distribution(
    counts: np.ndarray, query_matrix: np.ndarray, cfg: ExpMechConfig
) -> tuple[np.ndarray, np.ndarray]:
    """The exact selection distribution: (candidates, probabilities).

    Selection weight is exp(-(epsilon*n/2) * worst-query error); this is
    the oracle that the sampling path is tested against.
    """
    candidates = synthetic_candidates(query_matrix.shape[1], cfg.synthetic_size, cfg.candidate_cap)
    scores, _ = exp_mech_scores(candidates, query_matrix, counts)
    n = int(counts.sum())
    logw = -(cfg.epsilon * n / 2.0) * scores
    w = np.exp(logw - logw.max())
    return candidates, w / w.sum()


def exp_mech_select(
    counts: np.ndarray,
    query_matrix: np.ndarray,
    cfg: ExpMechConfig,
    rng: np.random.Generator,
    candidates: Optional[np.ndarray] = None,
) -> tuple[int, np.ndarray]:
    """Sample one candidate index via the Gumbel-max trick.

    Returns the index and the candidate count matrix (which may be
    passed in to amortize the enumeration across repeated draws).  Using
    Gumbel perturbation keeps the sampling route independent of the
    normalized probability table computed by
    :func:`exp_mech_distribution`.
    """
    if candidates is None:
        candidates = synthetic_candidates(
            query_matrix.shape[1], cfg.synthetic_size, cfg.candidate_cap
        )
    scores, _ = exp_mech_scores(candidates, query_matrix, counts)
    n = int(counts.sum())
    logw = -(cfg.epsilon * n / 2.0) * scores
    idx = int(np.argmax(logw + rng.gumbel(size=logw.shape[0])))
    return idx, candidates


def exp_mech_answers(
    universe: Sequence,
    counts: np.ndarray,
    queries: Sequence,
    cfg: ExpMechConfig,
    rng: np.random.Generator,
) -> list[float]:
    """Answer offline statistical queries from one sampled synthetic dataset."""
    counts = np.asarray(counts, dtype=np.int64)
    if len(universe) != counts.shape[0]:
        raise ParameterError("histogram length does not match the universe")
    qmat = query_value_matrix(queries, universe)
    idx, candidates = exp_mech_select(counts, qmat, cfg, rng)
    chosen = candidates[idx]
    m = int(chosen.sum())
    return [float(v) for v in (qmat @ chosen) / m]


def prefix_release(
    x: Dataset,
    queries: Sequence[PrefixQuery],
    cfg: ExpMechConfig,
    rng: np.random.Generator,
) -> list[float]:
    """Offline answers to prefix queries via universe reduction.

    Rows collapse onto the queries' own strings (plus the empty string),
    then the synthetic-dataset exponential mechanism answers all queries
    on the reduced data.  The result is invariant under pre-reducing the
    dataset, because the reduction map is idempotent.
    """
    universe, reduced = restrict_universe(queries, x)
    index = {u: i for i, u in enumerate(universe)}
    counts = np.zeros(len(universe), dtype=np.int64)
    for row in reduced.rows:
        counts[index[row]] += 1
    return exp_mech_answers(universe, counts, queries, cfg, rng)


# ---------------------------------------------------------------------------
# BetweenThresholds
# ---------------------------------------------------------------------------


@dataclass
class BetweenThresholdsState:
    """Mutable state of one BetweenThresholds run.

    A single shared draw mu shifts the lower threshold up and the upper
    threshold down, so noisy_lower + noisy_upper always equals
    t_lower + t_upper.  ``halted`` becomes true exactly when TOP is
    emitted and is permanent.
    """

    t_lower: float
    t_upper: float
    noisy_lower: float
    noisy_upper: float
    epsilon: float
    n: int
    halted: bool = False


def required_threshold_gap(epsilon: float, delta: float, n: int) -> float:
    """Minimum t_upper - t_lower for the privacy analysis to apply."""
    return (12.0 / (epsilon * n)) * (math.log(10.0 / epsilon) + math.log(1.0 / delta) + 1.0)


def init_between_thresholds(
    t_lower: float,
    t_upper: float,
    epsilon: float,
    n: int,
    rng: np.random.Generator,
    delta: Optional[float] = None,
) -> BetweenThresholdsState:
    """Draw the shared threshold noise mu ~ Lap(2/(epsilon*n)) once.

    When ``delta`` is supplied the threshold gap is checked against the
    privacy precondition and a :class:`PrivacyWarning` is issued if it is
    too small; the run proceeds either way.
    """
    if not (0.0 < t_lower <= t_upper < 1.0):
        raise ParameterError(f"thresholds ({t_lower}, {t_upper}) must satisfy 0 < tl <= tu < 1")
    if not epsilon > 0:
        raise ParameterError(f"epsilon must be positive, got {epsilon}")
    if n < 1:
        raise ParameterError(f"n must be at least 1, got {n}")
    if delta is not None:
        gap = required_threshold_gap(epsilon, delta, n)
        if t_upper - t_lower < gap:
            warnings.warn(
                f"threshold gap {t_upper - t_lower:.4g} below the {gap:.4g} required "
                f"for the ({epsilon}, {delta}) privacy claim",
                PrivacyWarning,
                stacklevel=2,
            )
    mu = laplace_sample(2.0 / (epsilon * n), rng)
    return BetweenThresholdsState(
        t_lower=t_lower,
        t_upper=t_upper,
        noisy_lower=t_lower + mu,
        noisy_upper=t_upper - mu,
        epsilon=epsilon,
        n=n,
    )


def between_thresholds_answer(
    state: BetweenThresholdsState, q_value: float, rng: np.random.Generator
) -> Symbol:
    """Compare a fresh noisy query value against the noisy thresholds.

    The caller supplies the exact query value; queries are sensitivity-
    1/n statistics by contract.  Returns LEFT below the noisy lower
    threshold, RIGHT above the noisy upper one, and otherwise TOP, which
    halts the instance permanently.
    """
    if state.halted:
        raise ProtocolError("BetweenThresholds already halted")
    c = q_value + laplace_sample(6.0 / (state.epsilon * state.n), rng)
    if c < state.noisy_lower:
        return Symbol.LEFT
    if c > state.noisy_upper:
        return Symbol.RIGHT
    state.halted = True
    return Symbol.TOP


# ---------------------------------------------------------------------------
# Online interior point
# ---------------------------------------------------------------------------


@dataclass
class InteriorPointState:
    """BetweenThresholds at (1/3, 2/3) plus the pivot fixed at its halt."""

    inner: BetweenThresholdsState
    pivot: Optional[float] = None


def interior_point_sample_size(epsilon: float, delta: float, beta: float, k: int) -> int:
    """Dataset size at which the interior-point contract holds with confidence beta."""
    return math.ceil(
        (36.0 / epsilon)
        * (
            math.log(k + 1)
            + math.log(1.0 / beta)
            + math.log(10.0 / epsilon)
            + math.log(1.0 / delta)
            + 1.0
        )
    )


def init_interior_point(
    epsilon: float, n: int, rng: np.random.Generator, delta: Optional[float] = None
) -> InteriorPointState:
    return InteriorPointState(
        inner=init_between_thresholds(1.0 / 3.0, 2.0 / 3.0, epsilon, n, rng, delta=delta)
    )


def interior_point_answer(
    state: InteriorPointState,
    y: float,
    data_sorted: np.ndarray,
    rng: np.random.Generator,
) -> Symbol:
    """Answer LEFT/RIGHT for one query point; never refuses.

    Before the inner comparator halts, the fraction of data at most y is
    fed to it (a TOP fixes the pivot at y and answers RIGHT).  Afterwards
    the pivot decides: y below the pivot answers LEFT, y at or above it
    answers RIGHT.
    """
    if state.pivot is not None:
        return Symbol.LEFT if y < state.pivot else Symbol.RIGHT
    n = data_sorted.shape[0]
    if n != state.inner.n:
        raise ParameterError(f"data length {n} != configured n {state.inner.n}")
    value = float(np.searchsorted(data_sorted, y, side="right")) / n
    sym = between_thresholds_answer(state.inner, value, rng)
    if sym is Symbol.TOP:
        state.pivot = y
        return Symbol.RIGHT
    return sym


# ---------------------------------------------------------------------------
# Noisy sorted partition
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PartitionResult:
    """A noisy equi-partition of the sorted dataset into M chunks.

    ``boundaries`` holds t_0..t_M as 1-based indices into the sorted
    data with t_0 = 1 and t_M = n+1; chunk m covers sorted positions
    [t_{m-1}, t_m - 1], so the chunks always concatenate back to the
    sorted dataset (empty chunks are permitted).
    """

    chunk_count: int
    boundaries: np.ndarray
    chunk_noise: np.ndarray
    chunks: tuple[np.ndarray, ...]


def partition_chunk_count(alpha: float) -> int:
    if not 0.0 < alpha < 1.0:
        raise ParameterError(f"alpha must lie in (0,1), got {alpha}")
    return 2 ** math.ceil(math.log2(2.0 / alpha))


def noisy_sorted_partition(
    x: Union[Dataset, np.ndarray, Sequence[float]],
    alpha: float,
    epsilon: float,
    rng: np.random.Generator,
) -> PartitionResult:
    """Sort the data and cut it at noisy multiples of n/M.

    The boundary noise eta_m sums one Laplace((log2 M)/epsilon) draw per
    prefix of m's binary representation, so nearby boundaries share
    noise.  After noising, boundaries are clamped monotone into
    [t_{m-1}, n+1]; under the usual accuracy event no clamping occurs.
    """
    values = x.values() if isinstance(x, Dataset) else np.asarray(x, dtype=np.float64)
    if not epsilon > 0:
        raise ParameterError(f"epsilon must be positive, got {epsilon}")
    m_chunks = partition_chunk_count(alpha)
    n = values.shape[0]
    if n < m_chunks:
        raise ParameterError(f"need n >= {m_chunks} rows for alpha={alpha}, got {n}")
    levels = int(math.log2(m_chunks))
    scale = levels / epsilon if levels > 0 else None

    data = np.sort(values)
    noise_by_level = [
        laplace_sample(scale, rng, size=1 << level) if scale is not None else np.zeros(1 << level)
        for level in range(levels + 1)
    ]
    eta = np.zeros(m_chunks - 1)
    for i, m in enumerate(range(1, m_chunks)):
        eta[i] = sum(noise_by_level[lvl][m >> (levels - lvl)] for lvl in range(levels + 1))

    boundaries = np.empty(m_chunks + 1, dtype=np.int64)
    boundaries[0] = 1
    boundaries[m_chunks] = n + 1
    for m in range(1, m_chunks):
        raw = math.floor(m * n / m_chunks + eta[m - 1])
        boundaries[m] = min(max(raw, boundaries[m - 1]), n + 1)

    chunks = tuple(
        data[boundaries[m - 1] - 1 : boundaries[m] - 1] for m in range(1, m_chunks + 1)
    )
    return PartitionResult(
        chunk_count=m_chunks, boundaries=boundaries, chunk_noise=eta, chunks=chunks
    )


# ---------------------------------------------------------------------------
# Protocol mechanisms
# ---------------------------------------------------------------------------


class ExactAnswerer(Mechanism):
    """Non-private oracle: answers real-valued queries exactly."""

    def answer(self, query: Query) -> float:
        self._check_not_halted()
        return eval_statistical(query, self.dataset)


class IdentityAnswerer(Mechanism):
    """Non-private oracle for correlated-vector queries: always answers x."""

    def answer(self, query: Query) -> np.ndarray:
        self._check_not_halted()
        return np.array(as_sign_vector(self.dataset))


class UniformNoiseAnswerer(Mechanism):
    """Truth plus uniform noise in [-alpha, alpha]; always alpha-accurate."""

    def __init__(self, alpha: float):
        if not alpha >= 0:
            raise ParameterError("alpha must be nonnegative")
        self.alpha = alpha

    def answer(self, query: Query) -> float:
        self._check_not_halted()
        truth = eval_statistical(query, self.dataset)
        return truth + self.rng.uniform(-self.alpha, self.alpha)


class LaplaceAnswerer(Mechanism):
    """Fresh Laplace noise per query at a fixed per-query epsilon."""

    def __init__(self, epsilon_per_query: float):
        if not epsilon_per_query > 0:
            raise ParameterError("epsilon must be positive")
        self.epsilon_per_query = epsilon_per_query

    def answer(self, query: Query) -> float:
        self._check_not_halted()
        return laplace_mechanism(self.dataset, query, self.epsilon_per_query, self.rng)


class RandomizedResponse(Mechanism):
    """One noisy copy of the sign-vector dataset answers every query.

    Query-oblivious by construction: the output is drawn at start and
    the queries are never read.
    """

    def __init__(self, alpha: float):
        self.alpha = alpha

    def start(self, dataset, rng: np.random.Generator) -> None:
        super().start(dataset, rng)
        self.release = randomized_response_vector(dataset, self.alpha, rng)

    def answer(self, query: Query) -> np.ndarray:
        self._check_not_halted()
        return self.release


class FreshRandomizedResponse(Mechanism):
    """An independent randomized-response draw for every query."""

    def __init__(self, alpha: float):
        self.alpha = alpha

    def start(self, dataset, rng: np.random.Generator) -> None:
        super().start(dataset, rng)
        self._x = as_sign_vector(dataset)

    def answer(self, query: Query) -> np.ndarray:
        self._check_not_halted()
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", PrivacyWarning)
            return randomized_response_vector(self._x, self.alpha, self.rng)


class PrefixRelease(Mechanism):
    """Offline-only prefix answering through the exponential mechanism."""

    def __init__(self, cfg: ExpMechConfig):
        self.cfg = cfg

    def answer(self, query: Query) -> float:
        raise ProtocolError("prefix release needs all queries at once; run it offline")

    def batch_answer(self, queries: Sequence[Query]) -> list[float]:
        return prefix_release(self.dataset, queries, self.cfg, self.rng)


class BetweenThresholdsMechanism(Mechanism):
    """Symbolic LEFT/RIGHT/TOP answers for real-valued queries."""

    def __init__(
        self,
        t_lower: float,
        t_upper: float,
        epsilon: float,
        delta: Optional[float] = None,
    ):
        self.t_lower = t_lower
        self.t_upper = t_upper
        self.epsilon = epsilon
        self.delta = delta

    def start(self, dataset, rng: np.random.Generator) -> None:
        super().start(dataset, rng)
        self.state = init_between_thresholds(
            self.t_lower, self.t_upper, self.epsilon, len(dataset), rng, delta=self.delta
        )

    def answer(self, query: Query) -> Symbol:
        self._check_not_halted()
        value = eval_statistical(query, self.dataset)
        sym = between_thresholds_answer(self.state, value, self.rng)
        self._halted = self.state.halted
        return sym


class InteriorPointMechanism(Mechanism):
    """LEFT/RIGHT answers to threshold queries on a unit-real dataset."""

    def __init__(self, epsilon: float, delta: Optional[float] = None):
        self.epsilon = epsilon
        self.delta = delta

    def start(self, dataset, rng: np.random.Generator) -> None:
        super().start(dataset, rng)
        self._sorted = np.sort(np.asarray(dataset.values() if isinstance(dataset, Dataset) else dataset))
        self.state = init_interior_point(self.epsilon, self._sorted.shape[0], rng, delta=self.delta)

    def answer(self, query: Query) -> Symbol:
        self._check_not_halted()
        y = query.tau if isinstance(query, ThresholdQuery) else float(query)
        return interior_point_answer(self.state, y, self._sorted, self.rng)


class AdaptiveThresholds(Mechanism):
    """Adaptive threshold answering via per-chunk interior-point instances.

    The dataset is partitioned into M noisy chunks of consecutive sorted
    elements; every chunk is normalized to the interior-point sample
    size (padding short chunks with a fixed element, keeping only the
    first elements of long ones) and gets its own interior-point
    instance with an independent noise stream.  Each threshold query is
    fanned out to all instances and answered with the fraction that said
    RIGHT, so answers always lie on the grid {0, 1/M, ..., 1}.
    """

    def __init__(
        self,
        alpha: float,
        beta: float,
        epsilon: float,
        delta: float,
        k: int,
        pad_value: float = 0.5,
        sample_size: Optional[int] = None,
    ):
        if not 0.0 < alpha < 1.0:
            raise ParameterError(f"alpha must lie in (0,1), got {alpha}")
        if not 0.0 < beta < 1.0:
            raise ParameterError(f"beta must lie in (0,1), got {beta}")
        if not 0.0 <= pad_value <= 1.0:
            raise ParameterError("pad_value must lie in [0,1]")
        self.alpha = alpha
        self.beta = beta
        self.epsilon = epsilon
        self.delta = delta
        self.k = k
        self.pad_value = pad_value
        self.instance_confidence = alpha * beta / 8.0
        self.sample_size = sample_size or interior_point_sample_size(
            epsilon, delta, self.instance_confidence, k
        )

    def start(self, dataset, rng: np.random.Generator) -> None:
        super().start(dataset, rng)
        self.partition = noisy_sorted_partition(dataset, self.alpha, self.epsilon, rng)
        n_prime = self.sample_size
        seeds = rng.integers(0, 2**63 - 1, size=self.partition.chunk_count)
        self._chunk_rngs = [np.random.Generator(np.random.PCG64(int(s))) for s in seeds]
        self._chunk_data = []
        self._instances = []
        for chunk, chunk_rng in zip(self.partition.chunks, self._chunk_rngs):
            if chunk.shape[0] < n_prime:
                pad = np.full(n_prime - chunk.shape[0], self.pad_value)
                normalized = np.sort(np.concatenate([chunk, pad]))
            else:
                normalized = chunk[:n_prime]
            self._chunk_data.append(normalized)
            self._instances.append(
                init_interior_point(self.epsilon, n_prime, chunk_rng, delta=self.delta)
            )

    def answer(self, query: Query) -> float:
        self._check_not_halted()
        y = query.tau if isinstance(query, ThresholdQuery) else float(query)
        return self.answer_value(y)

    def answer_value(self, y: float) -> float:
        rights = 0
        for state, data, chunk_rng in zip(self._instances, self._chunk_data, self._chunk_rngs):
            if interior_point_answer(state, y, data, chunk_rng) is Symbol.RIGHT:
                rights += 1
        return rights / self.partition.chunk_count

    def resolved_config(self) -> dict:
        """Everything a report needs to reproduce this run."""
        return {
            "alpha": self.alpha,
            "beta": self.beta,
            "epsilon": self.epsilon,
            "delta": self.delta,
            "k": self.k,
            "pad_value": self.pad_value,
            "chunk_count": partition_chunk_count(self.alpha),
            "instance_sample_size": self.sample_size,
            "instance_confidence": self.instance_confidence,
            "partition_noise_scale": math.log2(partition_chunk_count(self.alpha)) / self.epsilon,
            "threshold_noise_scale": 6.0 / (self.epsilon * self.sample_size),
            "gap_noise_scale": 2.0 / (self.epsilon * self.sample_size),
        }
