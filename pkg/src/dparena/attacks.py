"""Adversaries that separate the three interaction models.

The fingerprinting adversary commits prefix queries whose exact answers
are biased column means and whose correlation statistic exposes any
row's presence; the reconstruction adversary chains correlated-vector
queries adaptively so a coordinate-wise majority recovers the dataset;
the binary-search adversary turns a threshold answerer into an
approximate-median finder.  A packing-dataset generator provides the
hard input family for median experiments.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence, Union

import numpy as np

from .core import BitString, Dataset, ParameterError, ProtocolError, RandomSource
from .protocol import (
    Adversary,
    Answer,
    FixedQueryAdversary,
    Mechanism,
    Query,
    Transcript,
    run_adaptive,
    run_online,
)
from .queries import (
    CorrelatedVectorQuery,
    PrefixQuery,
    ThresholdQuery,
    as_sign_vector,
)


# ---------------------------------------------------------------------------
# Fingerprinting instances
# ---------------------------------------------------------------------------


def binary_row_id(i: int, width: int) -> tuple[int, ...]:
    """Encode row index i (1-based) as width sign symbols, 1 -> +1, 0 -> -1.

    Any fixed injective encoding works; this one writes i-1 in binary,
    most significant bit first.
    """
    value = i - 1
    if not 0 <= value < (1 << width):
        raise ParameterError(f"row index {i} does not fit in {width} bits")
    return tuple(1 if (value >> (width - 1 - b)) & 1 else -1 for b in range(width))


@dataclass(frozen=True)
class FingerprintInstance:
    """A correlated dataset plus the prefix queries that read its columns.

    ``columns[j]`` is the j-th column of sign bits (length n, mean
    bias[j]); row i of the dataset is its binary identifier followed by
    its k column bits, and query j matches exactly the rows whose j-th
    column bit is +1.
    """

    bias: np.ndarray
    columns: np.ndarray
    dataset: Dataset
    queries: tuple[PrefixQuery, ...]

    @property
    def n(self) -> int:
        return self.columns.shape[1]

    @property
    def k(self) -> int:
        return self.columns.shape[0]

    def exact_sign_answers(self) -> np.ndarray:
        """The exact answers on the [-1,1] scale: the column sign means.

        By construction the prefix query for column j selects exactly
        the rows with a +1 in that column, so the exact statistical
        answer is the column's +1-fraction and this is its affine twin.
        """
        return self.columns.mean(axis=1)


def make_fingerprint_instance(n: int, k: int, rng: np.random.Generator) -> FingerprintInstance:
    """Sample biases uniform on [-1,1], then columns, rows, and queries."""
    if n < 2 or k < 1:
        raise ParameterError(f"need n >= 2 and k >= 1, got n={n}, k={k}")
    width = math.ceil(math.log2(n))
    bias = rng.uniform(-1.0, 1.0, size=k)
    columns = np.where(rng.random((k, n)) < (1.0 + bias[:, None]) / 2.0, 1, -1).astype(np.int8)

    ids = [binary_row_id(i, width) for i in range(1, n + 1)]
    rows = [
        BitString.from_signs(ids[i - 1] + tuple(int(v) for v in columns[:, i - 1]))
        for i in range(1, n + 1)
    ]
    queries = []
    for j in range(1, k + 1):
        strings = [
            BitString.from_signs(
                ids[i - 1] + tuple(int(v) for v in columns[: j - 1, i - 1]) + (1,)
            )
            for i in range(1, n + 1)
        ]
        q = PrefixQuery(tuple(strings))
        if len(q.strings) != n:
            raise AssertionError("query strings collided; row identifiers must be unique")
        queries.append(q)
    return FingerprintInstance(
        bias=bias, columns=columns, dataset=Dataset.bit_strings(rows), queries=tuple(queries)
    )


@dataclass(frozen=True)
class FingerprintStatistic:
    """The per-row correlation statistic of one answered run."""

    z: float
    per_row: np.ndarray
    argmax: int


def fingerprint_statistic(
    answers: Sequence[float], instance: FingerprintInstance, i_star: int
) -> FingerprintStatistic:
    """Z = sum_j a_j * (c[j, i_star] - bias[j]), answers on the [-1,1] scale.

    Also returns the whole per-row vector and the index maximizing it;
    the maximum is a strictly stronger witness than any single row.
    """
    a = np.asarray(answers, dtype=np.float64)
    if a.shape[0] != instance.k:
        raise ParameterError(f"expected {instance.k} answers, got {a.shape[0]}")
    if not 0 <= i_star < instance.n:
        raise ParameterError(f"row index {i_star} out of range")
    centered = instance.columns.astype(np.float64) - instance.bias[:, None]
    per_row = a @ centered
    return FingerprintStatistic(
        z=float(per_row[i_star]), per_row=per_row, argmax=int(np.argmax(per_row))
    )


def fingerprint_sum_statistic(answers: Sequence[float], instance: FingerprintInstance) -> float:
    """sum_i Z_i = sum_j a_j * sum_i (c[j,i] - bias[j])."""
    a = np.asarray(answers, dtype=np.float64)
    col_sums = instance.columns.sum(axis=1).astype(np.float64)
    return float(a @ (col_sums - instance.n * instance.bias))


def to_sign_scale(answers: Sequence[float], clip: bool = True) -> np.ndarray:
    """Map [0,1]-scale statistical answers onto the [-1,1] scale."""
    a = 2.0 * np.asarray(answers, dtype=np.float64) - 1.0
    return np.clip(a, -1.0, 1.0) if clip else a


def run_fingerprint_experiment(
    mechanism: Mechanism, instance: FingerprintInstance, rng: RandomSource
) -> tuple[Transcript, FingerprintStatistic]:
    """Commit the instance's queries online and score the answers."""
    adversary = FixedQueryAdversary(instance.queries)
    transcript = run_online(mechanism, adversary, instance.dataset, instance.k, rng)
    answers = to_sign_scale([float(a) for a in transcript.answers()])
    stat = fingerprint_statistic(answers, instance, 0)
    return transcript, FingerprintStatistic(
        z=float(stat.per_row[stat.argmax]), per_row=stat.per_row, argmax=stat.argmax
    )


# ---------------------------------------------------------------------------
# Adaptive reconstruction through correlated-vector queries
# ---------------------------------------------------------------------------


class ReconstructionAdversary(Adversary):
    """Asks for vectors correlated with x but uncorrelated with all
    previous answers, which forces fresh information out of the
    mechanism on every query.

    Structurally adaptive: each query's constraint set is the list of
    answers received so far, so this adversary cannot pre-commit and the
    offline/online engines reject it.
    """

    def __init__(self, alpha: float, k: Optional[int] = None, tolerance: Optional[float] = None):
        if not 0.0 < alpha < 1.0:
            raise ParameterError(f"alpha must lie in (0,1), got {alpha}")
        self.alpha = alpha
        self.queries_needed = k if k is not None else math.ceil(100.0 / alpha**2)
        self.tolerance = tolerance
        self._buffer: Optional[np.ndarray] = None
        self._stored = 0

    def _absorb(self, history: Sequence[tuple[Query, Answer]]) -> None:
        # Copy each answer into a preallocated buffer once; the queries
        # then carry growing read-only views instead of fresh stacks.
        for _, answer in list(history)[self._stored :]:
            if not isinstance(answer, np.ndarray):
                raise ProtocolError(
                    f"reconstruction needs sign-vector answers, got {type(answer).__name__}"
                )
            if self._buffer is None:
                self._buffer = np.empty((self.queries_needed, answer.shape[0]), dtype=np.int8)
            self._buffer[self._stored] = answer
            self._stored += 1

    def next_query(self, history: Sequence[tuple[Query, Answer]]) -> Optional[Query]:
        if len(history) >= self.queries_needed:
            return None
        self._absorb(history)
        if self._buffer is None:
            constraints = np.zeros((0, 0), dtype=np.int8)
        else:
            constraints = self._buffer[: self._stored]
            constraints.setflags(write=False)
        return CorrelatedVectorQuery.trusted(constraints, self.alpha, tolerance=self.tolerance)


@dataclass(frozen=True)
class ReconstructionRun:
    """Everything the reconstruction experiment measured in one run."""

    alpha: float
    answers: tuple[np.ndarray, ...]
    reconstruction: np.ndarray
    overlap: int
    transcript: Transcript


def majority_vote(answers: Sequence[np.ndarray]) -> np.ndarray:
    """Coordinate-wise majority with ties resolved to +1."""
    total = np.sum(np.stack(answers).astype(np.int64), axis=0)
    return np.where(total >= 0, 1, -1).astype(np.int8)


def run_reconstruction(
    mechanism: Mechanism,
    x: Union[Dataset, np.ndarray],
    alpha: float,
    k: Optional[int] = None,
    *,
    rng: RandomSource,
    tolerance: Optional[float] = None,
) -> ReconstructionRun:
    """Drive the adaptive query sequence and vote on the answers."""
    xv = as_sign_vector(x)
    adversary = ReconstructionAdversary(alpha, k, tolerance=tolerance)
    transcript = run_adaptive(mechanism, adversary, x, adversary.queries_needed, rng)
    answers = []
    for _, a in transcript.pairs:
        if not isinstance(a, np.ndarray):
            raise ProtocolError(
                f"reconstruction needs sign-vector answers, got {type(a).__name__}"
            )
        answers.append(as_sign_vector(a))
    recon = majority_vote(answers)
    return ReconstructionRun(
        alpha=alpha,
        answers=tuple(answers),
        reconstruction=recon,
        overlap=int(recon.astype(np.int64) @ xv.astype(np.int64)),
        transcript=transcript,
    )


def reconstruction_hypotheses(
    answers: Sequence[np.ndarray], x: Union[Dataset, np.ndarray]
) -> tuple[float, float]:
    """Empirical (a, b): min correlation with x, max pairwise correlation.

    Computed per coordinate count over n, so the majority-overlap bound
    applies verbatim whenever both land in [0,1].
    """
    xv = as_sign_vector(x).astype(np.float32)
    n = xv.shape[0]
    stacked = np.stack(answers).astype(np.float32)
    a = float((stacked @ xv).min() / n)
    gram = stacked @ stacked.T
    off_diag = np.abs(gram[~np.eye(gram.shape[0], dtype=bool)])
    b = float(off_diag.max() / n) if off_diag.size else 0.0
    return a, b


def majority_overlap_bound(a: float, b: float, k: int) -> float:
    """Lower-bound coefficient for the majority vote's overlap with x.

    Whenever every answer has correlation at least a*n with x and every
    pair of answers has correlation at most b*n in magnitude, the
    majority vote satisfies <majority, x> >= bound * n.
    """
    if not 0.0 <= a <= 1.0 or not 0.0 <= b <= 1.0:
        raise ParameterError(f"(a, b) must lie in [0,1]^2, got ({a}, {b})")
    if a == 0.0:
        raise ParameterError("the bound is undefined at a = 0")
    if k < 1:
        raise ParameterError(f"k must be at least 1, got {k}")
    return 1.0 - 2.0 / (a**2 * k) - 2.0 * (b - a**2) / a**2


# ---------------------------------------------------------------------------
# Binary-search median through threshold queries
# ---------------------------------------------------------------------------


class MedianBinarySearchAdversary(Adversary):
    """Bisect the ordered domain {1..T}, treating answers >= 1/2 as 'go left'.

    Thresholds are issued as tau = m/T on the unit interval; integer
    datasets are expected to be embedded the same way (value v stored as
    v/T).  Declines further queries once the bracket closes, at which
    point ``result`` holds the located point.
    """

    def __init__(self, domain_size: int):
        if domain_size < 2:
            raise ParameterError(f"domain size must be at least 2, got {domain_size}")
        self.domain_size = domain_size
        self.lo = 0
        self.hi = domain_size
        self._last_m: Optional[int] = None
        self.result: Optional[int] = None

    def next_query(self, history: Sequence[tuple[Query, Answer]]) -> Optional[Query]:
        if self.result is not None:
            return None
        if self._last_m is not None:
            last_answer = float(history[-1][1])
            if last_answer >= 0.5:
                self.hi = self._last_m
            else:
                self.lo = self._last_m
            self._last_m = None
        if self.hi - self.lo <= 1:
            self.result = self.hi
            return None
        self._last_m = math.ceil((self.hi + self.lo) / 2)
        return ThresholdQuery(self._last_m / self.domain_size)


def median_query_budget(domain_size: int) -> int:
    """The binary search never issues more queries than this."""
    return math.ceil(1 + math.log2(domain_size))


@dataclass(frozen=True)
class MedianSearchResult:
    median: int
    query_count: int
    transcript: Transcript


def run_median_search(
    mechanism: Mechanism, x: Dataset, domain_size: int, *, rng: RandomSource
) -> MedianSearchResult:
    adversary = MedianBinarySearchAdversary(domain_size)
    transcript = run_adaptive(mechanism, adversary, x, median_query_budget(domain_size), rng)
    if adversary.result is None:
        # Budget exhausted before the bracket closed; finish the update.
        adversary.next_query(transcript.pairs)
    if adversary.result is None:
        raise ProtocolError("binary search did not converge within its query budget")
    return MedianSearchResult(
        median=adversary.result, query_count=len(transcript.pairs), transcript=transcript
    )


def is_approx_median(values: Union[Dataset, np.ndarray], y: float, alpha: float) -> bool:
    """True iff at least a (1/2 - alpha) fraction of rows lies on each side of y."""
    arr = values.values() if isinstance(values, Dataset) else np.asarray(values, dtype=np.float64)
    n = arr.shape[0]
    if n == 0:
        raise ParameterError("empty dataset has no median")
    lower = np.count_nonzero(arr <= y) / n
    upper = np.count_nonzero(arr >= y) / n
    return lower >= 0.5 - alpha and upper >= 0.5 - alpha


def packing_dataset(domain_size: int, t: int, n: int, alpha: float) -> Dataset:
    """The hard median family: extremes at 1 and T, bulk pinned at t.

    Contains m copies of 1, m copies of T, and n-2m copies of t with
    m = ceil((1/2 - alpha) * n) - 1, embedded into [0,1] as v/T.  For
    alpha < 1/2 - m/n the point t is the unique alpha-approximate
    median.
    """
    if not 1 <= t <= domain_size:
        raise ParameterError(f"t={t} outside ordered domain of size {domain_size}")
    m = math.ceil((0.5 - alpha) * n) - 1
    if m < 0 or n - 2 * m < 1:
        raise ParameterError(f"degenerate packing: n={n}, alpha={alpha} give m={m}")
    values = (
        [1.0 / domain_size] * m + [float(t) / domain_size] * (n - 2 * m) + [1.0] * m
    )
    return Dataset.unit_reals(values)
