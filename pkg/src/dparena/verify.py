"""Statistical and numeric verification.

Monte Carlo estimation of the fingerprinting functional (correlation
plus error of any bounded test function on biased sign columns), an
exact closed-form check of the Laplace nested-interval mass ratio, and
an empirical differential-privacy auditor for mechanisms with small
transcript spaces.

Hoeffding intervals are used wherever an estimate is compared against a
hard bound, so no conclusion hinges on normality.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from .core import LANE_AUDIT, Dataset, ParameterError, RandomSource, adjacent
from .protocol import Mechanism, Query, Symbol


def hoeffding_half_width(value_range: float, trials: int, confidence: float = 0.99) -> float:
    """Two-sided Hoeffding half width for a mean of bounded samples."""
    if trials < 1:
        raise ParameterError("trials must be positive")
    if not 0.0 < confidence < 1.0:
        raise ParameterError("confidence must lie in (0,1)")
    return value_range * math.sqrt(math.log(2.0 / (1.0 - confidence)) / (2.0 * trials))


@dataclass(frozen=True)
class McEstimate:
    """A Monte Carlo mean with a 99% Hoeffding interval.

    ``value_range`` is the realized summand range the interval was
    computed from.
    """

    mean: float
    half_width: float
    trials: int
    value_range: float = 0.0

    @property
    def lower(self) -> float:
        return self.mean - self.half_width

    @property
    def upper(self) -> float:
        return self.mean + self.half_width


@dataclass(frozen=True)
class TestFunction:
    """A named map from sign vectors to [-1,1]; outputs are clamped.

    ``batch`` evaluates a whole (trials, n) block at once when provided;
    otherwise rows are evaluated one by one.
    """

    __test__ = False  # not a pytest class, despite the name

    name: str
    f: Callable[[np.ndarray], float]
    batch: Optional[Callable[[np.ndarray], np.ndarray]] = None

    def evaluate(self, rows: np.ndarray) -> np.ndarray:
        if self.batch is not None:
            vals = np.asarray(self.batch(rows), dtype=np.float64)
        else:
            vals = np.fromiter((self.f(row) for row in rows), dtype=np.float64, count=rows.shape[0])
        return np.clip(vals, -1.0, 1.0)


def standard_test_functions() -> list[TestFunction]:
    """An adversarial family: means, constants, single coordinates,
    majorities, and clamped linear forms."""

    def majority(rows: np.ndarray) -> np.ndarray:
        return np.where(rows.sum(axis=1) >= 0, 1.0, -1.0)

    return [
        TestFunction("mean", lambda c: float(np.mean(c)), batch=lambda r: r.mean(axis=1)),
        TestFunction("zero", lambda c: 0.0, batch=lambda r: np.zeros(r.shape[0])),
        TestFunction("one", lambda c: 1.0, batch=lambda r: np.ones(r.shape[0])),
        TestFunction(
            "first_coordinate", lambda c: float(c[0]), batch=lambda r: r[:, 0].astype(np.float64)
        ),
        TestFunction("majority", lambda c: 1.0 if np.sum(c) >= 0 else -1.0, batch=majority),
        TestFunction(
            "clamped_linear",
            lambda c: float(np.clip(3.0 * np.mean(c), -1.0, 1.0)),
            batch=lambda r: np.clip(3.0 * r.mean(axis=1), -1.0, 1.0),
        ),
    ]


def sample_bias_columns(
    n: int, trials: int, rng: np.random.Generator
) -> tuple[np.ndarray, np.ndarray]:
    """Biases uniform on [-1,1] and sign rows with those biases."""
    p = rng.uniform(-1.0, 1.0, size=trials)
    c = np.where(rng.random((trials, n)) < (1.0 + p[:, None]) / 2.0, 1.0, -1.0)
    return p, c


_MC_BLOCK = 20_000


def _mc_summary(summands_blocks: list[np.ndarray], trials: int) -> McEstimate:
    total = 0.0
    lo = math.inf
    hi = -math.inf
    for block in summands_blocks:
        total += float(block.sum())
        lo = min(lo, float(block.min()))
        hi = max(hi, float(block.max()))
    value_range = hi - lo
    return McEstimate(
        mean=total / trials,
        half_width=hoeffding_half_width(value_range, trials),
        trials=trials,
        value_range=value_range,
    )


def fingerprint_functional_mc(
    f: TestFunction, n: int, trials: int, rng: np.random.Generator
) -> McEstimate:
    """Estimate E[f(c) * sum_i(c_i - p) + 2|f(c) - mean(c)|].

    For every f bounded by 1 this expectation is at least 1/3; the
    summand is bounded by 2n + 4 and the interval uses the realized
    range.
    """
    if trials < 1_000:
        raise ParameterError(f"need at least 1000 trials, got {trials}")
    blocks = []
    done = 0
    while done < trials:
        block = min(_MC_BLOCK, trials - done)
        p, c = sample_bias_columns(n, block, rng)
        fvals = f.evaluate(c)
        corr = fvals * (c.sum(axis=1) - n * p)
        err = 2.0 * np.abs(fvals - c.mean(axis=1))
        blocks.append(corr + err)
        done += block
    return _mc_summary(blocks, trials)


def fingerprint_functional_sq_mc(
    f: TestFunction,
    n: int,
    trials: int,
    rng: np.random.Generator,
    center: str = "sample_mean",
) -> McEstimate:
    """Squared-error variant: the error term is (f - mean(c))^2, or
    (f - p)^2 with ``center="bias"``.  Both variants are at least 1/3 in
    expectation."""
    if trials < 1_000:
        raise ParameterError(f"need at least 1000 trials, got {trials}")
    if center not in ("sample_mean", "bias"):
        raise ParameterError(f"unknown center {center!r}")
    blocks = []
    done = 0
    while done < trials:
        block = min(_MC_BLOCK, trials - done)
        p, c = sample_bias_columns(n, block, rng)
        fvals = f.evaluate(c)
        corr = fvals * (c.sum(axis=1) - n * p)
        ref = c.mean(axis=1) if center == "sample_mean" else p
        blocks.append(corr + (fvals - ref) ** 2)
        done += block
    return _mc_summary(blocks, trials)


# ---------------------------------------------------------------------------
# Exact Laplace interval-ratio check
# ---------------------------------------------------------------------------


def laplace_cdf(x: float, scale: float) -> float:
    if not scale > 0:
        raise ParameterError(f"scale must be positive, got {scale}")
    if x < 0:
        return 0.5 * math.exp(x / scale)
    return 1.0 - 0.5 * math.exp(-x / scale)


def laplace_interval_mass(a: float, b: float, scale: float) -> float:
    return laplace_cdf(b, scale) - laplace_cdf(a, scale)


@dataclass(frozen=True)
class IntervalRatioResult:
    lhs: float
    rhs: float
    ok: bool


def laplace_interval_ratio_check(
    scale: float, a: float, b: float, a_outer: float, b_outer: float
) -> IntervalRatioResult:
    """Check the nested-interval mass inequality for Laplace noise.

    For [a,b] inside [a_outer,b_outer] and slack
    eta = (b_outer - a_outer) - (b - a), the outer mass never exceeds
    exp(eta/scale) / (1 - exp(-(b-a)/(2*scale))) times the inner mass.
    Both sides are evaluated with the closed-form CDF; no sampling.
    """
    if not (a_outer <= a < b <= b_outer):
        raise ParameterError(
            f"need a_outer <= a < b <= b_outer, got [{a},{b}] vs [{a_outer},{b_outer}]"
        )
    eta = (b_outer - a_outer) - (b - a)
    lhs = laplace_interval_mass(a_outer, b_outer, scale)
    multiplier = math.exp(eta / scale) / (1.0 - math.exp(-(b - a) / (2.0 * scale)))
    rhs = multiplier * laplace_interval_mass(a, b, scale)
    return IntervalRatioResult(lhs=lhs, rhs=rhs, ok=lhs <= rhs + 1e-12)


def laplace_interval_ratio_sweep(
    scales: Sequence[float], pairs_per_scale: int, rng: np.random.Generator
) -> list[IntervalRatioResult]:
    """Random nested interval pairs at several scales, all checked exactly."""
    results = []
    for scale in scales:
        for _ in range(pairs_per_scale):
            center = rng.uniform(-4.0 * scale, 4.0 * scale)
            width = rng.uniform(1e-3 * scale, 6.0 * scale)
            a = center - width / 2.0
            b = center + width / 2.0
            a_outer = a - rng.uniform(0.0, 2.0 * scale)
            b_outer = b + rng.uniform(0.0, 2.0 * scale)
            results.append(laplace_interval_ratio_check(scale, a, b, a_outer, b_outer))
    return results


# ---------------------------------------------------------------------------
# Empirical differential-privacy audit
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class AuditEvent:
    key: str
    count_x: int
    count_x2: int
    p_x: float
    p_x2: float
    margin: float
    ratio: float


@dataclass(frozen=True)
class AuditReport:
    """Outcome of one empirical audit.

    The verdict is either ``violation`` (some single-transcript event
    confidently exceeds the e^epsilon * p + delta budget) or
    ``inconclusive-pass``.  Absence of a confident violation is
    necessary, not sufficient; the audit never certifies privacy.
    """

    epsilon: float
    delta: float
    trials: int
    bins: int
    min_count: int
    confidence: float
    events: tuple[AuditEvent, ...]
    worst_margin: float
    worst_event: Optional[str]
    worst_ratio: float
    verdict: str

    @property
    def violation(self) -> bool:
        return self.verdict == "violation"


def _transcript_key(answers: list, bins: int) -> str:
    parts = []
    for a in answers:
        if isinstance(a, Symbol):
            parts.append(a.value)
        elif isinstance(a, np.ndarray):
            parts.append(",".join(str(int(v)) for v in a))
        else:
            v = min(max(float(a), 0.0), 1.0)
            parts.append(f"b{min(int(v * bins), bins - 1)}")
    return "|".join(parts)


def _collect_transcripts(
    mech_factory: Callable[[], Mechanism],
    dataset: Dataset,
    queries: Sequence[Query],
    trials: int,
    gen: np.random.Generator,
    bins: int,
) -> Counter:
    counts: Counter = Counter()
    for _ in range(trials):
        mech = mech_factory()
        mech.start(dataset, gen)
        answers = []
        for q in queries:
            answers.append(mech.answer(q))
            if mech.halted:
                break
        counts[_transcript_key(answers, bins)] += 1
    return counts


def empirical_dp_audit(
    mech_factory: Callable[[], Mechanism],
    x: Dataset,
    x2: Dataset,
    queries: Sequence[Query],
    trials: int,
    epsilon: float,
    delta: float,
    *,
    rng: RandomSource,
    bins: int = 64,
    min_count: int = 50,
    confidence: float = 0.999,
) -> AuditReport:
    """Statistical smoke test of the privacy inequality on one adjacent pair.

    Runs the committed query script ``trials`` times on each dataset,
    bins real answers into 64 equal cells of [0,1], and compares the
    frequency of every single transcript observed at least ``min_count``
    times against e^epsilon times its frequency on the neighbor plus
    delta, in both directions, using Hoeffding confidence bounds.  Only
    gross violations are caught; the report says ``inconclusive-pass``,
    never "private".
    """
    if not adjacent(x, x2):
        raise ParameterError("audited datasets must be adjacent")
    if trials < 1:
        raise ParameterError("trials must be positive")
    counts_x = _collect_transcripts(
        mech_factory, x, queries, trials, rng.generator(LANE_AUDIT, 0), bins
    )
    counts_x2 = _collect_transcripts(
        mech_factory, x2, queries, trials, rng.generator(LANE_AUDIT, 1), bins
    )
    hw = hoeffding_half_width(1.0, trials, confidence)
    e_eps = math.exp(epsilon)

    events = []
    worst_margin = -math.inf
    worst_event = None
    worst_ratio = 0.0
    keys = sorted(k for k in set(counts_x) | set(counts_x2)
                  if max(counts_x[k], counts_x2[k]) >= min_count)
    for key in keys:
        p1 = counts_x[key] / trials
        p2 = counts_x2[key] / trials
        margins = []
        for hi, lo in ((p1, p2), (p2, p1)):
            hi_lower = max(hi - hw, 0.0)
            lo_upper = min(lo + hw, 1.0)
            margins.append(hi_lower - (e_eps * lo_upper + delta))
        margin = max(margins)
        ratio = max(
            p1 / p2 if p2 > 0 else math.inf,
            p2 / p1 if p1 > 0 else math.inf,
        )
        events.append(
            AuditEvent(
                key=key, count_x=counts_x[key], count_x2=counts_x2[key],
                p_x=p1, p_x2=p2, margin=margin, ratio=ratio,
            )
        )
        if margin > worst_margin:
            worst_margin = margin
            worst_event = key
        worst_ratio = max(worst_ratio, ratio if math.isfinite(ratio) else worst_ratio)

    verdict = "violation" if worst_margin > 0 else "inconclusive-pass"
    return AuditReport(
        epsilon=epsilon,
        delta=delta,
        trials=trials,
        bins=bins,
        min_count=min_count,
        confidence=confidence,
        events=tuple(events),
        worst_margin=worst_margin if events else -math.inf,
        worst_event=worst_event,
        worst_ratio=worst_ratio,
        verdict=verdict,
    )
