"""Experiment configuration, trial execution, and reporting.

A config names an interaction model, a mechanism, an adversary, and a
dataset source; compatibility is validated before anything runs.  Trials
are embarrassingly parallel: trial i derives every stream it needs from
(seed, i), so reports are deterministic for a fixed seed regardless of
thread count.
"""

from __future__ import annotations

import csv
import json
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Optional, Sequence

import numpy as np

from .attacks import (
    MedianBinarySearchAdversary,
    ReconstructionAdversary,
    fingerprint_statistic,
    is_approx_median,
    majority_overlap_bound,
    majority_vote,
    make_fingerprint_instance,
    packing_dataset,
    reconstruction_hypotheses,
    to_sign_scale,
)
from .core import (
    LANE_DATA,
    ConfigError,
    Dataset,
    RandomSource,
    load_dataset,
)
from .mechanisms import (
    AdaptiveThresholds,
    BetweenThresholdsMechanism,
    ExactAnswerer,
    ExpMechConfig,
    FreshRandomizedResponse,
    IdentityAnswerer,
    InteriorPointMechanism,
    LaplaceAnswerer,
    PrefixRelease,
    RandomizedResponse,
    UniformNoiseAnswerer,
)
from .protocol import (
    RUNNERS,
    Adversary,
    CommittedAdversary,
    FixedQueryAdversary,
    InteractionModel,
    Mechanism,
    Symbol,
    Transcript,
    max_loss,
    write_transcript,
)
from .queries import (
    CorrelatedVectorQuery,
    PrefixQuery,
    Query,
    ThresholdQuery,
    load_queries,
)
from .verify import hoeffding_half_width

# Stream id reserved for datasets shared by every trial.
SHARED_DATASET_STREAM = 1 << 48


@dataclass
class ExperimentConfig:
    """A fully specified experiment; JSON-serializable."""

    model: str
    mechanism: dict
    adversary: dict
    dataset: dict
    k: int
    trials: int
    seed: int
    accuracy_alpha: Optional[float] = None
    threads: int = 1
    output: Optional[str] = None
    transcripts_dir: Optional[str] = None

    @classmethod
    def from_json(cls, obj: dict) -> "ExperimentConfig":
        known = {f for f in cls.__dataclass_fields__}
        extra = set(obj) - known
        if extra:
            raise ConfigError(f"unknown config fields: {sorted(extra)}")
        missing = {"model", "mechanism", "adversary", "dataset", "k", "trials", "seed"} - set(obj)
        if missing:
            raise ConfigError(f"missing config fields: {sorted(missing)}")
        return cls(**obj)

    def to_json(self) -> dict:
        return {
            "model": self.model,
            "mechanism": self.mechanism,
            "adversary": self.adversary,
            "dataset": self.dataset,
            "k": self.k,
            "trials": self.trials,
            "seed": self.seed,
            "accuracy_alpha": self.accuracy_alpha,
            "threads": self.threads,
            "output": self.output,
            "transcripts_dir": self.transcripts_dir,
        }


# ---------------------------------------------------------------------------
# Mechanism registry
# ---------------------------------------------------------------------------

ALL_MODELS = {"offline", "online", "adaptive"}
REAL_QUERIES = {"prefix", "threshold", "statistical"}


@dataclass(frozen=True)
class MechanismSpec:
    build: Callable[[dict, int], Callable[[], Mechanism]]
    answers: frozenset
    models: frozenset


def _need(params: dict, key: str, kind=float):
    if key not in params:
        raise ConfigError(f"mechanism/adversary parameter {key!r} is required")
    return kind(params[key])


MECHANISMS: dict[str, MechanismSpec] = {
    "exact": MechanismSpec(
        lambda p, k: ExactAnswerer,
        frozenset(REAL_QUERIES),
        frozenset(ALL_MODELS),
    ),
    "identity": MechanismSpec(
        lambda p, k: IdentityAnswerer,
        frozenset({"corr"}),
        frozenset(ALL_MODELS),
    ),
    "uniform_noise": MechanismSpec(
        lambda p, k: (lambda: UniformNoiseAnswerer(_need(p, "alpha"))),
        frozenset(REAL_QUERIES),
        frozenset(ALL_MODELS),
    ),
    "laplace": MechanismSpec(
        lambda p, k: (lambda: LaplaceAnswerer(_need(p, "epsilon_per_query"))),
        frozenset(REAL_QUERIES),
        frozenset(ALL_MODELS),
    ),
    "randomized_response": MechanismSpec(
        lambda p, k: (lambda: RandomizedResponse(_need(p, "alpha"))),
        frozenset({"corr"}),
        frozenset(ALL_MODELS),
    ),
    "fresh_randomized_response": MechanismSpec(
        lambda p, k: (lambda: FreshRandomizedResponse(_need(p, "alpha"))),
        frozenset({"corr"}),
        frozenset(ALL_MODELS),
    ),
    "prefix_release": MechanismSpec(
        lambda p, k: (
            lambda: PrefixRelease(
                ExpMechConfig(
                    synthetic_size=int(_need(p, "synthetic_size", int)),
                    epsilon=_need(p, "epsilon"),
                    candidate_cap=int(p.get("candidate_cap", 200_000)),
                )
            )
        ),
        frozenset({"prefix"}),
        frozenset({"offline"}),
    ),
    "between_thresholds": MechanismSpec(
        lambda p, k: (
            lambda: BetweenThresholdsMechanism(
                _need(p, "t_lower"),
                _need(p, "t_upper"),
                _need(p, "epsilon"),
                delta=p.get("delta"),
            )
        ),
        frozenset(REAL_QUERIES),
        frozenset(ALL_MODELS),
    ),
    "interior_point": MechanismSpec(
        lambda p, k: (lambda: InteriorPointMechanism(_need(p, "epsilon"), delta=p.get("delta"))),
        frozenset({"threshold"}),
        frozenset(ALL_MODELS),
    ),
    "adaptive_thresholds": MechanismSpec(
        lambda p, k: (
            lambda: AdaptiveThresholds(
                alpha=_need(p, "alpha"),
                beta=_need(p, "beta"),
                epsilon=_need(p, "epsilon"),
                delta=_need(p, "delta"),
                k=k,
                pad_value=float(p.get("pad_value", 0.5)),
            )
        ),
        frozenset({"threshold"}),
        frozenset(ALL_MODELS),
    ),
}


# ---------------------------------------------------------------------------
# Adversary registry
# ---------------------------------------------------------------------------


@dataclass
class TrialContext:
    dataset: Dataset
    aux: Optional[object]
    k: int


class RandomPrefixAdversary(CommittedAdversary):
    """Commits k random bounded prefix queries."""

    def __init__(self, max_strings: int = 4, max_len: int = 6):
        self.max_strings = max_strings
        self.max_len = max_len

    def commit(self) -> Sequence[Query]:
        from .core import BitString

        queries = []
        for _ in range(self.k):
            count = int(self.rng.integers(0, self.max_strings + 1))
            strings = []
            for _ in range(count):
                length = int(self.rng.integers(0, self.max_len + 1))
                signs = self.rng.integers(0, 2, size=length) * 2 - 1
                strings.append(BitString.from_signs(int(v) for v in signs))
            queries.append(PrefixQuery(tuple(strings)))
        return queries


class RandomCorrAdversary(CommittedAdversary):
    """Commits k correlated-vector queries over a shared constraint pool."""

    def __init__(self, alpha: float, pool_size: int = 100, n: int = 0):
        self.alpha = alpha
        self.pool_size = pool_size
        self.n = n

    def commit(self) -> Sequence[Query]:
        pool = (self.rng.integers(0, 2, size=(self.pool_size, self.n), dtype=np.int8) * 2 - 1)
        queries = []
        for _ in range(self.k):
            take = int(self.rng.integers(0, self.pool_size + 1))
            idx = self.rng.choice(self.pool_size, size=take, replace=False)
            view = pool[np.sort(idx)]
            view.setflags(write=False)
            queries.append(CorrelatedVectorQuery.trusted(view, self.alpha))
        return queries


class RandomThresholdsAdversary(Adversary):
    """Adaptive mix of bisection steps and uniform random thresholds."""

    def __init__(self, bisect_fraction: float = 0.5):
        self.bisect_fraction = bisect_fraction
        self.lo = 0.0
        self.hi = 1.0
        self._last_bisect: Optional[float] = None

    def next_query(self, history):
        if self._last_bisect is not None and history:
            last = history[-1][1]
            if not isinstance(last, Symbol) and float(last) >= 0.5:
                self.hi = self._last_bisect
            else:
                self.lo = self._last_bisect
            if self.hi - self.lo < 1e-6:
                self.lo, self.hi = 0.0, 1.0
            self._last_bisect = None
        if self.rng.random() < self.bisect_fraction:
            self._last_bisect = (self.lo + self.hi) / 2.0
            return ThresholdQuery(self._last_bisect)
        return ThresholdQuery(float(self.rng.random()))


class NearThresholdStreamAdversary(CommittedAdversary):
    """Commits values hugging the outside of the accuracy band.

    Most queries sit just outside [t_lower - alpha, t_upper + alpha],
    where LEFT/RIGHT are safe answers and a TOP is an accuracy
    violation; a small tail of mid-band queries exercises the legal
    halting path.  Emitted as threshold queries against a unit-real
    dataset; callers that feed raw values to a comparator can use
    ``values`` directly.
    """

    def __init__(self, t_lower: float, t_upper: float, alpha: float, n: int, mid_tail: int = 5):
        self.t_lower = t_lower
        self.t_upper = t_upper
        self.alpha = alpha
        self.n = n
        self.mid_tail = mid_tail

    def values(self, k: int) -> list[float]:
        lo = self.t_lower - self.alpha - 2.0 / self.n
        hi = self.t_upper + self.alpha + 2.0 / self.n
        mid = (self.t_lower + self.t_upper) / 2.0
        head = max(k - self.mid_tail, 0)
        vals = [lo if j % 2 == 0 else hi for j in range(head)]
        vals.extend(mid for _ in range(k - head))
        return vals

    def commit(self) -> Sequence[Query]:
        return [ThresholdQuery(min(max(v, 0.0), 1.0)) for v in self.values(self.k)]


@dataclass(frozen=True)
class AdversarySpec:
    build: Callable[[dict, TrialContext], Adversary]
    family: str
    models: frozenset
    needs_fingerprint_instance: bool = False


ADVERSARIES: dict[str, AdversarySpec] = {
    "fixed_queries": AdversarySpec(
        lambda p, ctx: FixedQueryAdversary(load_queries(p["path"])),
        "any",
        frozenset(ALL_MODELS),
    ),
    "random_prefix": AdversarySpec(
        lambda p, ctx: RandomPrefixAdversary(
            max_strings=int(p.get("max_strings", 4)), max_len=int(p.get("max_len", 6))
        ),
        "prefix",
        frozenset(ALL_MODELS),
    ),
    "random_corr": AdversarySpec(
        lambda p, ctx: RandomCorrAdversary(
            alpha=_need(p, "alpha"),
            pool_size=int(p.get("pool_size", 100)),
            n=len(ctx.dataset),
        ),
        "corr",
        frozenset(ALL_MODELS),
    ),
    "reconstruction": AdversarySpec(
        lambda p, ctx: ReconstructionAdversary(alpha=_need(p, "alpha"), k=ctx.k),
        "corr",
        frozenset({"adaptive"}),
    ),
    "median_binary_search": AdversarySpec(
        lambda p, ctx: MedianBinarySearchAdversary(int(_need(p, "domain_size", int))),
        "threshold",
        frozenset({"adaptive"}),
    ),
    "random_thresholds": AdversarySpec(
        lambda p, ctx: RandomThresholdsAdversary(float(p.get("bisect_fraction", 0.5))),
        "threshold",
        frozenset({"adaptive"}),
    ),
    "near_threshold_stream": AdversarySpec(
        lambda p, ctx: NearThresholdStreamAdversary(
            t_lower=_need(p, "t_lower"),
            t_upper=_need(p, "t_upper"),
            alpha=_need(p, "alpha"),
            n=len(ctx.dataset),
        ),
        "threshold",
        frozenset(ALL_MODELS),
    ),
    "fingerprint": AdversarySpec(
        lambda p, ctx: FixedQueryAdversary(ctx.aux.queries),
        "prefix",
        frozenset({"offline", "online"}),
        needs_fingerprint_instance=True,
    ),
}


# ---------------------------------------------------------------------------
# Dataset sources
# ---------------------------------------------------------------------------


def make_dataset(spec: dict, gen: np.random.Generator) -> tuple[Dataset, Optional[object]]:
    """Materialize a dataset spec; returns (dataset, auxiliary object)."""
    if "path" in spec:
        return load_dataset(spec["path"]), None
    g = spec.get("generator")
    if not g:
        raise ConfigError("dataset spec needs 'path' or 'generator'")
    kind = g.get("kind")
    if kind == "signbits":
        n = int(g["n"])
        return Dataset.sign_bits(gen.integers(0, 2, size=n, dtype=np.int8) * 2 - 1), None
    if kind == "bitstrings":
        from .core import BitString

        n = int(g["n"])
        max_len = int(g.get("max_len", 8))
        rows = []
        for _ in range(n):
            length = int(gen.integers(0, max_len + 1))
            rows.append(BitString.from_signs(gen.integers(0, 2, size=length) * 2 - 1))
        return Dataset.bit_strings(rows), None
    if kind == "uniform_reals":
        n = int(g["n"])
        return Dataset.unit_reals(gen.random(n)), None
    if kind == "fixed_real":
        n = int(g["n"])
        return Dataset.unit_reals(np.full(n, float(g.get("value", 0.5)))), None
    if kind == "packing":
        return (
            packing_dataset(
                int(g["domain_size"]), int(g["t"]), int(g["n"]), float(g["alpha"])
            ),
            None,
        )
    if kind == "fingerprint":
        instance = make_fingerprint_instance(int(g["n"]), int(g["k"]), gen)
        return instance.dataset, instance
    raise ConfigError(f"unknown dataset generator {kind!r}")


# ---------------------------------------------------------------------------
# Validation and execution
# ---------------------------------------------------------------------------


def validate_config(cfg: ExperimentConfig) -> tuple[MechanismSpec, AdversarySpec]:
    if cfg.model not in ALL_MODELS:
        raise ConfigError(f"unknown model {cfg.model!r}")
    mech_name = cfg.mechanism.get("name")
    if mech_name not in MECHANISMS:
        raise ConfigError(f"unknown mechanism {mech_name!r}")
    adv_name = cfg.adversary.get("name")
    if adv_name not in ADVERSARIES:
        raise ConfigError(f"unknown adversary {adv_name!r}")
    mech = MECHANISMS[mech_name]
    adv = ADVERSARIES[adv_name]
    if cfg.model not in mech.models:
        raise ConfigError(f"mechanism {mech_name!r} does not run in the {cfg.model} model")
    if cfg.model not in adv.models:
        raise ConfigError(f"adversary {adv_name!r} does not run in the {cfg.model} model")
    if adv.family != "any" and adv.family not in mech.answers:
        raise ConfigError(
            f"mechanism {mech_name!r} answers {sorted(mech.answers)}, "
            f"adversary {adv_name!r} asks {adv.family} queries"
        )
    if adv.needs_fingerprint_instance:
        g = cfg.dataset.get("generator") or {}
        if g.get("kind") != "fingerprint":
            raise ConfigError(
                "the fingerprint adversary needs the 'fingerprint' dataset generator"
            )
    if cfg.k < 0 or cfg.trials < 1:
        raise ConfigError("need k >= 0 and trials >= 1")
    return mech, adv


def _trial_stats(adv_name: str, adversary, transcript: Transcript, ctx: TrialContext, cfg) -> dict:
    stats: dict = {}
    if adv_name == "reconstruction" and transcript.pairs:
        answers = [a for _, a in transcript.pairs]
        recon = majority_vote(answers)
        xv = ctx.dataset.rows.astype(np.int64)
        stats["overlap"] = int(recon.astype(np.int64) @ xv)
        a, b = reconstruction_hypotheses(answers, ctx.dataset)
        stats["hyp_a"] = a
        stats["hyp_b"] = b
        if 0.0 < a <= 1.0 and 0.0 <= b <= 1.0:
            stats["overlap_bound"] = majority_overlap_bound(a, b, len(answers)) * len(xv)
    elif adv_name == "median_binary_search":
        stats["median"] = adversary.result
        stats["query_count"] = len(transcript.pairs)
        if cfg.accuracy_alpha is not None and adversary.result is not None:
            stats["approx_median_ok"] = is_approx_median(
                ctx.dataset, adversary.result / adversary.domain_size, cfg.accuracy_alpha
            )
    elif adv_name == "fingerprint" and ctx.aux is not None:
        answers = to_sign_scale([float(a) for a in transcript.answers()])
        stat = fingerprint_statistic(answers, ctx.aux, 0)
        stats["z_max"] = float(stat.per_row[stat.argmax])
        stats["z_argmax"] = stat.argmax
    return stats


def run_trial(cfg: ExperimentConfig, trial: int, shared: Optional[tuple] = None) -> dict:
    rng = RandomSource(cfg.seed, trial)
    if shared is not None:
        dataset, aux = shared
    else:
        dataset, aux = make_dataset(cfg.dataset, rng.generator(LANE_DATA))
    ctx = TrialContext(dataset=dataset, aux=aux, k=cfg.k)
    mech_spec = MECHANISMS[cfg.mechanism["name"]]
    adv_spec = ADVERSARIES[cfg.adversary["name"]]
    mechanism = mech_spec.build(cfg.mechanism, cfg.k)()
    adversary = adv_spec.build(cfg.adversary, ctx)
    transcript = RUNNERS[InteractionModel(cfg.model)](mechanism, adversary, dataset, cfg.k, rng)

    row: dict = {
        "trial": trial,
        "pairs": len(transcript.pairs),
        "halted_early": transcript.halted_early,
        "halt_position": len(transcript.pairs) - 1 if transcript.halted_early else None,
    }
    symbolic = any(isinstance(a, Symbol) for a in transcript.answers())
    row["max_loss"] = None if symbolic else max_loss(transcript, dataset)
    row.update(_trial_stats(cfg.adversary["name"], adversary, transcript, ctx, cfg))
    if cfg.transcripts_dir:
        out_dir = Path(cfg.transcripts_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        write_transcript(transcript, out_dir / f"trial_{trial:05d}.jsonl", dataset)
    return row


@dataclass
class ExperimentReport:
    config: dict
    rows: list[dict]
    aggregates: dict
    wall_clock_s: float
    resolved_mechanism: Optional[dict] = None

    def to_json(self) -> dict:
        return {
            "config": self.config,
            "resolved_mechanism": self.resolved_mechanism,
            "aggregates": self.aggregates,
            "wall_clock_s": self.wall_clock_s,
            "per_trial": self.rows,
        }


def _aggregate(rows: list[dict], cfg: ExperimentConfig) -> dict:
    agg: dict = {
        "trials": len(rows),
        "interval_method": "hoeffding-0.99",
        "halted_fraction": sum(1 for r in rows if r["halted_early"]) / len(rows),
    }
    losses = [r["max_loss"] for r in rows if r["max_loss"] is not None]
    if losses:
        arr = np.asarray(losses)
        # Expectation-style accuracy: the mean of the per-trial worst loss.
        agg["max_loss_mean"] = float(arr.mean())
        agg["max_loss_mean_half_width"] = hoeffding_half_width(
            float(arr.max() - arr.min()) or 1.0, len(losses)
        )
        agg["max_loss_quantiles"] = {
            "p50": float(np.quantile(arr, 0.5)),
            "p90": float(np.quantile(arr, 0.9)),
            "p99": float(np.quantile(arr, 0.99)),
        }
        if cfg.accuracy_alpha is not None:
            # Probability-style accuracy: the chance every loss stays below alpha.
            within = float(np.mean(arr <= cfg.accuracy_alpha))
            agg["prob_max_loss_within_alpha"] = within
            agg["prob_half_width"] = hoeffding_half_width(1.0, len(losses))
            agg["accuracy_alpha"] = cfg.accuracy_alpha
        agg["accuracy_modes"] = (
            "max_loss_mean (expectation form) and prob_max_loss_within_alpha "
            "(probability form, when accuracy_alpha is set)"
        )
    for key in ("overlap", "z_max", "query_count"):
        vals = [r[key] for r in rows if key in r and r.get(key) is not None]
        if vals:
            agg[f"{key}_mean"] = float(np.mean(vals))
            agg[f"{key}_min"] = float(np.min(vals))
            agg[f"{key}_max"] = float(np.max(vals))
    return agg


def run_experiment(cfg: ExperimentConfig) -> ExperimentReport:
    mech_spec, adv_spec = validate_config(cfg)
    start = time.perf_counter()

    shared = None
    if not cfg.dataset.get("fresh_per_trial", True) or "path" in cfg.dataset:
        shared = make_dataset(
            cfg.dataset, RandomSource(cfg.seed, SHARED_DATASET_STREAM).generator(LANE_DATA)
        )

    if cfg.threads > 1:
        with ThreadPoolExecutor(max_workers=cfg.threads) as pool:
            rows = list(pool.map(lambda t: run_trial(cfg, t, shared), range(cfg.trials)))
    else:
        rows = [run_trial(cfg, t, shared) for t in range(cfg.trials)]

    probe = mech_spec.build(cfg.mechanism, cfg.k)()
    resolved_mechanism = probe.resolved_config() if hasattr(probe, "resolved_config") else None
    return ExperimentReport(
        config=cfg.to_json(),
        rows=rows,
        aggregates=_aggregate(rows, cfg),
        wall_clock_s=time.perf_counter() - start,
        resolved_mechanism=resolved_mechanism,
    )


def write_report(report: ExperimentReport, json_path: Path, csv_path: Optional[Path] = None) -> None:
    json_path = Path(json_path)
    json_path.write_text(json.dumps(report.to_json(), indent=2, default=_jsonify) + "\n")
    if csv_path is None:
        csv_path = json_path.with_suffix(".csv")
    keys: list[str] = []
    for row in report.rows:
        for key in row:
            if key not in keys:
                keys.append(key)
    with open(csv_path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=keys)
        writer.writeheader()
        for row in report.rows:
            writer.writerow({k: row.get(k) for k in keys})


def _jsonify(obj):
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    raise TypeError(f"cannot serialize {type(obj).__name__}")
