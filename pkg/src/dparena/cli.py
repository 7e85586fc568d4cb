"""Command-line front end.

Subcommands:
  run     execute a configured mechanism-vs-adversary experiment
  verify  run a named statistical or numeric verification
  gen     write dataset / instance fixture files
  suite   run a named battery of acceptance checks

Exit codes: 0 pass, 1 check failure, 2 usage or configuration error.
The default seed comes from --seed, then DPARENA_SEED, then 0.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import acceptance
from .attacks import make_fingerprint_instance, packing_dataset
from .core import (
    ConfigError,
    Dataset,
    DatasetFormatError,
    ParameterError,
    RandomSource,
    save_dataset,
    save_sign_rows,
)
from .experiments import ExperimentConfig, run_experiment, write_report
from .mechanisms import ExactAnswerer, LaplaceAnswerer, RandomizedResponse
from .queries import CorrelatedVectorQuery, ThresholdQuery, save_queries
from .verify import (
    empirical_dp_audit,
    fingerprint_functional_mc,
    fingerprint_functional_sq_mc,
    laplace_interval_ratio_sweep,
    standard_test_functions,
)


def _default_seed(value) -> int:
    if value is not None:
        return int(value)
    return int(os.environ.get("DPARENA_SEED", "0"))


def _emit(report: dict) -> None:
    print(json.dumps(report, indent=2, default=str))


# ---------------------------------------------------------------------------
# run
# ---------------------------------------------------------------------------


def cmd_run(args) -> int:
    cfg_obj = json.loads(Path(args.config).read_text())
    if args.seed is not None:
        cfg_obj["seed"] = int(args.seed)
    cfg_obj.setdefault("seed", _default_seed(None))
    if args.trials is not None:
        cfg_obj["trials"] = int(args.trials)
    if args.threads is not None:
        cfg_obj["threads"] = int(args.threads)
    if args.out is not None:
        cfg_obj["output"] = args.out
    cfg = ExperimentConfig.from_json(cfg_obj)
    report = run_experiment(cfg)
    out = Path(cfg.output or "report.json")
    write_report(report, out)
    if args.format == "json":
        _emit(report.to_json())
    elif args.format == "csv":
        print(out.with_suffix(".csv").read_text(), end="")
    else:
        _emit({"aggregates": report.aggregates, "wall_clock_s": report.wall_clock_s,
               "report": str(out)})
    return 0


# ---------------------------------------------------------------------------
# verify
# ---------------------------------------------------------------------------


def _verify_fingerprint(args, squared: bool) -> int:
    gen = RandomSource(_default_seed(args.seed)).generator()
    family = {f.name: f for f in standard_test_functions()}
    if args.f not in family:
        raise ConfigError(f"unknown test function {args.f!r}; choose from {sorted(family)}")
    if squared:
        est = fingerprint_functional_sq_mc(
            family[args.f], args.n, args.trials, gen, center=args.center
        )
        check = "fingerprint-sq-bound"
    else:
        est = fingerprint_functional_mc(family[args.f], args.n, args.trials, gen)
        check = "fingerprint-bound"
    ok = est.mean + est.half_width >= 1.0 / 3.0
    _emit(
        {
            "check": check,
            "parameters": {"f": args.f, "n": args.n, "trials": args.trials},
            "estimate": est.mean,
            "half_width": est.half_width,
            "bound": 1.0 / 3.0,
            "pass": ok,
        }
    )
    return 0 if ok else 1


def _verify_laplace_ratio(args) -> int:
    gen = RandomSource(_default_seed(args.seed)).generator()
    results = laplace_interval_ratio_sweep((0.1, 1.0, 10.0), args.pairs, gen)
    failures = sum(1 for r in results if not r.ok)
    worst = min((r.rhs - r.lhs for r in results), default=float("inf"))
    _emit(
        {
            "check": "laplace-interval-ratio",
            "parameters": {"scales": [0.1, 1.0, 10.0], "pairs_per_scale": args.pairs},
            "estimate": worst,
            "half_width": 0.0,
            "bound": 0.0,
            "pass": failures == 0,
        }
    )
    return 0 if failures == 0 else 1


def _verify_dp_audit(args) -> int:
    rng = RandomSource(_default_seed(args.seed))
    n = args.n
    if args.mech == "randomized_response":
        x = Dataset.sign_bits([1] * n)
        x2 = Dataset.sign_bits([-1] + [1] * (n - 1))
        queries = [CorrelatedVectorQuery(np.zeros((0, n), dtype=np.int8), args.alpha)]
        factory = lambda: RandomizedResponse(args.alpha)
    elif args.mech in ("laplace", "exact"):
        x = Dataset.unit_reals([0.2] * n)
        x2 = Dataset.unit_reals([0.8] + [0.2] * (n - 1))
        queries = [ThresholdQuery(0.5)]
        if args.mech == "laplace":
            factory = lambda: LaplaceAnswerer(args.epsilon_per_query)
        else:
            factory = ExactAnswerer
    else:
        raise ConfigError(f"dp-audit does not support mechanism {args.mech!r}")
    report = empirical_dp_audit(
        factory, x, x2, queries, args.trials, args.epsilon, args.delta, rng=rng
    )
    _emit(
        {
            "check": "dp-audit",
            "parameters": {
                "mech": args.mech, "n": n, "alpha": args.alpha,
                "epsilon": args.epsilon, "delta": args.delta, "trials": args.trials,
            },
            "estimate": report.worst_margin,
            "half_width": 0.0,
            "bound": 0.0,
            "verdict": report.verdict,
            "worst_ratio": report.worst_ratio,
            "pass": not report.violation,
        }
    )
    return 0 if not report.violation else 1


def cmd_verify(args) -> int:
    if args.check == "fingerprint-bound":
        return _verify_fingerprint(args, squared=False)
    if args.check == "fingerprint-sq-bound":
        return _verify_fingerprint(args, squared=True)
    if args.check == "laplace-interval-ratio":
        return _verify_laplace_ratio(args)
    if args.check == "dp-audit":
        return _verify_dp_audit(args)
    raise ConfigError(f"unknown check {args.check!r}")


# ---------------------------------------------------------------------------
# gen
# ---------------------------------------------------------------------------


def cmd_gen(args) -> int:
    gen = RandomSource(_default_seed(args.seed)).generator()
    out = Path(args.out)
    if args.kind == "signbits":
        data = Dataset.sign_bits(gen.integers(0, 2, size=args.n, dtype=np.int8) * 2 - 1)
        save_dataset(data, out)
    elif args.kind == "uniform-reals":
        save_dataset(Dataset.unit_reals(gen.random(args.n)), out)
    elif args.kind == "packing":
        data = packing_dataset(args.domain_size, args.t, args.n, args.alpha)
        save_dataset(data, out)
    elif args.kind == "fingerprint":
        inst = make_fingerprint_instance(args.n, args.k, gen)
        out.mkdir(parents=True, exist_ok=True)
        save_dataset(inst.dataset, out / "x.strings")
        (out / "bias.json").write_text(json.dumps([float(p) for p in inst.bias]) + "\n")
        save_sign_rows(inst.columns, out / "columns.signs")
        save_queries(inst.queries, out / "queries.json")
    else:
        raise ConfigError(f"unknown generator kind {args.kind!r}")
    print(f"wrote {out}")
    return 0


# ---------------------------------------------------------------------------
# suite
# ---------------------------------------------------------------------------


def cmd_suite(args) -> int:
    if args.name != "ac-primary":
        raise ConfigError(f"unknown suite {args.name!r}")
    only = args.only.split(",") if args.only else None
    results = acceptance.run_suite(only)
    failed = [r for r in results if not r.passed]
    print(f"{len(results) - len(failed)}/{len(results)} checks passed")
    return 0 if not failed else 1


# ---------------------------------------------------------------------------
# argument parsing
# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="dparena",
        description="Interactive differential privacy: mechanisms vs adversaries.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run a configured experiment")
    p_run.add_argument("--config", required=True, help="experiment config JSON file")
    p_run.add_argument("--seed", type=int, default=None)
    p_run.add_argument("--trials", type=int, default=None)
    p_run.add_argument("--threads", type=int, default=None)
    p_run.add_argument("--out", default=None, help="report path (default report.json)")
    p_run.add_argument("--format", choices=("summary", "json", "csv"), default="summary")
    p_run.set_defaults(func=cmd_run)

    p_verify = sub.add_parser("verify", help="run a named verification")
    p_verify.add_argument(
        "check",
        choices=("fingerprint-bound", "fingerprint-sq-bound", "laplace-interval-ratio", "dp-audit"),
    )
    p_verify.add_argument("--f", default="mean", help="test function name")
    p_verify.add_argument("--n", type=int, default=128)
    p_verify.add_argument("--trials", type=int, default=100_000)
    p_verify.add_argument("--center", choices=("sample_mean", "bias"), default="sample_mean")
    p_verify.add_argument("--pairs", type=int, default=1000)
    p_verify.add_argument("--mech", default="randomized_response")
    p_verify.add_argument("--alpha", type=float, default=0.3)
    p_verify.add_argument("--epsilon", type=float, default=0.5)
    p_verify.add_argument("--epsilon-per-query", type=float, default=1.0)
    p_verify.add_argument("--delta", type=float, default=0.0)
    p_verify.add_argument("--seed", type=int, default=None)
    p_verify.set_defaults(func=cmd_verify)

    p_gen = sub.add_parser("gen", help="generate fixture files")
    p_gen.add_argument("kind", choices=("signbits", "uniform-reals", "packing", "fingerprint"))
    p_gen.add_argument("--out", required=True)
    p_gen.add_argument("--n", type=int, default=100)
    p_gen.add_argument("--k", type=int, default=8)
    p_gen.add_argument("--domain-size", type=int, default=64)
    p_gen.add_argument("--t", type=int, default=7)
    p_gen.add_argument("--alpha", type=float, default=0.1)
    p_gen.add_argument("--seed", type=int, default=None)
    p_gen.set_defaults(func=cmd_gen)

    p_suite = sub.add_parser("suite", help="run an acceptance battery")
    p_suite.add_argument("name", nargs="?", default="ac-primary")
    p_suite.add_argument("--only", default=None, help="comma-separated check names")
    p_suite.set_defaults(func=cmd_suite)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, ParameterError, DatasetFormatError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
