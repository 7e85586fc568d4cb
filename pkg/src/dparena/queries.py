"""Query families and their exact (non-private) evaluation.

Statistical queries are boolean predicates averaged over rows; prefix,
threshold, and correlated-vector queries are the three concrete families
used throughout the package.  Everything here is a pure function of
immutable values.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Iterable, Sequence, Union

import numpy as np

from .core import (
    EMPTY_STRING,
    BitString,
    Dataset,
    ParameterError,
    UniverseTag,
    load_sign_rows,
)


@dataclass(frozen=True)
class StatisticalQuery:
    """A boolean predicate on universe elements, averaged over the rows.

    The predicate must be pure: same input, same output.
    """

    predicate: Callable[[object], int]
    description: str = ""


@dataclass(frozen=True)
class PrefixQuery:
    """Is some string in ``strings`` a prefix of the row?"""

    strings: tuple[BitString, ...]
    bound: int | None = None

    def __post_init__(self) -> None:
        canon = tuple(sorted(set(self.strings), key=BitString.sort_key))
        object.__setattr__(self, "strings", canon)
        if self.bound is not None and len(canon) > self.bound:
            raise ParameterError(
                f"prefix query has {len(canon)} strings, bound is {self.bound}"
            )


@dataclass(frozen=True)
class ThresholdQuery:
    """What fraction of rows is <= tau?  Defined on the unit interval."""

    tau: float

    def __post_init__(self) -> None:
        if not 0.0 <= self.tau <= 1.0:
            raise ParameterError(f"threshold {self.tau} outside [0,1]")


@dataclass(frozen=True, eq=False)
class CorrelatedVectorQuery:
    """Ask for a sign vector roughly alpha-correlated with the data.

    An answer y is accurate when |<y - alpha*x, x>| and |<y - alpha*x, v>|
    for every constraint v all stay within the tolerance.  The tolerance
    defaults to alpha^2 * n / 100 at evaluation time but is configurable,
    since any slack well above sqrt(n) and well below n gives the same
    qualitative behavior.
    """

    constraints: np.ndarray
    alpha: float
    tolerance: float | None = None
    bound: int | None = None

    def __post_init__(self) -> None:
        if not 0.0 < self.alpha < 1.0:
            raise ParameterError(f"alpha must lie in (0,1), got {self.alpha}")
        arr = np.asarray(self.constraints, dtype=np.int8)
        if arr.size == 0:
            arr = arr.reshape(0, arr.shape[1] if arr.ndim == 2 else 0)
        if arr.ndim != 2:
            raise ParameterError("constraints must be a 2-d array of sign vectors")
        if arr.size and not np.isin(arr, (-1, 1)).all():
            raise ParameterError("constraint entries must lie in {-1,+1}")
        if self.bound is not None and arr.shape[0] > self.bound:
            raise ParameterError(
                f"query has {arr.shape[0]} constraints, bound is {self.bound}"
            )
        if self.tolerance is not None and not self.tolerance > 0:
            raise ParameterError(f"tolerance must be positive, got {self.tolerance}")
        arr = arr.copy()
        arr.setflags(write=False)
        object.__setattr__(self, "constraints", arr)

    @classmethod
    def trusted(
        cls,
        constraints: np.ndarray,
        alpha: float,
        tolerance: float | None = None,
        bound: int | None = None,
    ) -> "CorrelatedVectorQuery":
        """Construct without copying or scanning the constraint matrix.

        The caller guarantees the array is int8, two-dimensional, entirely
        in {-1,+1}, and will not be written through any alias.  Used by
        adversaries whose constraint sets grow with every answer, where
        per-query validation would cost O(k^2 * n) over a run.
        """
        q = object.__new__(cls)
        object.__setattr__(q, "constraints", constraints)
        object.__setattr__(q, "alpha", alpha)
        object.__setattr__(q, "tolerance", tolerance)
        object.__setattr__(q, "bound", bound)
        return q

    @property
    def constraint_count(self) -> int:
        return self.constraints.shape[0]

    def effective_tolerance(self, n: int) -> float:
        if self.tolerance is not None:
            return self.tolerance
        return self.alpha**2 * n / 100.0


Query = Union[StatisticalQuery, PrefixQuery, ThresholdQuery, CorrelatedVectorQuery]
RealValuedQuery = Union[StatisticalQuery, PrefixQuery, ThresholdQuery]


def is_prefix(y: BitString, x: BitString) -> bool:
    """True iff |y| <= |x| and the first |y| symbols agree."""
    return y.is_prefix_of(x)


def eval_prefix(q: PrefixQuery, x: BitString) -> int:
    """1 iff some element of the query's string set is a prefix of x."""
    return 1 if any(s.is_prefix_of(x) for s in q.strings) else 0


def eval_statistical(q: RealValuedQuery, x: Dataset) -> float:
    """The exact answer (1/n) * sum_i q(x_i) in [0,1].

    The query's domain must match the dataset's universe tag; mismatches
    fail loudly rather than coercing.
    """
    n = len(x)
    if n == 0:
        raise ParameterError("cannot evaluate a query on an empty dataset")
    if isinstance(q, PrefixQuery):
        if x.universe_tag is not UniverseTag.BIT_STRING:
            raise ParameterError(
                f"prefix query needs bit-string rows, got {x.universe_tag.value}"
            )
        return sum(eval_prefix(q, row) for row in x.rows) / n
    if isinstance(q, ThresholdQuery):
        if x.universe_tag is not UniverseTag.UNIT_REAL:
            raise ParameterError(
                f"threshold query needs unit-real rows, got {x.universe_tag.value}"
            )
        return int(np.count_nonzero(x.rows <= q.tau)) / n
    if isinstance(q, StatisticalQuery):
        total = 0
        for row in x.rows:
            v = q.predicate(row)
            if v not in (0, 1, True, False):
                raise ParameterError(
                    f"predicate returned {v!r}; statistical predicates are 0/1"
                )
            total += int(v)
        return total / n
    raise ParameterError(f"{type(q).__name__} has no statistical evaluation")


def restrict_universe(
    queries: Sequence[PrefixQuery], x: Dataset
) -> tuple[tuple[BitString, ...], Dataset]:
    """Collapse the row universe to the queries' own strings.

    The reduced universe is the union of all query string sets plus the
    empty string, sorted by (length, lexicographic) for deterministic
    iteration.  Each row maps to the longest universe element that is a
    prefix of it, which leaves every input query's exact answer
    unchanged.
    """
    if not queries:
        raise ParameterError("restrict_universe needs at least one query")
    if x.universe_tag is not UniverseTag.BIT_STRING:
        raise ParameterError("restrict_universe needs a bit-string dataset")
    pool: set[BitString] = {EMPTY_STRING}
    for q in queries:
        pool.update(q.strings)
    universe = tuple(sorted(pool, key=BitString.sort_key))
    reduced_rows = tuple(_longest_prefix_in(universe, row) for row in x.rows)
    return universe, Dataset.bit_strings(reduced_rows)


def _longest_prefix_in(universe: Sequence[BitString], row: BitString) -> BitString:
    best = EMPTY_STRING
    for u in universe:
        if u.is_prefix_of(row):
            # Two distinct same-length prefixes of one string cannot exist.
            assert u.length != best.length or u == best
            if u.length > best.length:
                best = u
    return best


def correlated_loss(
    q: CorrelatedVectorQuery,
    x: Union[Dataset, np.ndarray, Sequence[int]],
    y: Union[np.ndarray, Sequence[int]],
) -> int:
    """0 iff y is within tolerance on the data and every constraint, else 1."""
    xv = as_sign_vector(x)
    yv = as_sign_vector(y)
    n = xv.shape[0]
    if yv.shape[0] != n:
        raise ParameterError(f"answer length {yv.shape[0]} != dataset length {n}")
    if q.constraint_count and q.constraints.shape[1] != n:
        raise ParameterError(
            f"constraint length {q.constraints.shape[1]} != dataset length {n}"
        )
    tol = q.effective_tolerance(n)
    d = yv.astype(np.float64) - q.alpha * xv.astype(np.float64)
    if abs(float(d @ xv.astype(np.float64))) > tol:
        return 1
    if q.constraint_count:
        proj = q.constraints.astype(np.float64) @ d
        if float(np.abs(proj).max()) > tol:
            return 1
    return 0


def as_sign_vector(x: Union[Dataset, np.ndarray, Sequence[int]]) -> np.ndarray:
    if isinstance(x, Dataset):
        if x.universe_tag is not UniverseTag.SIGN_BIT:
            raise ParameterError("correlated queries need sign-bit data")
        return x.rows
    arr = np.asarray(x)
    if arr.ndim != 1:
        raise ParameterError("sign vectors must be one-dimensional")
    if arr.size and not np.isin(arr, (-1, 1)).all():
        raise ParameterError("sign vector entries must lie in {-1,+1}")
    return arr.astype(np.int8)


# ---------------------------------------------------------------------------
# Query files (JSON)
# ---------------------------------------------------------------------------
#
# Tagged objects:
#   {"kind": "prefix", "strings": ["+-", "+"]}
#   {"kind": "threshold", "tau": 0.5}
#   {"kind": "corr", "alpha": 0.5, "constraints": [[1,-1],...]}
#   {"kind": "corr", "alpha": 0.5, "constraints_file": "pool.signs"}


def query_to_json(q: Query) -> dict:
    if isinstance(q, PrefixQuery):
        return {"kind": "prefix", "strings": [s.text() for s in q.strings]}
    if isinstance(q, ThresholdQuery):
        return {"kind": "threshold", "tau": q.tau}
    if isinstance(q, CorrelatedVectorQuery):
        out: dict = {"kind": "corr", "alpha": q.alpha}
        out["constraints"] = [[int(v) for v in row] for row in q.constraints]
        if q.tolerance is not None:
            out["tolerance"] = q.tolerance
        return out
    raise ParameterError(f"{type(q).__name__} is not serializable")


def query_from_json(obj: dict, base_dir: Union[str, Path, None] = None) -> Query:
    kind = obj.get("kind")
    if kind == "prefix":
        return PrefixQuery(tuple(BitString.from_text(s) for s in obj["strings"]))
    if kind == "threshold":
        return ThresholdQuery(float(obj["tau"]))
    if kind == "corr":
        if "constraints_file" in obj:
            path = Path(obj["constraints_file"])
            if base_dir is not None and not path.is_absolute():
                path = Path(base_dir) / path
            constraints = load_sign_rows(path)
        else:
            raw = obj.get("constraints", [])
            width = len(raw[0]) if raw else 0
            constraints = np.asarray(raw, dtype=np.int8).reshape(len(raw), width)
        return CorrelatedVectorQuery(
            constraints, float(obj["alpha"]), tolerance=obj.get("tolerance")
        )
    raise ParameterError(f"unknown query kind {kind!r}")


def load_queries(path: Union[str, Path]) -> list[Query]:
    path = Path(path)
    data = json.loads(path.read_text())
    if not isinstance(data, list):
        data = [data]
    return [query_from_json(obj, base_dir=path.parent) for obj in data]


def save_queries(queries: Iterable[Query], path: Union[str, Path]) -> None:
    Path(path).write_text(json.dumps([query_to_json(q) for q in queries], indent=2) + "\n")
