"""Core primitives shared by every mechanism and adversary.

Datasets over three element universes (sign bits, finite sign strings,
reals in [0,1]), the replacement adjacency relation, reproducible
splittable randomness, and the Laplace sampler every noisy mechanism in
this package draws from.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Iterable, Iterator, Sequence, Union

import numpy as np


class ParameterError(ValueError):
    """An argument violates an operation's preconditions."""


class DatasetFormatError(ParameterError):
    """A dataset file contains a malformed token."""


class ProtocolError(RuntimeError):
    """An interaction violated the mechanism/adversary contract."""


class ConfigError(ValueError):
    """An experiment or mechanism configuration is unusable."""


class PrivacyWarning(UserWarning):
    """Parameters are outside the regime where the privacy claim holds."""


# ---------------------------------------------------------------------------
# Sign strings
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class BitString:
    """An immutable finite string over {-1,+1}, packed into an integer.

    Bit ``i`` of ``bits`` is set iff symbol ``i`` (0-based from the start
    of the string) is +1.  The empty string has length 0.
    """

    length: int
    bits: int

    def __post_init__(self) -> None:
        if self.length < 0:
            raise ParameterError(f"negative length {self.length}")
        if not 0 <= self.bits < (1 << self.length):
            raise ParameterError(
                f"packed bits {self.bits:#x} out of range for length {self.length}"
            )

    @classmethod
    def empty(cls) -> "BitString":
        return cls(0, 0)

    @classmethod
    def from_signs(cls, signs: Iterable[int]) -> "BitString":
        bits = 0
        n = 0
        for s in signs:
            if s == 1:
                bits |= 1 << n
            elif s != -1:
                raise ParameterError(f"symbol {s!r} is not in {{-1,+1}}")
            n += 1
        return cls(n, bits)

    @classmethod
    def from_text(cls, text: str) -> "BitString":
        """Parse a +/- string, e.g. ``"+-+"`` -> (+1,-1,+1)."""
        bits = 0
        for i, ch in enumerate(text):
            if ch == "+":
                bits |= 1 << i
            elif ch != "-":
                raise ParameterError(f"character {ch!r} is not '+' or '-'")
        return cls(len(text), bits)

    def __len__(self) -> int:
        return self.length

    def sign_at(self, i: int) -> int:
        if not 0 <= i < self.length:
            raise ParameterError(f"index {i} out of range for length {self.length}")
        return 1 if (self.bits >> i) & 1 else -1

    def signs(self) -> tuple[int, ...]:
        return tuple(1 if (self.bits >> i) & 1 else -1 for i in range(self.length))

    def text(self) -> str:
        return "".join("+" if (self.bits >> i) & 1 else "-" for i in range(self.length))

    def is_prefix_of(self, other: "BitString") -> bool:
        """True iff this string is no longer than ``other`` and they agree on it."""
        if self.length > other.length:
            return False
        mask = (1 << self.length) - 1
        return (other.bits & mask) == self.bits

    def truncated(self, k: int) -> "BitString":
        if not 0 <= k <= self.length:
            raise ParameterError(f"cannot truncate length-{self.length} string to {k}")
        return BitString(k, self.bits & ((1 << k) - 1))

    def extended(self, sign: int) -> "BitString":
        if sign not in (-1, 1):
            raise ParameterError(f"symbol {sign!r} is not in {{-1,+1}}")
        bits = self.bits | (1 << self.length) if sign == 1 else self.bits
        return BitString(self.length + 1, bits)

    def sort_key(self) -> tuple[int, tuple[int, ...]]:
        """Deterministic (length, lexicographic) ordering key, -1 before +1."""
        return (self.length, self.signs())

    def __repr__(self) -> str:  # pragma: no cover - debugging aid
        return f"BitString({self.text()!r})"


EMPTY_STRING = BitString.empty()


# ---------------------------------------------------------------------------
# Randomness
# ---------------------------------------------------------------------------

# Lane conventions: every interaction splits its stream so the mechanism's
# noise, the adversary's coins, data generation, and auditing never share
# a stream.
LANE_MECHANISM = 0
LANE_ADVERSARY = 1
LANE_DATA = 2
LANE_AUDIT = 3


@dataclass(frozen=True)
class RandomSource:
    """A reproducible, splittable source of randomness.

    Identical ``(seed, stream_id)`` pairs reproduce identical draw
    sequences; distinct ``stream_id`` values yield statistically
    independent streams (the documented guarantee of numpy's
    ``SeedSequence`` spawn keys).  A value is never shared across
    threads: each trial derives its own source with a fresh stream id.
    """

    seed: int
    stream_id: int = 0

    def generator(self, *lane: int) -> np.random.Generator:
        """A fresh generator for the given lane of this stream.

        Repeated calls with the same lane return generators that produce
        identical sequences, which is what makes transcripts replayable.
        """
        seq = np.random.SeedSequence(entropy=self.seed, spawn_key=(self.stream_id, *lane))
        return np.random.Generator(np.random.PCG64(seq))

    def substream(self, stream_id: int) -> "RandomSource":
        return RandomSource(self.seed, stream_id)


def laplace_sample(
    scale: float, rng: np.random.Generator, size: int | tuple[int, ...] | None = None
) -> Union[float, np.ndarray]:
    """Draw from the Laplace distribution with density (1/2b)e^(-|x|/b).

    Uses inverse-CDF sampling on a uniform double.  Double precision
    throughout; this sampler is not hardened against floating-point
    side channels.

    Args:
        scale: the scale parameter b > 0.
        rng: source of uniform draws.
        size: optional output shape; ``None`` returns a scalar.

    Raises:
        ParameterError: if ``scale`` is not strictly positive.
    """
    if not scale > 0:
        raise ParameterError(f"Laplace scale must be positive, got {scale}")
    u = rng.random(size) - 0.5
    out = -scale * np.sign(u) * np.log1p(-2.0 * np.abs(u))
    return float(out) if size is None else out


# ---------------------------------------------------------------------------
# Datasets
# ---------------------------------------------------------------------------


class UniverseTag(str, Enum):
    SIGN_BIT = "sign_bit"
    BIT_STRING = "bit_string"
    UNIT_REAL = "unit_real"


RowType = Union[int, float, BitString]


@dataclass(frozen=True, eq=False)
class Dataset:
    """An ordered tuple of universe elements with a shared universe tag.

    Rows are stored as a read-only numpy array for scalar universes and
    as a tuple of :class:`BitString` otherwise.  Instances are immutable
    values, safe to share.
    """

    rows: Union[np.ndarray, tuple[BitString, ...]]
    universe_tag: UniverseTag

    def __post_init__(self) -> None:
        tag = self.universe_tag
        if tag is UniverseTag.SIGN_BIT:
            arr = np.asarray(self.rows)
            if arr.ndim != 1:
                raise ParameterError("sign-bit dataset must be one-dimensional")
            if arr.size and not np.isin(arr, (-1, 1)).all():
                raise ParameterError("sign-bit rows must lie in {-1,+1}")
            arr = arr.astype(np.int8, copy=True)
            arr.setflags(write=False)
            object.__setattr__(self, "rows", arr)
        elif tag is UniverseTag.UNIT_REAL:
            arr = np.asarray(self.rows, dtype=np.float64)
            if arr.ndim != 1:
                raise ParameterError("unit-real dataset must be one-dimensional")
            if arr.size and not ((arr >= 0.0) & (arr <= 1.0)).all():
                raise ParameterError("unit-real rows must lie in [0,1]")
            arr = arr.copy()
            arr.setflags(write=False)
            object.__setattr__(self, "rows", arr)
        elif tag is UniverseTag.BIT_STRING:
            rows = tuple(self.rows)
            for r in rows:
                if not isinstance(r, BitString):
                    raise ParameterError(f"row {r!r} is not a BitString")
            object.__setattr__(self, "rows", rows)
        else:  # pragma: no cover - exhaustive enum
            raise ParameterError(f"unknown universe tag {tag!r}")

    @classmethod
    def sign_bits(cls, values: Iterable[int]) -> "Dataset":
        return cls(np.asarray(list(values) if not isinstance(values, np.ndarray) else values), UniverseTag.SIGN_BIT)

    @classmethod
    def unit_reals(cls, values: Iterable[float]) -> "Dataset":
        vals = values if isinstance(values, np.ndarray) else np.asarray(list(values), dtype=np.float64)
        return cls(vals, UniverseTag.UNIT_REAL)

    @classmethod
    def bit_strings(cls, values: Iterable[BitString]) -> "Dataset":
        return cls(tuple(values), UniverseTag.BIT_STRING)

    @property
    def n(self) -> int:
        return len(self.rows)

    def __len__(self) -> int:
        return len(self.rows)

    def __iter__(self) -> Iterator[RowType]:
        return iter(self.rows)

    def __getitem__(self, i: int) -> RowType:
        return self.rows[i]

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Dataset):
            return NotImplemented
        if self.universe_tag is not other.universe_tag or len(self) != len(other):
            return False
        if self.universe_tag is UniverseTag.BIT_STRING:
            return self.rows == other.rows
        return bool(np.array_equal(self.rows, other.rows))

    def values(self) -> np.ndarray:
        """Rows as a read-only numpy array (scalar universes only)."""
        if self.universe_tag is UniverseTag.BIT_STRING:
            raise ParameterError("bit-string datasets have no scalar array form")
        return self.rows


def adjacent(x: Dataset, x2: Dataset) -> bool:
    """True iff the datasets differ in at most one row.

    Both datasets must have the same length and universe tag; the
    relation is replacement-based (fixed n), so it is reflexive and
    symmetric.
    """
    if x.universe_tag is not x2.universe_tag:
        raise ParameterError(
            f"universe mismatch: {x.universe_tag.value} vs {x2.universe_tag.value}"
        )
    if len(x) != len(x2):
        raise ParameterError(f"length mismatch: {len(x)} vs {len(x2)}")
    if x.universe_tag is UniverseTag.BIT_STRING:
        diff = sum(1 for a, b in zip(x.rows, x2.rows) if a != b)
    else:
        diff = int(np.count_nonzero(x.rows != x2.rows))
    return diff <= 1


def neighbor_of(x: Dataset, index: int, replacement: RowType) -> Dataset:
    """A copy of ``x`` with row ``index`` replaced; always adjacent to ``x``."""
    if not 0 <= index < len(x):
        raise ParameterError(f"row index {index} out of range for n={len(x)}")
    if x.universe_tag is UniverseTag.BIT_STRING:
        if not isinstance(replacement, BitString):
            raise ParameterError("replacement must be a BitString")
        rows = list(x.rows)
        rows[index] = replacement
        return Dataset.bit_strings(rows)
    arr = np.array(x.rows)
    arr[index] = replacement
    return Dataset(arr, x.universe_tag)


# ---------------------------------------------------------------------------
# Dataset files
# ---------------------------------------------------------------------------
#
# Three plain-text formats, selected by suffix:
#   .bits     one line of space-separated +1/-1 tokens (sign-bit rows)
#   .reals    one value in [0,1] per line (unit-real rows)
#   .strings  one +/- string per line, blank line = empty string


def load_dataset(path: Union[str, Path]) -> Dataset:
    """Load a dataset file; malformed tokens raise line-numbered errors."""
    path = Path(path)
    suffix = path.suffix
    text = path.read_text()
    if suffix == ".bits":
        return _parse_bits(text, path)
    if suffix == ".reals":
        return _parse_reals(text, path)
    if suffix == ".strings":
        return _parse_strings(text, path)
    raise DatasetFormatError(f"{path}: unknown dataset suffix {suffix!r}")


def _parse_bits(text: str, path: Path) -> Dataset:
    values = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        for col, token in enumerate(line.split(), start=1):
            if token == "+1" or token == "1":
                values.append(1)
            elif token == "-1":
                values.append(-1)
            else:
                raise DatasetFormatError(
                    f"{path}:{lineno}: token {col} ({token!r}) is not +1 or -1"
                )
    return Dataset.sign_bits(values)


def _parse_reals(text: str, path: Path) -> Dataset:
    values = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        token = line.strip()
        if not token:
            continue
        try:
            v = float(token)
        except ValueError:
            raise DatasetFormatError(f"{path}:{lineno}: {token!r} is not a number") from None
        if not 0.0 <= v <= 1.0:
            raise DatasetFormatError(f"{path}:{lineno}: value {v} outside [0,1]")
        values.append(v)
    return Dataset.unit_reals(values)


def _parse_strings(text: str, path: Path) -> Dataset:
    rows = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        try:
            rows.append(BitString.from_text(line))
        except ParameterError as exc:
            raise DatasetFormatError(f"{path}:{lineno}: {exc}") from None
    return Dataset.bit_strings(rows)


def save_dataset(x: Dataset, path: Union[str, Path]) -> None:
    """Write a dataset in the format matching the path suffix."""
    path = Path(path)
    tag_for_suffix = {
        ".bits": UniverseTag.SIGN_BIT,
        ".reals": UniverseTag.UNIT_REAL,
        ".strings": UniverseTag.BIT_STRING,
    }
    expected = tag_for_suffix.get(path.suffix)
    if expected is None:
        raise DatasetFormatError(f"{path}: unknown dataset suffix {path.suffix!r}")
    if expected is not x.universe_tag:
        raise ParameterError(
            f"dataset tagged {x.universe_tag.value} cannot be written as {path.suffix}"
        )
    if x.universe_tag is UniverseTag.SIGN_BIT:
        body = " ".join("+1" if v == 1 else "-1" for v in x.rows) + "\n"
    elif x.universe_tag is UniverseTag.UNIT_REAL:
        body = "".join(f"{float(v)!r}\n" for v in x.rows)
    else:
        body = "".join(r.text() + "\n" for r in x.rows)
    path.write_text(body)


def load_sign_rows(path: Union[str, Path]) -> np.ndarray:
    """Load a matrix of sign vectors, one space-separated row per line."""
    path = Path(path)
    rows = []
    width = None
    for lineno, line in enumerate(path.read_text().splitlines(), start=1):
        if not line.strip():
            continue
        row = []
        for col, token in enumerate(line.split(), start=1):
            if token == "+1" or token == "1":
                row.append(1)
            elif token == "-1":
                row.append(-1)
            else:
                raise DatasetFormatError(
                    f"{path}:{lineno}: token {col} ({token!r}) is not +1 or -1"
                )
        if width is None:
            width = len(row)
        elif len(row) != width:
            raise DatasetFormatError(
                f"{path}:{lineno}: row length {len(row)} != {width}"
            )
        rows.append(row)
    return np.asarray(rows, dtype=np.int8).reshape(len(rows), width or 0)


def save_sign_rows(rows: np.ndarray, path: Union[str, Path]) -> None:
    body = "".join(" ".join("+1" if v == 1 else "-1" for v in row) + "\n" for row in rows)
    Path(path).write_text(body)


# ---------------------------------------------------------------------------
# Privacy parameters
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PrivacyParams:
    """An (epsilon, delta) pair with the usual constraints."""

    epsilon: float
    delta: float = 0.0

    def __post_init__(self) -> None:
        if not self.epsilon > 0:
            raise ParameterError(f"epsilon must be positive, got {self.epsilon}")
        if not 0.0 <= self.delta < 1.0:
            raise ParameterError(f"delta must lie in [0,1), got {self.delta}")
