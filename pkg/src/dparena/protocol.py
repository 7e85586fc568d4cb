"""The three interaction models pairing a mechanism with an adversary.

offline   the adversary commits all k queries, the mechanism answers them
          in one batch;
online    the adversary commits all k queries up front, the mechanism
          answers each before seeing the next;
adaptive  the adversary chooses each query after seeing all previous
          answers.

The engine, not the mechanism, enforces the query budget k, and it calls
the adversary's commit step exactly once, before any answer exists, so
the information-flow guarantee of the offline/online models holds
structurally.  Committed adversaries are handed the running history in
the adaptive model too, but their query choice never reads it; that is
what makes every offline adversary runnable online and every online
adversary runnable adaptively.
"""

from __future__ import annotations

import json
from abc import ABC, abstractmethod
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Optional, Sequence, Union

import numpy as np

from .core import LANE_ADVERSARY, LANE_MECHANISM, ParameterError, ProtocolError, RandomSource
from .queries import (
    CorrelatedVectorQuery,
    Query,
    correlated_loss,
    eval_statistical,
    query_from_json,
    query_to_json,
)


class Symbol(Enum):
    """Symbolic answers used by halting threshold mechanisms."""

    LEFT = "L"
    RIGHT = "R"
    TOP = "TOP"


Answer = Union[float, np.ndarray, Symbol]


class InteractionModel(str, Enum):
    OFFLINE = "offline"
    ONLINE = "online"
    ADAPTIVE = "adaptive"


class Mechanism(ABC):
    """A stateful answerer owning a dataset for the duration of one run.

    ``start`` is called exactly once by the engine; answers may depend
    only on the dataset, the mechanism's parameters, its random stream,
    and the queries seen so far.  Once ``halted`` is true, further
    ``answer`` calls are rejected.
    """

    _halted: bool = False

    def start(self, dataset, rng: np.random.Generator) -> None:
        self.dataset = dataset
        self.rng = rng

    @abstractmethod
    def answer(self, query: Query) -> Answer:
        ...

    def batch_answer(self, queries: Sequence[Query]) -> list[Answer]:
        """Answer a batch; mechanisms with a true offline mode override this."""
        answers = []
        for q in queries:
            answers.append(self.answer(q))
            if self.halted:
                break
        return answers

    @property
    def halted(self) -> bool:
        return self._halted

    def _check_not_halted(self) -> None:
        if self._halted:
            raise ProtocolError(f"{type(self).__name__} already halted")


class Adversary(ABC):
    """A query chooser.  Adaptive adversaries may read all prior answers."""

    def start(self, k: int, rng: np.random.Generator) -> None:
        self.k = k
        self.rng = rng

    @abstractmethod
    def next_query(self, history: Sequence[tuple[Query, Answer]]) -> Optional[Query]:
        """The next query, or None when the adversary is done early."""


class CommittedAdversary(Adversary):
    """An adversary whose whole query list is fixed before any answer.

    ``next_query`` replays the committed list and ignores the history,
    which is what lets the same adversary run in all three models.
    """

    _queue: Optional[list[Query]] = None

    @abstractmethod
    def commit(self) -> Sequence[Query]:
        ...

    def next_query(self, history: Sequence[tuple[Query, Answer]]) -> Optional[Query]:
        if self._queue is None:
            self._queue = list(self.commit())
        return self._queue.pop(0) if self._queue else None


class FixedQueryAdversary(CommittedAdversary):
    """Commits a literal query list."""

    def __init__(self, queries: Sequence[Query]):
        self.queries = list(queries)

    def commit(self) -> Sequence[Query]:
        return list(self.queries)


@dataclass(frozen=True)
class Transcript:
    """The ordered record of one interaction."""

    model: InteractionModel
    pairs: tuple[tuple[Query, Answer], ...]
    halted_early: bool = False

    def answers(self) -> list[Answer]:
        return [a for _, a in self.pairs]

    def queries(self) -> list[Query]:
        return [q for q, _ in self.pairs]


def _committed_queries(adversary: Adversary, k: int, rng: np.random.Generator) -> list[Query]:
    if not isinstance(adversary, CommittedAdversary):
        raise ProtocolError(
            f"{type(adversary).__name__} cannot pre-commit queries; "
            "it needs the adaptive model"
        )
    adversary.start(k, rng)
    queries = list(adversary.commit())
    if len(queries) != k:
        raise ProtocolError(f"adversary committed {len(queries)} queries, expected {k}")
    return queries


def run_offline(
    mechanism: Mechanism, adversary: Adversary, x, k: int, rng: RandomSource
) -> Transcript:
    """All k queries are chosen first, then answered in a single batch."""
    queries = _committed_queries(adversary, k, rng.generator(LANE_ADVERSARY))
    mechanism.start(x, rng.generator(LANE_MECHANISM))
    answers = mechanism.batch_answer(queries)
    if len(answers) > k or (len(answers) < k and not mechanism.halted):
        raise ProtocolError(
            f"mechanism produced {len(answers)} answers for {k} queries without halting"
        )
    pairs = tuple(zip(queries[: len(answers)], answers))
    return Transcript(InteractionModel.OFFLINE, pairs, halted_early=mechanism.halted)


def run_online(
    mechanism: Mechanism, adversary: Adversary, x, k: int, rng: RandomSource
) -> Transcript:
    """Queries are committed up front but answered one at a time, in order."""
    queries = _committed_queries(adversary, k, rng.generator(LANE_ADVERSARY))
    mechanism.start(x, rng.generator(LANE_MECHANISM))
    pairs = []
    for q in queries:
        pairs.append((q, mechanism.answer(q)))
        if mechanism.halted:
            break
    return Transcript(InteractionModel.ONLINE, tuple(pairs), halted_early=mechanism.halted)


def run_adaptive(
    mechanism: Mechanism, adversary: Adversary, x, k: int, rng: RandomSource
) -> Transcript:
    """Each query may depend on every previous answer."""
    adversary.start(k, rng.generator(LANE_ADVERSARY))
    mechanism.start(x, rng.generator(LANE_MECHANISM))
    pairs: list[tuple[Query, Answer]] = []
    for _ in range(k):
        q = adversary.next_query(tuple(pairs))
        if q is None:
            break
        pairs.append((q, mechanism.answer(q)))
        if mechanism.halted:
            break
    return Transcript(InteractionModel.ADAPTIVE, tuple(pairs), halted_early=mechanism.halted)


RUNNERS = {
    InteractionModel.OFFLINE: run_offline,
    InteractionModel.ONLINE: run_online,
    InteractionModel.ADAPTIVE: run_adaptive,
}


def pair_loss(query: Query, answer: Answer, x) -> float:
    """The loss of one (query, answer) pair against the true dataset."""
    if isinstance(answer, Symbol):
        raise ParameterError("symbolic answers have no numeric loss")
    if isinstance(query, CorrelatedVectorQuery):
        return float(correlated_loss(query, x, answer))
    return abs(eval_statistical(query, x) - float(answer))


def max_loss(transcript: Transcript, x) -> float:
    """The maximum per-pair loss over the transcript; 0.0 when empty."""
    worst = 0.0
    for q, a in transcript.pairs:
        worst = max(worst, pair_loss(q, a, x))
    return worst


# ---------------------------------------------------------------------------
# Transcript serialization (JSON lines)
# ---------------------------------------------------------------------------


def answer_to_json(a: Answer) -> dict:
    if isinstance(a, Symbol):
        return {"type": "symbol", "value": a.value}
    if isinstance(a, np.ndarray):
        return {"type": "vector", "value": [int(v) for v in a]}
    return {"type": "real", "value": float(a)}


def answer_from_json(obj: dict) -> Answer:
    t = obj["type"]
    if t == "symbol":
        return Symbol(obj["value"])
    if t == "vector":
        return np.asarray(obj["value"], dtype=np.int8)
    return float(obj["value"])


def write_transcript(transcript: Transcript, path: Union[str, Path], x=None) -> None:
    """One header line, then one JSON line per (query, answer) pair.

    When the dataset is supplied, each pair carries its loss; symbolic
    answers get ``null``.
    """
    lines = [
        json.dumps(
            {
                "model": transcript.model.value,
                "pairs": len(transcript.pairs),
                "halted_early": transcript.halted_early,
            }
        )
    ]
    for i, (q, a) in enumerate(transcript.pairs):
        loss = None
        if x is not None and not isinstance(a, Symbol):
            loss = pair_loss(q, a, x)
        lines.append(
            json.dumps(
                {"index": i, "query": query_to_json(q), "answer": answer_to_json(a), "loss": loss}
            )
        )
    Path(path).write_text("\n".join(lines) + "\n")


def read_transcript(path: Union[str, Path]) -> Transcript:
    lines = Path(path).read_text().splitlines()
    header = json.loads(lines[0])
    pairs = []
    for line in lines[1:]:
        obj = json.loads(line)
        pairs.append((query_from_json(obj["query"]), answer_from_json(obj["answer"])))
    return Transcript(
        InteractionModel(header["model"]), tuple(pairs), halted_early=header["halted_early"]
    )
