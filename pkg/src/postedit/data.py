"""Corpus ingestion, exemplar-pool construction, and training-set export.

Pools are JSON-lines files of ``{"id", "x", "y", "y_star", "a_star"}``
records (``a_star`` serialized with positions); an optional leading
``{"_meta": ...}`` line carries provenance (backend id, seed, format
version).  Training sets are JSON-lines of ``{"input", "target"}`` where
the input is ``x <sep> y_star`` and the target is the positionless
serialized script.
"""

from __future__ import annotations

import json
import logging
import random
from dataclasses import dataclass
from functools import cached_property
from typing import Iterable, Sequence

from .actions import (
    ActionScript,
    EditAction,
    oracle_actions,
    parse_script,
    serialize_script,
    tokenize,
)
from .backends import SEP_TOKEN, join_for_programmer
from .errors import EmptyFile, FormatError
from .retrieval import TfIdfIndex, build_index

logger = logging.getLogger("postedit")

POOL_FORMAT = "postedit-pool-v1"
TRAINSET_FORMAT = "postedit-trainset-v1"


@dataclass(frozen=True)
class ExamplePair:
    id: int | str
    x: str
    y: str

    def __post_init__(self) -> None:
        if not self.x or not self.y:
            raise ValueError("x and y must be non-empty")


@dataclass(frozen=True)
class ExemplarQuad:
    id: int | str
    x: str
    y: str
    y_star: str
    a_star: ActionScript

    @classmethod
    def create(cls, pair: ExamplePair, y_star: str) -> "ExemplarQuad":
        """Build a quad with the oracle script computed from its parts."""
        a_star = oracle_actions(tokenize(y_star), tokenize(pair.y))
        return cls(id=pair.id, x=pair.x, y=pair.y, y_star=y_star, a_star=a_star)


@dataclass(frozen=True)
class TrainingInstance:
    input: str
    target: str

    def __post_init__(self) -> None:
        if self.input.count(SEP_TOKEN) != 1:
            raise ValueError(f"input must contain {SEP_TOKEN!r} exactly once")
        parse_script(self.target)  # must be grammatical


class PairPool:
    """Exemplar source for the generator: (x, y) pairs with a TF-IDF index."""

    def __init__(self, pairs: Sequence[ExamplePair]):
        self._pairs = {pair.id: pair for pair in pairs}
        if len(self._pairs) != len(pairs):
            raise ValueError("pair ids must be unique")
        self._order = [pair.id for pair in pairs]

    def __len__(self) -> int:
        return len(self._order)

    @cached_property
    def index(self) -> TfIdfIndex:
        return build_index([(pid, self._pairs[pid].x) for pid in self._order])

    def pair(self, entry_id) -> tuple[str, str]:
        pair = self._pairs[entry_id]
        return pair.x, pair.y

    def ids_matching_x(self, x: str) -> set:
        return {pid for pid in self._order if self._pairs[pid].x == x}


class ExemplarPool(PairPool):
    """Full quads (x, y, y*, a*), backing both retrieval functions."""

    def __init__(self, quads: Sequence[ExemplarQuad]):
        super().__init__([ExamplePair(q.id, q.x, q.y) for q in quads])
        self._quads = {q.id: q for q in quads}

    def quad(self, entry_id) -> ExemplarQuad:
        return self._quads[entry_id]

    @cached_property
    def donor_actions(self) -> tuple[EditAction, ...]:
        """All pool actions, in pool order: the swap donors for corruption."""
        donors: list[EditAction] = []
        for pid in self._order:
            script = self._quads[pid].a_star
            if not script.is_noaction:
                donors.extend(script)
        return tuple(donors)


# --- ingestion --------------------------------------------------------------


def ingest(path, fmt: str) -> list[ExamplePair]:
    """Read (x, y) pairs from a strict TSV or JSONL file."""
    if fmt not in ("tsv", "jsonl"):
        raise ValueError(f"unknown format {fmt!r}; expected 'tsv' or 'jsonl'")
    pairs: list[ExamplePair] = []
    seen_ids: set = set()
    with open(path, encoding="utf-8") as fh:
        for line_no, raw in enumerate(fh, start=1):
            line = raw.rstrip("\n").rstrip("\r")
            if not line:
                raise FormatError("blank line", line_no)
            if fmt == "tsv":
                columns = line.split("\t")
                if len(columns) != 2:
                    raise FormatError(f"expected 2 columns, found {len(columns)}", line_no)
                record = {"x": columns[0], "y": columns[1]}
            else:
                try:
                    record = json.loads(line)
                except json.JSONDecodeError as exc:
                    raise FormatError(f"invalid JSON: {exc.msg}", line_no) from exc
                if not isinstance(record, dict):
                    raise FormatError("expected a JSON object", line_no)
                unknown = set(record) - {"x", "y", "id"}
                if unknown:
                    raise FormatError(f"unknown keys {sorted(unknown)}", line_no)
                if not isinstance(record.get("x"), str) or not isinstance(record.get("y"), str):
                    raise FormatError('keys "x" and "y" must be strings', line_no)
            entry_id = record.get("id", len(pairs))
            if entry_id in seen_ids:
                raise FormatError(f"duplicate id {entry_id!r}", line_no)
            seen_ids.add(entry_id)
            try:
                pairs.append(ExamplePair(id=entry_id, x=record["x"], y=record["y"]))
            except ValueError as exc:
                raise FormatError(str(exc), line_no) from exc
    if not pairs:
        raise EmptyFile(f"{path} contains no records")
    return pairs


# --- pool construction -------------------------------------------------------


def build_pool(pairs: Sequence[ExamplePair], generator, config, templates=None) -> list[ExemplarQuad]:
    """Attach each pair's initial generation as y* and its oracle script.

    Generator exemplars for each x are retrieved from the other pairs
    (exact self-matches excluded per config).  Pairs whose generation
    fails are dropped with a logged tag.
    """
    from .pipeline import generate_initial

    states = generate_initial(
        [pair.x for pair in pairs], PairPool(pairs), generator, config, templates
    )
    quads: list[ExemplarQuad] = []
    for pair, state in zip(pairs, states):
        if state.error is not None:
            logger.warning("dropping pair %r: %s", pair.id, state.error)
            continue
        quads.append(ExemplarQuad.create(pair, state.text))
    return quads


def save_pool(quads: Iterable[ExemplarQuad], path, provenance: dict | None = None) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        meta = {"format": POOL_FORMAT}
        meta.update(provenance or {})
        fh.write(json.dumps({"_meta": meta}, sort_keys=True, ensure_ascii=False) + "\n")
        for quad in quads:
            record = {
                "id": quad.id,
                "x": quad.x,
                "y": quad.y,
                "y_star": quad.y_star,
                "a_star": serialize_script(quad.a_star, with_positions=True),
            }
            fh.write(json.dumps(record, sort_keys=True, ensure_ascii=False) + "\n")


def load_pool(path) -> tuple[list[ExemplarQuad], dict]:
    """Read a pool file; verifies each stored script is the oracle script."""
    quads: list[ExemplarQuad] = []
    meta: dict = {}
    with open(path, encoding="utf-8") as fh:
        for line_no, raw in enumerate(fh, start=1):
            if not raw.strip():
                continue
            record = json.loads(raw)
            if "_meta" in record:
                if line_no != 1:
                    raise FormatError("_meta must be the first line", line_no)
                meta = record["_meta"]
                continue
            quad = ExemplarQuad(
                id=record["id"],
                x=record["x"],
                y=record["y"],
                y_star=record["y_star"],
                a_star=parse_script(record["a_star"]),
            )
            expected = oracle_actions(tokenize(quad.y_star), tokenize(quad.y))
            if quad.a_star != expected:
                raise FormatError(
                    f"stored script for id {quad.id!r} is not the oracle script", line_no
                )
            quads.append(quad)
    if not quads:
        raise EmptyFile(f"{path} contains no pool records")
    return quads, meta


# --- training set -------------------------------------------------------------


def build_training_set(
    quads: Sequence[ExemplarQuad],
    noaction_augment_count: int,
    seed: int = 0,
) -> list[TrainingInstance]:
    """One instance per quad plus seeded identical-pair augmentations.

    Augmented instances pair a sampled reference with itself (y* := y) and
    carry the ``NoAction`` target; sampling is with replacement so the
    count may exceed the pool size.
    """
    if noaction_augment_count < 0:
        raise ValueError("augment count must be >= 0")
    instances = [
        TrainingInstance(
            input=join_for_programmer(quad.x, quad.y_star),
            target=serialize_script(quad.a_star, with_positions=False),
        )
        for quad in quads
    ]
    rng = random.Random(seed)
    for _ in range(noaction_augment_count):
        quad = quads[rng.randrange(len(quads))]
        instances.append(
            TrainingInstance(input=join_for_programmer(quad.x, quad.y), target="NoAction")
        )
    return instances


def export_training_set(instances: Iterable[TrainingInstance], path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for instance in instances:
            record = {"input": instance.input, "target": instance.target}
            fh.write(json.dumps(record, sort_keys=True, ensure_ascii=False) + "\n")


def load_training_set(path) -> list[TrainingInstance]:
    instances: list[TrainingInstance] = []
    with open(path, encoding="utf-8") as fh:
        for line_no, raw in enumerate(fh, start=1):
            if not raw.strip():
                continue
            try:
                record = json.loads(raw)
                instances.append(
                    TrainingInstance(input=record["input"], target=record["target"])
                )
            except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
                raise FormatError(f"bad training record: {exc}", line_no) from exc
    return instances
