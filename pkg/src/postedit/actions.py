"""Word-level edit-action calculus.

Scripts are ordered sequences of INSERT/DELETE word actions, plus the
distinguished ``NoAction`` value meaning the text needs no refinement.
This module extracts minimal scripts from (hypothesis, reference) pairs,
applies them deterministically, serializes them to a bit-exact wire
grammar, and corrupts them for adversarial in-context demonstrations.

Wire grammar (version 1, frozen)::

    script := "NoAction" | action (" ; " action)*
    action := ("INSERT" | "DELETE") " " token [" @" digits]

``digits`` is ASCII ``[0-9]+``.  Tokens never contain whitespace and never
begin with ``@``.  Positions index the *original* hypothesis: ``DELETE``
at ``p`` removes original token ``p``; ``INSERT`` at ``p`` inserts before
original token ``p`` (``p == len(hyp)`` appends).
"""

from __future__ import annotations

import random
from collections import Counter
from dataclasses import dataclass
from enum import Enum
from typing import Iterable, Sequence

from .errors import (
    EmptyBatch,
    EmptyPool,
    ParseError,
    PositionOutOfRange,
    TokenMismatch,
    TokenNotSerializable,
)

TokenSeq = tuple[str, ...]


class Op(str, Enum):
    INSERT = "INSERT"
    DELETE = "DELETE"


@dataclass(frozen=True)
class EditAction:
    op: Op
    token: str
    position: int | None = None

    def __post_init__(self) -> None:
        if not self.token or self.token.split() != [self.token]:
            raise ValueError(f"token must be non-empty and whitespace-free: {self.token!r}")
        if self.position is not None and self.position < 0:
            raise ValueError(f"position must be non-negative: {self.position}")


@dataclass(frozen=True)
class ActionScript:
    """Either ``NoAction`` (``actions is None``) or an ordered action list.

    The empty action list is a distinct value from ``NoAction``: it only
    arises from full corruption and means "every demonstration action was
    discarded", not "no refinement needed".
    """

    actions: tuple[EditAction, ...] | None

    @property
    def is_noaction(self) -> bool:
        return self.actions is None

    def __len__(self) -> int:
        return 0 if self.actions is None else len(self.actions)

    def __iter__(self):
        return iter(self.actions or ())


NO_ACTION = ActionScript(None)


def script_of(actions: Iterable[EditAction]) -> ActionScript:
    return ActionScript(tuple(actions))


def tokenize(text: str) -> TokenSeq:
    """Split on Unicode whitespace runs; no case or punctuation handling."""
    return tuple(text.split())


def detokenize(tokens: Sequence[str]) -> str:
    return " ".join(tokens)


def oracle_actions(hyp: Sequence[str], ref: Sequence[str]) -> ActionScript:
    """Minimal insert/delete-only script transforming ``hyp`` into ``ref``.

    Equal sequences yield ``NoAction``.  Otherwise the script is extracted
    from an optimal unit-cost insert/delete alignment (no substitutions, so
    cost equals ``len(hyp) + len(ref) - 2*LCS``).  The backtrace breaks cost
    ties by preferring DELETE over INSERT over MATCH, which pins down one
    alignment.  Actions are emitted per maximal edit region, left to right:
    the region's DELETEs in ascending position, then its INSERTs in
    reference order, all INSERTs anchored at the region's first original
    index.  ``apply_actions(hyp, result) == ref`` always holds.
    """
    hyp = tuple(hyp)
    ref = tuple(ref)
    if hyp == ref:
        return NO_ACTION

    m, n = len(hyp), len(ref)
    # dp[i][j]: cost of turning hyp[:i] into ref[:j] with inserts/deletes.
    dp = [[0] * (n + 1) for _ in range(m + 1)]
    for i in range(1, m + 1):
        dp[i][0] = i
    for j in range(1, n + 1):
        dp[0][j] = j
    for i in range(1, m + 1):
        row, prev = dp[i], dp[i - 1]
        h = hyp[i - 1]
        for j in range(1, n + 1):
            best = min(prev[j], row[j - 1]) + 1
            if h == ref[j - 1] and prev[j - 1] < best:
                best = prev[j - 1]
            row[j] = best

    # Backtrace from the end; on cost ties prefer DELETE > INSERT > MATCH.
    moves: list[str] = []
    i, j = m, n
    while i > 0 or j > 0:
        cost = dp[i][j]
        if i > 0 and dp[i - 1][j] + 1 == cost:
            moves.append("D")
            i -= 1
        elif j > 0 and dp[i][j - 1] + 1 == cost:
            moves.append("I")
            j -= 1
        else:
            moves.append("M")
            i -= 1
            j -= 1
    moves.reverse()

    # Forward pass: group maximal non-match runs into regions and emit
    # each region as DELETEs then INSERTs anchored at the region start.
    out: list[EditAction] = []
    deletes: list[EditAction] = []
    inserts: list[EditAction] = []
    i = j = 0
    anchor = 0
    in_region = False
    for move in moves:
        if move == "M":
            if in_region:
                out.extend(deletes)
                out.extend(inserts)
                deletes.clear()
                inserts.clear()
                in_region = False
            i += 1
            j += 1
            continue
        if not in_region:
            anchor = i
            in_region = True
        if move == "D":
            deletes.append(EditAction(Op.DELETE, hyp[i], i))
            i += 1
        else:
            inserts.append(EditAction(Op.INSERT, ref[j], anchor))
            j += 1
    out.extend(deletes)
    out.extend(inserts)
    return ActionScript(tuple(out))


def apply_actions(hyp: Sequence[str], script: ActionScript) -> TokenSeq:
    """Apply a positioned script in one merge over original coordinates.

    At each original index, INSERTs anchored there are emitted first (in
    script order), then the original token unless a DELETE targets it.
    INSERTs at ``len(hyp)`` are appended.  Raises ``PositionOutOfRange``
    for missing/invalid positions or a doubly-deleted index, and
    ``TokenMismatch`` when a DELETE names the wrong token.
    """
    hyp = tuple(hyp)
    if script.is_noaction:
        return hyp

    inserts: dict[int, list[str]] = {}
    deleted: set[int] = set()
    for action in script:
        p = action.position
        if p is None:
            raise PositionOutOfRange(f"action {action.op.value} {action.token} has no position")
        if action.op is Op.DELETE:
            if not 0 <= p < len(hyp):
                raise PositionOutOfRange(f"DELETE position {p} outside [0, {len(hyp)})")
            if p in deleted:
                raise PositionOutOfRange(f"original index {p} deleted twice")
            if hyp[p] != action.token:
                raise TokenMismatch(f"DELETE {action.token!r} at {p} but hypothesis has {hyp[p]!r}")
            deleted.add(p)
        else:
            if not 0 <= p <= len(hyp):
                raise PositionOutOfRange(f"INSERT position {p} outside [0, {len(hyp)}]")
            inserts.setdefault(p, []).append(action.token)

    out: list[str] = []
    for i in range(len(hyp) + 1):
        out.extend(inserts.get(i, ()))
        if i < len(hyp) and i not in deleted:
            out.append(hyp[i])
    return tuple(out)


def unordered_actions(hyp: Sequence[str], ref: Sequence[str]) -> ActionScript:
    """Bag-of-words difference: positionless DELETEs then INSERTs.

    Each group is sorted lexicographically by token; equal multisets yield
    ``NoAction`` even when the orders differ.
    """
    hyp_counts = Counter(hyp)
    ref_counts = Counter(ref)
    if hyp_counts == ref_counts:
        return NO_ACTION
    out: list[EditAction] = []
    for token in sorted(hyp_counts.keys()):
        for _ in range(hyp_counts[token] - ref_counts.get(token, 0)):
            out.append(EditAction(Op.DELETE, token))
    for token in sorted(ref_counts.keys()):
        for _ in range(ref_counts[token] - hyp_counts.get(token, 0)):
            out.append(EditAction(Op.INSERT, token))
    return ActionScript(tuple(out))


def filter_script(script: ActionScript, keep: Iterable[Op]) -> ActionScript:
    """Retain only the given action kinds (for single-action-type runs)."""
    if script.is_noaction:
        return script
    kept = frozenset(keep)
    return ActionScript(tuple(a for a in script if a.op in kept))


def serialize_script(script: ActionScript, with_positions: bool = False) -> str:
    """Render a script in the wire grammar.

    The empty action list renders as the empty string (it is outside the
    grammar and only appears inside prompts after full corruption).
    """
    if script.is_noaction:
        return "NoAction"
    parts = []
    for action in script:
        if action.token.startswith("@") or " ; " in action.token:
            raise TokenNotSerializable(f"token {action.token!r} breaks the script grammar")
        text = f"{action.op.value} {action.token}"
        if with_positions and action.position is not None:
            text += f" @{action.position}"
        parts.append(text)
    return " ; ".join(parts)


def parse_script(text: str) -> ActionScript:
    """Strict inverse of :func:`serialize_script` on its image.

    Surrounding whitespace is trimmed first; offsets in ``ParseError`` are
    UTF-8 byte offsets into the trimmed text.
    """
    s = text.strip()

    def fail(message: str, pos: int) -> ParseError:
        return ParseError(message, offset=len(s[:pos].encode("utf-8")), raw_text=text)

    if s == "NoAction":
        return NO_ACTION
    if not s:
        raise fail("empty script", 0)

    actions: list[EditAction] = []
    pos = 0
    n = len(s)
    while True:
        if s.startswith("INSERT ", pos):
            op = Op.INSERT
        elif s.startswith("DELETE ", pos):
            op = Op.DELETE
        else:
            raise fail("expected 'INSERT ' or 'DELETE '", pos)
        pos += 7
        space = s.find(" ", pos)
        end = space if space != -1 else n
        token = s[pos:end]
        if not token:
            raise fail("expected a token", pos)
        if token.startswith("@"):
            raise fail("token may not begin with '@'", pos)
        pos = end
        position: int | None = None
        if s.startswith(" @", pos):
            pos += 2
            start = pos
            while pos < n and "0" <= s[pos] <= "9":
                pos += 1
            if pos == start:
                raise fail("expected digits after '@'", start)
            position = int(s[start:pos])
        actions.append(EditAction(op, token, position))
        if pos == n:
            break
        if s.startswith(" ; ", pos):
            pos += 3
            continue
        raise fail("expected ' ; ' or end of script", pos)
    return ActionScript(tuple(actions))


def corrupt_script(
    script: ActionScript,
    rate: float,
    pool: Sequence[EditAction],
    seed: int,
) -> ActionScript:
    """Randomly drop or swap actions to mimic programmer errors.

    Draw order per action, from ``random.Random(seed)`` (MT19937): one
    ``random()`` for the drop decision; survivors get a second ``random()``
    for the swap decision; a swap then draws ``randrange(len(pool))`` and
    takes that pool action with its position stripped.  ``NoAction`` passes
    through unchanged.  Dropping everything yields the empty-list script,
    which is distinct from ``NoAction``.
    """
    if not 0.0 <= rate <= 1.0:
        raise ValueError(f"rate must be in [0, 1]: {rate}")
    if script.is_noaction:
        return script
    rng = random.Random(seed)
    out: list[EditAction] = []
    for action in script:
        if rng.random() < rate:
            continue
        if rng.random() < rate:
            if not pool:
                raise EmptyPool("action swap requires a non-empty donor pool")
            donor = pool[rng.randrange(len(pool))]
            out.append(EditAction(donor.op, donor.token, None))
        else:
            out.append(action)
    return ActionScript(tuple(out))


def noaction_rate(scripts: Sequence[ActionScript]) -> float:
    """Fraction of scripts that are ``NoAction``."""
    if not scripts:
        raise EmptyBatch("cannot compute a rate over zero scripts")
    return sum(1 for s in scripts if s.is_noaction) / len(scripts)
