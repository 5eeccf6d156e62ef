"""Minimal reader for the action-script wire grammar (version 1).

Only what training and evaluation need: validate a target string and
compare predictions to references at the (op, token) level.  The grammar
is ``"NoAction" | action (" ; " action)*`` with
``action := ("INSERT"|"DELETE") " " token [" @" digits]``.
"""

from __future__ import annotations

import re
from collections import Counter

from .errors import DataError

_ACTION = re.compile(r"^(INSERT|DELETE) (?!@)(\S+?)( @\d+)?$")


def parse_actions(text: str) -> list[tuple[str, str]] | None:
    """``None`` for NoAction, else [(op, token), ...]; raises DataError."""
    s = text.strip()
    if s == "NoAction":
        return None
    if not s:
        raise DataError("empty script")
    actions = []
    for part in s.split(" ; "):
        match = _ACTION.match(part)
        if not match:
            raise DataError(f"bad action {part!r}")
        actions.append((match.group(1), match.group(2)))
    return actions


def action_f1(predicted: str, reference: str) -> float:
    """Multiset F1 over (op, token) pairs; NoAction conventions included."""
    try:
        pred = parse_actions(predicted)
    except DataError:
        return 0.0
    ref = parse_actions(reference)
    if pred is None or ref is None:
        return 1.0 if pred is None and ref is None else 0.0
    if not pred or not ref:
        return 1.0 if not pred and not ref else 0.0
    pred_bag = Counter(pred)
    ref_bag = Counter(ref)
    matched = sum((pred_bag & ref_bag).values())
    precision = matched / sum(pred_bag.values())
    recall = matched / sum(ref_bag.values())
    if precision + recall == 0:
        return 0.0
    return 2 * precision * recall / (precision + recall)
