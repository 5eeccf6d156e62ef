"""Evaluation metrics: corpus BLEU, ChrF++, action F1, unigram KL.

The BLEU variant is frozen: 4-gram modified precisions under whitespace
tokenization, geometric mean, brevity penalty exp(1 - r/c) for c < r, and
add-epsilon (1e-9) smoothing of zero precision counts; orders with no
n-grams anywhere contribute a neutral factor.  ChrF++ uses character
n-grams of order 1-6 (whitespace removed) plus word n-grams of order 1-2,
corpus-aggregated per order, precision and recall averaged across orders
with non-empty statistics, combined with beta = 2.  KL uses natural log.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass
from typing import Sequence

from .actions import ActionScript, tokenize
from .errors import EmptyCorpus, LengthMismatch

BLEU_ORDER = 4
BLEU_EPSILON = 1e-9
CHRF_CHAR_ORDER = 6
CHRF_WORD_ORDER = 2
CHRF_BETA = 2.0


def _ngrams(tokens: Sequence, n: int) -> Counter:
    return Counter(tuple(tokens[i : i + n]) for i in range(len(tokens) - n + 1))


def _check_corpora(hypotheses, references) -> None:
    if len(hypotheses) != len(references):
        raise LengthMismatch(
            f"{len(hypotheses)} hypotheses vs {len(references)} references"
        )
    if not hypotheses:
        raise EmptyCorpus("no segments to score")


def corpus_bleu(
    hypotheses: Sequence[str],
    references: Sequence[str],
    sentence_level: bool = False,
) -> float:
    """Corpus BLEU in [0, 100].

    With ``sentence_level`` set, returns the arithmetic mean of
    single-segment BLEU scores instead of pooled statistics.
    """
    _check_corpora(hypotheses, references)
    if sentence_level:
        return sum(
            corpus_bleu([h], [r]) for h, r in zip(hypotheses, references)
        ) / len(hypotheses)

    correct = [0] * BLEU_ORDER
    total = [0] * BLEU_ORDER
    hyp_len = 0
    ref_len = 0
    for hypothesis, reference in zip(hypotheses, references):
        hyp = tokenize(hypothesis)
        ref = tokenize(reference)
        hyp_len += len(hyp)
        ref_len += len(ref)
        for n in range(1, BLEU_ORDER + 1):
            hyp_bag = _ngrams(hyp, n)
            ref_bag = _ngrams(ref, n)
            total[n - 1] += sum(hyp_bag.values())
            correct[n - 1] += sum(
                min(count, ref_bag[gram]) for gram, count in hyp_bag.items()
            )

    log_precision_sum = 0.0
    for n in range(BLEU_ORDER):
        if total[n] == 0:
            continue
        count = correct[n] if correct[n] > 0 else BLEU_EPSILON
        log_precision_sum += math.log(count / total[n])

    if hyp_len == 0:
        return 0.0
    brevity = 1.0 if hyp_len >= ref_len else math.exp(1 - ref_len / hyp_len)
    return 100.0 * brevity * math.exp(log_precision_sum / BLEU_ORDER)


def _strip_whitespace(text: str) -> str:
    return "".join(text.split())


def chrf_pp(hypotheses: Sequence[str], references: Sequence[str]) -> float:
    """ChrF++ in [0, 100]."""
    _check_corpora(hypotheses, references)
    n_slots = CHRF_CHAR_ORDER + CHRF_WORD_ORDER
    hyp_totals = [0] * n_slots
    ref_totals = [0] * n_slots
    matches = [0] * n_slots
    for hypothesis, reference in zip(hypotheses, references):
        hyp_chars = _strip_whitespace(hypothesis)
        ref_chars = _strip_whitespace(reference)
        hyp_words = tokenize(hypothesis)
        ref_words = tokenize(reference)
        for slot in range(n_slots):
            if slot < CHRF_CHAR_ORDER:
                n = slot + 1
                hyp_bag = _ngrams(hyp_chars, n)
                ref_bag = _ngrams(ref_chars, n)
            else:
                n = slot - CHRF_CHAR_ORDER + 1
                hyp_bag = _ngrams(hyp_words, n)
                ref_bag = _ngrams(ref_words, n)
            hyp_totals[slot] += sum(hyp_bag.values())
            ref_totals[slot] += sum(ref_bag.values())
            matches[slot] += sum((hyp_bag & ref_bag).values())

    precision_sum = recall_sum = 0.0
    effective = 0
    for slot in range(n_slots):
        if hyp_totals[slot] > 0 and ref_totals[slot] > 0:
            precision_sum += matches[slot] / hyp_totals[slot]
            recall_sum += matches[slot] / ref_totals[slot]
            effective += 1
    if effective == 0:
        return 0.0
    precision = precision_sum / effective
    recall = recall_sum / effective
    if precision + recall == 0.0:
        return 0.0
    beta_sq = CHRF_BETA * CHRF_BETA
    return 100.0 * (1 + beta_sq) * precision * recall / (beta_sq * precision + recall)


def action_f1(
    predicted: ActionScript, reference: ActionScript
) -> tuple[float, float, float]:
    """Precision/recall/F1 over (op, token) pairs with multiset matching.

    Positions are ignored.  Conventions: both NoAction scores (1, 1, 1);
    exactly one NoAction scores (0, 0, 0); an empty action list against a
    non-empty one scores (0, 0, 0); two empty lists score (1, 1, 1).
    """
    if predicted.is_noaction or reference.is_noaction:
        if predicted.is_noaction and reference.is_noaction:
            return (1.0, 1.0, 1.0)
        return (0.0, 0.0, 0.0)
    predicted_bag = Counter((a.op, a.token) for a in predicted)
    reference_bag = Counter((a.op, a.token) for a in reference)
    if not predicted_bag or not reference_bag:
        if not predicted_bag and not reference_bag:
            return (1.0, 1.0, 1.0)
        return (0.0, 0.0, 0.0)
    matched = sum((predicted_bag & reference_bag).values())
    precision = matched / sum(predicted_bag.values())
    recall = matched / sum(reference_bag.values())
    if precision + recall == 0.0:
        return (0.0, 0.0, 0.0)
    f1 = 2 * precision * recall / (precision + recall)
    return (precision, recall, f1)


def unigram_kl(
    corpus_p: Sequence[str],
    corpus_q: Sequence[str],
    alpha: float = 1e-4,
) -> float:
    """KL(P || Q) between smoothed unigram distributions (natural log)."""
    if not corpus_p or not corpus_q:
        raise EmptyCorpus("both corpora must be non-empty")
    counts_p: Counter = Counter()
    counts_q: Counter = Counter()
    for line in corpus_p:
        counts_p.update(tokenize(line))
    for line in corpus_q:
        counts_q.update(tokenize(line))
    vocabulary = set(counts_p) | set(counts_q)
    if not vocabulary:
        raise EmptyCorpus("corpora contain no tokens")
    n_p = sum(counts_p.values())
    n_q = sum(counts_q.values())
    v = len(vocabulary)
    divergence = 0.0
    for term in vocabulary:
        p = (counts_p[term] + alpha) / (n_p + alpha * v)
        q = (counts_q[term] + alpha) / (n_q + alpha * v)
        divergence += p * math.log(p / q)
    return divergence


@dataclass(frozen=True)
class MetricsReport:
    bleu: float
    chrfpp: float
    action_f1: float | None = None
    kl_divergence: float | None = None
    noaction_rate: float | None = None

    def __post_init__(self) -> None:
        checks = [
            ("bleu", self.bleu, 0.0, 100.0),
            ("chrfpp", self.chrfpp, 0.0, 100.0),
            ("action_f1", self.action_f1, 0.0, 1.0),
            ("kl_divergence", self.kl_divergence, 0.0, math.inf),
            ("noaction_rate", self.noaction_rate, 0.0, 1.0),
        ]
        for name, value, low, high in checks:
            if value is not None and not low <= value <= high:
                raise ValueError(f"{name} out of range [{low}, {high}]: {value}")

    def to_dict(self) -> dict[str, float]:
        fields = {
            "bleu": self.bleu,
            "chrfpp": self.chrfpp,
            "action_f1": self.action_f1,
            "kl_divergence": self.kl_divergence,
            "noaction_rate": self.noaction_rate,
        }
        return {k: v for k, v in fields.items() if v is not None}

    def render_table(self) -> str:
        rows = self.to_dict()
        width = max(len(k) for k in rows)
        return "\n".join(f"{k.ljust(width)}  {v:10.2f}" for k, v in rows.items())
