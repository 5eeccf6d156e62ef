"""TF-IDF vectorization and cosine top-k retrieval over an exemplar pool.

Weighting is frozen for reproducibility: TF is the raw term count within a
document, IDF(t) = ln(N / (1 + df(t))) + 1, and vectors stay unnormalized
(the norm division happens inside the cosine).  Ranking ties break by pool
insertion order so exemplar selection is stable across rebuilds.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Hashable, Iterable, Sequence

from .actions import tokenize
from .errors import DuplicateEntryId, EmptyPool

EntryId = Hashable
SparseVector = dict[str, float]

INDEX_FORMAT = "postedit-tfidf-v1"


@dataclass(frozen=True)
class TfIdfIndex:
    vocabulary: dict[str, int]
    idf: dict[str, float]
    doc_vectors: dict[EntryId, SparseVector]
    doc_count: int
    entry_order: tuple[EntryId, ...]


def build_index(pool_inputs: Sequence[tuple[EntryId, str]]) -> TfIdfIndex:
    """Index (entry_id, text) pairs for cosine retrieval."""
    if not pool_inputs:
        raise EmptyPool("cannot index an empty pool")
    term_counts: dict[EntryId, dict[str, int]] = {}
    order: list[EntryId] = []
    df: dict[str, int] = {}
    vocabulary: dict[str, int] = {}
    for entry_id, text in pool_inputs:
        if entry_id in term_counts:
            raise DuplicateEntryId(f"entry id {entry_id!r} appears twice")
        counts: dict[str, int] = {}
        for token in tokenize(text):
            counts[token] = counts.get(token, 0) + 1
            if token not in vocabulary:
                vocabulary[token] = len(vocabulary)
        term_counts[entry_id] = counts
        order.append(entry_id)
        for token in counts:
            df[token] = df.get(token, 0) + 1

    n_docs = len(order)
    idf = {t: math.log(n_docs / (1 + d)) + 1.0 for t, d in df.items()}
    doc_vectors = {
        entry_id: {t: c * idf[t] for t, c in counts.items()}
        for entry_id, counts in term_counts.items()
    }
    return TfIdfIndex(vocabulary, idf, doc_vectors, n_docs, tuple(order))


def vectorize_query(index: TfIdfIndex, text: str) -> SparseVector:
    """Weight a query in the index's feature space; unseen terms drop out."""
    vector: SparseVector = {}
    for token in tokenize(text):
        if token in index.idf:
            vector[token] = vector.get(token, 0.0) + index.idf[token]
    return vector


def cosine(u: SparseVector, v: SparseVector) -> float:
    """dot(u, v) / (|u| |v|); zero when either vector has zero norm."""
    nu = math.sqrt(sum(x * x for x in u.values()))
    nv = math.sqrt(sum(x * x for x in v.values()))
    if nu == 0.0 or nv == 0.0:
        return 0.0
    if len(u) > len(v):
        u, v = v, u
    dot = sum(w * v[t] for t, w in u.items() if t in v)
    return dot / (nu * nv)


def retrieve_top_k(
    index: TfIdfIndex,
    query: str,
    k: int,
    exclude: Iterable[EntryId] | None = None,
) -> list[tuple[EntryId, float]]:
    """Top-k entries by descending cosine; ties keep insertion order."""
    if k < 0:
        raise ValueError(f"k must be non-negative: {k}")
    if k == 0:
        return []
    excluded = frozenset(exclude) if exclude is not None else frozenset()
    query_vector = vectorize_query(index, query)
    scored = [
        (entry_id, cosine(query_vector, index.doc_vectors[entry_id]))
        for entry_id in index.entry_order
        if entry_id not in excluded
    ]
    scored.sort(key=lambda pair: -pair[1])  # stable: insertion order on ties
    return scored[:k]


def save_index(index: TfIdfIndex, path) -> None:
    """Persist as a flat JSON-lines file (versioned)."""
    with open(path, "w", encoding="utf-8") as fh:
        header = {"format": INDEX_FORMAT, "doc_count": index.doc_count}
        fh.write(json.dumps(header, sort_keys=True) + "\n")
        for term, col in sorted(index.vocabulary.items(), key=lambda kv: kv[1]):
            row = {"kind": "term", "term": term, "col": col, "idf": index.idf[term]}
            fh.write(json.dumps(row, sort_keys=True, ensure_ascii=False) + "\n")
        for entry_id in index.entry_order:
            triples = [
                [index.vocabulary[t], w] for t, w in index.doc_vectors[entry_id].items()
            ]
            triples.sort()
            row = {"kind": "doc", "id": entry_id, "triples": triples}
            fh.write(json.dumps(row, sort_keys=True, ensure_ascii=False) + "\n")


def load_index(path) -> TfIdfIndex:
    with open(path, encoding="utf-8") as fh:
        header = json.loads(fh.readline())
        if header.get("format") != INDEX_FORMAT:
            raise ValueError(f"unsupported index format: {header.get('format')!r}")
        vocabulary: dict[str, int] = {}
        idf: dict[str, float] = {}
        terms: dict[int, str] = {}
        doc_vectors: dict[EntryId, SparseVector] = {}
        order: list[EntryId] = []
        for line in fh:
            row = json.loads(line)
            if row["kind"] == "term":
                vocabulary[row["term"]] = row["col"]
                terms[row["col"]] = row["term"]
                idf[row["term"]] = row["idf"]
            else:
                doc_vectors[row["id"]] = {terms[c]: w for c, w in row["triples"]}
                order.append(row["id"])
    return TfIdfIndex(vocabulary, idf, doc_vectors, header["doc_count"], tuple(order))
