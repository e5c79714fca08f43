"""Deterministic graph embeddings, z-score normalization, and retrieval.

Layout ``v1`` concatenates, in order:

1. critical-path summary (3): cp length over node count, mean and population
   std of per-node ``crit / cp``;
2. fanout histogram (8): fraction of nodes with fanout 0, 1, 2, 3, 4-5, 6-8,
   9-16, 17+;
3. level histogram (8): fraction of nodes per eighth of normalized level;
4. type histogram (len(vocab)): fraction of nodes per op type;
5. pressure (len(vocab)): per-type work over capacity times cp length.

The vocabulary is a sorted tuple of op types shared by every graph in a
corpus so that all vectors have identical dimension ``19 + 2 * len(vocab)``.
"""

from __future__ import annotations

from dataclasses import dataclass
from heapq import nsmallest
from typing import Iterable, Sequence

import numpy as np

from .graph import Dag, canonical_json

LAYOUT = "v1"

_FANOUT_EDGES = (0, 1, 2, 3, 5, 8, 16)


def embedding_dim(vocab: Sequence[str]) -> int:
    return 19 + 2 * len(vocab)


def build_vocab(dags: Iterable[Dag]) -> tuple[str, ...]:
    """Union of op types across a corpus, sorted for a stable layout."""
    types: set[str] = set()
    for dag in dags:
        types.update(dag.capacities)
    return tuple(sorted(types))


def _fanout_bin(fanout: int) -> int:
    for index, edge in enumerate(_FANOUT_EDGES):
        if fanout <= edge:
            return index
    return 7


def embed(dag: Dag, vocab: Sequence[str]) -> np.ndarray:
    stats = dag.stats()
    n = len(dag)
    vec = np.zeros(embedding_dim(vocab), dtype=float)
    if n == 0:
        return vec
    cp = stats.cp_length

    vec[0] = cp / n
    if cp > 0:
        ratios = np.array([stats.crit[v] / cp for v in range(n)], dtype=float)
        vec[1] = float(ratios.mean())
        vec[2] = float(ratios.std())

    for v in range(n):
        vec[3 + _fanout_bin(stats.fanout[v])] += 1.0 / n

    for v in range(n):
        if cp > 0:
            bin_index = min(7, int(8 * stats.level[v] / cp))
        else:
            bin_index = 0
        vec[11 + bin_index] += 1.0 / n

    type_index = {op: i for i, op in enumerate(vocab)}
    for rec in dag.nodes:
        if rec.op_type not in type_index:
            raise ValueError(f"op type {rec.op_type!r} is not in the embedding vocabulary")
        vec[19 + type_index[rec.op_type]] += 1.0 / n
    for op, value in stats.pressure.items():
        vec[19 + len(vocab) + type_index[op]] = value
    return vec


@dataclass(frozen=True)
class Normalizer:
    """Per-dimension z-score parameters fitted on a corpus.

    ``vocab`` optionally records the op-type vocabulary the vectors were
    embedded with, so saved artifacts are self-describing."""

    mean: tuple[float, ...]
    std: tuple[float, ...]
    layout: str = LAYOUT
    vocab: tuple[str, ...] = ()


def fit_normalizer(vectors: Sequence[np.ndarray], vocab: Sequence[str] = ()) -> Normalizer:
    """Sample statistics (ddof=1); a single vector or a constant dimension
    yields std 0, which :func:`apply_normalizer` treats as center-only."""
    if not vectors:
        raise ValueError("cannot fit a normalizer on zero vectors")
    matrix = np.stack(vectors)
    mean = matrix.mean(axis=0)
    if matrix.shape[0] > 1:
        std = matrix.std(axis=0, ddof=1)
    else:
        std = np.zeros(matrix.shape[1])
    return Normalizer(
        mean=tuple(float(x) for x in mean),
        std=tuple(float(x) for x in std),
        vocab=tuple(vocab),
    )


def apply_normalizer(normalizer: Normalizer, vector: np.ndarray) -> np.ndarray:
    mean = np.asarray(normalizer.mean)
    std = np.asarray(normalizer.std)
    if vector.shape != mean.shape:
        raise ValueError(f"vector dim {vector.shape} does not match normalizer dim {mean.shape}")
    centered = vector - mean
    scale = np.where(std > 0, std, 1.0)
    return centered / scale


def normalizer_to_document(normalizer: Normalizer) -> dict:
    doc = {
        "mean": list(normalizer.mean),
        "std": list(normalizer.std),
        "layout": normalizer.layout,
    }
    if normalizer.vocab:
        doc["vocab"] = list(normalizer.vocab)
    return doc


def dump_normalizer(normalizer: Normalizer) -> str:
    return canonical_json(normalizer_to_document(normalizer))


def load_normalizer(document) -> Normalizer:
    import json

    if isinstance(document, str):
        document = json.loads(document)
    if document.get("layout") != LAYOUT:
        raise ValueError(f"unsupported normalizer layout {document.get('layout')!r}")
    return Normalizer(
        mean=tuple(float(x) for x in document["mean"]),
        std=tuple(float(x) for x in document["std"]),
        layout=LAYOUT,
        vocab=tuple(document.get("vocab", ())),
    )


def cosine_sim(a: np.ndarray, b: np.ndarray) -> float:
    """Cosine similarity with the convention that any zero vector has
    similarity 0 to everything."""
    na = float(np.linalg.norm(a))
    nb = float(np.linalg.norm(b))
    if na == 0.0 or nb == 0.0:
        return 0.0
    return float(np.dot(a, b) / (na * nb))


def retrieve_top_m(
    query: np.ndarray,
    entries: Sequence[tuple[str, np.ndarray]],
    m: int,
) -> list[tuple[str, float]]:
    """The ``m`` entries most similar to ``query``: similarity descending,
    id ascending on exact ties."""
    if m < 0:
        raise ValueError("m must be nonnegative")
    scored = [(entry_id, cosine_sim(query, vec)) for entry_id, vec in entries]
    picked = nsmallest(m, scored, key=lambda pair: (-pair[1], pair[0]))
    return picked
