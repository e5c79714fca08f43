"""Structural motif mining and the clustered kernel library.

A kernel is a reusable scheduling hint: a centroid signature in embedding
space (for retrieval by similarity) plus a parameterized priority template
(for synthesis).  Kernels are mined from a training corpus in four motif
categories and deduplicated by greedy leader clustering per category.
"""

from __future__ import annotations

import json
from collections import deque
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

import numpy as np

from .dsl import PriorityExpr, make_expr
from .embedding import (
    Normalizer,
    apply_normalizer,
    build_vocab,
    cosine_sim,
    embed,
    fit_normalizer,
)
from .graph import Dag, NodeRecord, canonical_json

LIBRARY_LAYOUT = "v1"

# Template families: feature -> sign.  Parameters are per-feature magnitudes;
# the sign is fixed by the family.
TEMPLATE_FAMILIES: dict[str, tuple[tuple[str, float], ...]] = {
    "reconvergent_A": (("crit", 1.0), ("reconv", 1.0), ("fanout", 1.0)),
    "deep_chain_B": (("crit", 1.0), ("slack", -1.0)),
    "fanout_aware": (("fanout", 1.0), ("crit", 1.0)),
    "resource_aware": (("crit", 1.0), ("pressure", 1.0)),
}

# Motif category -> template family attached to its kernels.
CATEGORY_FAMILY: dict[str, str] = {
    "neighborhood": "resource_aware",
    "hub": "fanout_aware",
    "reconvergent": "reconvergent_A",
    "chain": "deep_chain_B",
}

_DEFAULT_WEIGHT = 1.0
_DEFAULT_RANGE = (0.0, 4.0)


@dataclass(frozen=True)
class TemplateSpec:
    """A family name with per-parameter default magnitudes and search ranges."""

    family: str
    defaults: tuple[tuple[str, float], ...]
    ranges: tuple[tuple[str, tuple[float, float]], ...]

    def default_expr(self) -> PriorityExpr:
        return instantiate_template(self.family, dict(self.defaults))


def default_template(family: str) -> TemplateSpec:
    if family not in TEMPLATE_FAMILIES:
        raise ValueError(f"unknown template family {family!r}")
    features = sorted(feature for feature, _ in TEMPLATE_FAMILIES[family])
    return TemplateSpec(
        family=family,
        defaults=tuple((feature, _DEFAULT_WEIGHT) for feature in features),
        ranges=tuple((feature, _DEFAULT_RANGE) for feature in features),
    )


def instantiate_template(family: str, params: Mapping[str, float]) -> PriorityExpr:
    """Bind per-feature magnitudes; the family fixes each term's sign."""
    if family not in TEMPLATE_FAMILIES:
        raise ValueError(f"unknown template family {family!r}")
    weights: dict[str, float] = {}
    for feature, sign in TEMPLATE_FAMILIES[family]:
        magnitude = float(params.get(feature, _DEFAULT_WEIGHT))
        weights[feature] = weights.get(feature, 0.0) + sign * magnitude
    return make_expr(weights)


@dataclass(frozen=True)
class Motif:
    """A node subset of one graph, tagged with its mining category."""

    category: str
    anchor: int
    nodes: tuple[int, ...]


@dataclass(frozen=True)
class Kernel:
    id: str
    category: str
    signature: tuple[float, ...]
    template: TemplateSpec
    support: int


def induced_subdag(dag: Dag, nodes: Iterable[int]) -> Dag:
    """Induced subgraph with ids remapped to dense 0..m-1 in ascending
    original-id order; capacities restricted to the op types present."""
    chosen = sorted(set(nodes))
    remap = {v: i for i, v in enumerate(chosen)}
    records = [
        NodeRecord(id=remap[v], op_type=dag.nodes[v].op_type, duration=dag.nodes[v].duration)
        for v in chosen
    ]
    edges = [(remap[u], remap[v]) for u, v in dag.edges if u in remap and v in remap]
    used = {dag.nodes[v].op_type for v in chosen}
    caps = {t: dag.capacities[t] for t in used}
    return Dag(records, edges, caps)


def _bounded_bfs(adjacency: Sequence[Sequence[int]], source: int, depth: int) -> dict[int, int]:
    """Nodes within ``depth`` edges of ``source`` (source included, dist 0)."""
    dist = {source: 0}
    queue = deque([source])
    while queue:
        v = queue.popleft()
        if dist[v] == depth:
            continue
        for w in adjacency[v]:
            if w not in dist:
                dist[w] = dist[v] + 1
                queue.append(w)
    return dist


def _top_decile(degrees: Mapping[int, int], n: int) -> list[int]:
    # Highest-degree ceil(n/10) nodes, ties broken by ascending id.
    count = -(-n // 10)
    ranked = sorted(degrees, key=lambda v: (-degrees[v], v))
    return ranked[:count]


def mine_motifs(
    dag: Dag,
    k: int = 2,
    chain_min_len: int = 4,
) -> list[Motif]:
    """All motifs of one graph, in a deterministic order.

    - ``neighborhood``: k-hop forward plus backward ball around every node;
    - ``hub``: anchor with direct neighbors, for top-decile fanout and fanin
      anchors;
    - ``reconvergent``: for anchors with reconverging child pairs, the union
      of short child-to-witness paths (connector nodes included so the motif
      stays connected);
    - ``chain``: maximal linear runs (fanin and fanout at most 1) of at least
      ``chain_min_len`` nodes.

    Motifs with fewer than two nodes are dropped; duplicates within one
    category are kept once.
    """
    n = len(dag)
    stats = dag.stats()
    motifs: list[Motif] = []
    seen: set[tuple[str, tuple[int, ...]]] = set()

    def push(category: str, anchor: int, nodes: Iterable[int]) -> None:
        subset = tuple(sorted(set(nodes)))
        if len(subset) < 2:
            return
        key = (category, subset)
        if key in seen:
            return
        seen.add(key)
        motifs.append(Motif(category=category, anchor=anchor, nodes=subset))

    for v in range(n):
        ball = set(_bounded_bfs(dag.succs, v, k)) | set(_bounded_bfs(dag.preds, v, k))
        push("neighborhood", v, ball)

    hub_anchors = sorted(set(_top_decile(stats.fanout, n)) | set(_top_decile(stats.fanin, n)))
    for v in hub_anchors:
        push("hub", v, {v, *dag.preds[v], *dag.succs[v]})

    for v in range(n):
        if stats.reconv[v] == 0:
            continue
        children = dag.succs[v]
        reach_from_child = {c: _bounded_bfs(dag.succs, c, k) for c in children}
        witness_count: dict[int, int] = {}
        for c in children:
            for x in reach_from_child[c]:
                witness_count[x] = witness_count.get(x, 0) + 1
        witnesses = {x for x, count in witness_count.items() if count >= 2}
        region = {v, *children}
        if witnesses:
            for c in children:
                for y, dist_cy in reach_from_child[c].items():
                    onward = _bounded_bfs(dag.succs, y, k - dist_cy)
                    if witnesses & set(onward):
                        region.add(y)
        push("reconvergent", v, region)

    eligible = [v for v in range(n) if stats.fanin[v] <= 1 and stats.fanout[v] <= 1]
    eligible_set = set(eligible)
    for v in eligible:
        preds = dag.preds[v]
        if preds and preds[0] in eligible_set:
            continue
        run = [v]
        while True:
            succs = dag.succs[run[-1]]
            if len(succs) == 1 and succs[0] in eligible_set:
                run.append(succs[0])
            else:
                break
        if len(run) >= chain_min_len:
            push("chain", run[0], run)

    return motifs


@dataclass
class _Cluster:
    category: str
    order: int
    centroid: np.ndarray
    support: int


def cluster_motifs(
    entries: Sequence[tuple[Motif, np.ndarray]],
    theta: float = 0.95,
    budget: int = 50,
) -> list[tuple[Motif, np.ndarray, int, int]]:
    """Greedy leader clustering per category at cosine threshold ``theta``.

    Returns one row per surviving cluster: (leader motif, centroid, support,
    creation order).  Clusters beyond ``budget`` are dropped lowest-support
    first (creation order breaks ties).
    """
    clusters: list[_Cluster] = []
    leaders: list[Motif] = []
    for motif, vec in entries:
        best_index = -1
        best_sim = -2.0
        for index, cluster in enumerate(clusters):
            if cluster.category != motif.category:
                continue
            sim = cosine_sim(cluster.centroid, vec)
            if sim > best_sim:
                best_sim = sim
                best_index = index
        if best_index >= 0 and best_sim >= theta:
            cluster = clusters[best_index]
            # Running mean keeps the centroid independent of later members.
            cluster.centroid = cluster.centroid + (vec - cluster.centroid) / (cluster.support + 1)
            cluster.support += 1
        else:
            clusters.append(
                _Cluster(category=motif.category, order=len(clusters), centroid=vec.copy(), support=1)
            )
            leaders.append(motif)
    ranked = sorted(range(len(clusters)), key=lambda i: (-clusters[i].support, clusters[i].order))
    kept = sorted(ranked[:budget])
    return [(leaders[i], clusters[i].centroid, clusters[i].support, clusters[i].order) for i in kept]


def build_kernel_library(
    train: Sequence[Dag],
    vocab: Sequence[str] | None = None,
    k: int = 2,
    theta: float = 0.95,
    budget: int = 50,
    chain_min_len: int = 4,
) -> tuple[list[Kernel], Normalizer]:
    """Mine, embed, cluster, and budget kernels from a training corpus.

    The normalizer is fitted on whole-graph embeddings of the corpus and is
    the same one used at retrieval time, so motif signatures and query
    vectors live in one z-space.
    """
    if not train:
        raise ValueError("cannot build a kernel library from zero graphs")
    if vocab is None:
        vocab = build_vocab(train)
    normalizer = fit_normalizer([embed(dag, vocab) for dag in train], vocab=vocab)

    entries: list[tuple[Motif, np.ndarray]] = []
    for dag in train:
        for motif in mine_motifs(dag, k=k, chain_min_len=chain_min_len):
            vec = apply_normalizer(normalizer, embed(induced_subdag(dag, motif.nodes), vocab))
            entries.append((motif, vec))

    kernels: list[Kernel] = []
    counters: dict[str, int] = {}
    for motif, centroid, support, _ in cluster_motifs(entries, theta=theta, budget=budget):
        seq = counters.get(motif.category, 0)
        counters[motif.category] = seq + 1
        kernels.append(
            Kernel(
                id=f"{motif.category}-{seq:03d}",
                category=motif.category,
                signature=tuple(float(x) for x in centroid),
                template=default_template(CATEGORY_FAMILY[motif.category]),
                support=support,
            )
        )
    kernels.sort(key=lambda kern: kern.id)
    return kernels, normalizer


def library_to_document(kernels: Sequence[Kernel]) -> dict:
    return {
        "layout": LIBRARY_LAYOUT,
        "kernels": [
            {
                "id": kern.id,
                "category": kern.category,
                "signature": list(kern.signature),
                "template": {
                    "family": kern.template.family,
                    "defaults": {name: value for name, value in kern.template.defaults},
                    "ranges": {name: list(bounds) for name, bounds in kern.template.ranges},
                },
                "support": kern.support,
            }
            for kern in sorted(kernels, key=lambda kern: kern.id)
        ],
    }


def dump_library(kernels: Sequence[Kernel]) -> str:
    return canonical_json(library_to_document(kernels))


def load_library(document) -> list[Kernel]:
    if isinstance(document, str):
        document = json.loads(document)
    if document.get("layout") != LIBRARY_LAYOUT:
        raise ValueError(f"unsupported kernel library layout {document.get('layout')!r}")
    kernels = []
    for entry in document["kernels"]:
        template = entry["template"]
        kernels.append(
            Kernel(
                id=entry["id"],
                category=entry["category"],
                signature=tuple(float(x) for x in entry["signature"]),
                template=TemplateSpec(
                    family=template["family"],
                    defaults=tuple(sorted((k, float(v)) for k, v in template["defaults"].items())),
                    ranges=tuple(
                        sorted((k, (float(v[0]), float(v[1]))) for k, v in template["ranges"].items())
                    ),
                ),
                support=int(entry["support"]),
            )
        )
    kernels.sort(key=lambda kern: kern.id)
    return kernels


def retrieve_kernels(
    dag: Dag,
    kernels: Sequence[Kernel],
    normalizer: Normalizer,
    vocab: Sequence[str],
    m: int,
) -> list[tuple[Kernel, float]]:
    """Top-m kernels for one query graph: cosine similarity in z-space,
    descending, kernel id ascending on ties."""
    from .embedding import retrieve_top_m

    query = apply_normalizer(normalizer, embed(dag, vocab))
    by_id = {kern.id: kern for kern in kernels}
    picked = retrieve_top_m(query, [(kern.id, np.asarray(kern.signature)) for kern in kernels], m)
    return [(by_id[kern_id], sim) for kern_id, sim in picked]
