"""Shared test oracles and data builders.

Every oracle here recomputes a quantity by a different algorithm than the
implementation under test: exhaustive path walks for level and crit, literal
reachability sets for reconvergence, unit-cycle stepping for the scheduler,
and bounded start-time enumeration for the exact optimum.
"""

from __future__ import annotations

import random
from collections import Counter
from typing import Mapping

from hypothesis import strategies as st

from priosynth.graph import Dag, load_dag


@st.composite
def dag_documents(draw, max_nodes: int = 8, max_types: int = 3, max_duration: int = 5, max_cap: int = 3):
    n = draw(st.integers(1, max_nodes))
    type_count = draw(st.integers(1, max_types))
    types = [f"t{i}" for i in range(type_count)]
    nodes = [
        {"id": i, "type": draw(st.sampled_from(types)), "duration": draw(st.integers(1, max_duration))}
        for i in range(n)
    ]
    edges = []
    for v in range(1, n):
        for u in range(v):
            if draw(st.booleans()):
                edges.append([u, v])
    capacities = {t: draw(st.integers(1, max_cap)) for t in types}
    return {"nodes": nodes, "edges": edges, "capacities": capacities}


@st.composite
def dags(draw, **kwargs):
    return load_dag(draw(dag_documents(**kwargs)))


def random_dag(rng: random.Random, n: int, edge_prob: float = 0.4, types=("a", "b"), max_duration: int = 4, max_cap: int = 2) -> Dag:
    """Seeded random DAG on a fixed topological order (edges u->v, u < v)."""
    nodes = [
        {"id": i, "type": rng.choice(types), "duration": rng.randint(1, max_duration)}
        for i in range(n)
    ]
    edges = [[u, v] for v in range(1, n) for u in range(v) if rng.random() < edge_prob]
    capacities = {t: rng.randint(1, max_cap) for t in types}
    return load_dag({"nodes": nodes, "edges": edges, "capacities": capacities})


def brute_level(dag: Dag, v: int) -> int:
    best = 0

    def walk(node: int, acc: int) -> None:
        nonlocal best
        preds = dag.preds[node]
        if not preds:
            best = max(best, acc)
        for u in preds:
            walk(u, acc + dag.nodes[u].duration)

    walk(v, 0)
    return best


def brute_crit(dag: Dag, v: int) -> int:
    best = 0

    def walk(node: int, acc: int) -> None:
        nonlocal best
        acc += dag.nodes[node].duration
        succs = dag.succs[node]
        if not succs:
            best = max(best, acc)
        for w in succs:
            walk(w, acc)

    walk(v, 0)
    return best


def reach_set(dag: Dag, v: int) -> set[int]:
    out = {v}
    stack = [v]
    while stack:
        x = stack.pop()
        for w in dag.succs[x]:
            if w not in out:
                out.add(w)
                stack.append(w)
    return out


def brute_reconv(dag: Dag, v: int) -> int:
    children = dag.succs[v]
    count = 0
    for i in range(len(children)):
        for j in range(i + 1, len(children)):
            if reach_set(dag, children[i]) & reach_set(dag, children[j]):
                count += 1
    return count


def unit_step_schedule(dag: Dag, priority: Mapping[int, float]) -> dict[int, int]:
    """Reference list scheduler that walks one cycle at a time."""
    n = len(dag)
    caps = dag.capacities
    starts: dict[int, int] = {}
    finished: set[int] = set()
    running: dict[int, int] = {}
    t = 0
    while len(finished) < n:
        for v in list(running):
            if running[v] <= t:
                finished.add(v)
                del running[v]
        busy = Counter(dag.nodes[v].op_type for v in running)
        ready = [
            v for v in range(n) if v not in starts and all(u in finished for u in dag.preds[v])
        ]
        for v in sorted(ready, key=lambda v: (-priority[v], v)):
            op = dag.nodes[v].op_type
            if busy[op] < caps[op]:
                busy[op] += 1
                starts[v] = t
                running[v] = t + dag.nodes[v].duration
        t += 1
        if t > 10**6:
            raise RuntimeError("unit stepper did not terminate")
    return starts


def capacity_ok(dag: Dag, starts: Mapping[int, int]) -> bool:
    """Literal per-cycle occupancy count, independent of verify_schedule."""
    horizon = max((starts[v] + dag.nodes[v].duration for v in starts), default=0)
    for t in range(horizon):
        load: Counter = Counter()
        for v, s in starts.items():
            if s <= t < s + dag.nodes[v].duration:
                load[dag.nodes[v].op_type] += 1
        for op, used in load.items():
            if used > dag.capacities[op]:
                return False
    return True


def brute_optimal(dag: Dag) -> int:
    """Minimum makespan by bounded enumeration of all start assignments."""
    n = len(dag)
    if n == 0:
        return 0
    horizon = sum(rec.duration for rec in dag.nodes)
    order = dag.topo_order
    best = [horizon]
    starts: dict[int, int] = {}

    def go(index: int) -> None:
        if index == n:
            makespan = max(starts[v] + dag.nodes[v].duration for v in starts)
            if makespan < best[0] and capacity_ok(dag, starts):
                best[0] = makespan
            return
        v = order[index]
        lo = max((starts[u] + dag.nodes[u].duration for u in dag.preds[v]), default=0)
        hi = best[0] - dag.nodes[v].duration
        for s in range(lo, hi + 1):
            starts[v] = s
            go(index + 1)
        starts.pop(v, None)

    go(0)
    return best[0]
