"""Maximum spanning arborescence decoding (Chu-Liu/Edmonds).

Scores are indexed ``[head, dependent]`` with node 0 the virtual root.
Disallowed arcs carry ``-inf``.  Ties always go to the smaller head index.
"""

from __future__ import annotations

import numpy as np

NEG_INF = -np.inf


def _find_cycle(heads: np.ndarray) -> list[int] | None:
    n_nodes = len(heads)
    color = np.zeros(n_nodes, dtype=np.int8)
    color[0] = 2
    for start in range(1, n_nodes):
        path = []
        node = start
        while color[node] == 0:
            color[node] = 1
            path.append(node)
            node = heads[node]
        if color[node] == 1:
            return path[path.index(node):]
        for v in path:
            color[v] = 2
    return None


def chu_liu_edmonds(scores: np.ndarray) -> np.ndarray:
    """Best arborescence rooted at 0 for a square ``[head, dep]`` score matrix.

    Returns an int array ``heads`` with ``heads[0] = -1``.
    """
    scores = np.array(scores, dtype=np.float64)
    n_nodes = scores.shape[0]
    scores[:, 0] = NEG_INF
    np.fill_diagonal(scores, NEG_INF)

    heads = np.argmax(scores, axis=0)
    heads[0] = -1
    cycle = _find_cycle(heads)
    if cycle is None:
        return heads

    in_cycle = np.zeros(n_nodes, dtype=bool)
    in_cycle[cycle] = True
    cyc = np.array(sorted(cycle))
    outside = np.flatnonzero(~in_cycle)  # contains 0, ascending
    k = len(outside)
    cycle_in_scores = scores[heads[cyc], cyc]

    contracted = np.full((k + 1, k + 1), NEG_INF)
    contracted[:k, :k] = scores[np.ix_(outside, outside)]

    # arcs entering the cycle: break the cycle arc into the chosen entry node
    with np.errstate(invalid="ignore"):
        entering = scores[np.ix_(outside, cyc)] - cycle_in_scores[None, :]
    entering = np.where(np.isnan(entering), NEG_INF, entering)
    enter_choice = np.argmax(entering, axis=1)
    contracted[:k, k] = entering[np.arange(k), enter_choice]

    # arcs leaving the cycle
    leaving = scores[np.ix_(cyc, outside)]
    leave_choice = np.argmax(leaving, axis=0)
    contracted[k, :k] = leaving[leave_choice, np.arange(k)]

    sub_heads = chu_liu_edmonds(contracted)

    result = heads.copy()
    for new_v in range(1, k):
        v = outside[new_v]
        h = sub_heads[new_v]
        result[v] = cyc[leave_choice[new_v]] if h == k else outside[h]
    entry_from = sub_heads[k]
    entry_node = cyc[enter_choice[entry_from]]
    result[entry_node] = outside[entry_from]
    return result


def arborescence_weight(scores: np.ndarray, heads) -> float:
    """Total ``[head, dep]`` score of a head array given for dependents 1..n."""
    return float(sum(scores[h, d] for d, h in enumerate(heads, start=1)))


def decode_mst(arc_scores) -> list[int]:
    """Decode an ``(n+1) x n`` score matrix (row = head, column = dependent 1..n).

    The result is a head list for tokens 1..n with exactly one token attached
    to the root.  If the unconstrained optimum has several root children,
    every single root child is tried and the best total kept (first wins on
    ties).
    """
    arc_scores = np.asarray(arc_scores, dtype=np.float64)
    n = arc_scores.shape[1]
    if arc_scores.shape[0] != n + 1:
        raise ValueError(f"expected an (n+1) x n matrix, got {arc_scores.shape}")
    if n == 1:
        return [0]
    square = np.full((n + 1, n + 1), NEG_INF)
    square[:, 1:] = arc_scores
    np.fill_diagonal(square, NEG_INF)

    heads = chu_liu_edmonds(square)
    if np.count_nonzero(heads[1:] == 0) == 1:
        return heads[1:].tolist()

    best, best_weight = None, NEG_INF
    for child in range(1, n + 1):
        if not np.isfinite(square[0, child]):
            continue
        constrained = square.copy()
        constrained[0, :] = NEG_INF
        constrained[0, child] = square[0, child]
        candidate = chu_liu_edmonds(constrained)[1:]
        weight = arborescence_weight(square, candidate)
        if weight > best_weight:
            best, best_weight = candidate, weight
    return best.tolist()
