import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from codemix.parser.mst import arborescence_weight, chu_liu_edmonds, decode_mst


def is_single_root_tree(heads):
    if sum(h == 0 for h in heads) != 1:
        return False
    for start in range(1, len(heads) + 1):
        seen, node = set(), start
        while node != 0:
            if node in seen:
                return False
            seen.add(node)
            node = heads[node - 1]
    return True


def brute_force(arc_scores):
    """Exhaustive single-root search over every head assignment."""
    n = arc_scores.shape[1]
    best, best_weight = None, -np.inf
    for heads in itertools.product(range(n + 1), repeat=n):
        if any(h == d for d, h in enumerate(heads, start=1)):
            continue
        if not is_single_root_tree(heads):
            continue
        weight = sum(arc_scores[h, d - 1] for d, h in enumerate(heads, start=1))
        if weight > best_weight:
            best, best_weight = list(heads), weight
    return best, best_weight


def weight(arc_scores, heads):
    return sum(arc_scores[h, d - 1] for d, h in enumerate(heads, start=1))


def test_single_token():
    assert decode_mst(np.array([[3.0], [-np.inf]])) == [0]


def test_dominant_chain():
    scores = np.zeros((3, 2))
    scores[0, 0] = 10.0
    scores[1, 1] = 10.0
    assert decode_mst(scores) == [0, 1]


def test_shape_is_checked():
    with pytest.raises(ValueError):
        decode_mst(np.zeros((3, 3)))


def test_multiple_root_children_are_resolved():
    # both tokens love the root; the best single-root tree keeps the stronger one
    scores = np.array([[10.0, 9.0], [-np.inf, 1.0], [0.0, -np.inf]])
    heads = decode_mst(scores)
    assert heads == [0, 1]


def test_cycle_contraction_example():
    # 1 and 2 prefer each other; entering at 1 from the root loses least
    square = np.full((4, 4), -np.inf)
    square[0, 1], square[0, 2], square[0, 3] = 5.0, 1.0, 1.0
    square[2, 1], square[1, 2] = 10.0, 10.0
    square[1, 3], square[2, 3] = 2.0, 8.0
    heads = chu_liu_edmonds(square)
    assert heads.tolist() == [-1, 0, 1, 2]
    assert arborescence_weight(square, heads[1:]) == 23.0


@pytest.mark.parametrize("n", [2, 3, 4, 5])
def test_matches_brute_force(n, rng):
    for _ in range(40 if n < 5 else 15):
        scores = rng.normal(size=(n + 1, n))
        got = decode_mst(scores)
        assert is_single_root_tree(got)
        _, best = brute_force(scores)
        assert weight(scores, got) == pytest.approx(best)


def test_brute_force_with_ties(rng):
    for _ in range(30):
        scores = rng.integers(0, 3, size=(5, 4)).astype(float)
        got = decode_mst(scores)
        assert is_single_root_tree(got)
        assert weight(scores, got) == pytest.approx(brute_force(scores)[1])


@settings(max_examples=60, deadline=None)
@given(st.integers(2, 12), st.integers(0, 2**32 - 1))
def test_output_is_always_a_tree(n, seed):
    scores = np.random.default_rng(seed).normal(size=(n + 1, n)) * 5
    heads = decode_mst(scores)
    assert len(heads) == n
    assert is_single_root_tree(heads)


def test_larger_sentences_are_trees(rng):
    for n in (20, 50):
        assert is_single_root_tree(decode_mst(rng.normal(size=(n + 1, n))))
