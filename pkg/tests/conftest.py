import numpy as np
import pytest
import torch

from codemix.alignment import AlignmentMatrix, SentencePair
from codemix.conllu import DependencyTree, Token

torch.set_num_threads(1)

UPOS = ("NOUN", "VERB", "ADJ", "ADP", "DET", "PUNCT")
LABELS = ("nsubj", "obj", "amod", "case", "det", "punct")


def make_tree(heads, forms=None, upos=None, deprels=None, sent_id="s1", **token_fields):
    n = len(heads)
    forms = forms or [f"w{i}" for i in range(1, n + 1)]
    upos = upos or ["NOUN"] * n
    deprels = deprels or ["root" if h == 0 else "dep" for h in heads]
    tokens = tuple(
        Token(id=i, form=f, upos=u, head=h, deprel=d, **token_fields)
        for i, (f, u, h, d) in enumerate(zip(forms, upos, heads, deprels), start=1)
    )
    return DependencyTree(tokens, sent_id)


def random_heads(rng, n):
    """Uniformly shuffled random tree: attach each node to an earlier node in a random order."""
    order = rng.permutation(n) + 1
    heads = [0] * n
    for k, node in enumerate(order):
        heads[node - 1] = 0 if k == 0 else int(order[rng.integers(k)])
    return heads


def random_tree(rng, n, sent_id="s1"):
    heads = random_heads(rng, n)
    upos = [UPOS[rng.integers(len(UPOS))] for _ in range(n)]
    deprels = ["root" if h == 0 else LABELS[rng.integers(len(LABELS))] for h in heads]
    forms = [f"e{i}" for i in range(1, n + 1)]
    return make_tree(heads, forms, upos, deprels, sent_id)


def random_matrix(rng, n, m, sent_id="s1", ties=False):
    probs = rng.dirichlet(np.full(n + 1, 0.5), size=m).T
    if ties:
        # quantize so equal values (and argmax ties) actually happen
        probs = np.round(probs * 4) + 1e-3
        probs /= probs.sum(axis=0, keepdims=True)
    return AlignmentMatrix(probs, sent_id)


def random_instance(rng, max_n=10, max_m=10, sent_id="s1", ties=None):
    n = int(rng.integers(1, max_n + 1))
    m = int(rng.integers(1, max_m + 1))
    tree = random_tree(rng, n, sent_id)
    if ties is None:
        ties = bool(rng.integers(2))
    matrix = random_matrix(rng, n, m, sent_id, ties=ties)
    pair = SentencePair(sent_id, tree.forms, [f"f{j}" for j in range(1, m + 1)])
    return tree, matrix, pair


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def pytest_terminal_summary(terminalreporter):
    from acceptance_log import LINES

    if LINES:
        terminalreporter.section("acceptance criteria")
        for line in LINES:
            terminalreporter.write_line(line)
