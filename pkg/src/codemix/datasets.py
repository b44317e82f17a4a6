"""Synthetic source/target language pairs for transfer experiments.

Sentences are generated from a small template grammar.  The source
language puts adjectives before nouns, uses prepositions, determiners and
auxiliaries.  The target language is derived by a lexicon swap plus local
reordering: adjectives follow their noun, adpositions follow their noun
phrase, and determiners and auxiliaries have no counterpart.  Alignment
matrices are exact except for a fraction of target words whose best
alignment is redirected, with low confidence, to a wrong source word.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .alignment import AlignmentMatrix, SentencePair
from .conllu import DependencyTree, Token, Treebank, check_tree
from .resources import ClusterMap, EmbeddingTable
from .translate import AlignedCorpus

_LEXICON = {
    "NOUN": "dog cat bird house river tree child king city horse boat stone letter garden "
            "teacher market window forest song road".split(),
    "VERB_T": "sees finds takes builds reads opens carries follows".split(),
    "VERB_I": "sleeps runs waits falls sings arrives".split(),
    "ADJ": "big small old red quiet green heavy bright young cold".split(),
    "ADV": "often quickly today slowly again there".split(),
    "ADP": "in near under with behind".split(),
    "DET": "the a".split(),
    "AUX": "is was".split(),
    "PUNCT": ["."],
}
_UPOS = {"VERB_T": "VERB", "VERB_I": "VERB"}
_SOURCE_ONLY = {"DET", "AUX"}


def target_form(word: str) -> str:
    """Deterministic lexicon swap used for the synthetic target language."""
    if word == ".":
        return "."
    return word[::-1] + "o"


@dataclass(eq=False)
class _Node:
    category: str
    word: str
    deprel: str
    head: "_Node | None" = None
    left: list = field(default_factory=list)  # source-order dependents before the head
    right: list = field(default_factory=list)

    @property
    def upos(self) -> str:
        return _UPOS.get(self.category, self.category)


def _attach(head: _Node, child: _Node, side: str):
    child.head = head
    (head.left if side == "left" else head.right).append(child)


def _word(rng, category):
    words = _LEXICON[category]
    return words[rng.integers(len(words))]


def _noun_phrase(rng, deprel, depth=0) -> _Node:
    noun = _Node("NOUN", _word(rng, "NOUN"), deprel)
    _attach(noun, _Node("DET", _word(rng, "DET"), "det"), "left")
    if rng.random() < 0.5:
        _attach(noun, _Node("ADJ", _word(rng, "ADJ"), "amod"), "left")
    if depth == 0 and rng.random() < 0.25:
        _attach(noun, _prep_phrase(rng, "nmod", depth + 1), "right")
    return noun


def _prep_phrase(rng, deprel, depth) -> _Node:
    noun = _noun_phrase(rng, deprel, depth)
    noun.left.insert(0, _Node("ADP", _word(rng, "ADP"), "case", head=noun))
    return noun


def _clause(rng) -> _Node:
    transitive = rng.random() < 0.6
    verb = _Node("VERB_T" if transitive else "VERB_I", "", "root")
    verb.word = _word(rng, verb.category)
    _attach(verb, _noun_phrase(rng, "nsubj"), "left")
    if rng.random() < 0.4:
        _attach(verb, _Node("AUX", _word(rng, "AUX"), "aux"), "left")
    if transitive:
        _attach(verb, _noun_phrase(rng, "obj"), "right")
    if rng.random() < 0.4:
        _attach(verb, _prep_phrase(rng, "obl", 1), "right")
    if rng.random() < 0.4:
        _attach(verb, _Node("ADV", _word(rng, "ADV"), "advmod"), "right")
    _attach(verb, _Node("PUNCT", ".", "punct"), "right")
    return verb


def _linearize_source(node: _Node) -> list[_Node]:
    out = []
    for child in node.left:
        out.extend(_linearize_source(child))
    out.append(node)
    for child in node.right:
        out.extend(_linearize_source(child))
    return out


def _linearize_target(node: _Node) -> list[_Node]:
    before, after, postposition = [], [], []
    for child in node.left:
        if child.category in _SOURCE_ONLY:
            continue
        if child.category == "ADJ":
            after.extend(_linearize_target(child))
        elif child.category == "ADP":
            postposition.extend(_linearize_target(child))
        else:
            before.extend(_linearize_target(child))
    for child in node.right:
        after.extend(_linearize_target(child))
    return before + [node] + after + postposition


def _tree(nodes: list[_Node], sent_id: str, target: bool) -> DependencyTree:
    """Tree over ``nodes`` in the given order, with target-language forms if ``target``."""
    position = {id(node): k for k, node in enumerate(nodes, start=1)}
    tokens = []
    for k, node in enumerate(nodes, start=1):
        tokens.append(Token(
            id=k,
            form=target_form(node.word) if target else node.word,
            upos=node.upos,
            head=0 if node.head is None else position[id(node.head)],
            deprel=node.deprel,
        ))
    return check_tree(DependencyTree(tuple(tokens), sent_id))


def _column(rng, n_rows, true_row, wrong, unaligned_rows):
    """One column of p(e_i | f_j) over rows 0..n (row 0 = null) and its argmax row.

    ``wrong`` is ``None`` for a clean column, a source row to misalign to,
    or ``-1`` for a random wrong row.
    """
    spread = rng.dirichlet(np.full(n_rows, 5.0))
    spread[list(unaligned_rows)] *= 0.3
    col = np.zeros(n_rows)
    if wrong is None:
        confident = rng.uniform(0.55, 0.95)
        spread[true_row] = 0.0
        col = spread * (1.0 - confident) / spread.sum()
        col[true_row] = confident
        return col, true_row
    if wrong == -1:
        candidates = [i for i in range(1, n_rows) if i != true_row]
        wrong = candidates[rng.integers(len(candidates))]
    peak = rng.uniform(0.3, 0.45)
    second = rng.uniform(0.1, peak - 0.05)
    spread[[true_row, wrong]] = 0.0
    col = np.minimum(spread * (1.0 - peak - second) / spread.sum(), 0.95 * peak)
    col[true_row] = second
    col[wrong] = peak
    # rescaling keeps the wrong row the strict maximum
    return col / col.sum(), wrong


@dataclass
class TransferTask:
    corpus: AlignedCorpus
    test: Treebank
    embeddings: EmbeddingTable
    clusters: ClusterMap
    noisy_targets: int = 0
    target_tokens: int = 0


def _hard_types(rng, clauses, noise):
    """Target word types that are consistently misaligned, covering ~``noise`` of target tokens."""
    counts: dict[str, int] = {}
    for root in clauses:
        for node in _linearize_target(root):
            if node.category != "PUNCT":
                counts[node.word] = counts.get(node.word, 0) + 1
    total = sum(counts.values())
    hard, covered = set(), 0
    for word in rng.permutation(sorted(counts)):
        if covered >= noise * total:
            break
        hard.add(str(word))
        covered += counts[word]
    return hard


def make_transfer_task(
    n_train: int = 300,
    n_test: int = 100,
    noise: float = 0.2,
    embed_dim: int = 50,
    seed: int = 0,
    noise_mode: str = "token",
) -> TransferTask:
    """Build a source treebank with translations and alignments, plus a clean target test bank.

    ``noise`` is the fraction of target words whose best alignment points
    at a wrong source word.  With ``noise_mode="type"`` the errors hit a
    fixed set of word types and always go to the neighbouring source word,
    as systematic aligner confusions do; ``"token"`` misaligns random
    tokens to random source words.
    """
    if noise_mode not in ("type", "token"):
        raise ValueError(f"noise_mode must be 'type' or 'token', got {noise_mode!r}")
    rng = np.random.default_rng(seed)
    clauses = [_clause(rng) for _ in range(n_train)]
    hard = _hard_types(rng, clauses, noise) if noise_mode == "type" else set()
    trees, pairs, matrices = [], [], []
    noisy_total = target_total = 0
    for k, root in enumerate(clauses):
        sent_id = f"train-{k + 1}"
        src_nodes = _linearize_source(root)
        tgt_nodes = _linearize_target(root)
        src_row = {id(node): i for i, node in enumerate(src_nodes, start=1)}
        n, m = len(src_nodes), len(tgt_nodes)
        unaligned = {src_row[id(node)] for node in src_nodes if node.category in _SOURCE_ONLY}
        probs = np.zeros((n + 1, m))
        for j, node in enumerate(tgt_nodes):
            true_row = src_row[id(node)]
            if noise_mode == "type":
                wrong = None
                if node.word in hard:
                    wrong = true_row - 1 if true_row > 1 else true_row + 1
            else:
                wrong = -1 if rng.random() < noise else None
            probs[:, j], best = _column(rng, n + 1, true_row, wrong, unaligned)
            noisy_total += int(best != true_row)
        target_total += m
        trees.append(_tree(src_nodes, sent_id, target=False))
        pairs.append(SentencePair(sent_id, [node.word for node in src_nodes],
                                  [target_form(node.word) for node in tgt_nodes]))
        matrices.append(AlignmentMatrix(probs, sent_id))

    test = [
        _tree(_linearize_target(_clause(rng)), f"test-{k + 1}", target=True) for k in range(n_test)
    ]
    embeddings, clusters = _resources(rng, embed_dim)
    return TransferTask(
        corpus=AlignedCorpus(Treebank(tuple(trees)), matrices, pairs),
        test=Treebank(tuple(test)),
        embeddings=embeddings,
        clusters=clusters,
        noisy_targets=noisy_total,
        target_tokens=target_total,
    )


def _resources(rng, dim):
    vectors, ids = {}, {}
    cluster = 0
    for category, words in _LEXICON.items():
        centre = rng.normal(size=dim)
        for k, word in enumerate(words):
            concept = centre + 0.5 * rng.normal(size=dim)
            concept /= np.linalg.norm(concept)
            forms = [word] if category in _SOURCE_ONLY else [word, target_form(word)]
            for form in forms:
                vectors[form] = concept + 0.05 * rng.normal(size=dim) / np.sqrt(dim)
                ids[form] = cluster + k % 3
        cluster += 3
    return EmbeddingTable(dim, vectors), ClusterMap(ids, n_clusters=cluster)


def make_toy_treebank(n: int = 20, seed: int = 0) -> Treebank:
    """Small source-language treebank from the same grammar."""
    rng = np.random.default_rng(seed)
    return Treebank(tuple(
        _tree(_linearize_source(_clause(rng)), str(k + 1), target=False) for k in range(n)
    ))
