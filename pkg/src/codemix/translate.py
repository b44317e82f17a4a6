"""Code-mixed tree translation: substitution, deletion, span reordering.

A source tree is partially translated using its machine translation and
the alignment matrix between the two sentences.  Confidently aligned target
words replace their source words, unaligned source words with low retention
are removed, and every contiguous run of target words is put back into the
order of the translation.  ``ratio`` controls how much of each candidate
pool is used: 0 leaves the source tree untouched, 1 translates everything
that has a non-null alignment.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace
from typing import Iterable, Mapping, Sequence

from sklearn.base import BaseEstimator, TransformerMixin

from .alignment import (
    AlignmentMatrix,
    SentencePair,
    best_alignments,
    check_pair,
)
from .conllu import TARGET, DependencyTree, Token, Treebank, check_tree, renumber
from .exceptions import AlignmentDataError, ConfigError, ContractViolation

logger = logging.getLogger(__name__)


def check_ratio(ratio) -> float:
    ratio = float(ratio)
    if not 0.0 <= ratio <= 1.0 or math.isnan(ratio):
        raise ConfigError(f"translation ratio must be in [0, 1], got {ratio}")
    return ratio


@dataclass(frozen=True)
class CodeMixConfig:
    ratio: float = 0.7
    enable_deletion: bool = True
    enable_reordering: bool = True
    seed: int = 0  # reserved; the pipeline is deterministic
    # label for extra members of a many-to-one group whose source word is the root
    root_group_deprel: str = "dep"

    def __post_init__(self):
        object.__setattr__(self, "ratio", check_ratio(self.ratio))


@dataclass(frozen=True)
class SubstitutionPlan:
    chosen: tuple[tuple[int, int, float], ...] = ()
    groups: Mapping[int, tuple[int, ...]] = field(default_factory=dict)

    @property
    def probability(self) -> dict[int, float]:
        return {j: p for j, _, p in self.chosen}

    @property
    def n_inserted(self) -> int:
        return sum(len(js) - 1 for js in self.groups.values())


@dataclass(frozen=True)
class DeletionPlan:
    """Source indices to delete with their retention scores.

    ``positions`` are the same tokens' ids in the tree the plan is applied
    to, which differ from the source indices once many-to-one substitution
    has inserted tokens.
    """

    doomed: tuple[tuple[int, float], ...] = ()
    positions: tuple[int, ...] = ()


# ---------------------------------------------------------------------------
# selection


def selection_quota(ratio: float, universe_size: int) -> int:
    # round() keeps 10 * 0.7 from becoming 8 under ceil
    return math.ceil(round(universe_size * ratio, 9))


def select(items: Sequence[tuple[int, float]], ratio: float, universe_size: int | None = None):
    """Top ``ceil(universe_size * ratio)`` items by value.

    ``items`` are ``(index, value)`` pairs; ties in value go to the smaller
    index.  The result is ordered by rank.
    """
    ratio = check_ratio(ratio)
    if universe_size is None:
        universe_size = len(items)
    if universe_size < len(items):
        raise ConfigError("universe_size must be at least the number of items")
    quota = min(selection_quota(ratio, universe_size), len(items))
    ranked = sorted(items, key=lambda item: (-item[1], item[0]))
    return ranked[:quota]


# ---------------------------------------------------------------------------
# word substitution


def plan_substitution(tree: DependencyTree, matrix: AlignmentMatrix, ratio: float) -> SubstitutionPlan:
    if matrix.n != len(tree):
        raise AlignmentDataError(
            f"pair {matrix.pair_id!r}: matrix has {matrix.n} source rows, tree has {len(tree)} tokens"
        )
    best = best_alignments(matrix)
    pool = [(j, p) for j, (a, p) in enumerate(best, start=1) if a >= 1]
    picked = select(pool, ratio, matrix.m)
    chosen = tuple((j, best[j - 1][0], p) for j, p in picked)
    groups: dict[int, list[int]] = {}
    for j, a, _ in chosen:
        groups.setdefault(a, []).append(j)
    return SubstitutionPlan(chosen, {a: tuple(sorted(js)) for a, js in sorted(groups.items())})


def _group_anchor(js: Sequence[int], probability: Mapping[int, float]) -> int:
    return min(js, key=lambda j: (-probability[j], j))


def apply_substitution(
    tree: DependencyTree,
    plan: SubstitutionPlan,
    pair: SentencePair,
    root_group_deprel: str = "dep",
) -> DependencyTree:
    """Replace planned source tokens by their aligned target words.

    A source token aligned to k > 1 chosen targets becomes k consecutive
    tokens.  The most probable one (the anchor) keeps the source token's
    head and children; the others attach to the source token's head with
    its label.  POS tags are copied from the source token.
    """
    if not plan.groups:
        return tree
    n = len(tree)
    probability = plan.probability
    layout: list[tuple[Token, int, bool]] = []  # (token, source index, extra group member)
    position_of: dict[int, int] = {}
    for i, tok in enumerate(tree.tokens, start=1):
        js = plan.groups.get(i)
        if not js:
            layout.append((tok, i, False))
            position_of[i] = len(layout)
            continue
        anchor = _group_anchor(js, probability)
        for j in js:
            if not 1 <= j <= pair.m:
                raise ContractViolation(f"target index {j} out of range 1..{pair.m}")
            translated = replace(
                tok, form=pair.target_tokens[j - 1], lang=TARGET, origin_index=j, cluster=None
            )
            layout.append((translated, i, j != anchor))
            if j == anchor:
                position_of[i] = len(layout)
    if any(not 1 <= a <= n for a in plan.groups):
        raise ContractViolation("substitution plan refers to a source index outside the tree")

    tokens, heads = [], []
    for tok, i, extra in layout:
        source_head = tree.tokens[i - 1].head
        if extra and source_head == 0:
            heads.append(position_of[i])
            tok = replace(tok, deprel=root_group_deprel)
        else:
            heads.append(0 if source_head == 0 else position_of[source_head])
        tokens.append(tok)
    return tree.with_tokens(renumber(tokens, heads))


# ---------------------------------------------------------------------------
# word deletion


def retention_scores(matrix: AlignmentMatrix) -> list[float]:
    """``r_i`` = sum over targets of p(e_i | f_j), for i = 1..n (index 0 of the result is i = 1)."""
    return [float(s) for s in matrix.probs[1:].sum(axis=1)]


def _positions_after_substitution(n: int, plan: SubstitutionPlan | None) -> dict[int, int]:
    positions, cursor = {}, 0
    for i in range(1, n + 1):
        width = len(plan.groups.get(i, ())) if plan is not None else 0
        cursor += max(width, 1)
        positions[i] = cursor
    return positions


def plan_deletion(
    tree: DependencyTree,
    matrix: AlignmentMatrix,
    ratio: float,
    substitution: SubstitutionPlan | None = None,
) -> DeletionPlan:
    """Choose the unaligned, non-root source words with the lowest retention.

    ``tree`` is the source tree; pass the ``substitution`` plan that was
    applied before deletion so that ``positions`` point into the
    substituted tree.
    """
    if matrix.n != len(tree):
        raise AlignmentDataError(
            f"pair {matrix.pair_id!r}: matrix has {matrix.n} source rows, tree has {len(tree)} tokens"
        )
    aligned = {a for a, _ in best_alignments(matrix)}
    root = tree.root
    retention = retention_scores(matrix)
    candidates = [
        (i, -retention[i - 1]) for i in range(1, len(tree) + 1) if i not in aligned and i != root
    ]
    picked = select(candidates, ratio, len(candidates))
    doomed = tuple((i, -v) for i, v in picked)
    where = _positions_after_substitution(len(tree), substitution)
    return DeletionPlan(doomed, tuple(where[i] for i, _ in doomed))


def apply_deletion(tree: DependencyTree, plan: DeletionPlan) -> DependencyTree:
    """Remove the planned tokens; orphans climb to the nearest surviving ancestor."""
    doomed = set(plan.positions)
    if not doomed:
        return tree
    if tree.root in doomed:
        raise ContractViolation(f"sentence {tree.sent_id!r}: the root token cannot be deleted")
    new_id, survivors = {0: 0}, []
    for tok in tree.tokens:
        if tok.id not in doomed:
            survivors.append(tok)
            new_id[tok.id] = len(survivors)
    heads = []
    for tok in survivors:
        head = tok.head
        while head in doomed:
            head = tree.tokens[head - 1].head
        heads.append(new_id[head])
    return tree.with_tokens(renumber(survivors, heads))


# ---------------------------------------------------------------------------
# span reordering


def target_spans(tree: DependencyTree) -> list[tuple[int, int]]:
    """Maximal runs of target-language tokens as 0-based half-open ranges."""
    spans, start = [], None
    for k, tok in enumerate(tree.tokens):
        if tok.is_target and start is None:
            start = k
        elif not tok.is_target and start is not None:
            spans.append((start, k))
            start = None
    if start is not None:
        spans.append((start, len(tree)))
    return spans


def reorder(tree: DependencyTree) -> DependencyTree:
    """Sort each target span by position in the translation; arcs are untouched."""
    order = list(range(len(tree)))
    for start, stop in target_spans(tree):
        run = order[start:stop]
        for k in run:
            if tree.tokens[k].origin_index is None:
                raise ContractViolation(
                    f"sentence {tree.sent_id!r}: target token {k + 1} has no translation index"
                )
        order[start:stop] = sorted(run, key=lambda k: (tree.tokens[k].origin_index, k))
    if order == sorted(order):
        return tree
    new_id = {0: 0}
    for position, old in enumerate(order, start=1):
        new_id[old + 1] = position
    tokens = [tree.tokens[old] for old in order]
    return tree.with_tokens(renumber(tokens, [new_id[t.head] for t in tokens]))


# ---------------------------------------------------------------------------
# full pipeline


@dataclass(frozen=True)
class TreeStats:
    source_tokens: int
    substituted: int
    deleted: int
    output_tokens: int
    spans: int


def _translate(tree, matrix, pair, config: CodeMixConfig):
    check_pair(tree, pair, matrix)
    sub_plan = plan_substitution(tree, matrix, config.ratio)
    mixed = apply_substitution(tree, sub_plan, pair, config.root_group_deprel)
    deleted = 0
    if config.enable_deletion:
        del_plan = plan_deletion(tree, matrix, config.ratio, sub_plan)
        mixed = apply_deletion(mixed, del_plan)
        deleted = len(del_plan.doomed)
    if config.enable_reordering:
        mixed = reorder(mixed)
    check_tree(mixed)
    stats = TreeStats(
        source_tokens=len(tree),
        substituted=len(sub_plan.chosen),
        deleted=deleted,
        output_tokens=len(mixed),
        spans=len(target_spans(mixed)),
    )
    return mixed, stats


def translate_tree(
    tree: DependencyTree,
    matrix: AlignmentMatrix,
    pair: SentencePair,
    config: CodeMixConfig | None = None,
) -> DependencyTree:
    return _translate(tree, matrix, pair, config or CodeMixConfig())[0]


@dataclass
class TranslationStats:
    """Corpus-level counts.

    ``substituted_ratio`` is the share of output tokens in the target
    language; ``deleted_ratio`` the share of source tokens removed.
    """

    trees: int = 0
    translated: int = 0
    unmatched: int = 0
    source_tokens: int = 0
    output_tokens: int = 0
    substituted_tokens: int = 0
    deleted_tokens: int = 0
    spans: int = 0

    def add(self, tree_stats: TreeStats):
        self.translated += 1
        self.substituted_tokens += tree_stats.substituted
        self.deleted_tokens += tree_stats.deleted
        self.spans += tree_stats.spans

    @property
    def substituted_ratio(self) -> float:
        return self.substituted_tokens / self.output_tokens if self.output_tokens else 0.0

    @property
    def deleted_ratio(self) -> float:
        return self.deleted_tokens / self.source_tokens if self.source_tokens else 0.0

    def to_dict(self) -> dict:
        return {
            "trees": self.trees,
            "translated": self.translated,
            "unmatched": self.unmatched,
            "source_tokens": self.source_tokens,
            "output_tokens": self.output_tokens,
            "substituted_tokens": self.substituted_tokens,
            "deleted_tokens": self.deleted_tokens,
            "spans": self.spans,
            "substituted_ratio": round(self.substituted_ratio, 6),
            "deleted_ratio": round(self.deleted_ratio, 6),
        }


def _index_by_id(items, attr="pair_id") -> dict:
    if isinstance(items, Mapping):
        return dict(items)
    return {getattr(item, attr): item for item in items}


def translate_treebank(
    treebank: Treebank,
    matrices: Mapping[str, AlignmentMatrix] | Iterable[AlignmentMatrix],
    pairs: Mapping[str, SentencePair] | Iterable[SentencePair],
    config: CodeMixConfig | None = None,
) -> tuple[Treebank, TranslationStats]:
    """Translate every tree that has both a matrix and a pair with its ``sent_id``.

    Trees without alignment data are copied unchanged and counted in
    ``stats.unmatched``.
    """
    config = config or CodeMixConfig()
    by_matrix = _index_by_id(matrices)
    by_pair = _index_by_id(pairs)
    stats = TranslationStats()
    out = []
    for tree in treebank:
        stats.trees += 1
        stats.source_tokens += len(tree)
        matrix, pair = by_matrix.get(tree.sent_id), by_pair.get(tree.sent_id)
        if matrix is None or pair is None:
            stats.unmatched += 1
            out.append(tree)
            stats.output_tokens += len(tree)
            continue
        mixed, tree_stats = _translate(tree, matrix, pair, config)
        stats.add(tree_stats)
        stats.output_tokens += len(mixed)
        out.append(mixed)
    if stats.unmatched:
        logger.warning("%d of %d trees had no alignment data and were copied", stats.unmatched, stats.trees)
    return Treebank(tuple(out)), stats


def mix_corpora(a: Treebank, b: Treebank) -> Treebank:
    """Concatenate two treebanks (``a`` first) and union their vocabularies."""
    return Treebank(
        a.trees + b.trees,
        label_vocab=a.label_vocab | b.label_vocab,
        pos_vocab=a.pos_vocab | b.pos_vocab,
    )


# ---------------------------------------------------------------------------
# estimator front-end


@dataclass(frozen=True)
class AlignedCorpus:
    """A source treebank bundled with its translations and alignment matrices."""

    treebank: Treebank
    matrices: Mapping[str, AlignmentMatrix]
    pairs: Mapping[str, SentencePair]

    def __post_init__(self):
        object.__setattr__(self, "matrices", _index_by_id(self.matrices))
        object.__setattr__(self, "pairs", _index_by_id(self.pairs))

    def __len__(self):
        return len(self.treebank)


class CodeMixer(TransformerMixin, BaseEstimator):
    """Turn an :class:`AlignedCorpus` into a code-mixed :class:`Treebank`.

    Parameters
    ----------
    ratio : float, default=0.7
        Fraction of each candidate pool to translate (substitution) or drop
        (deletion).
    enable_deletion, enable_reordering : bool, default=True
        Switch the second and third steps off for ablations.
    seed : int, default=0
        Reserved; translation is deterministic.

    Attributes
    ----------
    stats_ : TranslationStats
        Counts from the most recent :meth:`transform` call.
    """

    def __init__(self, ratio=0.7, enable_deletion=True, enable_reordering=True, seed=0):
        self.ratio = ratio
        self.enable_deletion = enable_deletion
        self.enable_reordering = enable_reordering
        self.seed = seed

    def _config(self) -> CodeMixConfig:
        return CodeMixConfig(
            ratio=self.ratio,
            enable_deletion=self.enable_deletion,
            enable_reordering=self.enable_reordering,
            seed=self.seed,
        )

    def fit(self, X=None, y=None):
        self.config_ = self._config()
        return self

    def transform(self, X: AlignedCorpus) -> Treebank:
        if not isinstance(X, AlignedCorpus):
            raise TypeError("CodeMixer.transform expects an AlignedCorpus")
        config = getattr(self, "config_", None) or self._config()
        mixed, self.stats_ = translate_treebank(X.treebank, X.matrices, X.pairs, config)
        return mixed
