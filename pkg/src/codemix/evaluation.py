"""Attachment scores, per-POS and per-distance F-scores, and experiment harnesses."""

from __future__ import annotations

import csv
import io
import statistics
from dataclasses import dataclass, field, replace
from typing import Callable, Iterable, Mapping, Sequence

from .conllu import Treebank
from .exceptions import CodeMixError
from .translate import AlignedCorpus, CodeMixConfig, mix_corpora, translate_treebank

PUNCT_TAGS = frozenset({"PUNCT"})
ROOT_BUCKET = "root"
# (name, low, high) with inclusive bounds; high=None means unbounded
DEFAULT_BUCKETS = (("1", 1, 1), ("2", 2, 2), ("3-6", 3, 6), (">=7", 7, None))


class EvaluationError(CodeMixError, ValueError):
    """Gold and predicted treebanks do not line up."""


@dataclass
class MetricsReport:
    uas: float
    las: float
    total: int
    evaluated: int
    excluded: int
    per_pos_f: dict[str, float] = field(default_factory=dict)
    per_distance_f: dict[str, float] = field(default_factory=dict)

    def format(self) -> str:
        lines = [
            f"UAS  {self.uas:6.2f}",
            f"LAS  {self.las:6.2f}",
            f"tokens evaluated {self.evaluated}, punctuation excluded {self.excluded}",
        ]
        if self.per_pos_f:
            lines.append("")
            lines.append("POS       F")
            lines.extend(f"{tag:<8}{f:6.2f}" for tag, f in sorted(self.per_pos_f.items()))
        if self.per_distance_f:
            lines.append("")
            lines.append("distance  F")
            lines.extend(f"{bucket:<8}{f:6.2f}" for bucket, f in self.per_distance_f.items())
        return "\n".join(lines)


def _pairs(gold: Treebank, pred: Treebank):
    if len(gold) != len(pred):
        raise EvaluationError(f"gold has {len(gold)} sentences, prediction has {len(pred)}")
    for g, p in zip(gold, pred):
        if len(g) != len(p):
            raise EvaluationError(
                f"sentence {g.sent_id!r}: gold has {len(g)} tokens, prediction has {len(p)}"
            )
        yield g, p


def _percent(numerator: int, denominator: int) -> float:
    return 100.0 * numerator / denominator if denominator else 0.0


def attachment_scores(gold: Treebank, pred: Treebank, punct_tags=PUNCT_TAGS):
    """Return ``(uas, las, total, evaluated, excluded)``."""
    total = evaluated = heads_ok = both_ok = 0
    for g_tree, p_tree in _pairs(gold, pred):
        for g, p in zip(g_tree, p_tree):
            total += 1
            if g.upos in punct_tags:
                continue
            evaluated += 1
            if g.head == p.head:
                heads_ok += 1
                if g.deprel == p.deprel:
                    both_ok += 1
    return _percent(heads_ok, evaluated), _percent(both_ok, evaluated), total, evaluated, total - evaluated


def f_by_pos(gold: Treebank, pred: Treebank, punct_tags=PUNCT_TAGS) -> dict[str, float]:
    """Labeled F-score per gold POS tag.

    Tags are inputs rather than predictions, so each token is one item in
    both the gold and predicted sets and F equals labeled accuracy per tag.
    """
    seen: dict[str, int] = {}
    correct: dict[str, int] = {}
    for g_tree, p_tree in _pairs(gold, pred):
        for g, p in zip(g_tree, p_tree):
            if g.upos in punct_tags:
                continue
            seen[g.upos] = seen.get(g.upos, 0) + 1
            if g.head == p.head and g.deprel == p.deprel:
                correct[g.upos] = correct.get(g.upos, 0) + 1
    return {tag: _percent(correct.get(tag, 0), n) for tag, n in sorted(seen.items())}


def distance_bucket(dependent: int, head: int, buckets=DEFAULT_BUCKETS) -> str:
    if head == 0:
        return ROOT_BUCKET
    distance = abs(head - dependent)
    for name, low, high in buckets:
        if distance >= low and (high is None or distance <= high):
            return name
    raise ValueError(f"distance {distance} falls outside every bucket")


def f_by_distance(gold: Treebank, pred: Treebank, buckets=DEFAULT_BUCKETS, punct_tags=PUNCT_TAGS):
    """Labeled F-score per arc-length bucket, root arcs in their own bucket.

    Precision counts predicted arcs by their predicted length, recall counts
    gold arcs by their gold length.
    """
    names = [name for name, _, _ in buckets] + [ROOT_BUCKET]
    gold_n = dict.fromkeys(names, 0)
    pred_n = dict.fromkeys(names, 0)
    hit = dict.fromkeys(names, 0)
    for g_tree, p_tree in _pairs(gold, pred):
        for g, p in zip(g_tree, p_tree):
            if g.upos in punct_tags:
                continue
            g_bucket = distance_bucket(g.id, g.head, buckets)
            p_bucket = distance_bucket(p.id, p.head, buckets)
            gold_n[g_bucket] += 1
            pred_n[p_bucket] += 1
            if g.head == p.head and g.deprel == p.deprel:
                hit[g_bucket] += 1
    scores = {}
    for name in names:
        if not gold_n[name] and not pred_n[name]:
            continue
        precision = hit[name] / pred_n[name] if pred_n[name] else 0.0
        recall = hit[name] / gold_n[name] if gold_n[name] else 0.0
        scores[name] = 200.0 * precision * recall / (precision + recall) if precision + recall else 0.0
    return scores


def score(gold: Treebank, pred: Treebank, punct_tags=PUNCT_TAGS, buckets=DEFAULT_BUCKETS) -> MetricsReport:
    uas, las, total, evaluated, excluded = attachment_scores(gold, pred, punct_tags)
    return MetricsReport(
        uas=uas,
        las=las,
        total=total,
        evaluated=evaluated,
        excluded=excluded,
        per_pos_f=f_by_pos(gold, pred, punct_tags),
        per_distance_f=f_by_distance(gold, pred, buckets, punct_tags),
    )


def right_branching(treebank: Treebank) -> Treebank:
    """Baseline attaching every token to its right neighbour, the last token to the root."""
    out = []
    for tree in treebank:
        n = len(tree)
        out.append(tree.with_tokens(
            replace(tok, head=tok.id + 1 if tok.id < n else 0) for tok in tree
        ))
    return Treebank(tuple(out))


# ---------------------------------------------------------------------------
# experiment harnesses


@dataclass(frozen=True)
class TrialResult:
    name: str
    ratio: float
    trial: int
    seed: int
    uas: float
    las: float


@dataclass
class ExperimentTable:
    rows: list[TrialResult] = field(default_factory=list)

    def groups(self) -> dict[str, list[TrialResult]]:
        grouped: dict[str, list[TrialResult]] = {}
        for row in self.rows:
            grouped.setdefault(row.name, []).append(row)
        return grouped

    def summary(self) -> list[dict]:
        out = []
        for name, rows in self.groups().items():
            uas = [r.uas for r in rows]
            las = [r.las for r in rows]
            out.append({
                "name": name,
                "ratio": rows[0].ratio,
                "trials": len(rows),
                "uas_mean": statistics.fmean(uas),
                "uas_std": statistics.pstdev(uas),
                "las_mean": statistics.fmean(las),
                "las_std": statistics.pstdev(las),
            })
        return out

    def mean_las(self, name: str) -> float:
        return statistics.fmean(r.las for r in self.groups()[name])

    def mean_uas(self, name: str) -> float:
        return statistics.fmean(r.uas for r in self.groups()[name])

    def format(self) -> str:
        summary = self.summary()
        width = max([len("Model")] + [len(s["name"]) for s in summary])
        lines = [f"{'Model':<{width}}  {'UAS':>14}  {'LAS':>14}"]
        for s in summary:
            lines.append(
                f"{s['name']:<{width}}  {s['uas_mean']:6.2f} ± {s['uas_std']:5.2f}"
                f"  {s['las_mean']:6.2f} ± {s['las_std']:5.2f}"
            )
        return "\n".join(lines)

    def to_csv(self) -> str:
        buffer = io.StringIO()
        writer = csv.writer(buffer, lineterminator="\n")
        writer.writerow(["lambda", "trial", "uas", "las"])
        for r in self.rows:
            writer.writerow([f"{r.ratio:g}", r.trial, f"{r.uas:.4f}", f"{r.las:.4f}"])
        return buffer.getvalue()


ParserFactory = Callable[[int], object]


def _default_factory(parser_params: Mapping | None) -> ParserFactory:
    from .parser import BiaffineParser

    params = dict(parser_params or {})

    def factory(seed):
        return BiaffineParser(**{**params, "seed": seed})

    return factory


def train_and_score(train: Treebank, test: Treebank, factory: ParserFactory, seed: int) -> MetricsReport:
    parser = factory(seed).fit(train)
    return score(test, parser.predict(test))


def _run(jobs, factory, test, n_jobs):
    """``jobs`` are ``(name, ratio, trial, seed, train_bank)``; results keep input order."""
    def one(job):
        name, ratio, trial, seed, train = job
        report = train_and_score(train, test, factory, seed)
        return TrialResult(name, ratio, trial, seed, report.uas, report.las)

    if n_jobs == 1:
        return [one(job) for job in jobs]
    from joblib import Parallel, delayed

    return Parallel(n_jobs=n_jobs)(delayed(one)(job) for job in jobs)


def code_mix(corpus: AlignedCorpus, ratio: float, enable_deletion=True, enable_reordering=True) -> Treebank:
    config = CodeMixConfig(ratio=ratio, enable_deletion=enable_deletion, enable_reordering=enable_reordering)
    return translate_treebank(corpus.treebank, corpus.matrices, corpus.pairs, config)[0]


def sweep_lambda(
    corpus: AlignedCorpus,
    test: Treebank,
    grid: Sequence[float] = tuple(round(0.1 * k, 1) for k in range(11)),
    trials: int = 1,
    parser_params: Mapping | None = None,
    seed: int = 0,
    include_source: bool = False,
    factory: ParserFactory | None = None,
    n_jobs: int = 1,
) -> ExperimentTable:
    """Translate at each ratio, train ``trials`` parsers (seeds ``seed + trial``), score on ``test``."""
    factory = factory or _default_factory(parser_params)
    jobs = []
    for ratio in grid:
        train = code_mix(corpus, ratio)
        if include_source:
            train = mix_corpora(corpus.treebank, train)
        for trial in range(trials):
            jobs.append((f"lambda={ratio:g}", float(ratio), trial, seed + trial, train))
    return ExperimentTable(_run(jobs, factory, test, n_jobs))


ABLATIONS = (
    ("Mix", True, True),
    ("-Sentence Reordering", True, False),
    ("-Word Deletion", False, True),
    ("-Both", False, False),
)


def ablation(
    corpus: AlignedCorpus,
    test: Treebank,
    ratio: float = 0.7,
    trials: int = 1,
    parser_params: Mapping | None = None,
    seed: int = 0,
    factory: ParserFactory | None = None,
    n_jobs: int = 1,
) -> ExperimentTable:
    """Run the code-mixed pipeline with deletion and reordering switched on/off."""
    factory = factory or _default_factory(parser_params)
    jobs = []
    for name, deletion, reordering in ABLATIONS:
        train = code_mix(corpus, ratio, deletion, reordering)
        for trial in range(trials):
            jobs.append((name, float(ratio), trial, seed + trial, train))
    return ExperimentTable(_run(jobs, factory, test, n_jobs))


def compare_models(
    corpus: AlignedCorpus,
    test: Treebank,
    ratio: float = 0.7,
    trials: int = 1,
    parser_params: Mapping | None = None,
    seed: int = 0,
    models: Iterable[str] = ("Src", "Tgt", "Mix", "Src+Tgt", "Src+Mix"),
    factory: ParserFactory | None = None,
    n_jobs: int = 1,
) -> ExperimentTable:
    """Source-only, fully translated and code-mixed training sets, alone or merged with the source."""
    factory = factory or _default_factory(parser_params)
    source = corpus.treebank
    cache: dict[float, Treebank] = {}

    def translated(r):
        if r not in cache:
            cache[r] = code_mix(corpus, r)
        return cache[r]

    builders = {
        "Src": (0.0, lambda: source),
        "Tgt": (1.0, lambda: translated(1.0)),
        "Mix": (ratio, lambda: translated(ratio)),
        "Src+Tgt": (1.0, lambda: mix_corpora(source, translated(1.0))),
        "Src+Mix": (ratio, lambda: mix_corpora(source, translated(ratio))),
    }
    jobs = []
    for name in models:
        r, build = builders[name]
        train = build()
        for trial in range(trials):
            jobs.append((name, r, trial, seed + trial, train))
    return ExperimentTable(_run(jobs, factory, test, n_jobs))

