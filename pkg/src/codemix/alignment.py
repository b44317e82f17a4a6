"""Word-alignment inputs: per-sentence probability matrices p(e_i | f_j).

Row 0 of every matrix is the null source word, rows 1..n are the source
tokens and columns 1..m (stored 0-based) the target tokens.  Matrices can be
loaded precomputed from a JSON-lines file or derived from a lexical
translation table such as the one fast_align writes.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Iterable

import numpy as np

from ._io import iter_lines
from .exceptions import AlignmentDataError

NULL_WORD = "<eps>"
SUM_TOLERANCE = 1e-3


@dataclass(frozen=True)
class SentencePair:
    pair_id: str
    source_tokens: tuple[str, ...]
    target_tokens: tuple[str, ...]

    def __post_init__(self):
        object.__setattr__(self, "source_tokens", tuple(self.source_tokens))
        object.__setattr__(self, "target_tokens", tuple(self.target_tokens))
        if not self.source_tokens or not self.target_tokens:
            raise AlignmentDataError(f"pair {self.pair_id!r}: both sides need at least one token")

    @property
    def n(self) -> int:
        return len(self.source_tokens)

    @property
    def m(self) -> int:
        return len(self.target_tokens)


@dataclass(frozen=True, eq=False)
class AlignmentMatrix:
    """(n+1) x m column-stochastic matrix; ``probs[i, j-1] = p(e_i | f_j)``."""

    probs: np.ndarray
    pair_id: str = ""

    def __post_init__(self):
        probs = np.array(self.probs, dtype=np.float64)
        if probs.ndim != 2 or probs.shape[0] < 2 or probs.shape[1] < 1:
            raise AlignmentDataError(
                f"pair {self.pair_id!r}: matrix must be (n+1) x m with n, m >= 1, got {probs.shape}"
            )
        probs.setflags(write=False)
        object.__setattr__(self, "probs", probs)

    @property
    def n(self) -> int:
        return self.probs.shape[0] - 1

    @property
    def m(self) -> int:
        return self.probs.shape[1]

    def __eq__(self, other):
        if not isinstance(other, AlignmentMatrix):
            return NotImplemented
        return self.pair_id == other.pair_id and np.array_equal(self.probs, other.probs)

    __hash__ = None


def normalize_columns(probs, pair_id="", tolerance=SUM_TOLERANCE) -> np.ndarray:
    """Check that each column is a distribution (within ``tolerance``) and rescale it to sum to 1."""
    probs = np.asarray(probs, dtype=np.float64)
    if not np.all(np.isfinite(probs)) or np.any(probs < 0) or np.any(probs > 1 + tolerance):
        raise AlignmentDataError(f"pair {pair_id!r}: probabilities must lie in [0, 1]")
    sums = probs.sum(axis=0)
    bad = np.flatnonzero(np.abs(sums - 1.0) > tolerance)
    if bad.size:
        j = int(bad[0])
        raise AlignmentDataError(
            f"pair {pair_id!r}: column {j + 1} sums to {sums[j]:.6g}, expected 1"
        )
    return probs / sums


def best_alignments(matrix: AlignmentMatrix) -> list[tuple[int, float]]:
    """Most probable source row ``a_j`` and its probability ``p_j`` for every target j.

    ``np.argmax`` returns the first maximum, so ties go to the smaller row
    and, in particular, to the null word.
    """
    rows = np.argmax(matrix.probs, axis=0)
    return [(int(a), float(matrix.probs[a, j])) for j, a in enumerate(rows)]


# ---------------------------------------------------------------------------
# lexical translation tables


@dataclass
class LexicalTable:
    scores: dict[tuple[str, str], float] = field(default_factory=dict)
    null_scores: dict[str, float] = field(default_factory=dict)
    default_null: float = 0.0

    def score(self, source_form: str, target_form: str) -> float:
        return self.scores.get((source_form, target_form), 0.0)

    def null_score(self, target_form: str) -> float:
        return self.null_scores.get(target_form, self.default_null)

    def __len__(self):
        return len(self.scores) + len(self.null_scores)


def load_lexical_table(source, default_null: float = 0.0) -> LexicalTable:
    """Parse ``source_form<TAB>target_form<TAB>score`` lines.

    A first line reading ``log:`` marks the scores as natural-log values.
    The reserved source form ``<eps>`` gives the null-alignment score of a
    target form.  Later duplicates overwrite earlier ones.
    """
    table = LexicalTable(default_null=default_null)
    log_scores = False
    for line_number, raw in enumerate(iter_lines(source), start=1):
        line = raw.rstrip("\r\n")
        if not line.strip():
            continue
        if line_number == 1 and line.strip() == "log:":
            log_scores = True
            continue
        cols = line.split("\t")
        if len(cols) != 3:
            cols = line.split()
        if len(cols) != 3:
            raise AlignmentDataError(f"line {line_number}: expected 3 fields, found {len(cols)}")
        src, tgt, raw_score = cols
        try:
            value = float(raw_score)
        except ValueError:
            raise AlignmentDataError(f"line {line_number}: bad score {raw_score!r}") from None
        if log_scores:
            value = math.exp(value)
        if not math.isfinite(value) or value < 0:
            raise AlignmentDataError(f"line {line_number}: score must be a non-negative number")
        if src == NULL_WORD:
            table.null_scores[tgt] = value
        else:
            table.scores[(src, tgt)] = value
    return table


def derive_matrix(pair: SentencePair, table: LexicalTable, smoothing: float = 1e-9) -> AlignmentMatrix:
    """Normalize raw table scores (plus ``smoothing``) over the null word and every source token."""
    if smoothing < 0:
        raise AlignmentDataError("smoothing must be non-negative")
    raw = np.empty((pair.n + 1, pair.m), dtype=np.float64)
    for j, f in enumerate(pair.target_tokens):
        raw[0, j] = table.null_score(f)
        for i, e in enumerate(pair.source_tokens, start=1):
            raw[i, j] = table.score(e, f)
    raw += smoothing
    sums = raw.sum(axis=0)
    if np.any(sums <= 0):
        # only reachable with smoothing == 0 and no table entries
        raw[:, sums <= 0] = 1.0
        sums = raw.sum(axis=0)
    return AlignmentMatrix(raw / sums, pair.pair_id)


# ---------------------------------------------------------------------------
# matrix files and parallel sentence files


def load_matrix_file(source) -> list[AlignmentMatrix]:
    """Read JSON-lines records ``{"pair_id", "n", "m", "probs"}`` (probs row-major, (n+1)*m)."""
    matrices = []
    for line_number, raw in enumerate(iter_lines(source), start=1):
        if not raw.strip():
            continue
        try:
            record = json.loads(raw)
            pair_id = str(record["pair_id"])
            n, m = int(record["n"]), int(record["m"])
            flat = [float(x) for x in record["probs"]]
        except (ValueError, KeyError, TypeError) as exc:
            raise AlignmentDataError(f"line {line_number}: malformed record ({exc})") from None
        if n < 1 or m < 1 or len(flat) != (n + 1) * m:
            raise AlignmentDataError(
                f"pair {pair_id!r}: {len(flat)} probabilities do not fit n={n}, m={m}"
            )
        probs = np.asarray(flat, dtype=np.float64).reshape(n + 1, m)
        matrices.append(AlignmentMatrix(normalize_columns(probs, pair_id), pair_id))
    return matrices


def dump_matrix_file(matrices: Iterable[AlignmentMatrix]) -> bytes:
    lines = []
    for mat in matrices:
        record = {
            "pair_id": mat.pair_id,
            "n": mat.n,
            "m": mat.m,
            "probs": [float(x) for x in mat.probs.ravel()],
        }
        lines.append(json.dumps(record))
    return ("\n".join(lines) + "\n").encode("utf-8") if lines else b""


def load_pairs(source) -> list[SentencePair]:
    """Read ``pair_id<TAB>source sentence<TAB>target sentence`` lines (whitespace-tokenized)."""
    pairs = []
    for line_number, raw in enumerate(iter_lines(source), start=1):
        line = raw.rstrip("\r\n")
        if not line.strip():
            continue
        cols = line.split("\t")
        if len(cols) != 3:
            raise AlignmentDataError(f"line {line_number}: expected 3 tab-separated fields")
        try:
            pairs.append(SentencePair(cols[0], cols[1].split(), cols[2].split()))
        except AlignmentDataError as exc:
            raise AlignmentDataError(f"line {line_number}: {exc}") from None
    return pairs


def dump_pairs(pairs: Iterable[SentencePair]) -> bytes:
    text = "".join(
        f"{p.pair_id}\t{' '.join(p.source_tokens)}\t{' '.join(p.target_tokens)}\n" for p in pairs
    )
    return text.encode("utf-8")


def check_pair(tree, pair: SentencePair, matrix: AlignmentMatrix | None = None) -> None:
    """Hard consistency check between a source tree, its sentence pair and matrix."""
    if pair.n != len(tree):
        raise AlignmentDataError(
            f"pair {pair.pair_id!r}: {pair.n} source tokens but the tree has {len(tree)}"
        )
    if matrix is not None and (matrix.n != pair.n or matrix.m != pair.m):
        raise AlignmentDataError(
            f"pair {pair.pair_id!r}: matrix is {matrix.n + 1}x{matrix.m}, "
            f"expected {pair.n + 1}x{pair.m}"
        )
