"""Dependency tree data model and a CoNLL-U reader/writer.

Only basic trees are represented: multiword-token ranges (``3-4``) and
empty nodes (``3.1``) are skipped on read.  Columns that the pipeline does
not use (lemma, xpos, feats, deps) are written back as ``_``.  The MISC
column carries the code-mixing annotations ``Lang=tgt|TgtIdx=j`` and, once
clusters are attached, ``Cluster=c``.
"""

from __future__ import annotations

import io
from dataclasses import dataclass, field, replace
from typing import Iterable, Iterator, Sequence, TextIO

from .exceptions import ConllParseError, TreeStructureError

SOURCE = "src"
TARGET = "tgt"


@dataclass(frozen=True)
class Token:
    id: int
    form: str
    upos: str
    head: int
    deprel: str
    cluster: int | None = None
    lang: str = SOURCE
    origin_index: int | None = None

    @property
    def is_target(self) -> bool:
        return self.lang == TARGET


@dataclass(frozen=True)
class Violation:
    kind: str
    token_id: int
    detail: str = ""

    def __str__(self):
        text = f"{self.kind} at {self.token_id}"
        return f"{text} ({self.detail})" if self.detail else text


@dataclass(frozen=True)
class DependencyTree:
    tokens: tuple[Token, ...]
    sent_id: str = ""

    def __post_init__(self):
        if not isinstance(self.tokens, tuple):
            object.__setattr__(self, "tokens", tuple(self.tokens))

    def __len__(self):
        return len(self.tokens)

    def __iter__(self) -> Iterator[Token]:
        return iter(self.tokens)

    def __getitem__(self, index):
        return self.tokens[index]

    @property
    def heads(self) -> list[int]:
        return [t.head for t in self.tokens]

    @property
    def deprels(self) -> list[str]:
        return [t.deprel for t in self.tokens]

    @property
    def forms(self) -> list[str]:
        return [t.form for t in self.tokens]

    @property
    def root(self) -> int:
        """1-based id of the first token attached to the virtual root."""
        for tok in self.tokens:
            if tok.head == 0:
                return tok.id
        raise TreeStructureError(self.sent_id, [Violation("no-root", 0)])

    def children(self, token_id: int) -> list[int]:
        return [t.id for t in self.tokens if t.head == token_id]

    def with_tokens(self, tokens: Iterable[Token]) -> "DependencyTree":
        return DependencyTree(tuple(tokens), self.sent_id)


@dataclass(frozen=True)
class Treebank:
    """Ordered collection of trees plus label and POS vocabularies.

    The vocabularies always cover every label/tag in ``trees``; extra
    entries may be supplied explicitly (e.g. when merging banks).
    """

    trees: tuple[DependencyTree, ...] = ()
    label_vocab: frozenset = field(default_factory=frozenset)
    pos_vocab: frozenset = field(default_factory=frozenset)

    def __post_init__(self):
        trees = tuple(self.trees)
        labels = set(self.label_vocab)
        tags = set(self.pos_vocab)
        for tree in trees:
            for tok in tree.tokens:
                labels.add(tok.deprel)
                tags.add(tok.upos)
        object.__setattr__(self, "trees", trees)
        object.__setattr__(self, "label_vocab", frozenset(labels))
        object.__setattr__(self, "pos_vocab", frozenset(tags))

    def __len__(self):
        return len(self.trees)

    def __iter__(self) -> Iterator[DependencyTree]:
        return iter(self.trees)

    def __getitem__(self, index):
        if isinstance(index, slice):
            return Treebank(self.trees[index])
        return self.trees[index]

    @property
    def n_tokens(self) -> int:
        return sum(len(t) for t in self.trees)


# ---------------------------------------------------------------------------
# validation


def validate_tree(tree: DependencyTree) -> list[Violation]:
    """Return every structural problem found in ``tree``.

    An empty list means the head array is a spanning arborescence rooted at
    the virtual node 0 with exactly one child of the root.
    """
    violations = []
    n = len(tree.tokens)
    for position, tok in enumerate(tree.tokens, start=1):
        if tok.id != position:
            violations.append(Violation("id-sequence", tok.id, f"expected {position}"))
        if tok.head == tok.id:
            violations.append(Violation("self-loop", tok.id))
        elif not 0 <= tok.head <= n:
            violations.append(Violation("head-range", tok.id, f"head {tok.head}"))
        if tok.lang == TARGET and tok.origin_index is None:
            violations.append(Violation("missing-origin", tok.id))
    if violations:
        return violations

    roots = [t.id for t in tree.tokens if t.head == 0]
    if n and not roots:
        violations.append(Violation("no-root", 0))
    for extra in roots[1:]:
        violations.append(Violation("multi-root", extra))

    heads = [0] + [t.head for t in tree.tokens]
    # 0 = unvisited, 1 = on current path, 2 = known to reach the root
    state = [2] + [0] * n
    reported = set()
    for start in range(1, n + 1):
        path = []
        node = start
        while state[node] == 0:
            state[node] = 1
            path.append(node)
            node = heads[node]
        if state[node] == 1:
            cycle = path[path.index(node):]
            key = min(cycle)
            if key not in reported:
                reported.add(key)
                members = ",".join(str(c) for c in sorted(cycle))
                violations.append(Violation("cycle", key, f"nodes {members}"))
        for visited in path:
            state[visited] = 2
    return violations


def check_tree(tree: DependencyTree) -> DependencyTree:
    """Raise :class:`TreeStructureError` unless ``tree`` is valid."""
    problems = validate_tree(tree)
    if problems:
        raise TreeStructureError(tree.sent_id, problems)
    return tree


# ---------------------------------------------------------------------------
# reading


def _open_text(source) -> tuple[TextIO, bool]:
    if isinstance(source, (bytes, bytearray)):
        return io.StringIO(bytes(source).decode("utf-8")), True
    if isinstance(source, io.TextIOBase):
        return source, False
    if hasattr(source, "read"):
        return io.StringIO(source.read().decode("utf-8"), newline=None), True
    return open(source, "r", encoding="utf-8", newline=""), True


def _parse_misc(misc: str, line_number: int):
    lang, origin, cluster = SOURCE, None, None
    if misc == "_":
        return lang, origin, cluster
    for item in misc.split("|"):
        key, _, value = item.partition("=")
        try:
            if key == "Lang":
                lang = TARGET if value == TARGET else SOURCE
            elif key == "TgtIdx":
                origin = int(value)
            elif key == "Cluster":
                cluster = int(value)
        except ValueError:
            raise ConllParseError(f"bad MISC value {item!r}", line_number) from None
    return lang, origin, cluster


def _parse_token(line: str, line_number: int) -> Token | None:
    cols = line.split("\t")
    if len(cols) != 10:
        raise ConllParseError(f"expected 10 columns, found {len(cols)}", line_number)
    raw_id = cols[0]
    if "-" in raw_id or "." in raw_id:
        return None
    try:
        token_id = int(raw_id)
    except ValueError:
        raise ConllParseError(f"non-integer id {raw_id!r}", line_number) from None
    try:
        head = int(cols[6])
    except ValueError:
        raise ConllParseError(f"non-integer head {cols[6]!r}", line_number) from None
    lang, origin, cluster = _parse_misc(cols[9], line_number)
    return Token(
        id=token_id,
        form=cols[1],
        upos=cols[3],
        head=head,
        deprel=cols[7],
        cluster=cluster,
        lang=lang,
        origin_index=origin,
    )


def iter_conllu(source, validate: bool = True) -> Iterator[DependencyTree]:
    """Yield trees one by one from a path, byte string or stream."""
    stream, owned = _open_text(source)
    try:
        tokens: list[Token] = []
        sent_id = None
        count = 0

        def finish():
            nonlocal tokens, sent_id, count
            count += 1
            tree = DependencyTree(tuple(tokens), sent_id if sent_id is not None else str(count))
            tokens, sent_id = [], None
            if validate:
                check_tree(tree)
            return tree

        for line_number, raw in enumerate(stream, start=1):
            line = raw.rstrip("\n").rstrip("\r")
            if not line.strip():
                if tokens:
                    yield finish()
                else:
                    sent_id = None
                continue
            if line.startswith("#"):
                key, sep, value = line[1:].partition("=")
                if sep and key.strip() == "sent_id":
                    sent_id = value.strip()
                continue
            tok = _parse_token(line, line_number)
            if tok is not None:
                tokens.append(tok)
        if tokens:
            yield finish()
    finally:
        if owned:
            stream.close()


def read_conllu(source, validate: bool = True) -> Treebank:
    """Read a whole CoNLL-U file into a :class:`Treebank`."""
    return Treebank(tuple(iter_conllu(source, validate=validate)))


# ---------------------------------------------------------------------------
# writing


def _format_misc(tok: Token) -> str:
    parts = []
    if tok.lang == TARGET:
        parts.append(f"Lang={TARGET}")
        if tok.origin_index is not None:
            parts.append(f"TgtIdx={tok.origin_index}")
    if tok.cluster is not None:
        parts.append(f"Cluster={tok.cluster}")
    return "|".join(parts) if parts else "_"


def format_tree(tree: DependencyTree, ordinal: int | None = None) -> str:
    """Render one tree; the ``sent_id`` comment is omitted when it equals ``ordinal``."""
    lines = []
    if tree.sent_id and tree.sent_id != (str(ordinal) if ordinal is not None else None):
        lines.append(f"# sent_id = {tree.sent_id}")
    for tok in tree.tokens:
        cols = [
            str(tok.id), tok.form, "_", tok.upos, "_", "_",
            str(tok.head), tok.deprel, "_", _format_misc(tok),
        ]
        lines.append("\t".join(cols))
    return "\n".join(lines) + "\n\n"


def dumps_conllu(treebank: Treebank | Sequence[DependencyTree]) -> bytes:
    trees = treebank.trees if isinstance(treebank, Treebank) else treebank
    text = "".join(format_tree(t, i) for i, t in enumerate(trees, start=1))
    return text.encode("utf-8")


def write_conllu(treebank: Treebank | Sequence[DependencyTree], target=None) -> bytes:
    """Serialize ``treebank``; also write it to ``target`` (path or stream) if given."""
    data = dumps_conllu(treebank)
    if target is None:
        return data
    if hasattr(target, "write"):
        if isinstance(target, io.TextIOBase):
            target.write(data.decode("utf-8"))
        else:
            target.write(data)
    else:
        with open(target, "wb") as fh:
            fh.write(data)
    return data


def renumber(tokens: Sequence[Token], head_of: Sequence[int]) -> tuple[Token, ...]:
    """Give ``tokens`` ids 1..n and the given (already renumbered) heads."""
    return tuple(
        replace(tok, id=i, head=h) for i, (tok, h) in enumerate(zip(tokens, head_of), start=1)
    )
