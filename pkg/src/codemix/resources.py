"""Cross-lingual word embeddings and word clusters."""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from ._io import iter_lines
from .conllu import Treebank
from .exceptions import ResourceFormatError


def _lookup_key(mapping, form: str):
    if form in mapping:
        return form
    lowered = form.lower()
    if lowered in mapping:
        return lowered
    return None


@dataclass(eq=False)
class EmbeddingTable:
    dim: int
    vectors: dict[str, np.ndarray] = field(default_factory=dict)
    unk_vector: np.ndarray | None = None

    def __post_init__(self):
        if self.unk_vector is None:
            if self.vectors:
                self.unk_vector = np.mean(np.stack(list(self.vectors.values())), axis=0)
            else:
                self.unk_vector = np.zeros(self.dim)

    def __len__(self):
        return len(self.vectors)

    def __contains__(self, form):
        return _lookup_key(self.vectors, form) is not None

    def key(self, form: str) -> str | None:
        """Entry used for ``form``: exact match, else lowercase, else ``None``."""
        return _lookup_key(self.vectors, form)

    def lookup(self, form: str) -> np.ndarray:
        key = self.key(form)
        return self.unk_vector if key is None else self.vectors[key]

    def words(self) -> list[str]:
        return list(self.vectors)

    def matrix(self) -> np.ndarray:
        """Vectors in :meth:`words` order followed by the unknown vector as the last row."""
        rows = [self.vectors[w] for w in self.vectors] + [self.unk_vector]
        return np.stack(rows).astype(np.float64)


def load_embeddings(source) -> EmbeddingTable:
    """Read word2vec-style text vectors, with or without a ``count dim`` header line."""
    vectors: dict[str, np.ndarray] = {}
    dim = None
    for line_number, raw in enumerate(iter_lines(source), start=1):
        parts = raw.split()
        if not parts:
            continue
        if line_number == 1 and len(parts) == 2 and all(p.isdigit() for p in parts):
            dim = int(parts[1])
            continue
        word, values = parts[0], parts[1:]
        if dim is None:
            dim = len(values)
        if len(values) != dim or dim == 0:
            raise ResourceFormatError(
                f"line {line_number}: expected {dim} values for {word!r}, found {len(values)}"
            )
        try:
            vectors[word] = np.array([float(v) for v in values], dtype=np.float64)
        except ValueError:
            raise ResourceFormatError(f"line {line_number}: non-numeric vector value") from None
    if dim is None:
        raise ResourceFormatError("embedding file is empty")
    return EmbeddingTable(dim, vectors)


def dump_embeddings(table: EmbeddingTable) -> bytes:
    lines = [f"{len(table)} {table.dim}"]
    for word, vec in table.vectors.items():
        lines.append(word + " " + " ".join(repr(float(v)) for v in vec))
    return ("\n".join(lines) + "\n").encode("utf-8")


@dataclass
class ClusterMap:
    ids: dict[str, int] = field(default_factory=dict)
    n_clusters: int | None = None

    def __post_init__(self):
        if self.n_clusters is None:
            self.n_clusters = max(self.ids.values(), default=-1) + 1
        if any(c >= self.n_clusters for c in self.ids.values()):
            raise ResourceFormatError("cluster id exceeds the declared cluster count")

    @property
    def unk_cluster(self) -> int:
        return self.n_clusters

    def lookup(self, form: str) -> int:
        key = _lookup_key(self.ids, form)
        return self.unk_cluster if key is None else self.ids[key]

    def __len__(self):
        return len(self.ids)


def load_clusters(source, n_clusters: int | None = None) -> ClusterMap:
    """Read ``word<TAB>cluster_id`` lines."""
    ids = {}
    for line_number, raw in enumerate(iter_lines(source), start=1):
        line = raw.rstrip("\r\n")
        if not line.strip():
            continue
        cols = line.split("\t")
        if len(cols) != 2:
            cols = line.split()
        if len(cols) != 2:
            raise ResourceFormatError(f"line {line_number}: expected word<TAB>cluster_id")
        word, raw_id = cols
        try:
            cluster = int(raw_id)
        except ValueError:
            raise ResourceFormatError(f"line {line_number}: non-integer cluster id {raw_id!r}") from None
        if cluster < 0:
            raise ResourceFormatError(f"line {line_number}: negative cluster id {cluster}")
        ids[word] = cluster
    return ClusterMap(ids, n_clusters)


def dump_clusters(clusters: ClusterMap) -> bytes:
    return "".join(f"{w}\t{c}\n" for w, c in clusters.ids.items()).encode("utf-8")


def featurize(treebank: Treebank, clusters: ClusterMap) -> Treebank:
    """Attach a cluster id to every token (unknown forms get ``clusters.unk_cluster``).

    Word vectors are not attached; the parser resolves forms itself.
    """
    trees = tuple(
        tree.with_tokens(replace(tok, cluster=clusters.lookup(tok.form)) for tok in tree)
        for tree in treebank
    )
    return Treebank(trees, treebank.label_vocab, treebank.pos_vocab)
