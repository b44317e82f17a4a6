"""Network pieces of the biaffine parser and the vocabulary that feeds it."""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field

import numpy as np
import torch
from torch import nn
from torch.nn.utils.rnn import pack_padded_sequence, pad_packed_sequence

PAD, UNK = 0, 1
SPECIALS = ("<pad>", "<unk>")


def _index(items) -> dict[str, int]:
    return {item: i for i, item in enumerate(items)}


@dataclass
class ParserVocab:
    """String-to-id maps; ids 0 and 1 are padding and unknown everywhere."""

    words: list[str] = field(default_factory=lambda: list(SPECIALS))
    tags: list[str] = field(default_factory=lambda: list(SPECIALS))
    labels: list[str] = field(default_factory=list)
    pretrained_words: list[str] = field(default_factory=list)
    cluster_ids: dict[str, int] = field(default_factory=dict)
    n_clusters: int = 0

    def __post_init__(self):
        self._word = _index(self.words)
        self._tag = _index(self.tags)
        self._label = _index(self.labels)
        self._pretrained = _index(self.pretrained_words)

    @classmethod
    def build(cls, treebank, min_word_count=2, embeddings=None, clusters=None):
        counts = Counter(tok.form for tree in treebank for tok in tree)
        words = list(SPECIALS) + sorted(w for w, c in counts.items() if c >= min_word_count)
        tags = list(SPECIALS) + sorted(treebank.pos_vocab)
        labels = sorted(treebank.label_vocab)
        pretrained = embeddings.words() if embeddings is not None else []
        if clusters is not None:
            cluster_ids, n_clusters = dict(clusters.ids), clusters.n_clusters
        else:
            seen = [tok.cluster for tree in treebank for tok in tree if tok.cluster is not None]
            cluster_ids, n_clusters = {}, max(seen, default=-1) + 1
        return cls(words, tags, labels, pretrained, cluster_ids, n_clusters)

    @property
    def n_labels(self) -> int:
        return len(self.labels)

    def word_id(self, form: str) -> int:
        return self._word.get(form, UNK)

    def tag_id(self, tag: str) -> int:
        return self._tag.get(tag, UNK)

    def label_id(self, label: str) -> int:
        # unseen gold labels only occur at evaluation time and never in the loss
        return self._label.get(label, 0)

    def pretrained_id(self, form: str) -> int:
        # rows: 0 padding, 1 unknown (mean vector), 2.. table entries
        idx = self._pretrained.get(form)
        if idx is None:
            idx = self._pretrained.get(form.lower())
        return UNK if idx is None else idx + 2

    def cluster_id(self, token) -> int:
        if self.cluster_ids:
            cluster = self.cluster_ids.get(token.form)
            if cluster is None:
                cluster = self.cluster_ids.get(token.form.lower())
        else:
            cluster = token.cluster
        if cluster is None or not 0 <= cluster < self.n_clusters:
            return UNK
        return cluster + 2

    def to_dict(self) -> dict:
        return {
            "words": self.words,
            "tags": self.tags,
            "labels": self.labels,
            "pretrained_words": self.pretrained_words,
            "cluster_ids": self.cluster_ids,
            "n_clusters": self.n_clusters,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "ParserVocab":
        return cls(**data)


@dataclass
class Batch:
    words: torch.Tensor
    pretrained: torch.Tensor
    clusters: torch.Tensor
    tags: torch.Tensor
    lengths: torch.Tensor  # sentence length + 1 for the root
    heads: torch.Tensor | None = None
    labels: torch.Tensor | None = None

    @property
    def token_mask(self) -> torch.Tensor:
        """True at real dependents (positions 1..n), False at the root and padding."""
        positions = torch.arange(self.words.shape[1])
        mask = positions[None, :] < self.lengths[:, None]
        mask[:, 0] = False
        return mask


def make_batch(trees, vocab: ParserVocab, with_gold: bool = True) -> Batch:
    width = max(len(t) for t in trees) + 1
    shape = (len(trees), width)
    words = torch.zeros(shape, dtype=torch.long)
    pretrained = torch.zeros(shape, dtype=torch.long)
    clusters = torch.zeros(shape, dtype=torch.long)
    tags = torch.zeros(shape, dtype=torch.long)
    heads = torch.zeros(shape, dtype=torch.long)
    labels = torch.zeros(shape, dtype=torch.long)
    for b, tree in enumerate(trees):
        for k, tok in enumerate(tree.tokens, start=1):
            words[b, k] = vocab.word_id(tok.form)
            pretrained[b, k] = vocab.pretrained_id(tok.form)
            clusters[b, k] = vocab.cluster_id(tok)
            tags[b, k] = vocab.tag_id(tok.upos)
            if with_gold:
                heads[b, k] = tok.head
                labels[b, k] = vocab.label_id(tok.deprel)
    lengths = torch.tensor([len(t) + 1 for t in trees], dtype=torch.long)
    if not with_gold:
        return Batch(words, pretrained, clusters, tags, lengths)
    return Batch(words, pretrained, clusters, tags, lengths, heads, labels)


_ACTIVATIONS = {
    "leaky_relu": lambda: nn.LeakyReLU(0.1),
    "relu": nn.ReLU,
    "tanh": nn.Tanh,
}


class MLP(nn.Module):
    def __init__(self, n_in, n_out, activation="leaky_relu", dropout=0.0):
        super().__init__()
        self.linear = nn.Linear(n_in, n_out)
        self.activation = _ACTIVATIONS[activation]()
        self.dropout = nn.Dropout(dropout)

    def forward(self, x):
        return self.dropout(self.activation(self.linear(x)))


class BiaffineNetwork(nn.Module):
    """Embeddings -> BiLSTM -> dep/head projections -> biaffine arc and label scores.

    Arc scores are ``s[b, j, i] = dep_i^T U head_j + w^T head_j + b`` for
    head ``j`` and dependent ``i``; label scores add an L-way bilinear form
    plus linear terms on both sides.
    """

    def __init__(self, vocab: ParserVocab, config: dict, pretrained: np.ndarray | None = None):
        super().__init__()
        self.delexicalized = config["delexicalized"]
        input_dim = config["cluster_embed_dim"] + config["pos_embed_dim"]
        if not self.delexicalized:
            input_dim += config["embed_dim"]
            self.word_embed = nn.Embedding(len(vocab.words), config["embed_dim"], padding_idx=PAD)
            if pretrained is not None:
                nn.init.zeros_(self.word_embed.weight)
                self.register_buffer("pretrained", torch.as_tensor(pretrained, dtype=torch.float64))
            else:
                nn.init.normal_(self.word_embed.weight, std=1.0 / np.sqrt(config["embed_dim"]))
                self.register_buffer("pretrained", None)
            with torch.no_grad():
                self.word_embed.weight[PAD].zero_()
        self.cluster_embed = nn.Embedding(vocab.n_clusters + 2, config["cluster_embed_dim"], padding_idx=PAD)
        self.tag_embed = nn.Embedding(len(vocab.tags), config["pos_embed_dim"], padding_idx=PAD)
        self.root = nn.Parameter(torch.randn(input_dim) / np.sqrt(input_dim))
        self.input_dropout = nn.Dropout(config["dropout"])

        hidden = config["encoder_hidden"]
        self.encoder = nn.LSTM(
            input_dim,
            hidden,
            num_layers=config["encoder_layers"],
            bidirectional=True,
            batch_first=True,
            dropout=config["dropout"] if config["encoder_layers"] > 1 else 0.0,
        )
        self.encoder_dropout = nn.Dropout(config["dropout"])

        act, drop = config["activation"], config["dropout"]
        arc_dim, label_dim = config["arc_mlp_dim"], config["label_mlp_dim"]
        self.arc_dep = MLP(2 * hidden, arc_dim, act, drop)
        self.arc_head = MLP(2 * hidden, arc_dim, act, drop)
        self.label_dep = MLP(2 * hidden, label_dim, act, drop)
        self.label_head = MLP(2 * hidden, label_dim, act, drop)

        n_labels = max(vocab.n_labels, 1)
        self.arc_U = nn.Parameter(torch.zeros(arc_dim, arc_dim))
        self.arc_w = nn.Parameter(torch.zeros(arc_dim))
        self.arc_b = nn.Parameter(torch.zeros(()))
        self.label_U = nn.Parameter(torch.zeros(n_labels, label_dim, label_dim))
        self.label_w_dep = nn.Parameter(torch.zeros(n_labels, label_dim))
        self.label_w_head = nn.Parameter(torch.zeros(n_labels, label_dim))
        self.label_b = nn.Parameter(torch.zeros(n_labels))
        # zero bilinear weights would leave the projections without gradient at the start
        nn.init.orthogonal_(self.arc_U)
        for l in range(n_labels):
            nn.init.orthogonal_(self.label_U.data[l])

    def embed(self, batch: Batch) -> torch.Tensor:
        parts = []
        if not self.delexicalized:
            word = self.word_embed(batch.words)
            if self.pretrained is not None:
                word = word + self.pretrained[batch.pretrained].to(word.dtype)
            parts.append(word)
        parts.append(self.cluster_embed(batch.clusters))
        parts.append(self.tag_embed(batch.tags))
        x = torch.cat(parts, dim=-1)
        root = self.root.expand(x.shape[0], 1, -1)
        return torch.cat([root, x[:, 1:]], dim=1)

    def encode(self, batch: Batch):
        """Return ``(lstm_states, arc_dep, arc_head, label_dep, label_head)`` incl. the root at position 0."""
        x = self.input_dropout(self.embed(batch))
        packed = pack_padded_sequence(x, batch.lengths, batch_first=True, enforce_sorted=False)
        out, _ = self.encoder(packed)
        h, _ = pad_packed_sequence(out, batch_first=True, total_length=x.shape[1])
        h = self.encoder_dropout(h)
        return h, self.arc_dep(h), self.arc_head(h), self.label_dep(h), self.label_head(h)

    def biaffine(self, arc_dep, arc_head, label_dep, label_head):
        # arc[b, j, i]: head j, dependent i
        arc = torch.einsum("bid,de,bje->bji", arc_dep, self.arc_U, arc_head)
        arc = arc + torch.einsum("bje,e->bj", arc_head, self.arc_w)[:, :, None] + self.arc_b
        # label[b, j, i, l]
        label = torch.einsum("bid,lde,bje->bjil", label_dep, self.label_U, label_head)
        label = label + torch.einsum("bid,ld->bil", label_dep, self.label_w_dep)[:, None, :, :]
        label = label + torch.einsum("bje,le->bjl", label_head, self.label_w_head)[:, :, None, :]
        return arc, label + self.label_b

    def forward(self, batch: Batch):
        _, arc_dep, arc_head, label_dep, label_head = self.encode(batch)
        arc, label = self.biaffine(arc_dep, arc_head, label_dep, label_head)
        return mask_arc_scores(arc, batch.lengths), label


def mask_arc_scores(arc: torch.Tensor, lengths: torch.Tensor) -> torch.Tensor:
    """Forbid self-attachment and heads in the padding."""
    width = arc.shape[1]
    positions = torch.arange(width)
    invalid_head = positions[None, :] >= lengths[:, None]
    eye = torch.eye(width, dtype=torch.bool)
    mask = invalid_head[:, :, None] | eye[None, :, :]
    return arc.masked_fill(mask, float("-inf"))


def cross_entropy_loss(arc, label, batch: Batch) -> torch.Tensor:
    """Summed word-level cross-entropy of gold heads and of gold labels at the gold head."""
    mask = batch.token_mask
    arc_logp = torch.log_softmax(arc, dim=1)  # normalize over candidate heads
    gold_head_logp = arc_logp.gather(1, batch.heads[:, None, :]).squeeze(1)
    arc_loss = -gold_head_logp[mask].sum()

    index = batch.heads[:, None, :, None].expand(-1, 1, -1, label.shape[-1])
    at_gold_head = label.gather(1, index).squeeze(1)  # [b, i, l]
    label_logp = torch.log_softmax(at_gold_head, dim=-1)
    gold_label_logp = label_logp.gather(2, batch.labels[:, :, None]).squeeze(2)
    label_loss = -gold_label_logp[mask].sum()
    return arc_loss + label_loss
