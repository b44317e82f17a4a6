"""scikit-learn style front-end for the biaffine dependency parser."""

from __future__ import annotations

import logging
from dataclasses import dataclass, replace

import numpy as np
import torch
from sklearn.base import BaseEstimator
from sklearn.exceptions import NotFittedError

from ..conllu import DependencyTree, Treebank, check_tree, renumber
from ..exceptions import ConfigError, ContractViolation
from .model import BiaffineNetwork, ParserVocab, cross_entropy_loss, make_batch
from .mst import decode_mst

logger = logging.getLogger(__name__)

_DTYPES = {"float32": torch.float32, "float64": torch.float64}


@dataclass
class EncoderState:
    """Per-position vectors for one sentence; row 0 is the root."""

    lstm: np.ndarray
    arc_dep: np.ndarray
    arc_head: np.ndarray
    label_dep: np.ndarray
    label_head: np.ndarray


@dataclass
class ScoreTensor:
    """``arc_scores[j, i-1]`` scores head j for dependent i; ``label_scores`` adds a label axis."""

    arc_scores: np.ndarray
    label_scores: np.ndarray


def assign_labels(label_scores: np.ndarray, heads) -> list[int]:
    """Best label index for every dependent at its decoded head (first index wins ties)."""
    return [int(np.argmax(label_scores[h, i])) for i, h in enumerate(heads)]


def _log_softmax_columns(scores: np.ndarray) -> np.ndarray:
    shifted = scores - np.max(scores, axis=0, keepdims=True)
    with np.errstate(divide="ignore"):
        return shifted - np.log(np.sum(np.exp(shifted), axis=0, keepdims=True))


def _as_treebank(X) -> Treebank:
    if isinstance(X, Treebank):
        return X
    if isinstance(X, DependencyTree):
        return Treebank((X,))
    return Treebank(tuple(X))


class BiaffineParser(BaseEstimator):
    """Graph-based dependency parser with biaffine arc and label scoring.

    Each token is represented by the concatenation of a word vector (a
    frozen cross-lingual embedding plus a trainable correction), a word
    cluster embedding and a POS embedding.  A bidirectional LSTM encodes the
    sentence, and trees are decoded with a single-root maximum spanning
    arborescence search.

    Parameters
    ----------
    embed_dim : int, default=50
        Word vector width; must match ``embeddings.dim`` when embeddings are given.
    cluster_embed_dim, pos_embed_dim : int, default=8
    encoder_layers : int, default=1
        Depth of the BiLSTM.  Use 3 for the full-size configuration.
    encoder_hidden : int, default=64
        Hidden units per direction.
    arc_mlp_dim, label_mlp_dim : int
        Widths of the dependent/head projections.
    dropout : float, default=0.33
    epochs : int, default=50
        Full passes over the training data; the last model is kept.
    batch_size : int, default=32
    learning_rate, beta1, beta2 : float
        Adam settings.
    clip : float, default=5.0
        Gradient norm clip, ``0`` disables it.
    min_word_count : int, default=2
        Training forms rarer than this share the unknown trainable vector.
    delexicalized : bool, default=False
        Drop word vectors entirely; clusters and POS tags only.
    embeddings : EmbeddingTable or None
    clusters : ClusterMap or None
        When absent, ``Token.cluster`` values already on the trees are used.
    activation : {"leaky_relu", "relu", "tanh"}
    dtype : {"float32", "float64"}
    seed : int, default=0
    verbose : bool, default=False
    """

    def __init__(
        self,
        embed_dim=50,
        cluster_embed_dim=8,
        pos_embed_dim=8,
        encoder_layers=1,
        encoder_hidden=64,
        arc_mlp_dim=64,
        label_mlp_dim=32,
        dropout=0.33,
        epochs=50,
        batch_size=32,
        learning_rate=2e-3,
        beta1=0.9,
        beta2=0.9,
        clip=5.0,
        min_word_count=2,
        delexicalized=False,
        embeddings=None,
        clusters=None,
        activation="leaky_relu",
        dtype="float32",
        seed=0,
        verbose=False,
    ):
        self.embed_dim = embed_dim
        self.cluster_embed_dim = cluster_embed_dim
        self.pos_embed_dim = pos_embed_dim
        self.encoder_layers = encoder_layers
        self.encoder_hidden = encoder_hidden
        self.arc_mlp_dim = arc_mlp_dim
        self.label_mlp_dim = label_mlp_dim
        self.dropout = dropout
        self.epochs = epochs
        self.batch_size = batch_size
        self.learning_rate = learning_rate
        self.beta1 = beta1
        self.beta2 = beta2
        self.clip = clip
        self.min_word_count = min_word_count
        self.delexicalized = delexicalized
        self.embeddings = embeddings
        self.clusters = clusters
        self.activation = activation
        self.dtype = dtype
        self.seed = seed
        self.verbose = verbose

    # -- configuration -------------------------------------------------------

    def _check_params(self):
        for name in (
            "embed_dim", "cluster_embed_dim", "pos_embed_dim", "encoder_layers",
            "encoder_hidden", "arc_mlp_dim", "label_mlp_dim", "epochs", "batch_size",
        ):
            value = getattr(self, name)
            if not isinstance(value, (int, np.integer)) or value < 1:
                raise ConfigError(f"{name} must be a positive integer, got {value!r}")
        if not 0.0 <= self.dropout < 1.0:
            raise ConfigError(f"dropout must be in [0, 1), got {self.dropout}")
        if self.learning_rate <= 0:
            raise ConfigError("learning_rate must be positive")
        if self.activation not in ("leaky_relu", "relu", "tanh"):
            raise ConfigError(f"unknown activation {self.activation!r}")
        if self.dtype not in _DTYPES:
            raise ConfigError(f"dtype must be one of {sorted(_DTYPES)}")
        if self.embeddings is not None and self.embeddings.dim != self.embed_dim and not self.delexicalized:
            raise ConfigError(
                f"embed_dim={self.embed_dim} does not match the embedding table width {self.embeddings.dim}"
            )

    def _network_config(self) -> dict:
        keys = (
            "embed_dim", "cluster_embed_dim", "pos_embed_dim", "encoder_layers", "encoder_hidden",
            "arc_mlp_dim", "label_mlp_dim", "dropout", "activation", "delexicalized",
        )
        return {k: getattr(self, k) for k in keys}

    def initialize(self, X):
        """Build vocabularies and a freshly initialized network without training."""
        self._check_params()
        treebank = _as_treebank(X)
        if not len(treebank):
            raise ConfigError("cannot train on an empty treebank")
        for tree in treebank:
            check_tree(tree)
        use_embeddings = self.embeddings is not None and not self.delexicalized
        self.vocab_ = ParserVocab.build(
            treebank,
            min_word_count=self.min_word_count,
            embeddings=self.embeddings if use_embeddings else None,
            clusters=self.clusters,
        )
        pretrained = None
        if use_embeddings:
            table = self.embeddings.matrix()  # words..., unk
            pretrained = np.vstack([np.zeros((1, table.shape[1])), table[-1:], table[:-1]])
        with torch.random.fork_rng(devices=[]):
            torch.manual_seed(self.seed)
            self.network_ = BiaffineNetwork(self.vocab_, self._network_config(), pretrained)
        self.network_.to(_DTYPES[self.dtype])
        self.history_ = []
        return self

    # -- training ------------------------------------------------------------

    def fit(self, X, y=None):
        """Train on a :class:`Treebank` (``y`` is ignored; gold trees carry the targets)."""
        treebank = _as_treebank(X)
        self.initialize(treebank)
        trees = list(treebank.trees)
        net = self.network_
        optimizer = torch.optim.Adam(
            net.parameters(), lr=self.learning_rate, betas=(self.beta1, self.beta2), eps=1e-12
        )
        order_rng = np.random.default_rng(self.seed)
        with torch.random.fork_rng(devices=[]):
            torch.manual_seed(self.seed)
            for epoch in range(self.epochs):
                net.train()
                order = order_rng.permutation(len(trees))
                total, tokens = 0.0, 0
                for start in range(0, len(order), self.batch_size):
                    chunk = [trees[k] for k in order[start:start + self.batch_size]]
                    batch = make_batch(chunk, self.vocab_)
                    arc, label = net(batch)
                    loss = cross_entropy_loss(arc, label, batch)
                    n_tokens = int(batch.token_mask.sum())
                    optimizer.zero_grad()
                    (loss / n_tokens).backward()
                    if self.clip:
                        torch.nn.utils.clip_grad_norm_(net.parameters(), self.clip)
                    optimizer.step()
                    total += loss.item()
                    tokens += n_tokens
                self.history_.append(total / tokens)
                if self.verbose:
                    logger.info("epoch %d loss %.4f", epoch + 1, self.history_[-1])
        net.eval()
        return self

    def _check_fitted(self):
        if not hasattr(self, "network_"):
            raise NotFittedError("BiaffineParser is not fitted yet; call fit() first")

    # -- scoring and decoding ------------------------------------------------

    def _forward(self, trees, with_gold=False):
        batch = make_batch(trees, self.vocab_, with_gold=with_gold)
        return batch, self.network_(batch)

    def encode(self, tree: DependencyTree) -> EncoderState:
        self._check_fitted()
        if not len(tree):
            raise ContractViolation("cannot encode an empty sentence")
        self.network_.eval()
        with torch.no_grad():
            batch = make_batch([tree], self.vocab_, with_gold=False)
            parts = self.network_.encode(batch)
        return EncoderState(*(p[0].double().numpy() for p in parts))

    def score_tree(self, tree: DependencyTree) -> ScoreTensor:
        """Raw (unnormalized) arc and label scores; self-attachment is ``-inf``."""
        self._check_fitted()
        self.network_.eval()
        with torch.no_grad():
            _, (arc, label) = self._forward([tree])
        n = len(tree)
        return ScoreTensor(
            arc[0, : n + 1, 1 : n + 1].double().numpy(),
            label[0, : n + 1, 1 : n + 1].double().numpy(),
        )

    def loss(self, X) -> torch.Tensor:
        """Summed word-level cross-entropy on ``X`` with dropout disabled (differentiable)."""
        self._check_fitted()
        treebank = _as_treebank(X)
        self.network_.eval()
        batch = make_batch(list(treebank.trees), self.vocab_)
        arc, label = self.network_(batch)
        return cross_entropy_loss(arc, label, batch)

    def loss_and_gradients(self, X) -> tuple[float, dict[str, np.ndarray]]:
        net = self.network_
        net.zero_grad()
        value = self.loss(X)
        value.backward()
        grads = {
            name: (p.grad.double().numpy().copy() if p.grad is not None else np.zeros(tuple(p.shape)))
            for name, p in net.named_parameters()
        }
        net.zero_grad()
        return value.item(), grads

    def _decode(self, tree, arc, label):
        n = len(tree)
        arc_scores = arc[: n + 1, 1 : n + 1].double().numpy()
        heads = decode_mst(_log_softmax_columns(arc_scores))
        label_scores = label[: n + 1, 1 : n + 1].double().numpy()
        label_ids = assign_labels(label_scores, heads)
        tokens = [
            replace(tok, deprel=self.vocab_.labels[l] if self.vocab_.labels else tok.deprel)
            for tok, l in zip(tree.tokens, label_ids)
        ]
        return tree.with_tokens(renumber(tokens, heads))

    def predict(self, X, batch_size=None) -> Treebank:
        """Parse every sentence; POS tags and forms are kept, heads and labels predicted."""
        self._check_fitted()
        treebank = _as_treebank(X)
        size = batch_size or self.batch_size
        self.network_.eval()
        out = []
        with torch.no_grad():
            for start in range(0, len(treebank), size):
                chunk = list(treebank.trees[start:start + size])
                _, (arc, label) = self._forward(chunk)
                for b, tree in enumerate(chunk):
                    out.append(self._decode(tree, arc[b], label[b]))
        return Treebank(tuple(out))

    def score(self, X, y=None) -> float:
        """Labeled attachment score (percent, punctuation excluded) on gold trees ``X``."""
        from ..evaluation import score as evaluate

        treebank = _as_treebank(X)
        return evaluate(treebank, self.predict(treebank)).las

    # -- persistence -----------------------------------------------------------

    def save(self, target=None) -> bytes:
        from .serialization import save_model

        return save_model(self, target)

    @classmethod
    def load(cls, source) -> "BiaffineParser":
        from .serialization import load_model

        return load_model(source)
