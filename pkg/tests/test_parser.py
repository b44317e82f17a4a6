import io
import math

import numpy as np
import pytest
import torch
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from codemix.conllu import Treebank, validate_tree
from codemix.datasets import make_toy_treebank
from codemix.evaluation import right_branching, score
from codemix.exceptions import ConfigError, ModelFormatError
from codemix.parser import BiaffineParser, assign_labels
from codemix.parser.model import make_batch

from conftest import make_tree, random_tree
from oracles import gradient_check, tiny_parser

SMALL = dict(embed_dim=8, cluster_embed_dim=4, pos_embed_dim=4, encoder_hidden=16,
             arc_mlp_dim=16, label_mlp_dim=8, min_word_count=1)


@pytest.fixture(scope="module")
def bank():
    return make_toy_treebank(12, seed=3)


@pytest.fixture(scope="module")
def fitted(bank):
    return BiaffineParser(epochs=3, **SMALL).fit(bank)


def params_of(parser):
    return {k: v.detach().clone() for k, v in parser.network_.state_dict().items()}


# -- configuration ----------------------------------------------------------


def test_empty_treebank_is_rejected():
    with pytest.raises(ConfigError):
        BiaffineParser().fit(Treebank())


@pytest.mark.parametrize("bad", [dict(epochs=0), dict(dropout=1.0), dict(activation="gelu"),
                                 dict(dtype="float16"), dict(learning_rate=0.0)])
def test_bad_hyperparameters(bad, bank):
    with pytest.raises(ConfigError):
        BiaffineParser(**bad).fit(bank)


def test_unfitted_parser_refuses_to_predict(bank):
    with pytest.raises(NotFittedError):
        BiaffineParser().predict(bank)


def test_sklearn_clone_keeps_params():
    parser = BiaffineParser(epochs=7, encoder_layers=3)
    copy = clone(parser)
    assert copy.get_params() == parser.get_params()


# -- forward pass -----------------------------------------------------------


def test_encode_shapes_and_determinism(fitted, bank):
    tree = bank[0]
    n = len(tree)
    state = fitted.encode(tree)
    assert state.lstm.shape == (n + 1, 2 * SMALL["encoder_hidden"])
    assert state.arc_dep.shape == state.arc_head.shape == (n + 1, SMALL["arc_mlp_dim"])
    assert state.label_dep.shape == (n + 1, SMALL["label_mlp_dim"])
    again = fitted.encode(tree)
    np.testing.assert_array_equal(state.lstm, again.lstm)


def test_score_shapes(fitted):
    tree = make_tree([2, 0], ["the", "road"], ["DET", "NOUN"], ["det", "root"])
    scores = fitted.score_tree(tree)
    assert scores.arc_scores.shape == (3, 2)
    assert scores.label_scores.shape == (3, 2, fitted.vocab_.n_labels)
    # self-attachment is forbidden
    assert scores.arc_scores[1, 0] == -np.inf and scores.arc_scores[2, 1] == -np.inf


def test_zero_weights_give_bias_only(bank):
    parser = BiaffineParser(**SMALL).initialize(bank)
    with torch.no_grad():
        for p in parser.network_.parameters():
            p.zero_()
        parser.network_.arc_b.fill_(0.75)
    arc = parser.score_tree(bank[0]).arc_scores
    finite = arc[np.isfinite(arc)]
    assert np.all(finite == 0.75)


def test_biaffine_matches_hand_computation(fitted, bank):
    tree = bank[1]
    state = fitted.encode(tree)
    net = fitted.network_
    U = net.arc_U.detach().double().numpy()
    w = net.arc_w.detach().double().numpy()
    b = net.arc_b.item()
    arc = fitted.score_tree(tree).arc_scores
    n = len(tree)
    for j in range(n + 1):
        for i in range(1, n + 1):
            if i == j:
                continue
            expected = state.arc_dep[i] @ U @ state.arc_head[j] + w @ state.arc_head[j] + b
            assert arc[j, i - 1] == pytest.approx(expected, rel=1e-5, abs=1e-5)

    LU = net.label_U.detach().double().numpy()
    wd = net.label_w_dep.detach().double().numpy()
    wh = net.label_w_head.detach().double().numpy()
    lb = net.label_b.detach().double().numpy()
    labels = fitted.score_tree(tree).label_scores
    j, i = 0, 3
    expected = np.array([
        state.label_dep[i] @ LU[l] @ state.label_head[j] + wd[l] @ state.label_dep[i]
        + wh[l] @ state.label_head[j] + lb[l]
        for l in range(len(lb))
    ])
    np.testing.assert_allclose(labels[j, i - 1], expected, rtol=1e-5, atol=1e-5)


def test_head_distributions_normalize(fitted, bank):
    arc = fitted.score_tree(bank[2]).arc_scores
    probs = np.exp(arc - arc.max(axis=0)) / np.exp(arc - arc.max(axis=0)).sum(axis=0)
    np.testing.assert_allclose(probs.sum(axis=0), 1.0, atol=1e-9)


# -- labels -----------------------------------------------------------------


def test_assign_labels_single_label():
    assert assign_labels(np.zeros((3, 2, 1)), [0, 1]) == [0, 0]


def test_assign_labels_hand_tensor():
    scores = np.zeros((3, 2, 3))
    scores[2, 0] = [0.1, 0.9, 0.0]
    scores[0, 1] = [0.0, 0.2, 0.7]
    assert assign_labels(scores, [2, 0]) == [1, 2]


def test_assign_labels_scan(rng):
    for _ in range(20):
        scores = rng.integers(0, 3, size=(5, 4, 3)).astype(float)
        heads = [int(h) for h in rng.integers(0, 5, size=4)]
        expected = []
        for i, h in enumerate(heads):
            best = 0
            for l in range(3):
                if scores[h, i, l] > scores[h, i, best]:
                    best = l
            expected.append(best)
        assert assign_labels(scores, heads) == expected


# -- loss ---------------------------------------------------------------------


def test_initial_loss_is_uniform(bank):
    parser = BiaffineParser(**SMALL).initialize(bank)
    with torch.no_grad():
        parser.network_.arc_U.zero_()
        parser.network_.label_U.zero_()
    # the linear and bias terms start at zero, so every softmax is now uniform
    trees = list(bank)[:3]
    expected = sum(len(t) * (math.log(len(t)) + math.log(parser.vocab_.n_labels)) for t in trees)
    assert parser.loss(Treebank(tuple(trees))).item() == pytest.approx(expected, rel=1e-5)


def test_single_token_single_label_loss_is_zero():
    tree = make_tree([0], ["solo"], deprels=["root"])
    parser = BiaffineParser(**SMALL).initialize(Treebank((tree,)))
    assert parser.loss(tree).item() == pytest.approx(0.0, abs=1e-6)


def test_loss_matches_formula(fitted, bank):
    tree = bank[4]
    scores = fitted.score_tree(tree)
    arc, label = scores.arc_scores, scores.label_scores
    total = 0.0
    for i, tok in enumerate(tree, start=1):
        col = arc[:, i - 1]
        total -= col[tok.head] - np.log(np.sum(np.exp(col[np.isfinite(col)])))
        row = label[tok.head, i - 1]
        gold = fitted.vocab_.labels.index(tok.deprel)
        total -= row[gold] - np.log(np.sum(np.exp(row)))
    assert fitted.loss(tree).item() == pytest.approx(total, rel=1e-4)


def test_gradients_cover_every_parameter(bank):
    parser = tiny_parser(Treebank(tuple(bank)[:2]))
    _, grads = parser.loss_and_gradients(Treebank(tuple(bank)[:2]))
    names = {name for name, _ in parser.network_.named_parameters()}
    assert set(grads) == names


@pytest.mark.slow
def test_gradient_check():
    n_params, worst = gradient_check()
    assert n_params <= 500
    assert worst < 1e-4


# -- training -----------------------------------------------------------------


def test_memorizes_one_sentence():
    # capacity check, so regularization is switched off
    tree = make_toy_treebank(1, seed=11)
    parser = BiaffineParser(epochs=50, dropout=0.0, min_word_count=1).fit(tree)
    report = score(tree, parser.predict(tree))
    assert report.uas == report.las == 100.0
    first, last = np.mean(parser.history_[:5]), np.mean(parser.history_[-5:])
    assert last < first


def test_training_is_deterministic(bank):
    a = BiaffineParser(epochs=2, seed=4, **SMALL).fit(bank)
    b = BiaffineParser(epochs=2, seed=4, **SMALL).fit(bank)
    for key, value in params_of(a).items():
        assert torch.equal(value, params_of(b)[key])
    c = BiaffineParser(epochs=2, seed=5, **SMALL).fit(bank)
    assert not torch.equal(params_of(a)["root"], params_of(c)["root"])


def test_training_does_not_touch_global_rng(bank):
    torch.manual_seed(123)
    expected = torch.rand(3)
    torch.manual_seed(123)
    BiaffineParser(epochs=1, **SMALL).fit(bank)
    assert torch.equal(torch.rand(3), expected)


@pytest.mark.slow
def test_beats_right_branching_on_held_out():
    bank = make_toy_treebank(200, seed=21)
    train, test = Treebank(bank.trees[:160]), Treebank(bank.trees[160:])
    parser = BiaffineParser(epochs=20, min_word_count=1).fit(train)
    learned = score(test, parser.predict(test)).uas
    baseline = score(test, right_branching(test)).uas
    assert learned >= baseline + 20


def test_delexicalized_trains_and_parses(bank):
    parser = BiaffineParser(epochs=2, delexicalized=True, **SMALL).fit(bank)
    assert not hasattr(parser.network_, "word_embed")
    out = parser.predict(bank)
    assert all(validate_tree(t) == [] for t in out)


def test_pretrained_vectors_are_frozen(bank):
    from codemix.resources import EmbeddingTable

    table = EmbeddingTable(8, {"the": np.ones(8), "road": np.full(8, 2.0)})
    parser = BiaffineParser(epochs=2, embeddings=table, **SMALL).fit(bank)
    frozen = parser.network_.pretrained
    assert not frozen.requires_grad
    # rows: padding, unknown (mean), then table order
    np.testing.assert_allclose(frozen[2].numpy(), np.ones(8))
    np.testing.assert_allclose(frozen[1].numpy(), np.full(8, 1.5))


def test_embedding_width_must_match(bank):
    from codemix.resources import EmbeddingTable

    with pytest.raises(ConfigError):
        BiaffineParser(embed_dim=5, embeddings=EmbeddingTable(3, {"a": np.zeros(3)})).fit(bank)


# -- parsing ------------------------------------------------------------------


def test_outputs_are_valid_trees(fitted, rng):
    trees = Treebank(tuple(random_tree(rng, int(rng.integers(1, 15)), str(k)) for k in range(25)))
    out = fitted.predict(trees)
    assert len(out) == len(trees)
    for src, tree in zip(trees, out):
        assert validate_tree(tree) == []
        assert tree.forms == src.forms


def test_batch_size_does_not_change_parses(fitted, bank):
    one = fitted.predict(bank, batch_size=1)
    many = fitted.predict(bank, batch_size=5)
    assert one.trees == many.trees


def test_padding_does_not_leak(fitted, bank):
    short, long = bank[0], max(bank, key=len)
    alone = make_batch([short], fitted.vocab_)
    padded = make_batch([short, long], fitted.vocab_)
    with torch.no_grad():
        a, _ = fitted.network_(alone)
        b, _ = fitted.network_(padded)
    n = len(short) + 1
    torch.testing.assert_close(a[0, :n, :n], b[0, :n, :n])


def test_score_is_las(fitted, bank):
    assert fitted.score(bank) == score(bank, fitted.predict(bank)).las


# -- persistence --------------------------------------------------------------


def test_save_load_round_trip(fitted, bank, tmp_path):
    path = tmp_path / "m.bin"
    fitted.save(path)
    loaded = BiaffineParser.load(path)
    assert loaded.get_params() == {**fitted.get_params(), "embeddings": None, "clusters": None}
    for key, value in params_of(fitted).items():
        assert torch.equal(value, params_of(loaded)[key])
    assert loaded.predict(bank).trees == fitted.predict(bank).trees


def test_save_is_byte_stable(fitted):
    assert fitted.save() == BiaffineParser.load(io.BytesIO(fitted.save())).save()


def test_truncated_model(fitted):
    data = fitted.save()
    with pytest.raises(ModelFormatError):
        BiaffineParser.load(data[: len(data) // 2])


def test_corrupted_model(fitted):
    data = bytearray(fitted.save())
    data[40] ^= 0xFF
    with pytest.raises(ModelFormatError, match="checksum"):
        BiaffineParser.load(bytes(data))


def test_bad_magic():
    with pytest.raises(ModelFormatError):
        BiaffineParser.load(b"NOTMODEL" + bytes(64))
