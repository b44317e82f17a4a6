"""Hand-built gold/prediction pairs for the evaluator.

Each case is ``(upos, gold heads, gold labels, predicted heads, predicted labels)``.
Labels are single letters; ``r`` marks the root arc.
"""

from conftest import make_tree

N, V, P, D, A = "NOUN", "VERB", "PUNCT", "DET", "ADJ"

CASES = [
    # perfect parses
    ([V], [0], "r", [0], "r"),
    ([N, V], [2, 0], "sr", [2, 0], "sr"),
    # wrong label only
    ([N, V], [2, 0], "sr", [2, 0], "or"),
    # wrong head only
    ([D, N, V], [2, 3, 0], "dsr", [3, 3, 0], "dsr"),
    # everything wrong but the root
    ([D, N, V, N], [2, 3, 0, 3], "dsro", [3, 4, 0, 2], "abrc"),
    # punctuation errors are ignored
    ([N, V, P], [2, 0, 2], "srp", [2, 0, 1], "srx"),
    ([N, V, P, P], [2, 0, 2, 2], "srpp", [2, 0, 1, 1], "srxx"),
    # only punctuation is right
    ([N, V, P], [2, 0, 2], "srp", [0, 1, 2], "rsp"),
    # a sentence of punctuation only
    ([P], [0], "r", [0], "r"),
    # root moved
    ([N, V, N], [2, 0, 2], "sro", [0, 1, 2], "rso"),
    # label right, head wrong: counts for neither
    ([A, N, V], [2, 3, 0], "asr", [3, 3, 0], "asr"),
    # longer chain
    ([D, A, N, V, D, N, P], [3, 3, 4, 0, 6, 4, 4], "dasrdop", [3, 3, 4, 0, 6, 4, 4], "dasrdop"),
    ([D, A, N, V, D, N, P], [3, 3, 4, 0, 6, 4, 4], "dasrdop", [2, 3, 4, 0, 4, 4, 6], "dasrdsp"),
    ([D, A, N, V, D, N, P], [3, 3, 4, 0, 6, 4, 4], "dasrdop", [3, 3, 4, 0, 6, 4, 4], "xxxrxxx"),
    # flat structures
    ([N, N, N, N], [0, 1, 1, 1], "rccc", [0, 1, 2, 3], "rccc"),
    ([N, N, N, N], [0, 1, 1, 1], "rccc", [0, 1, 1, 1], "rcxc"),
    # long-distance arc
    ([V, N, N, N, N, N, N, N], [0, 1, 2, 3, 4, 5, 6, 1], "raaaaaao",
     [0, 1, 2, 3, 4, 5, 6, 7], "raaaaaao"),
    # mixed punctuation inside
    ([N, P, V, P, N, P], [3, 3, 0, 3, 3, 3], "spropp", [3, 1, 0, 5, 3, 5], "spxppp"),
    ([N, P, V, P, N, P], [3, 3, 0, 3, 3, 3], "spropp", [2, 3, 0, 3, 3, 3], "xpropp"),
    # two-token swap of roles
    ([N, V], [2, 0], "sr", [0, 1], "rs"),
]

assert len(CASES) == 20


def case_trees(case, sent_id="c"):
    upos, g_heads, g_labels, p_heads, p_labels = case
    gold = make_tree(g_heads, upos=list(upos), deprels=list(g_labels), sent_id=sent_id)
    pred = make_tree(p_heads, upos=list(upos), deprels=list(p_labels), sent_id=sent_id)
    return gold, pred
