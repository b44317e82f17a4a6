"""Command-line front-end: ``codemix <command> [options]``.

Every option can also come from a manifest file (``--manifest run.cfg``)
holding ``key = value`` lines, where keys are option names with or without
the leading dashes.  Flags given on the command line win over the manifest.

Exit status is 0 on success, 2 for usage or data errors and 1 for
anything unexpected.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import __version__
from .exceptions import CodeMixError

logger = logging.getLogger("codemix")

EXIT_OK, EXIT_INTERNAL, EXIT_DATA = 0, 1, 2


class DataError(Exception):
    """Bad input files or option values; reported with exit status 2."""


# ---------------------------------------------------------------------------
# manifest handling

_TRUE = {"1", "true", "yes", "on"}
_FALSE = {"0", "false", "no", "off"}


def read_manifest(path) -> dict[str, str]:
    values = {}
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise DataError(f"cannot read manifest {path}: {exc.strerror or exc}") from None
    for number, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise DataError(f"{path}:{number}: expected 'key = value', got {raw.strip()!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        values[key.lstrip("-").replace("-", "_")] = value
    return values


def _apply_manifest(parser: argparse.ArgumentParser, args: argparse.Namespace, manifest: dict[str, str]):
    actions = {a.dest: a for a in parser._actions if a.dest not in ("help", "manifest", "command")}
    for key, raw in manifest.items():
        action = actions.get(key)
        if action is None:
            raise DataError(f"unknown manifest key {key!r} for this command")
        if getattr(args, key) is not None:
            continue  # the command line wins
        if isinstance(action, argparse._StoreTrueAction):
            low = raw.lower()
            if low not in _TRUE | _FALSE:
                raise DataError(f"manifest key {key!r} expects true/false, got {raw!r}")
            setattr(args, key, low in _TRUE)
            continue
        try:
            value = action.type(raw) if action.type else raw
        except (TypeError, ValueError, argparse.ArgumentTypeError) as exc:
            raise DataError(f"manifest key {key!r}: {exc}") from None
        setattr(args, key, value)


def _finalize(args: argparse.Namespace, defaults: dict):
    for key, value in defaults.items():
        if getattr(args, key, None) is None:
            setattr(args, key, value)


# ---------------------------------------------------------------------------
# option types


def _ratio(text: str) -> float:
    try:
        value = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None
    if not 0.0 <= value <= 1.0:
        raise argparse.ArgumentTypeError(f"lambda must be in [0, 1], got {value}")
    return value


def _grid(text: str) -> tuple[float, ...]:
    parts = [p for p in text.replace(" ", "").split(",") if p]
    if not parts:
        raise argparse.ArgumentTypeError("empty grid")
    return tuple(_ratio(p) for p in parts)


def _positive(text: str) -> int:
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if value < 1:
        raise argparse.ArgumentTypeError(f"must be >= 1, got {value}")
    return value


# Options whose unset value is ``None`` so a manifest can fill them in;
# the real defaults are applied afterwards.
_DEFAULTS = {
    "ratio": 0.7,
    "no_delete": False,
    "no_reorder": False,
    "seed": 0,
    "epochs": 50,
    "batch_size": 32,
    "hidden": 64,
    "layers": 1,
    "dropout": 0.33,
    "learning_rate": 2e-3,
    "delexicalized": False,
    "min_word_count": 2,
    "grid": tuple(round(0.1 * k, 1) for k in range(11)),
    "trials": 1,
    "jobs": 1,
    "threads": 1,
    "include_source": False,
    "json": False,
}


def _add_common(p: argparse.ArgumentParser):
    p.add_argument("--manifest", metavar="FILE", help="key = value file supplying defaults for any option")
    p.add_argument("--seed", type=int, help="random seed (default 0)")
    p.add_argument("--threads", type=_positive, help="torch intra-op threads (default 1)")


def _add_alignment_inputs(p: argparse.ArgumentParser):
    p.add_argument("--pairs", metavar="FILE", help="sentence pairs, TSV: id, source sentence, translation")
    group = p.add_mutually_exclusive_group()
    group.add_argument("--alignments", metavar="FILE", help="per-sentence alignment matrices (JSON lines)")
    group.add_argument("--lexical-table", metavar="FILE", help="word translation table to derive matrices from")


def _add_mixing(p: argparse.ArgumentParser):
    p.add_argument("--lambda", dest="ratio", type=_ratio, metavar="R", help="translation ratio in [0, 1] (default 0.7)")
    p.add_argument("--no-delete", action="store_true", default=None, help="skip word deletion")
    p.add_argument("--no-reorder", action="store_true", default=None, help="skip reordering of target runs")


def _add_parser_options(p: argparse.ArgumentParser):
    p.add_argument("--embeddings", metavar="FILE", help="cross-lingual word vectors (text format)")
    p.add_argument("--clusters", metavar="FILE", help="cross-lingual word clusters (form<TAB>id)")
    p.add_argument("--epochs", type=_positive, help="training epochs (default 50)")
    p.add_argument("--batch-size", type=_positive, help="sentences per update (default 32)")
    p.add_argument("--hidden", type=_positive, help="BiLSTM units per direction (default 64)")
    p.add_argument("--layers", type=_positive, help="BiLSTM layers (default 1)")
    p.add_argument("--dropout", type=float, help="dropout rate (default 0.33)")
    p.add_argument("--learning-rate", type=float, help="Adam step size (default 0.002)")
    p.add_argument("--min-word-count", type=_positive, help="rarer training words map to unknown (default 2)")
    p.add_argument("--delexicalized", action="store_true", default=None, help="use clusters and POS tags only")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="codemix",
        description="Code-mixed treebank translation and cross-lingual dependency parsing.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND")
    sub.required = True

    p = sub.add_parser("translate", help="build a code-mixed treebank from a source treebank")
    p.add_argument("treebank", nargs="?", help="source treebank (CoNLL-U)")
    _add_alignment_inputs(p)
    _add_mixing(p)
    p.add_argument("--out", metavar="FILE", help="output CoNLL-U (default stdout)")
    p.add_argument("--stats", metavar="FILE", help="write the statistics report as JSON here")
    _add_common(p)
    p.set_defaults(handler=cmd_translate)

    p = sub.add_parser("mix", help="concatenate two treebanks")
    p.add_argument("first", help="first treebank")
    p.add_argument("second", help="second treebank")
    p.add_argument("--out", metavar="FILE", help="output CoNLL-U (default stdout)")
    p.add_argument("--manifest", metavar="FILE", help="key = value file supplying defaults")
    p.set_defaults(handler=cmd_mix)

    p = sub.add_parser("train", help="train a parser and save it")
    p.add_argument("treebank", nargs="?", help="training treebank (CoNLL-U)")
    p.add_argument("--model", metavar="FILE", help="where to save the trained model")
    _add_parser_options(p)
    _add_common(p)
    p.set_defaults(handler=cmd_train)

    p = sub.add_parser("parse", help="parse a treebank with a saved model")
    p.add_argument("treebank", nargs="?", help="input CoNLL-U (existing heads are ignored)")
    p.add_argument("--model", metavar="FILE", help="trained model file")
    p.add_argument("--out", metavar="FILE", help="output CoNLL-U (default stdout)")
    _add_common(p)
    p.set_defaults(handler=cmd_parse)

    p = sub.add_parser("eval", help="score predicted trees against gold trees")
    p.add_argument("gold", help="gold CoNLL-U")
    p.add_argument("pred", help="predicted CoNLL-U")
    p.add_argument("--json", action="store_true", default=None, help="print the report as JSON")
    p.add_argument("--manifest", metavar="FILE", help="key = value file supplying defaults")
    p.set_defaults(handler=cmd_eval)

    for name, handler, text in (
        ("sweep", cmd_sweep, "train and score parsers over a grid of lambda values"),
        ("ablate", cmd_ablate, "toggle deletion and reordering and compare parsers"),
    ):
        p = sub.add_parser(name, help=text)
        p.add_argument("treebank", nargs="?", help="source treebank (CoNLL-U)")
        p.add_argument("--test", metavar="FILE", help="gold target-language test treebank")
        _add_alignment_inputs(p)
        if name == "sweep":
            p.add_argument("--grid", type=_grid, help="comma-separated lambda values (default 0,0.1,...,1)")
            p.add_argument("--include-source", action="store_true", default=None,
                           help="train on the source treebank plus each mixed treebank")
        else:
            p.add_argument("--lambda", dest="ratio", type=_ratio, metavar="R", help="translation ratio (default 0.7)")
        p.add_argument("--trials", type=_positive, help="parsers per setting, seeds seed..seed+trials-1 (default 1)")
        p.add_argument("--jobs", type=_positive, help="parallel training processes (default 1)")
        p.add_argument("--out", metavar="FILE", help="CSV output (default stdout)")
        _add_parser_options(p)
        _add_common(p)
        p.set_defaults(handler=handler)
    return parser


# ---------------------------------------------------------------------------
# helpers


def _require(args, *names):
    for name in names:
        if getattr(args, name, None) is None:
            raise DataError(f"missing required input: --{name.replace('_', '-')} (or '{name}' in the manifest)")


def _path(value, what: str) -> Path:
    path = Path(value)
    if not path.is_file():
        raise DataError(f"{what} not found: {path}")
    return path


def _read_treebank(value, what="treebank"):
    from .conllu import read_conllu

    return read_conllu(_path(value, what))


def _emit(data: bytes, out):
    if out is None:
        sys.stdout.buffer.write(data)
        sys.stdout.flush()
    else:
        Path(out).write_bytes(data)


def _emit_text(text: str, out):
    _emit(text.encode("utf-8"), out)


def _set_threads(args):
    import torch

    torch.set_num_threads(args.threads)


def _aligned_corpus(args):
    from .alignment import derive_matrix, load_lexical_table, load_matrix_file, load_pairs
    from .translate import AlignedCorpus

    _require(args, "treebank", "pairs")
    treebank = _read_treebank(args.treebank)
    pairs = load_pairs(_path(args.pairs, "pair file"))
    if args.alignments is not None:
        matrices = load_matrix_file(_path(args.alignments, "alignment file"))
    elif args.lexical_table is not None:
        table = load_lexical_table(_path(args.lexical_table, "lexical table"))
        matrices = [derive_matrix(pair, table) for pair in pairs]
    else:
        raise DataError("one of --alignments or --lexical-table is required")
    return AlignedCorpus(treebank, matrices, pairs)


def _parser_params(args) -> dict:
    from .resources import load_clusters, load_embeddings

    params = dict(
        epochs=args.epochs,
        batch_size=args.batch_size,
        encoder_hidden=args.hidden,
        encoder_layers=args.layers,
        dropout=args.dropout,
        learning_rate=args.learning_rate,
        min_word_count=args.min_word_count,
        delexicalized=args.delexicalized,
        seed=args.seed,
        verbose=args.verbose,
    )
    if args.embeddings is not None:
        table = load_embeddings(_path(args.embeddings, "embedding file"))
        params.update(embeddings=table, embed_dim=table.dim)
    if args.clusters is not None:
        params["clusters"] = load_clusters(_path(args.clusters, "cluster file"))
    return params


# ---------------------------------------------------------------------------
# commands


def cmd_translate(args) -> int:
    from .conllu import write_conllu
    from .translate import CodeMixConfig, translate_treebank

    corpus = _aligned_corpus(args)
    config = CodeMixConfig(
        ratio=args.ratio,
        enable_deletion=not args.no_delete,
        enable_reordering=not args.no_reorder,
        seed=args.seed,
    )
    mixed, stats = translate_treebank(corpus.treebank, corpus.matrices, corpus.pairs, config)
    _emit(write_conllu(mixed), args.out)
    report = json.dumps({"lambda": config.ratio, **stats.to_dict()}, indent=2, sort_keys=True) + "\n"
    if args.stats is not None:
        Path(args.stats).write_text(report, encoding="utf-8")
    elif args.out is not None:
        sys.stdout.write(report)
    else:
        sys.stderr.write(report)
    return EXIT_OK


def cmd_mix(args) -> int:
    from .conllu import write_conllu
    from .translate import mix_corpora

    first = _read_treebank(args.first, "first treebank")
    second = _read_treebank(args.second, "second treebank")
    _emit(write_conllu(mix_corpora(first, second)), args.out)
    return EXIT_OK


def cmd_train(args) -> int:
    from .parser import BiaffineParser

    _require(args, "treebank", "model")
    _set_threads(args)
    treebank = _read_treebank(args.treebank)
    if not len(treebank):
        raise DataError(f"training treebank is empty: {args.treebank}")
    parser = BiaffineParser(**_parser_params(args)).fit(treebank)
    parser.save(args.model)
    print(f"trained {len(treebank)} sentences, final loss {parser.history_[-1]:.4f}, saved {args.model}")
    return EXIT_OK


def cmd_parse(args) -> int:
    from .conllu import write_conllu
    from .parser import BiaffineParser

    _require(args, "treebank", "model")
    _set_threads(args)
    model = BiaffineParser.load(_path(args.model, "model file"))
    treebank = _read_treebank(args.treebank)
    _emit(write_conllu(model.predict(treebank)), args.out)
    return EXIT_OK


def cmd_eval(args) -> int:
    from dataclasses import asdict

    from .evaluation import score

    report = score(_read_treebank(args.gold, "gold treebank"), _read_treebank(args.pred, "predicted treebank"))
    if args.json:
        print(json.dumps(asdict(report), indent=2, sort_keys=True))
    else:
        print(report.format())
    return EXIT_OK


def _experiment_inputs(args):
    _require(args, "test")
    _set_threads(args)
    corpus = _aligned_corpus(args)
    test = _read_treebank(args.test, "test treebank")
    return corpus, test, _parser_params(args)


def cmd_sweep(args) -> int:
    from .evaluation import sweep_lambda

    corpus, test, params = _experiment_inputs(args)
    table = sweep_lambda(
        corpus, test, grid=args.grid, trials=args.trials, parser_params=params,
        seed=args.seed, include_source=args.include_source, n_jobs=args.jobs,
    )
    _emit_text(table.to_csv(), args.out)
    if args.out is not None:
        print(table.format())
    return EXIT_OK


def cmd_ablate(args) -> int:
    import csv
    import io

    from .evaluation import ablation

    corpus, test, params = _experiment_inputs(args)
    table = ablation(corpus, test, ratio=args.ratio, trials=args.trials, parser_params=params,
                     seed=args.seed, n_jobs=args.jobs)
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(["setting", "lambda", "trial", "uas", "las"])
    for row in table.rows:
        writer.writerow([row.name, f"{row.ratio:g}", row.trial, f"{row.uas:.4f}", f"{row.las:.4f}"])
    _emit_text(buffer.getvalue(), args.out)
    if args.out is not None:
        print(table.format())
    return EXIT_OK


# ---------------------------------------------------------------------------


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        if getattr(args, "manifest", None):
            subparser = parser._subparsers._group_actions[0].choices[args.command]
            _apply_manifest(subparser, args, read_manifest(args.manifest))
        _finalize(args, _DEFAULTS)
        return args.handler(args)
    except (DataError, CodeMixError) as exc:
        print(f"codemix {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except OSError as exc:
        where = f": {exc.filename}" if exc.filename else ""
        print(f"codemix {args.command}: error: {exc.strerror or exc}{where}", file=sys.stderr)
        return EXIT_DATA
    except KeyboardInterrupt:
        return 130
    except Exception:  # noqa: BLE001 - last-resort report
        logger.exception("internal error")
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
