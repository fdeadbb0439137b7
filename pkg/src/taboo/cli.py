"""Command-line surface: prepare, train, eval, compare, predict, serve.

Every subcommand accepts ``--config FILE`` with flat ``key = value``
lines (keys match flag names); explicit flags override config values.
Exit codes: 2 for bad flags or config keys, 1 for data errors, which are
reported as one TAB-separated ``error<TAB>Type<TAB>message`` line on
stderr.
"""

import argparse
import json
import os
import sys
from pathlib import Path

from .container import (
    ContainerError,
    ModelContainer,
    container_predict,
    load_container,
    save_container,
)
from .corpus import (
    CorpusError,
    Dataset,
    clean_sentences,
    ingest_records,
    make_silver,
    read_tree_file,
    split,
    write_tree_file,
)
from .embeddings import EmbeddingError, EmbeddingTable, from_vocabulary, load_text_embeddings
from .evalkit import EvalError, metrics_report, only_identified_fraction
from .keyword import (
    KeywordError,
    count_terms,
    fit_csan,
    keyword_max_fit,
    mine_inference_rules,
)
from .rawtext import predict_document
from .recnn import TrainConfig, TrainError, init_params, train
from .selective import SelectiveConfig, SelectiveError, selective_train
from .service import load_models, load_samples, make_server

DATA_ERRORS = (CorpusError, KeywordError, TrainError, SelectiveError,
               ContainerError, EvalError, EmbeddingError, OSError, ValueError)

MODEL_CHOICES = ("recnn", "infrule", "csan", "keyword-max", "selective")


def _lr_list(text: str) -> tuple:
    try:
        rates = tuple(float(x) for x in text.split(",") if x.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad learning rates: {text!r}")
    if not rates:
        raise argparse.ArgumentTypeError("at least one learning rate needed")
    return rates


def _splits(text: str) -> tuple:
    parts = text.split(",")
    if len(parts) != 3:
        raise argparse.ArgumentTypeError(
            f"--splits needs train,dev,test fractions, got {text!r}")
    try:
        return tuple(float(x) for x in parts)
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad split fractions: {text!r}")


def _budget(text: str):
    if text == "auto":
        return "auto"
    try:
        return int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(
            f'--pretrain-budget must be "auto" or an integer, got {text!r}')


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="taboo",
        description="Train, evaluate, and serve sensitive-sentence detectors.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    tc, sc = TrainConfig(), SelectiveConfig()

    p = sub.add_parser("prepare", help="clean a tree file and write splits")
    p.add_argument("--config", help="flat key = value config file")
    p.add_argument("--input", required=True, help="TAB-separated tree records")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--min-len", type=int, default=5)
    p.add_argument("--max-len", type=int, default=200)
    p.add_argument("--splits", type=_splits, default=(0.8, 0.1, 0.1))
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--silver", metavar="INFO_TYPE",
                   help="build a balanced set for this type, sampling "
                        "negatives from the other types")
    p.set_defaults(func=_cmd_prepare)

    p = sub.add_parser("train", help="train a detector and write a container")
    p.add_argument("--config", help="flat key = value config file")
    p.add_argument("--model", required=True, choices=MODEL_CHOICES)
    p.add_argument("--train", required=True, dest="train_file")
    p.add_argument("--dev", dest="dev_file")
    p.add_argument("--out", required=True)
    p.add_argument("--embeddings", help="text-format word vectors; omitted "
                                        "= deterministic random vectors")
    p.add_argument("--dim", type=int, default=16,
                   help="random-vector dimension when --embeddings is omitted")
    p.add_argument("--hidden", type=int, default=32)
    p.add_argument("--activation", default="tanh",
                   choices=("tanh", "sigmoid", "relu"))
    p.add_argument("--lr", type=_lr_list, default=tc.learning_rates,
                   help="comma-separated; several rates trigger a line search")
    p.add_argument("--batch-size", type=int, default=tc.batch_size)
    p.add_argument("--epochs", type=int, default=tc.max_epochs)
    p.add_argument("--dropout", type=float, default=tc.dropout)
    p.add_argument("--patience", type=int, default=tc.patience)
    p.add_argument("--class-weight", type=float, default=tc.class_weight)
    p.add_argument("--epsilon", type=float, default=tc.epsilon)
    p.add_argument("--probe-interval", type=int, default=tc.probe_interval)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--min-support", type=int, default=2)
    p.add_argument("--min-confidence", type=float, default=0.6)
    p.add_argument("--alpha", type=float, default=1.0)
    p.add_argument("--k", type=int, default=sc.k)
    p.add_argument("--cutoff", type=float, default=sc.delta_mfo_cutoff)
    p.add_argument("--pretrain-budget", type=_budget,
                   default=sc.pretrain_budget)
    p.set_defaults(func=_cmd_train)

    p = sub.add_parser("eval", help="score a model on a labeled tree file")
    p.add_argument("--config", help="flat key = value config file")
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=_cmd_eval)

    p = sub.add_parser("compare", help="only-identified fractions and "
                                       "shared errors of two models")
    p.add_argument("--config", help="flat key = value config file")
    p.add_argument("--model-a", required=True)
    p.add_argument("--model-b", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=_cmd_compare)

    p = sub.add_parser("predict", help="classify raw text with a container")
    p.add_argument("--config", help="flat key = value config file")
    p.add_argument("--model", required=True)
    p.add_argument("--text", help="document text; mutually exclusive "
                                  "with --input")
    p.add_argument("--input", help="document file, or - for stdin")
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=_cmd_predict)

    p = sub.add_parser("serve", help="run the HTTP JSON inference service")
    p.add_argument("--config", help="flat key = value config file")
    p.add_argument("--models-dir",
                   help="directory of container files; falls back to "
                        "the TABOO_MODELS_DIR environment variable")
    p.add_argument("--samples", help="JSON samples file for /api/samples")
    p.add_argument("--port", type=int, default=8080)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--static", help="directory of console assets to serve")
    p.set_defaults(func=_cmd_serve)
    return parser


# ------------------------------------------------------------------ config
def parse_config(path) -> dict:
    values = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            key, sep, val = line.partition("=")
            if not sep or not key.strip():
                raise CorpusError(f"{path}:{lineno}: expected key = value")
            values[key.strip().replace("-", "_")] = val.strip()
    return values


def _iter_subparsers(parser):
    for action in parser._actions:
        if isinstance(action, argparse._SubParsersAction):
            seen = set()
            for sp in action.choices.values():
                if id(sp) not in seen:
                    seen.add(id(sp))
                    yield sp


def _convert(action, raw: str):
    if isinstance(action, argparse._StoreTrueAction):
        return raw.lower() in ("1", "true", "yes", "on")
    if action.type is not None:
        return action.type(raw)
    return raw


def apply_config(parser, argv) -> None:
    """Install config-file values as parser defaults so flags override."""
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config")
    known, _ = pre.parse_known_args(argv)
    if not known.config:
        return
    values = parse_config(known.config)
    known_keys = set()
    for sp in _iter_subparsers(parser):
        defaults = {}
        for action in sp._actions:
            known_keys.add(action.dest)
            if action.dest in values:
                try:
                    defaults[action.dest] = _convert(action, values[action.dest])
                except (ValueError, argparse.ArgumentTypeError) as e:
                    parser.error(f"config key {action.dest}: {e}")
        sp.set_defaults(**defaults)
    unknown = set(values) - known_keys
    if unknown:
        parser.error(f"unknown config keys: {', '.join(sorted(unknown))}")


# ------------------------------------------------------------------ helpers
def _read_sentences(path, prefix: str):
    sentences, rejected = ingest_records(read_tree_file(path),
                                         id_prefix=prefix)
    if rejected:
        print(f"note\t{path}\tdropped {rejected} records with fewer "
              f"than 2 leaves", file=sys.stderr)
    if not sentences:
        raise CorpusError(f"{path}: no usable sentences")
    return sentences


def _restrict_embeddings(table: EmbeddingTable, vocab) -> EmbeddingTable:
    """Keep only the vectors a vocabulary can reach; shrinks containers.

    The unknown-word vector becomes the mean of the kept entries, so
    out-of-vocabulary behavior differs from the full table by design.
    """
    entries = {}
    for tok in sorted(set(vocab)):
        if tok in table.entries:
            entries[tok] = table.entries[tok]
        elif tok.lower() in table.entries:
            entries[tok.lower()] = table.entries[tok.lower()]
    if not entries:
        raise EmbeddingError("no training token appears in the embeddings")
    return EmbeddingTable(dim=table.dim, entries=entries)


def _kv_line(**pairs) -> str:
    return " ".join(f"{k}={v}" for k, v in pairs.items())


# ------------------------------------------------------------------ commands
def _cmd_prepare(args) -> int:
    sentences, rejected = ingest_records(read_tree_file(args.input))
    kept, report = clean_sentences(sentences, args.min_len, args.max_len)
    if args.silver:
        ds = make_silver(kept, args.silver, args.seed)
    else:
        types = sorted({s.info_type for s in kept})
        if len(types) != 1:
            raise CorpusError(
                f"input mixes info types {types}; pass --silver TYPE")
        if not kept:
            raise CorpusError("no sentences survived cleaning")
        ds = Dataset(name=Path(args.input).stem, info_type=types[0],
                     train=kept)
    ds = split(ds, args.splits, args.seed)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for name, sents in ds.splits().items():
        write_tree_file(out / f"{name}.tsv", sents)
    print(_kv_line(kept=len(ds.all_sentences()), rejected=rejected,
                   removed_short=report.removed_short,
                   removed_long=report.removed_long,
                   removed_ambiguous=report.removed_ambiguous,
                   train=len(ds.train), dev=len(ds.dev), test=len(ds.test)))
    return 0


def _build_train_config(args) -> TrainConfig:
    return TrainConfig(
        learning_rates=tuple(args.lr), batch_size=args.batch_size,
        class_weight=args.class_weight, dropout=args.dropout,
        patience=args.patience, max_epochs=args.epochs,
        epsilon=args.epsilon, probe_interval=args.probe_interval,
        seed=args.seed,
    )


def _embedding_table(args, vocab) -> EmbeddingTable:
    if args.embeddings:
        return _restrict_embeddings(load_text_embeddings(args.embeddings),
                                    vocab)
    return from_vocabulary(sorted(set(vocab)), dim=args.dim, seed=args.seed)


def _cmd_train(args) -> int:
    train_sents = _read_sentences(args.train_file, "tr")
    dev_sents = _read_sentences(args.dev_file, "dv") if args.dev_file else []
    info_type = train_sents[0].info_type
    kind = args.model.replace("-", "_")

    if kind in ("infrule", "csan", "keyword_max"):
        store = count_terms(train_sents, n_max=1)
        if kind == "infrule":
            model = mine_inference_rules(store, args.min_support,
                                         args.min_confidence)
            summary = _kv_line(kind=kind, rules=len(model.rules))
        elif kind == "csan":
            model = fit_csan(store, args.alpha)
            summary = _kv_line(kind=kind, alpha=args.alpha,
                               words=len(model.word_pmi))
        else:
            tune_set = dev_sents or train_sents
            model, acc = keyword_max_fit(store, tune_set)
            summary = _kv_line(kind=kind, theta=model.theta,
                               tune_accuracy=f"{acc:.4f}")
        container = ModelContainer(kind=kind, info_type=info_type,
                                   model=model)
    else:
        if not dev_sents:
            raise TrainError("network training needs --dev")
        vocab = [t for s in train_sents + dev_sents for t in s.tokens]
        emb = _embedding_table(args, vocab)
        model0 = init_params(emb.dim, args.hidden, seed=args.seed,
                             activation=args.activation)
        cfg = _build_train_config(args)
        dataset = Dataset(name=Path(args.train_file).stem,
                          info_type=info_type, train=train_sents,
                          dev=dev_sents)
        if kind == "recnn":
            result = train(model0, dataset, cfg, emb)
            container = ModelContainer(kind=kind, info_type=info_type,
                                       model=result.model, embeddings=emb)
            summary = _kv_line(kind=kind, lr=result.chosen_lr,
                               epochs=result.epochs_run,
                               dev_accuracy=f"{result.best_dev_accuracy:.4f}")
        else:
            scfg = SelectiveConfig(k=args.k, delta_mfo_cutoff=args.cutoff,
                                   pretrain_budget=args.pretrain_budget,
                                   seed=args.seed)
            res = selective_train(model0, dataset, cfg, scfg, emb)
            container = ModelContainer(kind=kind, info_type=info_type,
                                       model=res.model, embeddings=emb,
                                       partition=res.partition)
            summary = _kv_line(
                kind=kind,
                pretrain_minibatches=res.report.pretrain_minibatches,
                resume_minibatches=res.report.resume_minibatches,
                kept=res.report.sentences_after,
                dev_accuracy=f"{res.resume.best_dev_accuracy:.4f}")

    save_container(args.out, container)
    print(_kv_line(saved=args.out) + " " + summary)
    return 0


def _predictions(container, sentences):
    return [container_predict(container, list(s.tokens), s.tree)[0]
            for s in sentences]


def _cmd_eval(args) -> int:
    container = load_container(args.model)
    sents = _read_sentences(args.data, "ev")
    report = metrics_report(_predictions(container, sents),
                            [s.label for s in sents])
    print(report.to_json() if args.json else report.to_table())
    return 0


def _cmd_compare(args) -> int:
    ca, cb = load_container(args.model_a), load_container(args.model_b)
    sents = _read_sentences(args.data, "cp")
    truths = [s.label for s in sents]
    preds_a, preds_b = _predictions(ca, sents), _predictions(cb, sents)
    only_a = only_identified_fraction(preds_a, preds_b, truths)
    only_b = only_identified_fraction(preds_b, preds_a, truths)
    shared = sum(1 for pa, pb, t in zip(preds_a, preds_b, truths)
                 if pa != t and pb != t)
    err_a = sum(1 for pa, pb, t in zip(preds_a, preds_b, truths)
                if pa != t and pb == t)
    err_b = sum(1 for pa, pb, t in zip(preds_a, preds_b, truths)
                if pb != t and pa == t)
    if args.json:
        print(json.dumps({
            "only_identified_a": only_a, "only_identified_b": only_b,
            "shared_errors": shared, "errors_only_a": err_a,
            "errors_only_b": err_b, "sentences": len(sents),
        }, indent=2, sort_keys=True))
    else:
        print(f"only_identified_a = {only_a:.4f}")
        print(f"only_identified_b = {only_b:.4f}")
        print(f"shared_errors = {shared}")
        print(f"errors_only_a = {err_a}")
        print(f"errors_only_b = {err_b}")
    return 0


def _cmd_predict(args) -> int:
    if (args.text is None) == (args.input is None):
        raise CorpusError("pass exactly one of --text or --input")
    container = load_container(args.model)
    if args.text is not None:
        document = args.text
    elif args.input == "-":
        document = sys.stdin.read()
    else:
        document = Path(args.input).read_text(encoding="utf-8")
    results = predict_document(container, document)
    if args.json:
        print(json.dumps({"sentences": [r.to_dict() for r in results]}))
    else:
        for r in results:
            print(f"{r.label}\t{r.probability:.6f}\t{r.start}\t{r.end}"
                  f"\t{r.status}\t{r.text}")
    return 0


def _cmd_serve(args) -> int:
    models_dir = args.models_dir or os.environ.get("TABOO_MODELS_DIR")
    if not models_dir:
        raise ContainerError(
            "no models directory: pass --models-dir or set TABOO_MODELS_DIR")
    models = load_models(models_dir)
    samples = load_samples(args.samples)
    server = make_server(models, samples, port=args.port, host=args.host,
                         static_dir=args.static)
    host, port = server.server_address[:2]
    print(f"serving {len(models)} models on http://{host}:{port}",
          flush=True)
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        pass
    finally:
        server.server_close()
    return 0


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    parser = build_parser()
    try:
        apply_config(parser, argv)
        args = parser.parse_args(argv)
        return args.func(args)
    except DATA_ERRORS as e:
        print(f"error\t{type(e).__name__}\t{e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
