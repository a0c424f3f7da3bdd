"""Command-line front end: synth / train / tune / predict / evaluate.

Exit codes: 0 on success, 1 on usage errors, 2 on data or config errors.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from pathlib import Path

from .corpus import (
    load_corpus,
    load_gold,
    load_ner_annotations,
    dictionary_ner,
    serialize_annotations,
    serialize_corpus,
    serialize_gold,
    validate_gold,
)
from .errors import DataError
from .model_io import atomic_write_text, load_model, save_model
from .pipeline import (
    config_to_dict,
    demo_config_dict,
    load_config,
    load_gazetteers,
    load_ner_lexicon,
    resolve_spans,
    train_pipeline,
)
from .report import format_eval_table, write_eval_outputs, write_tune_outputs
from .schema import GAZETTEER_FILES, default_schema, packaged_gazetteer_text, with_family_weights
from .synth import generate_synthetic
from .tuner import grid_search_weights, micro_f1


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # usage errors exit 1, not argparse's 2
        raise _UsageError(f"{self.prog}: error: {message}\n{self.format_usage().rstrip()}")


def build_parser() -> _Parser:
    parser = _Parser(prog="cohortsel", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p_synth = sub.add_parser("synth", help="generate a synthetic corpus + labels")
    p_synth.add_argument("--seed", type=int, default=42)
    p_synth.add_argument("--docs", type=int, default=500)
    p_synth.add_argument("--out", required=True, help="output directory")
    p_synth.set_defaults(func=cmd_synth)

    p_train = sub.add_parser("train", help="fit the full pipeline and save a model")
    p_train.add_argument("--config", required=True)
    p_train.add_argument("--model", help="override the config's model output path")
    p_train.set_defaults(func=cmd_train)

    p_tune = sub.add_parser("tune", help="cross-validated weight search")
    p_tune.add_argument("--config", required=True)
    p_tune.add_argument("--folds", type=int, help="override config folds (default 5)")
    p_tune.add_argument("--out", required=True, help="report output directory")
    p_tune.set_defaults(func=cmd_tune)

    p_predict = sub.add_parser("predict", help="predict decisions with a saved model")
    p_predict.add_argument("--model", required=True)
    p_predict.add_argument("--corpus", required=True)
    p_predict.add_argument("--annotations")
    p_predict.add_argument("--pred", required=True, help="predictions output path")
    p_predict.set_defaults(func=cmd_predict)

    p_eval = sub.add_parser("evaluate", help="score predictions against gold labels")
    p_eval.add_argument("--gold", required=True)
    p_eval.add_argument("--pred", required=True)
    p_eval.add_argument("--out", help="directory for report JSON/TSV/figure")
    p_eval.set_defaults(func=cmd_evaluate)
    return parser


def cmd_synth(args) -> int:
    out_dir = Path(args.out)
    schema = default_schema()
    docs, spans_by_doc, gold = generate_synthetic(args.seed, args.docs, schema)

    out_dir.mkdir(parents=True, exist_ok=True)
    atomic_write_text(out_dir / "corpus.jsonl", serialize_corpus(docs))
    atomic_write_text(out_dir / "annotations.tsv",
                      serialize_annotations(spans_by_doc, [d.id for d in docs]))
    atomic_write_text(out_dir / "gold.json", serialize_gold(gold))
    for filename in sorted(set(GAZETTEER_FILES.values())):
        atomic_write_text(out_dir / "gazetteers" / filename,
                          packaged_gazetteer_text(filename))
    atomic_write_text(
        out_dir / "config.json",
        json.dumps(demo_config_dict(args.seed), sort_keys=True, indent=2) + "\n",
    )
    print(f"wrote {len(docs)} documents, annotations, gold labels, gazetteers, "
          f"and config.json under {out_dir}")
    return 0


def cmd_train(args) -> int:
    cfg = load_config(args.config)
    model_path = Path(args.model) if args.model else cfg.model_path
    if model_path is None:
        raise DataError("no model output path: pass --model or set model_path in the config")
    started = time.monotonic()
    trained = train_pipeline(cfg)
    save_model(trained, model_path)
    elapsed = time.monotonic() - started
    print(f"trained {len(trained.labels)} labels -> {model_path} ({elapsed:.1f}s)")
    return 0


def cmd_tune(args) -> int:
    cfg = load_config(args.config)
    folds = args.folds if args.folds is not None else cfg.folds
    if cfg.gold_path is None:
        raise DataError("config.paths.gold is required for tuning")
    docs = load_corpus(cfg.corpus_path)
    gold = load_gold(cfg.gold_path)
    validate_gold(gold, docs, cfg.schema.labels)
    spans_by_doc = resolve_spans(docs, cfg.annotations_path,
                                 load_ner_lexicon(cfg.ner_lexicons))
    gazetteers = load_gazetteers(cfg.schema, cfg.base_dir)

    result = grid_search_weights(docs, spans_by_doc, gold, cfg.schema, gazetteers,
                                 cfg.hyper, k=folds, seed=cfg.seed)

    out_dir = Path(args.out)
    written = write_tune_outputs(result.report, out_dir)

    cfg.ensemble_weights = result.component_weights
    cfg.schema = with_family_weights(cfg.schema, result.family_weights)
    tuned = config_to_dict(cfg, base_dir=out_dir)
    tuned_path = out_dir / "tuned_config.json"
    atomic_write_text(tuned_path, json.dumps(tuned, sort_keys=True, indent=2) + "\n")

    micro = result.report["cv_metrics"]["micro_f1"]
    print(f"selected ensemble weights {result.component_weights} "
          f"(pooled out-of-fold micro-F1 {micro:.4f})")
    for path in written + [tuned_path]:
        print(f"wrote {path}")
    return 0


def cmd_predict(args) -> int:
    trained = load_model(args.model)
    docs = load_corpus(args.corpus)
    if args.annotations:
        spans_by_doc = load_ner_annotations(args.annotations, docs)
    elif trained.ner_lexicon:
        spans_by_doc = {doc.id: dictionary_ner(doc, trained.ner_lexicon) for doc in docs}
    else:
        spans_by_doc = {doc.id: [] for doc in docs}
    predictions = trained.predict_corpus(docs, spans_by_doc)
    atomic_write_text(args.pred, serialize_gold(predictions))
    print(f"predicted {len(trained.schema.labels)} labels for {len(docs)} documents "
          f"-> {args.pred}")
    return 0


def cmd_evaluate(args) -> int:
    gold = load_gold(args.gold)
    pred = load_gold(args.pred)
    report = micro_f1(gold, pred)
    print(format_eval_table(report))
    if args.out:
        for path in write_eval_outputs(report, Path(args.out)):
            print(f"wrote {path}")
    return 0


def run_cli(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageError as exc:
        print(exc, file=sys.stderr)
        return 1
    except SystemExit as exc:  # --help and friends
        return int(exc.code or 0)
    try:
        return args.func(args)
    except DataError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


def main() -> None:
    sys.exit(run_cli())


if __name__ == "__main__":
    main()
