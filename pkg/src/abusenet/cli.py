"""Command-line surface: train, evaluate, ablate, baseline, synth.

Every command is reproducible bit-for-bit in its metric values under a fixed
seed; reports echo the full effective configuration with defaults
materialized. Timing fields are informational and excluded from any
reproducibility comparison.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from pathlib import Path

import numpy as np

from . import text as text_mod
from .baseline import TfidfModel, nb_fit, nb_predict, preprocess_baseline
from .data import (
    SYNTH_TASKS,
    SchemaError,
    attach_network_features,
    load_corpus,
    write_corpus,
)
from .evaluation import (
    DEFAULT_ABLATION_MASKS,
    MetricsReport,
    build_and_fit,
    encode_fold,
    evaluate_model,
    run_ablation,
    run_cv,
    stratified_kfold,
)
from .features import parse_mask
from .graph import SocialGraph
from .metrics import prf1, roc_auc
from .model import (
    CheckpointMeta,
    ModelConfig,
    load_checkpoint,
    parameter_count,
    save_checkpoint,
)
from .training import EncodedDataset, TrainingConfig

STRATEGY_FLAGS = {"naive": "naive", "transfer": "transfer",
                  "transfer-ft": "transfer_ft", "interleaved": "interleaved"}


def _add_common_io(p: argparse.ArgumentParser) -> None:
    p.add_argument("--dataset", required=True, help="delimited dataset file")
    p.add_argument("--schema", required=True, help="JSON schema descriptor")


def _add_training_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--embeddings", default=None, help="pretrained embedding text file")
    p.add_argument("--strategy", default="interleaved", choices=sorted(STRATEGY_FLAGS))
    p.add_argument("--mask", default="WV+TF+UF+NF", help="feature groups, e.g. WV+TF+UF")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--batch-size", type=int, default=512)
    p.add_argument("--max-epochs", type=int, default=100)
    p.add_argument("--patience", type=int, default=10)
    p.add_argument("--validation-fraction", type=float, default=0.1)
    p.add_argument("--learning-rate", type=float, default=1e-3)
    p.add_argument("--folds", type=int, default=10)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--embed-dim", type=int, default=200)
    p.add_argument("--units", type=int, default=128)
    p.add_argument("--metadata-sizes", default="512,245,128,64,32",
                   help="comma list of dense widths (swap 245 for 256 here if wanted)")
    p.add_argument("--fusion-dim", type=int, default=128)
    p.add_argument("--recurrent-dropout", type=float, default=0.5)
    p.add_argument("--attention-threshold", type=int, default=100)
    p.add_argument("--edges", default=None, help="edge-list file for NF enrichment")
    p.add_argument("--nodes", default=None, help="node-attribute file for NF enrichment")
    p.add_argument("--user-column", default=None, help="column naming the posting user")


def _configs(args) -> tuple[TrainingConfig, ModelConfig]:
    training = TrainingConfig(
        strategy=STRATEGY_FLAGS[args.strategy],
        batch_size=args.batch_size,
        max_epochs=args.max_epochs,
        patience=args.patience,
        learning_rate=args.learning_rate,
        validation_fraction=args.validation_fraction,
        seed=args.seed,
    )
    model = ModelConfig(
        embed_dim=args.embed_dim,
        units=args.units,
        recurrent_dropout=args.recurrent_dropout,
        hidden=tuple(int(x) for x in args.metadata_sizes.split(",") if x),
        fusion_dim=args.fusion_dim,
        attention_threshold=args.attention_threshold,
    )
    return training, model


def _load(args):
    corpus = load_corpus(args.dataset, args.schema)
    if args.edges:
        if not args.user_column:
            raise SchemaError("--edges needs --user-column to join samples to nodes")
        graph = SocialGraph.from_files(args.edges, args.nodes)
        corpus = attach_network_features(corpus, graph, args.user_column)
    return corpus


def _write_json(path, payload) -> None:
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _echo_config(args, training: TrainingConfig, model_cfg: ModelConfig) -> dict:
    return {
        "training": training.to_dict(),
        "model": model_cfg.to_dict(),
        "mask": "+".join(sorted(parse_mask(args.mask))),
        "folds": args.folds,
        "workers": args.workers,
        "embeddings": args.embeddings,
        "dataset": str(args.dataset),
        "schema": str(args.schema),
    }


def cmd_train(args) -> int:
    training, model_cfg = _configs(args)
    corpus = _load(args)
    t0 = time.monotonic()
    report = run_cv(corpus, training, model_cfg, mask=args.mask, n_folds=args.folds,
                    embeddings_path=args.embeddings, workers=args.workers)
    cv_seconds = time.monotonic() - t0

    # final model on the full corpus for the checkpoint
    t1 = time.monotonic()
    all_idx = np.arange(len(corpus))
    train_all, _, artifacts = encode_fold(corpus, all_idx, all_idx[:0], args.mask,
                                          embeddings_path=args.embeddings,
                                          embed_dim=model_cfg.embed_dim, seed=training.seed)
    model, final_history = build_and_fit(train_all, training, model_cfg, artifacts)
    fit_seconds = time.monotonic() - t1

    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    ckpt_path = out_dir / "model.ckpt"
    vocab = artifacts["vocab"]
    pipeline = artifacts["pipeline"]
    save_checkpoint(ckpt_path, model, CheckpointMeta(
        classes=corpus.classes,
        kind=model.kind,
        config=model_cfg,
        seq_len=None if artifacts["spec"] is None else artifacts["spec"].seq_len,
        vocab_tokens=[] if vocab is None else vocab.tokens(),
        feature_dim=None if train_all.meta is None else int(train_all.meta.shape[1]),
        schema=artifacts["schema"],
        pipeline=None if pipeline is None else pipeline.to_config(),
        mask=sorted(artifacts["mask"]),
        extra={"strategy": training.strategy, "seed": training.seed},
    ))

    payload = {
        "command": "train",
        "model": model.kind,
        "config": _echo_config(args, training, model_cfg),
        "dataset_summary": {
            "samples": len(corpus),
            "classes": corpus.classes,
            "class_counts": np.bincount(corpus.labels, minlength=len(corpus.classes)).tolist(),
        },
        "cv": report.to_dict(),
        "final_fit": final_history.to_dict(),
        "parameter_count": {
            "trainable": parameter_count(model, include_embeddings=True),
            "trainable_excluding_embeddings": parameter_count(model, include_embeddings=False),
        },
        "checkpoint": str(ckpt_path),
        "timing": {"cv_seconds": cv_seconds, "final_fit_seconds": fit_seconds},
    }
    _write_json(out_dir / "report.json", payload)
    for fold in report.folds:
        print(f"fold {fold['fold']}: auc={fold['auc']:.4f} acc={fold['accuracy']:.4f} f1={fold['f1']:.4f}")
    mean = report.mean
    print(f"mean: auc={mean['auc']:.4f} acc={mean['accuracy']:.4f} f1={mean['f1']:.4f}")
    print(f"wrote {out_dir / 'report.json'} and {ckpt_path}")
    return 0


def cmd_evaluate(args) -> int:
    model, meta = load_checkpoint(args.checkpoint)
    corpus = load_corpus(args.dataset, args.schema)
    if corpus.classes != meta.classes:
        raise SchemaError(f"class lists differ: checkpoint {meta.classes} vs dataset {corpus.classes}")

    text_block = None
    if meta.seq_len is not None:
        vocab = text_mod.Vocabulary.from_tokens(meta.vocab_tokens)
        spec = text_mod.SequenceSpec(meta.seq_len)
        text_block = text_mod.encode_corpus(corpus.tokenized(), vocab, spec)

    meta_block = None
    if meta.pipeline is not None:
        from .features import FeaturePipeline, assemble

        pipeline = FeaturePipeline.from_config(meta.pipeline)
        header = set(corpus.records[0]) if corpus.records else set()
        required = set(pipeline.columns) | set(pipeline.affect.values())
        missing = sorted(required - header)
        if missing:
            raise SchemaError(
                f"dataset is missing columns required by the checkpoint: {missing}; "
                f"dataset provides: {sorted(header)}")
        table = pipeline.transform(corpus.records, corpus.texts)
        table, _ = assemble(table, set(meta.mask) - {"WV"})
        got_schema = [(c.name, c.group) for c in table.schema]
        if got_schema != list(meta.schema):
            missing = [c for c in meta.schema if c not in got_schema]
            extra = [c for c in got_schema if c not in meta.schema]
            raise SchemaError(
                f"feature schema mismatch; missing from dataset: {missing}; unexpected: {extra}")
        meta_block = table.values

    payload = {"command": "evaluate", "checkpoint": str(args.checkpoint),
               "model": meta.kind, "samples": len(corpus)}
    if corpus.labels is not None:
        data = EncodedDataset(labels=corpus.labels, classes=corpus.classes,
                              text=text_block, meta=meta_block)
        payload["metrics"] = evaluate_model(model, data, batch_size=512)
        print(" ".join(f"{k}={v:.4f}" for k, v in payload["metrics"].items()))
    else:
        # scores-only mode: no label column in the dataset
        dummy = np.zeros(len(corpus), dtype=np.int64)
        data = EncodedDataset(labels=dummy, classes=corpus.classes,
                              text=text_block, meta=meta_block)
        from .training import predict_probs

        probs = predict_probs(model, data, batch_size=512)
        payload["scores"] = {cid: probs[i].tolist() for i, cid in enumerate(corpus.ids)}
        print(f"scored {len(corpus)} samples (no labels present)")
    if args.out:
        _write_json(args.out, payload)
    return 0


def cmd_ablate(args) -> int:
    training, model_cfg = _configs(args)
    corpus = _load(args)
    if args.masks:
        masks = [parse_mask(m) for m in args.masks.split(";") if m.strip()]
    else:
        masks = list(DEFAULT_ABLATION_MASKS)
    t0 = time.monotonic()
    rows = run_ablation(corpus, masks, training, model_cfg, n_folds=args.folds,
                        embeddings_path=args.embeddings, workers=args.workers)
    payload = {
        "command": "ablate",
        "config": _echo_config(args, training, model_cfg),
        "rows": rows,
        "timing": {"seconds": time.monotonic() - t0},
    }
    if args.out:
        _write_json(args.out, payload)
    width = max(len(r["mask"]) for r in rows)
    for r in rows:
        print(f"{r['mask']:<{width}}  auc={r['auc']:.4f}")
    return 0


def cmd_baseline(args) -> int:
    corpus = load_corpus(args.dataset, args.schema)
    if corpus.labels is None:
        raise SchemaError("baseline needs labels")
    t0 = time.monotonic()
    folds = stratified_kfold(corpus.labels, args.folds, args.seed)
    docs = [preprocess_baseline(t) for t in corpus.texts]
    report = MetricsReport()
    for i, test_idx in enumerate(folds):
        train_idx = np.sort(np.concatenate([folds[j] for j in range(len(folds)) if j != i]))
        tfidf = TfidfModel(top_k=args.top_k)
        train_matrix = tfidf.fit_transform([docs[j] for j in train_idx])
        test_matrix = tfidf.transform([docs[j] for j in test_idx])
        nb = nb_fit(train_matrix, corpus.labels[train_idx], n_classes=len(corpus.classes))
        preds, posteriors = nb_predict(nb, test_matrix)
        labels = corpus.labels[test_idx]
        quality = prf1(preds, labels, len(corpus.classes))
        report.folds.append({
            "fold": i,
            "auc": float(roc_auc(posteriors, labels)),
            "accuracy": quality["accuracy"],
            "precision": quality["precision"],
            "recall": quality["recall"],
            "f1": quality["f1"],
        })
    payload = {
        "command": "baseline",
        "model": "naive-bayes-tfidf",
        "config": {"top_k": args.top_k, "folds": args.folds, "seed": args.seed,
                   "dataset": str(args.dataset), "schema": str(args.schema)},
        "cv": report.to_dict(),
        "timing": {"seconds": time.monotonic() - t0},
    }
    if args.out:
        _write_json(args.out, payload)
    mean = report.mean
    print(f"naive-bayes-tfidf mean: auc={mean['auc']:.4f} acc={mean['accuracy']:.4f} f1={mean['f1']:.4f}")
    return 0


def cmd_synth(args) -> int:
    maker = SYNTH_TASKS[args.task]
    corpus = maker(n=args.samples, noise=args.noise, seed=args.seed)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    dataset = out_dir / "dataset.csv"
    schema = out_dir / "schema.json"
    write_corpus(corpus, dataset, schema)
    print(f"wrote {dataset} and {schema} ({len(corpus)} samples, task={args.task})")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="abusenet",
                                     description="two-path abusive-behavior classifier")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="cross-validate a strategy and write a checkpoint")
    _add_common_io(p)
    _add_training_flags(p)
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("evaluate", help="score a dataset with a checkpoint")
    p.add_argument("--checkpoint", required=True)
    _add_common_io(p)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("ablate", help="feature-group ablation grid")
    _add_common_io(p)
    _add_training_flags(p)
    p.add_argument("--masks", default=None, help="semicolon-separated masks; default: all 15")
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_ablate)

    p = sub.add_parser("baseline", help="naive bayes + tf-idf reference")
    _add_common_io(p)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--folds", type=int, default=10)
    p.add_argument("--top-k", type=int, default=10000)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_baseline)

    p = sub.add_parser("synth", help="generate a synthetic fusion dataset")
    p.add_argument("--task", default="xor", choices=sorted(SYNTH_TASKS))
    p.add_argument("--samples", type=int, default=5000)
    p.add_argument("--noise", type=float, default=0.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_synth)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
