"""Cross-validation and the feature-group ablation runner.

Each fold rebuilds the whole pipeline from its training split: vocabulary
(with hapax removal), sequence length (95th percentile), categorical
encoders and, if requested, pretrained embeddings. Folds are independently
seeded, so results do not depend on execution order or worker count.
"""

from __future__ import annotations

import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from itertools import combinations

import numpy as np

from . import text as text_mod
from .data import Corpus
from .features import FeaturePipeline, assemble, parse_mask
from .metrics import prf1, roc_auc
from .model import ModelConfig, build_combined, build_metadata_path, build_text_path
from .tensor import ContractError
from .training import (
    EncodedDataset,
    TrainingConfig,
    fit,
    fit_interleaved,
    fit_naive,
    fit_transfer,
    predict_probs,
)
from .utils import derive_rng

METRIC_NAMES = ("auc", "accuracy", "precision", "recall", "f1")

# all nonempty subsets of {WV, TF, UF, NF}, smallest first: the default
# ablation grid (15 rows)
DEFAULT_ABLATION_MASKS = tuple(
    frozenset(c)
    for size in range(1, 5)
    for c in combinations(("WV", "TF", "UF", "NF"), size)
)


@dataclass
class MetricsReport:
    folds: list[dict] = field(default_factory=list)
    histories: list[dict] = field(default_factory=list)

    @property
    def mean(self) -> dict:
        return {name: float(np.mean([f[name] for f in self.folds])) for name in METRIC_NAMES}

    def to_dict(self) -> dict:
        return {"folds": self.folds, "mean": self.mean}


def stratified_kfold(labels: np.ndarray, k: int, seed: int) -> list[np.ndarray]:
    """k disjoint folds covering every index, class proportions within one."""
    labels = np.asarray(labels)
    counts = np.bincount(labels)
    low = counts[counts > 0]
    if low.min() < k:
        warnings.warn(
            f"some class has only {int(low.min())} samples for {k} folds; "
            "stratification degrades to best effort", stacklevel=2)
    rng = derive_rng(seed, "kfold")
    buckets: list[list[int]] = [[] for _ in range(k)]
    for cls in np.unique(labels):
        idx = np.flatnonzero(labels == cls)
        idx = idx[rng.permutation(idx.size)]
        for j, sample in enumerate(idx):
            buckets[j % k].append(int(sample))
    return [np.sort(np.array(b, dtype=np.int64)) for b in buckets]


def encode_fold(corpus: Corpus, train_idx: np.ndarray, test_idx: np.ndarray,
                mask, embeddings_path=None, embed_dim: int = 200, seed: int = 0):
    """Fit the text and feature pipelines on the training split and encode both.

    Returns (train, test, artifacts); artifacts carries vocab, spec, pipeline,
    schema and optionally a pretrained embedding layer for the model builder.
    """
    mask = parse_mask(mask)
    tokens = corpus.tokenized()
    train_tokens = [tokens[i] for i in train_idx]

    use_text = "WV" in mask
    vocab = spec = None
    text_all = None
    embedding = None
    if use_text:
        vocab = text_mod.Vocabulary.build(train_tokens)
        spec = text_mod.choose_seq_len([len(t) for t in train_tokens])
        text_all = text_mod.encode_corpus(tokens, vocab, spec)
        if embeddings_path is not None:
            embedding = text_mod.load_embeddings(embeddings_path, vocab, dim=embed_dim, seed=seed)

    meta_groups = mask - {"WV"}
    meta_all = None
    schema = []
    pipeline = None
    if meta_groups:
        pipeline = FeaturePipeline(corpus.columns, corpus.affect)
        pipeline.fit([corpus.records[i] for i in train_idx])
        table = pipeline.transform(corpus.records, corpus.texts)
        table, _ = assemble(table, meta_groups)
        meta_all = table.values
        schema = [(c.name, c.group) for c in table.schema]

    def take(idx):
        return EncodedDataset(
            labels=corpus.labels[idx],
            classes=corpus.classes,
            text=None if text_all is None else text_all[idx],
            meta=None if meta_all is None else meta_all[idx],
        )

    artifacts = {
        "vocab": vocab,
        "spec": spec,
        "pipeline": pipeline,
        "schema": schema,
        "embedding": embedding,
        "mask": mask,
    }
    return take(train_idx), take(test_idx), artifacts


def build_and_fit(train: EncodedDataset, config: TrainingConfig, model_cfg: ModelConfig,
                  artifacts: dict, step_callback=None):
    """Build the model form the mask calls for and train it with the strategy."""
    classes = train.classes
    seed = config.seed
    has_text = train.text is not None
    has_meta = train.meta is not None

    if has_text and not has_meta:
        model = build_text_path(artifacts["vocab"], artifacts["spec"], classes,
                                config=model_cfg, rng=derive_rng(seed, "init", "text"),
                                embedding=artifacts.get("embedding"))
        return model, fit(model, train, config, stream="text-only", step_callback=step_callback)
    if has_meta and not has_text:
        model = build_metadata_path(train.meta.shape[1], classes, config=model_cfg,
                                    rng=derive_rng(seed, "init", "meta"))
        return model, fit(model, train, config, stream="meta-only", step_callback=step_callback)

    text_model = build_text_path(artifacts["vocab"], artifacts["spec"], classes,
                                 config=model_cfg, rng=derive_rng(seed, "init", "text"),
                                 embedding=artifacts.get("embedding"))
    meta_model = build_metadata_path(train.meta.shape[1], classes, config=model_cfg,
                                     rng=derive_rng(seed, "init", "meta"))
    if config.strategy in ("transfer", "transfer_ft"):
        return fit_transfer(text_model, meta_model, train, config,
                            fine_tune=config.strategy == "transfer_ft",
                            fusion_callback=step_callback)
    combined = build_combined(text_model, meta_model, rng=derive_rng(seed, "init", "head"))
    if config.strategy == "interleaved":
        return combined, fit_interleaved(combined, train, config, step_callback=step_callback)
    return combined, fit_naive(combined, train, config, step_callback=step_callback)


def evaluate_model(model, data: EncodedDataset, batch_size: int = 512) -> dict:
    probs = predict_probs(model, data, batch_size)
    preds = probs.argmax(axis=1)
    quality = prf1(preds, data.labels, len(data.classes))
    return {
        "auc": float(roc_auc(probs, data.labels)),
        "accuracy": quality["accuracy"],
        "precision": quality["precision"],
        "recall": quality["recall"],
        "f1": quality["f1"],
    }


def _run_fold(args) -> tuple[int, dict, dict]:
    (corpus, config, model_cfg, mask, fold_id, folds, embeddings_path) = args
    test_idx = folds[fold_id]
    train_idx = np.sort(np.concatenate([folds[j] for j in range(len(folds)) if j != fold_id]))
    fold_config = TrainingConfig(**{**config.to_dict(), "seed": int(derive_rng(
        config.seed, "fold", fold_id).integers(0, 2**31 - 1))})
    train, test, artifacts = encode_fold(corpus, train_idx, test_idx, mask,
                                         embeddings_path=embeddings_path,
                                         embed_dim=model_cfg.embed_dim,
                                         seed=fold_config.seed)
    model, history = build_and_fit(train, fold_config, model_cfg, artifacts)
    return fold_id, evaluate_model(model, test, config.batch_size), history.to_dict()


def run_cv(corpus: Corpus, config: TrainingConfig, model_cfg: ModelConfig | None = None,
           mask="WV+TF+UF+NF", n_folds: int = 10, embeddings_path=None,
           workers: int = 1) -> MetricsReport:
    """Stratified k-fold cross validation with a fresh model per fold."""
    if corpus.labels is None:
        raise ContractError("cross validation needs labels")
    model_cfg = model_cfg or ModelConfig()
    mask = parse_mask(mask)
    folds = stratified_kfold(corpus.labels, n_folds, config.seed)
    jobs = [(corpus, config, model_cfg, mask, i, folds, embeddings_path)
            for i in range(n_folds)]
    results: list[tuple[int, dict, dict]] = []
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_run_fold, jobs))
    else:
        results = [_run_fold(j) for j in jobs]
    results.sort(key=lambda r: r[0])
    report = MetricsReport()
    for fold_id, metrics, history in results:
        report.folds.append({"fold": fold_id, **metrics})
        report.histories.append(history)
    return report


def run_ablation(corpus: Corpus, masks, config: TrainingConfig,
                 model_cfg: ModelConfig | None = None, n_folds: int = 10,
                 embeddings_path=None, workers: int = 1) -> list[dict]:
    """One cross-validated run per feature-group mask.

    The model form follows the mask: text-only for {WV}, metadata-only for
    masks without WV, combined otherwise. Rows come back sorted by mean AUC
    ascending.
    """
    rows = []
    for mask in masks:
        mask = parse_mask(mask)
        report = run_cv(corpus, config, model_cfg, mask=mask, n_folds=n_folds,
                        embeddings_path=embeddings_path, workers=workers)
        rows.append({
            "mask": "+".join(sorted(mask, key=("WV", "TF", "UF", "NF").index)),
            "auc": report.mean["auc"],
            "metrics": report.mean,
        })
    rows.sort(key=lambda r: r["auc"])
    return rows
