"""Loss, optimizer, early stopping, and the four ways to train the combined model.

Strategies:
  naive        - one optimizer over every parameter, whole network at once.
  transfer     - pretrain each path standalone, strip the softmax layers,
                 freeze the paths, train a fresh fusion head.
  transfer_ft  - same, but the paths stay trainable during fusion.
  interleaved  - train the whole network while alternating which path the
                 optimizer may touch per mini-batch: two views share one
                 parameter store, view A freezes the text path, view B the
                 metadata path, and view A is active when
                 (batch_number + epoch_number) is even. The head updates
                 every step. The loss always flows through the whole network.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .model import ClassifierModel, build_combined
from .tensor import ContractError, Parameter, Tape, Tensor, op_output, _accum
from .utils import batch_slices, derive_rng

STRATEGIES = ("naive", "transfer", "transfer_ft", "interleaved")

LOSS_FLOOR = 1e-12


class DegenerateLabelsError(ValueError):
    """Training data carries fewer than two classes."""


@dataclass
class TrainingConfig:
    strategy: str = "interleaved"
    batch_size: int = 512
    max_epochs: int = 100
    patience: int = 10
    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    validation_fraction: float = 0.1
    seed: int = 0

    def __post_init__(self):
        if self.strategy not in STRATEGIES:
            raise ContractError(f"unknown strategy {self.strategy!r}; pick from {STRATEGIES}")
        if not 0 <= self.patience < self.max_epochs:
            raise ContractError(f"patience must sit in [0, max_epochs), got {self.patience}")
        if self.batch_size < 1:
            raise ContractError(f"batch_size must be >= 1, got {self.batch_size}")

    def to_dict(self) -> dict:
        return {
            "strategy": self.strategy,
            "batch_size": self.batch_size,
            "max_epochs": self.max_epochs,
            "patience": self.patience,
            "learning_rate": self.learning_rate,
            "beta1": self.beta1,
            "beta2": self.beta2,
            "epsilon": self.epsilon,
            "validation_fraction": self.validation_fraction,
            "seed": self.seed,
        }


@dataclass
class EncodedDataset:
    """Model-ready arrays; either input block may be absent."""

    labels: np.ndarray
    classes: list[str]
    text: np.ndarray | None = None
    meta: np.ndarray | None = None

    def __post_init__(self):
        self.labels = np.asarray(self.labels, dtype=np.int64)
        n = self.labels.shape[0]
        if self.text is not None and self.text.shape[0] != n:
            raise ContractError("text block does not align with labels")
        if self.meta is not None and self.meta.shape[0] != n:
            raise ContractError("metadata block does not align with labels")
        if self.text is None and self.meta is None:
            raise ContractError("dataset needs at least one input block")

    def __len__(self) -> int:
        return self.labels.shape[0]

    def subset(self, idx) -> "EncodedDataset":
        return EncodedDataset(
            labels=self.labels[idx],
            classes=self.classes,
            text=None if self.text is None else self.text[idx],
            meta=None if self.meta is None else self.meta[idx],
        )


def cross_entropy(pred: Tensor, labels) -> Tensor:
    """Mean over the batch of -log(pred[label]), with pred clamped at 1e-12."""
    labels = np.asarray(labels)
    if pred.data.ndim != 2:
        raise ContractError(f"cross_entropy expects [batch, classes] probabilities, got {pred.shape}")
    n, c = pred.shape
    if labels.shape != (n,):
        raise ContractError(f"labels shape {labels.shape} does not match batch {n}")
    if labels.size and (labels.min() < 0 or labels.max() >= c):
        bad = labels[(labels < 0) | (labels >= c)][0]
        raise IndexError(f"label {bad} out of range for {c} classes")
    rows = np.arange(n)
    picked = pred.data[rows, labels]
    clamped = np.maximum(picked, LOSS_FLOOR)
    value = np.asarray(-np.log(clamped).mean(), dtype=pred.data.dtype)

    def back(g):
        if not pred.requires_grad:
            return
        gp = np.zeros_like(pred.data)
        live = picked >= LOSS_FLOOR  # no gradient through the clamp floor
        gp[rows[live], labels[live]] = -(g / n) / clamped[live]
        _accum(pred, gp)

    return op_output(value, (pred,), back)


def cross_entropy_value(probs: np.ndarray, labels: np.ndarray) -> float:
    """Plain-array version of the loss for validation sweeps."""
    rows = np.arange(labels.shape[0])
    picked = np.maximum(probs[rows, labels], LOSS_FLOOR)
    return float(-np.log(picked).mean())


class Adam:
    """Adam with bias correction; skips non-trainable parameters entirely."""

    def __init__(self, learning_rate: float = 1e-3, beta1: float = 0.9,
                 beta2: float = 0.999, epsilon: float = 1e-8):
        self.lr = learning_rate
        self.beta1 = beta1
        self.beta2 = beta2
        self.epsilon = epsilon
        self.t = 0
        self._m: dict[str, np.ndarray] = {}
        self._v: dict[str, np.ndarray] = {}

    @classmethod
    def from_config(cls, config: TrainingConfig) -> "Adam":
        return cls(config.learning_rate, config.beta1, config.beta2, config.epsilon)

    def step(self, params: list[Parameter], allowed_tags: set[str] | None = None) -> None:
        self.t += 1
        b1, b2 = self.beta1, self.beta2
        bias1 = 1.0 - b1 ** self.t
        bias2 = 1.0 - b2 ** self.t
        for p in params:
            if not p.trainable:
                continue
            if allowed_tags is not None and p.tag not in allowed_tags:
                continue
            g = p.tensor.grad
            if g is None:
                continue
            if g.shape != p.data.shape:
                raise ContractError(f"gradient shape {g.shape} mismatches {p.name} {p.data.shape}")
            m = self._m.get(p.name)
            if m is None:
                m = self._m[p.name] = np.zeros_like(p.data)
            v = self._v.get(p.name)
            if v is None:
                v = self._v[p.name] = np.zeros_like(p.data)
            m *= b1
            m += (1.0 - b1) * g
            v *= b2
            v += (1.0 - b2) * (g * g)
            update = (self.lr * (m / bias1)) / (np.sqrt(v / bias2) + self.epsilon)
            p.tensor.data -= update.astype(p.data.dtype, copy=False)


class EarlyStopping:
    """Stop after `patience` consecutive epochs without a validation-loss drop."""

    def __init__(self, patience: int):
        self.patience = patience
        self.best = np.inf
        self.best_epoch = -1
        self.bad_epochs = 0

    def update(self, epoch: int, loss: float) -> bool:
        """Record one epoch; returns True when training should stop."""
        if loss < self.best:
            self.best = loss
            self.best_epoch = epoch
            self.bad_epochs = 0
            return False
        self.bad_epochs += 1
        return self.bad_epochs >= self.patience


@dataclass
class History:
    train_loss: list[float] = field(default_factory=list)
    val_loss: list[float] = field(default_factory=list)
    best_epoch: int = -1
    epochs_run: int = 0
    val_indices: np.ndarray | None = None
    step_trace: list[dict] = field(default_factory=list)
    stages: dict[str, "History"] = field(default_factory=dict)

    def best_val_loss(self) -> float:
        return min(self.val_loss) if self.val_loss else np.inf

    def to_dict(self) -> dict:
        out = {
            "train_loss": self.train_loss,
            "val_loss": self.val_loss,
            "best_epoch": self.best_epoch,
            "epochs_run": self.epochs_run,
        }
        if self.stages:
            out["stages"] = {k: v.to_dict() for k, v in self.stages.items()}
        return out


def stratified_split(labels: np.ndarray, fraction: float, rng: np.random.Generator):
    """(train_idx, held_idx) with per-class proportions preserved."""
    labels = np.asarray(labels)
    held: list[int] = []
    for cls in np.unique(labels):
        idx = np.flatnonzero(labels == cls)
        idx = idx[rng.permutation(idx.size)]
        k = max(1, int(round(idx.size * fraction))) if idx.size > 1 else 0
        held.extend(idx[:k])
    held_arr = np.sort(np.array(held, dtype=np.int64))
    mask = np.ones(labels.size, dtype=bool)
    mask[held_arr] = False
    return np.flatnonzero(mask), held_arr


def predict_probs(model: ClassifierModel, data: EncodedDataset, batch_size: int = 512) -> np.ndarray:
    """Inference-mode class probabilities for a whole dataset."""
    chunks = []
    for sl in batch_slices(len(data), batch_size):
        text = None if data.text is None else data.text[sl]
        meta = None if data.meta is None else data.meta[sl]
        chunks.append(model.forward(text, meta, train=False).data.copy())
    return np.concatenate(chunks, axis=0)


def evaluate_loss(model: ClassifierModel, data: EncodedDataset, batch_size: int = 512) -> float:
    return cross_entropy_value(predict_probs(model, data, batch_size), data.labels)


def _interleaved_schedule(epoch: int, batch_number: int):
    """Parity rule: even (batch + epoch) -> view A, whose text path is frozen."""
    if (batch_number + epoch) % 2 == 0:
        return "A", {"metadata", "head"}
    return "B", {"text", "head"}


class InterleavedViews:
    """Two trainability views over one shared parameter store.

    View A freezes the text path, view B the metadata path. Because the
    store is shared, the "copy weights to the unused model" step of the
    two-model formulation is a no-op; ``synchronized`` still asserts it.
    """

    FROZEN = {"A": "text", "B": "metadata"}

    def __init__(self, model: ClassifierModel):
        self.model = model

    def active(self, epoch: int, batch_number: int) -> str:
        return _interleaved_schedule(epoch, batch_number)[0]

    def updatable_tags(self, view: str) -> set[str]:
        return {"text", "metadata", "head"} - {self.FROZEN[view]}

    def view_params(self, view: str) -> dict[str, np.ndarray]:
        return {p.name: p.data for p in self.model.parameters()}

    def synchronized(self) -> bool:
        a, b = self.view_params("A"), self.view_params("B")
        return all(np.array_equal(a[k], b[k]) for k in a)


def fit(model: ClassifierModel, data: EncodedDataset, config: TrainingConfig, *,
        schedule=None, step_callback=None, stream: str = "fit") -> History:
    """Mini-batch training with early stopping and best-weight restore.

    A stratified validation split is carved from the training data; training
    stops at max_epochs or after `patience` epochs without a validation-loss
    drop, and the best epoch's weights are restored. ``schedule`` maps
    (epoch, batch_number) to (view_name, updatable_tags) for interleaving.
    """
    if np.unique(data.labels).size < 2:
        raise DegenerateLabelsError("training data contains a single class")
    rng_split = derive_rng(config.seed, stream, "split")
    train_idx, val_idx = stratified_split(data.labels, config.validation_fraction, rng_split)
    if val_idx.size == 0 or train_idx.size == 0:
        raise ContractError("dataset too small to carve a validation split")
    train, val = data.subset(train_idx), data.subset(val_idx)

    optimizer = Adam.from_config(config)
    stopper = EarlyStopping(config.patience)
    history = History(val_indices=val_idx)
    params = model.parameters()
    best = model.snapshot()

    for epoch in range(config.max_epochs):
        shuffle_rng = derive_rng(config.seed, stream, "shuffle", epoch)
        order = shuffle_rng.permutation(len(train))
        epoch_losses = []
        for batch_number, sl in enumerate(batch_slices(len(train), config.batch_size)):
            take = order[sl]
            text = None if train.text is None else train.text[take]
            meta = None if train.meta is None else train.meta[take]
            labels = train.labels[take]
            view, tags = schedule(epoch, batch_number) if schedule else (None, None)
            if step_callback is not None:
                step_callback({"phase": "pre", "epoch": epoch, "batch": batch_number,
                               "view": view, "tags": tags, "model": model})
            drop_rng = derive_rng(config.seed, stream, "dropout", epoch, batch_number)
            with Tape() as tape:
                probs = model.forward(text, meta, train=True, rng=drop_rng, stats_tags=tags)
                loss = cross_entropy(probs, labels)
            tape.backward(loss)
            optimizer.step(params, allowed_tags=tags)
            model.zero_grads()
            tape.clear()
            epoch_losses.append(float(loss.data))
            if step_callback is not None:
                step_callback({"phase": "post", "epoch": epoch, "batch": batch_number,
                               "view": view, "tags": tags, "model": model})

        val_loss = evaluate_loss(model, val, config.batch_size)
        history.train_loss.append(float(np.mean(epoch_losses)))
        history.val_loss.append(val_loss)
        history.epochs_run = epoch + 1
        if val_loss < stopper.best:
            best = model.snapshot()
        if stopper.update(epoch, val_loss):
            break

    history.best_epoch = stopper.best_epoch
    model.restore(best)
    return history


def fit_naive(model: ClassifierModel, data: EncodedDataset, config: TrainingConfig,
              step_callback=None) -> History:
    """Whole network at once; every path updates on every step."""
    return fit(model, data, config, step_callback=step_callback, stream="naive")


def fit_interleaved(model: ClassifierModel, data: EncodedDataset, config: TrainingConfig,
                    step_callback=None) -> History:
    """Alternating-path training over one shared parameter store."""
    if model.kind != "combined":
        raise ContractError("interleaved training needs a combined model")
    views = InterleavedViews(model)

    def schedule(epoch, batch_number):
        view, tags = _interleaved_schedule(epoch, batch_number)
        return view, tags

    def callback(event):
        if step_callback is not None:
            step_callback(event)
        if event["phase"] == "post":
            assert views.synchronized(), "interleaved views drifted apart"

    history = fit(model, data, config, schedule=schedule, step_callback=callback,
                  stream="interleaved")
    return history


def fit_transfer(text_model: ClassifierModel, metadata_model: ClassifierModel,
                 data: EncodedDataset, config: TrainingConfig, fine_tune: bool = False,
                 rng: np.random.Generator | None = None, fusion_callback=None):
    """Pretrain both paths, fuse them, then train the head (and, with
    fine-tuning, the paths as well). Returns (combined_model, history)."""
    if data.text is None or data.meta is None:
        raise ContractError("transfer learning needs both input blocks")
    history = History()
    text_data = EncodedDataset(labels=data.labels, classes=data.classes, text=data.text)
    meta_data = EncodedDataset(labels=data.labels, classes=data.classes, meta=data.meta)
    history.stages["text_pretrain"] = fit(text_model, text_data, config, stream="transfer-text")
    history.stages["metadata_pretrain"] = fit(metadata_model, meta_data, config, stream="transfer-meta")

    combined = build_combined(text_model, metadata_model,
                              rng=rng or derive_rng(config.seed, "transfer", "head"))
    if not fine_tune:
        combined.set_path_trainable("text", False)
        combined.set_path_trainable("metadata", False)
    history.stages["fusion"] = fit(combined, data, config, stream="transfer-fusion",
                                   step_callback=fusion_callback)
    fusion = history.stages["fusion"]
    history.train_loss = fusion.train_loss
    history.val_loss = fusion.val_loss
    history.best_epoch = fusion.best_epoch
    history.epochs_run = fusion.epochs_run
    history.val_indices = fusion.val_indices
    return combined, history
