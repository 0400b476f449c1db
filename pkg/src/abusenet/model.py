"""Model assembly: text path, metadata path, and the fused combined classifier.

The text path reads token ids through an embedding and a GRU (plus additive
attention once sequences are long enough to need it) into a fixed-width
feature vector. The metadata path batch-normalizes the numeric features and
pushes them through a bottleneck dense stack into a feature vector of the
same width. A standalone classifier puts a softmax layer on one path; the
combined model concatenates both feature vectors under a single softmax head.

Every parameter carries exactly one path tag in {text, metadata, head}; the
training strategies key off those tags.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field

import numpy as np

from .layers import AttentionLayer, BatchNormLayer, DenseLayer, EmbeddingLayer, GRULayer
from .tensor import ContractError, Parameter, Tensor

DEFAULT_EMBED_DIM = 200
DEFAULT_UNITS = 128
DEFAULT_HIDDEN = (512, 245, 128, 64, 32)
DEFAULT_FUSION_DIM = 128
ATTENTION_THRESHOLD = 100

CHECKPOINT_MAGIC = b"ABNET1\x00"


@dataclass
class ModelConfig:
    """Architecture knobs; defaults are the sizes used throughout."""

    embed_dim: int = DEFAULT_EMBED_DIM
    units: int = DEFAULT_UNITS
    recurrent_dropout: float = 0.5
    hidden: tuple = DEFAULT_HIDDEN
    fusion_dim: int = DEFAULT_FUSION_DIM
    attention_threshold: int = ATTENTION_THRESHOLD

    def to_dict(self) -> dict:
        return {
            "embed_dim": self.embed_dim,
            "units": self.units,
            "recurrent_dropout": self.recurrent_dropout,
            "hidden": list(self.hidden),
            "fusion_dim": self.fusion_dim,
            "attention_threshold": self.attention_threshold,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ModelConfig":
        d = dict(d)
        d["hidden"] = tuple(d.get("hidden", DEFAULT_HIDDEN))
        return cls(**d)


class TextPath:
    """embedding -> GRU -> (attention | last state) feature readout."""

    def __init__(self, embedding: EmbeddingLayer, gru: GRULayer, attention: AttentionLayer | None):
        self.embedding = embedding
        self.gru = gru
        self.attention = attention
        self.frozen = False

    @property
    def feature_dim(self) -> int:
        return self.gru.units

    def parameters(self) -> list[Parameter]:
        params = self.embedding.parameters() + self.gru.parameters()
        if self.attention is not None:
            params += self.attention.parameters()
        return params

    def features(self, token_ids: np.ndarray, train: bool = False,
                 rng: np.random.Generator | None = None) -> Tensor:
        token_ids = np.asarray(token_ids)
        mask = token_ids != 0
        x = self.embedding.forward(token_ids)
        states, last = self.gru.forward(x, mask=mask, train=train and not self.frozen, rng=rng)
        if self.attention is not None:
            context, _ = self.attention.forward(states, mask)
            return context
        return last


class MetadataPath:
    """batch norm -> bottleneck dense stack -> fusion-width tanh layer."""

    def __init__(self, bn: BatchNormLayer, stack: list[DenseLayer], out_layer: DenseLayer):
        self.bn = bn
        self.stack = stack
        self.out_layer = out_layer
        self.frozen = False

    @property
    def feature_dim(self) -> int:
        return self.out_layer.out_dim

    def parameters(self) -> list[Parameter]:
        params = self.bn.parameters()
        for layer in self.stack:
            params += layer.parameters()
        return params + self.out_layer.parameters()

    def features(self, meta: np.ndarray | Tensor, train: bool = False,
                 update_stats: bool = True) -> Tensor:
        x = meta if isinstance(meta, Tensor) else Tensor(np.asarray(meta))
        h = self.bn.forward(x, train=train, update_stats=update_stats and train and not self.frozen)
        for layer in self.stack:
            h = layer.forward(h)
        return self.out_layer.forward(h)


class ClassifierModel:
    """A softmax classifier over one path or the concatenation of both."""

    def __init__(self, classes: list[str], head: DenseLayer,
                 text_path: TextPath | None = None, metadata_path: MetadataPath | None = None):
        if text_path is None and metadata_path is None:
            raise ContractError("a classifier needs at least one input path")
        self.classes = list(classes)
        self.head = head
        self.text_path = text_path
        self.metadata_path = metadata_path
        self._tag_params()

    def _tag_params(self) -> None:
        for p in self.head.parameters():
            p.tag = "head"
        if self.text_path is not None:
            for p in self.text_path.parameters():
                p.tag = "text"
        if self.metadata_path is not None:
            for p in self.metadata_path.parameters():
                p.tag = "metadata"
        names = [p.name for p in self.parameters()]
        if len(names) != len(set(names)):
            raise ContractError("duplicate parameter names in model")

    @property
    def kind(self) -> str:
        if self.text_path is not None and self.metadata_path is not None:
            return "combined"
        return "text" if self.text_path is not None else "metadata"

    @property
    def n_classes(self) -> int:
        return len(self.classes)

    def parameters(self) -> list[Parameter]:
        params: list[Parameter] = []
        if self.text_path is not None:
            params += self.text_path.parameters()
        if self.metadata_path is not None:
            params += self.metadata_path.parameters()
        return params + self.head.parameters()

    def param(self, name: str) -> Parameter:
        for p in self.parameters():
            if p.name == name:
                return p
        raise KeyError(f"no parameter named {name!r}")

    def forward(self, text_ids: np.ndarray | None, meta: np.ndarray | None,
                train: bool = False, rng: np.random.Generator | None = None,
                stats_tags: set[str] | None = None) -> Tensor:
        """Class probabilities [batch, n_classes].

        ``stats_tags`` limits which paths fold batch statistics into their
        running averages this step (None means every unfrozen path does).
        """
        from .tensor import concat_last

        feats: Tensor | None = None
        if self.text_path is not None:
            if text_ids is None:
                raise ContractError("model has a text path but no token ids were given")
            feats = self.text_path.features(text_ids, train=train, rng=rng)
        if self.metadata_path is not None:
            if meta is None:
                raise ContractError("model has a metadata path but no metadata was given")
            update = stats_tags is None or "metadata" in stats_tags
            m = self.metadata_path.features(meta, train=train, update_stats=update)
            feats = m if feats is None else concat_last(feats, m)
        return self.head.forward(feats)

    def zero_grads(self) -> None:
        for p in self.parameters():
            p.tensor.zero_grad()

    def snapshot(self) -> dict[str, np.ndarray]:
        return {p.name: p.data.copy() for p in self.parameters()}

    def restore(self, snap: dict[str, np.ndarray]) -> None:
        for p in self.parameters():
            p.tensor.data = snap[p.name].copy()

    def set_path_trainable(self, tag: str, trainable: bool) -> None:
        found = False
        for p in self.parameters():
            if p.tag == tag:
                p.trainable = trainable
                found = True
        if not found:
            raise KeyError(f"no parameters tagged {tag!r}")
        if tag == "text" and self.text_path is not None:
            self.text_path.frozen = not trainable
        if tag == "metadata" and self.metadata_path is not None:
            self.metadata_path.frozen = not trainable


def parameter_count(model: ClassifierModel, include_embeddings: bool = False) -> int:
    """Total element count over trainable parameters."""
    total = 0
    for p in model.parameters():
        if not p.trainable:
            continue
        if not include_embeddings and p.name.endswith("embedding.table"):
            continue
        total += p.data.size
    return total


def build_text_path(vocab, spec, classes: list[str], *, config: ModelConfig | None = None,
                    rng: np.random.Generator | None = None,
                    embedding: EmbeddingLayer | None = None) -> ClassifierModel:
    """Standalone text classifier; attention switches on for long sequences.

    ``vocab`` may be a Vocabulary or a plain vocabulary size; ``spec`` a
    SequenceSpec or a plain sequence length.
    """
    classes = list(classes)
    if len(classes) < 2:
        raise ContractError(f"need at least 2 classes, got {len(classes)}")
    config = config or ModelConfig()
    rng = rng or np.random.default_rng(0)
    vocab_size = vocab if isinstance(vocab, int) else len(vocab)
    seq_len = spec if isinstance(spec, int) else spec.seq_len

    if embedding is None:
        embedding = EmbeddingLayer.random(vocab_size, config.embed_dim, rng=rng, name="text.embedding")
    else:
        embedding.table.name = "text.embedding.table"
    gru = GRULayer(embedding.dim, config.units, recurrent_dropout=config.recurrent_dropout,
                   rng=rng, name="text.gru")
    attention = None
    if seq_len > config.attention_threshold:
        attention = AttentionLayer(config.units, rng=rng, name="text.attention")
    head = DenseLayer(config.units, len(classes), activation="softmax", rng=rng, name="head")
    return ClassifierModel(classes, head, text_path=TextPath(embedding, gru, attention))


def build_metadata_path(feature_dim: int, classes: list[str], *,
                        config: ModelConfig | None = None,
                        rng: np.random.Generator | None = None) -> ClassifierModel:
    """Standalone metadata classifier: batch norm, bottleneck stack, softmax."""
    classes = list(classes)
    if feature_dim < 1:
        raise ContractError(f"metadata path needs feature_dim >= 1, got {feature_dim}")
    if len(classes) < 2:
        raise ContractError(f"need at least 2 classes, got {len(classes)}")
    config = config or ModelConfig()
    rng = rng or np.random.default_rng(0)

    bn = BatchNormLayer(feature_dim, name="meta.bn")
    stack: list[DenseLayer] = []
    in_dim = feature_dim
    for i, width in enumerate(config.hidden, start=1):
        stack.append(DenseLayer(in_dim, width, activation="tanh", rng=rng, name=f"meta.dense{i}"))
        in_dim = width
    out_layer = DenseLayer(in_dim, config.fusion_dim, activation="tanh", rng=rng, name="meta.fusion")
    head = DenseLayer(config.fusion_dim, len(classes), activation="softmax", rng=rng, name="head")
    return ClassifierModel(classes, head, metadata_path=MetadataPath(bn, stack, out_layer))


def build_combined(text_model: ClassifierModel, metadata_model: ClassifierModel,
                   classes: list[str] | None = None, *,
                   rng: np.random.Generator | None = None) -> ClassifierModel:
    """Fuse two standalone classifiers at their penultimate layers.

    The classification layers of both inputs are dropped; a fresh softmax
    head reads the concatenated feature vectors. The paths must expose
    equal feature widths (128 each in the default configuration, fusing
    into a 256-wide head input).
    """
    if text_model.text_path is None:
        raise ContractError("first argument must be a text classifier")
    if metadata_model.metadata_path is None:
        raise ContractError("second argument must be a metadata classifier")
    classes = list(classes if classes is not None else text_model.classes)
    if text_model.classes != metadata_model.classes:
        raise ContractError("path classifiers disagree on the class list")
    rng = rng or np.random.default_rng(0)

    text_path = text_model.text_path
    meta_path = metadata_model.metadata_path
    wt, wm = text_path.feature_dim, meta_path.feature_dim
    if wt != wm:
        raise ContractError(f"penultimate widths disagree: text {wt} vs metadata {wm}")
    head = DenseLayer(wt + wm, len(classes), activation="softmax", rng=rng, name="head")
    return ClassifierModel(classes, head, text_path=text_path, metadata_path=meta_path)


# ---------------------------------------------------------------------------
# checkpointing


@dataclass
class CheckpointMeta:
    classes: list[str]
    kind: str
    config: ModelConfig
    seq_len: int | None = None
    vocab_tokens: list[str] = field(default_factory=list)
    feature_dim: int | None = None
    schema: list[tuple[str, str]] = field(default_factory=list)
    pipeline: dict | None = None
    mask: list[str] = field(default_factory=list)
    extra: dict = field(default_factory=dict)


def save_checkpoint(path, model: ClassifierModel, meta: CheckpointMeta) -> None:
    """Self-describing container: JSON header, then raw parameter records.

    Per-parameter record: name, path tag, trainable flag, shape, then the
    values as little-endian float32.
    """
    header = {
        "format_version": 1,
        "classes": meta.classes,
        "kind": meta.kind,
        "config": meta.config.to_dict(),
        "seq_len": meta.seq_len,
        "vocab_tokens": meta.vocab_tokens,
        "feature_dim": meta.feature_dim,
        "schema": [list(c) for c in meta.schema],
        "pipeline": meta.pipeline,
        "mask": sorted(meta.mask),
        "extra": meta.extra,
    }
    blob = json.dumps(header, sort_keys=True).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(CHECKPOINT_MAGIC)
        fh.write(struct.pack("<I", len(blob)))
        fh.write(blob)
        params = model.parameters()
        fh.write(struct.pack("<I", len(params)))
        for p in params:
            name = p.name.encode("utf-8")
            tag = (p.tag or "").encode("utf-8")
            fh.write(struct.pack("<H", len(name)))
            fh.write(name)
            fh.write(struct.pack("<H", len(tag)))
            fh.write(tag)
            fh.write(struct.pack("<B", 1 if p.trainable else 0))
            shape = p.data.shape
            fh.write(struct.pack("<B", len(shape)))
            for dim in shape:
                fh.write(struct.pack("<I", dim))
            fh.write(np.ascontiguousarray(p.data, dtype="<f4").tobytes())


def _read_exact(fh, n: int) -> bytes:
    data = fh.read(n)
    if len(data) != n:
        raise ValueError("checkpoint truncated")
    return data


def load_checkpoint(path) -> tuple[ClassifierModel, CheckpointMeta]:
    """Rebuild the model named in the header and fill in the stored weights."""
    with open(path, "rb") as fh:
        magic = _read_exact(fh, len(CHECKPOINT_MAGIC))
        if magic != CHECKPOINT_MAGIC:
            raise ValueError("not a model checkpoint (bad magic)")
        (hlen,) = struct.unpack("<I", _read_exact(fh, 4))
        header = json.loads(_read_exact(fh, hlen).decode("utf-8"))
        if header.get("format_version") != 1:
            raise ValueError(f"unsupported checkpoint version {header.get('format_version')}")
        records = {}
        flags = {}
        (n_params,) = struct.unpack("<I", _read_exact(fh, 4))
        for _ in range(n_params):
            (nlen,) = struct.unpack("<H", _read_exact(fh, 2))
            name = _read_exact(fh, nlen).decode("utf-8")
            (tlen,) = struct.unpack("<H", _read_exact(fh, 2))
            _read_exact(fh, tlen)  # tag is re-derived at build
            (trainable,) = struct.unpack("<B", _read_exact(fh, 1))
            (ndim,) = struct.unpack("<B", _read_exact(fh, 1))
            shape = tuple(struct.unpack("<I", _read_exact(fh, 4))[0] for _ in range(ndim))
            count = int(np.prod(shape)) if shape else 1
            data = np.frombuffer(_read_exact(fh, 4 * count), dtype="<f4").reshape(shape)
            records[name] = np.array(data, dtype=np.float32)
            flags[name] = bool(trainable)

    meta = CheckpointMeta(
        classes=list(header["classes"]),
        kind=header["kind"],
        config=ModelConfig.from_dict(header["config"]),
        seq_len=header.get("seq_len"),
        vocab_tokens=list(header.get("vocab_tokens", [])),
        feature_dim=header.get("feature_dim"),
        schema=[tuple(c) for c in header.get("schema", [])],
        pipeline=header.get("pipeline"),
        mask=list(header.get("mask", [])),
        extra=dict(header.get("extra", {})),
    )
    model = _rebuild(meta)
    for p in model.parameters():
        if p.name not in records:
            raise ValueError(f"checkpoint missing parameter {p.name!r}")
        stored = records[p.name]
        if stored.shape != p.data.shape:
            raise ValueError(f"parameter {p.name!r} shape {stored.shape} != expected {p.data.shape}")
        p.tensor.data = stored.copy()
        p.trainable = flags[p.name]
    return model, meta


def _rebuild(meta: CheckpointMeta) -> ClassifierModel:
    rng = np.random.default_rng(0)
    vocab_size = len(meta.vocab_tokens) + 2
    if meta.kind == "text":
        return build_text_path(vocab_size, meta.seq_len, meta.classes, config=meta.config, rng=rng)
    if meta.kind == "metadata":
        return build_metadata_path(meta.feature_dim, meta.classes, config=meta.config, rng=rng)
    if meta.kind == "combined":
        text = build_text_path(vocab_size, meta.seq_len, meta.classes, config=meta.config, rng=rng)
        md = build_metadata_path(meta.feature_dim, meta.classes, config=meta.config, rng=rng)
        return build_combined(text, md, meta.classes, rng=rng)
    raise ValueError(f"unknown model kind {meta.kind!r}")
