"""Neural layers: word embedding, GRU, additive attention, dense, batch norm.

Layers own Parameters and compose tape ops from `tensor`; a layer instance is
single-threaded. Weight init is Glorot-uniform with zero biases, drawn from a
caller-supplied numpy Generator so builds are reproducible.
"""

from __future__ import annotations

import numpy as np

from .tensor import (
    ContractError,
    Parameter,
    ShapeError,
    Tensor,
    add,
    add_bias,
    gather_rows,
    masked_softmax,
    matmul,
    mul,
    one_minus,
    op_output,
    reshape,
    scale_cols,
    sigmoid,
    slice_time,
    softmax,
    stack_time,
    tanh,
    weighted_sum_time,
    where_rows,
)


def glorot_uniform(rng: np.random.Generator, fan_in: int, fan_out: int, shape=None, dtype=np.float32) -> np.ndarray:
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=shape or (fan_in, fan_out)).astype(dtype)


class EmbeddingLayer:
    """Token-index lookup table. Row 0 is the padding row, zero at init."""

    pad_index = 0

    def __init__(self, table: np.ndarray, name: str = "embedding", trainable: bool = True):
        table = np.array(table, copy=True)
        table[self.pad_index] = 0.0
        self.table = Parameter(f"{name}.table", Tensor(table), trainable=trainable)

    @classmethod
    def random(cls, vocab_size: int, dim: int = 200, rng: np.random.Generator | None = None,
               name: str = "embedding", dtype=np.float32) -> "EmbeddingLayer":
        rng = rng or np.random.default_rng(0)
        table = rng.uniform(-0.05, 0.05, size=(vocab_size, dim)).astype(dtype)
        return cls(table, name=name)

    @property
    def dim(self) -> int:
        return self.table.data.shape[1]

    @property
    def vocab_size(self) -> int:
        return self.table.data.shape[0]

    def forward(self, token_ids: np.ndarray) -> Tensor:
        ids = np.asarray(token_ids)
        if ids.ndim != 2:
            raise ShapeError(f"embedding expects [batch, T] token ids, got {ids.shape}")
        b, t = ids.shape
        flat = gather_rows(self.table.tensor, ids.reshape(-1))
        return reshape(flat, (b, t, self.dim))

    def parameters(self) -> list[Parameter]:
        return [self.table]


class GRULayer:
    """GRU over [batch, T, d] input with variational recurrent dropout.

    Gate convention:
        z_t = sigmoid(x_t W_z + h_{t-1} U_z + b_z)
        r_t = sigmoid(x_t W_r + h_{t-1} U_r + b_r)
        c_t = tanh(x_t W_h + (r_t * h_{t-1}) U_h + b_h)
        h_t = (1 - z_t) * h_{t-1} + z_t * c_t

    In training mode a single per-sample dropout mask (keep prob 1-p, scaled
    by 1/(1-p)) multiplies h_{t-1} inside the three recurrent products; the
    mask is identical across timesteps. Padding positions (mask False) carry
    the state through unchanged, so left-padding can never perturb the state.
    """

    def __init__(self, input_dim: int, units: int = 128, recurrent_dropout: float = 0.5,
                 rng: np.random.Generator | None = None, name: str = "gru", dtype=np.float32):
        rng = rng or np.random.default_rng(0)
        self.units = units
        self.input_dim = input_dim
        self.recurrent_dropout = float(recurrent_dropout)
        self._dtype = np.dtype(dtype)

        def w(gate):
            return Parameter(f"{name}.W_{gate}", Tensor(glorot_uniform(rng, input_dim, units, dtype=dtype)))

        def u(gate):
            return Parameter(f"{name}.U_{gate}", Tensor(glorot_uniform(rng, units, units, dtype=dtype)))

        def bias(gate):
            return Parameter(f"{name}.b_{gate}", Tensor(np.zeros(units, dtype=dtype)))

        self.W_z, self.W_r, self.W_h = w("z"), w("r"), w("h")
        self.U_z, self.U_r, self.U_h = u("z"), u("r"), u("h")
        self.b_z, self.b_r, self.b_h = bias("z"), bias("r"), bias("h")

    def parameters(self) -> list[Parameter]:
        return [self.W_z, self.W_r, self.W_h, self.U_z, self.U_r, self.U_h,
                self.b_z, self.b_r, self.b_h]

    def forward(self, x: Tensor, mask: np.ndarray | None = None, h0: Tensor | None = None,
                train: bool = False, rng: np.random.Generator | None = None):
        """Run the recurrence; returns (all_states [b,T,units], last [b,units])."""
        if x.data.ndim != 3:
            raise ShapeError(f"gru expects [batch, T, d] input, got {x.shape}")
        b, steps, d = x.shape
        if steps == 0:
            raise ContractError("gru received an empty sequence (T=0)")
        if d != self.input_dim:
            raise ShapeError(f"gru built for input dim {self.input_dim}, got {d}")
        if mask is None:
            mask = np.ones((b, steps), dtype=bool)
        else:
            mask = np.asarray(mask, dtype=bool)
            if mask.shape != (b, steps):
                raise ShapeError(f"gru mask shape {mask.shape} does not match input {(b, steps)}")

        h = h0 if h0 is not None else Tensor(np.zeros((b, self.units), dtype=x.dtype))
        if h.shape != (b, self.units):
            raise ShapeError(f"h0 shape {h.shape} does not match [batch, units]={(b, self.units)}")

        drop = None
        if train and self.recurrent_dropout > 0.0:
            if rng is None:
                raise ContractError("training-mode gru with dropout needs an rng")
            keep = 1.0 - self.recurrent_dropout
            m = (rng.random((b, self.units)) < keep).astype(x.dtype) / x.dtype.type(keep)
            drop = Tensor(m)

        states = []
        for t in range(steps):
            x_t = slice_time(x, t)
            hm = mul(h, drop) if drop is not None else h
            z = sigmoid(add(add_bias(matmul(x_t, self.W_z.tensor), self.b_z.tensor),
                            matmul(hm, self.U_z.tensor)))
            r = sigmoid(add(add_bias(matmul(x_t, self.W_r.tensor), self.b_r.tensor),
                            matmul(hm, self.U_r.tensor)))
            c = tanh(add(add_bias(matmul(x_t, self.W_h.tensor), self.b_h.tensor),
                         matmul(mul(r, hm), self.U_h.tensor)))
            h_new = add(mul(one_minus(z), h), mul(z, c))
            h = where_rows(mask[:, t], h_new, h)
            states.append(h)
        return stack_time(states), h


class AttentionLayer:
    """Additive attention over GRU states: e_t = v . tanh(h_t W), softmax over
    unmasked steps, output is the weighted state sum."""

    def __init__(self, units: int, rng: np.random.Generator | None = None,
                 name: str = "attention", dtype=np.float32):
        rng = rng or np.random.default_rng(0)
        self.units = units
        self.W_a = Parameter(f"{name}.W_a", Tensor(glorot_uniform(rng, units, units, dtype=dtype)))
        self.v_a = Parameter(f"{name}.v_a", Tensor(glorot_uniform(rng, units, 1, shape=(units, 1), dtype=dtype)))

    def parameters(self) -> list[Parameter]:
        return [self.W_a, self.v_a]

    def forward(self, states: Tensor, mask: np.ndarray):
        """Returns (context [b,units], weights [b,T])."""
        if states.data.ndim != 3:
            raise ShapeError(f"attention expects [batch, T, units], got {states.shape}")
        b, steps, u = states.shape
        flat = reshape(states, (b * steps, u))
        scores = matmul(tanh(matmul(flat, self.W_a.tensor)), self.v_a.tensor)
        scores = reshape(scores, (b, steps))
        weights = masked_softmax(scores, mask)
        return weighted_sum_time(states, weights), weights


class DenseLayer:
    """Fully connected layer with activation in {identity, tanh, softmax}."""

    ACTIVATIONS = ("identity", "tanh", "softmax")

    def __init__(self, in_dim: int, out_dim: int, activation: str = "identity",
                 rng: np.random.Generator | None = None, name: str = "dense", dtype=np.float32):
        if activation not in self.ACTIVATIONS:
            raise ContractError(f"unknown activation {activation!r}")
        rng = rng or np.random.default_rng(0)
        self.in_dim, self.out_dim = in_dim, out_dim
        self.activation = activation
        self.W = Parameter(f"{name}.W", Tensor(glorot_uniform(rng, in_dim, out_dim, dtype=dtype)))
        self.b = Parameter(f"{name}.b", Tensor(np.zeros(out_dim, dtype=dtype)))

    def parameters(self) -> list[Parameter]:
        return [self.W, self.b]

    def forward(self, x: Tensor) -> Tensor:
        out = add_bias(matmul(x, self.W.tensor), self.b.tensor)
        if self.activation == "tanh":
            return tanh(out)
        if self.activation == "softmax":
            return softmax(out)
        return out


def _batchnorm_train(x: Tensor, gamma: Parameter, beta: Parameter, eps: float):
    """Fused train-mode batch norm; returns (out, batch_mean, batch_var)."""
    d = x.data
    n = d.shape[0]
    mu = d.mean(axis=0)
    var = d.var(axis=0)
    invstd = 1.0 / np.sqrt(var + eps)
    xhat = (d - mu) * invstd
    out_data = xhat * gamma.data[None, :] + beta.data[None, :]

    def back(g):
        from .tensor import _accum

        _accum(beta.tensor, g.sum(axis=0))
        _accum(gamma.tensor, (g * xhat).sum(axis=0))
        if x.requires_grad:
            dxhat = g * gamma.data[None, :]
            dx = (invstd / n) * (n * dxhat - dxhat.sum(axis=0)
                                 - xhat * (dxhat * xhat).sum(axis=0))
            _accum(x, dx.astype(d.dtype, copy=False))

    out = op_output(out_data.astype(d.dtype, copy=False), (x, gamma.tensor, beta.tensor), back)
    return out, mu, var


class BatchNormLayer:
    """Per-feature batch normalization.

    Train mode normalizes with the current batch statistics (requires batch
    size >= 2) and, when ``update_stats`` is set, folds them into the running
    averages as running = momentum * running + (1 - momentum) * batch.
    Inference normalizes with the running statistics only. Running stats are
    non-trainable parameters so checkpoints carry them.
    """

    def __init__(self, features: int, momentum: float = 0.99, eps: float = 1e-5,
                 name: str = "bn", dtype=np.float32):
        self.features = features
        self.momentum = momentum
        self.eps = eps
        self.gamma = Parameter(f"{name}.gamma", Tensor(np.ones(features, dtype=dtype)))
        self.beta = Parameter(f"{name}.beta", Tensor(np.zeros(features, dtype=dtype)))
        self.running_mean = Parameter(f"{name}.running_mean", Tensor(np.zeros(features, dtype=dtype)),
                                      trainable=False)
        self.running_var = Parameter(f"{name}.running_var", Tensor(np.ones(features, dtype=dtype)),
                                     trainable=False)
        self.running_mean.tensor.requires_grad = False
        self.running_var.tensor.requires_grad = False

    def parameters(self) -> list[Parameter]:
        return [self.gamma, self.beta, self.running_mean, self.running_var]

    def forward(self, x: Tensor, train: bool = False, update_stats: bool = True) -> Tensor:
        if x.data.ndim != 2 or x.shape[1] != self.features:
            raise ShapeError(f"batchnorm built for {self.features} features, got {x.shape}")
        if train:
            if x.shape[0] < 2:
                raise ContractError(f"train-mode batchnorm needs batch >= 2, got {x.shape[0]}")
            out, mu, var = _batchnorm_train(x, self.gamma, self.beta, self.eps)
            if update_stats:
                m = self.momentum
                self.running_mean.data[:] = m * self.running_mean.data + (1.0 - m) * mu
                self.running_var.data[:] = m * self.running_var.data + (1.0 - m) * var
            return out
        invstd = (1.0 / np.sqrt(self.running_var.data + self.eps)).astype(x.dtype, copy=False)
        centered = add_bias(x, Tensor(-self.running_mean.data))
        return add_bias(scale_cols(scale_cols(centered, Tensor(invstd)), self.gamma.tensor),
                        self.beta.tensor)
