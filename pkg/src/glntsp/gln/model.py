"""Recurrent Graph Learning Network: parameters, forward pass and backprop.

Every array operation here broadcasts over optional leading batch axes, so
``X`` may be ``(n, d)`` for one instance or ``(B, n, d)`` for a batch sharing
the same parameters. Parameter gradients are summed over the batch.

One recurrent layer, with ``Â`` the (optionally normalized) adjacency::

    H_int    = sum_i relu(Â H W_i)
    H_local  = relu(Â H_int U)
    H_global = relu(H_local Z)
    S        = M H_local Q H_global^T M^T
    A_next   = relu(sym(S)),   H_next = H_local

``sym(S) = (S + S^T) / 2`` with the diagonal zeroed. The edge probabilities
are ``logistic(sym(S))`` of the last layer, again with a zero diagonal.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterator

import numpy as np

from glntsp.gln.loss import LossConfig, total_loss_grad

INIT_MODES = ("aleatory", "identity")
NORMALIZATIONS = ("symmetric", "raw")
FEATURES = {"xy": 2, "xy1": 3}
M_INITS = ("glorot", "identity")
PARAM_NAMES = ("W", "U", "Z", "Q", "M")


class ModelError(ValueError):
    pass


@dataclass(frozen=True)
class GlnConfig:
    n: int
    d: int | None = None
    h: int = 32
    k: int = 3
    L: int = 3
    p: float | None = None
    init_mode: str = "aleatory"
    adjacency_normalization: str = "symmetric"
    features: str = "xy"
    m_init: str = "glorot"

    def __post_init__(self) -> None:
        if self.features not in FEATURES:
            raise ModelError(f"features must be one of {tuple(FEATURES)}")
        if self.d is None:
            object.__setattr__(self, "d", FEATURES[self.features])
        if self.d != FEATURES[self.features]:
            raise ModelError(f"features={self.features!r} gives d={FEATURES[self.features]}, got d={self.d}")
        if self.m_init not in M_INITS:
            raise ModelError(f"m_init must be one of {M_INITS}")
        if self.p is None:
            object.__setattr__(self, "p", min(1.0, 2.0 / self.n) if self.n > 0 else 0.0)
        if self.n < 3:
            raise ModelError(f"n must be >= 3, got {self.n}")
        if min(self.d, self.h, self.k, self.L) < 1:
            raise ModelError("d, h, k and L must all be >= 1")
        if not 0.0 <= self.p <= 1.0:
            raise ModelError(f"p must lie in [0, 1], got {self.p}")
        if self.init_mode not in INIT_MODES:
            raise ModelError(f"init_mode must be one of {INIT_MODES}")
        if self.adjacency_normalization not in NORMALIZATIONS:
            raise ModelError(f"adjacency_normalization must be one of {NORMALIZATIONS}")

    def layer_shapes(self, layer: int) -> dict[str, tuple[int, ...]]:
        d_in = self.d if layer == 0 else self.h
        h, n = self.h, self.n
        return {"W": (self.k, d_in, h), "U": (h, h), "Z": (h, h), "Q": (h, h), "M": (n, n)}


@dataclass
class LayerParams:
    W: np.ndarray  # (k, d_in, h), one kernel per leading index
    U: np.ndarray
    Z: np.ndarray
    Q: np.ndarray
    M: np.ndarray

    def items(self) -> Iterator[tuple[str, np.ndarray]]:
        for name in PARAM_NAMES:
            yield name, getattr(self, name)


@dataclass
class GlnParams:
    config: GlnConfig
    layers: list[LayerParams]

    def __post_init__(self) -> None:
        if len(self.layers) != self.config.L:
            raise ModelError(f"expected {self.config.L} layers, got {len(self.layers)}")
        for l, layer in enumerate(self.layers):
            for name, shape in self.config.layer_shapes(l).items():
                if getattr(layer, name).shape != shape:
                    raise ModelError(f"layer {l} {name} has shape {getattr(layer, name).shape}, expected {shape}")

    def arrays(self) -> Iterator[tuple[tuple[int, str], np.ndarray]]:
        for l, layer in enumerate(self.layers):
            for name, arr in layer.items():
                yield (l, name), arr

    def size(self) -> int:
        return sum(a.size for _, a in self.arrays())

    def map(self, fn) -> "GlnParams":
        return GlnParams(self.config, [LayerParams(**{k: fn(v) for k, v in layer.items()}) for layer in self.layers])

    def copy(self) -> "GlnParams":
        return self.map(np.array)

    def zeros_like(self) -> "GlnParams":
        return self.map(np.zeros_like)


def init_params(config: GlnConfig, rng: np.random.Generator) -> GlnParams:
    """Glorot-uniform initialization of every matrix.

    With ``m_init="identity"`` the node-mixing matrices M start at I_n instead;
    the draws are made either way so both modes consume the rng identically.
    """
    layers = []
    for l in range(config.L):
        mats = {}
        for name, shape in config.layer_shapes(l).items():
            fan_in, fan_out = shape[-2], shape[-1]
            bound = np.sqrt(6.0 / (fan_in + fan_out))
            mats[name] = rng.uniform(-bound, bound, size=shape)
        if config.m_init == "identity":
            mats["M"] = np.eye(config.n)
        layers.append(LayerParams(**mats))
    return GlnParams(config, layers)


def node_features(coords: np.ndarray, config: GlnConfig) -> np.ndarray:
    """Model input for coordinates of shape (..., n, 2): raw, or with a constant 1 column."""
    coords = np.asarray(coords, dtype=np.float64)
    if config.features == "xy1":
        return np.concatenate([coords, np.ones(coords.shape[:-1] + (1,))], axis=-1)
    return coords


def init_adjacency(config: GlnConfig, rng: np.random.Generator) -> np.ndarray:
    """Starting adjacency: identity, or a random symmetric 0/1 matrix with edge probability p."""
    n = config.n
    if config.init_mode == "identity":
        return np.eye(n)
    upper = np.triu(rng.random((n, n)) < config.p, 1)
    return (upper | upper.T).astype(np.float64)


def _t(a: np.ndarray) -> np.ndarray:
    return np.swapaxes(a, -1, -2)


def _zero_diag(a: np.ndarray) -> np.ndarray:
    n = a.shape[-1]
    return a * (1.0 - np.eye(n))


def normalize_adjacency(A: np.ndarray, mode: str = "symmetric") -> np.ndarray:
    """``D^-1/2 (A + I) D^-1/2`` with D the row sums of A + I; ``raw`` returns A unchanged."""
    if mode == "raw":
        return A
    B = A + np.eye(A.shape[-1])
    s = 1.0 / np.sqrt(B.sum(axis=-1))
    return s[..., :, None] * B * s[..., None, :]


def _normalize_backward(A: np.ndarray, dA_hat: np.ndarray) -> np.ndarray:
    B = A + np.eye(A.shape[-1])
    deg = B.sum(axis=-1)
    s = 1.0 / np.sqrt(deg)
    dB = dA_hat * s[..., :, None] * s[..., None, :]
    # each s_i appears in row i and column i of Â
    ds = (dA_hat * B * s[..., None, :]).sum(-1) + (dA_hat * B * s[..., :, None]).sum(-2)
    ddeg = ds * (-0.5) * deg ** -1.5
    return dB + ddeg[..., :, None]


def relu(x: np.ndarray) -> np.ndarray:
    return np.maximum(x, 0.0)


def logistic(x: np.ndarray) -> np.ndarray:
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def kernel_conv(A_hat: np.ndarray, H: np.ndarray, W: np.ndarray) -> np.ndarray:
    return relu(A_hat @ H @ W)


@dataclass
class LayerTrace:
    A: np.ndarray  # adjacency fed into this layer
    A_hat: np.ndarray
    H: np.ndarray
    AH: np.ndarray  # Â H, shared by every kernel
    kernel_pre: np.ndarray  # (..., k, n, h) pre-activations of Â H W_i
    H_int: np.ndarray
    AH_int: np.ndarray
    local_pre: np.ndarray
    H_local: np.ndarray
    global_pre: np.ndarray
    H_global: np.ndarray
    left: np.ndarray  # M H_local Q
    right: np.ndarray  # M H_global
    S: np.ndarray
    S_sym: np.ndarray
    A_next: np.ndarray


@dataclass
class ForwardTrace:
    layers: list[LayerTrace]
    P: np.ndarray
    normalization: str = field(default="symmetric")

    @property
    def logits(self) -> np.ndarray:
        return self.layers[-1].S_sym


def forward(params: GlnParams, X: np.ndarray, A0: np.ndarray) -> ForwardTrace:
    cfg = params.config
    X = np.asarray(X, dtype=np.float64)
    A0 = np.asarray(A0, dtype=np.float64)
    if X.shape[-2] != cfg.n or A0.shape[-1] != cfg.n or A0.shape[-2] != cfg.n:
        raise ModelError(f"model is built for n={cfg.n}, got features {X.shape} and adjacency {A0.shape}")
    if X.shape[-1] != cfg.d:
        raise ModelError(f"expected {cfg.d} input features, got {X.shape[-1]}")

    traces = []
    H, A = X, A0
    for l, lp in enumerate(params.layers):
        A_hat = normalize_adjacency(A, cfg.adjacency_normalization)
        AH = A_hat @ H
        kernel_pre = AH[..., None, :, :] @ lp.W
        H_int = relu(kernel_pre).sum(axis=-3)
        AH_int = A_hat @ H_int
        local_pre = AH_int @ lp.U
        H_local = relu(local_pre)
        global_pre = H_local @ lp.Z
        H_global = relu(global_pre)
        left = lp.M @ H_local @ lp.Q
        right = lp.M @ H_global
        S = left @ _t(right)
        S_sym = _zero_diag(0.5 * (S + _t(S)))
        A_next = relu(S_sym)
        for name, arr in (("H_local", H_local), ("H_global", H_global), ("S", S)):
            if not np.all(np.isfinite(arr)):
                raise ModelError(f"non-finite {name} in layer {l}")
        traces.append(
            LayerTrace(A, A_hat, H, AH, kernel_pre, H_int, AH_int, local_pre, H_local,
                       global_pre, H_global, left, right, S, S_sym, A_next)
        )
        H, A = H_local, A_next
    P = _zero_diag(logistic(traces[-1].S_sym))
    return ForwardTrace(traces, P, cfg.adjacency_normalization)


def _param_grad(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """sum over batch of a^T b, for a (..., r, p) and b (..., r, q)."""
    return a.reshape(-1, a.shape[-1]).T @ b.reshape(-1, b.shape[-1])


def _batch_sum(a: np.ndarray, ndim: int) -> np.ndarray:
    return a.reshape(-1, *a.shape[-ndim:]).sum(axis=0) if a.ndim > ndim else a


def backward_from_logits(params: GlnParams, trace: ForwardTrace, dlogits: np.ndarray) -> GlnParams:
    """Backpropagate a gradient on the last layer's ``sym(S)`` into every parameter."""
    if len(trace.layers) != len(params.layers):
        raise ModelError("trace was produced with a different number of layers")
    cfg = params.config
    grads: list[LayerParams | None] = [None] * cfg.L
    dS_sym = dlogits
    dH_next = None
    for l in reversed(range(cfg.L)):
        lp, tr = params.layers[l], trace.layers[l]
        if tr.S.shape[-1] != cfg.n:
            raise ModelError("trace does not match the parameters")
        dS_sym = _zero_diag(dS_sym)
        dS = 0.5 * (dS_sym + _t(dS_sym))
        dleft = dS @ tr.right
        dright = _t(dS) @ tr.left

        HQ = tr.H_local @ lp.Q
        dM = _batch_sum(dleft @ _t(HQ) + dright @ _t(tr.H_global), 2)
        dHQ = _t(lp.M) @ dleft
        dQ = _param_grad(tr.H_local, dHQ)
        dH_local = dHQ @ _t(lp.Q)
        dH_global = _t(lp.M) @ dright
        if dH_next is not None:
            dH_local = dH_local + dH_next

        dglobal_pre = dH_global * (tr.global_pre > 0)
        dZ = _param_grad(tr.H_local, dglobal_pre)
        dH_local = dH_local + dglobal_pre @ _t(lp.Z)

        dlocal_pre = dH_local * (tr.local_pre > 0)
        dU = _param_grad(tr.AH_int, dlocal_pre)
        dAH_int = dlocal_pre @ _t(lp.U)
        dA_hat = dAH_int @ _t(tr.H_int)
        dH_int = _t(tr.A_hat) @ dAH_int

        dkernel_pre = dH_int[..., None, :, :] * (tr.kernel_pre > 0)
        AH_flat = tr.AH.reshape(-1, tr.AH.shape[-1])
        dW = np.stack([
            AH_flat.T @ dkernel_pre[..., i, :, :].reshape(-1, cfg.h) for i in range(cfg.k)
        ])
        dAH = (dkernel_pre @ _t(lp.W)).sum(axis=-3)
        dA_hat = dA_hat + dAH @ _t(tr.H)
        dH_next = _t(tr.A_hat) @ dAH

        grads[l] = LayerParams(W=dW, U=dU, Z=dZ, Q=dQ, M=dM)

        if l > 0:
            if cfg.adjacency_normalization == "symmetric":
                dA = _normalize_backward(tr.A, dA_hat)
            else:
                dA = dA_hat
            dS_sym = dA * (trace.layers[l - 1].S_sym > 0)
    return GlnParams(cfg, grads)


def backward(params: GlnParams, trace: ForwardTrace, T: np.ndarray, loss_cfg: LossConfig = LossConfig()) -> GlnParams:
    """Gradient of the total loss w.r.t. every parameter.

    For batched traces the loss being differentiated is the batch mean.
    """
    P = trace.P
    if np.shape(T) != P.shape:
        raise ModelError(f"target shape {np.shape(T)} does not match predictions {P.shape}")
    dP = total_loss_grad(P, T, loss_cfg)
    batch = int(np.prod(P.shape[:-2])) if P.ndim > 2 else 1
    return backward_from_logits(params, trace, dP * P * (1.0 - P) / batch)
