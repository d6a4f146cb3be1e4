"""Feedforward WaveNet / TCN with hand-written backpropagation, in float64.

Layout (B = batch, C = channels, T = time, K = kernel size):

    h_0 = W_in x                                   1 -> C, no bias
    for each layer k with dilation d_k:
        p   = causal dilated conv(h_k)             C -> C  (2C when gated)
        z   = act(p)                               or act(p_a) * sigmoid(p_g)
        s_k = z                                    or W_skip,k z  (C -> C/2)
        h_{k+1} = h_k + W_res,k z                  1x1, no bias
    y = W_head sum_k s_k  (+ b_head if head_bias)

Convolutions are causal with left zero padding, so every stage keeps T.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import activations as act
from .activations import ActivationSpec, Kind, parse_spec
from .dsp import PREEMPHASIS_COEFF, Signal, as_samples
from .metrics import LengthMismatchError, ZeroEnergyError

CHECKPOINT_FORMAT = "ampalias-tcn/1"


def default_dilations() -> tuple:
    return tuple(2 ** i for i in range(9)) * 2


@dataclass(frozen=True)
class TcnConfig:
    channels: int = 16
    kernel_size: int = 3
    dilations: tuple = field(default_factory=default_dilations)
    activation: ActivationSpec = field(default_factory=lambda: ActivationSpec(Kind.CustomTanh, 1.0))
    head_bias: bool = False
    conv_bias: bool = True
    input_channels: int = 1

    def __post_init__(self):
        object.__setattr__(self, "dilations", tuple(int(d) for d in self.dilations))
        if isinstance(self.activation, str):
            object.__setattr__(self, "activation", parse_spec(self.activation))
        if not self.dilations or min(self.dilations) < 1:
            raise ValueError("dilations must be a non-empty list of positive integers")
        if self.channels < 1 or self.kernel_size < 1:
            raise ValueError("channels and kernel_size must be positive")
        if self.input_channels != 1:
            raise ValueError("only single-channel input is supported")
        if self.activation.gated and self.channels % 2:
            raise ValueError(f"gated activations need an even channel count, got {self.channels}")

    @property
    def skip_channels(self) -> int:
        return self.channels // 2 if self.activation.gated else self.channels

    def to_dict(self) -> dict:
        d = asdict(self)
        d["dilations"] = list(self.dilations)
        d["activation"] = self.activation.label
        return d

    @classmethod
    def from_dict(cls, d: dict) -> TcnConfig:
        return cls(**d)


def receptive_field(config: TcnConfig) -> int:
    return 1 + (config.kernel_size - 1) * sum(config.dilations)


def parameter_shapes(config: TcnConfig) -> dict:
    C, K = config.channels, config.kernel_size
    conv_out = 2 * C if config.activation.gated else C
    shapes = {"input.weight": (C, 1)}
    for i in range(len(config.dilations)):
        shapes[f"layers.{i}.conv.weight"] = (conv_out, C, K)
        if config.conv_bias:
            shapes[f"layers.{i}.conv.bias"] = (conv_out,)
        shapes[f"layers.{i}.residual.weight"] = (C, C)
        if config.activation.gated:
            shapes[f"layers.{i}.skip.weight"] = (config.skip_channels, C)
    shapes["head.weight"] = (1, config.skip_channels)
    if config.head_bias:
        shapes["head.bias"] = (1,)
    return shapes


def parameter_count(config: TcnConfig) -> int:
    return sum(int(np.prod(s)) for s in parameter_shapes(config).values())


@dataclass(eq=False)
class TcnModel:
    config: TcnConfig
    params: dict

    @property
    def receptive_field(self) -> int:
        return receptive_field(self.config)

    def copy(self) -> TcnModel:
        return TcnModel(self.config, {k: v.copy() for k, v in self.params.items()})

    def __call__(self, x):
        return forward(self, x)


def _fan_in(name: str, shape: tuple) -> int:
    if name.endswith(".bias"):
        return 0
    return int(np.prod(shape[1:]))


def init_model(config: TcnConfig, seed: int) -> TcnModel:
    """Weights ~ U(-1/sqrt(fan_in), 1/sqrt(fan_in)); biases use their layer's fan-in."""
    rng = np.random.default_rng(seed)
    params = {}
    last_fan_in = 1
    for name, shape in parameter_shapes(config).items():
        fan_in = _fan_in(name, shape) or last_fan_in
        last_fan_in = fan_in
        bound = 1.0 / np.sqrt(fan_in)
        params[name] = rng.uniform(-bound, bound, size=shape)
    return TcnModel(config, params)


def _as_batch(x) -> np.ndarray:
    arr = as_samples(x)
    if arr.ndim == 1:
        arr = arr[None, :]
    if arr.ndim != 2 or arr.shape[1] == 0:
        raise ValueError(f"expected non-empty (time,) or (batch, time) input, got {arr.shape}")
    return arr


def _im2col(h: np.ndarray, kernel_size: int, dilation: int) -> np.ndarray:
    # h is (C, B, T); returns (C*K, B*T) with tap j reading h[..., t - (K-1-j)*d]
    C, B, T = h.shape
    if kernel_size == 1:
        return h.reshape(C, B * T)
    cols = np.empty((C, kernel_size, B, T))
    for j in range(kernel_size):
        shift = min((kernel_size - 1 - j) * dilation, T)
        cols[:, j, :, :shift] = 0.0
        cols[:, j, :, shift:] = h[:, :, :T - shift]
    return cols.reshape(C * kernel_size, B * T)


def _col2im(dcols: np.ndarray, shape: tuple, kernel_size: int, dilation: int) -> np.ndarray:
    C, B, T = shape
    if kernel_size == 1:
        return dcols.reshape(C, B, T)
    dcols = dcols.reshape(C, kernel_size, B, T)
    dh = dcols[:, kernel_size - 1].copy()
    for j in range(kernel_size - 1):
        shift = (kernel_size - 1 - j) * dilation
        if shift < T:
            dh[:, :, :T - shift] += dcols[:, j, :, shift:]
    return dh


def _forward(model: TcnModel, x: np.ndarray, keep_cache: bool):
    # activations are kept as (channels, batch*time) matrices
    cfg, p = model.config, model.params
    spec = cfg.activation
    C, K = cfg.channels, cfg.kernel_size
    B, T = x.shape
    xf = x.reshape(1, B * T)
    h = p["input.weight"] @ xf
    skip_sum = 0.0
    cache = []
    for i, d in enumerate(cfg.dilations):
        cols = _im2col(h.reshape(C, B, T), K, d)
        pre = p[f"layers.{i}.conv.weight"].reshape(-1, C * K) @ cols
        if cfg.conv_bias:
            pre += p[f"layers.{i}.conv.bias"][:, None]
        if spec.gated:
            a, g = pre[:C], pre[C:]
            fa = act._eval(spec.kind, spec.alpha, a)
            sg = act.sigmoid(g)
            z = fa * sg
            skip = p[f"layers.{i}.skip.weight"] @ z
            entry = (cols, a, fa, sg, z)
        else:
            z = act._eval(spec.kind, spec.alpha, pre)
            skip = z
            entry = (cols, pre, None, None, z)
        skip_sum = skip_sum + skip
        h = h + p[f"layers.{i}.residual.weight"] @ z
        if keep_cache:
            cache.append(entry)
    y = (p["head.weight"] @ skip_sum).reshape(B, T)
    if cfg.head_bias:
        y = y + p["head.bias"][0]
    return y, (xf, cache, skip_sum)


def forward(model: TcnModel, x):
    """Run the network on a Signal, a 1-D array or a (batch, time) array."""
    batch = _as_batch(x)
    y, _ = _forward(model, batch, keep_cache=False)
    if isinstance(x, Signal):
        return x.replace(y[0])
    return y[0] if np.ndim(as_samples(x)) == 1 else y


def _backward(model: TcnModel, dy: np.ndarray, cache) -> dict:
    cfg, p = model.config, model.params
    spec = cfg.activation
    C, K = cfg.channels, cfg.kernel_size
    B, T = dy.shape
    xf, layers, skip_sum = cache
    dyf = dy.reshape(1, B * T)
    grads = {"head.weight": dyf @ skip_sum.T}
    if cfg.head_bias:
        grads["head.bias"] = np.array([dy.sum()])
    dskip = p["head.weight"].T @ dyf
    dh = np.zeros((C, B * T))
    for i in reversed(range(len(cfg.dilations))):
        cols, pre, fa, sg, z = layers[i]
        w_res = p[f"layers.{i}.residual.weight"]
        grads[f"layers.{i}.residual.weight"] = dh @ z.T
        dz = w_res.T @ dh
        if spec.gated:
            grads[f"layers.{i}.skip.weight"] = dskip @ z.T
            dz += p[f"layers.{i}.skip.weight"].T @ dskip
            da = dz * sg * act._grad(spec.kind, spec.alpha, pre)
            dg = dz * fa * sg * (1.0 - sg)
            dpre = np.concatenate([da, dg], axis=0)
        else:
            dz += dskip
            dpre = dz * act._grad(spec.kind, spec.alpha, pre)
        w = p[f"layers.{i}.conv.weight"]
        grads[f"layers.{i}.conv.weight"] = (dpre @ cols.T).reshape(w.shape)
        if cfg.conv_bias:
            grads[f"layers.{i}.conv.bias"] = dpre.sum(axis=1)
        dcols = w.reshape(-1, C * K).T @ dpre
        dh = dh + _col2im(dcols, (C, B, T), K, cfg.dilations[i]).reshape(C, B * T)
    grads["input.weight"] = dh @ xf.T
    return {name: grads[name] for name in p}


def segment_loss(target: np.ndarray, prediction: np.ndarray, warmup: int):
    """Mean over rows of pre-emphasized ESR on samples [warmup:], and its
    gradient with respect to ``prediction``."""
    B, T = target.shape
    if warmup >= T:
        raise ValueError(f"segment of {T} samples is not longer than the warmup {warmup}")
    y = target[:, warmup:]
    y_p = y.copy()
    y_p[:, 1:] -= PREEMPHASIS_COEFF * y[:, :-1]
    pr = prediction[:, warmup:]
    p_p = pr.copy()
    p_p[:, 1:] -= PREEMPHASIS_COEFF * pr[:, :-1]
    energy = np.sum(y_p * y_p, axis=1)
    if np.any(energy == 0.0):
        raise ZeroEnergyError("a target segment has zero pre-emphasized energy")
    err = y_p - p_p
    losses = np.sum(err * err, axis=1) / energy
    dp_p = -2.0 * err / (energy[:, None] * B)
    # transpose of the pre-emphasis filter
    dpr = dp_p.copy()
    dpr[:, :-1] -= PREEMPHASIS_COEFF * dp_p[:, 1:]
    dpred = np.zeros_like(prediction)
    dpred[:, warmup:] = dpr
    return float(np.mean(losses)), dpred


def forward_backward(model: TcnModel, x, target, warmup: int | None = None):
    """Loss (pre-emphasized ESR, first receptive_field - 1 samples excluded)
    and its gradient for every parameter."""
    xb, yb = _as_batch(x), _as_batch(target)
    if xb.shape != yb.shape:
        raise LengthMismatchError(f"input {xb.shape} and target {yb.shape} differ")
    if warmup is None:
        warmup = model.receptive_field - 1
    pred, cache = _forward(model, xb, keep_cache=True)
    loss, dpred = segment_loss(yb, pred, warmup)
    return loss, _backward(model, dpred, cache)


def gradient_check(model: TcnModel, x, target, h: float = 1e-6, rtol: float = 1e-5, atol: float = 1e-8,
                   warmup: int | None = None) -> float:
    """Compare backprop against central differences for every parameter.

    Returns the worst ratio |analytic - fd| / max(atol, rtol * |fd|); the
    gradients agree when the result is at most 1. Parameters are perturbed
    in place and restored.
    """
    _, grads = forward_backward(model, x, target, warmup)
    worst = 0.0
    for name, p in model.params.items():
        for idx in np.ndindex(p.shape):
            old = p[idx]
            p[idx] = old + h
            lp, _ = forward_backward(model, x, target, warmup)
            p[idx] = old - h
            lm, _ = forward_backward(model, x, target, warmup)
            p[idx] = old
            fd = (lp - lm) / (2 * h)
            worst = max(worst, abs(grads[name][idx] - fd) / max(atol, rtol * abs(fd)))
    return worst


@dataclass(frozen=True)
class AdamHyper:
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8


@dataclass
class AdamState:
    step: int = 0
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)


def adam_step(model: TcnModel, grads: dict, state: AdamState, hyper: AdamHyper = AdamHyper()):
    """Bias-corrected Adam update, applied in place. Returns (model, state)."""
    if grads.keys() != model.params.keys():
        raise ValueError("gradient set does not match model parameters")
    for name, g in grads.items():
        if g.shape != model.params[name].shape:
            raise ValueError(f"{name}: gradient shape {g.shape} != parameter shape {model.params[name].shape}")
    state.step += 1
    bc1 = 1.0 - hyper.beta1 ** state.step
    bc2 = 1.0 - hyper.beta2 ** state.step
    for name, g in grads.items():
        m = state.m.setdefault(name, np.zeros_like(g))
        v = state.v.setdefault(name, np.zeros_like(g))
        m *= hyper.beta1
        m += (1.0 - hyper.beta1) * g
        v *= hyper.beta2
        v += (1.0 - hyper.beta2) * (g * g)
        model.params[name] -= hyper.lr * (m / bc1) / (np.sqrt(v / bc2) + hyper.eps)
    return model, state


def save_checkpoint(model: TcnModel, path) -> None:
    """npz archive: format tag, JSON config, one float64 array per parameter."""
    arrays = {f"param/{k}": v for k, v in model.params.items()}
    with open(path, "wb") as fh:
        np.savez(
            fh,
            __format__=np.array(CHECKPOINT_FORMAT),
            __config__=np.array(json.dumps(model.config.to_dict())),
            **arrays,
        )


def load_checkpoint(path) -> TcnModel:
    with np.load(Path(path), allow_pickle=False) as z:
        fmt = str(z["__format__"])
        if fmt != CHECKPOINT_FORMAT:
            raise ValueError(f"unsupported checkpoint format {fmt!r}")
        config = TcnConfig.from_dict(json.loads(str(z["__config__"])))
        params = {k[len("param/"):]: z[k].astype(np.float64) for k in z.files if k.startswith("param/")}
    expected = parameter_shapes(config)
    if {k: v.shape for k, v in params.items()} != expected:
        raise ValueError("checkpoint parameters do not match its config")
    return TcnModel(config, {k: params[k] for k in expected})
