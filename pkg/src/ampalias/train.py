"""Datasets, segment batching and the Adam training loop with early stopping."""

from __future__ import annotations

import json
import logging
import time
from dataclasses import asdict, dataclass, field

import numpy as np

from .dsp import PREEMPHASIS_COEFF, Signal
from .metrics import esr
from .nn import AdamHyper, AdamState, TcnConfig, TcnModel, adam_step, forward, forward_backward, init_model, receptive_field
from .wav import load_wav

log = logging.getLogger(__name__)

SYNTHETIC_KINDS = ("tanh_clip", "hard_clip")
# segments below this fraction of the mean segment energy are skipped
SILENCE_THRESHOLD = 1e-4


class DivergenceError(RuntimeError):
    def __init__(self, epoch: int, step: int, loss: float):
        super().__init__(f"training diverged at epoch {epoch}, step {step} (loss={loss})")
        self.epoch = epoch
        self.step = step
        self.loss = loss


@dataclass(frozen=True, eq=False)
class Dataset:
    """Aligned input/target pair. The last ``validation_fraction`` of the
    audio is held out as one contiguous validation block."""

    input: Signal
    target: Signal
    segment_length: int = 16384
    validation_fraction: float = 0.1

    def __post_init__(self):
        if self.input.sample_rate != self.target.sample_rate:
            raise ValueError(f"sample rate mismatch: {self.input.sample_rate} vs {self.target.sample_rate}")
        if len(self.input) != len(self.target):
            raise ValueError(f"length mismatch: {len(self.input)} vs {len(self.target)}")
        if len(self.input) == 0:
            raise ValueError("empty dataset")
        if not 0.0 <= self.validation_fraction < 1.0:
            raise ValueError("validation_fraction must be in [0, 1)")
        if self.segment_length < 2:
            raise ValueError("segment_length must be at least 2")

    @property
    def sample_rate(self) -> int:
        return self.input.sample_rate

    @property
    def split_index(self) -> int:
        return len(self.input) - int(round(len(self.input) * self.validation_fraction))

    @property
    def train_input(self) -> np.ndarray:
        return self.input.samples[: self.split_index]

    @property
    def train_target(self) -> np.ndarray:
        return self.target.samples[: self.split_index]

    @property
    def validation_input(self) -> Signal:
        return self.input.replace(self.input.samples[self.split_index:])

    @property
    def validation_target(self) -> Signal:
        return self.target.replace(self.target.samples[self.split_index:])

    def segment_starts(self, warmup: int) -> np.ndarray:
        """Train-segment offsets; consecutive segments overlap by ``warmup``
        samples so every train sample after the first warmup reaches the loss."""
        stride = self.segment_length - warmup
        if stride <= 0:
            raise ValueError(
                f"segment_length {self.segment_length} must exceed the receptive field {warmup + 1}")
        last = self.split_index - self.segment_length
        if last < 0:
            raise ValueError("training split is shorter than one segment")
        starts = np.arange(0, last + 1, stride)
        # near-silent segments make the per-segment ratio ill-conditioned
        y = self.train_target
        idx = starts[:, None] + np.arange(warmup, self.segment_length)[None, :]
        seg = y[idx]
        seg_p = seg[:, 1:] - PREEMPHASIS_COEFF * seg[:, :-1]
        energy = np.sum(seg_p * seg_p, axis=1)
        keep = energy > SILENCE_THRESHOLD * max(float(np.mean(energy)), np.finfo(float).tiny)
        if not np.any(keep):
            raise ValueError("every training segment is silent")
        return starts[keep]

    def validation_segments(self) -> int:
        return (len(self.input) - self.split_index) // self.segment_length


def _bandlimited_noise(n: int, cutoff: float, sample_rate: int, rng) -> np.ndarray:
    spec = np.fft.rfft(rng.standard_normal(n))
    freqs = np.fft.rfftfreq(n, 1.0 / sample_rate)
    spec[freqs > cutoff] = 0.0
    x = np.fft.irfft(spec, n)
    rms = np.sqrt(np.mean(x * x))
    return x / rms if rms > 0 else x


def _exp_sweep(n: int, f_start: float, f_stop: float, sample_rate: int) -> np.ndarray:
    t = np.arange(n) / sample_rate
    dur = n / sample_rate
    k = np.log(f_stop / f_start)
    return np.sin(2 * np.pi * f_start * dur / k * (np.exp(t * k / dur) - 1.0))


def synthetic_excitation(length: int, sample_rate: int, seed: int, peak: float = 0.8) -> np.ndarray:
    """Random sequence of band-limited noise bursts, exponential sine
    sweeps, steady tones and silence, faded at the joins, scaled to ``peak``."""
    rng = np.random.default_rng(seed)
    out = np.zeros(length)
    fade = 64
    pos = 0
    while pos < length:
        n = min(int(rng.integers(sample_rate // 20, sample_rate // 4)), length - pos)
        choice = rng.choice(4, p=[0.4, 0.35, 0.15, 0.1])
        if choice == 0:
            block = rng.uniform(0.05, 0.35) * _bandlimited_noise(n, rng.uniform(2000, 12000), sample_rate, rng)
        elif choice == 1:
            block = rng.uniform(0.1, 1.0) * _exp_sweep(n, rng.uniform(40, 400), rng.uniform(2000, 12000), sample_rate)
        elif choice == 2:
            f = rng.uniform(80, 5000)
            block = rng.uniform(0.1, 1.0) * np.sin(2 * np.pi * f * np.arange(n) / sample_rate + rng.uniform(0, 2 * np.pi))
        else:
            block = np.zeros(n)
        if n > 2 * fade:
            ramp = 0.5 - 0.5 * np.cos(np.pi * np.arange(fade) / fade)
            block[:fade] *= ramp
            block[-fade:] *= ramp[::-1]
        out[pos:pos + n] = block
        pos += n
    m = np.max(np.abs(out))
    return out * (peak / m) if m > 0 else out


def waveshape(kind: str, drive: float, x: np.ndarray) -> np.ndarray:
    if kind == "tanh_clip":
        return np.tanh(drive * x) / np.tanh(drive)
    if kind == "hard_clip":
        return np.clip(drive * x, -1.0, 1.0)
    raise ValueError(f"unknown synthetic target {kind!r}; expected one of {SYNTHETIC_KINDS}")


def make_synthetic_dataset(kind: str, drive: float, length: int, sample_rate: int = 48000, seed: int = 0,
                           segment_length: int = 16384, validation_fraction: float = 0.1) -> Dataset:
    """Synthetic excitation through a static waveshaper, in place of recorded amp data."""
    if length <= 0 or drive <= 0:
        raise ValueError("length and drive must be positive")
    x = synthetic_excitation(length, sample_rate, seed)
    y = waveshape(kind, drive, x)
    return Dataset(Signal(x, sample_rate), Signal(y, sample_rate), segment_length, validation_fraction)


def load_dataset(input_path, target_path, segment_length: int = 16384, validation_fraction: float = 0.1,
                 max_length_mismatch: float = 0.1) -> Dataset:
    x, y = load_wav(input_path), load_wav(target_path)
    if x.sample_rate != y.sample_rate:
        raise ValueError(f"sample rate mismatch: {x.sample_rate} vs {y.sample_rate}")
    n = min(len(x), len(y))
    mismatch = abs(len(x) - len(y)) / max(len(x), len(y))
    if mismatch > max_length_mismatch:
        raise ValueError(f"input/target lengths differ by {mismatch:.1%}")
    if mismatch > 0.01:
        log.warning("input/target lengths differ by %.1f%%; trimming to %d samples", 100 * mismatch, n)
    return Dataset(x.replace(x.samples[:n]), y.replace(y.samples[:n]), segment_length, validation_fraction)


@dataclass(frozen=True)
class TrainHyper:
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    batch_size: int = 8
    max_epochs: int = 10
    max_steps: int | None = None
    patience: int = 2
    min_delta: float = 1e-4
    restore_best: bool = True

    @property
    def adam(self) -> AdamHyper:
        return AdamHyper(self.lr, self.beta1, self.beta2, self.eps)


@dataclass
class TrainReport:
    seed: int
    train_loss: list = field(default_factory=list)
    val_esr: list = field(default_factory=list)
    epochs: int = 0
    steps: int = 0
    stop_reason: str = ""
    seconds: float = 0.0
    final_esr: float = float("nan")

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self, **kw) -> str:
        return json.dumps(self.to_dict(), **kw)


def evaluate(model: TcnModel, data: Dataset) -> float:
    """Plain (not pre-emphasized) ESR over the whole validation block,
    skipping the first receptive_field - 1 samples."""
    x, y = data.validation_input, data.validation_target
    warmup = model.receptive_field - 1
    if len(x) <= warmup:
        raise ValueError("validation split is shorter than the receptive field")
    y_hat = forward(model, x.samples)
    return esr(y.samples[warmup:], y_hat[warmup:])


def train_model(config: TcnConfig, data: Dataset, hyper: TrainHyper = TrainHyper(), seed: int = 0):
    """Train one model; returns (model, TrainReport). Deterministic per
    (config, data, hyper, seed)."""
    t_start = time.perf_counter()
    init_seed, shuffle_seed = np.random.SeedSequence(seed).generate_state(2)
    model = init_model(config, int(init_seed))
    rng = np.random.default_rng(int(shuffle_seed))
    warmup = receptive_field(config) - 1
    starts = data.segment_starts(warmup)
    L = data.segment_length
    x_train, y_train = data.train_input, data.train_target
    state = AdamState()
    report = TrainReport(seed=seed)
    best = (np.inf, model.copy())
    bad_epochs = 0
    for epoch in range(1, hyper.max_epochs + 1):
        order = rng.permutation(starts)
        losses = []
        for b in range(0, len(order), hyper.batch_size):
            idx = order[b:b + hyper.batch_size, None] + np.arange(L)[None, :]
            loss, grads = forward_backward(model, x_train[idx], y_train[idx], warmup)
            if not np.isfinite(loss) or not all(np.all(np.isfinite(g)) for g in grads.values()):
                raise DivergenceError(epoch, report.steps + 1, loss)
            adam_step(model, grads, state, hyper.adam)
            report.steps += 1
            losses.append(loss)
            if hyper.max_steps is not None and report.steps >= hyper.max_steps:
                break
        report.train_loss.append(float(np.mean(losses)))
        val = evaluate(model, data)
        if not np.isfinite(val):
            raise DivergenceError(epoch, report.steps, val)
        report.val_esr.append(val)
        report.epochs = epoch
        log.debug("epoch %d: train %.6f val %.6f", epoch, report.train_loss[-1], val)
        if val < best[0] - hyper.min_delta:
            best = (val, model.copy())
            bad_epochs = 0
        else:
            if val < best[0]:
                best = (val, model.copy())
            bad_epochs += 1
        if hyper.max_steps is not None and report.steps >= hyper.max_steps:
            report.stop_reason = "max_steps"
            break
        if bad_epochs >= hyper.patience:
            report.stop_reason = "early_stopping"
            break
    else:
        report.stop_reason = "max_epochs"
    if hyper.restore_best:
        model = best[1]
    report.final_esr = evaluate(model, data)
    report.seconds = time.perf_counter() - t_start
    return model, report
