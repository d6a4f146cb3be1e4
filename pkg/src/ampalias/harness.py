"""Sine tests, activation x alpha x seed sweeps, aggregate statistics and CSV reports."""

from __future__ import annotations

import csv
import logging
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .activations import ALPHA_GRID, ALPHA_KINDS, ActivationSpec, format_spec, parse_spec
from .dsp import dft_power_half, generate_sine
from .metrics import AsrBreakdown, SineTestPlan, ZeroHarmonicEnergyError, asr, harmonic_bins
from .nn import TcnConfig, TcnModel, forward
from .train import Dataset, DivergenceError, TrainHyper, evaluate, make_synthetic_dataset, load_dataset, train_model

log = logging.getLogger(__name__)

WORKERS_ENV = "AMPALIAS_WORKERS"
DEFAULT_AMPLITUDE = 0.5
FAILED_ESR = 0.98
SCATTER_MAX_ESR = 0.2
CABINET_CUTOFF_HZ = 6000.0
ROWS_HEADER = ["label", "seed", "esr", "asr", "epochs", "failed"]
AGGREGATE_HEADER = ["label", "n", "asr_mean", "asr_std", "asr_min", "esr_mean", "esr_std", "esr_min"]


def _fmt(x) -> str:
    if isinstance(x, bool):
        return str(int(x))
    if isinstance(x, float):
        return repr(x)
    return str(x)


# --------------------------------------------------------------------------
# sine test
# --------------------------------------------------------------------------

def _warmup(model, plan: SineTestPlan) -> int:
    rf = model.receptive_field if hasattr(model, "receptive_field") else 1
    return rf + plan.N // 8


def _run(model, x: np.ndarray) -> np.ndarray:
    if isinstance(model, TcnModel):
        return forward(model, x)
    return np.asarray(model(x), dtype=np.float64)


def steady_state_response(model, plan: SineTestPlan, amplitude: float = DEFAULT_AMPLITUDE,
                          remove_dc: bool = True) -> np.ndarray:
    """Model output for the last N samples of a phase-continuous test tone."""
    warmup = _warmup(model, plan)
    x = generate_sine(plan.sample_rate, plan.k0, plan.N, amplitude, warmup=warmup).samples
    y = _run(model, x)[warmup:]
    if remove_dc:
        y = y - np.mean(y)
    return y


def sine_test(model, plan: SineTestPlan = SineTestPlan(), amplitude: float = DEFAULT_AMPLITUDE,
              remove_dc: bool = True) -> AsrBreakdown:
    """ASR of ``model`` driven by an exact-bin sine.

    ``model`` is a TcnModel or any callable mapping a sample array to an
    equally long output array. The first receptive_field + N/8 output samples
    are discarded; the DC mean of the retained block is removed unless
    ``remove_dc`` is false.
    """
    return asr(steady_state_response(model, plan, amplitude, remove_dc), plan)


def multi_sine_test(model, plans, amplitude: float = DEFAULT_AMPLITUDE, remove_dc: bool = True) -> float:
    """Mean ASR over several test fundamentals."""
    return float(np.mean([sine_test(model, p, amplitude, remove_dc).asr for p in plans]))


# --------------------------------------------------------------------------
# sweep
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class DataSource:
    """Where training data comes from: a synthetic waveshaper or a WAV pair."""

    kind: str = "synthetic"
    generator: str = "tanh_clip"
    drive: float = 4.0
    length: int = 240_000
    sample_rate: int = 48000
    seed: int = 0
    input: str | None = None
    target: str | None = None
    segment_length: int = 16384
    validation_fraction: float = 0.1

    def build(self) -> Dataset:
        if self.kind == "synthetic":
            return make_synthetic_dataset(self.generator, self.drive, self.length, self.sample_rate, self.seed,
                                          self.segment_length, self.validation_fraction)
        if self.kind == "wav":
            if not self.input or not self.target:
                raise ValueError("wav data source needs 'input' and 'target' paths")
            return load_dataset(self.input, self.target, self.segment_length, self.validation_fraction)
        raise ValueError(f"unknown data source kind {self.kind!r}")


@dataclass(frozen=True)
class SinePlanConfig:
    sample_rate: int = 48017
    N: int = 48017
    k0: tuple = (1249,)
    amplitude: float = DEFAULT_AMPLITUDE
    remove_dc: bool = True

    def __post_init__(self):
        k0 = (self.k0,) if isinstance(self.k0, int) else tuple(int(k) for k in self.k0)
        object.__setattr__(self, "k0", k0)

    @property
    def plans(self) -> list:
        return [SineTestPlan(self.sample_rate, self.N, k) for k in self.k0]


@dataclass(frozen=True)
class ModelShape:
    """TcnConfig without the activation, which the sweep supplies."""

    channels: int = 16
    kernel_size: int = 3
    dilations: tuple = tuple(2 ** i for i in range(9)) * 2
    head_bias: bool = False
    conv_bias: bool = True

    def config(self, activation: ActivationSpec) -> TcnConfig:
        return TcnConfig(self.channels, self.kernel_size, tuple(self.dilations), activation,
                         self.head_bias, self.conv_bias)


def log_alpha_grid(lo: float = 1e-2, hi: float = 1e2, n: int = 100) -> tuple:
    return tuple(float(a) for a in np.logspace(math.log10(lo), math.log10(hi), n))


def expand_activations(labels, alphas) -> list:
    """Labels with an explicit alpha are kept; a bare alpha-kind label such
    as ``False_CustomTanh`` is expanded over ``alphas``."""
    specs = []
    for label in labels:
        head = label.strip()
        parts = head.split("_")
        if len(parts) == 2 and parts[1].lower() in {k.value.lower() for k in ALPHA_KINDS}:
            kind = parse_spec(f"{parts[0]}_{parts[1]}_1").kind
            specs.extend(ActivationSpec(kind, a, parts[0] == "True") for a in alphas)
        else:
            specs.append(parse_spec(head))
    return specs


@dataclass(frozen=True)
class SweepPlan:
    activations: tuple = ("False_CustomTanh",)
    alphas: tuple = ALPHA_GRID
    seeds: int = 5
    seed_base: int = 0
    model: ModelShape = field(default_factory=ModelShape)
    data: DataSource = field(default_factory=DataSource)
    train: TrainHyper = field(default_factory=TrainHyper)
    sine: SinePlanConfig = field(default_factory=SinePlanConfig)

    def __post_init__(self):
        if not self.activations or not self.alphas:
            raise ValueError("activation and alpha grids must be non-empty")
        if self.seeds < 1:
            raise ValueError("seeds must be >= 1")

    @property
    def specs(self) -> list:
        return expand_activations(self.activations, self.alphas)

    @property
    def seed_list(self) -> list:
        return [self.seed_base + i for i in range(self.seeds)]

    @classmethod
    def from_dict(cls, d: dict) -> SweepPlan:
        d = dict(d)
        alphas = d.pop("alphas", ALPHA_GRID)
        if isinstance(alphas, dict):
            alphas = log_alpha_grid(*alphas["logspace"])
        return cls(
            activations=tuple(d.pop("activations", cls.activations)),
            alphas=tuple(float(a) for a in alphas),
            seeds=int(d.pop("seeds", 5)),
            seed_base=int(d.pop("seed_base", 0)),
            model=ModelShape(**d.pop("model", {})),
            data=DataSource(**d.pop("data", {})),
            train=TrainHyper(**d.pop("train", {})),
            sine=SinePlanConfig(**d.pop("sine", {})),
            **d,
        )


@dataclass(frozen=True)
class SweepRow:
    label: str
    seed: int
    esr: float
    asr: float
    epochs: int
    failed: bool
    error: str = ""

    def csv_fields(self) -> list:
        return [self.label, _fmt(self.seed), _fmt(self.esr), _fmt(self.asr), _fmt(self.epochs), _fmt(self.failed)]


@dataclass(frozen=True)
class AggregateStats:
    label: str
    n: int
    asr_mean: float
    asr_std: float
    asr_min: float
    esr_mean: float
    esr_std: float
    esr_min: float

    def csv_fields(self) -> list:
        return [self.label, _fmt(self.n)] + [_fmt(getattr(self, k)) for k in AGGREGATE_HEADER[2:]]


def run_job(plan: SweepPlan, spec: ActivationSpec, seed: int, data: Dataset | None = None) -> SweepRow:
    """Train one (activation, seed) model and measure it. Errors become a failed row."""
    label = format_spec(spec)
    data = data if data is not None else plan.data.build()
    try:
        model, report = train_model(plan.model.config(spec), data, plan.train, seed)
    except DivergenceError as e:
        return SweepRow(label, seed, math.nan, math.nan, e.epoch, True, str(e))
    esr_value = report.final_esr
    try:
        asr_value = float(np.mean([
            sine_test(model, p, plan.sine.amplitude, plan.sine.remove_dc).asr for p in plan.sine.plans]))
    except ZeroHarmonicEnergyError as e:
        return SweepRow(label, seed, esr_value, math.nan, report.epochs, True, str(e))
    return SweepRow(label, seed, esr_value, asr_value, report.epochs, not esr_value < FAILED_ESR)


def _job_entry(args):
    plan, spec, seed = args
    return run_job(plan, spec, seed, _dataset_for(plan))


_DATA_CACHE: dict = {}


def _dataset_for(plan: SweepPlan) -> Dataset:
    key = plan.data
    if key not in _DATA_CACHE:
        _DATA_CACHE.clear()
        _DATA_CACHE[key] = plan.data.build()
    return _DATA_CACHE[key]


def worker_count(default: int = 1) -> int:
    value = os.environ.get(WORKERS_ENV)
    return max(1, int(value)) if value else default


def aggregate(rows) -> list:
    """Mean / population std / min per label over non-failed rows, sorted by mean ASR."""
    by_label: dict = {}
    for r in rows:
        if not r.failed:
            by_label.setdefault(r.label, []).append(r)
    stats = []
    for label, rs in by_label.items():
        a = np.array([r.asr for r in rs])
        e = np.array([r.esr for r in rs])
        stats.append(AggregateStats(label, len(rs), float(a.mean()), float(a.std()), float(a.min()),
                                    float(e.mean()), float(e.std()), float(e.min())))
    stats.sort(key=lambda s: (s.asr_mean, s.label))
    return stats


def run_sweep(plan: SweepPlan, workers: int | None = None):
    """Train and measure every (activation, seed) pair. Rows come back in
    canonical (activation, seed) order whatever the worker count."""
    workers = worker_count() if workers is None else workers
    jobs = [(plan, spec, seed) for spec in plan.specs for seed in plan.seed_list]
    if workers <= 1:
        rows = [_job_entry(j) for j in jobs]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(_job_entry, jobs))
    for r in rows:
        log.info("%s seed=%d esr=%.6g asr=%.6g failed=%s", r.label, r.seed, r.esr, r.asr, r.failed)
    return rows, aggregate(rows)


# --------------------------------------------------------------------------
# exports
# --------------------------------------------------------------------------

def _write_csv(path: Path, header, lines) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(lines)


def export_csv(rows, stats, out_dir) -> tuple:
    """Write ``rows.csv`` (one line per run) and ``aggregate.csv`` (one line
    per non-failed label, ascending mean ASR). Returns both paths."""
    if not rows:
        raise ValueError("no rows to export")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    rows_path, agg_path = out / "rows.csv", out / "aggregate.csv"
    _write_csv(rows_path, ROWS_HEADER, [r.csv_fields() for r in rows])
    _write_csv(agg_path, AGGREGATE_HEADER, [s.csv_fields() for s in sorted(stats, key=lambda s: (s.asr_mean, s.label))])
    return rows_path, agg_path


def export_scatter(stats, path) -> Path:
    """Mean ASR vs mean ESR per label, leaving out labels with mean ESR > 0.2."""
    kept = [s for s in stats if s.esr_mean <= SCATTER_MAX_ESR]
    _write_csv(Path(path), ["label", "asr_mean", "esr_mean"],
               [[s.label, _fmt(s.asr_mean), _fmt(s.esr_mean)] for s in kept])
    return Path(path)


# --------------------------------------------------------------------------
# spectra
# --------------------------------------------------------------------------

def sine_spectrum(model, plan: SineTestPlan = SineTestPlan(), amplitude: float = DEFAULT_AMPLITUDE,
                  remove_dc: bool = True):
    """Per-bin sine-test levels in dB relative to the fundamental, plus
    harmonic and alias masks. DC (bin 0) is flagged as neither."""
    y = steady_state_response(model, plan, amplitude, remove_dc)
    power = dft_power_half(y).magnitudes_sq
    ref = power[plan.k0]
    if not ref > 0:
        raise ZeroHarmonicEnergyError("no energy at the fundamental")
    with np.errstate(divide="ignore"):
        level_db = 10.0 * np.log10(power / ref)
    harmonic = np.zeros(power.shape[0], dtype=bool)
    harmonic[harmonic_bins(plan)] = True
    alias = ~harmonic
    alias[0] = False
    return level_db, harmonic, alias


def max_alias_db(model, plan: SineTestPlan = SineTestPlan(), amplitude: float = DEFAULT_AMPLITUDE,
                 cutoff_hz: float = CABINET_CUTOFF_HZ, remove_dc: bool = True) -> float:
    """Strongest non-harmonic component below ``cutoff_hz``, in dB re the fundamental."""
    level_db, _, alias = sine_spectrum(model, plan, amplitude, remove_dc)
    below = plan.bin_hz(np.arange(level_db.shape[0])) < cutoff_hz
    return float(np.max(level_db[alias & below]))


def _magnitude_db(x: np.ndarray) -> np.ndarray:
    mag = np.abs(np.fft.rfft(x)) / (x.shape[0] / 2)
    with np.errstate(divide="ignore"):
        return 20.0 * np.log10(mag)


def spectrum_report(model: TcnModel, data: Dataset, plan: SineTestPlan, out_dir,
                    amplitude: float = DEFAULT_AMPLITUDE, cutoff_hz: float = CABINET_CUTOFF_HZ,
                    waveform_samples: int = 2048) -> dict:
    """Write waveform.csv, spectrum.csv and sinetest.csv; return a summary dict."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    warmup = model.receptive_field - 1
    x, y = data.validation_input.samples, data.validation_target.samples
    y_hat = forward(model, x)
    y_ss, p_ss = y[warmup:], y_hat[warmup:]
    n_wave = min(waveform_samples, y_ss.shape[0])
    _write_csv(out / "waveform.csv", ["n", "target", "prediction"],
               [[str(i), _fmt(float(y_ss[i])), _fmt(float(p_ss[i]))] for i in range(n_wave)])

    freqs = np.fft.rfftfreq(y_ss.shape[0], 1.0 / data.sample_rate)
    t_db, p_db = _magnitude_db(y_ss), _magnitude_db(p_ss)
    _write_csv(out / "spectrum.csv", ["frequency_hz", "target_db", "prediction_db"],
               [[_fmt(float(f)), _fmt(float(a)), _fmt(float(b))] for f, a, b in zip(freqs, t_db, p_db)])

    level_db, harmonic, alias = sine_spectrum(model, plan, amplitude)
    bins = np.arange(level_db.shape[0])
    hz = plan.bin_hz(bins)
    _write_csv(out / "sinetest.csv", ["bin", "frequency_hz", "level_db", "harmonic", "alias"],
               [[str(k), _fmt(float(hz[k])), _fmt(float(level_db[k])), str(int(harmonic[k])), str(int(alias[k]))]
                for k in bins])
    below = hz < cutoff_hz
    breakdown = sine_test(model, plan, amplitude)
    summary = {
        "asr": breakdown.asr,
        "esr": evaluate(model, data),
        "max_alias_db_below_cutoff": float(np.max(level_db[alias & below])),
        "cutoff_hz": cutoff_hz,
        "fundamental_hz": plan.fundamental_hz,
    }
    return summary
