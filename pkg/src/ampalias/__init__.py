"""Aliasing measurement and activation trade-offs for neural amp models.

Modules: ``dsp`` (signals, prime-length DFT, test tones), ``wav`` (RIFF I/O),
``metrics`` (ESR, ASR), ``activations``, ``nn`` (TCN with backprop),
``train`` (datasets, training loop) and ``harness`` (sine tests, sweeps,
CSV reports).
"""

from .activations import ActivationSpec, Kind, format_spec, parse_spec
from .dsp import Signal, generate_sine
from .harness import SweepPlan, run_sweep, sine_test
from .metrics import AsrBreakdown, SineTestPlan, asr, esr, esr_preemphasized, harmonic_bins, residue_coverage
from .nn import TcnConfig, TcnModel, forward, init_model, load_checkpoint, save_checkpoint
from .train import Dataset, TrainHyper, make_synthetic_dataset, train_model

__version__ = "0.1.0"

__all__ = [
    "ActivationSpec", "AsrBreakdown", "Dataset", "Kind", "Signal", "SineTestPlan", "SweepPlan", "TcnConfig",
    "TcnModel", "TrainHyper", "asr", "esr", "esr_preemphasized", "format_spec", "forward", "generate_sine",
    "harmonic_bins", "init_model", "load_checkpoint", "make_synthetic_dataset", "parse_spec", "residue_coverage",
    "run_sweep", "save_checkpoint", "sine_test", "train_model",
]
