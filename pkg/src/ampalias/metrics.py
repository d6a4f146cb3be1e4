"""Error-to-signal ratio and the aliasing-to-signal ratio (ASR) sine test.

ASR = E_A / E_H for an exact-bin test tone at bin k0 of an N-point DFT:

    E_Y = sum_{k=0}^{(N-1)/2} |Y(k)|^2
    E_H = sum_{m=1}^{N0} |Y(m k0)|^2,   N0 = floor((N-1) / (2 k0))
    E_A = E_Y - E_H

With gcd(k0, N) = 1 the harmonics m*k0 mod N visit every bin once before
any bin is hit twice, so every non-harmonic bin holds aliasing only.
Note that bin 0 (DC) is part of E_Y and therefore counts as aliasing.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np

from .dsp import Signal, as_samples, dft_power_half, preemphasis

STANDARD_SAMPLE_RATE = 48017
STANDARD_N = 48017
STANDARD_K0 = 1249


class LengthMismatchError(ValueError):
    pass


class ZeroEnergyError(ValueError):
    pass


class ZeroHarmonicEnergyError(ZeroEnergyError):
    """The sine test saw no energy on any harmonic bin (silent/dead model)."""


def is_prime(n: int) -> bool:
    if n < 2:
        return False
    if n % 2 == 0:
        return n == 2
    return all(n % d for d in range(3, math.isqrt(n) + 1, 2))


@dataclass(frozen=True)
class SineTestPlan:
    sample_rate: int = STANDARD_SAMPLE_RATE
    N: int = STANDARD_N
    k0: int = STANDARD_K0
    require_prime: bool = False

    def __post_init__(self):
        if self.N < 3 or not 1 <= self.k0 <= (self.N - 1) // 2:
            raise ValueError(f"need 1 <= k0 <= (N-1)/2, got k0={self.k0}, N={self.N}")
        if math.gcd(self.k0, self.N) != 1:
            raise ValueError(f"k0={self.k0} and N={self.N} are not coprime")
        if self.require_prime and not is_prime(self.N):
            raise ValueError(f"N={self.N} is not prime")
        if self.sample_rate <= 0:
            raise ValueError("sample_rate must be positive")

    @property
    def fundamental_hz(self) -> float:
        return self.sample_rate * self.k0 / self.N

    @property
    def n_harmonics(self) -> int:
        return (self.N - 1) // (2 * self.k0)

    def bin_hz(self, k) -> np.ndarray:
        return np.asarray(k) * self.sample_rate / self.N


@dataclass(frozen=True)
class AsrBreakdown:
    total_energy: float
    harmonic_energy: float
    aliased_energy: float
    asr: float
    harmonic_bins: tuple

    def to_dict(self) -> dict:
        d = asdict(self)
        d["harmonic_bins"] = list(self.harmonic_bins)
        return d


def _pair(target, prediction):
    if isinstance(target, Signal) and isinstance(prediction, Signal):
        if target.sample_rate != prediction.sample_rate:
            raise ValueError(
                f"sample rate mismatch: {target.sample_rate} vs {prediction.sample_rate}")
    y, y_hat = as_samples(target), as_samples(prediction)
    if y.shape != y_hat.shape:
        raise LengthMismatchError(f"length mismatch: {y.shape} vs {y_hat.shape}")
    return y, y_hat


def esr(target, prediction) -> float:
    """sum |y - y_hat|^2 / sum |y|^2."""
    y, y_hat = _pair(target, prediction)
    energy = float(np.sum(y * y))
    if energy == 0.0:
        raise ZeroEnergyError("target has zero energy")
    err = y - y_hat
    return float(np.sum(err * err)) / energy


def esr_preemphasized(target, prediction) -> float:
    """ESR after passing both signals through 1 - 0.95 z^-1 (the training loss)."""
    y, y_hat = _pair(target, prediction)
    return esr(preemphasis(y), preemphasis(y_hat))


def harmonic_bins(plan: SineTestPlan) -> list:
    return [m * plan.k0 for m in range(1, plan.n_harmonics + 1)]


def asr(y, plan: SineTestPlan) -> AsrBreakdown:
    """Aliasing-to-signal ratio of a steady-state block of exactly N samples."""
    x = as_samples(y)
    if x.shape != (plan.N,):
        raise LengthMismatchError(f"sine-test block must have N={plan.N} samples, got {x.shape}")
    if isinstance(y, Signal) and y.sample_rate != plan.sample_rate:
        raise ValueError(f"signal rate {y.sample_rate} != plan rate {plan.sample_rate}")
    power = dft_power_half(x).magnitudes_sq
    bins = harmonic_bins(plan)
    e_y = float(np.sum(power))
    e_h = float(np.sum(power[bins]))
    if not e_h > 0.0:
        raise ZeroHarmonicEnergyError("no energy on harmonic bins")
    e_a = e_y - e_h
    return AsrBreakdown(e_y, e_h, e_a, max(e_a, 0.0) / e_h, tuple(bins))


def residue_coverage(k0: int, N: int) -> bool:
    """True iff {k0*n mod N : n = 0..N-1} hits all N residues."""
    if N < 2 or not 1 <= k0 < N:
        raise ValueError(f"need N >= 2 and 1 <= k0 < N, got k0={k0}, N={N}")
    residues = (k0 * np.arange(N, dtype=np.int64)) % N
    return np.unique(residues).size == N
