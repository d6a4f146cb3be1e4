"""Signal container, pre-emphasis, exact-bin sine generation and a DFT that
stays accurate for prime lengths."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

PREEMPHASIS_COEFF = 0.95


@dataclass(frozen=True, eq=False)
class Signal:
    """Mono float64 sample buffer tagged with its sample rate (Hz)."""

    samples: np.ndarray
    sample_rate: int

    def __post_init__(self):
        samples = np.asarray(self.samples, dtype=np.float64)
        if samples.ndim != 1:
            raise ValueError(f"Signal must be 1-D, got shape {samples.shape}")
        if int(self.sample_rate) != self.sample_rate or self.sample_rate <= 0:
            raise ValueError(f"sample_rate must be a positive integer, got {self.sample_rate}")
        object.__setattr__(self, "samples", samples)
        object.__setattr__(self, "sample_rate", int(self.sample_rate))

    def __len__(self):
        return self.samples.shape[0]

    def __eq__(self, other):
        if not isinstance(other, Signal):
            return NotImplemented
        return self.sample_rate == other.sample_rate and np.array_equal(self.samples, other.samples)

    def replace(self, samples) -> Signal:
        return Signal(samples, self.sample_rate)


@dataclass(frozen=True)
class HalfSpectrum:
    """|Y(k)|^2 for bins k = 0 .. (N-1)//2 of an N-point DFT."""

    magnitudes_sq: np.ndarray
    dft_length: int

    def __len__(self):
        return self.magnitudes_sq.shape[0]


def as_samples(x) -> np.ndarray:
    """Return the float64 sample array of a Signal or array-like."""
    if isinstance(x, Signal):
        return x.samples
    return np.asarray(x, dtype=np.float64)


def _require_nonempty(x: np.ndarray, what: str = "input"):
    if x.size == 0:
        raise ValueError(f"{what} must be non-empty")


def preemphasis(x):
    """First-order high-pass 1 - 0.95 z^-1 with zero initial state.

    Works along the last axis, so a (batch, time) array is filtered row-wise.
    Returns a Signal when given a Signal, otherwise an ndarray.
    """
    s = as_samples(x)
    _require_nonempty(s)
    out = s.copy()
    out[..., 1:] -= PREEMPHASIS_COEFF * s[..., :-1]
    if isinstance(x, Signal):
        return x.replace(out)
    return out


def _is_power_of_two(n: int) -> bool:
    return n > 0 and n & (n - 1) == 0


def chirp_dft(x) -> np.ndarray:
    """Full N-point DFT of ``x`` via Bluestein's chirp-z identity.

    kn = (k^2 + n^2 - (k - n)^2) / 2 turns the DFT into a linear convolution
    with a chirp, evaluated with power-of-two FFTs. Chirp phases are reduced
    modulo 2N in integer arithmetic so large N keeps full precision.
    """
    x = np.asarray(x)
    n_len = x.shape[0]
    _require_nonempty(x)
    if _is_power_of_two(n_len):
        return np.fft.fft(x)
    n = np.arange(n_len, dtype=np.int64)
    chirp = np.exp(-1j * np.pi * ((n * n) % (2 * n_len)) / n_len)
    m = 1 << int(2 * n_len - 1).bit_length()
    kernel = np.zeros(m, dtype=np.complex128)
    kernel[:n_len] = np.conj(chirp)
    kernel[m - n_len + 1:] = np.conj(chirp[1:])[::-1]
    conv = np.fft.ifft(np.fft.fft(x * chirp, m) * np.fft.fft(kernel))
    return chirp * conv[:n_len]


def dft_direct(x, bins=None) -> np.ndarray:
    """O(N^2) DFT by explicit summation; reference oracle for ``chirp_dft``.

    Twiddle exponents use exact integer ``k*n mod N``.
    """
    x = np.asarray(x, dtype=np.float64)
    n_len = x.shape[0]
    _require_nonempty(x)
    bins = np.arange(n_len) if bins is None else np.asarray(bins, dtype=np.int64)
    n = np.arange(n_len, dtype=np.int64)
    out = np.empty(bins.shape[0], dtype=np.complex128)
    chunk = max(1, 2_000_000 // n_len)
    for start in range(0, bins.shape[0], chunk):
        k = bins[start:start + chunk, None]
        phase = (k * n[None, :]) % n_len
        out[start:start + chunk] = np.exp(-2j * np.pi * phase / n_len) @ x
    return out


def dft_power_half(x) -> HalfSpectrum:
    """Unwindowed, unpadded power spectrum for bins 0 .. (N-1)//2."""
    s = as_samples(x)
    _require_nonempty(s)
    n_len = s.shape[0]
    spec = chirp_dft(s)[: (n_len - 1) // 2 + 1]
    return HalfSpectrum(spec.real ** 2 + spec.imag ** 2, n_len)


def generate_sine(sample_rate: int, k0: int, N: int, amplitude: float = 1.0, *, warmup: int = 0) -> Signal:
    """``amplitude * sin(2*pi*k0*n/N)`` for n = -warmup .. N-1.

    The tone sits exactly on bin ``k0`` of an N-point DFT, i.e. at
    ``sample_rate * k0 / N`` Hz. Phase is computed from ``k0*n mod N`` so the
    waveform is exactly N-periodic, including the prepended warmup.
    """
    if N < 3 or not 1 <= k0 <= (N - 1) // 2:
        raise ValueError(f"k0 must satisfy 1 <= k0 <= (N-1)/2, got k0={k0}, N={N}")
    if amplitude <= 0:
        raise ValueError("amplitude must be positive")
    if warmup < 0:
        raise ValueError("warmup must be non-negative")
    n = np.arange(-warmup, N, dtype=np.int64)
    phase = (k0 * n) % N
    return Signal(amplitude * np.sin(2 * np.pi * phase / N), sample_rate)
