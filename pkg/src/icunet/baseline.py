"""Linear-phase FIR bandpass and zero-phase forward-backward filtering."""

from __future__ import annotations

import numpy as np

from .errors import InvalidBand, TooShort
from .signalgen import Segment, SignalSet


def design_fir_bandpass(fs: float, low: float, high: float, taps: int = 255) -> np.ndarray:
    """Hamming-windowed sinc bandpass with an exact null at DC.

    The low edge of a short filter leaks DC; subtracting a scaled copy of
    the window (a lowpass with the same support) removes it without
    touching the passband. Gain is then normalized to 1 at the band center.
    """
    if not 0 < low < high < fs / 2:
        raise InvalidBand(f"need 0 < low < high < fs/2, got low={low}, high={high}, fs={fs}")
    if taps < 3 or taps % 2 == 0:
        raise InvalidBand(f"taps must be odd and >= 3, got {taps}")
    n = np.arange(taps) - (taps - 1) / 2
    f1, f2 = low / fs, high / fs
    ideal = 2 * f2 * np.sinc(2 * f2 * n) - 2 * f1 * np.sinc(2 * f1 * n)
    window = np.hamming(taps)
    h = ideal * window
    h -= window * (h.sum() / window.sum())
    center = (low + high) / 2
    gain = abs(np.sum(h * np.exp(-2j * np.pi * center / fs * np.arange(taps))))
    return h / gain


def frequency_response(h: np.ndarray, freqs, fs: float) -> np.ndarray:
    """Complex response of FIR ``h`` at the given frequencies (Hz)."""
    freqs = np.atleast_1d(np.asarray(freqs, dtype=np.float64))
    k = np.arange(len(h))
    return np.exp(-2j * np.pi * np.outer(freqs / fs, k)) @ h


def _filtfilt_rows(x: np.ndarray, h: np.ndarray) -> np.ndarray:
    taps = len(h)
    t = x.shape[-1]
    if t <= 3 * taps:
        raise TooShort(f"signal length {t} must exceed 3 * taps = {3 * taps}")
    pad = [(0, 0)] * (x.ndim - 1) + [(taps, taps)]
    xp = np.pad(x, pad, mode="symmetric")
    out = np.empty_like(xp)
    for idx in np.ndindex(xp.shape[:-1]):
        row = np.convolve(xp[idx], h)[:xp.shape[-1]]
        out[idx] = np.convolve(row[::-1], h)[:xp.shape[-1]][::-1]
    return out[..., taps:taps + t]


def filtfilt(seg, coeffs: np.ndarray):
    """Zero-phase filtering (forward, then time-reversed) of every channel.

    Edges are extended by symmetric reflection of ``len(coeffs)`` samples.
    Accepts a :class:`Segment`, a :class:`SignalSet` or a raw array.
    """
    h = np.asarray(coeffs, dtype=np.float64)
    if isinstance(seg, Segment):
        return Segment(_filtfilt_rows(seg.data.astype(np.float64), h), seg.fs)
    if isinstance(seg, SignalSet):
        return SignalSet(_filtfilt_rows(seg.data.astype(np.float64), h), seg.fs)
    return _filtfilt_rows(np.asarray(seg, dtype=np.float64), h)


class BandpassModel:
    """Callable baseline mapping ``(batch, c, t)`` inputs to filtered outputs."""

    def __init__(self, fs: float, low: float = 1.0, high: float = 50.0, taps: int = 255):
        self.coeffs = design_fir_bandpass(fs, low, high, taps)

    def __call__(self, x):
        return filtfilt(np.asarray(x), self.coeffs)
