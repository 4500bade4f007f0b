"""Amplitude, velocity, acceleration and spectral losses and their ensemble.

Every loss takes the reconstruction ``y`` and target ``x`` as ``(c, t)`` or
``(batch, c, t)`` arrays. A batch loss is the mean of the per-sample losses.
With ``return_grad=True`` the gradient with respect to ``y`` is returned
alongside the value.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConstantSpectrum, InvalidSpec, NoBins, ShapeMismatch, ZeroWeights

BAND = (1.0, 50.0)
STD_FLOOR = 1e-12


@dataclass(frozen=True)
class LossWeights:
    amp: float = 1.0
    vel: float = 1.0
    acc: float = 1.0
    freq: float = 1.0

    def __post_init__(self):
        if min(self.as_tuple()) < 0:
            raise InvalidSpec(f"loss weights must be nonnegative, got {self.as_tuple()}")

    def as_tuple(self) -> tuple[float, float, float, float]:
        return (self.amp, self.vel, self.acc, self.freq)

    @property
    def total(self) -> float:
        return float(sum(self.as_tuple()))

    @classmethod
    def parse(cls, text: str) -> "LossWeights":
        """From ``"1,0,0,0"``."""
        values = [float(v) for v in text.split(",")]
        if len(values) != 4:
            raise InvalidSpec(f"expected four comma-separated weights, got {text!r}")
        return cls(*values)


@dataclass(frozen=True)
class Spectrum:
    values: np.ndarray
    bin_freqs: np.ndarray


def _check(y, x):
    if y.shape != x.shape:
        raise ShapeMismatch(f"shapes differ: {y.shape} vs {x.shape}")
    if y.ndim not in (2, 3):
        raise ShapeMismatch(f"expected (c, t) or (batch, c, t), got {y.shape}")


def _n_samples(y) -> int:
    return y.shape[0] if y.ndim == 3 else 1


def _mse(ry, rx, count, return_grad):
    """Mean of squared residual over the last two axes, averaged over samples."""
    r = ry - rx
    value = float(np.sum(r * r) / (count * _n_samples(ry)))
    if not return_grad:
        return value
    return value, (2.0 / (count * _n_samples(ry))) * r


def loss_amp(y, x, return_grad=False):
    _check(y, x)
    c, t = y.shape[-2:]
    return _mse(y, x, c * t, return_grad)


def _difference_loss(y, x, order, return_grad):
    _check(y, x)
    c, t = y.shape[-2:]
    if t <= order:
        raise ShapeMismatch(f"length {t} too short for a difference of order {order}")
    r = y - x
    d = np.diff(r, n=order, axis=-1)
    count = c * (t - order) * _n_samples(y)
    value = float(np.sum(d * d) / count)
    if not return_grad:
        return value
    g = (2.0 / count) * d
    # adjoint of the forward difference, applied ``order`` times
    for _ in range(order):
        pad = [(0, 0)] * (g.ndim - 1) + [(1, 1)]
        g = -np.diff(np.pad(g, pad), axis=-1)
    return value, g


def loss_vel(y, x, return_grad=False):
    """MSE of first forward differences, normalized by ``c * (t - 1)``."""
    return _difference_loss(y, x, 1, return_grad)


def loss_acc(y, x, return_grad=False):
    """MSE of second forward differences, normalized by ``c * (t - 2)``."""
    return _difference_loss(y, x, 2, return_grad)


# -- spectral estimate ---------------------------------------------------------

def band_bins(t: int, fs: float, band=BAND) -> np.ndarray:
    """rfft bin indices ``k`` with ``band[0] <= k * fs / t <= band[1]``."""
    k = np.arange(t // 2 + 1)
    f = k * fs / t
    tol = 1e-9 * fs
    return k[(f >= band[0] - tol) & (f <= band[1] + tol)]


def _psd(y, fs, bins):
    t = y.shape[-1]
    spec = np.fft.rfft(y, axis=-1)[..., bins]
    power = (spec.real ** 2 + spec.imag ** 2) / (fs * t)
    return power, spec


def _zscore_bins(p):
    mean = p.mean(axis=-1, keepdims=True)
    std = p.std(axis=-1, keepdims=True)
    if np.any(std < STD_FLOOR * np.maximum(1.0, np.abs(mean))):
        raise ConstantSpectrum("a channel has a flat in-band spectrum")
    return (p - mean) / std, std


def psd_zscored(y, fs: float, band=BAND) -> Spectrum:
    """Rectangular-window periodogram ``|DFT|^2 / (fs * t)`` restricted to
    ``band`` and z-scored across bins per channel."""
    y = np.asarray(y, dtype=np.float64)
    bins = band_bins(y.shape[-1], fs, band)
    if bins.size < 2:
        raise NoBins(f"t={y.shape[-1]}, fs={fs} leaves fewer than two bins in {band} Hz")
    power, _ = _psd(y, fs, bins)
    values, _ = _zscore_bins(power)
    return Spectrum(values, bins * fs / y.shape[-1])


def _zscored_with_grad_parts(y, fs, band):
    bins = band_bins(y.shape[-1], fs, band)
    if bins.size < 2:
        raise NoBins(f"t={y.shape[-1]}, fs={fs} leaves fewer than two bins in {band} Hz")
    power, spec = _psd(y, fs, bins)
    z, std = _zscore_bins(power)
    return z, std, spec, bins


def loss_freq(y, x, fs: float, return_grad=False, band=BAND):
    """MSE between z-scored in-band power spectra."""
    _check(y, x)
    c, t = y.shape[-2:]
    zy, std, spec, bins = _zscored_with_grad_parts(y, fs, band)
    zx = _zscored_with_grad_parts(x, fs, band)[0]
    out = _mse(zy, zx, c * bins.size, return_grad)
    if not return_grad:
        return out
    value, dz = out
    # z-score backward: dp = (dz - mean(dz) - z * mean(dz * z)) / std
    dp = (dz - dz.mean(axis=-1, keepdims=True)
          - zy * (dz * zy).mean(axis=-1, keepdims=True)) / std
    # periodogram backward: d|X_k|^2/dy_j = 2 Re(X_k e^{+2 pi i jk/t})
    coef = np.zeros(y.shape[:-1] + (t // 2 + 1,), dtype=np.complex128)
    coef[..., bins] = dp * spec
    interior = (bins > 0) & (2 * bins != t)
    coef[..., bins[interior]] *= 0.5
    grad = (2.0 / fs) * np.fft.irfft(coef, n=t, axis=-1)
    return value, grad.astype(y.dtype, copy=False)


def loss_ensemble(y, x, weights: LossWeights, fs: float, return_grad=False):
    """Weighted mean of the four losses; zero-weight terms are skipped."""
    _check(y, x)
    total = weights.total
    if total <= 0:
        raise ZeroWeights("at least one loss weight must be positive")
    terms = (
        (weights.amp, lambda g: loss_amp(y, x, g)),
        (weights.vel, lambda g: loss_vel(y, x, g)),
        (weights.acc, lambda g: loss_acc(y, x, g)),
        (weights.freq, lambda g: loss_freq(y, x, fs, g)),
    )
    value = 0.0
    grad = np.zeros_like(y) if return_grad else None
    for alpha, fn in terms:
        if alpha == 0:
            continue
        a = alpha / total
        if return_grad:
            v, g = fn(True)
            grad += a * g
        else:
            v = fn(False)
        value += a * v
    return (value, grad) if return_grad else value


def all_losses(y, x, fs: float) -> dict[str, float]:
    """The four loss values keyed ``amp``, ``vel``, ``acc``, ``freq``."""
    return {
        "amp": loss_amp(y, x),
        "vel": loss_vel(y, x),
        "acc": loss_acc(y, x),
        "freq": loss_freq(y, x, fs),
    }


def per_bin_abs_error(y, x, fs: float, band=BAND) -> np.ndarray:
    """Channel-averaged ``|F_Y - F_X|`` per bin; batched input is averaged over samples too."""
    _check(y, x)
    fy = psd_zscored(y, fs, band).values
    fx = psd_zscored(x, fs, band).values
    err = np.abs(fy - fx)
    return err.reshape(-1, err.shape[-1]).mean(axis=0)
