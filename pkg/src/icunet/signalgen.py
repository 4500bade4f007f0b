"""Synthetic sinusoid datasets and shared preprocessing primitives.

Segments are computed in float64. Dataset containers (:class:`SignalSet`,
:class:`PairedDataset`) hold float32 arrays, the on-disk storage type, so that
persistence round-trips are bit-exact.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterator, Sequence

import numpy as np

from .errors import ConstantChannel, HeterogeneousShapes, InvalidSpec, ShapeMismatch

STD_FLOOR = 1e-12


@dataclass(frozen=True)
class Segment:
    """A ``c x t`` block of samples recorded at ``fs`` Hz."""

    data: np.ndarray
    fs: float

    def __post_init__(self):
        data = np.asarray(self.data)
        if data.ndim != 2:
            raise ShapeMismatch(f"segment data must be 2-D (c x t), got shape {data.shape}")
        if self.fs <= 0:
            raise InvalidSpec(f"sampling rate must be positive, got {self.fs}")
        object.__setattr__(self, "data", data)

    @property
    def c(self) -> int:
        return self.data.shape[0]

    @property
    def t(self) -> int:
        return self.data.shape[1]


@dataclass
class SignalSet:
    """``n`` equally shaped segments stored as one ``(n, c, t)`` float32 array.

    Behaves as a read-only sequence of :class:`Segment`.
    """

    data: np.ndarray
    fs: float

    def __post_init__(self):
        self.data = np.ascontiguousarray(self.data, dtype=np.float32)
        if self.data.ndim != 3:
            raise ShapeMismatch(f"expected (n, c, t) array, got shape {self.data.shape}")

    @classmethod
    def from_segments(cls, segments: Sequence[Segment], fs: float | None = None) -> "SignalSet":
        if not segments:
            if fs is None:
                raise InvalidSpec("cannot infer fs for an empty segment list")
            return cls(np.zeros((0, 1, 1), dtype=np.float32), fs)
        shapes = {s.data.shape for s in segments}
        rates = {s.fs for s in segments}
        if len(shapes) != 1 or len(rates) != 1:
            raise HeterogeneousShapes(f"segments differ in shape/fs: {shapes}, {rates}")
        return cls(np.stack([s.data for s in segments]), segments[0].fs)

    def __len__(self) -> int:
        return self.data.shape[0]

    def __getitem__(self, i: int) -> Segment:
        return Segment(self.data[i].astype(np.float64), self.fs)

    def __iter__(self) -> Iterator[Segment]:
        for i in range(len(self)):
            yield self[i]

    @property
    def channels(self) -> int:
        return self.data.shape[1]

    @property
    def length(self) -> int:
        return self.data.shape[2]

    def subset(self, index) -> "SignalSet":
        return SignalSet(self.data[index], self.fs)


@dataclass
class PairedDataset:
    """Aligned (noisy input, clean target) pairs.

    ``categories`` labels each pair (for mixtures: ``"Brain"`` for
    self-pairs or the artifact class name); ``counts`` tallies them.
    """

    noisy: np.ndarray
    clean: np.ndarray
    fs: float
    categories: tuple[str, ...] = ()
    counts: dict[str, int] = field(default_factory=dict)

    def __post_init__(self):
        self.noisy = np.ascontiguousarray(self.noisy, dtype=np.float32)
        self.clean = np.ascontiguousarray(self.clean, dtype=np.float32)
        if self.noisy.shape != self.clean.shape or self.noisy.ndim != 3:
            raise ShapeMismatch(
                f"noisy {self.noisy.shape} and clean {self.clean.shape} must be equal (n, c, t)"
            )
        if not self.categories:
            self.categories = ("clean",) * len(self)
        self.categories = tuple(self.categories)
        if len(self.categories) != len(self):
            raise ShapeMismatch("one category label per pair is required")
        if not self.counts:
            self.counts = _tally(self.categories)

    @classmethod
    def self_pairs(cls, signals: SignalSet) -> "PairedDataset":
        """Self-reconstruction pairs (input equals target)."""
        return cls(signals.data, signals.data, signals.fs)

    def __len__(self) -> int:
        return self.noisy.shape[0]

    @property
    def channels(self) -> int:
        return self.noisy.shape[1]

    @property
    def length(self) -> int:
        return self.noisy.shape[2]

    def subset(self, index) -> "PairedDataset":
        index = np.arange(len(self))[index]
        cats = tuple(self.categories[i] for i in index)
        return PairedDataset(self.noisy[index], self.clean[index], self.fs, cats)

    def where(self, category: str) -> "PairedDataset":
        return self.subset(np.array([c == category for c in self.categories], dtype=bool))


def _tally(categories) -> dict[str, int]:
    counts: dict[str, int] = {}
    for c in categories:
        counts[c] = counts.get(c, 0) + 1
    return counts


@dataclass(frozen=True)
class SynthSpec:
    n_samples: int
    channels: int
    length: int
    fs: float = 256.0
    n_components: int = 6
    freq_range: tuple[float, float] = (0.0, 50.0)
    amp_range: tuple[float, float] = (0.0, 1.0)
    phase_range: tuple[float, float] = (0.0, 2 * np.pi)
    seed: int = 0

    def validate(self) -> None:
        if self.n_samples < 0 or self.channels < 1 or self.length < 4:
            raise InvalidSpec("need n_samples >= 0, channels >= 1, length >= 4")
        if self.fs <= 0:
            raise InvalidSpec(f"fs must be positive, got {self.fs}")
        if self.n_components < 1:
            raise InvalidSpec("n_components must be >= 1")
        for name in ("freq_range", "amp_range", "phase_range"):
            lo, hi = getattr(self, name)
            if not hi >= lo:
                raise InvalidSpec(f"{name} is empty: {(lo, hi)}")
        lo, hi = self.freq_range
        if lo < 0 or hi > self.fs / 2:
            raise InvalidSpec(f"freq_range {self.freq_range} leaves (0, fs/2 = {self.fs / 2})")


def synth_sinusoid_dataset(spec: SynthSpec, normalize: bool = True, chunk: int = 256) -> SignalSet:
    """Sum-of-sinusoids dataset, each channel z-scored.

    Parameters are drawn from one PCG64 stream seeded by ``spec.seed``, in
    the order segment, channel, component, then (frequency, amplitude,
    phase).
    """
    spec.validate()
    rng = np.random.default_rng(spec.seed)
    k = spec.n_components
    u = rng.random((spec.n_samples, spec.channels, k, 3))
    bounds = np.array([spec.freq_range, spec.amp_range, spec.phase_range], dtype=np.float64)
    params = bounds[:, 0] + (bounds[:, 1] - bounds[:, 0]) * u
    t = np.arange(spec.length) / spec.fs
    out = np.empty((spec.n_samples, spec.channels, spec.length), dtype=np.float32)
    for start in range(0, spec.n_samples, chunk):
        p = params[start:start + chunk]
        f, a, phi = p[..., 0, None], p[..., 1, None], p[..., 2, None]
        waves = (a * np.sin(2 * np.pi * f * t + phi)).sum(axis=2)
        out[start:start + chunk] = _zscore_rows(waves) if normalize else waves
    return SignalSet(out, spec.fs)


def sinusoid(freq: float, amp: float, phase: float, length: int, fs: float) -> np.ndarray:
    j = np.arange(length)
    return amp * np.sin(2 * np.pi * freq * j / fs + phase)


def _zscore_rows(x: np.ndarray) -> np.ndarray:
    mean = x.mean(axis=-1, keepdims=True)
    std = x.std(axis=-1, keepdims=True)
    if np.any(std < STD_FLOOR):
        raise ConstantChannel("channel with zero variance cannot be z-scored")
    return (x - mean) / std


def zscore_normalize(seg: Segment) -> Segment:
    """Per-channel shift to mean 0 and scale to population std 1."""
    return Segment(_zscore_rows(seg.data.astype(np.float64)), seg.fs)


def segment_recording(recording: Segment, window: int) -> list[Segment]:
    """Cut into ``t // window`` consecutive windows; the remainder is dropped."""
    if window < 4:
        raise InvalidSpec(f"window must be >= 4 samples, got {window}")
    n = recording.t // window
    return [Segment(recording.data[:, i * window:(i + 1) * window], recording.fs) for i in range(n)]


def split_counts(n: int, fractions=(0.8, 0.1, 0.1)) -> tuple[int, int, int]:
    """Train/validation/test sizes; rounding remainder goes to train."""
    n_val = int(np.floor(n * fractions[1] + 0.5))
    n_test = int(np.floor(n * fractions[2] + 0.5))
    return n - n_val - n_test, n_val, n_test


# -- disturbances ----------------------------------------------------------

def _scale_to_snr(clean: np.ndarray, noise: np.ndarray, snr_db: float) -> np.ndarray:
    """Scale ``noise`` per channel so that energy(clean)/energy(noise) hits ``snr_db``."""
    es = (clean.astype(np.float64) ** 2).sum(axis=-1, keepdims=True)
    en = (noise ** 2).sum(axis=-1, keepdims=True)
    en = np.where(en > 0, en, 1.0)
    return noise * np.sqrt(es / en * 10 ** (-snr_db / 10))


def white_noise(shape, rng) -> np.ndarray:
    return rng.standard_normal(shape)


def drift_noise(shape, fs: float, rng, freq: float = 0.3) -> np.ndarray:
    """Slow sinusoidal drift with random phase per channel."""
    t = np.arange(shape[-1]) / fs
    phase = rng.uniform(0, 2 * np.pi, size=shape[:-1] + (1,))
    return np.sin(2 * np.pi * freq * t + phase)


def burst_noise(shape, fs: float, rng, band=(45.0, 50.0), n_bursts: int = 3,
                duration: float = 0.5) -> np.ndarray:
    """Hann-windowed tone bursts with frequencies drawn from ``band``."""
    length = shape[-1]
    width = max(4, int(round(duration * fs)))
    envelope = np.hanning(width)
    t = np.arange(width) / fs
    out = np.zeros(shape)
    flat = out.reshape(-1, length)
    for row in flat:
        for _ in range(n_bursts):
            f = rng.uniform(*band)
            phase = rng.uniform(0, 2 * np.pi)
            start = int(rng.integers(0, length - width + 1))
            row[start:start + width] += envelope * np.sin(2 * np.pi * f * t + phase)
    return out


def contaminate(clean: SignalSet, kinds: Sequence[str], snr_db: float, seed: int) -> PairedDataset:
    """Additive disturbance pairs at a fixed per-channel input SNR.

    Sample ``i`` receives disturbance ``kinds[i % len(kinds)]``, one of
    ``"white"``, ``"drift"``, ``"burst"`` or ``"drift+burst"``. The clean
    targets are left untouched and the noisy inputs are not re-normalized,
    so the input SNR is exactly ``snr_db`` on every channel.
    """
    rng = np.random.default_rng(seed)
    x = clean.data.astype(np.float64)
    noisy = np.empty_like(x)
    cats = []
    for i in range(len(clean)):
        kind = kinds[i % len(kinds)]
        shape = x[i].shape
        parts = kind.split("+")
        noise = np.zeros(shape)
        for part in parts:
            if part == "white":
                noise += white_noise(shape, rng)
            elif part == "drift":
                noise += drift_noise(shape, clean.fs, rng)
            elif part == "burst":
                noise += burst_noise(shape, clean.fs, rng)
            else:
                raise InvalidSpec(f"unknown disturbance kind {part!r}")
        noisy[i] = x[i] + _scale_to_snr(x[i], noise, snr_db)
        cats.append(kind)
    return PairedDataset(noisy, clean.data, clean.fs, tuple(cats))
