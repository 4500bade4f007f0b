"""Clean/noisy training pairs from precomputed IC decompositions.

The clean target (mixB) backprojects only the Brain ICs to the sensors; a
noisy input (mixBnB) additionally backprojects the ICs of one artifact
class. Decompositions and class probabilities are inputs, never estimated
here.
"""

from __future__ import annotations

import enum
import logging
from dataclasses import dataclass

import numpy as np

from .errors import ConstantChannel, EmptyDataset, InvalidSpec, NoArtifactICs, ShapeMismatch
from .signalgen import PairedDataset, Segment, segment_recording, zscore_normalize

log = logging.getLogger(__name__)

BRAIN_THRESHOLD = 0.80


class ICClass(enum.IntEnum):
    """The seven IC classes, in column order of ``class_probs``."""

    Brain = 0
    Muscle = 1
    Eye = 2
    Heart = 3
    LineNoise = 4
    ChannelNoise = 5
    Other = 6


ARTIFACT_CLASSES = tuple(c for c in ICClass if c is not ICClass.Brain)


@dataclass
class Decomposition:
    S: np.ndarray
    A: np.ndarray
    class_probs: np.ndarray
    fs: float

    def __post_init__(self):
        self.S = np.asarray(self.S, dtype=np.float64)
        self.A = np.asarray(self.A, dtype=np.float64)
        self.class_probs = np.asarray(self.class_probs, dtype=np.float64)
        self.validate()

    def validate(self) -> None:
        c = self.S.shape[0]
        if self.S.ndim != 2 or self.A.shape != (c, c):
            raise ShapeMismatch(f"A {self.A.shape} must be square with size S rows ({c})")
        if self.class_probs.shape != (c, len(ICClass)):
            raise ShapeMismatch(f"class_probs must be {c} x {len(ICClass)}, got {self.class_probs.shape}")
        p = self.class_probs
        if np.any(p < 0) or np.any(p > 1) or np.any(np.abs(p.sum(axis=1) - 1) > 1e-6):
            raise InvalidSpec("class_probs rows must be probability vectors")
        if self.fs <= 0:
            raise InvalidSpec("fs must be positive")

    @property
    def c(self) -> int:
        return self.S.shape[0]

    @property
    def t(self) -> int:
        return self.S.shape[1]


def select_ics(d: Decomposition, cls: ICClass, threshold: float = BRAIN_THRESHOLD) -> np.ndarray:
    """Indices whose probability for ``cls`` strictly exceeds ``threshold``."""
    if not 0 <= threshold <= 1:
        raise InvalidSpec(f"threshold must lie in [0, 1], got {threshold}")
    return np.flatnonzero(d.class_probs[:, int(cls)] > threshold)


def artifact_ics(d: Decomposition, artifact: ICClass, threshold: float = BRAIN_THRESHOLD) -> np.ndarray:
    """ICs assigned to ``artifact``: not Brain-selected, and ``artifact`` is the argmax
    over the six non-brain classes (first class on ties)."""
    brain = np.zeros(d.c, dtype=bool)
    brain[select_ics(d, ICClass.Brain, threshold)] = True
    label = 1 + np.argmax(d.class_probs[:, 1:], axis=1)
    return np.flatnonzero(~brain & (label == int(artifact)))


def backproject(d: Decomposition, ics) -> np.ndarray:
    """Sensor-level contribution of the given ICs: ``A[:, ics] @ S[ics]``."""
    ics = np.asarray(ics, dtype=int)
    if ics.size == 0:
        return np.zeros((d.c, d.t))
    return d.A[:, ics] @ d.S[ics]


def synth_mixB(d: Decomposition, threshold: float = BRAIN_THRESHOLD) -> Segment:
    return Segment(backproject(d, select_ics(d, ICClass.Brain, threshold)), d.fs)


def synth_mixBnB(d: Decomposition, artifact: ICClass, threshold: float = BRAIN_THRESHOLD) -> Segment:
    artifact = ICClass(artifact)
    if artifact is ICClass.Brain:
        raise InvalidSpec("artifact class must not be Brain")
    ics = artifact_ics(d, artifact, threshold)
    if ics.size == 0:
        raise NoArtifactICs(f"no IC is assigned to {artifact.name}")
    clean = synth_mixB(d, threshold).data
    return Segment(clean + backproject(d, ics), d.fs)


def _windows(seg: Segment, window: int):
    for w in segment_recording(seg, window):
        try:
            yield zscore_normalize(w).data
        except ConstantChannel:
            yield None


def make_pairs(decomps, window: int, threshold: float = BRAIN_THRESHOLD) -> PairedDataset:
    """Windowed, z-scored (mixBnB, mixB) and (mixB, mixB) pairs.

    Pairs are ordered by decomposition, then category (Brain first, then
    artifact classes in :class:`ICClass` order), then window. Windows in
    which either member has a constant channel are skipped.
    """
    noisy, clean, cats = [], [], []
    counts: dict[str, int] = {"Brain": 0}
    fs = None
    for d in decomps:
        if d.t < window:
            raise InvalidSpec(f"decomposition length {d.t} is shorter than window {window}")
        if fs is None:
            fs = d.fs
        elif d.fs != fs:
            raise ShapeMismatch("decompositions have different sampling rates")
        mix_b = synth_mixB(d, threshold)
        targets = list(_windows(mix_b, window))
        for tgt in targets:
            if tgt is not None:
                noisy.append(tgt)
                clean.append(tgt)
                cats.append("Brain")
                counts["Brain"] += 1
        for cls in ARTIFACT_CLASSES:
            try:
                mix_bnb = synth_mixBnB(d, cls, threshold)
            except NoArtifactICs:
                continue
            for inp, tgt in zip(_windows(mix_bnb, window), targets):
                if inp is None or tgt is None:
                    continue
                noisy.append(inp)
                clean.append(tgt)
                cats.append(cls.name)
                counts[cls.name] = counts.get(cls.name, 0) + 1
        skipped = sum(t is None for t in targets)
        if skipped:
            log.warning("skipped %d windows with a constant mixB channel", skipped)
    if not noisy:
        raise EmptyDataset("no pair could be produced from the decompositions")
    counts = {c.name: counts[c.name] for c in ICClass if c.name in counts}
    return PairedDataset(np.stack(noisy), np.stack(clean), fs, tuple(cats), counts)
