import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from icunet.errors import ConstantChannel, HeterogeneousShapes, InvalidSpec, ShapeMismatch
from icunet.metrics import snr_per_sample
from icunet.signalgen import (
    PairedDataset,
    Segment,
    SignalSet,
    SynthSpec,
    contaminate,
    segment_recording,
    sinusoid,
    split_counts,
    synth_sinusoid_dataset,
    zscore_normalize,
)


def test_reference_dimensions():
    spec = SynthSpec(40, 19, 1024, seed=7)
    data = synth_sinusoid_dataset(spec)
    assert data.data.shape == (40, 19, 1024)
    assert data[0].c == 19 and data[0].t == 1024


def test_channels_are_zscored():
    data = synth_sinusoid_dataset(SynthSpec(16, 4, 256, seed=1)).data.astype(np.float64)
    np.testing.assert_allclose(data.mean(axis=-1), 0, atol=1e-6)
    np.testing.assert_allclose(data.std(axis=-1), 1, atol=1e-5)


def test_generation_is_seeded_and_chunk_independent():
    spec = SynthSpec(30, 3, 128, seed=4)
    a = synth_sinusoid_dataset(spec).data
    b = synth_sinusoid_dataset(spec, chunk=7).data
    assert a.tobytes() == b.tobytes()
    assert not np.array_equal(a, synth_sinusoid_dataset(SynthSpec(30, 3, 128, seed=5)).data)


def test_single_component_matches_closed_form():
    # collapsed ranges pin every parameter, so each channel is one known sinusoid
    spec = SynthSpec(2, 2, 256, n_components=1, freq_range=(8, 8), amp_range=(1, 1),
                     phase_range=(0.5, 0.5))
    data = synth_sinusoid_dataset(spec, normalize=False).data
    expected = sinusoid(8, 1, 0.5, 256, 256.0)
    np.testing.assert_allclose(data[1, 0], expected, atol=1e-6)


def test_unnormalized_spectrum_stays_in_range():
    spec = SynthSpec(4, 2, 1024, freq_range=(10, 20))
    data = synth_sinusoid_dataset(spec, normalize=False).data.astype(np.float64)
    power = np.abs(np.fft.rfft(data, axis=-1)) ** 2
    freqs = np.fft.rfftfreq(1024, 1 / 256)
    outside = power[..., (freqs < 8) | (freqs > 22)].sum()
    assert outside < 0.02 * power.sum()


@pytest.mark.parametrize("field,value", [
    ("freq_range", (0, 200)),
    ("freq_range", (30, 10)),
    ("amp_range", (1, 0)),
    ("n_components", 0),
    ("fs", 0),
])
def test_invalid_spec(field, value):
    kwargs = {"n_samples": 2, "channels": 2, "length": 64, field: value}
    with pytest.raises(InvalidSpec):
        synth_sinusoid_dataset(SynthSpec(**kwargs))


def test_zscore_worked_example():
    out = zscore_normalize(Segment(np.array([[1.0, 2, 3, 4]]), 256.0))
    np.testing.assert_allclose(out.data, [[-1.3416407865, -0.4472135955, 0.4472135955, 1.3416407865]],
                               atol=1e-9)


def test_zscore_constant_channel():
    with pytest.raises(ConstantChannel):
        zscore_normalize(Segment(np.ones((2, 8)), 256.0))


def test_segment_recording_drops_remainder():
    rec = Segment(np.arange(2 * 2500, dtype=float).reshape(2, 2500), 256.0)
    parts = segment_recording(rec, 1024)
    assert len(parts) == 2
    np.testing.assert_array_equal(parts[1].data, rec.data[:, 1024:2048])


def test_segment_requires_2d():
    with pytest.raises(ShapeMismatch):
        Segment(np.zeros(4), 256.0)


@pytest.mark.parametrize("n,expected", [(10, (8, 1, 1)), (10240, (8192, 1024, 1024)), (2560, (2048, 256, 256))])
def test_split_counts(n, expected):
    assert split_counts(n) == expected


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 100_000))
def test_split_counts_partition(n):
    a, b, c = split_counts(n)
    assert a + b + c == n and min(a, b, c) >= 0
    assert abs(b - 0.1 * n) <= 0.5 and abs(c - 0.1 * n) <= 0.5


def test_signalset_from_segments():
    segs = [Segment(np.zeros((2, 8)), 256.0), Segment(np.ones((2, 8)), 256.0)]
    s = SignalSet.from_segments(segs)
    assert len(s) == 2 and s.channels == 2 and s.length == 8
    with pytest.raises(HeterogeneousShapes):
        SignalSet.from_segments(segs + [Segment(np.zeros((3, 8)), 256.0)])


def test_paired_dataset_categories():
    x = np.zeros((3, 1, 8))
    p = PairedDataset(x, x, 256.0, ("Brain", "Eye", "Brain"))
    assert p.counts == {"Brain": 2, "Eye": 1}
    assert len(p.where("Brain")) == 2
    assert PairedDataset(x, x, 256.0).categories == ("clean",) * 3
    with pytest.raises(ShapeMismatch):
        PairedDataset(x, np.zeros((3, 2, 8)), 256.0)


@pytest.mark.parametrize("kind", ["white", "drift", "burst", "drift+burst"])
def test_contaminate_hits_input_snr(kind):
    clean = synth_sinusoid_dataset(SynthSpec(4, 3, 1024, seed=2))
    pairs = contaminate(clean, [kind], 0.0, seed=1)
    np.testing.assert_array_equal(pairs.clean, clean.data)
    per_channel = 10 * np.log10(
        (pairs.clean.astype(np.float64) ** 2).sum(-1)
        / ((pairs.noisy.astype(np.float64) - pairs.clean) ** 2).sum(-1))
    np.testing.assert_allclose(per_channel, 0.0, atol=1e-4)
    assert np.allclose(snr_per_sample(pairs.noisy, pairs.clean), 0.0, atol=1e-4)
    assert pairs.categories == (kind,) * 4


def test_contaminate_cycles_kinds_and_rejects_unknown():
    clean = synth_sinusoid_dataset(SynthSpec(5, 1, 256))
    pairs = contaminate(clean, ["drift", "burst"], 3.0, seed=0)
    assert pairs.categories == ("drift", "burst", "drift", "burst", "drift")
    with pytest.raises(InvalidSpec):
        contaminate(clean, ["hum"], 0.0, seed=0)
