import numpy as np
import pytest
from conftest import rel_err
from hypothesis import assume, given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from icunet import oracle
from icunet.errors import ConstantSpectrum, InvalidSpec, NoBins, ShapeMismatch, ZeroWeights
from icunet.losses import (
    LossWeights,
    all_losses,
    band_bins,
    loss_acc,
    loss_amp,
    loss_ensemble,
    loss_freq,
    loss_vel,
    per_bin_abs_error,
    psd_zscored,
)

FS = 64.0
T = 32


def _pair(rng, shape=(3, 2, T)):
    return rng.standard_normal(shape), rng.standard_normal(shape)


# -- closed forms --------------------------------------------------------------

def test_amp_examples(rng):
    x = rng.standard_normal((2, 16))
    assert loss_amp(x, x) == 0
    assert loss_amp(x + 1, x) == pytest.approx(1.0, abs=1e-15)


def test_vel_examples(rng):
    x = rng.standard_normal((2, 16))
    assert loss_vel(x + 3.7, x) == pytest.approx(0.0, abs=1e-24)
    ramp = 0.25 * np.arange(16)
    assert loss_vel(x + ramp, x) == pytest.approx(0.25 ** 2, rel=1e-12)


def test_acc_examples(rng):
    x = rng.standard_normal((2, 16))
    j = np.arange(16.0)
    assert loss_acc(x + 2 + 0.5 * j, x) == pytest.approx(0.0, abs=1e-24)
    assert loss_acc(x + 0.3 * j ** 2, x) == pytest.approx((2 * 0.3) ** 2, rel=1e-10)


def test_band_bins_at_reference_rate():
    bins = band_bins(1024, 256.0)
    assert bins[0] == 4 and bins[-1] == 200 and bins.size == 197
    freqs = psd_zscored(np.random.default_rng(0).standard_normal((1, 1024)), 256.0).bin_freqs
    np.testing.assert_allclose(np.diff(freqs), 0.25)
    assert freqs[0] == 1.0 and freqs[-1] == 50.0


def test_bin_centred_sinusoid_concentrates_power():
    t, fs = 1024, 256.0
    y = np.sin(2 * np.pi * 16 * np.arange(t) / fs)[None]
    bins = band_bins(t, fs)
    power = np.abs(np.fft.rfft(y)[0, bins]) ** 2
    k16 = list(bins).index(64)
    assert power[k16] > 0
    assert np.delete(power, k16).max() < 1e-18 * power[k16]


def test_freq_phase_shift_invariance():
    t = np.arange(T) / FS
    x = np.sin(2 * np.pi * 8 * t)[None] + 0.5 * np.sin(2 * np.pi * 20 * t)[None]
    y = np.sin(2 * np.pi * 8 * t + 1.1)[None] + 0.5 * np.sin(2 * np.pi * 20 * t - 0.4)[None]
    assert loss_freq(y, x, FS) == pytest.approx(0.0, abs=1e-12)


def test_freq_different_tones_matches_naive_pipeline():
    t = np.arange(T) / FS
    x = np.vstack([np.sin(2 * np.pi * 8 * t) + 0.2 * np.sin(2 * np.pi * 16 * t),
                   np.cos(2 * np.pi * 12 * t) + 0.1])
    y = np.vstack([np.sin(2 * np.pi * 24 * t) + 0.3 * np.sin(2 * np.pi * 4 * t),
                   np.cos(2 * np.pi * 28 * t)])
    value = loss_freq(y, x, FS)
    assert value > 0.1
    assert value == pytest.approx(oracle.naive_loss_freq(y, x, FS), rel=1e-10)


def test_loss_references_match_naive_loops(rng):
    y, x = _pair(rng)
    assert loss_amp(y, x) == pytest.approx(oracle.naive_mse(y, x), rel=1e-12)
    assert loss_vel(y, x) == pytest.approx(oracle.naive_difference_loss(y, x, 1), rel=1e-12)
    assert loss_acc(y, x) == pytest.approx(oracle.naive_difference_loss(y, x, 2), rel=1e-12)
    assert loss_freq(y, x, FS) == pytest.approx(oracle.naive_loss_freq(y, x, FS), rel=1e-10)


def test_psd_matches_naive(rng):
    row = rng.standard_normal(T)
    np.testing.assert_allclose(psd_zscored(row[None], FS).values[0],
                               oracle.naive_psd_zscored(row, FS), atol=1e-10)


def test_ensemble_weights(rng):
    y, x = _pair(rng)
    assert loss_ensemble(y, x, LossWeights(1, 0, 0, 0), FS) == loss_amp(y, x)
    terms = all_losses(y, x, FS)
    assert loss_ensemble(y, x, LossWeights(), FS) == pytest.approx(
        sum(terms.values()) / 4, rel=1e-14)
    assert loss_ensemble(y, x, LossWeights(2, 2, 2, 2), FS) == pytest.approx(
        loss_ensemble(y, x, LossWeights(), FS), rel=1e-14)


def test_per_bin_error(rng):
    y, x = _pair(rng, (2, T))
    np.testing.assert_array_equal(per_bin_abs_error(x, x, FS), 0)
    single = per_bin_abs_error(y[:1], x[:1], FS)
    np.testing.assert_allclose(single, np.abs(oracle.naive_psd_zscored(y[0], FS)
                                              - oracle.naive_psd_zscored(x[0], FS)), atol=1e-10)
    expected = np.mean([np.abs(oracle.naive_psd_zscored(a, FS) - oracle.naive_psd_zscored(b, FS))
                        for a, b in zip(y, x)], axis=0)
    np.testing.assert_allclose(per_bin_abs_error(y, x, FS), expected, atol=1e-10)


# -- failure modes ---------------------------------------------------------------

def test_errors(rng):
    y, x = _pair(rng)
    with pytest.raises(ShapeMismatch):
        loss_amp(y, x[:, :1])
    with pytest.raises(ZeroWeights):
        loss_ensemble(y, x, LossWeights(0, 0, 0, 0), FS)
    with pytest.raises(InvalidSpec):
        LossWeights(-1, 0, 0, 0)
    with pytest.raises(InvalidSpec):
        LossWeights.parse("1,1")
    with pytest.raises(NoBins):
        loss_freq(y[..., :4], x[..., :4], 256.0)
    with pytest.raises(ConstantSpectrum):
        psd_zscored(np.zeros((1, T)), FS)


# -- gradients (float64 central differences) ------------------------------------

@pytest.mark.parametrize("fn,tol", [
    (loss_amp, 1e-5),
    (loss_vel, 1e-5),
    (loss_acc, 1e-5),
    (lambda y, x, g=False: loss_freq(y, x, FS, g), 1e-4),
    (lambda y, x, g=False: loss_ensemble(y, x, LossWeights(1, 2, 0.5, 1), FS, g), 1e-4),
])
@pytest.mark.parametrize("shape", [(2, T), (3, 2, T)])
def test_loss_gradients(rng, fn, tol, shape):
    y, x = _pair(rng, shape)
    _, g = fn(y, x, True)
    numeric = oracle.fd_gradient(lambda p: fn(p, x), y, h=1e-5)
    assert rel_err(g, numeric) < tol


def test_freq_gradient_odd_length(rng):
    y, x = rng.standard_normal((2, 33)), rng.standard_normal((2, 33))
    _, g = loss_freq(y, x, FS, True)
    assert rel_err(g, oracle.fd_gradient(lambda p: loss_freq(p, x, FS), y)) < 1e-4


def test_freq_gradient_with_nyquist_in_band(rng):
    # fs=64, t=32: bin 16 is the Nyquist bin at 32 Hz, inside a (1, 32) band
    y, x = rng.standard_normal((2, 32)), rng.standard_normal((2, 32))
    band = (1.0, 32.0)
    _, g = loss_freq(y, x, FS, True, band=band)
    numeric = oracle.fd_gradient(lambda p: loss_freq(p, x, FS, band=band), y)
    assert rel_err(g, numeric) < 1e-4


# -- properties ---------------------------------------------------------------------

signals = arrays(np.float64, (2, T),
                 elements=st.floats(-10, 10, allow_nan=False, allow_infinity=False))


def _nonflat(a):
    try:
        psd_zscored(a, FS)
    except ConstantSpectrum:
        return False
    return True


@settings(max_examples=60, deadline=None)
@given(signals)
def test_identity_is_zero_for_all_terms(x):
    assume(_nonflat(x))
    for value in all_losses(x, x, FS).values():
        assert abs(value) <= 1e-12


@settings(max_examples=60, deadline=None)
@given(signals, signals)
def test_losses_nonnegative_and_symmetric(y, x):
    assume(_nonflat(x) and _nonflat(y))
    a, b = all_losses(y, x, FS), all_losses(x, y, FS)
    for key in a:
        assert a[key] >= 0
        assert a[key] == pytest.approx(b[key], rel=1e-9, abs=1e-12)


@settings(max_examples=60, deadline=None)
@given(signals, signals, st.floats(0.1, 10))
def test_freq_loss_is_scale_invariant(y, x, scale):
    assume(_nonflat(x) and _nonflat(y))
    assert loss_freq(scale * y, x, FS) == pytest.approx(loss_freq(y, x, FS), rel=1e-6, abs=1e-9)


@settings(max_examples=60, deadline=None)
@given(signals, signals, st.floats(-5, 5))
def test_derivative_losses_ignore_offsets(y, x, offset):
    assert loss_vel(y + offset, x) == pytest.approx(loss_vel(y, x), rel=1e-9, abs=1e-9)
    assert loss_acc(y + offset, x) == pytest.approx(loss_acc(y, x), rel=1e-9, abs=1e-9)
