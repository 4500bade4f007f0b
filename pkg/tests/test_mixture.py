import logging

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from icunet import oracle
from icunet.errors import EmptyDataset, InvalidSpec, NoArtifactICs, ShapeMismatch
from icunet.mixture import (
    ARTIFACT_CLASSES,
    Decomposition,
    ICClass,
    artifact_ics,
    backproject,
    make_pairs,
    select_ics,
    synth_mixB,
    synth_mixBnB,
)


def one_hot_probs(labels, brain_prob=1.0):
    """Rows concentrated on ``labels``; Brain rows get ``brain_prob``."""
    probs = np.zeros((len(labels), 7))
    for i, label in enumerate(labels):
        if label == ICClass.Brain:
            probs[i, 0] = brain_prob
            probs[i, 6] = 1 - brain_prob
        else:
            probs[i, int(label)] = 1.0
    return probs


def random_decomposition(rng, c, t, fs=256.0):
    probs = rng.dirichlet(np.full(7, 0.3), size=c)
    return Decomposition(rng.standard_normal((c, t)), rng.standard_normal((c, c)), probs, fs)


def test_seven_classes():
    assert len(ICClass) == 7
    assert [c.name for c in ARTIFACT_CLASSES] == [
        "Muscle", "Eye", "Heart", "LineNoise", "ChannelNoise", "Other"]


def test_threshold_is_strict():
    probs = one_hot_probs([ICClass.Brain] * 3)
    probs[:, 0] = [0.85, 0.80, 0.5]
    probs[:, 6] = 1 - probs[:, 0]
    d = Decomposition(np.zeros((3, 8)), np.eye(3), probs, 256.0)
    np.testing.assert_array_equal(select_ics(d, ICClass.Brain, 0.8), [0])
    assert select_ics(d, ICClass.Brain, 0.9).size == 0
    with pytest.raises(InvalidSpec):
        select_ics(d, ICClass.Brain, 1.5)


def test_identity_mixing_all_brain(rng):
    S = rng.standard_normal((3, 16))
    d = Decomposition(S, np.eye(3), one_hot_probs([ICClass.Brain] * 3), 256.0)
    np.testing.assert_array_equal(synth_mixB(d).data, S)


def test_mixb_worked_example(rng):
    S = rng.standard_normal((2, 10))
    A = np.array([[1.0, 2.0], [3.0, 4.0]])
    d = Decomposition(S, A, one_hot_probs([ICClass.Brain, ICClass.Eye]), 256.0)
    mix_b = synth_mixB(d).data
    np.testing.assert_allclose(mix_b, np.outer(A[:, 0], S[0]), atol=1e-14)
    np.testing.assert_allclose(mix_b, oracle.dense_backprojection(A, S, [0]), atol=1e-12)


def test_no_brain_gives_zero(rng):
    d = Decomposition(rng.standard_normal((2, 8)), np.eye(2),
                      one_hot_probs([ICClass.Eye, ICClass.Heart]), 256.0)
    np.testing.assert_array_equal(synth_mixB(d).data, 0)


def test_missing_artifact_class(rng):
    d = Decomposition(rng.standard_normal((2, 8)), np.eye(2),
                      one_hot_probs([ICClass.Brain, ICClass.Eye]), 256.0)
    with pytest.raises(NoArtifactICs):
        synth_mixBnB(d, ICClass.LineNoise)
    with pytest.raises(InvalidSpec):
        synth_mixBnB(d, ICClass.Brain)


def test_complete_partition_gives_full_mixture(rng):
    S, A = rng.standard_normal((3, 12)), rng.standard_normal((3, 3))
    d = Decomposition(S, A, one_hot_probs([ICClass.Brain, ICClass.Eye, ICClass.Eye]), 256.0)
    np.testing.assert_allclose(synth_mixBnB(d, ICClass.Eye).data, A @ S, atol=1e-12)


def test_weak_brain_ic_goes_to_best_artifact_class():
    probs = np.array([[0.6, 0.05, 0.3, 0.0, 0.0, 0.0, 0.05]])
    d = Decomposition(np.ones((1, 4)), np.eye(1), probs, 256.0)
    np.testing.assert_array_equal(artifact_ics(d, ICClass.Eye), [0])


@settings(max_examples=100, deadline=None)
@given(st.integers(1, 8), st.integers(1, 512), st.integers(0, 2 ** 32 - 1))
def test_partition_identity(c, t, seed):
    d = random_decomposition(np.random.default_rng(seed), c, t)
    total = synth_mixB(d).data + sum(backproject(d, artifact_ics(d, k)) for k in ARTIFACT_CLASSES)
    full = d.A @ d.S
    assert np.linalg.norm(total - full) <= 1e-10 * max(np.linalg.norm(full), 1e-300)


@settings(max_examples=100, deadline=None)
@given(st.integers(1, 8), st.integers(1, 512), st.integers(0, 2 ** 32 - 1))
def test_mixbnb_difference_is_artifact_backprojection(c, t, seed):
    d = random_decomposition(np.random.default_rng(seed), c, t)
    for k in ARTIFACT_CLASSES:
        ics = artifact_ics(d, k)
        if ics.size == 0:
            continue
        diff = synth_mixBnB(d, k).data - synth_mixB(d).data
        np.testing.assert_allclose(diff, backproject(d, ics), rtol=0, atol=1e-12 * max(1, np.abs(diff).max()))


def test_decomposition_validation(rng):
    with pytest.raises(ShapeMismatch):
        Decomposition(np.zeros((2, 8)), np.eye(3), one_hot_probs([0, 0]), 256.0)
    with pytest.raises(InvalidSpec):
        Decomposition(np.zeros((2, 8)), np.eye(2), np.full((2, 7), 0.5), 256.0)


def test_make_pairs_counts(rng):
    d = Decomposition(rng.standard_normal((2, 8192)), rng.standard_normal((2, 2)),
                      one_hot_probs([ICClass.Brain, ICClass.Eye]), 256.0)
    pairs = make_pairs([d], 1024)
    assert pairs.counts == {"Brain": 8, "Eye": 8}
    assert len(pairs) == 16
    brain = pairs.where("Brain")
    np.testing.assert_array_equal(brain.noisy, brain.clean)
    eye = pairs.where("Eye")
    np.testing.assert_array_equal(eye.clean, brain.clean)
    x = pairs.noisy.astype(np.float64)
    np.testing.assert_allclose(x.mean(-1), 0, atol=1e-5)
    np.testing.assert_allclose(x.std(-1), 1, atol=1e-5)


def test_make_pairs_brain_only(rng):
    d = Decomposition(rng.standard_normal((2, 2048)), rng.standard_normal((2, 2)),
                      one_hot_probs([ICClass.Brain, ICClass.Brain]), 256.0)
    assert make_pairs([d], 1024).counts == {"Brain": 2}


def test_make_pairs_skips_constant_windows(rng, caplog):
    S = rng.standard_normal((3, 2048))
    S[:2, :1024] = 0
    d = Decomposition(S, rng.standard_normal((3, 3)),
                      one_hot_probs([ICClass.Brain, ICClass.Brain, ICClass.Muscle]), 256.0)
    with caplog.at_level(logging.WARNING):
        pairs = make_pairs([d], 1024)
    assert pairs.counts == {"Brain": 1, "Muscle": 1}
    assert "skipped" in caplog.text


def test_make_pairs_errors(rng):
    d = Decomposition(np.zeros((2, 2048)), np.eye(2), one_hot_probs([0, 0]), 256.0)
    with pytest.raises(EmptyDataset):
        make_pairs([d], 1024)
    with pytest.raises(InvalidSpec):
        make_pairs([d], 4096)
