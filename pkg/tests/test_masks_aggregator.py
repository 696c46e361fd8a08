import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from repbench.features import FeatureRecord, PooledRecord, layernorm_frames, pool_record
from repbench.probes.aggregator import LayerAggregator, weighted_sum
from repbench.probes.gradcheck import grad_check
from repbench.probes.masks import inpsm, mask_mse, pit_mask_mse
from repbench.probes.stft import StftConfig, stft


def test_inpsm_source_equals_mixture_is_one(rng):
    frames = stft(rng.standard_normal(4096), StftConfig())
    mask = inpsm(frames, frames)
    hot = np.abs(frames) > 1e-6
    assert np.allclose(mask[hot], 1.0, atol=1e-9)


def test_inpsm_antiphase_clamped_to_zero(rng):
    frames = stft(rng.standard_normal(4096), StftConfig())
    mask = inpsm(frames, -frames)
    assert np.all(mask == 0.0)


def test_inpsm_hand_arithmetic():
    # |S|=2, |Y|=4, 60 degrees apart: (2/4) * cos(60deg) = 0.25.
    y = np.array([[4.0 + 0.0j]])
    s = np.array([[2.0 * np.exp(1j * math.pi / 3)]])
    assert inpsm(y, s)[0, 0] == pytest.approx(0.25, abs=1e-12)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10 ** 6))
def test_inpsm_always_within_bounds(seed):
    rng = np.random.default_rng(seed)
    y = rng.standard_normal((3, 5)) + 1j * rng.standard_normal((3, 5))
    s = rng.standard_normal((3, 5)) + 1j * rng.standard_normal((3, 5))
    mask = inpsm(y, s, cap=1.0)
    assert np.all(mask >= 0.0) and np.all(mask <= 1.0)


def test_mask_mse_cases():
    loss, grad = mask_mse(np.array([[0.5]]), np.array([[0.25]]))
    assert loss == pytest.approx(0.0625)
    assert grad[0, 0] == pytest.approx(2 * 0.25)
    loss, _ = mask_mse(np.ones((2, 3)), np.ones((2, 3)))
    assert loss == 0.0
    with pytest.raises(ValueError, match="shape mismatch"):
        mask_mse(np.ones((1, 2)), np.ones((2, 1)))


def test_pit_invariant_to_speaker_permutation(rng):
    pred = rng.uniform(0, 1, size=(2, 4, 5))
    target = rng.uniform(0, 1, size=(2, 4, 5))
    loss_a, _, _ = pit_mask_mse(pred, target)
    loss_b, _, _ = pit_mask_mse(pred[::-1], target)
    assert loss_a == pytest.approx(loss_b, abs=1e-12)


def test_pit_picks_better_permutation():
    target = np.stack([np.full((2, 3), 0.9), np.full((2, 3), 0.1)])
    swapped_pred = target[::-1].copy()
    loss, _, perm = pit_mask_mse(swapped_pred, target)
    assert loss == pytest.approx(0.0)
    assert perm == (1, 0)


def test_pit_gradient_flows_through_chosen_permutation():
    target = np.stack([np.full((1, 2), 0.8), np.full((1, 2), 0.2)])
    pred = target[::-1] + 0.05
    loss, grad, perm = pit_mask_mse(pred, target)
    direct_loss, direct_grad = mask_mse(pred, target[list(perm)])
    assert loss == pytest.approx(direct_loss)
    assert np.allclose(grad, direct_grad)


# -- layer aggregation ----------------------------------------------------------

def test_weights_positive_and_sum_to_one(rng):
    agg = LayerAggregator(5)
    agg.logits.value[...] = rng.standard_normal(5).astype(np.float32)
    w = agg.weights
    assert np.all(w > 0)
    assert abs(w.sum() - 1.0) < 1e-6


def test_single_layer_ignores_logit_value(rng):
    feats = rng.standard_normal((1, 4, 6)).astype(np.float32)
    out_a = LayerAggregator(1).forward(feats)
    agg_b = LayerAggregator(1)
    agg_b.logits.value[...] = 17.0
    out_b = agg_b.forward(feats)
    assert np.allclose(out_a, out_b)
    assert np.allclose(out_a, layernorm_frames(feats)[0], atol=1e-6)


def test_equal_logits_give_arithmetic_mean(rng):
    feats = rng.standard_normal((4, 3, 5)).astype(np.float32)
    out = LayerAggregator(4).forward(feats)
    assert np.allclose(out, layernorm_frames(feats).mean(axis=0), atol=1e-6)


def test_weighted_sum_hand_oracle():
    # softmax(ln 3, 0) = (0.75, 0.25); constants bypass normalization.
    agg = LayerAggregator(2, dtype=np.float64)
    agg.logits.value[...] = np.array([math.log(3.0), 0.0])
    feats = np.stack([np.full((2, 3), 1.0), np.full((2, 3), 5.0)])
    out = agg.forward(feats, normalize=False)
    assert np.allclose(out, 0.75 * 1.0 + 0.25 * 5.0)


def test_layer_count_mismatch_rejected(rng):
    agg = LayerAggregator(3)
    with pytest.raises(ValueError, match="layers"):
        agg.forward(rng.standard_normal((2, 4, 5)))


def test_weighted_sum_pooled_skips_renormalization(rng):
    rec = FeatureRecord("u", rng.standard_normal((3, 6, 8)).astype(np.float32))
    pooled = pool_record(rec, normalize=True)
    agg = LayerAggregator(3)
    out = weighted_sum(pooled, agg)
    manual = layernorm_frames(rec.data.astype(np.float64)).mean(axis=1).mean(axis=0)
    assert np.allclose(out, manual, atol=1e-5)


def test_aggregator_gradient_matches_finite_differences(rng):
    agg = LayerAggregator(3, dtype=np.float64)
    agg.logits.value[...] = rng.standard_normal(3)
    feats = rng.standard_normal((3, 4, 5))
    target = rng.standard_normal((4, 5))

    def loss_fn():
        out = agg.forward(feats, normalize=True)
        diff = out - target
        agg.backward(2.0 * diff / diff.size)
        return float(np.mean(diff * diff))

    report = grad_check(loss_fn, agg.parameters(), eps=1e-6, tolerance=1e-5)
    assert report.passed, report.blocks


def test_single_layer_zero_gradient_case(rng):
    # Softmax over one logit is identically 1: analytic and numeric
    # gradients both vanish.
    agg = LayerAggregator(1, dtype=np.float64)
    feats = rng.standard_normal((1, 3, 4))

    def loss_fn():
        out = agg.forward(feats, normalize=True)
        agg.backward(np.ones_like(out))
        return float(out.sum())

    report = grad_check(loss_fn, agg.parameters(), eps=1e-6)
    block = report.blocks[0]
    assert block.max_abs_analytic < 1e-8
    assert block.max_abs_numeric < 1e-8
