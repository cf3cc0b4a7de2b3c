import math

import numpy as np
import pytest
from hypothesis import assume, given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from imbalgat import graphio, losses
from imbalgat import numcore as nc
from imbalgat.graphio import MinorityMask
from imbalgat.losses import LossConfig
from imbalgat.models import AttentionRecord
from imbalgat.numcore import EdgeVector, Tape, Tensor

from oracles import scalar_focal


def probs_for(p_true, n_classes=2):
    """Rows whose label-0 probability is ``p_true``; remainder spread evenly."""
    rows = []
    for p in p_true:
        rest = (1 - p) / (n_classes - 1)
        rows.append([p] + [rest] * (n_classes - 1))
    return Tensor(np.array(rows))


def ce(P, labels, mask):
    return float(np.mean([-math.log(max(P[v, labels[v]], 1e-10)) for v in mask]))


# --- class weights --------------------------------------------------------------------------


def test_class_weight_values():
    np.testing.assert_allclose(losses.class_weights([1, 4]), [1.0, 0.5])


def test_class_weight_zero_count():
    with pytest.raises(ValueError, match="no samples"):
        losses.class_weights([3, 0])


def test_cora_class_share_ordering():
    # 7% class outweighs 29% class
    w = losses.class_weights([29, 9, 16, 13, 15, 11, 7])
    assert w[6] > w[0]


@given(st.lists(st.integers(1, 10_000), min_size=2, max_size=8), st.integers(1, 30))
def test_class_weight_scale_equivariance_and_monotonicity(counts, k):
    w = losses.class_weights(counts)
    np.testing.assert_allclose(losses.class_weights(np.array(counts) * k * k), w / k, rtol=1e-12)
    for i in range(len(counts)):
        for j in range(len(counts)):
            if counts[i] < counts[j]:
                assert w[i] > w[j]


# --- weighted cross-entropy -----------------------------------------------------------------


def test_weighted_ce_perfect_prediction_is_zero():
    P = Tensor(np.array([[1.0, 0.0], [0.0, 1.0]]))
    assert losses.weighted_ce(P, [0, 1], [0, 1], [1.0, 2.0]).item() == 0.0


def test_weighted_ce_uniform_weights_is_plain_ce(rng):
    P = rng.dirichlet(np.ones(3), size=6)
    labels = rng.integers(0, 3, 6)
    got = losses.weighted_ce(Tensor(P), labels, range(6), np.ones(3)).item()
    assert got == pytest.approx(ce(P, labels, range(6)), rel=1e-12)


def test_weighted_ce_scalar_example():
    P = Tensor(np.array([[0.5, 0.5], [0.75, 0.25]]))
    got = losses.weighted_ce(P, [0, 1], [0, 1], [1.0, 2.0]).item()
    assert got == pytest.approx((math.log(2) + 2 * math.log(4)) / 2, rel=1e-12)
    assert got == pytest.approx(1.7329, abs=1e-4)


def test_weighted_ce_weight_sum_normalization():
    P = Tensor(np.array([[0.5, 0.5], [0.75, 0.25]]))
    got = losses.weighted_ce(P, [0, 1], [0, 1], [1.0, 2.0], normalize="weight_sum").item()
    assert got == pytest.approx((math.log(2) + 2 * math.log(4)) / 3, rel=1e-12)


def test_weighted_ce_empty_mask():
    with pytest.raises(ValueError, match="empty"):
        losses.weighted_ce(probs_for([0.5]), [0], [], [1.0, 1.0])


# --- focal ----------------------------------------------------------------------------------


def test_focal_gamma_zero_is_ce(rng):
    P = rng.dirichlet(np.ones(4), size=10)
    labels = rng.integers(0, 4, 10)
    got = losses.focal_loss(Tensor(P), labels, range(10), 0.0).item()
    assert abs(got - ce(P, labels, range(10))) < 1e-12


def test_focal_certain_prediction_contributes_nothing():
    assert losses.focal_loss(probs_for([1.0]), [0], [0], 0.6).item() == 0.0


def test_focal_scalar_example():
    got = losses.focal_loss(probs_for([0.5]), [0], [0], 0.6).item()
    assert got == pytest.approx(0.5**0.6 * math.log(2), rel=1e-12)
    assert got == pytest.approx(0.457307, abs=1e-6)


def test_focal_negative_gamma():
    with pytest.raises(ValueError):
        losses.focal_loss(probs_for([0.5]), [0], [0], -1.0)


@given(arrays(np.float64, st.integers(1, 8), elements=st.floats(0.01, 0.99)),
       st.floats(0, 3), st.floats(0, 3))
def test_focal_non_increasing_in_gamma(p, g1, g2):
    lo, hi = sorted((g1, g2))
    P = probs_for(p)
    labels, mask = [0] * len(p), range(len(p))
    assert losses.focal_loss(P, labels, mask, hi).item() <= losses.focal_loss(P, labels, mask, lo).item() + 1e-15


@given(arrays(np.float64, st.integers(1, 6), elements=st.floats(0.05, 0.95)), st.floats(0.1, 2.5))
def test_focal_matches_scalar_oracle(p, gamma):
    got = losses.focal_loss(probs_for(p), [0] * len(p), range(len(p)), gamma).item()
    assert got == pytest.approx(np.mean([scalar_focal(x, gamma) for x in p]), rel=1e-12)


# --- attention regularizer ------------------------------------------------------------------


def record_for(ds, values):
    return AttentionRecord({(0, 0): EdgeVector(np.asarray(values, dtype=float), ds.fingerprint, requires_grad=True)})


def mask_of(slots, rows=(0,)):
    return MinorityMask(frozenset({1}), np.array(rows), np.array(slots, dtype=np.int64))


def test_reg_empty_mask_is_zero(path3):
    rec = record_for(path3, np.full(path3.num_slots, 0.5))
    assert losses.kl_attention_reg(rec, mask_of([], rows=[])).item() == 0.0


def test_reg_self_loop_only_is_zero():
    ds = graphio.build_graph(np.ones((2, 1)), [0, 1], [])
    rec = record_for(ds, [1.0, 1.0])
    assert losses.kl_attention_reg(rec, mask_of([1], rows=[1])).item() == 0.0


def test_reg_two_slots_half_each(path3):
    # node 0 of the path has segment [0, 1]
    vals = np.full(path3.num_slots, 0.3)
    vals[:2] = 0.5
    got = losses.kl_attention_reg(record_for(path3, vals), mask_of([0, 1])).item()
    assert got == pytest.approx(2 * math.log(2), rel=1e-12)
    assert got == pytest.approx(1.38629, abs=1e-5)
    mean = losses.kl_attention_reg(record_for(path3, vals), mask_of([0, 1]),
                                   LossConfig(reg_reduction="mean")).item()
    assert mean == pytest.approx(math.log(2), rel=1e-12)


def test_reg_unknown_head(path3):
    with pytest.raises(KeyError):
        losses.kl_attention_reg(record_for(path3, np.ones(path3.num_slots)), mask_of([0]),
                                LossConfig(reg_head=1))


@given(arrays(np.float64, 7, elements=st.floats(1e-6, 1.0)),
       st.lists(st.integers(0, 6), unique=True, max_size=7))
def test_reg_non_negative_and_zero_iff_all_one(vals, slots):
    g = graphio.build_graph(np.ones((3, 1)), [0, 0, 0], [(0, 1), (1, 2)])
    reg = losses.kl_attention_reg(record_for(g, vals), mask_of(sorted(slots))).item()
    assert reg >= 0
    assert (reg == 0) == all(vals[s] == 1.0 for s in slots)


@given(arrays(np.float64, 7, elements=st.floats(1e-3, 1.0)),
       st.lists(st.integers(0, 6), unique=True, min_size=1, max_size=7),
       st.sampled_from(["sum", "mean"]))
def test_reg_gradient_is_minus_inverse_attention(vals, slots, reduction):
    g = graphio.build_graph(np.ones((3, 1)), [0, 0, 0], [(0, 1), (1, 2)])
    rec = record_for(g, vals)
    with Tape() as tape:
        reg = losses.kl_attention_reg(rec, mask_of(sorted(slots)), LossConfig(reg_reduction=reduction))
    (grad,) = nc.grad_of(tape, reg, [rec[(0, 0)]])
    scale = 1.0 / len(slots) if reduction == "mean" else 1.0
    for s in range(7):
        expect = -scale / vals[s] if s in slots else 0.0
        assert grad[s, 0] == pytest.approx(expect, rel=1e-12)
        if s in slots:
            assert grad[s, 0] < 0


# --- total ----------------------------------------------------------------------------------


def test_total_loss_identities():
    base, reg = Tensor(1.0), Tensor(2.0)
    assert losses.total_loss(base, reg, 0.0) is base
    assert losses.total_loss(base, Tensor(0.0), 0.7).item() == 1.0
    assert losses.total_loss(base, reg, 0.5).item() == 2.0


def test_total_loss_lambda_range():
    with pytest.raises(ValueError):
        losses.total_loss(Tensor(1.0), Tensor(1.0), 1.5)


@given(st.floats(-1, 1).filter(lambda x: not 0 <= x <= 1) | st.floats(1.0001, 5))
def test_loss_config_rejects_lambda_outside_unit_interval(lam):
    assume(not 0 <= lam <= 1)
    with pytest.raises(ValueError):
        LossConfig(lam=lam)
