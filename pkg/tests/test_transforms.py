import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from numpy.testing import assert_allclose

from mhpo import transforms as tf
from mhpo.errors import DomainError

# 30-digit mpmath evaluations, frozen
BOUND = {0.5: 1.0625725211540595, 1.0: 1.2535595643473056, 1.5: 1.5925119190617691, 2.0: 2.1273054936407734}
ZETA_AT_0 = 1.3277907156333295
SURVIVAL_AT_0 = 0.26506221270262231
ZETA_AT_1 = 1.6582994064134152
SOFTPLUS_1 = 1.3132616875182228
ZETA_AT_15 = 2.2826798453254241
LFM_E3 = 1.4460413701137253

D = tf.DhpParams()
finite_x = st.floats(-700, 700, allow_nan=False)
log_ratios = st.floats(-60, 60, allow_nan=False)
bounds = st.floats(0.05, 5.0)


def test_softplus_values():
    assert tf.softplus(0.0) == pytest.approx(math.log(2), abs=1e-15)
    assert tf.softplus(1.0) == pytest.approx(SOFTPLUS_1, rel=1e-15)
    assert tf.softplus(1.0) - tf.softplus(-1.0) == pytest.approx(1.0, abs=1e-15)
    assert abs(tf.softplus(50.0) - 50.0) < 1e-12
    assert tf.softplus(-800.0) == 0.0
    assert tf.softplus(800.0) == 800.0


@given(finite_x)
def test_softplus_identity(x):
    assert tf.softplus(x) - tf.softplus(-x) == pytest.approx(x, abs=1e-12 * max(1.0, abs(x)))
    assert tf.softplus(x) >= 0


def test_softplus_rejects_nonfinite():
    with pytest.raises(DomainError):
        tf.softplus(float("nan"))


def test_lfm_anchor_and_marked_points():
    for c in (0.3, 1.0, 1.5, 4.0):
        assert tf.lfm(1.0, c) == 0.0
    assert abs(tf.lfm(2.0, 1.0) - 0.6) < 1e-12
    assert abs(tf.lfm(0.5, 1.0) + 0.6) < 1e-12
    assert tf.lfm(math.exp(3.0), 1.5) == pytest.approx(LFM_E3, rel=1e-14)


def test_lfm_rejects_bad_input():
    for r in (0.0, -1.0, float("nan"), float("inf")):
        with pytest.raises(DomainError):
            tf.lfm(r, 1.5)
    with pytest.raises(DomainError):
        tf.lfm(1.0, 0.0)
    with pytest.raises(DomainError):
        tf.LfmParams(-1.0)


@given(log_ratios, bounds)
def test_lfm_antisymmetric_and_bounded(y, c):
    a = tf.lfm_from_log(y, c)
    assert tf.lfm_from_log(-y, c) == -a
    assert abs(a) <= c


@given(log_ratios, log_ratios, bounds)
def test_lfm_monotone(y1, y2, c):
    lo, hi = sorted((y1, y2))
    assert tf.lfm_from_log(lo, c) <= tf.lfm_from_log(hi, c)


def test_lfm_array_and_scalar_types():
    out = tf.lfm(np.array([0.5, 1.0, 2.0]), 1.0)
    assert isinstance(out, np.ndarray)
    assert_allclose(out, [-0.6, 0.0, 0.6], atol=1e-12)
    assert isinstance(tf.lfm(2.0, 1.0), float)


def test_lfm_derivative_values():
    for c in (0.5, 1.0, 1.5, 2.0):
        assert tf.lfm_derivative(1.0, c) == 1.0
    assert tf.lfm_derivative(1e6, 1.5) < 1e-6


def _mp_derivative(r, c):
    with mpmath.workdps(40):
        f = lambda x: c * mpmath.tanh(mpmath.log(x) / c)
        return float(mpmath.diff(f, mpmath.mpf(r)))


@pytest.mark.parametrize("r,c", [(2.0, 1.0), (0.3, 1.5), (7.0, 0.5), (1e-3, 2.0), (1.0, 1.5)])
def test_lfm_derivative_matches_high_precision_fd(r, c):
    assert tf.lfm_derivative(r, c) == pytest.approx(_mp_derivative(r, c), rel=1e-12)


def test_lfm_derivative_matches_float_central_difference():
    r, c = 2.0, 1.0
    h = 1e-6 * r
    fd = (tf.lfm(r + h, c) - tf.lfm(r - h, c)) / (2 * h)
    assert tf.lfm_derivative(r, c) == pytest.approx(fd, rel=1e-6)


def test_dhp_values():
    assert tf.dhp_penalty(0.0, D) == pytest.approx(ZETA_AT_0, rel=1e-14)
    assert tf.dhp_penalty(1.0, D) == pytest.approx(ZETA_AT_1, rel=1e-14)
    assert tf.dhp_penalty(1.5, D) == pytest.approx(ZETA_AT_15, rel=1e-14)
    pos, neg = tf.dhp_terms(0.0, D)
    assert pos == pytest.approx(math.log(2) ** 1.5, rel=1e-14)
    assert neg == pytest.approx((math.log(2) / 0.8) ** 2, rel=1e-14)


def test_dhp_matches_displayed_hand_values():
    # hand-rounded figures: 1.327788 and 1.65830 (the former is off in its 6th digit)
    assert tf.dhp_penalty(0.0, D) == pytest.approx(1.327788, rel=1e-5)
    assert tf.dhp_penalty(1.0, D) == pytest.approx(1.65830, rel=1e-5)


@given(st.floats(-5, 5), st.floats(1, 4), st.floats(0.1, 3))
def test_dhp_symmetric_params_even_in_psi(psi, k, lam):
    d = tf.DhpParams.symmetric(k, lam)
    assert tf.dhp_penalty(psi, d) == pytest.approx(tf.dhp_penalty(-psi, d), rel=1e-12)


@given(st.floats(-50, 50), st.floats(1, 4), st.floats(0.1, 3), st.floats(1, 4), st.floats(0.1, 3))
def test_survival_weight_in_unit_interval(psi, kp, lp, kn, ln):
    w = tf.survival_weight(psi, tf.DhpParams(kp, lp, kn, ln))
    assert 0 <= w <= 1


def test_survival_weight_values():
    assert tf.survival_weight(0.0, D) == pytest.approx(SURVIVAL_AT_0, rel=1e-14)
    assert tf.survival_weight(0.0, D) == pytest.approx(0.265057, rel=1e-4)
    assert tf.survival_weight(1.5, D) < tf.survival_weight(0.0, D)


def test_dhp_param_validation():
    with pytest.raises(DomainError):
        tf.DhpParams(lambda_pos=0.0)
    with pytest.raises(DomainError):
        tf.DhpParams(k_neg=0.5)
    with pytest.raises(DomainError):
        tf.DhpParams(k_pos=float("nan"))


def test_gradient_multiplier_values():
    assert tf.gradient_multiplier(1.0, 1.5, D) == pytest.approx(SURVIVAL_AT_0, rel=1e-14)
    assert tf.gradient_multiplier(1e4, 1.5, D) < 0.01


def test_multiplier_bound_oracle_values():
    for c, want in BOUND.items():
        assert tf.multiplier_bound(c) == pytest.approx(want, rel=1e-14)
        assert tf.multiplier_bound(c) < math.exp(c)
    # hand-rounded figures carry small slips; within the stated 1e-4 relative
    assert tf.multiplier_bound(1.5) == pytest.approx(1.592609, rel=1e-4)
    assert tf.multiplier_bound(1.0) == pytest.approx(1.253567, rel=1e-4)
    assert tf.multiplier_bound(1e-8) == pytest.approx(1.0, abs=1e-7)


def test_multiplier_bound_mpmath_oracle():
    # independent: root of d/dy log f = sech^2(y/c) - (2/c) tanh(y/c), found numerically
    with mpmath.workdps(30):
        for c, want in BOUND.items():
            c = mpmath.mpf(c)
            f = lambda y: mpmath.exp(c * mpmath.tanh(y / c)) * mpmath.sech(y / c) ** 2
            dlog = lambda y: mpmath.sech(y / c) ** 2 - 2 / c * mpmath.tanh(y / c)
            y_star = mpmath.findroot(dlog, (mpmath.mpf(0), 3 * c), solver="anderson")
            assert float(f(y_star)) == pytest.approx(want, rel=1e-14)


def test_argmax_log_is_maximizer():
    for c in BOUND:
        y = tf.multiplier_argmax_log(c)
        peak = tf.hazard_free_multiplier_from_log(y, c)
        assert peak == pytest.approx(tf.multiplier_bound(c), rel=1e-14)
        near = tf.hazard_free_multiplier_from_log(np.array([y - 1e-3, y + 1e-3]), c)
        assert np.all(near <= peak)
    assert tf.multiplier_argmax_log(1.5) == pytest.approx(0.896, abs=1e-3)


@settings(max_examples=200)
@given(log_ratios, bounds)
def test_multiplier_never_exceeds_bound(y, c):
    bound = tf.multiplier_bound(c)
    assert tf.hazard_free_multiplier_from_log(y, c) <= bound * (1 + 1e-12)
    assert tf.multiplier_from_log(y, c, D) <= bound * (1 + 1e-12)
    # positive until sech^2(y / c) underflows
    assert tf.multiplier_from_log(y, c, D) > 0 or abs(y) / c > 300


@given(bounds)
def test_bound_below_exponential(c):
    assert 1.0 <= tf.multiplier_bound(c) < math.exp(c)


def test_token_credit():
    cr = tf.token_credit(0.0, 2.0, tf.LfmParams(), D)
    assert cr.ratio == 1.0 and cr.psi == 0.0
    assert cr.zeta == pytest.approx(ZETA_AT_0, rel=1e-14)
    assert cr.multiplier == pytest.approx(SURVIVAL_AT_0, rel=1e-14)
    assert cr.advantage == 2.0
