import json
import math

import numpy as np
import pytest

from mhpo import lab
from mhpo import transforms as tf
from mhpo.errors import ConfigError
from mhpo.objectives import MethodConfig


def _by_name(rep):
    return {c.name: c for c in rep.checks}


def test_bound_suite_passes_and_lists_grid():
    rep = lab.certify_multiplier_bound()
    assert rep.passed
    names = _by_name(rep)
    for c in (0.5, 1.0, 1.5, 2.0):
        chk = names[f"hazard_free_max_matches_bound[c={c}]"]
        assert chk.detail["grid_max"] == pytest.approx(tf.multiplier_bound(c), rel=1e-4)
    assert names["hazard_free_max_le_bound[c=1.5]"].measured == pytest.approx(1.592609, rel=1e-4)


def test_bound_suite_catches_wrong_closed_form(monkeypatch):
    monkeypatch.setattr(tf, "multiplier_bound", lambda p: 0.9)
    assert not lab.certify_multiplier_bound().passed


def test_lfm_property_suite():
    rep = lab.certify_lfm_properties()
    assert rep.passed, rep.to_text()
    names = _by_name(rep)
    assert any(n.startswith("reciprocal_antisymmetry") for n in names)
    assert any(n.startswith("local_fidelity") for n in names)
    assert "smooth_attenuation[c=1.5]" in names


@pytest.mark.parametrize("c", [0.5, 1.0, 1.5, 1.9])
def test_attenuation_holds_below_two(c):
    chk = lab.certify_attenuation(c).checks[0]
    assert chk.passed
    assert chk.detail["left_slope"] == pytest.approx(2 / c - 1, abs=1e-6)
    assert chk.detail["right_slope"] == pytest.approx(-(1 + 2 / c), abs=1e-6)


@pytest.mark.parametrize("c", [2.0, 2.5])
def test_attenuation_fails_from_two(c):
    # e^{-y} sech^2(y/c) tends to 4 (c = 2) or diverges (c > 2) as r -> 0+
    assert not lab.certify_attenuation(c).passed


def test_smoothness_suite():
    rep = lab.certify_smoothness()
    assert rep.passed, rep.to_text()
    clip = _by_name(rep)["clip_coefficient_discontinuous"]
    assert clip.measured >= 0.8


def test_fd_oracle_is_independent_and_precise():
    for r, c in [(2.0, 1.0), (1e-5, 0.5), (3e5, 2.0)]:
        assert lab.fd_lfm_derivative(r, c) == pytest.approx(tf.lfm_derivative(r, c), rel=1e-12)


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_semi_gradient_certified(seed):
    rep = lab.certify_semi_gradient(seed)
    assert rep.passed, rep.to_text()
    assert _by_name(rep)["semi_gradient_drifted"].measured < 1e-5


def test_semi_gradient_check_detects_wrong_gradient(monkeypatch):
    from mhpo import trainer
    real = trainer.surrogate

    def inflated(params, batch, cfg):
        ev = real(params, batch, cfg)
        ev.grad *= 1.01
        return ev

    monkeypatch.setattr(lab, "surrogate", inflated)
    assert not lab.certify_semi_gradient(0).passed


@pytest.mark.parametrize("sigma", lab.MOMENT_SIGMAS)
def test_second_moment_per_token(sigma):
    rep = lab.certify_second_moment(lab.StressSpec(lab.RatioDist.LOGNORMAL, sigma=sigma))
    chk = rep.checks[0]
    assert chk.passed and chk.detail["slack_factor"] >= 1.0
    assert "batch_second_moment" in chk.detail


def test_second_moment_naive_much_larger_under_heavy_drift():
    chk = lab.certify_second_moment(lab.StressSpec(lab.RatioDist.LOGNORMAL, sigma=3.0)).checks[0]
    assert chk.detail["naive_over_mhpo"] >= 10


def test_anchor_second_moment_closed_form():
    measured, analytic = lab.anchor_second_moment(lab.StressSpec())
    assert measured == pytest.approx(analytic, rel=1e-12)


def test_stress_dead_zones():
    for spec in lab.default_stress_specs():
        rep = lab.certify_stress(spec)
        assert rep.passed, rep.to_text()
        rows = {r.transform: r for r in lab.stress_compare(spec)}
        assert rows["mhpo"].zero_fraction == 0.0
        assert rows["naive_pg"].zero_fraction == 0.0
        assert sum(n for _, _, n in rows["mhpo"].histogram) == spec.n_samples


def test_stress_respects_configured_bound():
    spec = lab.StressSpec(sigma=2.0, transforms_under_test=[MethodConfig.mhpo(c=0.5)])
    chk = _by_name(lab.certify_stress(spec))["mhpo_max_le_bound[lognormal(mu=0,sigma=2)]"]
    assert chk.passed and chk.bound == pytest.approx(tf.multiplier_bound(0.5))


def test_naive_coefficient_max_grows_with_samples():
    small, large = lab.naive_max_growth(lab.StressSpec(lab.RatioDist.PARETO_TAIL, alpha=1.5))
    assert large > small


def test_stress_spec_validation():
    with pytest.raises(ConfigError, match="n_samples"):
        lab.StressSpec(n_samples=100)
    with pytest.raises(ValueError):
        lab.StressSpec(ratio_distribution="cauchy")


def test_reports_are_deterministic_json():
    a = lab.run_suite("gradcheck").to_json()
    b = lab.run_suite("gradcheck").to_json()
    assert a == b
    payload = json.loads(a)
    assert payload["passed"] and all("invariant" in c for c in payload["checks"])
    text = lab.run_suite("stress").to_text()
    assert text.rstrip().endswith("overall: PASS")


def test_unknown_suite():
    with pytest.raises(ValueError):
        lab.run_suite("everything")


def test_sampled_scores_respect_sqrt2():
    scores = lab.sample_scores(lab.StressSpec())
    assert np.max(np.linalg.norm(scores, axis=1)) <= math.sqrt(2) + 1e-12
