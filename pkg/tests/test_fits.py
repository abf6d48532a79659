"""Least-squares engine and the five model shapes."""

import math

import numpy as np
import pytest

from eitmem import (
    MODEL_SHAPES,
    FitError,
    FitResult,
    bootstrap_sigmas,
    eval_model,
    fit_curve,
    fit_uncertainty,
    get_shape,
)
from eitmem.atoms import DomainError

TRUE_PARAMS = {
    "lorentzian-dip": ((0.5, 0.3, 2e3, 8e3), np.linspace(-30e3, 30e3, 201)),
    "cusp": ((0.7, 5e3, 1e3), np.linspace(-40e3, 40e3, 201)),
    "linear": ((120.0, 33.3e3), np.linspace(1.5, 25.0, 8)),
    "saturation": ((0.68, 4.0), np.linspace(0.5, 25.0, 40)),
    "exp-decay": ((0.9, 95e-6), np.linspace(5e-6, 300e-6, 12)),
}


# --- shape evaluation ---------------------------------------------------------

def test_eval_model_trivial_points():
    assert eval_model("exp-decay", (0.9, 95e-6), 95e-6) == pytest.approx(
        0.9 / math.e, rel=1e-12)
    assert eval_model("saturation", (0.68, 4.0), 4.0) == pytest.approx(
        0.34, rel=1e-12)
    assert eval_model("lorentzian-dip", (0.5, 0.3, 2e3, 8e3), 2e3 + 4e3)[()] \
        == pytest.approx(0.5 - 0.15, rel=1e-12)
    assert eval_model("cusp", (0.7, 5e3, 1e3), 1e3) == pytest.approx(0.7, rel=1e-12)
    assert eval_model("cusp", (0.7, 5e3, 1e3), 1e3 + 5e3 * math.log(2.0)) \
        == pytest.approx(0.35, rel=1e-12)


def test_eval_model_validation():
    with pytest.raises(DomainError, match="unknown model shape"):
        eval_model("gaussian", (1.0,), [0.0, 1.0])
    with pytest.raises(DomainError, match="takes 2 parameters"):
        eval_model("exp-decay", (1.0, 2.0, 3.0), [0.0])
    with pytest.raises(DomainError, match="must be positive: tau"):
        eval_model("exp-decay", (1.0, -2.0), [0.0])


def test_get_shape_passthrough():
    shape = MODEL_SHAPES["cusp"]
    assert get_shape(shape) is shape
    assert get_shape("cusp") is shape
    with pytest.raises(DomainError, match="expected one of"):
        get_shape("parabola")


# --- recovery on noiseless data -------------------------------------------------

@pytest.mark.parametrize("name", sorted(TRUE_PARAMS))
def test_noiseless_recovery_from_auto_init(name):
    truth, x = TRUE_PARAMS[name]
    y = eval_model(name, truth, x)
    fit = fit_curve(name, x, y)
    assert fit.converged
    assert fit.params == pytest.approx(truth, rel=1e-6)
    assert fit.rms < 1e-8 * float(np.max(np.abs(y)))


@pytest.mark.parametrize("name", sorted(TRUE_PARAMS))
def test_noiseless_recovery_from_perturbed_inits(name):
    truth, x = TRUE_PARAMS[name]
    y = eval_model(name, truth, x)
    rng = np.random.default_rng(hash(name) % 2**32)
    for _ in range(10):
        init = np.asarray(truth) * rng.uniform(0.5, 1.5, size=len(truth))
        fit = fit_curve(name, x, y, init=init)
        assert fit.converged
        assert fit.params == pytest.approx(truth, rel=1e-6)


def test_linear_intercept_recovery():
    truth, x = TRUE_PARAMS["linear"]
    fit = fit_curve("linear", x, eval_model("linear", truth, x))
    assert fit["intercept"] == pytest.approx(33.3e3, rel=1e-6)


def test_linear_matches_closed_form():
    rng = np.random.default_rng(7)
    x = np.linspace(0.0, 10.0, 25)
    y = 3.2 * x - 1.4 + rng.normal(0.0, 0.5, size=25)
    fit = fit_curve("linear", x, y)
    slope, intercept = np.polyfit(x, y, 1)
    assert fit["slope"] == pytest.approx(slope, rel=1e-12)
    assert fit["intercept"] == pytest.approx(intercept, rel=1e-12)


# --- recovery on noisy data -----------------------------------------------------

def test_noisy_cusp_recovers_transit_time():
    transit = 7.2e-6
    x = np.linspace(-400e3, 400e3, 201)
    clean = 0.7 * np.exp(-np.abs(x) * transit)
    rng = np.random.default_rng(11)
    y = clean + rng.normal(0.0, 0.007, size=len(x))
    fit = fit_curve("cusp", x, y)
    assert fit.converged
    assert 1.0 / fit["width"] == pytest.approx(transit, rel=0.03)


def test_noisy_exponential_decay_recovers_lifetime():
    tau = 95e-6
    t = np.linspace(10e-6, 250e-6, 12)
    clean = 0.8 * np.exp(-t / tau)
    rng = np.random.default_rng(3)
    y = clean + rng.normal(0.0, 0.04, size=len(t))
    fit = fit_curve("exp-decay", t, y)
    assert fit.converged
    assert fit["tau"] == pytest.approx(tau, rel=0.10)


def test_fit_never_worse_than_its_init():
    truth, x = TRUE_PARAMS["cusp"]
    rng = np.random.default_rng(5)
    y = eval_model("cusp", truth, x) + rng.normal(0.0, 0.02, size=len(x))
    shape = get_shape("cusp")
    start = shape.auto_init(x, y)
    rms0 = float(np.sqrt(np.mean((y - shape.evaluate(start, x)) ** 2)))
    assert fit_curve("cusp", x, y).rms <= rms0 + 1e-15


# --- uncertainties ----------------------------------------------------------------

def test_noiseless_sigmas_vanish():
    truth, x = TRUE_PARAMS["saturation"]
    y = eval_model("saturation", truth, x)
    fit = fit_curve("saturation", x, y)
    sigmas = fit_uncertainty(fit, x, y)
    assert np.all(sigmas <= 1e-8 * np.abs(truth))


def test_sigma_scales_with_noise_amplitude():
    x = np.linspace(1.5, 25.0, 10)
    clean = eval_model("linear", (120.0, 33.3e3), x)
    ratios = []
    for seed in range(100):
        rng = np.random.default_rng(seed)
        noise = rng.normal(0.0, 1.0, size=len(x))
        lo = fit_curve("linear", x, clean + 40.0 * noise)
        hi = fit_curve("linear", x, clean + 80.0 * noise)
        ratios.append(fit_uncertainty(hi, x, clean + 80.0 * noise)[1]
                      / fit_uncertainty(lo, x, clean + 40.0 * noise)[1])
    assert np.mean(ratios) == pytest.approx(2.0, rel=0.20)


def test_sigma_shrinks_for_duplicated_dataset():
    rng = np.random.default_rng(17)
    x = np.linspace(1.5, 25.0, 40)
    y = eval_model("linear", (120.0, 33.3e3), x) + rng.normal(0.0, 30.0, size=40)
    single = fit_curve("linear", x, y)
    doubled_x = np.concatenate([x, x])
    doubled_y = np.concatenate([y, y])
    doubled = fit_curve("linear", doubled_x, doubled_y)
    ratio = (fit_uncertainty(doubled, doubled_x, doubled_y)
             / fit_uncertainty(single, x, y))
    assert ratio == pytest.approx([1 / math.sqrt(2.0)] * 2, rel=0.02)


def test_sigma_matches_monte_carlo_spread():
    x = np.linspace(1.5, 25.0, 10)
    clean = eval_model("linear", (120.0, 33.3e3), x)
    intercepts, reported = [], []
    for seed in range(150):
        rng = np.random.default_rng(1000 + seed)
        y = clean + rng.normal(0.0, 50.0, size=len(x))
        fit = fit_curve("linear", x, y)
        intercepts.append(fit["intercept"])
        reported.append(fit_uncertainty(fit, x, y)[1])
    assert np.mean(reported) == pytest.approx(np.std(intercepts, ddof=1), rel=0.20)


def test_uncertainty_requires_convergence():
    stuck = FitResult(shape="exp-decay", params=np.array([0.8, 95e-6]),
                      sigmas=None, rms=0.1, iterations=200, converged=False)
    with pytest.raises(FitError, match="converged"):
        fit_uncertainty(stuck, np.linspace(0, 1e-3, 8), np.zeros(8))


def test_dead_direction_reports_infinite_sigma():
    t = np.linspace(10e-6, 250e-6, 12)
    flat = FitResult(shape="exp-decay", params=np.array([0.0, 95e-6]),
                     sigmas=None, rms=0.0, iterations=1, converged=True)
    sigmas = fit_uncertainty(flat, t, np.zeros(12))
    assert math.isinf(sigmas[1])  # tau does not move a zero-amplitude decay


def test_bootstrap_agrees_with_curvature():
    rng = np.random.default_rng(23)
    x = np.linspace(1.5, 25.0, 30)
    y = eval_model("linear", (120.0, 33.3e3), x) + rng.normal(0.0, 40.0, size=30)
    fit = fit_curve("linear", x, y)
    curvature = fit_uncertainty(fit, x, y)
    bootstrap = bootstrap_sigmas("linear", x, y, fit, n_resamples=200, seed=1)
    assert np.all(bootstrap / curvature > 0.6)
    assert np.all(bootstrap / curvature < 1.6)


def test_bootstrap_requires_convergence():
    stuck = FitResult(shape="linear", params=np.array([1.0, 0.0]),
                      sigmas=None, rms=0.1, iterations=200, converged=False)
    with pytest.raises(FitError, match="converged"):
        bootstrap_sigmas("linear", np.linspace(0, 1, 8), np.zeros(8), stuck)


# --- structural failures and validation -------------------------------------------

def test_singular_problem_names_dead_parameter():
    x = np.zeros(8)
    y = np.zeros(8)
    with pytest.raises(FitError, match="does not affect the residuals"):
        fit_curve("saturation", x, y, init=np.array([0.5, 1.0]))


def test_fit_data_validation():
    x = np.linspace(0.0, 1.0, 12)
    with pytest.raises(DomainError, match="at least"):
        fit_curve("lorentzian-dip", x[:6], np.zeros(6))
    with pytest.raises(DomainError, match="equal length"):
        fit_curve("linear", x, np.zeros(5))
    with pytest.raises(DomainError, match="finite"):
        fit_curve("linear", x, np.full(12, np.inf))


def test_fit_init_validation():
    truth, x = TRUE_PARAMS["exp-decay"]
    y = eval_model("exp-decay", truth, x)
    with pytest.raises(DomainError, match="init must have 2 entries"):
        fit_curve("exp-decay", x, y, init=[1.0])
    with pytest.raises(DomainError, match="positivity"):
        fit_curve("exp-decay", x, y, init=[1.0, -1e-6])


def test_fit_result_report_round_trip():
    truth, x = TRUE_PARAMS["exp-decay"]
    y = eval_model("exp-decay", truth, x)
    fit = fit_curve("exp-decay", x, y)
    report = fit.to_report()
    assert report["shape"] == "exp-decay"
    assert report["converged"] is True
    assert set(report["params"]) == {"amplitude", "tau"}
    assert report["params"]["tau"] == pytest.approx(95e-6, rel=1e-6)
    assert set(report["sigmas"]) == {"amplitude", "tau"}
    assert report["iterations"] == fit.iterations
    assert fit["amplitude"] == pytest.approx(0.9, rel=1e-6)
