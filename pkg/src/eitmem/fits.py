"""Damped Gauss-Newton least squares and the toolkit's five model shapes.

Shapes: lorentzian-dip (baseline, depth, center, fwhm), cusp
(amplitude, width, center), linear (slope, intercept), saturation (scale, a),
exp-decay (amplitude, tau).  All Jacobians are analytic.

Uncertainties are curvature-based: 1-sigma from the diagonal of the inverse
normal matrix scaled by the residual variance, matching the usual quoted
"value +/- sigma" convention.  A residual-resampling bootstrap is available
separately as a cross-check.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .atoms import DomainError

__all__ = [
    "ModelShape", "FitResult", "FitError", "MODEL_SHAPES", "get_shape",
    "eval_model", "fit_curve", "fit_uncertainty", "bootstrap_sigmas",
]

MAX_ITERATIONS = 200
STEP_TOL = 1e-8
COST_TOL = 1e-10


class FitError(RuntimeError):
    """The fit problem is structurally defective (distinct from non-convergence)."""


@dataclass(frozen=True)
class ModelShape:
    """A named model: evaluator, analytic Jacobian, constraints, init heuristic."""

    name: str
    param_names: tuple[str, ...]
    evaluate: Callable[[np.ndarray, np.ndarray], np.ndarray]
    jacobian: Callable[[np.ndarray, np.ndarray], np.ndarray]
    positive: tuple[int, ...]            # indices of strictly positive parameters
    auto_init: Callable[[np.ndarray, np.ndarray], np.ndarray]

    @property
    def n_params(self) -> int:
        return len(self.param_names)

    def check(self, params: np.ndarray) -> bool:
        return all(params[i] > 0.0 for i in self.positive)


def _lorentzian_dip(p, x):
    baseline, depth, center, fwhm = p
    h2 = (0.5 * fwhm) ** 2
    return baseline - depth * h2 / (h2 + (x - center) ** 2)


def _lorentzian_dip_jac(p, x):
    _, depth, center, fwhm = p
    h = 0.5 * fwhm
    u = x - center
    denom = (h * h + u * u) ** 2
    jac = np.empty((len(x), 4))
    jac[:, 0] = 1.0
    jac[:, 1] = -h * h / (h * h + u * u)
    jac[:, 2] = -depth * 2.0 * h * h * u / denom
    jac[:, 3] = -depth * h * u * u / denom
    return jac


def _lorentzian_dip_init(x, y):
    return np.array([np.max(y), np.max(y) - np.min(y),
                     x[int(np.argmin(y))], 0.5 * (x[-1] - x[0])])


def _cusp(p, x):
    amplitude, width, center = p
    return amplitude * np.exp(-np.abs(x - center) / width)


def _cusp_jac(p, x):
    amplitude, width, center = p
    u = x - center
    e = np.exp(-np.abs(u) / width)
    jac = np.empty((len(x), 3))
    jac[:, 0] = e
    jac[:, 1] = amplitude * e * np.abs(u) / width**2
    jac[:, 2] = amplitude * e * np.sign(u) / width
    return jac


def _cusp_init(x, y):
    return np.array([np.max(y), 0.5 * (x[-1] - x[0]), x[int(np.argmax(y))]])


def _linear(p, x):
    return p[0] * x + p[1]


def _linear_jac(p, x):
    jac = np.empty((len(x), 2))
    jac[:, 0] = x
    jac[:, 1] = 1.0
    return jac


def _linear_init(x, y):
    # Closed-form least squares; the iteration then terminates at once.
    design = np.column_stack([x, np.ones_like(x)])
    sol, *_ = np.linalg.lstsq(design, y, rcond=None)
    return sol


def _saturation(p, x):
    scale, a = p
    return scale * x / (a + x)


def _saturation_jac(p, x):
    scale, a = p
    jac = np.empty((len(x), 2))
    jac[:, 0] = x / (a + x)
    jac[:, 1] = -scale * x / (a + x) ** 2
    return jac


def _saturation_init(x, y):
    scale = float(np.max(y))
    a = float(x[int(np.argmin(np.abs(y - 0.5 * scale)))])
    if a <= 0.0:
        a = float(np.median(np.abs(x))) or 1.0
    return np.array([scale, a])


def _exp_decay(p, x):
    return p[0] * np.exp(-x / p[1])


def _exp_decay_jac(p, x):
    amplitude, tau = p
    e = np.exp(-x / tau)
    jac = np.empty((len(x), 2))
    jac[:, 0] = e
    jac[:, 1] = amplitude * e * x / tau**2
    return jac


def _exp_decay_init(x, y):
    amplitude = float(y[0])
    below = np.nonzero(y <= amplitude / math.e)[0]
    tau = float(x[below[0]] - x[0]) if len(below) else 0.0
    if tau <= 0.0:
        tau = 0.5 * float(x[-1] - x[0])
    return np.array([amplitude, tau])


MODEL_SHAPES: dict[str, ModelShape] = {
    s.name: s for s in (
        ModelShape("lorentzian-dip", ("baseline", "depth", "center", "fwhm"),
                   _lorentzian_dip, _lorentzian_dip_jac, (3,), _lorentzian_dip_init),
        ModelShape("cusp", ("amplitude", "width", "center"),
                   _cusp, _cusp_jac, (1,), _cusp_init),
        ModelShape("linear", ("slope", "intercept"),
                   _linear, _linear_jac, (), _linear_init),
        ModelShape("saturation", ("scale", "a"),
                   _saturation, _saturation_jac, (1,), _saturation_init),
        ModelShape("exp-decay", ("amplitude", "tau"),
                   _exp_decay, _exp_decay_jac, (1,), _exp_decay_init),
    )
}


def get_shape(shape: str | ModelShape) -> ModelShape:
    if isinstance(shape, ModelShape):
        return shape
    try:
        return MODEL_SHAPES[shape]
    except KeyError:
        raise DomainError(
            f"unknown model shape {shape!r}, expected one of {sorted(MODEL_SHAPES)}") from None


def eval_model(shape: str | ModelShape, params, x) -> np.ndarray:
    """Evaluate a model shape, enforcing its parameter invariants."""
    model = get_shape(shape)
    p = np.asarray(params, dtype=float)
    if p.shape != (model.n_params,):
        raise DomainError(
            f"{model.name} takes {model.n_params} parameters {model.param_names}, "
            f"got shape {p.shape}")
    if not model.check(p):
        bad = [model.param_names[i] for i in model.positive if p[i] <= 0.0]
        raise DomainError(f"{model.name} parameters must be positive: {', '.join(bad)}")
    return model.evaluate(p, np.asarray(x, dtype=float))


@dataclass(frozen=True)
class FitResult:
    """Converged (or flagged) least-squares estimate for one model shape."""

    shape: str
    params: np.ndarray
    sigmas: np.ndarray | None
    rms: float
    iterations: int
    converged: bool

    def __getitem__(self, name: str) -> float:
        idx = MODEL_SHAPES[self.shape].param_names.index(name)
        return float(self.params[idx])

    def to_report(self) -> dict:
        """JSON-ready summary: shape, params, sigmas, rms, iterations, converged."""
        names = MODEL_SHAPES[self.shape].param_names
        return {
            "shape": self.shape,
            "params": {n: float(v) for n, v in zip(names, self.params)},
            "sigmas": None if self.sigmas is None else
                      {n: float(v) for n, v in zip(names, self.sigmas)},
            "rms": self.rms,
            "iterations": self.iterations,
            "converged": self.converged,
        }


def _validate_data(model: ModelShape, x, y) -> tuple[np.ndarray, np.ndarray]:
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.ndim != 1 or x.shape != y.shape:
        raise DomainError("x and y must be 1-d arrays of equal length")
    if len(x) < 2 * model.n_params:
        raise DomainError(
            f"{model.name} needs at least {2 * model.n_params} samples, got {len(x)}")
    if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
        raise DomainError("fit data must be finite")
    return x, y


def fit_curve(shape: str | ModelShape, x, y, init=None,
              max_iterations: int = MAX_ITERATIONS) -> FitResult:
    """Least-squares fit by damped Gauss-Newton with Marquardt scaling.

    ``init`` defaults to the shape's documented heuristic (extremum location
    for centers, half the grid span for widths, 1/e crossing for decay times,
    closed-form least squares for the linear shape).  Iteration stops when the
    relative step is below 1e-8 or the relative cost change below 1e-10; a fit
    that has not converged after ``max_iterations`` accepted steps is returned
    with ``converged=False``, never silently.
    """
    model = get_shape(shape)
    x, y = _validate_data(model, x, y)
    params = np.asarray(model.auto_init(x, y) if init is None else init, dtype=float)
    if params.shape != (model.n_params,):
        raise DomainError(f"init must have {model.n_params} entries for {model.name}")
    if not model.check(params):
        raise DomainError(f"initial parameters violate {model.name} positivity constraints")

    residual = y - model.evaluate(params, x)
    cost = float(residual @ residual)
    lam = 0.0
    converged = False
    iteration = 0
    while iteration < max_iterations and not converged:
        iteration += 1
        jac = model.jacobian(params, x)
        grad = jac.T @ residual
        normal = jac.T @ jac
        diag = np.diag(normal).copy()
        dead = np.nonzero(diag <= 0.0)[0]
        if len(dead):
            raise FitError(
                f"singular normal matrix: parameter "
                f"{model.param_names[int(dead[0])]!r} does not affect the residuals")

        accepted = False
        for _ in range(60):
            try:
                step = np.linalg.solve(normal + lam * np.diag(diag), grad)
            except np.linalg.LinAlgError:
                lam = max(4.0 * lam, 1e-6)
                continue
            candidate = params + step
            if model.check(candidate):
                new_residual = y - model.evaluate(candidate, x)
                new_cost = float(new_residual @ new_residual)
                if new_cost <= cost:
                    accepted = True
                    break
            lam = max(4.0 * lam, 1e-6)
            if lam > 1e12:
                break
        if not accepted:
            break

        rel_step = np.linalg.norm(step) / (np.linalg.norm(params) + 1e-300)
        rel_drop = (cost - new_cost) / max(cost, 1e-300)
        params, residual, cost = candidate, new_residual, new_cost
        lam = lam / 3.0 if lam > 1e-12 else 0.0
        if rel_step < STEP_TOL or rel_drop < COST_TOL:
            converged = True

    rms = math.sqrt(cost / len(x))
    sigmas = _curvature_sigmas(model, params, x, y) if converged else None
    return FitResult(shape=model.name, params=params, sigmas=sigmas, rms=rms,
                     iterations=iteration, converged=converged)


def fit_uncertainty(fit: FitResult, x, y) -> np.ndarray:
    """1-sigma parameter uncertainties of a converged fit on its data.

    sigma_j = sqrt(s^2 * [(J^T J)^-1]_jj) with s^2 the residual variance over
    the degrees of freedom.  Directions with no curvature get an explicit
    infinite sigma instead of an exception.
    """
    if not fit.converged:
        raise FitError("uncertainties are only defined for a converged fit")
    model = get_shape(fit.shape)
    x, y = _validate_data(model, x, y)
    return _curvature_sigmas(model, np.asarray(fit.params, dtype=float), x, y)


def _curvature_sigmas(model: ModelShape, p: np.ndarray, x: np.ndarray,
                      y: np.ndarray) -> np.ndarray:
    dof = len(x) - model.n_params
    residual = y - model.evaluate(p, x)
    s2 = float(residual @ residual) / dof
    jac = model.jacobian(p, x)
    _, sing, vt = np.linalg.svd(jac, full_matrices=False)
    tol = sing[0] * max(jac.shape) * np.finfo(float).eps if sing[0] > 0 else 0.0
    live = sing > tol
    sigmas = np.empty(model.n_params)
    for j in range(model.n_params):
        null_weight = float(np.sum(vt[~live, j] ** 2))
        if null_weight > 1e-12 or not np.any(live):
            sigmas[j] = np.inf
        else:
            sigmas[j] = math.sqrt(s2 * float(np.sum(vt[live, j] ** 2 / sing[live] ** 2)))
    return sigmas


def bootstrap_sigmas(shape: str | ModelShape, x, y, fit: FitResult,
                     n_resamples: int = 200, seed: int = 0) -> np.ndarray:
    """Residual-resampling bootstrap spread of the fit parameters.

    Cross-check for the curvature-based sigmas; resamples that fail to
    converge are dropped (an error is raised if fewer than half survive).
    """
    model = get_shape(shape)
    x, y = _validate_data(model, x, y)
    if not fit.converged:
        raise FitError("bootstrap needs a converged fit to resample around")
    center = model.evaluate(fit.params, x)
    residual = y - center
    rng = np.random.default_rng(seed)
    draws = []
    for _ in range(n_resamples):
        fake = center + rng.choice(residual, size=len(x), replace=True)
        refit = fit_curve(model, x, fake, init=fit.params)
        if refit.converged:
            draws.append(refit.params)
    if len(draws) < max(2, n_resamples // 2):
        raise FitError(f"only {len(draws)}/{n_resamples} bootstrap resamples converged")
    return np.std(np.asarray(draws), axis=0, ddof=1)
