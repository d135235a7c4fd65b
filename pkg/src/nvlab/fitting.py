"""Nonlinear least-squares fitting.

A damped Gauss-Newton engine (multiplicative lambda damping) with
analytic Jacobians for the four spectroscopy models, plus the
measurement-specific entry points with their initial-guess heuristics.
Parameter uncertainties come from the (J'J)^-1 covariance scaled by
reduced chi-square.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import DimensionError

MODEL_LORENTZIAN_DIPS = "lorentzian-dips"
MODEL_DAMPED_COSINE = "damped-cosine"
MODEL_DECAYING_EXPONENTIAL = "decaying-exponential"
MODEL_STRETCHED_EXPONENTIAL = "stretched-exponential"

DAMPING_INITIAL = 1e-3
DAMPING_STEP = 10.0
COST_RTOL = 1e-10
STEP_ATOL = 1e-12
MAX_ITERATIONS = 500


@dataclass(frozen=True)
class Model:
    name: str
    param_names: tuple[str, ...]
    func: Callable[[np.ndarray, np.ndarray], np.ndarray]
    jacobian: Callable[[np.ndarray, np.ndarray], np.ndarray]

    @property
    def n_params(self) -> int:
        return len(self.param_names)


@dataclass(frozen=True)
class FitResult:
    model: str
    params: dict[str, float]
    std_errors: dict[str, float]
    reduced_chi_sq: float
    converged: bool
    n_iterations: int
    residuals: tuple[float, ...]
    message: str = ""

    def __str__(self):
        status = "converged" if self.converged else "did not converge"
        lines = [f"{self.model}: {status} in {self.n_iterations} iterations"]
        for name in self.params:
            lines.append(f"  {name} = {self.params[name]:.8g} +- {self.std_errors[name]:.3g}")
        lines.append(f"  reduced chi-sq = {self.reduced_chi_sq:.6g}")
        if self.message:
            lines.append(f"  note: {self.message}")
        return "\n".join(lines)


# ---------------------------------------------------------------------------
# Model library

def _damped_cosine(x, p):
    offset, amplitude, frequency, phase, decay = p
    arg = 2.0 * np.pi * frequency * x + phase
    return offset + amplitude * np.cos(arg) * np.exp(-x / decay)


def _damped_cosine_jac(x, p):
    _, amplitude, frequency, phase, decay = p
    arg = 2.0 * np.pi * frequency * x + phase
    env = np.exp(-x / decay)
    cos_e = np.cos(arg) * env
    sin_e = np.sin(arg) * env
    return np.column_stack([
        np.ones_like(x),
        cos_e,
        -amplitude * 2.0 * np.pi * x * sin_e,
        -amplitude * sin_e,
        amplitude * cos_e * x / decay**2,
    ])


def _decaying_exponential(x, p):
    offset, amplitude, tau = p
    return offset + amplitude * np.exp(-x / tau)


def _decaying_exponential_jac(x, p):
    _, amplitude, tau = p
    env = np.exp(-x / tau)
    return np.column_stack([
        np.ones_like(x),
        env,
        amplitude * env * x / tau**2,
    ])


def _stretched_exponential(x, p):
    offset, amplitude, tau, stretch = p
    u = np.power(np.maximum(x, 0.0) / tau, stretch)
    return offset + amplitude * np.exp(-u)


def _stretched_exponential_jac(x, p):
    _, amplitude, tau, stretch = p
    ratio = np.maximum(x, 0.0) / tau
    u = np.power(ratio, stretch)
    env = np.exp(-u)
    # d/d(stretch) involves u*log(ratio); both vanish together at x=0
    log_ratio = np.where(ratio > 0, np.log(np.where(ratio > 0, ratio, 1.0)), 0.0)
    return np.column_stack([
        np.ones_like(x),
        env,
        amplitude * env * stretch * u / tau,
        -amplitude * env * u * log_ratio,
    ])


def _lorentzian_profile(x, center, fwhm):
    u = 2.0 * (x - center) / fwhm
    return u, 1.0 / (1.0 + u * u)


def _make_lorentzian_dips(n_dips: int) -> Model:
    if n_dips == 1:
        names = ("baseline", "center", "fwhm", "depth")
    elif n_dips == 2:
        names = ("baseline", "center1", "fwhm1", "depth1",
                 "center2", "fwhm2", "depth2")
    else:
        raise ValueError("only 1 or 2 dips are supported")

    def func(x, p):
        y = np.full_like(x, p[0])
        for k in range(n_dips):
            center, fwhm, depth = p[1 + 3 * k: 4 + 3 * k]
            _, profile = _lorentzian_profile(x, center, fwhm)
            y = y - depth * profile
        return y

    def jacobian(x, p):
        cols = [np.ones_like(x)]
        for k in range(n_dips):
            center, fwhm, depth = p[1 + 3 * k: 4 + 3 * k]
            u, profile = _lorentzian_profile(x, center, fwhm)
            common = u * profile * profile  # u / (1+u^2)^2
            cols.append(-depth * 4.0 * common / fwhm)          # d/d(center)
            cols.append(-depth * 2.0 * u * common / fwhm)      # d/d(fwhm)
            cols.append(-profile)                              # d/d(depth)
        return np.column_stack(cols)

    return Model(MODEL_LORENTZIAN_DIPS, names, func, jacobian)


LORENTZIAN_SINGLE = _make_lorentzian_dips(1)
LORENTZIAN_DOUBLE = _make_lorentzian_dips(2)
DAMPED_COSINE = Model(
    MODEL_DAMPED_COSINE,
    ("offset", "amplitude", "frequency", "phase", "decay"),
    _damped_cosine, _damped_cosine_jac,
)
DECAYING_EXPONENTIAL = Model(
    MODEL_DECAYING_EXPONENTIAL,
    ("offset", "amplitude", "tau"),
    _decaying_exponential, _decaying_exponential_jac,
)
STRETCHED_EXPONENTIAL = Model(
    MODEL_STRETCHED_EXPONENTIAL,
    ("offset", "amplitude", "tau", "stretch"),
    _stretched_exponential, _stretched_exponential_jac,
)

MODELS: dict[str, Model] = {
    m.name: m for m in (DAMPED_COSINE, DECAYING_EXPONENTIAL, STRETCHED_EXPONENTIAL)
}
MODELS[MODEL_LORENTZIAN_DIPS] = LORENTZIAN_SINGLE


# ---------------------------------------------------------------------------
# Engine

def fit_least_squares(x, y, model, initial_guess, bounds=None) -> FitResult:
    """Damped Gauss-Newton descent on sum of squared residuals.

    The damping factor is multiplied by 10 on a rejected step and
    divided by 10 on an accepted one; convergence when the relative
    cost change drops below 1e-10 or the step norm below 1e-12, capped
    at 500 iterations. Singular normal equations are reported through
    ``converged=False`` with a diagnostic, never raised.
    """
    if isinstance(model, str):
        model = MODELS[model]
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.ndim != 1 or x.shape != y.shape:
        raise DimensionError("x and y must be equal-length 1-d arrays")
    k = model.n_params
    if len(x) < k + 1:
        raise DimensionError(f"need at least {k + 1} points to fit {k} parameters")

    p = _initial_vector(model, initial_guess)
    lo, hi = _bound_arrays(model, bounds)
    p = np.clip(p, lo, hi)

    def cost_of(params):
        r = y - model.func(x, params)
        return r, float(r @ r)

    residual, cost = cost_of(p)
    lam = DAMPING_INITIAL
    message = ""
    converged = False
    n_iter = 0

    while n_iter < MAX_ITERATIONS:
        n_iter += 1
        jac = model.jacobian(x, p)
        if not np.all(np.isfinite(jac)):
            message = "non-finite jacobian"
            break
        normal = jac.T @ jac
        gradient = jac.T @ residual
        diag = np.diag(normal).copy()
        try:
            step = np.linalg.solve(normal + lam * np.diag(diag), gradient)
        except np.linalg.LinAlgError:
            message = "singular jacobian"
            break
        if not np.all(np.isfinite(step)):
            message = "singular jacobian"
            break
        trial = np.clip(p + step, lo, hi)
        trial_residual, trial_cost = cost_of(trial)
        if not math.isfinite(trial_cost):
            lam *= DAMPING_STEP
            continue
        if trial_cost <= cost:
            improvement = cost - trial_cost
            step_norm = float(np.linalg.norm(trial - p))
            p, residual, cost = trial, trial_residual, trial_cost
            lam /= DAMPING_STEP
            if step_norm < STEP_ATOL or improvement <= COST_RTOL * max(cost, 1e-300):
                converged = True
                break
        else:
            lam *= DAMPING_STEP

    dof = max(len(x) - k, 1)
    reduced = cost / dof
    errors = _std_errors(model, x, p, reduced)
    if converged and errors is None:
        converged = False
        message = message or "singular covariance at solution"
    if errors is None:
        errors = np.zeros(k)
    return FitResult(
        model=model.name,
        params={name: float(v) for name, v in zip(model.param_names, p)},
        std_errors={name: float(e) for name, e in zip(model.param_names, errors)},
        reduced_chi_sq=float(reduced),
        converged=converged,
        n_iterations=n_iter,
        residuals=tuple(float(r) for r in residual),
        message=message,
    )


def _initial_vector(model: Model, guess) -> np.ndarray:
    if isinstance(guess, dict):
        missing = [n for n in model.param_names if n not in guess]
        if missing:
            raise DimensionError(f"initial guess missing {missing}")
        return np.array([float(guess[n]) for n in model.param_names])
    vec = np.asarray(guess, dtype=float)
    if vec.shape != (model.n_params,):
        raise DimensionError(
            f"initial guess must have {model.n_params} entries for {model.name}"
        )
    return vec.copy()


def _bound_arrays(model: Model, bounds):
    k = model.n_params
    lo = np.full(k, -np.inf)
    hi = np.full(k, np.inf)
    if bounds is None:
        return lo, hi
    if isinstance(bounds, dict):
        items = ((model.param_names.index(name), pair) for name, pair in bounds.items())
    else:
        if len(bounds) != k:
            raise DimensionError(f"bounds must have {k} entries")
        items = enumerate(bounds)
    for i, pair in items:
        if pair is None:
            continue
        b_lo, b_hi = pair
        if b_lo is not None:
            lo[i] = b_lo
        if b_hi is not None:
            hi[i] = b_hi
    if np.any(lo > hi):
        raise DimensionError("lower bound exceeds upper bound")
    return lo, hi


def _std_errors(model: Model, x, p, reduced_chi_sq):
    jac = model.jacobian(x, p)
    normal = jac.T @ jac
    try:
        cov = np.linalg.inv(normal) * reduced_chi_sq
    except np.linalg.LinAlgError:
        return None
    variances = np.diag(cov)
    if not np.all(np.isfinite(variances)):
        return None
    return np.sqrt(np.clip(variances, 0.0, None))


# ---------------------------------------------------------------------------
# Measurement-specific fits

def _smooth5(y: np.ndarray) -> np.ndarray:
    padded = np.pad(y, 2, mode="edge")
    kernel = np.ones(5) / 5.0
    return np.convolve(padded, kernel, mode="valid")


def _local_minima(y: np.ndarray) -> list[int]:
    idx = [
        i for i in range(1, len(y) - 1)
        if y[i] <= y[i - 1] and y[i] <= y[i + 1] and (y[i] < y[i - 1] or y[i] < y[i + 1])
    ]
    return sorted(idx, key=lambda i: y[i])  # deepest first


def fit_odmr(freqs, signal) -> FitResult:
    """Lorentzian-dip fit with automatic one-vs-two dip selection.

    Candidate centers are the two deepest local minima of the 5-point
    moving average; the two-dip model is kept only when the fitted
    centers are separated by more than one fitted linewidth and both
    depths clear 3x the residual noise.
    """
    x = np.asarray(freqs, dtype=float)
    y = np.asarray(signal, dtype=float)
    if x.ndim != 1 or x.shape != y.shape:
        raise DimensionError("freqs and signal must be equal-length 1-d arrays")
    if len(x) < 8:
        raise DimensionError("need at least 8 points across the dips")

    smooth = _smooth5(y)
    minima = _local_minima(smooth)
    baseline = float(np.percentile(y, 90))
    span = float(x[-1] - x[0])
    dx = span / max(len(x) - 1, 1)
    fwhm0 = max(span / 10.0, 2.0 * dx)
    depth0 = max(baseline - float(np.min(y)), 1e-12)

    def center_bounds():
        return (float(np.min(x)), float(np.max(x)))

    single = fit_least_squares(
        x, y, LORENTZIAN_SINGLE,
        {
            "baseline": baseline,
            "center": float(x[minima[0]]) if minima else float(x[np.argmin(y)]),
            "fwhm": fwhm0,
            "depth": depth0,
        },
        bounds={
            "center": center_bounds(),
            "fwhm": (dx / 2.0, 2.0 * span),
            "depth": (0.0, None),
        },
    )
    if len(minima) < 2:
        return single

    c1, c2 = sorted((float(x[minima[0]]), float(x[minima[1]])))
    double = fit_least_squares(
        x, y, LORENTZIAN_DOUBLE,
        {
            "baseline": baseline,
            "center1": c1, "fwhm1": fwhm0, "depth1": depth0,
            "center2": c2, "fwhm2": fwhm0, "depth2": depth0,
        },
        bounds={
            "center1": center_bounds(), "center2": center_bounds(),
            "fwhm1": (dx / 2.0, 2.0 * span), "fwhm2": (dx / 2.0, 2.0 * span),
            "depth1": (0.0, None), "depth2": (0.0, None),
        },
    )
    if not double.converged:
        return single
    noise = float(np.std(double.residuals)) if double.residuals else 0.0
    separation = abs(double.params["center2"] - double.params["center1"])
    fwhm_mean = 0.5 * (double.params["fwhm1"] + double.params["fwhm2"])
    deep_enough = (
        double.params["depth1"] > 3.0 * noise and double.params["depth2"] > 3.0 * noise
    )
    # A dip narrower than the grid spacing rests on a single sample;
    # that is a noise spike, not a resolved line.
    resolved = min(double.params["fwhm1"], double.params["fwhm2"]) >= dx
    if separation > fwhm_mean and deep_enough and resolved:
        return double
    return single


def fit_rabi(times, signal):
    """Damped-cosine fit; returns (FitResult, derived) where derived
    carries the pi time 1/(2 f) with propagated uncertainty. Expects
    at least two oscillation periods sampled at >= 6 points/period."""
    x = np.asarray(times, dtype=float)
    y = np.asarray(signal, dtype=float)
    if x.ndim != 1 or x.shape != y.shape:
        raise DimensionError("times and signal must be equal-length 1-d arrays")
    if len(x) < 12:
        raise DimensionError("need at least 12 points (two periods at 6 points each)")

    centered = y - np.mean(y)
    spectrum = np.abs(np.fft.rfft(centered))
    dt = float(np.mean(np.diff(x)))
    freq_axis = np.fft.rfftfreq(len(x), d=dt)
    peak = int(np.argmax(spectrum[1:]) + 1)  # skip DC
    f0 = float(freq_axis[peak]) if freq_axis[peak] > 0 else 1.0 / (x[-1] - x[0])

    span = float(x[-1] - x[0])
    result = fit_least_squares(
        x, y, DAMPED_COSINE,
        {
            "offset": float(np.mean(y)),
            "amplitude": float((np.max(y) - np.min(y)) / 2.0),
            "frequency": f0,
            "phase": 0.0,
            "decay": 2.0 * span,
        },
        bounds={
            "frequency": (0.25 / span, 2.0 / dt),
            "decay": (dt, None),
        },
    )
    f = result.params["frequency"]
    f_err = result.std_errors["frequency"]
    derived = {
        "pi_time": 1.0 / (2.0 * f) if f > 0 else float("inf"),
        "pi_time_err": f_err / (2.0 * f * f) if f > 0 else float("inf"),
    }
    return result, derived


def fit_decay(taus, signal, stretched: bool = False) -> FitResult:
    """Exponential (optionally stretched) decay toward an offset."""
    x = np.asarray(taus, dtype=float)
    y = np.asarray(signal, dtype=float)
    if x.ndim != 1 or x.shape != y.shape:
        raise DimensionError("taus and signal must be equal-length 1-d arrays")
    if len(x) < 5:
        raise DimensionError("need at least 5 points")

    order = np.argsort(x)
    xs, ys = x[order], y[order]
    offset0 = float(np.mean(ys[-max(2, len(ys) // 5):]))
    amplitude0 = float(ys[0] - offset0)
    tau0 = _crossing_tau(xs, ys, offset0, amplitude0)

    if stretched:
        model = STRETCHED_EXPONENTIAL
        guess = {"offset": offset0, "amplitude": amplitude0, "tau": tau0, "stretch": 1.0}
        bounds = {"tau": (1e-12, None), "stretch": (0.5, 3.0)}
    else:
        model = DECAYING_EXPONENTIAL
        guess = {"offset": offset0, "amplitude": amplitude0, "tau": tau0}
        bounds = {"tau": (1e-12, None)}
    return fit_least_squares(x, y, model, guess, bounds=bounds)


def _crossing_tau(xs, ys, offset, amplitude) -> float:
    """Initial decay constant: where the signal crosses offset + A/e,
    linearly interpolated; falls back to a third of the span."""
    target = offset + amplitude / math.e
    if amplitude != 0:
        sign = 1.0 if amplitude > 0 else -1.0
        for i in range(1, len(xs)):
            a, b = sign * ys[i - 1], sign * ys[i]
            t = sign * target
            if a >= t >= b and a != b:
                frac = (a - t) / (a - b)
                return float(xs[i - 1] + frac * (xs[i] - xs[i - 1]))
    span = float(xs[-1] - xs[0])
    return max(span / 3.0, 1e-12)
