"""Classical baselines: ARIMA(5,1,0) by OLS, GARCH(1,1) by likelihood ascent, L2 logistic regression."""

from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.optimize import minimize
from scipy.special import expit, ndtr
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.utils.validation import check_is_fitted, check_X_y, check_array

from . import autodiff as ad
from .exceptions import ConvergenceError, DataError, NumericalError

# ---------------------------------------------------------------- ARIMA


@dataclass
class ArimaModel:
    c: float
    phi: np.ndarray
    sigma2: float
    p: int = 5
    d: int = 1
    q: int = 0
    fitted: np.ndarray = field(default_factory=lambda: np.empty(0), repr=False)

    def to_dict(self) -> dict:
        return {"p": self.p, "d": self.d, "q": self.q, "c": self.c,
                "phi": [float(v) for v in self.phi], "sigma2": self.sigma2}

    def forecast_diff(self, history) -> float:
        """One-step forecast of the next differenced value given the level history."""
        dy = np.diff(np.asarray(history, dtype=np.float64), n=self.d)
        if dy.size < self.p:
            raise DataError(f"history needs at least {self.p + self.d} values")
        lags = dy[-1:-self.p - 1:-1]
        return float(self.c + self.phi @ lags)

    def predict_direction(self, history) -> float:
        """P(next difference > 0) as ``Phi(forecast / sigma)``."""
        f = self.forecast_diff(history)
        if self.sigma2 <= 0:
            return 0.5 if f == 0 else float(f > 0)
        return float(ndtr(f / np.sqrt(self.sigma2)))


def _lag_design(dy: np.ndarray, p: int) -> tuple[np.ndarray, np.ndarray]:
    n = dy.size
    X = np.ones((n - p, p + 1))
    for i in range(1, p + 1):
        X[:, i] = dy[p - i:n - i]
    return X, dy[p:]


def fit_arima(series, p: int = 5, d: int = 1) -> ArimaModel:
    """Difference ``d`` times, then OLS of AR(p) with intercept on the lag matrix."""
    y = np.asarray(series, dtype=np.float64).ravel()
    if y.size <= 2 * (p + d):
        raise DataError(f"ARIMA needs more than {2 * (p + d)} observations, got {y.size}")
    if not np.all(np.isfinite(y)):
        raise DataError("ARIMA input contains non-finite values")
    dy = np.diff(y, n=d)
    X, target = _lag_design(dy, p)
    if np.ptp(dy) == 0:
        # constant differences: the lag columns duplicate the intercept
        fitted = np.full(target.size, dy[0])
        return ArimaModel(float(dy[0]), np.zeros(p), 0.0, p, d, 0, fitted)
    if np.linalg.matrix_rank(X) < X.shape[1]:
        raise NumericalError("ARIMA lag design matrix is singular")
    coef, *_ = np.linalg.lstsq(X, target, rcond=None)
    fitted = X @ coef
    resid = target - fitted
    sigma2 = float(resid @ resid / max(target.size - X.shape[1], 1))
    return ArimaModel(float(coef[0]), coef[1:].copy(), sigma2, p, d, 0, fitted)


def predict_direction(model: ArimaModel, history) -> float:
    return model.predict_direction(history)


def arima_direction_probs(model: ArimaModel, levels, end_rows) -> np.ndarray:
    """Direction probability for each window ending at ``end_rows[i]`` (uses levels[:end+1])."""
    levels = np.asarray(levels, dtype=np.float64)
    return np.array([model.predict_direction(levels[:r + 1]) for r in end_rows])


# ---------------------------------------------------------------- GARCH


@dataclass
class GarchModel:
    omega: float
    alpha: float
    beta: float
    loglik: float
    mean: float = 0.0
    sigma2_0: float = 1.0
    history: list[float] = field(default_factory=list, repr=False)
    prior_up: float = 0.5

    @property
    def unconditional_variance(self) -> float:
        return self.omega / (1.0 - self.alpha - self.beta)

    def to_dict(self) -> dict:
        d = asdict(self)
        d.pop("history")
        d["unconditional_variance"] = self.unconditional_variance
        return d

    def conditional_variance(self, returns) -> np.ndarray:
        eps = np.asarray(returns, dtype=np.float64) - self.mean
        s2 = np.empty(eps.size)
        s2[0] = self.sigma2_0
        for t in range(1, eps.size):
            s2[t] = self.omega + self.alpha * eps[t - 1] ** 2 + self.beta * s2[t - 1]
        return s2

    def predict_direction(self, n: int) -> np.ndarray:
        """Variance models carry no direction signal: emit the class prior."""
        return np.full(n, self.prior_up)


def _garch_params(theta):
    """Map unconstrained ``(a, la, lb)`` to ``omega > 0`` and ``alpha + beta < 1``."""
    omega = ad.exp(theta[0:1])
    shares = ad.softmax(ad.concat([theta[1:3], ad.Tensor(np.zeros(1))], axis=0), axis=0)
    return omega, shares[0:1], shares[1:2]


def _garch_loglik(theta, eps2: np.ndarray, s0: float):
    omega, alpha, beta = _garch_params(theta)
    u = omega + alpha * ad.Tensor(eps2[:-1])
    tail = ad.linear_scan(u, beta, ad.Tensor(np.array([s0])))
    sigma2 = ad.concat([ad.Tensor(np.array([s0])), tail], axis=0)
    ll = ad.log(sigma2) + ad.Tensor(eps2) / sigma2
    return -0.5 * (np.log(2 * np.pi) + ad.mean(ll))


def garch_value_and_grad(theta_values, eps2, s0) -> tuple[float, np.ndarray]:
    theta = ad.Tensor(theta_values, requires_grad=True)
    with ad.Graph() as graph:
        ll = _garch_loglik(theta, eps2, s0)
        grads = ad.backward(ll)
    graph.release()
    return float(ll.value[0]), grads[theta]


def fit_garch(returns, max_iter: int = 500, tol: float = 1e-7) -> GarchModel:
    """Maximize the Gaussian GARCH(1,1) mean log-likelihood.

    Gradients come from the autodiff engine; BFGS with a Wolfe line search
    guarantees every accepted iterate raises the likelihood. ``history``
    holds the per-iteration log-likelihood.
    """
    r = np.asarray(returns, dtype=np.float64).ravel()
    if r.size < 200:
        raise DataError(f"GARCH needs at least 200 returns, got {r.size}")
    if not np.all(np.isfinite(r)):
        raise DataError("GARCH input contains non-finite values")
    mu = float(r.mean())
    eps2 = (r - mu) ** 2
    s0 = float(eps2.mean())
    if s0 <= 0:
        raise DataError("GARCH input has zero variance")
    # alpha=0.05, beta=0.90, omega matching the sample variance
    theta0 = np.array([np.log(s0 * 0.05), 0.0, np.log(0.90 / 0.05)])
    history: list[float] = []
    best = {"theta": theta0, "ll": -np.inf}

    def objective(th):
        try:
            ll, g = garch_value_and_grad(th, eps2, s0)
        except NumericalError:
            return np.inf, np.zeros_like(th)
        if ll > best["ll"]:
            best.update(theta=th.copy(), ll=ll)
        return -ll, -g

    def record(th):
        history.append(garch_value_and_grad(th, eps2, s0)[0])

    history.append(garch_value_and_grad(theta0, eps2, s0)[0])
    res = minimize(objective, theta0, jac=True, method="BFGS", callback=record,
                   options={"maxiter": max_iter, "gtol": tol})
    theta = res.x
    ll, grad = garch_value_and_grad(theta, eps2, s0)
    omega, alpha, beta = (float(t.value[0]) for t in _garch_params(ad.Tensor(theta)))
    model = GarchModel(omega, alpha, beta, ll, mu, s0, history, float(np.mean(r > 0)))
    if not res.success and np.linalg.norm(grad) > 1e-4:
        theta_b = best["theta"]
        o, a, b = (float(t.value[0]) for t in _garch_params(ad.Tensor(theta_b)))
        raise ConvergenceError(
            f"GARCH fit did not converge after {res.nit} iterations: {res.message}",
            best=GarchModel(o, a, b, best["ll"], mu, s0, history, model.prior_up))
    return model


def simulate_garch(omega: float, alpha: float, beta: float, n: int, rng: np.random.Generator,
                   burn: int = 500) -> np.ndarray:
    """Forward simulation of GARCH(1,1) returns with standard normal shocks."""
    z = rng.standard_normal(n + burn)
    s2 = omega / (1.0 - alpha - beta)
    out = np.empty(n + burn)
    for t in range(n + burn):
        out[t] = np.sqrt(s2) * z[t]
        s2 = omega + alpha * out[t] ** 2 + beta * s2
    return out[burn:]


# ---------------------------------------------------------------- logistic


@dataclass
class LogisticModel:
    weights: np.ndarray
    bias: float
    l2: float
    converged: bool = True
    n_iter: int = 0

    def predict_proba(self, X) -> np.ndarray:
        return expit(np.asarray(X, dtype=np.float64) @ self.weights + self.bias)

    def to_dict(self) -> dict:
        return {"weights": [float(v) for v in self.weights], "bias": self.bias, "l2": self.l2,
                "converged": self.converged, "n_iter": self.n_iter}


def logistic_objective(params, X, y, l2):
    """Mean BCE plus ``l2 / (2N) * ||w||^2`` (bias unpenalized) and its gradient."""
    n = X.shape[0]
    w, b = params[:-1], params[-1]
    z = X @ w + b
    # log(1 + e^z) - y z, computed stably
    loss = np.mean(np.logaddexp(0.0, z) - y * z) + 0.5 * l2 / n * (w @ w)
    r = expit(z) - y
    grad = np.empty_like(params)
    grad[:-1] = X.T @ r / n + l2 / n * w
    grad[-1] = r.mean()
    return loss, grad


def fit_logistic(X, y, l2: float = 1.0, tol: float = 1e-6, max_iter: int = 10_000) -> LogisticModel:
    """Minimize L2-regularized BCE (L-BFGS) until the gradient norm drops below ``tol``."""
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64).ravel()
    if X.ndim != 2 or X.shape[0] != y.size:
        raise DataError("fit_logistic expects X (n, d) aligned with y")
    if y.min() == y.max():
        raise DataError("fit_logistic needs both classes present")
    if l2 < 0:
        raise DataError("l2 must be non-negative")
    x0 = np.zeros(X.shape[1] + 1)
    res = minimize(logistic_objective, x0, args=(X, y, l2), jac=True, method="L-BFGS-B",
                   options={"maxiter": max_iter, "gtol": tol * 1e-2, "ftol": 1e-15})
    if not np.all(np.isfinite(res.x)):
        raise NumericalError("logistic regression diverged")
    _, grad = logistic_objective(res.x, X, y, l2)
    return LogisticModel(res.x[:-1].copy(), float(res.x[-1]), l2,
                         bool(np.linalg.norm(grad) < tol), int(res.nit))


class LogisticBaseline(ClassifierMixin, BaseEstimator):
    """scikit-learn style wrapper around :func:`fit_logistic`."""

    def __init__(self, l2: float = 1.0, tol: float = 1e-6, max_iter: int = 10_000):
        self.l2 = l2
        self.tol = tol
        self.max_iter = max_iter

    def fit(self, X, y):
        X, y = check_X_y(X, y)
        self.classes_ = np.array([0, 1])
        self.model_ = fit_logistic(X, y, self.l2, self.tol, self.max_iter)
        self.coef_ = self.model_.weights[None, :]
        self.intercept_ = np.array([self.model_.bias])
        return self

    def predict_proba(self, X):
        check_is_fitted(self, "model_")
        p = self.model_.predict_proba(check_array(X))
        return np.column_stack([1.0 - p, p])

    def predict(self, X):
        return (self.predict_proba(X)[:, 1] >= 0.5).astype(int)


def window_last_step(windows) -> np.ndarray:
    """Flat features for non-sequential baselines: each window's final row."""
    return np.asarray(windows)[:, -1, :]
