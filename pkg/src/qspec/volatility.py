"""Market variance paths: GARCH(1,1) quasi-likelihood fits and realized variance."""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy import optimize, signal
from scipy.special import expit, logit

from .data import ReturnSeries

log = logging.getLogger(__name__)

MIN_GARCH_LENGTH = 100
MIN_DAYS_PER_MONTH = 5


class GarchError(RuntimeError):
    """GARCH fit failed or produced a non-stationary estimate."""


@dataclass(frozen=True)
class GarchParams:
    omega: float
    alpha: float
    beta: float
    mu: float = 0.0

    def __post_init__(self):
        if not (self.omega > 0 and self.alpha >= 0 and self.beta >= 0):
            raise GarchError(f"invalid GARCH parameters {self}")
        if self.alpha + self.beta >= 1:
            raise GarchError(f"non-stationary GARCH fit: alpha + beta = {self.alpha + self.beta:.6f}")

    @property
    def persistence(self) -> float:
        return self.alpha + self.beta

    @property
    def unconditional_variance(self) -> float:
        return self.omega / (1.0 - self.alpha - self.beta)


@dataclass(frozen=True)
class VariancePath:
    """Variance per period and its negated first differences.

    ``neg_increments[t] = sigma2[t] - sigma2[t + 1]`` and is dated at
    ``dates[t + 1]`` (see ``increment_dates``).
    """

    dates: np.ndarray
    sigma2: np.ndarray
    neg_increments: np.ndarray
    excluded: tuple = ()

    @classmethod
    def from_sigma2(cls, dates, sigma2, excluded=()) -> "VariancePath":
        dates = np.asarray(dates, dtype=np.int64)
        sigma2 = np.asarray(sigma2, dtype=float)
        if np.any(~(sigma2 > 0)):
            raise ValueError("variance path must be strictly positive")
        return cls(dates, sigma2, sigma2[:-1] - sigma2[1:], tuple(excluded))

    @property
    def increment_dates(self) -> np.ndarray:
        return self.dates[1:]

    def increments_series(self) -> ReturnSeries:
        """Negated variance increments as a dated series (the EVR reference)."""
        return ReturnSeries("neg_dsigma2", self.increment_dates, self.neg_increments)

    def to_csv(self, path) -> None:
        with Path(path).open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["date", "sigma2", "neg_increment"])
            inc = [""] + [repr(v) for v in self.neg_increments.tolist()]
            for d, s, i in zip(self.dates.tolist(), self.sigma2.tolist(), inc):
                w.writerow([d, repr(s), i])


def garch_variance(eps: np.ndarray, omega: float, alpha: float, beta: float,
                   sigma2_0: float | None = None) -> np.ndarray:
    """Conditional variance recursion sigma2[t] = omega + alpha*eps[t-1]^2 + beta*sigma2[t-1].

    ``sigma2[0]`` defaults to the sample variance of ``eps``.
    """
    eps = np.asarray(eps, dtype=float)
    if sigma2_0 is None:
        sigma2_0 = float(np.mean(eps**2))
    x = omega + alpha * eps[:-1] ** 2
    # y[t] = x[t] + beta*y[t-1] with y[-1] = sigma2_0
    tail, _ = signal.lfilter([1.0], [1.0, -beta], x, zi=[beta * sigma2_0])
    return np.concatenate(([sigma2_0], tail))


def garch_loglik(eps: np.ndarray, omega: float, alpha: float, beta: float,
                 sigma2_0: float | None = None) -> float:
    """Gaussian quasi log-likelihood of demeaned returns."""
    s2 = garch_variance(eps, omega, alpha, beta, sigma2_0)
    if np.any(~(s2 > 0)) or not np.all(np.isfinite(s2)):
        return -np.inf
    return float(-0.5 * np.sum(np.log(2 * np.pi) + np.log(s2) + eps**2 / s2))


def _unpack(theta, scale):
    # omega = scale*exp(a); persistence = expit(b); alpha share = expit(c)
    a, b, c = theta
    persistence = expit(b)
    alpha = persistence * expit(c)
    return scale * np.exp(a), alpha, persistence - alpha


def fit_garch11(series: ReturnSeries, start: tuple[float, float] = (0.05, 0.90),
                tol: float = 1e-10) -> tuple[GarchParams, VariancePath]:
    """Fit GARCH(1,1) by Gaussian QMLE with a constant mean.

    The mean is the sample mean; sigma2[0] is the sample variance of the
    demeaned returns. Stationarity is imposed through the parameterisation
    ``alpha + beta = expit(b) < 1``, and the search starts from the
    variance-targeted point implied by ``start``.
    """
    r = np.asarray(series.values, dtype=float)
    if r.size < MIN_GARCH_LENGTH:
        raise GarchError(f"{series.id}: need at least {MIN_GARCH_LENGTH} observations, got {r.size}")
    mu = float(np.mean(r))
    eps = r - mu
    var = float(np.mean(eps**2))
    if not np.isfinite(var) or var <= 0:
        raise GarchError(f"{series.id}: zero sample variance, likelihood is not finite")

    a0, b0 = start
    omega0 = var * (1 - a0 - b0)
    theta0 = np.array([0.0, logit(a0 + b0), logit(a0 / (a0 + b0))])
    scale = omega0
    n = eps.size

    def nll(theta):
        omega, alpha, beta = _unpack(theta, scale)
        ll = garch_loglik(eps, omega, alpha, beta, var)
        return -ll / n if np.isfinite(ll) else 1e10

    res = optimize.minimize(nll, theta0, method="L-BFGS-B",
                            options={"ftol": tol, "gtol": 1e-8, "maxiter": 2000})
    # polish; L-BFGS-B with numerical gradients can stop early on flat ridges
    res = optimize.minimize(nll, res.x, method="Nelder-Mead",
                            options={"xatol": 1e-9, "fatol": tol, "maxiter": 4000})
    if not np.isfinite(res.fun) or res.fun >= 1e10:
        raise GarchError(f"{series.id}: optimizer failed ({res.message})")
    omega, alpha, beta = _unpack(res.x, scale)
    params = GarchParams(float(omega), float(alpha), float(beta), mu)
    sigma2 = garch_variance(eps, params.omega, params.alpha, params.beta, var)
    return params, VariancePath.from_sigma2(series.dates, sigma2)


def realized_variance(daily: ReturnSeries, calendar=None,
                      min_days: int = MIN_DAYS_PER_MONTH) -> VariancePath:
    """Monthly realized variance from daily returns.

    sigma2(month) is the sum of squared daily returns demeaned within the
    month. Months with fewer than ``min_days`` observations or zero variance
    are excluded and listed in ``VariancePath.excluded``; increments are then
    taken between consecutive retained months.
    """
    months = daily.dates // 100
    if calendar is None:
        calendar = np.unique(months)
    calendar = np.asarray(calendar, dtype=np.int64)
    dates, values, excluded = [], [], []
    for m in calendar.tolist():
        x = daily.values[months == m]
        if x.size < min_days:
            excluded.append((m, "too few days"))
            continue
        rv = float(np.sum((x - x.mean()) ** 2))
        if rv <= 0:
            excluded.append((m, "zero variance"))
            continue
        dates.append(m)
        values.append(rv)
    for m, why in excluded:
        log.warning("realized variance: month %d excluded (%s)", m, why)
    if len(dates) < 2:
        raise ValueError("realized variance needs at least two usable months")
    return VariancePath.from_sigma2(dates, values, excluded)


def standardize_returns(series: ReturnSeries) -> ReturnSeries:
    """Demeaned returns divided by their own GARCH(1,1) conditional volatility."""
    params, path = fit_garch11(series)
    z = (series.values - params.mu) / np.sqrt(path.sigma2)
    return ReturnSeries(series.id, series.dates, z)
