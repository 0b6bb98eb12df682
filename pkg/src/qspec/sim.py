"""Synthetic data with known quantile-spectral structure, plus brute-force references."""

from __future__ import annotations

import csv
import math
from fractions import Fraction
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy import integrate, stats

from .data import ReturnSeries
from .volatility import GarchParams

SIM_KINDS = ("gaussian_wn", "garch_path", "tail_dependent")


@dataclass(frozen=True)
class SimSpec:
    """What to simulate.

    ``params`` is a ``GarchParams`` for ``garch_path`` and the lower-tail
    dependence coefficient (float in (0, 1)) for ``tail_dependent``.
    """

    kind: str = "gaussian_wn"
    n: int = 1024
    rho: float = 0.0
    params: object = None
    seed: int = 0

    def __post_init__(self):
        if self.kind not in SIM_KINDS:
            raise ValueError(f"unknown simulation kind {self.kind!r}")
        if self.n < 8:
            raise ValueError("n must be >= 8")
        if abs(self.rho) > 1:
            raise ValueError("|rho| must be <= 1")
        if self.kind == "tail_dependent":
            lam = self.params if self.params is not None else 0.5
            if not 0 < lam < 1:
                raise ValueError("tail dependence coefficient must lie in (0, 1)")


def _gaussian_pair(rng, n, rho):
    z1 = rng.standard_normal(n)
    z2 = rng.standard_normal(n)
    return z1, rho * z1 + math.sqrt(1.0 - rho * rho) * z2


def simulate_garch(params: GarchParams, n: int, rng, burn: int = 500):
    """GARCH(1,1) returns with Gaussian innovations; returns (returns, sigma2, innovations)."""
    z = rng.standard_normal(n + burn)
    s2 = np.empty(n + burn)
    eps = np.empty(n + burn)
    s2[0] = params.unconditional_variance
    eps[0] = math.sqrt(s2[0]) * z[0]
    omega, alpha, beta = params.omega, params.alpha, params.beta
    for t in range(1, n + burn):
        s2[t] = omega + alpha * eps[t - 1] ** 2 + beta * s2[t - 1]
        eps[t] = math.sqrt(s2[t]) * z[t]
    return params.mu + eps[burn:], s2[burn:], z[burn:]


def clayton_theta(tail_dependence: float) -> float:
    """Clayton parameter with lower-tail dependence 2**(-1/theta)."""
    return -math.log(2.0) / math.log(tail_dependence)


def simulate(spec: SimSpec) -> tuple[ReturnSeries, ReturnSeries]:
    """Draw a (reference, asset) pair according to ``spec``."""
    rng = np.random.default_rng(spec.seed)
    n = spec.n
    if spec.kind == "gaussian_wn":
        x, y = _gaussian_pair(rng, n, spec.rho)
    elif spec.kind == "garch_path":
        params = spec.params or GarchParams(0.1, 0.05, 0.90)
        x, s2, z = simulate_garch(params, n, rng)
        z2 = rng.standard_normal(n)
        y = params.mu + np.sqrt(s2) * (spec.rho * z + math.sqrt(1 - spec.rho**2) * z2)
    else:
        # Marshall-Olkin sampler for the Clayton copula, normal margins
        theta = clayton_theta(spec.params if spec.params is not None else 0.5)
        v = rng.gamma(1.0 / theta, 1.0, size=n)
        e = rng.exponential(size=(2, n))
        u = (1.0 + e / v) ** (-1.0 / theta)
        x, y = stats.norm.ppf(u)
    dates = np.arange(1, n + 1)
    return ReturnSeries("x", dates, x), ReturnSeries("y", dates, y)


def brute_quantile_cov(pair, max_lag: int) -> dict[int, float]:
    """Lagged indicator covariances Cov(ref[t+k], asset[t]) by direct summation.

    Uses 1/n normalisation and full-sample means for every lag. Sums are
    exact (rational arithmetic on the 0/1 hits) and rounded once at the end.
    """
    a = [int(v) for v in pair.reference_hits]
    b = [int(v) for v in pair.asset_hits]
    n = len(a)
    if not 0 <= max_lag < n / 4:
        raise ValueError("max_lag must be < n/4")
    ma, mb = Fraction(sum(a), n), Fraction(sum(b), n)
    out = {}
    for k in range(-max_lag, max_lag + 1):
        total = Fraction(0)
        for t in range(n):
            if 0 <= t + k < n:
                total += (a[t + k] - ma) * (b[t] - mb)
        out[k] = float(total / n)
    return out


def bvn_rectangle(h: float, k: float, rho: float, tol: float = 1e-12) -> float:
    """P(X <= h, Y <= k) for a standard bivariate normal with correlation rho.

    Integrates the derivative with respect to the correlation,
    Phi2 = Phi(h)Phi(k) + (1/2pi) int_0^asin(rho) exp(-(h^2 - 2hk sin t + k^2) / (2 cos^2 t)) dt,
    which stays bounded as |rho| -> 1.
    """
    if abs(rho) > 1:
        raise ValueError("|rho| must be <= 1")
    if math.isinf(h) or math.isinf(k):
        if h == -math.inf or k == -math.inf:
            return 0.0
        return float(stats.norm.cdf(min(h, k)))
    base = stats.norm.cdf(h) * stats.norm.cdf(k)
    if rho == 0:
        return float(base)
    upper = math.asin(rho)
    hk, hh = h * k, (h * h + k * k) / 2.0

    def integrand(t):
        c = math.cos(t)
        if c <= 0.0:
            # limit at |rho| = 1
            s = math.copysign(1.0, t)
            return math.exp(-hh / 2.0) if (h == s * k) else 0.0
        return math.exp(-(hh - hk * math.sin(t)) / (c * c))

    val, _ = integrate.quad(integrand, 0.0, upper, epsabs=tol, epsrel=tol, limit=200)
    return float(min(1.0, max(0.0, base + val / (2.0 * math.pi))))


def write_pair_csv(pair: tuple[ReturnSeries, ReturnSeries], path) -> None:
    x, y = pair
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["t", "x", "y"])
        for t, a, b in zip(x.dates.tolist(), x.values.tolist(), y.values.tolist()):
            w.writerow([t, repr(a), repr(b)])
