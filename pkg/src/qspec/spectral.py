"""Quantile-spectral betas.

Indicator series are built against a single level threshold taken from the
reference variable (market return or negated variance increment). Their
rank-based copula cross-periodogram is smoothed across Fourier frequencies
and the ratio of cross- to reference auto-spectrum gives a beta per
frequency, which is then averaged over long- and short-horizon bands.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import stats

from .data import ReturnSeries
from .sim import bvn_rectangle

TWO_PI = 2.0 * math.pi
MIN_WINDOW_POINTS = 3


class SpectralError(ValueError):
    """Degenerate input for the quantile-spectral estimator."""


@dataclass(frozen=True)
class IndicatorPair:
    reference_hits: np.ndarray
    asset_hits: np.ndarray
    tau: float
    tau_i: float
    threshold: float
    asset_threshold: float

    @property
    def n(self) -> int:
        return self.reference_hits.size


@dataclass(frozen=True)
class Periodogram:
    """Raw CCR-periodogram on the full grid 2*pi*s/n, s = 0..n-1."""

    frequencies: np.ndarray
    cross: np.ndarray
    reference_auto: np.ndarray

    @property
    def n(self) -> int:
        return self.frequencies.size


@dataclass(frozen=True)
class QSSpectrum:
    """Smoothed spectra on the positive grid 2*pi*s/n, s = 1..n//2."""

    frequencies: np.ndarray
    cross: np.ndarray
    reference_auto: np.ndarray
    n: int
    bandwidth: float

    def betas(self) -> np.ndarray:
        """Complex per-frequency beta ratio."""
        if np.any(self.reference_auto <= 0):
            raise SpectralError("reference auto-spectrum vanishes; quantile level is degenerate")
        return self.cross / self.reference_auto


def _values(x):
    return np.asarray(x.values if isinstance(x, ReturnSeries) else x, dtype=float)


def empirical_quantile(x, tau: float) -> float:
    """The ceil(n*tau)-th order statistic."""
    x = np.sort(np.asarray(x, dtype=float))
    # guard against n*tau landing a hair above an integer in floating point
    k = max(1, math.ceil(x.size * tau - 1e-9))
    return float(x[min(k, x.size) - 1])


def make_indicators(reference, asset, tau: float, asset_threshold: float | None = None) -> IndicatorPair:
    """Hit series I{ref <= q_ref(tau)} and I{asset <= level}.

    ``level`` defaults to the reference quantile itself. Extreme volatility
    betas pass the market-return quantile here, since the asset threshold is
    always a market-return level.
    """
    if not 0 < tau < 1:
        raise SpectralError(f"tau must lie in (0, 1), got {tau}")
    if isinstance(reference, ReturnSeries) and isinstance(asset, ReturnSeries):
        if not np.array_equal(reference.dates, asset.dates):
            raise SpectralError(f"series {reference.id!r} and {asset.id!r} are not aligned")
    ref, ast = _values(reference), _values(asset)
    if ref.shape != ast.shape:
        raise SpectralError("reference and asset series are not aligned")
    q = empirical_quantile(ref, tau)
    level = q if asset_threshold is None else float(asset_threshold)
    ref_hits = (ref <= q).astype(float)
    asset_hits = (ast <= level).astype(float)
    return IndicatorPair(ref_hits, asset_hits, float(tau), float(asset_hits.mean()), q, level)


def ccr_periodogram(pair: IndicatorPair) -> Periodogram:
    """(1/2 pi n) d_asset(w) conj(d_ref(w)) on the Fourier grid, via FFT."""
    n = pair.n
    if n < 2:
        raise SpectralError("need at least two observations")
    d_asset = np.fft.fft(pair.asset_hits)
    d_ref = np.fft.fft(pair.reference_hits)
    cross = d_asset * np.conj(d_ref) / (TWO_PI * n)
    auto = (d_ref.real**2 + d_ref.imag**2) / (TWO_PI * n)
    return Periodogram(TWO_PI * np.arange(n) / n, cross, auto)


def default_bandwidth(n: int) -> float:
    return n ** -0.25


def kernel_weights(u: np.ndarray, kernel: str = "epanechnikov") -> np.ndarray:
    u = np.abs(u)
    if kernel == "epanechnikov":
        return np.where(u < 1, 0.75 * (1 - u * u), 0.0)
    if kernel == "uniform":
        return np.where(u < 1, 0.5, 0.0)
    if kernel == "triangular":
        return np.where(u < 1, 1 - u, 0.0)
    raise ValueError(f"unknown kernel {kernel!r}")


def smoothing_weights(n: int, bandwidth: float, s: int, kernel: str = "epanechnikov") -> np.ndarray:
    """Normalised weights over grid points 0..n-1 for the estimate at 2*pi*s/n.

    Distances are circular and the zero frequency carries no weight.
    """
    idx = np.arange(n)
    dist = np.abs(idx - s)
    dist = np.minimum(dist, n - dist)
    w = kernel_weights(dist * TWO_PI / n / (bandwidth * math.pi), kernel)
    w[0] = 0.0
    total = w.sum()
    if np.count_nonzero(w) < MIN_WINDOW_POINTS:
        raise SpectralError("bandwidth too small: fewer than 3 grid points in the smoothing window")
    return w / total


def smooth_spectrum(pgram: Periodogram, bandwidth: float | None = None,
                    kernel: str = "epanechnikov") -> QSSpectrum:
    """Kernel-smooth the cross and reference periodograms across frequencies.

    The window has half-width ``bandwidth * pi``; weights are renormalised to
    sum to one over the grid points used, which exclude frequency zero.
    """
    n = pgram.n
    if bandwidth is None:
        bandwidth = default_bandwidth(n)
    if not 0 < bandwidth < 0.5:
        raise SpectralError(f"bandwidth must lie in (0, 0.5), got {bandwidth}")
    half = bandwidth * n / 2.0  # half-width in grid steps
    m = int(math.floor(half))
    if m >= n // 2:
        m = n // 2
    offsets = np.arange(-m, m + 1)
    k = kernel_weights(offsets / half, kernel)
    if np.count_nonzero(k) < MIN_WINDOW_POINTS:
        raise SpectralError("bandwidth too small: fewer than 3 grid points in the smoothing window")

    mask = np.ones(n)
    mask[0] = 0.0
    cross = pgram.cross * mask
    auto = pgram.reference_auto * mask
    targets = np.arange(1, n // 2 + 1)

    def circ(x):
        padded = np.concatenate((x[n - m:], x, x[:m])) if m else x
        full = np.convolve(padded, k[::-1], mode="valid")
        return full[targets]

    norm = circ(mask)
    if np.any(norm <= 0):
        raise SpectralError("empty smoothing window")
    g_cross = (circ(cross.real) + 1j * circ(cross.imag)) / norm
    g_auto = circ(auto) / norm
    return QSSpectrum(TWO_PI * targets / n, g_cross, g_auto, n, float(bandwidth))


def band_mask(frequencies: np.ndarray, band: tuple[float, float]) -> np.ndarray:
    lo, hi = band
    eps = 1e-12
    return (frequencies > lo + eps) & (frequencies <= hi + eps)


def qs_beta_band(spectrum: QSSpectrum, band: tuple[float, float], weighting: str = "mean") -> float:
    """Band beta from the smoothed spectra.

    ``weighting="mean"`` averages the real parts of the per-frequency ratios
    over the grid points in ``(lo, hi]``. ``weighting="spectral"`` weights each
    ratio by the reference auto-spectrum, i.e. sum(Re cross) / sum(auto).
    """
    lo, hi = band
    if lo < 0 or hi > math.pi + 1e-12 or lo >= hi:
        raise SpectralError(f"band {band} must lie within (0, pi]")
    sel = band_mask(spectrum.frequencies, band)
    if not sel.any():
        raise SpectralError(f"band {band} contains no Fourier frequency")
    auto = spectrum.reference_auto[sel]
    if np.any(auto <= 0):
        raise SpectralError("reference auto-spectrum is zero in band (degenerate quantile level)")
    cross = spectrum.cross[sel]
    if weighting == "mean":
        return float(np.mean(cross.real / auto))
    if weighting == "spectral":
        return float(np.sum(cross.real) / np.sum(auto))
    raise ValueError(f"unknown weighting {weighting!r}")


def band_split(n: int, period_cutoff: float) -> tuple[tuple[float, float], tuple[float, float]]:
    """Split (0, pi] at the frequency of a cycle of ``period_cutoff`` periods."""
    if period_cutoff <= 2:
        raise SpectralError("period cutoff must exceed 2 periods")
    if math.floor(n / period_cutoff + 1e-12) < 1:
        raise SpectralError(f"long band empty: n={n} too small for a {period_cutoff}-period cutoff")
    edge = TWO_PI / period_cutoff
    return (0.0, edge), (edge, math.pi)


def gaussian_copula(u: float, v: float, rho: float) -> float:
    if u <= 0 or v <= 0:
        return 0.0
    if u >= 1:
        return float(min(v, 1.0))
    if v >= 1:
        return float(u)
    return bvn_rectangle(stats.norm.ppf(u), stats.norm.ppf(v), rho)


def gaussian_beta(rho: float, tau: float, tau_i: float) -> float:
    """QS beta implied by correlated Gaussian white noise (flat across frequencies)."""
    if not -1 <= rho <= 1:
        raise SpectralError(f"correlation must lie in [-1, 1], got {rho}")
    if not 0 < tau < 1:
        raise SpectralError(f"tau must lie in (0, 1), got {tau}")
    if rho == 0:
        return 0.0
    c = gaussian_copula(tau, tau_i, rho)
    return (c - tau * tau_i) / (tau * (1 - tau))


def relative_beta(beta: float, rho: float, tau: float, tau_i: float) -> float:
    return beta - gaussian_beta(rho, tau, tau_i)


def frechet_bounds(tau: float, tau_i: float) -> tuple[float, float]:
    denom = tau * (1 - tau)
    return (max(tau + tau_i - 1, 0.0) - tau * tau_i) / denom, (min(tau, tau_i) - tau * tau_i) / denom


def indicator_cov(a: np.ndarray, b: np.ndarray) -> float:
    """Sample covariance of two 0/1 series with 1/n normalisation.

    Computed from hit counts, (n*n11 - n1*n2) / n^2, so the result is the
    correctly rounded value of the exact covariance.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    n = a.size
    n1, n2, n11 = int(a.sum()), int(b.sum()), int(a @ b)
    return float(n * n11 - n1 * n2) / float(n * n)


def simple_quantile_beta(pair: IndicatorPair) -> float:
    """Frequency-aggregated quantile beta: Cov(ref hits, asset hits) / (tau (1 - tau))."""
    if pair.n < 2:
        raise SpectralError("need at least two observations")
    m = pair.reference_hits.mean()
    if m == 0 or m == 1:
        raise SpectralError("reference hits are all zero or all one")
    return indicator_cov(pair.reference_hits, pair.asset_hits) / (pair.tau * (1 - pair.tau))


def capm_beta(asset, market) -> float:
    r, m = _values(asset), _values(market)
    if r.shape != m.shape or r.size < 2:
        raise SpectralError("CAPM beta needs two aligned series of length >= 2")
    var = np.mean((m - m.mean()) ** 2)
    if var == 0:
        raise SpectralError("market variance is zero")
    return float(np.mean((r - r.mean()) * (m - m.mean())) / var)


def downside_beta(asset, market) -> float:
    """Cov(r, m | m < mean(m)) / Var(m | m < mean(m))."""
    r, m = _values(asset), _values(market)
    down = m < m.mean()
    if down.sum() < 2:
        raise SpectralError("fewer than two downside observations")
    return capm_beta(r[down], m[down])


def pearson(a, b) -> float:
    a, b = _values(a), _values(b)
    return float(np.corrcoef(a, b)[0, 1])


@dataclass(frozen=True)
class BandBetas:
    """Long/short band betas and their Gaussian baseline for one asset and tau."""

    long: float
    short: float
    gauss: float
    simple: float
    tau_i: float
    rho: float

    @property
    def rel_long(self) -> float:
        return self.long - self.gauss

    @property
    def rel_short(self) -> float:
        return self.short - self.gauss

    @property
    def rel_simple(self) -> float:
        return self.simple - self.gauss


def qs_betas(reference, asset, tau: float, period_cutoff: float, bandwidth: float | None = None,
             asset_threshold: float | None = None, rho: float | None = None,
             kernel: str = "epanechnikov", weighting: str = "mean",
             return_spectrum: bool = False):
    """Long/short band QS betas, simple quantile beta and Gaussian baseline for one pair.

    ``rho`` for the baseline defaults to the Pearson correlation of the two
    input series.
    """
    pair = make_indicators(reference, asset, tau, asset_threshold)
    spec = smooth_spectrum(ccr_periodogram(pair), bandwidth, kernel)
    long_band, short_band = band_split(pair.n, period_cutoff)
    if rho is None:
        rho = pearson(reference, asset)
    out = BandBetas(
        long=qs_beta_band(spec, long_band, weighting),
        short=qs_beta_band(spec, short_band, weighting),
        gauss=gaussian_beta(rho, tau, pair.tau_i) if np.isfinite(rho) else 0.0,
        simple=simple_quantile_beta(pair),
        tau_i=pair.tau_i,
        rho=rho,
    )
    return (out, spec) if return_spectrum else out
