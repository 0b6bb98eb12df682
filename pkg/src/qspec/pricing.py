"""First-stage beta panels and the restricted second-stage cross-sectional regression."""

from __future__ import annotations

import csv
import logging
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from . import spectral
from .data import ReturnPanel, ReturnSeries
from .volatility import VariancePath, standardize_returns

log = logging.getLogger(__name__)

MODELS = ("CAPM", "TR3", "EVR3", "SIMPLE3", "FULL5", "FF3", "DR1", "HORSE_TR", "HORSE_EVR")

# regressor columns per model, in table order; CAPM beta is always the restricted term
MODEL_REGRESSORS = {
    "CAPM": (),
    "TR3": ("tr_rel_long", "tr_rel_short"),
    "EVR3": ("evr_long", "evr_short"),
    "SIMPLE3": ("tr_rel_simple", "evr_simple"),
    "FULL5": ("tr_rel_long", "tr_rel_short", "evr_long", "evr_short"),
    "HORSE_TR": ("tr_rel_simple", "tr_rel_long", "tr_rel_short"),
    "HORSE_EVR": ("evr_simple", "evr_long", "evr_short"),
    "DR1": ("downside",),
    "FF3": ("smb", "hml"),
}
TAU_FREE = ("CAPM", "FF3", "DR1")

TERM_LABELS = {
    "tr_rel_long": "lambda_tr_long",
    "tr_rel_short": "lambda_tr_short",
    "tr_rel_simple": "lambda_tr",
    "evr_long": "lambda_ev_long",
    "evr_short": "lambda_ev_short",
    "evr_simple": "lambda_ev",
    "downside": "lambda_downside",
    "smb": "lambda_smb",
    "hml": "lambda_hml",
}

MAX_CONDITION = 1e10


class PricingError(ValueError):
    pass


@dataclass(frozen=True)
class PricingModelSpec:
    name: str
    tau: float | None = None

    def __post_init__(self):
        if self.name not in MODELS:
            raise PricingError(f"unknown model {self.name!r}; choose from {MODELS}")
        if self.name not in TAU_FREE and self.tau is None:
            raise PricingError(f"model {self.name} needs a quantile level tau")
        if self.tau is not None and not 0 < self.tau < 1:
            raise PricingError(f"tau must lie in (0, 1), got {self.tau}")

    @property
    def regressors(self) -> tuple[str, ...]:
        return MODEL_REGRESSORS[self.name]

    @property
    def restricted(self) -> str:
        return "capm"


@dataclass
class PricingResult:
    """Second-stage estimates; returns in percent per period."""

    names: tuple
    lambdas: np.ndarray
    tstats: np.ndarray
    stderr: np.ndarray
    lambda_capm: float
    predicted: np.ndarray
    actual: np.ndarray
    assets: tuple = ()
    model: str = ""
    tau: float | None = None

    @property
    def residuals(self) -> np.ndarray:
        return self.actual - self.predicted

    @property
    def rmspe_raw(self) -> float:
        return float(np.sqrt(np.mean(self.residuals**2)))

    @property
    def rmspe(self) -> float:
        """Table-scale RMSPE (x100)."""
        return 100.0 * self.rmspe_raw

    def table(self) -> list[tuple[str, float, float]]:
        """(term, value, tstat) rows: regressors, then the imposed CAPM price, then RMSPE."""
        rows = [(TERM_LABELS.get(n, n), float(l), float(t)) for n, l, t in zip(self.names, self.lambdas, self.tstats)]
        rows.append(("lambda_capm", self.lambda_capm, math.nan))
        rows.append(("rmspe", self.rmspe, math.nan))
        return rows


def fit_cross_section(betas, mean_returns, mean_market: float, capm_betas,
                      names: Sequence[str] | None = None, shanken_cov=None) -> PricingResult:
    """Restricted OLS of mean returns on betas, no intercept.

    The CAPM price of risk is fixed at ``mean_market``; the remaining prices
    solve least squares on ``mean_returns - capm_betas * mean_market``.
    Standard errors are homoskedastic OLS. If ``shanken_cov`` (covariance of
    the factors behind ``betas``) is given, variances are scaled by
    ``1 + lambda' inv(cov) lambda``.
    """
    y = np.asarray(mean_returns, dtype=float)
    bc = np.asarray(capm_betas, dtype=float)
    X = np.asarray(betas, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    if X.size == 0:
        X = np.empty((y.size, 0))
    N, K = X.shape
    if names is None:
        names = tuple(f"x{j}" for j in range(K))
    if N != y.size or N != bc.size:
        raise PricingError("betas, mean returns and CAPM betas must have one row per asset")
    if N < K + 1:
        raise PricingError(f"{N} assets cannot identify {K} prices of risk")
    if not (np.all(np.isfinite(X)) and np.all(np.isfinite(y)) and np.all(np.isfinite(bc))):
        raise PricingError("non-finite betas or returns")

    target = y - bc * mean_market
    if K:
        cond = np.linalg.cond(X)
        if not np.isfinite(cond) or cond > MAX_CONDITION:
            raise PricingError(f"beta matrix is rank deficient (condition number {cond:.3g})")
        lam, *_ = np.linalg.lstsq(X, target, rcond=None)
        resid = target - X @ lam
        s2 = float(resid @ resid) / (N - K)
        cov = s2 * np.linalg.inv(X.T @ X)
        if shanken_cov is not None:
            sig = np.atleast_2d(np.asarray(shanken_cov, dtype=float))
            cov = cov * (1.0 + float(lam @ np.linalg.solve(sig, lam)))
        se = np.sqrt(np.diag(cov))
        with np.errstate(divide="ignore", invalid="ignore"):
            t = np.where(se > 0, lam / se, np.copysign(np.inf, lam))
    else:
        lam = se = t = np.empty(0)
    predicted = X @ lam + bc * mean_market
    return PricingResult(tuple(names), lam, t, se, float(mean_market), predicted, y)


# ---------------------------------------------------------------------------
# first stage


@dataclass
class QSBetaSet:
    """Per-asset betas for one quantile level.

    ``tr`` and ``evr`` hold one ``BandBetas`` per asset (``None`` where the
    estimator failed for that asset).
    """

    tau: float
    assets: tuple
    capm: np.ndarray
    downside: np.ndarray
    tr: list
    evr: list
    failures: dict = field(default_factory=dict)

    def column(self, name: str) -> np.ndarray:
        if name == "capm":
            return self.capm
        if name == "downside":
            return self.downside
        kind, _, attr = name.partition("_")
        rows = self.tr if kind == "tr" else self.evr if kind == "evr" else None
        if rows is None:
            raise KeyError(name)
        return np.array([getattr(b, attr) if b is not None else np.nan for b in rows])

    def matrix(self, columns: Sequence[str]) -> np.ndarray:
        return np.column_stack([self.column(c) for c in columns]) if columns else np.empty((len(self.assets), 0))

    def valid(self) -> np.ndarray:
        return np.array([a is not None and b is not None for a, b in zip(self.tr, self.evr)])


def _aligned(a: ReturnSeries, b: ReturnSeries) -> tuple[np.ndarray, np.ndarray]:
    common, ia, ib = np.intersect1d(a.dates, b.dates, return_indices=True)
    return a.values[ia], b.values[ib]


def resolve_workers(workers: int | None) -> int:
    if workers is None:
        workers = int(os.environ.get("QSPEC_WORKERS", "1") or 1)
    return max(1, int(workers))


def _asset_betas(asset: ReturnSeries, market: ReturnSeries, tr_market: ReturnSeries,
                 tr_asset: ReturnSeries, increments: ReturnSeries, tau: float, cutoff: float,
                 bandwidth, kernel, weighting):
    r, m = _aligned(asset, market)
    capm = spectral.capm_beta(r, m)
    down = spectral.downside_beta(r, m)

    # tail risk: market hits vs asset hits at the market quantile level
    ra, ma = _aligned(tr_asset, tr_market)
    tr = spectral.qs_betas(ma, ra, tau, cutoff, bandwidth, kernel=kernel, weighting=weighting)

    # extreme volatility risk: hits of the negated variance increment; asset
    # level is still the market-return quantile over the full market sample
    level = spectral.empirical_quantile(market.values, tau)
    common, ii, ia = np.intersect1d(increments.dates, asset.dates, return_indices=True)
    inc, ar = increments.values[ii], asset.values[ia]
    evr = spectral.qs_betas(inc, ar, tau, cutoff, bandwidth, asset_threshold=level,
                            kernel=kernel, weighting=weighting)
    return capm, down, tr, evr


def build_beta_matrix(panel: ReturnPanel, variance: VariancePath, tau: float, cutoff: float,
                      bandwidth: float | None = None, standardize: bool = False,
                      kernel: str = "epanechnikov", weighting: str = "mean",
                      workers: int | None = None) -> QSBetaSet:
    """First stage: CAPM, downside, TR and EVR betas for every asset.

    With ``standardize=True`` the TR betas are computed on returns divided by
    each series' own GARCH(1,1) volatility. Per-asset failures are logged and
    recorded in ``failures``; those rows hold ``None``.
    """
    increments = variance.increments_series()
    tr_market = standardize_returns(panel.market) if standardize else panel.market

    def one(asset):
        try:
            tr_asset = standardize_returns(asset) if standardize else asset
            return _asset_betas(asset, panel.market, tr_market, tr_asset, increments,
                                tau, cutoff, bandwidth, kernel, weighting)
        except Exception as exc:  # annotate and carry on with the other assets
            return PricingError(f"asset {asset.id!r}, tau={tau}: {exc}")

    n_workers = resolve_workers(workers)
    if n_workers > 1:
        with ThreadPoolExecutor(n_workers) as pool:
            results = list(pool.map(one, panel.assets))
    else:
        results = [one(a) for a in panel.assets]

    capm, down, tr, evr, failures = [], [], [], [], {}
    for asset, res in zip(panel.assets, results):
        if isinstance(res, Exception):
            log.warning("%s", res)
            failures[asset.id] = str(res)
            capm.append(np.nan)
            down.append(np.nan)
            tr.append(None)
            evr.append(None)
            continue
        c, d, t, e = res
        capm.append(c)
        down.append(d)
        tr.append(t)
        evr.append(e)
    return QSBetaSet(float(tau), tuple(panel.asset_ids), np.array(capm), np.array(down), tr, evr, failures)


def mean_returns(panel: ReturnPanel) -> np.ndarray:
    return np.array([a.values.mean() for a in panel.assets])


def ff3_betas(panel: ReturnPanel, factors: dict[str, ReturnSeries]) -> dict[str, np.ndarray]:
    """Time-series betas of each asset on (market excess, SMB, HML) with an intercept."""
    out = {"capm": [], "smb": [], "hml": []}
    for asset in panel.assets:
        common = asset.dates
        for f in ("smb", "hml"):
            common = np.intersect1d(common, factors[f].dates)
        common = np.intersect1d(common, panel.market.dates)
        cols = [np.ones(common.size)]
        for s in (panel.market, factors["smb"], factors["hml"]):
            cols.append(s.values[np.searchsorted(s.dates, common)])
        X = np.column_stack(cols)
        y = asset.values[np.searchsorted(asset.dates, common)]
        coef, *_ = np.linalg.lstsq(X, y, rcond=None)
        out["capm"].append(coef[1])
        out["smb"].append(coef[2])
        out["hml"].append(coef[3])
    return {k: np.array(v) for k, v in out.items()}


def run_model(spec: PricingModelSpec, panel: ReturnPanel, variance: VariancePath | None = None,
              cutoff: float = 18, bandwidth: float | None = None, betas: QSBetaSet | None = None,
              factors: dict[str, ReturnSeries] | None = None, standardize: bool = False,
              weighting: str = "mean", workers: int | None = None) -> PricingResult:
    """Estimate one model on a panel, building first-stage betas as needed."""
    ybar = mean_returns(panel)
    mkt = float(panel.market.values.mean())
    assets = np.array(panel.asset_ids)

    if spec.name == "FF3":
        if factors is None:
            raise PricingError("FF3 needs a factor file with smb and hml columns")
        fb = ff3_betas(panel, factors)
        res = fit_cross_section(np.column_stack([fb["smb"], fb["hml"]]), ybar, mkt, fb["capm"], spec.regressors)
    elif spec.name in ("CAPM", "DR1") and betas is None:
        capm = np.array([spectral.capm_beta(*_aligned(a, panel.market)) for a in panel.assets])
        X = np.empty((capm.size, 0))
        if spec.name == "DR1":
            X = np.array([spectral.downside_beta(*_aligned(a, panel.market)) for a in panel.assets])[:, None]
        res = fit_cross_section(X, ybar, mkt, capm, spec.regressors)
    else:
        if betas is None:
            if variance is None:
                raise PricingError(f"model {spec.name} needs a variance path")
            betas = build_beta_matrix(panel, variance, spec.tau, cutoff, bandwidth,
                                      standardize=standardize, weighting=weighting, workers=workers)
        ok = betas.valid()
        if not ok.all():
            log.warning("dropping %d assets with failed betas from %s", int((~ok).sum()), spec.name)
        X = betas.matrix(spec.regressors)[ok]
        res = fit_cross_section(X, ybar[ok], mkt, betas.capm[ok], spec.regressors)
        assets = assets[ok]
    res.assets = tuple(assets.tolist())
    res.model = spec.name
    res.tau = spec.tau
    return res


def default_tau_grid() -> np.ndarray:
    return np.round(np.arange(1, 51) / 100.0, 2)


def rmspe_curve(name: str, panel: ReturnPanel, variance: VariancePath, tau_grid=None,
                cutoff: float = 18, bandwidth: float | None = None, beta_cache: dict | None = None,
                **kwargs) -> list[tuple[float, float]]:
    """RMSPE of one model family over a grid of quantile levels.

    A failing tau yields ``nan`` for that point; the curve continues.
    ``beta_cache`` maps tau to a precomputed ``QSBetaSet``.
    """
    grid = default_tau_grid() if tau_grid is None else np.asarray(tau_grid, dtype=float)
    if np.any(grid <= 0) or np.any(grid > 0.5):
        raise PricingError("tau grid must lie in (0, 0.5]")
    out = []
    for tau in grid.tolist():
        try:
            betas = beta_cache.get(tau) if beta_cache else None
            res = run_model(PricingModelSpec(name, tau), panel, variance, cutoff, bandwidth, betas=betas, **kwargs)
            out.append((tau, res.rmspe))
        except Exception as exc:
            log.warning("%s at tau=%s failed: %s", name, tau, exc)
            out.append((tau, math.nan))
    return out


def write_result_csv(res: PricingResult, lambda_path, predicted_path) -> None:
    with Path(lambda_path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["term", "lambda", "tstat"])
        for term, value, t in res.table():
            w.writerow([term, repr(value), "" if math.isnan(t) else repr(t)])
        w.writerow(["rmspe_raw", repr(res.rmspe_raw), ""])
    with Path(predicted_path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["asset", "actual", "predicted"])
        for a, y, p in zip(res.assets, res.actual.tolist(), res.predicted.tolist()):
            w.writerow([a, repr(y), repr(p)])
