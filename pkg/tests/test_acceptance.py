"""Acceptance criteria, one test per criterion.

Each test records a PASS/FAIL/SKIP line that is printed in the pytest terminal
summary. Criteria 7 and 8 need the 30-industry monthly files, which are not
shipped; point these environment variables at CSVs in the documented format:

    QSPEC_FF30_PANEL   equal-weighted 30 industry returns (date, one column per industry)
    QSPEC_FF30_MARKET  market file (date, mkt, rf)
    QSPEC_FF3_FACTORS  optional factor file (date, smb, hml) for the FF3 benchmark
"""

import math
import os
import time
import warnings
from dataclasses import replace
from pathlib import Path

import numpy as np
import pytest

from qspec.data import ReturnSeries, load_factors, load_panel
from qspec.pricing import PricingModelSpec, build_beta_matrix, fit_cross_section, run_model
from qspec.sim import SimSpec, simulate, simulate_garch
from qspec.spectral import (
    IndicatorPair,
    ccr_periodogram,
    frechet_bounds,
    gaussian_beta,
    make_indicators,
    qs_beta_band,
    qs_betas,
    smooth_spectrum,
)
from qspec.volatility import GarchParams, fit_garch11

from conftest import record_criterion


def direct_dft(x):
    n = x.size
    t = np.arange(n)
    out = np.empty(n, dtype=complex)
    for s in range(n):
        out[s] = np.sum(x * np.exp(-2j * math.pi * s * t / n))
    return out


def test_criterion_1_fft_matches_direct_dft():
    rng = np.random.default_rng(101)
    start = time.perf_counter()
    worst = 0.0
    for _ in range(100):
        n = int(rng.integers(8, 513))
        ref = (rng.random(n) < rng.uniform(0.05, 0.5)).astype(float)
        ast = (rng.random(n) < rng.uniform(0.05, 0.5)).astype(float)
        pg = ccr_periodogram(IndicatorPair(ref, ast, 0.1, ast.mean(), 0.0, 0.0))
        da, dr = direct_dft(ast), direct_dft(ref)
        oracle_cross = da * np.conj(dr) / (2 * math.pi * n)
        oracle_auto = np.abs(dr) ** 2 / (2 * math.pi * n)
        scale = max(np.max(np.abs(oracle_cross)), 1e-300)
        worst = max(worst, np.max(np.abs(pg.cross - oracle_cross)) / scale,
                    np.max(np.abs(pg.reference_auto - oracle_auto)) / max(np.max(oracle_auto), 1e-300))
    elapsed = time.perf_counter() - start
    ok = worst < 1e-10 and elapsed < 10
    record_criterion(1, "FFT periodogram equals direct DFT", ok, f"max rel err {worst:.2e}, {elapsed:.2f}s")
    assert worst < 1e-10
    assert elapsed < 10


def test_criterion_2_gaussian_closed_form():
    zero = all(gaussian_beta(0.0, tau, ti) == 0.0 for tau in (0.01, 0.05, 0.3, 0.5) for ti in (0.02, 0.1, 0.5))
    rho = 0.5
    oracle = (0.25 + math.asin(rho) / (2 * math.pi) - 0.25) / 0.25
    got = gaussian_beta(rho, 0.5, 0.5)
    err = abs(got - oracle)
    record_criterion(2, "Gaussian closed form", zero and err < 1e-6, f"rho=0 exact: {zero}, origin err {err:.1e}")
    assert zero
    assert err < 1e-6


def test_criterion_3_gaussian_flatness():
    start = time.perf_counter()
    n, rho, tau = 16384, 0.5, 0.05
    x, y = simulate(SimSpec("gaussian_wn", n, rho, seed=2024))
    pair = make_indicators(x, y, tau)
    spec = smooth_spectrum(ccr_periodogram(pair))
    full = qs_beta_band(spec, (0.0, math.pi))
    closed = gaussian_beta(rho, tau, pair.tau_i)
    edges = np.linspace(0.0, math.pi, 11)
    subs = [qs_beta_band(spec, (lo, hi)) for lo, hi in zip(edges[:-1], edges[1:])]
    spread = max(subs) - min(subs)
    elapsed = time.perf_counter() - start
    ok = abs(full - closed) <= 0.05 and spread < 0.1 and elapsed < 60
    record_criterion(3, "Gaussian flatness and consistency", ok,
                     f"full {full:.4f} vs closed form {closed:.4f}, sub-band range {spread:.4f}, {elapsed:.1f}s")
    assert abs(full - closed) <= 0.05
    assert spread < 0.1
    assert elapsed < 60


def test_criterion_4_frechet_bounds():
    tau = 0.05
    worst = -math.inf
    for i, rho in enumerate(np.linspace(-0.9, 0.9, 50)):
        x, y = simulate(SimSpec("gaussian_wn", 2048, float(rho), seed=500 + i))
        pair = make_indicators(x, y, tau)
        beta = qs_beta_band(smooth_spectrum(ccr_periodogram(pair)), (0.0, math.pi))
        lo, hi = frechet_bounds(tau, pair.tau_i)
        worst = max(worst, lo - beta, beta - hi)
    ok = worst <= 0.05
    record_criterion(4, "Frechet bounds", ok, f"largest excursion beyond bounds {worst:.4f}")
    assert ok


def test_criterion_5_cross_section_exactness():
    rng = np.random.default_rng(55)
    worst_fit, worst_rmspe = 0.0, 0.0
    for _ in range(20):
        N, K = int(rng.integers(10, 40)), int(rng.integers(1, 6))
        X = rng.normal(0, 1, (N, K))
        bc = rng.uniform(0.5, 1.5, N)
        lam = rng.normal(0, 1, K)
        mkt = rng.uniform(0.2, 1.0)
        res = fit_cross_section(X, X @ lam + bc * mkt, mkt, bc)
        worst_fit = max(worst_fit, np.max(np.abs(res.lambdas - lam)))
        worst_rmspe = max(worst_rmspe, res.rmspe)
    worst_ols = 0.0
    for _ in range(100):
        N, K = int(rng.integers(8, 40)), int(rng.integers(1, 6))
        X = rng.normal(0, 1, (N, K))
        bc = rng.uniform(0.5, 1.5, N)
        y = rng.normal(0.6, 0.4, N)
        mkt = rng.uniform(0.2, 1.0)
        target = y - bc * mkt
        oracle = np.linalg.solve(X.T @ X, X.T @ target)
        worst_ols = max(worst_ols, np.max(np.abs(fit_cross_section(X, y, mkt, bc).lambdas - oracle)))
    ok = worst_fit < 1e-10 and worst_rmspe < 1e-10 and worst_ols < 1e-10
    record_criterion(5, "restricted cross-section exactness", ok,
                     f"fit err {worst_fit:.1e}, rmspe {worst_rmspe:.1e}, OLS vs normal equations {worst_ols:.1e}")
    assert ok


@pytest.mark.slow
def test_criterion_6_garch_recovery():
    start = time.perf_counter()
    true = GarchParams(0.1, 0.05, 0.90)
    r, _, _ = simulate_garch(true, 100_000, np.random.default_rng(6))
    est, _ = fit_garch11(ReturnSeries("m", np.arange(r.size) + 1, r))
    elapsed = time.perf_counter() - start
    errs = [abs(est.omega - true.omega), abs(est.alpha - true.alpha), abs(est.beta - true.beta)]
    ok = max(errs) <= 0.02 and elapsed < 120
    record_criterion(6, "GARCH recovery", ok,
                     f"omega={est.omega:.4f} alpha={est.alpha:.4f} beta={est.beta:.4f}, {elapsed:.1f}s")
    assert max(errs) <= 0.02
    assert elapsed < 120


# ---------------------------------------------------------------------------
# data-gated reproduction


def _industry_data():
    panel_path, market_path = os.environ.get("QSPEC_FF30_PANEL"), os.environ.get("QSPEC_FF30_MARKET")
    if not panel_path or not market_path or not (Path(panel_path).exists() and Path(market_path).exists()):
        return None
    panel = load_panel(panel_path, market_path, "monthly")
    _, var = fit_garch11(panel.market)
    return panel, var


@pytest.fixture(scope="module")
def industries():
    return _industry_data()


def test_criterion_7_table_reproduction(industries):
    if industries is None:
        record_criterion(7, "30-industry table reproduction", None,
                         "needs QSPEC_FF30_PANEL and QSPEC_FF30_MARKET")
        pytest.skip("30-industry data not supplied")
    panel, var = industries
    res = run_model(PricingModelSpec("FULL5", 0.05), panel, var)
    lam = dict(zip(res.names, res.lambdas))
    signs = lam["tr_rel_short"] > 0 and lam["evr_long"] > 0 and lam["evr_short"] < 0
    values = abs(lam["tr_rel_short"] - 1.27) <= 0.5 and abs(res.rmspe - 15.87) <= 0.25 * 15.87
    detail = (f"tr_short={lam['tr_rel_short']:.3f} ev_long={lam['evr_long']:.3f} "
              f"ev_short={lam['evr_short']:.3f} rmspe={res.rmspe:.2f}")
    factors_path = os.environ.get("QSPEC_FF3_FACTORS")
    if factors_path and Path(factors_path).exists():
        ff3 = run_model(PricingModelSpec("FF3"), panel,
                        factors=load_factors(factors_path, "monthly", ("smb", "hml")))
        values = values and abs(ff3.rmspe - 23.72) <= 0.15 * 23.72
        detail += f" ff3_rmspe={ff3.rmspe:.2f}"
    else:
        detail += " (FF3 value check skipped: no QSPEC_FF3_FACTORS)"
    record_criterion("7 (signs, hard gate)", "30-industry table reproduction", signs, detail)
    record_criterion("7 (values, soft gate)", "30-industry table reproduction", values, detail)
    if not values:
        warnings.warn(f"criterion 7 value tolerances not met: {detail}")
    assert signs


def test_criterion_8_ordering(industries):
    if industries is None:
        record_criterion(8, "30-industry RMSPE ordering", None, "needs QSPEC_FF30_PANEL and QSPEC_FF30_MARKET")
        pytest.skip("30-industry data not supplied")
    panel, var = industries
    capm = run_model(PricingModelSpec("CAPM"), panel).rmspe
    full = {t: run_model(PricingModelSpec("FULL5", t), panel, var).rmspe for t in (0.05, 0.15, 0.25)}
    ok = capm > full[0.05] and full[0.15] < full[0.25]
    record_criterion(8, "30-industry RMSPE ordering", ok,
                     f"CAPM {capm:.2f}, FULL5 {full[0.05]:.2f} / {full[0.15]:.2f} / {full[0.25]:.2f} at 0.05/0.15/0.25")
    assert ok


def test_criterion_9_monotone_invariance():
    x, y = simulate(SimSpec("tail_dependent", 4096, params=0.4, seed=9))
    ex, ey = (ReturnSeries(s.id, s.dates, np.exp(s.values)) for s in (x, y))
    same = True
    for tau in (0.01, 0.05, 0.1, 0.25, 0.5):
        a = qs_betas(x, y, tau, 18)
        b = qs_betas(ex, ey, tau, 18)
        same &= (a.long, a.short, a.simple, a.tau_i) == (b.long, b.short, b.simple, b.tau_i)
        # the Gaussian baseline uses Pearson correlation, which is not rank-based;
        # with the same rho the relative betas coincide as well
        c = qs_betas(ex, ey, tau, 18, rho=a.rho)
        same &= (a.rel_long, a.rel_short) == (c.rel_long, c.rel_short)
    record_criterion(9, "monotone invariance", same, "exp applied to both series, 5 quantile levels")
    assert same


def test_criterion_9_panel_level(synthetic_files):
    """exp applied to the whole panel leaves first-stage QS betas unchanged."""
    panel = load_panel(synthetic_files / "panel.csv", synthetic_files / "market.csv")
    _, var = fit_garch11(panel.market)
    base = build_beta_matrix(panel, var, 0.05, 18)
    expd = replace(panel, assets=tuple(ReturnSeries(a.id, a.dates, np.exp(a.values / 10)) for a in panel.assets),
                   market=ReturnSeries(panel.market.id, panel.market.dates, np.exp(panel.market.values / 10)))
    other = build_beta_matrix(expd, var, 0.05, 18)
    for col in ("tr_long", "tr_short", "tr_simple", "evr_long", "evr_short", "evr_simple"):
        np.testing.assert_array_equal(base.column(col), other.column(col))
