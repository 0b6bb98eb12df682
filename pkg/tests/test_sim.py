import math

import numpy as np
import pytest
from scipy import stats

from qspec.sim import SimSpec, brute_quantile_cov, bvn_rectangle, clayton_theta, simulate
from qspec.spectral import IndicatorPair, ccr_periodogram, indicator_cov, make_indicators
from qspec.volatility import GarchParams


def test_gaussian_wn_uncorrelated():
    x, y = simulate(SimSpec("gaussian_wn", 16384, 0.0, seed=1))
    assert abs(np.corrcoef(x.values, y.values)[0, 1]) < 0.05


@pytest.mark.parametrize("kind,params", [("gaussian_wn", None), ("garch_path", GarchParams(0.1, 0.05, 0.9)),
                                         ("tail_dependent", 0.3)])
def test_determinism(kind, params):
    spec = SimSpec(kind, 500, 0.4, params, seed=42)
    a, b = simulate(spec), simulate(spec)
    assert a[0].equals(b[0]) and a[1].equals(b[1])
    c = simulate(SimSpec(kind, 500, 0.4, params, seed=43))
    assert not np.array_equal(a[0].values, c[0].values)


def test_clayton_lower_tail():
    x, y = simulate(SimSpec("tail_dependent", 20000, params=0.5, seed=3))
    tau = 0.05
    qx, qy = np.quantile(x.values, tau), np.quantile(y.values, tau)
    joint = np.mean((x.values <= qx) & (y.values <= qy))
    assert joint > tau * tau
    assert clayton_theta(0.5) == pytest.approx(1.0)


def test_spec_validation():
    with pytest.raises(ValueError):
        SimSpec("gaussian_wn", 4)
    with pytest.raises(ValueError):
        SimSpec("gaussian_wn", 100, rho=1.5)
    with pytest.raises(ValueError):
        SimSpec("bogus", 100)


def test_brute_cov_lag0_self_pair():
    rng = np.random.default_rng(2)
    x = rng.standard_normal(400)
    p = make_indicators(x, x, 0.05)  # n*tau = 20
    g = brute_quantile_cov(p, 3)
    assert g[0] == pytest.approx(0.05 * 0.95, abs=1e-15)


def test_brute_cov_lag0_equals_simple_cov():
    rng = np.random.default_rng(3)
    x, y = rng.standard_normal((2, 300))
    p = make_indicators(x, y, 0.1)
    assert brute_quantile_cov(p, 0)[0] == indicator_cov(p.reference_hits, p.asset_hits)


def test_brute_cov_matches_periodogram_inverse():
    n = 256
    rng = np.random.default_rng(4)
    x = rng.standard_normal(n)
    y = 0.5 * np.roll(x, 2) + rng.standard_normal(n)
    p = make_indicators(x, y, 0.2)
    brute = brute_quantile_cov(p, 10)
    # zero-pad the demeaned hits so the circular transform gives linear lags
    L = 2 * n
    a = np.zeros(L)
    b = np.zeros(L)
    a[:n] = p.reference_hits - p.reference_hits.mean()
    b[:n] = p.asset_hits - p.asset_hits.mean()
    pg = ccr_periodogram(IndicatorPair(a, b, p.tau, p.tau_i, 0.0, 0.0))
    back = np.fft.ifft(pg.cross) * 2 * math.pi * L / n
    for k, val in brute.items():
        assert back[(-k) % L].real == pytest.approx(val, abs=1e-10)
        assert abs(back[(-k) % L].imag) < 1e-10


def test_brute_cov_independent_bound():
    n = 4000
    rng = np.random.default_rng(5)
    x, y = rng.standard_normal((2, n))
    g = brute_quantile_cov(make_indicators(x, y, 0.1), 5)
    assert all(abs(v) < 3 / math.sqrt(n) for v in g.values())


def test_brute_cov_lag_limit():
    p = make_indicators(np.arange(20.0), np.arange(20.0), 0.5)
    with pytest.raises(ValueError):
        brute_quantile_cov(p, 5)


def test_bvn_independence():
    for h, k in [(-1.0, 0.5), (0.3, 2.0), (-2.5, -0.1)]:
        assert bvn_rectangle(h, k, 0.0) == pytest.approx(stats.norm.cdf(h) * stats.norm.cdf(k), abs=1e-15)


def test_bvn_comonotone_origin():
    assert bvn_rectangle(0.0, 0.0, 1.0) == pytest.approx(0.5, abs=1e-12)


def test_bvn_origin_closed_form():
    assert bvn_rectangle(0.0, 0.0, 0.5) == pytest.approx(0.25 + math.asin(0.5) / (2 * math.pi), abs=1e-12)
    assert bvn_rectangle(0.0, 0.0, 0.5) == pytest.approx(1 / 3, abs=1e-12)


def test_bvn_against_scipy_genz():
    rng = np.random.default_rng(6)
    for _ in range(25):
        h, k = rng.uniform(-3, 2, 2)
        rho = rng.uniform(-0.99, 0.99)
        ref = stats.multivariate_normal([0, 0], [[1, rho], [rho, 1]]).cdf([h, k])
        assert bvn_rectangle(h, k, rho) == pytest.approx(ref, abs=1e-7)


def test_bvn_symmetry_and_monotonicity():
    grid = np.linspace(-0.99, 0.99, 23)
    for h, k in [(-1.64, -1.2), (0.3, -0.7), (1.0, 1.5)]:
        vals = [bvn_rectangle(h, k, r) for r in grid]
        assert all(b >= a - 1e-14 for a, b in zip(vals, vals[1:]))
        for r in grid[::5]:
            assert bvn_rectangle(h, k, r) == pytest.approx(bvn_rectangle(k, h, r), abs=1e-14)


def test_bvn_perfect_negative():
    # P(X <= h, -X <= k) = max(0, Phi(h) - Phi(-k))
    h, k = 0.5, 0.2
    expected = max(0.0, stats.norm.cdf(h) - stats.norm.cdf(-k))
    assert bvn_rectangle(h, k, -1.0) == pytest.approx(expected, abs=1e-8)
