import csv
import math

import numpy as np
import pytest

from qspec.sim import simulate_garch
from qspec.volatility import GarchParams

ACCEPTANCE_LINES = []


def record_criterion(number, title, passed, detail=""):
    status = "PASS" if passed else "FAIL"
    if passed is None:
        status = "SKIP"
    ACCEPTANCE_LINES.append(f"[{status}] criterion {number}: {title}" + (f" ({detail})" if detail else ""))


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


def monthly_dates(start_year, n):
    out = []
    y, m = start_year, 1
    for _ in range(n):
        out.append(y * 100 + m)
        m += 1
        if m == 13:
            y, m = y + 1, 1
    return out


def write_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def make_synthetic_returns(n=480, n_assets=12, seed=3):
    """Market with GARCH volatility plus assets with varying market and crash exposure."""
    rng = np.random.default_rng(seed)
    mkt_ex, s2, _ = simulate_garch(GarchParams(0.8, 0.10, 0.85, 0.6), n, rng)
    crash = (mkt_ex < np.quantile(mkt_ex, 0.08)).astype(float)
    rf = np.full(n, 0.25)
    assets = []
    for j in range(n_assets):
        b = 0.6 + 0.08 * j
        c = 0.15 * (j % 4)
        noise = rng.standard_normal(n) * (2.0 + 0.1 * j)
        assets.append(0.2 + b * mkt_ex - c * 4.0 * crash + noise)
    return np.array(monthly_dates(1980, n)), mkt_ex, rf, np.array(assets)


@pytest.fixture(scope="session")
def synthetic_files(tmp_path_factory):
    d = tmp_path_factory.mktemp("synthetic")
    dates, mkt_ex, rf, assets = make_synthetic_returns()
    names = [f"A{j:02d}" for j in range(assets.shape[0])]
    write_csv(d / "panel.csv", ["date"] + names,
              [[int(t)] + [f"{v + r:.4f}" for v in assets[:, i]] for i, (t, r) in enumerate(zip(dates, rf))])
    write_csv(d / "market.csv", ["date", "mkt", "rf"],
              [[int(t), f"{m + r:.4f}", f"{r:.4f}"] for t, m, r in zip(dates, mkt_ex, rf)])
    # FF3-style factors
    rng = np.random.default_rng(11)
    smb = rng.standard_normal(dates.size) * 3
    hml = rng.standard_normal(dates.size) * 3
    write_csv(d / "factors.csv", ["date", "smb", "hml"],
              [[int(t), f"{a:.4f}", f"{b:.4f}"] for t, a, b in zip(dates, smb, hml)])
    # daily market, 21 trading days per month
    days = []
    for t in dates:
        y, m = divmod(int(t), 100)
        for dd in range(1, 22):
            days.append(y * 10000 + m * 100 + dd)
    daily = rng.standard_normal(len(days)) * 1.1 + 0.02
    write_csv(d / "daily.csv", ["date", "mkt", "rf"], [[t, f"{v:.5f}", "0.01"] for t, v in zip(days, daily)])
    return d


def finite(x):
    return x is not None and math.isfinite(x)
