"""Command-line front end: ``qspec betas | price | rmspe-curve | fit-garch | simulate``."""

from __future__ import annotations

import argparse
import csv
import logging
import math
import sys
from dataclasses import dataclass, field, fields
from pathlib import Path

import numpy as np

from . import plotting
from .data import (
    DataError,
    filter_min_history,
    load_daily_excess_market,
    load_factors,
    load_panel,
)
from .pricing import (
    MODELS,
    TAU_FREE,
    PricingModelSpec,
    QSBetaSet,
    build_beta_matrix,
    rmspe_curve,
    run_model,
    write_result_csv,
)
from .sim import SIM_KINDS, SimSpec, simulate, write_pair_csv
from .spectral import BandBetas
from .volatility import GarchParams, fit_garch11, realized_variance

log = logging.getLogger("qspec")

BETA_COLUMNS = [
    "asset", "beta_long", "beta_short", "beta_gauss_long", "beta_gauss_short",
    "beta_rel_long", "beta_rel_short", "beta_simple", "beta_capm", "tau_i",
    "beta_downside", "rho",
]
DEFAULT_CUTOFF = {"monthly": 18.0, "daily": 378.0}


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    panel: str | None = None
    market: str | None = None
    daily: str | None = None
    factors: str | None = None
    freq: str = "monthly"
    tau: list = field(default_factory=list)
    tau_grid: str | None = None
    cutoff: float | None = None
    vol: str = "garch"
    model: list = field(default_factory=list)
    bandwidth: float | None = None
    out: str = "qspec_out"
    seed: int = 0
    workers: int | None = None
    min_history: int | None = None
    standardize: bool = False
    weighting: str = "mean"
    benchmark: float | None = None
    betas_dir: str | None = None
    plots: bool = True

    @property
    def period_cutoff(self) -> float:
        return self.cutoff if self.cutoff is not None else DEFAULT_CUTOFF[self.freq]

    def taus(self) -> list[float]:
        if self.tau_grid:
            return parse_grid(self.tau_grid)
        return [float(t) for t in self.tau]

    def validate(self, need_taus=True, need_panel=True):
        if self.freq not in DEFAULT_CUTOFF:
            raise ConfigError(f"freq must be monthly or daily, got {self.freq!r}")
        if self.vol not in ("garch", "realized"):
            raise ConfigError(f"vol must be garch or realized, got {self.vol!r}")
        if need_panel:
            for key in ("panel", "market"):
                if getattr(self, key) is None:
                    raise ConfigError(f"--{key} is required")
        for key in ("panel", "market", "daily", "factors", "betas_dir"):
            path = getattr(self, key)
            if path is not None and not Path(path).exists():
                raise ConfigError(f"{key}: {path} does not exist")
        if self.vol == "realized" and self.daily is None:
            raise ConfigError("--vol realized needs --daily")
        if self.period_cutoff <= 2:
            raise ConfigError("cutoff must exceed 2 periods")
        if need_taus:
            taus = self.taus()
            if not taus:
                raise ConfigError("no quantile levels given (use --tau or --tau-grid)")
            bad = [t for t in taus if not 0 < t <= 0.5]
            if bad:
                raise ConfigError(f"tau values must lie in (0, 0.5], got {bad}")
        for m in self.model:
            if m not in MODELS:
                raise ConfigError(f"unknown model {m!r}; choose from {', '.join(MODELS)}")
        if self.bandwidth is not None and not 0 < self.bandwidth < 0.5:
            raise ConfigError("bandwidth must lie in (0, 0.5)")
        return self


def parse_grid(text: str) -> list[float]:
    """``lo:hi:step`` inclusive of ``hi``, rounded to the step's decimals."""
    try:
        lo, hi, step = (float(x) for x in text.split(":"))
    except ValueError:
        raise ConfigError(f"tau grid must be lo:hi:step, got {text!r}") from None
    if step <= 0 or hi < lo:
        raise ConfigError(f"bad tau grid {text!r}")
    decimals = max(0, -int(math.floor(math.log10(step)))) + 2
    count = int(math.floor((hi - lo) / step + 1e-9)) + 1
    return [round(lo + i * step, decimals) for i in range(count)]


_LIST_KEYS = {"tau", "model"}
_BOOL_KEYS = {"standardize", "plots"}


def _coerce(key: str, value: str):
    types = {f.name: f.type for f in fields(RunConfig)}
    if key not in types:
        raise KeyError(key)
    if key in _LIST_KEYS:
        items = [v.strip() for v in value.split(",") if v.strip()]
        return [float(v) for v in items] if key == "tau" else [v.upper() for v in items]
    if key in _BOOL_KEYS:
        return value.strip().lower() in ("1", "true", "yes", "on")
    if key in ("cutoff", "bandwidth", "benchmark"):
        return float(value)
    if key in ("seed", "workers", "min_history"):
        return int(value)
    return value.strip()


def read_config_file(path) -> dict:
    """Flat ``key = value`` file; ``#`` starts a comment; keys use underscores."""
    out = {}
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected key = value")
        key, value = (s.strip() for s in line.split("=", 1))
        key = key.replace("-", "_")
        try:
            out[key] = _coerce(key, value)
        except KeyError:
            raise ConfigError(f"{path}:{lineno}: unknown key {key!r}") from None
        except ValueError as exc:
            raise ConfigError(f"{path}:{lineno}: bad value for {key}: {exc}") from None
    return out


def build_config(args: argparse.Namespace) -> RunConfig:
    values = read_config_file(args.config) if getattr(args, "config", None) else {}
    for f in fields(RunConfig):
        flag = getattr(args, f.name, None)
        if flag is None or (isinstance(flag, list) and not flag):
            continue
        values[f.name] = [v.upper() for v in flag] if f.name == "model" else flag
    if getattr(args, "no_plots", False):
        values["plots"] = False
    return RunConfig(**values)


# ---------------------------------------------------------------------------
# pipeline pieces


def _tau_tag(tau: float) -> str:
    return f"{tau:g}"


def load_inputs(cfg: RunConfig):
    panel = load_panel(cfg.panel, cfg.market, cfg.freq)
    if cfg.min_history:
        panel = filter_min_history(panel, cfg.min_history)
    if not panel.assets:
        raise DataError("no assets left after filtering")
    return panel


def variance_path(cfg: RunConfig, panel):
    if cfg.vol == "garch":
        return fit_garch11(panel.market)
    daily = load_daily_excess_market(cfg.daily)
    return None, realized_variance(daily, panel.dates)


def _fmt(x) -> str:
    return repr(float(x))


def write_betas(betas: QSBetaSet, outdir: Path) -> list[Path]:
    paths = []
    for kind, rows in (("TR", betas.tr), ("EVR", betas.evr)):
        path = outdir / f"betas_{kind}_tau{_tau_tag(betas.tau)}.csv"
        with path.open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(BETA_COLUMNS)
            for i, asset in enumerate(betas.assets):
                b = rows[i]
                if b is None:
                    w.writerow([asset] + ["nan"] * 7 + [_fmt(betas.capm[i]), "nan", _fmt(betas.downside[i]), "nan"])
                    continue
                w.writerow([
                    asset, _fmt(b.long), _fmt(b.short), _fmt(b.gauss), _fmt(b.gauss),
                    _fmt(b.rel_long), _fmt(b.rel_short), _fmt(b.simple), _fmt(betas.capm[i]),
                    _fmt(b.tau_i), _fmt(betas.downside[i]), _fmt(b.rho),
                ])
        paths.append(path)
    return paths


def read_betas(directory, tau: float) -> QSBetaSet:
    """Rebuild a ``QSBetaSet`` from the two CSV files written by ``write_betas``."""
    kinds = {}
    for kind in ("TR", "EVR"):
        path = Path(directory) / f"betas_{kind}_tau{_tau_tag(tau)}.csv"
        with path.open(newline="") as fh:
            rows = list(csv.DictReader(fh))
        kinds[kind] = rows
    assets = tuple(r["asset"] for r in kinds["TR"])
    capm = np.array([float(r["beta_capm"]) for r in kinds["TR"]])
    down = np.array([float(r["beta_downside"]) for r in kinds["TR"]])

    def band(r):
        if math.isnan(float(r["beta_long"])):
            return None
        return BandBetas(float(r["beta_long"]), float(r["beta_short"]), float(r["beta_gauss_long"]),
                         float(r["beta_simple"]), float(r["tau_i"]), float(r["rho"]))

    return QSBetaSet(float(tau), assets, capm, down,
                     [band(r) for r in kinds["TR"]], [band(r) for r in kinds["EVR"]])


def _betas_for(cfg, panel, variance, tau, cache):
    if tau in cache:
        return cache[tau]
    if cfg.betas_dir:
        b = read_betas(cfg.betas_dir, tau)
        if b.assets != tuple(panel.asset_ids):
            raise ConfigError(f"cached betas in {cfg.betas_dir} do not match the panel's assets")
    else:
        b = build_beta_matrix(panel, variance, tau, cfg.period_cutoff, cfg.bandwidth,
                              standardize=cfg.standardize, weighting=cfg.weighting, workers=cfg.workers)
    cache[tau] = b
    return b


def cmd_betas(cfg: RunConfig) -> list[Path]:
    cfg.validate()
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    panel = load_inputs(cfg)
    _, variance = variance_path(cfg, panel)
    written = []
    for tau in cfg.taus():
        betas = build_beta_matrix(panel, variance, tau, cfg.period_cutoff, cfg.bandwidth,
                                  standardize=cfg.standardize, weighting=cfg.weighting, workers=cfg.workers)
        written += write_betas(betas, out)
    return written


def cmd_price(cfg: RunConfig) -> list:
    models = cfg.model or ["CAPM", "SIMPLE3", "FULL5"]
    needs_tau = any(m not in TAU_FREE for m in models)
    cfg.validate(need_taus=needs_tau)
    if "FF3" in models and cfg.factors is None:
        raise ConfigError("model FF3 needs --factors")
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    panel = load_inputs(cfg)
    variance = variance_path(cfg, panel)[1] if needs_tau else None
    factors = load_factors(cfg.factors, cfg.freq, ("smb", "hml")) if cfg.factors else None

    cache, results = {}, []
    for name in models:
        taus = [None] if name in TAU_FREE else cfg.taus()
        for tau in taus:
            betas = _betas_for(cfg, panel, variance, tau, cache) if tau is not None else None
            res = run_model(PricingModelSpec(name, tau), panel, variance, cfg.period_cutoff,
                            cfg.bandwidth, betas=betas, factors=factors, workers=cfg.workers)
            stem = name if tau is None else f"{name}_tau{_tau_tag(tau)}"
            write_result_csv(res, out / f"lambdas_{stem}.csv", out / f"predicted_{stem}.csv")
            if cfg.plots:
                plotting.scatter_predicted(res, out / f"predicted_{stem}.svg")
            results.append(res)

    with (out / "summary.csv").open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["model", "tau", "term", "value", "tstat"])
        for res in results:
            for term, value, t in res.table():
                w.writerow([res.model, "" if res.tau is None else _tau_tag(res.tau), term,
                            repr(value), "" if math.isnan(t) else repr(t)])
    return results


def cmd_rmspe_curve(cfg: RunConfig) -> dict:
    if not cfg.tau and not cfg.tau_grid:
        cfg.tau_grid = "0.01:0.50:0.01"
    cfg.validate()
    models = cfg.model or ["SIMPLE3", "FULL5"]
    tau_free = [m for m in models if m in TAU_FREE]
    if tau_free:
        raise ConfigError(f"models without a quantile level have no RMSPE curve: {tau_free}")
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    panel = load_inputs(cfg)
    _, variance = variance_path(cfg, panel)

    cache = {}
    for tau in cfg.taus():
        try:
            _betas_for(cfg, panel, variance, tau, cache)
        except Exception as exc:
            log.warning("first stage failed at tau=%s: %s", tau, exc)
    curves = {
        name: rmspe_curve(name, panel, variance, cfg.taus(), cfg.period_cutoff, cfg.bandwidth,
                          beta_cache=cache, weighting=cfg.weighting)
        for name in models
    }
    with (out / "rmspe_curve.csv").open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["model", "tau", "rmspe"])
        for name, pts in curves.items():
            for tau, val in pts:
                w.writerow([name, _tau_tag(tau), "" if math.isnan(val) else repr(val)])
    if cfg.plots:
        plotting.rmspe_curves(curves, out / "rmspe_curve.svg", benchmark=cfg.benchmark)
    return curves


def cmd_fit_garch(cfg: RunConfig):
    cfg.validate(need_taus=False)
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    panel = load_inputs(cfg)
    if cfg.vol == "realized":
        daily = load_daily_excess_market(cfg.daily)
        path = realized_variance(daily, panel.dates)
        params = None
    else:
        params, path = fit_garch11(panel.market)
        with (out / "garch_params.csv").open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["param", "value"])
            for k in ("omega", "alpha", "beta", "mu"):
                w.writerow([k, repr(getattr(params, k))])
    path.to_csv(out / "variance_path.csv")
    return params, path


def cmd_simulate(cfg: RunConfig, kind: str, n: int, rho: float, tail_dependence: float | None,
                 garch: tuple | None):
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    params = None
    if kind == "garch_path":
        params = GarchParams(*garch) if garch else GarchParams(0.1, 0.05, 0.90)
    elif kind == "tail_dependent":
        params = 0.5 if tail_dependence is None else tail_dependence
    pair = simulate(SimSpec(kind, n, rho, params, cfg.seed))
    path = out / "sim_pair.csv"
    write_pair_csv(pair, path)
    return path


# ---------------------------------------------------------------------------
# argument parsing


def _add_common(p: argparse.ArgumentParser):
    p.add_argument("--config", help="flat key = value config file; flags override it")
    p.add_argument("--panel", help="asset returns CSV (date first, one column per asset)")
    p.add_argument("--market", help="market CSV with columns date, mkt, rf")
    p.add_argument("--daily", help="daily market CSV (date, mkt, rf) for realized variance")
    p.add_argument("--factors", help="factor CSV with columns date, smb, hml (for FF3)")
    p.add_argument("--freq", choices=["monthly", "daily"])
    p.add_argument("--tau", type=float, action="append", default=[])
    p.add_argument("--tau-grid", dest="tau_grid", help="lo:hi:step")
    p.add_argument("--cutoff", type=float, help="band split in periods per cycle (default 18 monthly / 378 daily)")
    p.add_argument("--vol", choices=["garch", "realized"])
    p.add_argument("--model", action="append", default=[], type=str.upper)
    p.add_argument("--bandwidth", type=float)
    p.add_argument("--out")
    p.add_argument("--seed", type=int)
    p.add_argument("--workers", type=int, help="worker threads (env QSPEC_WORKERS as fallback)")
    p.add_argument("--min-history", dest="min_history", type=int)
    p.add_argument("--standardize", action="store_true", default=None,
                   help="TR betas from GARCH-standardized returns")
    p.add_argument("--weighting", choices=["mean", "spectral"])
    p.add_argument("--benchmark", type=float, help="reference RMSPE drawn on the curve plot")
    p.add_argument("--betas-dir", dest="betas_dir", help="reuse beta CSVs written by 'betas'")
    p.add_argument("--no-plots", dest="no_plots", action="store_true")
    p.add_argument("-v", "--verbose", action="store_true")


def make_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="qspec", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_ in (
        ("betas", "estimate first-stage betas"),
        ("price", "run second-stage pricing models"),
        ("rmspe-curve", "RMSPE over a grid of quantile levels"),
        ("fit-garch", "fit GARCH(1,1) to the market and dump the variance path"),
        ("simulate", "write a simulated pair"),
    ):
        p = sub.add_parser(name, help=help_)
        _add_common(p)
        if name == "simulate":
            p.add_argument("--kind", choices=SIM_KINDS, default="gaussian_wn")
            p.add_argument("--n", type=int, default=1024)
            p.add_argument("--rho", type=float, default=0.0)
            p.add_argument("--tail-dependence", dest="tail_dependence", type=float)
            p.add_argument("--garch", type=float, nargs=3, metavar=("OMEGA", "ALPHA", "BETA"))
    return parser


def main(argv=None) -> int:
    args = make_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = build_config(args)
        if args.command == "betas":
            for p in cmd_betas(cfg):
                print(p)
        elif args.command == "price":
            for res in cmd_price(cfg):
                tag = "" if res.tau is None else f" tau={_tau_tag(res.tau)}"
                print(f"{res.model}{tag}: RMSPE {res.rmspe:.2f}")
        elif args.command == "rmspe-curve":
            cmd_rmspe_curve(cfg)
            print(Path(cfg.out) / "rmspe_curve.csv")
        elif args.command == "fit-garch":
            params, _ = cmd_fit_garch(cfg)
            if params is not None:
                print(f"omega={params.omega:.6g} alpha={params.alpha:.6g} beta={params.beta:.6g} mu={params.mu:.6g}")
        else:
            print(cmd_simulate(cfg, args.kind, args.n, args.rho, args.tail_dependence, args.garch))
    except (ConfigError, DataError, FileNotFoundError) as exc:
        log.error("%s", exc)
        return 2
    except Exception as exc:
        log.error("run failed: %s", exc)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
