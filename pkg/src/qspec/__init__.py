"""Quantile-spectral tail risk betas and restricted Fama-MacBeth pricing."""

from .data import ReturnPanel, ReturnSeries, load_panel
from .pricing import PricingModelSpec, PricingResult, build_beta_matrix, fit_cross_section, run_model
from .spectral import gaussian_beta, qs_beta_band, qs_betas
from .volatility import GarchParams, VariancePath, fit_garch11

__all__ = [
    "GarchParams",
    "PricingModelSpec",
    "PricingResult",
    "ReturnPanel",
    "ReturnSeries",
    "VariancePath",
    "build_beta_matrix",
    "fit_cross_section",
    "fit_garch11",
    "gaussian_beta",
    "load_panel",
    "qs_beta_band",
    "qs_betas",
    "run_model",
]
__version__ = "0.1.0"
