"""Bundled example portfolios and their expected headline figures.

Two simulated six-year portfolios ship with the package as the golden
corpus: the CLI demo, the documentation and the acceptance tests all run
against the same CSV files. Portfolio ``a`` is a case where the dispersion
fit degenerates to the Poisson limit; portfolio ``b`` carries genuine
overdispersion and exercises the full negative-binomial pipeline.
"""

from __future__ import annotations

from importlib import resources

from .triangle import (
    ExposureVector,
    TrianglePair,
    parse_exposure_csv,
    parse_triangle_csv,
    split_next_year_exposure,
)

PORTFOLIOS = ("a", "b")


def _read_text(name: str) -> str:
    return resources.files("xolfreq.data").joinpath(name).read_text(encoding="utf-8")


def load_portfolio(label: str) -> TrianglePair:
    """Load one of the bundled portfolios ('a' or 'b'), next-year exposure included."""
    if label not in PORTFOLIOS:
        raise KeyError(f"unknown portfolio {label!r}; available: {PORTFOLIOS}")
    n_tri = parse_triangle_csv(_read_text(f"portfolio_{label}_n.csv"))
    d_tri = parse_triangle_csv(_read_text(f"portfolio_{label}_d.csv"))
    exposures = split_next_year_exposure(
        parse_exposure_csv(_read_text(f"portfolio_{label}_exposure.csv")), n_tri.n
    )
    return TrianglePair.build(n_tri, d_tri, exposures)


def load_example(number: int) -> TrianglePair:
    """Load bundled portfolio by number: 1 -> 'a', 2 -> 'b'."""
    return load_portfolio({1: "a", 2: "b"}[number])


# Expected values at display precision (3 decimals), used by the CLI demo to
# print a computed-versus-expected table for each bundled portfolio.
EXPECTED = {
    "a": {
        "lambda_hat": (0.327, 0.28, 0.2, 0.117, 0.156, 0.0),
        "delta_hat": (0.5, 0.346, 0.217, 0.0, 0.154),
        "next_year_poisson_mean": 27.752,
        "negbin_degenerate": True,
    },
    "b": {
        "lambda_hat": (0.396, 0.191, 0.252, 0.13, 0.2, 0.0),
        "delta_hat": (0.591, 0.231, 0.3, 0.091, 0.071),
        "next_year_poisson_mean": 30.243,
        "negbin_degenerate": False,
        "p1": 0.397,
        "p": (0.397, 0.616, 0.676, 0.749, 0.767, 0.78),
        "next_year_negbin_mean": 30.243,
        "next_year_negbin_variance": 38.796,
        "loglik_poisson": -53.937,
        "loglik_negbin": -50.793,
        "aic_poisson": 119.875,
        "aic_negbin": 115.586,
        "joint_delta": (0.601, 0.232, 0.305, 0.092, 0.071),
        "joint_p": (0.393, 0.619, 0.679, 0.753, 0.77, 0.783),
    },
}
