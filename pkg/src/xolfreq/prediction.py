"""Exact predictive laws for next-year and open-origin claim counts.

Two kinds of targets are covered:

* Pricing: the count of the upcoming origin year at full development,
  which is Poisson (or negative binomial) with the cumulative intensity
  scaled by next year's exposure.
* Reserving: the future development of an origin year already observed on
  the diagonal. Conditionally on the data this is the sum of two
  independent parts: a binomial count of current excess claims that remain
  above the priority, plus a law for newcomers arriving after the diagonal.
"""

from __future__ import annotations

from dataclasses import dataclass

from .distributions import Binomial, Convolution, CountDistribution, NegBin, Poisson
from .errors import DegenerateFit, IndexOutsideLowerTriangle, InvalidExposure
from .estimators import NegBinFit, PoissonFit, conditional_factors, lambda_prime
from .triangle import TrianglePair


@dataclass(frozen=True)
class PredictiveLaw:
    """A count distribution attached to a target cell of the development grid."""

    target: tuple[int, int]
    model: str
    law: CountDistribution

    @property
    def mean(self) -> float:
        return self.law.mean

    @property
    def variance(self) -> float:
        return self.law.variance

    def to_dict(self) -> dict:
        return {
            "target": {"origin": self.target[0], "dev": self.target[1]},
            "model": self.model,
            "law": self.law.to_dict(),
            "mean": self.mean,
            "variance": self.variance,
        }


def _require_positive_exposure(e_next: float) -> float:
    e_next = float(e_next)
    if e_next <= 0.0:
        raise InvalidExposure(f"next-year exposure must be > 0, got {e_next}")
    return e_next


def predict_next_year_poisson(fit: PoissonFit, e_next: float) -> PredictiveLaw:
    """Poisson law of next year's fully developed count at exposure ``e_next``."""
    e_next = _require_positive_exposure(e_next)
    n = fit.n
    return PredictiveLaw(
        target=(n + 1, n),
        model="poisson",
        law=Poisson(lambda_prime(fit, n) * e_next),
    )


def predict_next_year_negbin(fit: NegBinFit, e_next: float) -> PredictiveLaw:
    """Negative-binomial law of next year's count; shape is the summed r's.

    The moment-matched shapes make the mean coincide exactly with the
    Poisson prediction built from the same arrival rates; only the variance
    widens, by the factor ``1 / p_n``.

    Raises:
        DegenerateFit: the fit collapsed to the Poisson limit.
    """
    if fit.degenerate:
        raise DegenerateFit("negative-binomial fit is degenerate; use the Poisson prediction")
    e_next = _require_positive_exposure(e_next)
    n = fit.n
    return PredictiveLaw(
        target=(n + 1, n),
        model="negbin",
        law=NegBin(sum(fit.r_hat) * e_next, fit.p[n - 1]),
    )


def conditional_law(
    fit: PoissonFit | NegBinFit,
    pair: TrianglePair,
    i: int,
    j: int,
) -> PredictiveLaw:
    """Law of cell ``(i, j)`` given everything observed up to the diagonal.

    The count splits into survivors of the ``C[i, n-i+1]`` claims currently
    above the priority (binomial with the surviving probability) plus an
    independent newcomer law: Poisson under the Poisson fit, negative
    binomial with shape ``sum_{k=n-i+2..j} r_k`` under the dispersion fit.
    On the diagonal itself (``j = n - i + 1``) both parts are empty and the
    law is the point mass at the observed count.

    Raises:
        IndexOutsideLowerTriangle: ``(i, j)`` is above the diagonal or out of range.
        DegenerateFit: a degenerate negative-binomial fit was supplied.
    """
    if isinstance(fit, NegBinFit):
        if fit.degenerate:
            raise DegenerateFit("negative-binomial fit is degenerate; use the Poisson model")
        n = fit.n
        if not (1 <= i <= n) or not (n - i + 1 <= j <= n):
            raise IndexOutsideLowerTriangle(
                f"cell ({i},{j}) is not on or below the observed diagonal for n={n}"
            )
        delta_prime = 1.0
        for k in range(n - i + 1, j):
            delta_prime *= 1.0 - fit.delta_hat[k - 1]
        shape = sum(fit.r_hat[k - 1] for k in range(n - i + 2, j + 1))
        tail: Poisson | NegBin = NegBin(shape * pair.E.of(i), fit.p[j - 1])
        model = "negbin"
    else:
        delta_prime, lam_prime = conditional_factors(fit, i, j)
        tail = Poisson(lam_prime * pair.E.of(i))
        model = "poisson"
    survivors = Binomial(pair.C.latest(i), delta_prime)
    return PredictiveLaw(target=(i, j), model=model, law=Convolution(survivors, tail))


def point_estimate_ultimate(fit: PoissonFit, pair: TrianglePair, i: int) -> float:
    """Expected ultimate count of origin ``i`` given its diagonal observation.

    Equals the mean of :func:`conditional_law` at ``(i, n)`` exactly:
    surviving stock plus expected newcomers.
    """
    delta_prime, lam_prime = conditional_factors(fit, i, fit.n)
    return lam_prime * pair.E.of(i) + delta_prime * pair.C.latest(i)
