"""Log-likelihoods over the newcomer triangle and AIC model comparison.

Both models share the binomial drop likelihood, which therefore cancels in
any comparison; only the newcomer cells are scored. Parameter counts follow
the same convention: n arrival rates for the Poisson model, n shapes plus
the dispersion parameter p1 for the negative binomial (the shared drop
probabilities are excluded from both counts).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from scipy.special import gammaln

from .errors import DegenerateFit
from .estimators import NegBinFit, P1ProfileLikelihood, PoissonFit, fit_negbin, fit_poisson
from .triangle import TrianglePair

AIC_TIE_TOLERANCE = 1e-9


@dataclass(frozen=True)
class ModelComparison:
    """Side-by-side likelihood and AIC of the two frequency models.

    ``loglik_negbin`` and ``aic_negbin`` are None when the dispersion fit is
    degenerate (the model collapses to Poisson and offers no alternative).
    """

    loglik_poisson: float
    loglik_negbin: float | None
    aic_poisson: float
    aic_negbin: float | None
    k_poisson: int
    k_negbin: int
    selected: str
    negbin_degenerate: bool

    def to_dict(self) -> dict:
        return {
            "loglik_poisson": self.loglik_poisson,
            "loglik_negbin": self.loglik_negbin,
            "aic_poisson": self.aic_poisson,
            "aic_negbin": self.aic_negbin,
            "k_poisson": self.k_poisson,
            "k_negbin": self.k_negbin,
            "selected": self.selected,
            "negbin_degenerate": self.negbin_degenerate,
        }

    def to_table(self) -> str:
        lines = [f"{'model':<10}{'log-lik':>12}{'AIC':>12}"]
        lines.append(f"{'poisson':<10}{self.loglik_poisson:>12.3f}{self.aic_poisson:>12.3f}")
        if self.loglik_negbin is None or self.aic_negbin is None:
            lines.append(f"{'negbin':<10}{'degenerate':>12}{'n/a':>12}")
        else:
            lines.append(f"{'negbin':<10}{self.loglik_negbin:>12.3f}{self.aic_negbin:>12.3f}")
        lines.append(f"selected: {self.selected}")
        return "\n".join(lines)


def loglik_poisson(pair: TrianglePair, fit: PoissonFit) -> float:
    """Poisson log-likelihood of the newcomer cells at the fitted rates.

    Uses the 0 * log 0 = 0 convention for empty columns; a positive count
    against a zero rate yields -inf (possible only for user-supplied fits).
    """
    total = 0.0
    n = pair.n
    for j in range(1, n + 1):
        rate = fit.lambda_hat[j - 1]
        for i in range(1, n - j + 2):
            mu = rate * pair.E.of(i)
            k = pair.N.value(i, j)
            if mu == 0.0:
                if k > 0:
                    return -math.inf
                continue
            total += k * math.log(mu) - mu - float(gammaln(k + 1.0))
    return total


def loglik_negbin(pair: TrianglePair, fit: NegBinFit) -> float:
    """Negative-binomial log-likelihood of the newcomer cells at the fit.

    Raises:
        DegenerateFit: the fit collapsed to the Poisson limit.
    """
    if fit.degenerate:
        raise DegenerateFit("negative-binomial fit is degenerate")
    profile = P1ProfileLikelihood(pair.E.values, fit.delta_hat, pair.n)
    counts = profile.counts_from_pair(pair)
    return float(profile.loglik(counts, fit.p1))


def compare(pair: TrianglePair) -> ModelComparison:
    """Fit both models and pick the one with the smaller AIC.

    Ties within ``AIC_TIE_TOLERANCE`` resolve to the Poisson model
    (parsimony at the Poisson limit); a degenerate dispersion fit reports
    the negative binomial as unavailable.
    """
    n = pair.n
    pois = fit_poisson(pair)
    llp = loglik_poisson(pair, pois)
    aic_p = 2.0 * n - 2.0 * llp
    nb = fit_negbin(pair)
    if nb.degenerate:
        return ModelComparison(
            loglik_poisson=llp,
            loglik_negbin=None,
            aic_poisson=aic_p,
            aic_negbin=None,
            k_poisson=n,
            k_negbin=n + 1,
            selected="poisson",
            negbin_degenerate=True,
        )
    lln = nb.loglik
    aic_n = 2.0 * (n + 1) - 2.0 * lln
    if aic_n < aic_p - AIC_TIE_TOLERANCE:
        selected = "negbin"
    else:
        selected = "poisson"
    return ModelComparison(
        loglik_poisson=llp,
        loglik_negbin=lln,
        aic_poisson=aic_p,
        aic_negbin=aic_n,
        k_poisson=n,
        k_negbin=n + 1,
        selected=selected,
        negbin_degenerate=False,
    )
