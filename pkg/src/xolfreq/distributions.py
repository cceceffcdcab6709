"""Discrete count distributions used by the claim-number model.

Provides Poisson, binomial and real-shape negative binomial laws plus the
two convolution laws that arise when predicting an open origin year: a
binomial thinning of the claims already above the priority added to an
independent law for future newcomers.

The negative binomial here has probability mass

    P(K = k) = Gamma(r + k) / (k! Gamma(r)) * p^r * (1 - p)^k

evaluated in log space so that large shapes (r can exceed 100 after exposure
scaling) do not overflow. ``NegBin(0, p)`` is the point mass at zero, which
keeps the family continuous in ``r`` when a development year has no claims.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Union

import numpy as np
from scipy.special import gammaln

from .errors import EmptySampleSet, InvalidParameter

_TAIL_MASS = 1e-12


def _as_float_array(k) -> tuple[np.ndarray, bool]:
    arr = np.asarray(k)
    scalar = arr.ndim == 0
    return np.atleast_1d(arr).astype(np.float64), scalar


def _maybe_scalar(values: np.ndarray, scalar: bool):
    return float(values[0]) if scalar else values


class CountDistribution:
    """Common interface: pmf/cdf/moments/quantiles/sampling on k = 0, 1, 2, ..."""

    kind: str = ""

    @property
    def mean(self) -> float:
        raise NotImplementedError

    @property
    def variance(self) -> float:
        raise NotImplementedError

    def logpmf(self, k):
        raise NotImplementedError

    def sample(self, rng: np.random.Generator, size: int | None = None):
        raise NotImplementedError

    def pmf(self, k):
        """Probability of exactly ``k`` counts; accepts scalars or arrays."""
        arr, scalar = _as_float_array(k)
        out = np.exp(self.logpmf(arr))
        out = np.where(arr < 0, 0.0, out)
        return _maybe_scalar(out, scalar)

    def cdf(self, k):
        """P(K <= k), computed by accumulating the pmf."""
        arr, scalar = _as_float_array(k)
        top = int(arr.max()) if arr.size else 0
        if top < 0:
            return _maybe_scalar(np.zeros_like(arr), scalar)
        cum = np.cumsum(self.pmf(np.arange(top + 1)))
        idx = np.floor(arr).astype(int)
        out = np.where(idx < 0, 0.0, cum[np.clip(idx, 0, top)])
        return _maybe_scalar(out, scalar)

    def quantile(self, q: float) -> int:
        """Smallest k with cdf(k) >= q; q = 0 returns the smallest support point."""
        if not 0.0 <= q <= 1.0:
            raise InvalidParameter(f"quantile level must lie in [0, 1], got {q}")
        ks, probs = self.pmf_table()
        if q == 0.0:
            positive = np.nonzero(probs > 0.0)[0]
            return int(ks[positive[0]]) if positive.size else 0
        cum = np.cumsum(probs)
        hit = np.searchsorted(cum, q, side="left")
        return int(ks[min(hit, len(ks) - 1)])

    def pmf_table(self, tail_mass: float = _TAIL_MASS) -> tuple[np.ndarray, np.ndarray]:
        """Support prefix ``0..K`` covering cumulative mass ``1 - tail_mass``."""
        sd = math.sqrt(max(self.variance, 0.0))
        block = max(16, int(self.mean + 10.0 * sd) + 1)
        top = block
        while True:
            ks = np.arange(top + 1)
            probs = self.pmf(ks)
            cum = np.cumsum(probs)
            if cum[-1] >= 1.0 - tail_mass or top > 10_000_000:
                cut = int(np.searchsorted(cum, 1.0 - tail_mass, side="left"))
                cut = min(cut, top)
                return ks[: cut + 1], probs[: cut + 1]
            top *= 2

    def to_dict(self) -> dict:
        raise NotImplementedError


@dataclass(frozen=True)
class Poisson(CountDistribution):
    """Poisson law with mean ``mu >= 0``; ``mu = 0`` is the point mass at zero."""

    mu: float
    kind = "poisson"

    def __post_init__(self) -> None:
        if not math.isfinite(self.mu) or self.mu < 0.0:
            raise InvalidParameter(f"Poisson mean must be >= 0, got {self.mu}")

    @property
    def mean(self) -> float:
        return self.mu

    @property
    def variance(self) -> float:
        return self.mu

    def logpmf(self, k):
        arr, scalar = _as_float_array(k)
        if self.mu == 0.0:
            out = np.where(arr == 0, 0.0, -np.inf)
        else:
            out = arr * math.log(self.mu) - self.mu - gammaln(arr + 1.0)
        out = np.where(arr < 0, -np.inf, out)
        return _maybe_scalar(out, scalar)

    def sample(self, rng: np.random.Generator, size: int | None = None):
        return rng.poisson(self.mu, size)

    def to_dict(self) -> dict:
        return {"kind": self.kind, "mean": self.mu}


@dataclass(frozen=True)
class Binomial(CountDistribution):
    """Binomial law on ``trials`` independent keep/drop decisions."""

    trials: int
    prob: float
    kind = "binomial"

    def __post_init__(self) -> None:
        if not isinstance(self.trials, (int, np.integer)) or self.trials < 0:
            raise InvalidParameter(f"binomial trials must be an integer >= 0, got {self.trials}")
        if not 0.0 <= self.prob <= 1.0:
            raise InvalidParameter(f"binomial probability must lie in [0, 1], got {self.prob}")
        object.__setattr__(self, "trials", int(self.trials))

    @property
    def mean(self) -> float:
        return self.trials * self.prob

    @property
    def variance(self) -> float:
        return self.trials * self.prob * (1.0 - self.prob)

    def logpmf(self, k):
        arr, scalar = _as_float_array(k)
        inside = (arr >= 0) & (arr <= self.trials) & (arr == np.floor(arr))
        safe = np.where(inside, arr, 0.0)
        logp = math.log(self.prob) if self.prob > 0.0 else -np.inf
        logq = math.log1p(-self.prob) if self.prob < 1.0 else -np.inf
        with np.errstate(invalid="ignore"):
            out = (
                gammaln(self.trials + 1.0)
                - gammaln(safe + 1.0)
                - gammaln(self.trials - safe + 1.0)
                + np.where(safe > 0, safe * logp, 0.0)
                + np.where(self.trials - safe > 0, (self.trials - safe) * logq, 0.0)
            )
        out = np.where(inside, out, -np.inf)
        return _maybe_scalar(out, scalar)

    def sample(self, rng: np.random.Generator, size: int | None = None):
        return rng.binomial(self.trials, self.prob, size)

    def to_dict(self) -> dict:
        return {"kind": self.kind, "trials": self.trials, "prob": self.prob}


@dataclass(frozen=True)
class NegBin(CountDistribution):
    """Negative binomial with real shape ``r >= 0`` and success probability ``p``.

    ``r = 0`` or ``p = 1`` collapse to the point mass at zero. Sampling uses
    the gamma-Poisson mixture: draw ``G ~ Gamma(r, (1 - p) / p)`` and then a
    Poisson count with mean ``G``, which supports any real shape.
    """

    r: float
    p: float
    kind = "negbin"

    def __post_init__(self) -> None:
        if not math.isfinite(self.r) or self.r < 0.0:
            raise InvalidParameter(f"negative-binomial shape must be >= 0, got {self.r}")
        if not 0.0 < self.p <= 1.0:
            raise InvalidParameter(f"negative-binomial probability must lie in (0, 1], got {self.p}")

    @property
    def _degenerate(self) -> bool:
        return self.r == 0.0 or self.p == 1.0

    @property
    def mean(self) -> float:
        return 0.0 if self._degenerate else self.r * (1.0 - self.p) / self.p

    @property
    def variance(self) -> float:
        return 0.0 if self._degenerate else self.r * (1.0 - self.p) / self.p**2

    def logpmf(self, k):
        arr, scalar = _as_float_array(k)
        if self._degenerate:
            out = np.where(arr == 0, 0.0, -np.inf)
            return _maybe_scalar(out, scalar)
        inside = (arr >= 0) & (arr == np.floor(arr))
        safe = np.where(inside, arr, 0.0)
        out = (
            gammaln(safe + self.r)
            - gammaln(safe + 1.0)
            - gammaln(self.r)
            + self.r * math.log(self.p)
            + safe * math.log1p(-self.p)
        )
        out = np.where(inside, out, -np.inf)
        return _maybe_scalar(out, scalar)

    def sample(self, rng: np.random.Generator, size: int | None = None):
        if self._degenerate:
            return 0 if size is None else np.zeros(size, dtype=np.int64)
        gamma = rng.gamma(self.r, (1.0 - self.p) / self.p, size)
        return rng.poisson(gamma)

    def to_dict(self) -> dict:
        return {"kind": self.kind, "r": self.r, "p": self.p}


@dataclass(frozen=True)
class Convolution(CountDistribution):
    """Law of the sum of an independent binomial survivor count and a tail law.

    The binomial part has finite support, so the pmf is an exact finite
    convolution of at most ``trials + 1`` terms.
    """

    binomial: Binomial
    tail: Union[Poisson, NegBin]

    def __post_init__(self) -> None:
        if not isinstance(self.binomial, Binomial):
            raise InvalidParameter("first convolution component must be Binomial")
        if not isinstance(self.tail, (Poisson, NegBin)):
            raise InvalidParameter("second convolution component must be Poisson or NegBin")

    @property
    def kind(self) -> str:  # type: ignore[override]
        return f"binomial+{self.tail.kind}"

    @property
    def mean(self) -> float:
        return self.binomial.mean + self.tail.mean

    @property
    def variance(self) -> float:
        return self.binomial.variance + self.tail.variance

    def pmf(self, k):
        arr, scalar = _as_float_array(k)
        out = np.zeros_like(arr)
        bin_pmf = self.binomial.pmf(np.arange(self.binomial.trials + 1))
        for d in range(self.binomial.trials + 1):
            if bin_pmf[d] == 0.0:
                continue
            shifted = arr - d
            out += bin_pmf[d] * np.where(shifted >= 0, self.tail.pmf(np.abs(shifted)), 0.0)
        return _maybe_scalar(out, scalar)

    def logpmf(self, k):
        arr, scalar = _as_float_array(k)
        with np.errstate(divide="ignore"):
            out = np.log(self.pmf(arr))
        return _maybe_scalar(out, scalar)

    def sample(self, rng: np.random.Generator, size: int | None = None):
        return self.binomial.sample(rng, size) + self.tail.sample(rng, size)

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "binomial": self.binomial.to_dict(),
            "tail": self.tail.to_dict(),
        }


def moments(dist: CountDistribution) -> tuple[float, float]:
    """Closed-form (mean, variance) of a count distribution."""
    return dist.mean, dist.variance


def from_dict(payload: dict) -> CountDistribution:
    """Inverse of :meth:`CountDistribution.to_dict` for the JSON interface."""
    kind = payload.get("kind")
    if kind == "poisson":
        return Poisson(payload["mean"])
    if kind == "binomial":
        return Binomial(payload["trials"], payload["prob"])
    if kind == "negbin":
        return NegBin(payload["r"], payload["p"])
    if isinstance(kind, str) and kind.startswith("binomial+"):
        binomial = from_dict(payload["binomial"])
        tail = from_dict(payload["tail"])
        return Convolution(binomial, tail)  # type: ignore[arg-type]
    raise InvalidParameter(f"unknown distribution kind {kind!r}")
