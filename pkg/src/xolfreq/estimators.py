"""Parameter estimation for the claim-number development model.

Two nested models share the drop probabilities ``delta_j`` of claims falling
back below the priority:

* Poisson: new excess claims in development year ``j`` arrive at rate
  ``lambda_j`` per unit of exposure. ``lambda_hat`` and ``delta_hat`` are the
  exposure- and stock-weighted column ratios, which are unbiased and also the
  maximum-likelihood estimates under the Poisson/binomial assumptions.
* Negative binomial: newcomers follow ``NegBin(r_j * E_i, p_j)`` where the
  ``p_j`` increase deterministically with the drop probabilities,

      p_{j+1} = p_j / (1 - delta_j * (1 - p_j)),

  so that cumulative counts stay negative binomial at every development age.
  One extra parameter ``p_1`` controls the excess variance; it is estimated
  by maximizing the profile likelihood in which each ``r_j`` is the moment
  match ``lambda_hat_j * p_j / (1 - p_j)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize
from scipy.special import gammaln

from .errors import DegenerateP, IndexOutsideLowerTriangle, InvalidParameter, OptimizerFailed
from .triangle import TrianglePair

P1_SEARCH_BOUNDS = (1e-6, 1.0 - 1e-6)
P1_DEGENERACY_THRESHOLD = 1.0 - 1e-4
_GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0
_BOUNDARY_TIE_TOL = 1e-10


@dataclass(frozen=True)
class PoissonFit:
    """Estimated arrival rates and drop probabilities of the Poisson model."""

    lambda_hat: tuple[float, ...]
    delta_hat: tuple[float, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "lambda_hat", tuple(float(v) for v in self.lambda_hat))
        object.__setattr__(self, "delta_hat", tuple(float(v) for v in self.delta_hat))
        if len(self.delta_hat) != len(self.lambda_hat) - 1:
            raise InvalidParameter("expected one fewer drop probability than arrival rates")
        if any(v < 0.0 for v in self.lambda_hat):
            raise InvalidParameter("arrival rates must be >= 0")
        if any(not 0.0 <= v <= 1.0 for v in self.delta_hat):
            raise InvalidParameter("drop probabilities must lie in [0, 1]")

    @property
    def n(self) -> int:
        return len(self.lambda_hat)

    def to_dict(self) -> dict:
        return {
            "model": "poisson",
            "lambda_hat": list(self.lambda_hat),
            "delta_hat": list(self.delta_hat),
        }


@dataclass(frozen=True)
class NegBinFit:
    """Negative-binomial fit; ``degenerate`` marks the Poisson limit p1 -> 1.

    When ``degenerate`` is true the fitted dispersion carries no signal and
    the remaining fields hold the values at the located optimum only for
    inspection; predictions must fall back to the Poisson model.
    """

    r_hat: tuple[float, ...]
    p: tuple[float, ...]
    p1: float
    delta_hat: tuple[float, ...]
    degenerate: bool
    loglik: float = float("nan")

    @property
    def n(self) -> int:
        return len(self.r_hat)

    def to_dict(self) -> dict:
        return {
            "model": "negbin",
            "r_hat": list(self.r_hat),
            "p": list(self.p),
            "p1": self.p1,
            "delta_hat": list(self.delta_hat),
            "degenerate": self.degenerate,
            "loglik": self.loglik,
        }


def estimate_lambda(pair: TrianglePair) -> np.ndarray:
    """Arrival rate per development year: column sum of N over column exposure."""
    n = pair.n
    out = np.empty(n)
    for j in range(1, n + 1):
        out[j - 1] = sum(pair.N.column(j)) / math.fsum(pair.E.values[: n - j + 1])
    return out


def estimate_delta(pair: TrianglePair) -> np.ndarray:
    """Drop probability per development year: dropped claims over claims at risk.

    A column with no claims at risk has an unobservable drop rate; it is set
    to 0 by convention.
    """
    n = pair.n
    out = np.empty(n - 1)
    for j in range(1, n):
        dropped = sum(pair.D.value(i, j + 1) for i in range(1, n - j + 1))
        at_risk = sum(pair.C.value(i, j) for i in range(1, n - j + 1))
        out[j - 1] = dropped / at_risk if at_risk else 0.0
    return out


def fit_poisson(pair: TrianglePair) -> PoissonFit:
    return PoissonFit(
        lambda_hat=tuple(estimate_lambda(pair)),
        delta_hat=tuple(estimate_delta(pair)),
    )


def lambda_prime(fit: PoissonFit, j: int) -> float:
    """Unconditional cumulative intensity at development year ``j`` (1-based).

    lambda'_j = sum_{k<=j} lambda_k * prod_{l=k}^{j-1} (1 - delta_l); the
    intensity of the cumulative count after j years of thinning.
    """
    if not 1 <= j <= fit.n:
        raise IndexOutsideLowerTriangle(f"development year {j} outside 1..{fit.n}")
    total = 0.0
    survival = 1.0
    for k in range(j, 0, -1):
        total += fit.lambda_hat[k - 1] * survival
        if k > 1:
            survival *= 1.0 - fit.delta_hat[k - 2]
    return total


def conditional_factors(fit: PoissonFit, i: int, j: int) -> tuple[float, float]:
    """Forward factors for origin ``i`` seen at its latest diagonal cell.

    Returns ``(delta_prime, lambda_prime)`` where ``delta_prime`` is the
    probability that a claim currently above the priority is still above it
    in development year ``j`` and ``lambda_prime`` scales the exposure for
    newcomers arriving after the diagonal. Both are empty products/sums at
    the diagonal itself (``j = n - i + 1``), giving ``(1.0, 0.0)``.
    """
    n = fit.n
    if not (1 <= i <= n) or not (n - i + 1 <= j <= n):
        raise IndexOutsideLowerTriangle(
            f"cell ({i},{j}) is not on or below the observed diagonal for n={n}"
        )
    start = n - i + 1
    delta_prime = 1.0
    for k in range(start, j):
        delta_prime *= 1.0 - fit.delta_hat[k - 1]
    lam_prime = 0.0
    survival = 1.0
    for k in range(j, start, -1):
        lam_prime += fit.lambda_hat[k - 1] * survival
        if k > start + 1:
            survival *= 1.0 - fit.delta_hat[k - 2]
    return delta_prime, lam_prime


def p_sequence(p1: float, delta) -> np.ndarray:
    """Success probabilities implied by ``p1`` and the drop probabilities.

    Closed form of the recursion p_{j+1} = p_j / (1 - delta_j (1 - p_j)):

        p_j = p1 / (1 - (1 - p1) * sum_{k<j} delta_k * prod_{l<k} (1 - delta_l))
    """
    if not 0.0 < p1 <= 1.0:
        raise InvalidParameter(f"p1 must lie in (0, 1], got {p1}")
    delta = np.asarray(delta, dtype=float)
    if delta.size and (delta.min() < 0.0 or delta.max() > 1.0):
        raise InvalidParameter("drop probabilities must lie in [0, 1]")
    out = np.empty(delta.size + 1)
    out[0] = p1
    absorbed = 0.0  # sum_{k<j} delta_k prod_{l<k}(1 - delta_l)
    survival = 1.0
    for j, d in enumerate(delta, start=1):
        absorbed += d * survival
        survival *= 1.0 - d
        out[j] = p1 / (1.0 - (1.0 - p1) * absorbed)
    return out


def estimate_r(lambda_hat, p) -> np.ndarray:
    """Moment estimate of the negative-binomial shapes: r_j = lambda_j p_j / (1 - p_j)."""
    lam = np.asarray(lambda_hat, dtype=float)
    probs = np.asarray(p, dtype=float)
    if lam.shape != probs.shape:
        raise InvalidParameter("lambda_hat and p must have equal length")
    if np.any(probs >= 1.0):
        raise DegenerateP("some p_j equals 1; the negative binomial degenerates to Poisson")
    if np.any(probs <= 0.0):
        raise InvalidParameter("p_j must lie in (0, 1)")
    return lam * probs / (1.0 - probs)


class P1ProfileLikelihood:
    """Profile log-likelihood of ``p1`` over the observed newcomer triangle.

    For a candidate ``p1`` the remaining negative-binomial parameters are
    profiled out: each ``p_j`` follows from the fixed drop probabilities and
    each shape is the moment match ``r_j = lambda_hat_j * p_j / (1 - p_j)``
    with ``lambda_hat_j`` recomputed from the triangle being scored. The same
    evaluator scores one observed triangle or a whole batch of simulated
    ones, which the bootstrap relies on.

    Cells are laid out development-year first:
    ``[(i, j) for j in 1..n for i in 1..n-j+1]``.
    """

    def __init__(self, exposures, delta, n: int):
        self.n = int(n)
        self.delta = np.asarray(delta, dtype=float)
        if self.delta.shape != (self.n - 1,):
            raise InvalidParameter(f"expected {self.n - 1} drop probabilities")
        exposures = np.asarray(exposures, dtype=float)[: self.n]
        # absorbed_[j-1] = sum_{k<j} delta_k prod_{l<k}(1 - delta_l)
        self.absorbed = np.empty(self.n)
        acc, survival = 0.0, 1.0
        for j in range(self.n):
            self.absorbed[j] = acc
            if j < self.n - 1:
                acc += self.delta[j] * survival
                survival *= 1.0 - self.delta[j]
        self.cells = [(i, j) for j in range(1, self.n + 1) for i in range(1, self.n - j + 2)]
        self.cell_dev = np.array([j - 1 for _, j in self.cells])
        self.cell_exposure = np.array([exposures[i - 1] for i, _ in self.cells])
        self.column_exposure = np.array(
            [math.fsum(exposures[: self.n - j + 1]) for j in range(1, self.n + 1)]
        )
        self.column_slices = []
        start = 0
        for j in range(1, self.n + 1):
            width = self.n - j + 1
            self.column_slices.append(slice(start, start + width))
            start += width
        self._col_starts = np.array([sl.start for sl in self.column_slices])
        # Columns where the p-sequence saturates at 1 for every p1 < 1;
        # possible only when an earlier drop probability equals 1 exactly.
        self._saturated_cols = self.absorbed >= 1.0

    def counts_from_pair(self, pair: TrianglePair) -> np.ndarray:
        return np.array([pair.N.value(i, j) for i, j in self.cells], dtype=np.int64)

    def lambda_hat(self, counts: np.ndarray) -> np.ndarray:
        """Column arrival rates of one (n_cells,) or many (n_cells, B) triangles."""
        cols = [counts[sl].sum(axis=0) / self.column_exposure[j] for j, sl in enumerate(self.column_slices)]
        return np.stack(cols, axis=0)

    def success_probs(self, p1: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """(p_j, 1 - p_j) per development year, shaped (n,) + p1.shape."""
        shape = (self.n,) + p1.shape
        absorbed = self.absorbed.reshape((self.n,) + (1,) * p1.ndim)
        denom = 1.0 - (1.0 - p1) * absorbed
        p = np.broadcast_to(p1, shape) / denom
        q = (1.0 - p1) * (1.0 - absorbed) / denom
        return p, q

    def loglik(self, counts: np.ndarray, p1) -> np.ndarray | float:
        """Full log-likelihood, including count constants, at candidate ``p1``.

        ``counts`` may be (n_cells,) with scalar ``p1``, or (n_cells, B) with
        ``p1`` of shape (B,).
        """
        p1_arr = np.asarray(p1, dtype=float)
        scalar = p1_arr.ndim == 0 and counts.ndim == 1
        counts2 = (counts if counts.ndim == 2 else counts[:, None]).astype(np.float64)
        p1_vec = np.atleast_1d(p1_arr)
        lam = self.lambda_hat(counts2)
        out = self._core(counts2, lam, p1_vec) - gammaln(counts2 + 1.0).sum(axis=0)
        impossible = self._impossible(counts2)
        if impossible.any():
            out = np.where(impossible, -np.inf, out)
        return float(out[0]) if scalar else out

    def _core(self, counts: np.ndarray, lam: np.ndarray, p1: np.ndarray) -> np.ndarray:
        """Log-likelihood without the gammaln(count + 1) constants.

        Hot path of the bootstrap re-estimation. Requires ``lam`` to equal
        ``lambda_hat(counts)`` (a column with zero rate has zero counts), so
        the zero-shape cells contribute exactly 0 without masking. The two
        log terms collapse to per-column reductions, leaving two gammaln
        evaluations as the only per-cell work. Saturated columns (success
        probability pinned at 1) contribute nothing here; :meth:`maximize`
        and :meth:`loglik` reject counts that make them impossible.
        """
        p, q = self.success_probs(p1)
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            q_safe = np.where(q > 0.0, q, 1.0)
            rate = np.where(q > 0.0, lam * (p / q_safe), 0.0)
            shape_cell = rate[self.cell_dev] * self.cell_exposure[:, None]
            shape_safe = np.where(shape_cell > 0.0, shape_cell, 1.0)
            out = (gammaln(counts + shape_safe) - gammaln(shape_safe)).sum(axis=0)
            col_counts = np.add.reduceat(counts, self._col_starts, axis=0)
            out += (rate * self.column_exposure[:, None] * np.log(p)).sum(axis=0)
            out += (col_counts * np.log(q_safe)).sum(axis=0)
            ones = p1 >= 1.0
            if ones.any():
                total = col_counts.sum(axis=0)
                out = np.where(ones, np.where(total == 0, 0.0, -np.inf), out)
        return out

    def _impossible(self, counts: np.ndarray) -> np.ndarray:
        """Simulations with counts in a saturated column (likelihood -inf everywhere)."""
        if not self._saturated_cols.any():
            return np.zeros(counts.shape[1], dtype=bool)
        col_counts = np.add.reduceat(counts, self._col_starts, axis=0)
        return (col_counts[self._saturated_cols] > 0).any(axis=0)

    def maximize(
        self,
        counts: np.ndarray,
        *,
        bounds: tuple[float, float] = P1_SEARCH_BOUNDS,
        iterations: int = 80,
        degeneracy_threshold: float = P1_DEGENERACY_THRESHOLD,
    ) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Golden-section search of the profile likelihood over ``p1``.

        Returns ``(p1, loglik, degenerate)``. A fit is degenerate when the
        maximizer exceeds ``degeneracy_threshold`` or when the upper search
        bound attains the maximum within a small tie tolerance (a flat or
        boundary-increasing likelihood carries no dispersion signal, so the
        Poisson limit is preferred).
        """
        counts2 = (counts if counts.ndim == 2 else counts[:, None]).astype(np.float64)
        batch = counts2.shape[1]
        lam = self.lambda_hat(counts2)
        consts = gammaln(counts2 + 1.0).sum(axis=0)

        lo, hi = bounds
        a = np.full(batch, lo)
        b = np.full(batch, hi)
        x1 = b - _GOLDEN * (b - a)
        x2 = a + _GOLDEN * (b - a)
        f1 = self._core(counts2, lam, x1)
        f2 = self._core(counts2, lam, x2)
        for _ in range(iterations):
            move_up = f1 < f2
            a = np.where(move_up, x1, a)
            b = np.where(move_up, b, x2)
            x1_new = np.where(move_up, x2, b - _GOLDEN * (b - a))
            x2_new = np.where(move_up, a + _GOLDEN * (b - a), x1)
            f1_keep = np.where(move_up, f2, f1)
            probe = np.where(move_up, x2_new, x1_new)
            f_probe = self._core(counts2, lam, probe)
            f1 = np.where(move_up, f1_keep, f_probe)
            f2 = np.where(move_up, f_probe, f1_keep)
            x1, x2 = x1_new, x2_new
        better = f1 >= f2
        p1 = np.where(better, x1, x2)
        best = np.where(better, f1, f2)
        at_hi = self._core(counts2, lam, np.full(batch, hi))
        degenerate = (p1 > degeneracy_threshold) | (at_hi >= best - _BOUNDARY_TIE_TOL)
        loglik = best - consts
        impossible = self._impossible(counts2)
        if impossible.any():
            loglik = np.where(impossible, -np.inf, loglik)
            degenerate = degenerate | impossible
        return p1, loglik, degenerate


def mle_p1(pair: TrianglePair, delta_hat=None) -> tuple[float, bool]:
    """Maximum-likelihood estimate of ``p1`` on the observed newcomer triangle.

    Returns ``(p1, degenerate)``; when ``degenerate`` is true the optimum sits
    at the Poisson limit and the negative-binomial model should not be used.

    Raises:
        OptimizerFailed: the likelihood is non-finite over the whole interval.
    """
    if delta_hat is None:
        delta_hat = estimate_delta(pair)
    profile = P1ProfileLikelihood(pair.E.values, delta_hat, pair.n)
    counts = profile.counts_from_pair(pair)
    p1, loglik, degenerate = profile.maximize(counts)
    if not np.isfinite(loglik[0]):
        raise OptimizerFailed("profile likelihood is non-finite on the whole search interval")
    return float(p1[0]), bool(degenerate[0])


def fit_negbin(pair: TrianglePair) -> NegBinFit:
    """Fit the negative-binomial model, flagging the Poisson limit.

    The returned shapes use the moment match against the Poisson arrival
    rates, so the fitted model preserves every column mean exactly.
    """
    lam = estimate_lambda(pair)
    delta = estimate_delta(pair)
    profile = P1ProfileLikelihood(pair.E.values, delta, pair.n)
    counts = profile.counts_from_pair(pair)
    p1_arr, loglik, degenerate = profile.maximize(counts)
    p1 = float(p1_arr[0])
    if not np.isfinite(loglik[0]):
        raise OptimizerFailed("profile likelihood is non-finite on the whole search interval")
    probs = p_sequence(p1, delta)
    saturated = probs >= 1.0
    with np.errstate(divide="ignore"):
        shapes = np.where(saturated, np.inf, lam * probs / np.where(saturated, 1.0, 1.0 - probs))
    return NegBinFit(
        r_hat=tuple(shapes),
        p=tuple(probs),
        p1=p1,
        delta_hat=tuple(delta),
        degenerate=bool(degenerate[0]) or bool(saturated.any()),
        loglik=float(loglik[0]),
    )


@dataclass(frozen=True)
class JointFit:
    """Joint maximum-likelihood estimates of ``p1`` and the drop probabilities."""

    p1: float
    delta: tuple[float, ...]
    p: tuple[float, ...] = field(default=())
    loglik: float = float("nan")

    def to_dict(self) -> dict:
        return {
            "p1": self.p1,
            "delta": list(self.delta),
            "p": list(self.p),
            "loglik": self.loglik,
        }


def joint_loglik(pair: TrianglePair, p1: float, delta) -> float:
    """Log-likelihood of (p1, delta) over both the newcomer and drop triangles.

    The newcomer part scores N cells under the negative binomial with the
    candidate delta driving both the p-sequence and the moment-matched
    shapes; the drop part scores D cells as binomial thinnings of the
    cumulative counts. Binomial coefficients are included so values are
    comparable across parameter vectors.
    """
    delta = np.asarray(delta, dtype=float)
    lam = estimate_lambda(pair)
    profile = P1ProfileLikelihood(pair.E.values, delta, pair.n)
    counts = profile.counts_from_pair(pair)
    total = float(profile.loglik(counts, p1))
    n = pair.n
    for j in range(1, n):
        dj = delta[j - 1]
        for i in range(1, n - j + 1):
            c = pair.C.value(i, j)
            d = pair.D.value(i, j + 1)
            total += float(gammaln(c + 1.0) - gammaln(d + 1.0) - gammaln(c - d + 1.0))
            if d > 0:
                total += d * math.log(dj) if dj > 0.0 else -math.inf
            if c - d > 0:
                total += (c - d) * math.log1p(-dj) if dj < 1.0 else -math.inf
    return total


def joint_mle(pair: TrianglePair) -> JointFit:
    """Estimate ``p1`` and the drop probabilities simultaneously.

    Derivative-free simplex search in logit space, initialized at the
    plug-in estimates (profile-likelihood ``p1`` and column-ratio deltas).

    Raises:
        OptimizerFailed: no finite optimum was located.
    """
    n = pair.n
    delta0 = np.clip(estimate_delta(pair), 1e-6, 1.0 - 1e-6)
    p1_init, _ = mle_p1(pair)
    p1_init = min(max(p1_init, 1e-6), 1.0 - 1e-6)

    def unpack(z: np.ndarray) -> tuple[float, np.ndarray]:
        vals = 1.0 / (1.0 + np.exp(-z))
        return float(vals[0]), vals[1:]

    def objective(z: np.ndarray) -> float:
        p1, delta = unpack(z)
        return -joint_loglik(pair, p1, delta)

    z0 = np.concatenate(([p1_init], delta0))
    z0 = np.log(z0 / (1.0 - z0))
    result = minimize(
        objective,
        z0,
        method="Nelder-Mead",
        options={"xatol": 1e-9, "fatol": 1e-10, "maxiter": 40000, "maxfev": 40000},
    )
    if not np.isfinite(result.fun):
        raise OptimizerFailed("joint likelihood is non-finite at the located optimum")
    p1, delta = unpack(result.x)
    return JointFit(
        p1=p1,
        delta=tuple(delta),
        p=tuple(p_sequence(p1, delta)),
        loglik=float(-result.fun),
    )
