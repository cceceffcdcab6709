"""Parametric bootstrap engines for next-year and lower-triangle counts.

Estimation error is propagated by redrawing the parameter estimates from
their fitted sampling laws: each column rate comes back as a scaled Poisson
count and each drop probability as a scaled binomial count. Under the
dispersion model the extra parameter has no closed sampling law, so the
whole newcomer triangle is resimulated and ``p1`` re-estimated per
simulation; simulations whose re-estimate collapses to the Poisson limit
are carried out under the Poisson machinery and counted.

Reproducibility contract: simulations are partitioned into fixed-size
blocks and block ``b`` draws from its own counter-based stream
``Philox(SeedSequence(entropy=master_seed, spawn_key=(b,)))``. Blocks can
run on any number of workers in any order; results are merged by block
index, so a given ``(inputs, config.master_seed, config.sims)`` always
yields bit-identical output. Within a block the draw order is fixed and
documented on each engine.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from numpy.random import Generator, Philox, SeedSequence

from .errors import DegenerateFit, EmptySampleSet, InvalidParameter
from .estimators import (
    NegBinFit,
    P1_DEGENERACY_THRESHOLD,
    P1ProfileLikelihood,
    PoissonFit,
)
from .triangle import TrianglePair

BLOCK_SIZE = 16384
QUANTILE_LEVELS = (1, 5, 25, 50, 75, 95, 99)
_BATCH_P1_ITERATIONS = 26


@dataclass(frozen=True)
class BootstrapConfig:
    """Run parameters shared by all bootstrap engines.

    ``freeze_parameters`` disables the parameter redraw (every simulation
    uses the plug-in estimates); it exists so the simulators can be checked
    against the closed-form predictive laws.
    """

    sims: int
    master_seed: int = 0
    model: str = "poisson"
    fast_ultimate: bool = False
    nb_degeneracy_threshold: float = P1_DEGENERACY_THRESHOLD
    retain_samples: bool = False
    freeze_parameters: bool = False
    workers: int = 1

    def __post_init__(self) -> None:
        if self.sims < 1:
            raise InvalidParameter(f"simulation count must be >= 1, got {self.sims}")
        if self.master_seed < 0:
            raise InvalidParameter("master seed must be a non-negative integer")
        if self.model not in ("poisson", "negbin"):
            raise InvalidParameter(f"model must be 'poisson' or 'negbin', got {self.model!r}")
        if not 0.0 <= self.nb_degeneracy_threshold <= 1.0:
            raise InvalidParameter("degeneracy threshold must lie in [0, 1]")
        if self.workers < 1:
            raise InvalidParameter("workers must be >= 1")


@dataclass(frozen=True)
class TargetSummary:
    """Summary statistics of one simulated count, plus its full histogram."""

    count: int
    mean: float
    variance: float
    quantiles: dict[int, int]
    hist_values: np.ndarray
    hist_counts: np.ndarray

    @property
    def min(self) -> int:
        return int(self.hist_values[0])

    @property
    def max(self) -> int:
        return int(self.hist_values[-1])

    def to_dict(self) -> dict:
        return {
            "count": self.count,
            "mean": self.mean,
            "variance": self.variance,
            "min": self.min,
            "max": self.max,
            "quantiles": {str(q): int(v) for q, v in self.quantiles.items()},
            "histogram": {
                "value": [int(v) for v in self.hist_values],
                "count": [int(c) for c in self.hist_counts],
            },
        }


@dataclass(frozen=True)
class BootstrapResult:
    """Per-target summaries of one bootstrap run."""

    model: str
    sims: int
    master_seed: int
    targets: dict[str, TargetSummary]
    poisson_fallbacks: int | None = None
    samples: dict[str, np.ndarray] | None = field(default=None, compare=False)

    def to_dict(self) -> dict:
        out = {
            "model": self.model,
            "sims": self.sims,
            "master_seed": self.master_seed,
            "targets": {key: s.to_dict() for key, s in self.targets.items()},
        }
        if self.poisson_fallbacks is not None:
            out["poisson_fallbacks"] = self.poisson_fallbacks
        return out


def target_key(i: int, j: int) -> str:
    return f"{i},{j}"


def _summary_from_bincount(bincount: np.ndarray, total: int) -> TargetSummary:
    nonzero = np.nonzero(bincount)[0]
    vmin, vmax = int(nonzero[0]), int(nonzero[-1])
    ks = np.arange(vmin, vmax + 1)
    counts = bincount[vmin : vmax + 1]
    # Exact integer moments keep the reduction independent of block layout.
    s1 = int(np.dot(ks.astype(object), counts.astype(object)))
    s2 = int(np.dot((ks.astype(object) ** 2), counts.astype(object)))
    mean = s1 / total
    variance = (total * s2 - s1 * s1) / (total * (total - 1)) if total > 1 else 0.0
    cum = np.cumsum(counts)
    quantiles: dict[int, int] = {}
    for q in QUANTILE_LEVELS:
        rank = max(1, (q * total + 99) // 100)
        quantiles[q] = int(ks[np.searchsorted(cum, rank, side="left")])
    return TargetSummary(
        count=total,
        mean=mean,
        variance=variance,
        quantiles=quantiles,
        hist_values=ks,
        hist_counts=counts.copy(),
    )


def summarize(samples) -> TargetSummary:
    """Summary of a sample of counts: mean, unbiased variance, quantiles, histogram.

    A single observation has zero variance by convention. Quantile ``q`` is
    the empirical order statistic of rank ``ceil(q/100 * count)``.

    Raises:
        EmptySampleSet: no samples were supplied.
        InvalidParameter: a sample is negative (counts expected).
    """
    arr = np.asarray(samples, dtype=np.int64).ravel()
    if arr.size == 0:
        raise EmptySampleSet("cannot summarize an empty sample")
    if arr.min() < 0:
        raise InvalidParameter("samples must be non-negative counts")
    return _summary_from_bincount(np.bincount(arr), arr.size)


# --- blocked execution -----------------------------------------------------

def _block_rng(master_seed: int, block: int) -> Generator:
    return Generator(Philox(SeedSequence(entropy=master_seed, spawn_key=(block,))))


def _run_blocked(
    config: BootstrapConfig,
    worker: Callable[[Generator, int], tuple[dict[str, np.ndarray], dict[str, int]]],
) -> tuple[dict[str, np.ndarray], dict[str, int], dict[str, np.ndarray] | None]:
    """Run ``worker`` over all simulation blocks and merge by block index."""
    n_blocks = -(-config.sims // BLOCK_SIZE)
    sizes = [min(BLOCK_SIZE, config.sims - b * BLOCK_SIZE) for b in range(n_blocks)]

    def one(block: int) -> tuple[dict[str, np.ndarray], dict[str, int]]:
        return worker(_block_rng(config.master_seed, block), sizes[block])

    if config.workers > 1:
        with ThreadPoolExecutor(max_workers=config.workers) as pool:
            block_results = list(pool.map(one, range(n_blocks)))
    else:
        block_results = [one(b) for b in range(n_blocks)]

    histograms: dict[str, np.ndarray] = {}
    counters: dict[str, int] = {}
    raw: dict[str, list[np.ndarray]] | None = {} if config.retain_samples else None
    for samples, block_counters in block_results:
        for key, draws in samples.items():
            bc = np.bincount(draws)
            acc = histograms.get(key)
            if acc is None:
                histograms[key] = bc.astype(np.int64)
            else:
                if bc.size > acc.size:
                    acc = np.pad(acc, (0, bc.size - acc.size))
                acc[: bc.size] += bc
                histograms[key] = acc
            if raw is not None:
                raw.setdefault(key, []).append(draws)
        for key, value in block_counters.items():
            counters[key] = counters.get(key, 0) + int(value)
    merged_raw = None
    if raw is not None:
        merged_raw = {key: np.concatenate(parts) for key, parts in raw.items()}
    return histograms, counters, merged_raw


def _build_result(
    config: BootstrapConfig,
    model: str,
    histograms: dict[str, np.ndarray],
    counters: dict[str, int],
    raw: dict[str, np.ndarray] | None,
) -> BootstrapResult:
    return BootstrapResult(
        model=model,
        sims=config.sims,
        master_seed=config.master_seed,
        targets={key: _summary_from_bincount(bc, config.sims) for key, bc in histograms.items()},
        poisson_fallbacks=counters.get("poisson_fallbacks"),
        samples=raw,
    )


# --- parameter resampling --------------------------------------------------

def _column_totals(pair: TrianglePair) -> tuple[np.ndarray, np.ndarray]:
    """Exposure totals per rate column and claims at risk per drop column."""
    n = pair.n
    exposure = np.array([math.fsum(pair.E.values[: n - j + 1]) for j in range(1, n + 1)])
    at_risk = np.array(
        [sum(pair.C.value(i, j) for i in range(1, n - j + 1)) for j in range(1, n)],
        dtype=np.int64,
    )
    return exposure, at_risk


def _delta_draws(
    delta_hat: Sequence[float],
    pair: TrianglePair,
    rng: Generator,
    size: int,
    freeze: bool,
) -> np.ndarray:
    """Redraw the drop probabilities as an (n-1, size) array.

    Each is ``Binomial(sum C_j, delta_hat_j) / sum C_j``, one binomial column
    per drop year 1..n-1. A column with nothing at risk keeps probability 0
    and consumes no draws.
    """
    n = pair.n
    if freeze:
        return np.repeat(np.asarray(delta_hat, dtype=float)[:, None], size, axis=1)
    _, at_risk = _column_totals(pair)
    dl = np.empty((n - 1, size))
    for j in range(n - 1):
        trials = int(at_risk[j])
        if trials == 0:
            dl[j] = 0.0
        else:
            dl[j] = rng.binomial(trials, delta_hat[j], size) / trials
    return dl


def _poisson_param_draws(
    fit: PoissonFit,
    pair: TrianglePair,
    rng: Generator,
    size: int,
    freeze: bool,
) -> tuple[np.ndarray, np.ndarray]:
    """Redraw (rates, drop probabilities) as (n, size) and (n-1, size) arrays.

    Draw order: one Poisson column per development year 1..n, then the
    binomial drop columns of :func:`_delta_draws`.
    """
    n = fit.n
    if freeze:
        lam = np.repeat(np.asarray(fit.lambda_hat)[:, None], size, axis=1)
    else:
        exposure, _ = _column_totals(pair)
        lam = np.empty((n, size))
        for j in range(n):
            lam[j] = rng.poisson(fit.lambda_hat[j] * exposure[j], size) / exposure[j]
    return lam, _delta_draws(fit.delta_hat, pair, rng, size, freeze)


def resample_params_poisson(fit: PoissonFit, pair: TrianglePair, rng: Generator) -> PoissonFit:
    """One bootstrap redraw of the Poisson-model estimates.

    Rates come back as ``Poisson(lambda_hat_j * sum E) / sum E`` and drop
    probabilities as ``Binomial(sum C_j, delta_hat_j) / sum C_j``, all
    independent, so each redraw is unbiased for the plugged-in estimate.
    """
    lam, dl = _poisson_param_draws(fit, pair, rng, size=1, freeze=False)
    return PoissonFit(lambda_hat=tuple(lam[:, 0]), delta_hat=tuple(np.clip(dl[:, 0], 0.0, 1.0)))


def _cumulative_intensity(lam: np.ndarray, dl: np.ndarray, start: int) -> np.ndarray:
    """sum_{k=start..n} lam[k] * prod_{l=k..n-1} (1 - delta[l]) per simulation.

    ``start`` is 1-based; ``lam`` is (n, size) and ``dl`` (n-1, size).
    """
    n = lam.shape[0]
    surv_after = np.ones_like(lam)  # row k-1 holds prod_{l=k..n-1}(1 - delta_l)
    if n > 1:
        surv_after[: n - 1] = np.cumprod((1.0 - dl)[::-1], axis=0)[::-1]
    return (lam[start - 1 :] * surv_after[start - 1 :]).sum(axis=0)


def _survival_probability(dl: np.ndarray, start: int) -> np.ndarray:
    """prod_{k=start..n-1} (1 - delta_k) per simulation; ``start`` 1-based."""
    if start > dl.shape[0]:
        return np.ones(dl.shape[1])
    return np.prod(1.0 - dl[start - 1 :], axis=0)


# --- Poisson engines --------------------------------------------------------

def simulate_next_year_poisson(
    config: BootstrapConfig,
    fit: PoissonFit,
    pair: TrianglePair,
    e_next: float,
) -> BootstrapResult:
    """Bootstrap distribution of next year's fully developed count.

    Per simulation: redraw the estimates, build the cumulative intensity,
    then draw ``Poisson(intensity * e_next)``.
    """
    n = fit.n
    key = target_key(n + 1, n)

    def worker(rng: Generator, size: int):
        lam, dl = _poisson_param_draws(fit, pair, rng, size, config.freeze_parameters)
        intensity = _cumulative_intensity(lam, dl, 1)
        draws = rng.poisson(intensity * e_next)
        return {key: draws.astype(np.int64)}, {}

    histograms, counters, raw = _run_blocked(config, worker)
    return _build_result(config, "poisson", histograms, counters, raw)


def _lower_triangle_targets(n: int, targets: Sequence[tuple[int, int]] | None) -> list[tuple[int, int]]:
    if targets is None:
        return [(i, j) for i in range(2, n + 1) for j in range(n - i + 2, n + 1)]
    cleaned = []
    for i, j in targets:
        if not (2 <= i <= n) or not (n - i + 2 <= j <= n):
            raise InvalidParameter(f"target ({i},{j}) is not in the unobserved lower triangle")
        cleaned.append((int(i), int(j)))
    return cleaned


def simulate_lower_triangle_poisson(
    config: BootstrapConfig,
    fit: PoissonFit,
    pair: TrianglePair,
    targets: Sequence[tuple[int, int]] | None = None,
) -> BootstrapResult:
    """Bootstrap distribution of unobserved cells by walking the recursion.

    Per simulation and origin row the path starts at the observed diagonal
    value; each step adds a Poisson newcomer count and removes a binomial
    drop count (drawn in that order). With ``fast_ultimate`` set and only
    ultimate cells requested, each row is drawn in one shot as surviving
    stock plus newcomers, which agrees with the path construction in law.
    """
    n = fit.n
    wanted = _lower_triangle_targets(n, targets)
    fast = config.fast_ultimate and all(j == n for _, j in wanted)
    rows = sorted({i for i, _ in wanted})
    wanted_set = set(wanted)

    def worker(rng: Generator, size: int):
        lam, dl = _poisson_param_draws(fit, pair, rng, size, config.freeze_parameters)
        samples: dict[str, np.ndarray] = {}
        for i in rows:
            if fast:
                stay = _survival_probability(dl, n - i + 1)
                intensity = _cumulative_intensity(lam, dl, n - i + 2)
                survivors = rng.binomial(pair.C.latest(i), stay)
                newcomers = rng.poisson(intensity * pair.E.of(i))
                samples[target_key(i, n)] = (survivors + newcomers).astype(np.int64)
                continue
            level = np.full(size, pair.C.latest(i), dtype=np.int64)
            for j in range(n - i + 1, n):
                newcomers = rng.poisson(lam[j] * pair.E.of(i))
                drops = rng.binomial(level, dl[j - 1])
                level = level + newcomers - drops
                if (i, j + 1) in wanted_set:
                    samples[target_key(i, j + 1)] = level.copy()
        return samples, {}

    histograms, counters, raw = _run_blocked(config, worker)
    return _build_result(config, "poisson", histograms, counters, raw)


# --- negative-binomial engines ----------------------------------------------

def _negbin_context(fit: NegBinFit, pair: TrianglePair):
    profile = P1ProfileLikelihood(pair.E.values, fit.delta_hat, pair.n)
    cell_shape = np.array(
        [fit.r_hat[j - 1] * pair.E.of(i) for i, j in profile.cells]
    )
    cell_p = np.array([fit.p[j - 1] for _, j in profile.cells])
    return profile, cell_shape, cell_p


def _resimulate_upper_triangle(
    profile: P1ProfileLikelihood,
    cell_shape: np.ndarray,
    cell_p: np.ndarray,
    rng: Generator,
    size: int,
) -> np.ndarray:
    """Redraw the newcomer triangle cell by cell via the gamma-Poisson mixture.

    Cells are visited in the profile's development-major order; a cell with
    zero shape is zero with certainty and consumes no draws.
    """
    counts = np.zeros((len(cell_shape), size), dtype=np.int64)
    for idx, (shape, p) in enumerate(zip(cell_shape, cell_p)):
        if shape <= 0.0 or p >= 1.0:
            continue
        mixed = rng.gamma(shape, (1.0 - p) / p, size)
        counts[idx] = rng.poisson(mixed)
    return counts


def _reestimate(
    profile: P1ProfileLikelihood,
    counts: np.ndarray,
    threshold: float,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Per-simulation re-fit of (p1, rates) on a batch of resimulated triangles.

    Returns ``(p1, lam, degenerate)`` with ``lam`` of shape (n, size).
    Re-estimation profiles against the observed drop probabilities, exactly
    like the fit on real data.
    """
    p1, _, degenerate = profile.maximize(
        counts, iterations=_BATCH_P1_ITERATIONS, degeneracy_threshold=threshold
    )
    degenerate = degenerate | (p1 > threshold)
    return p1, profile.lambda_hat(counts), degenerate


def _batch_success_probs(p1: np.ndarray, dl: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Per-simulation p-sequence driven by the redrawn drop probabilities.

    The final sampling step pairs each re-estimated ``p1`` with its own
    simulation's drop probabilities, so drop-parameter uncertainty reaches
    the dispersion side the same way it reaches the Poisson side.
    Returns ``(p, 1 - p)`` of shape (n, size).
    """
    n = dl.shape[0] + 1
    size = p1.shape[0]
    p = np.empty((n, size))
    q = np.empty((n, size))
    absorbed = np.zeros(size)
    survival = np.ones(size)
    for j in range(n):
        denom = 1.0 - (1.0 - p1) * absorbed
        p[j] = p1 / denom
        q[j] = (1.0 - p1) * (1.0 - absorbed) / denom
        if j < n - 1:
            absorbed = absorbed + dl[j] * survival
            survival = survival * (1.0 - dl[j])
    return p, q


def _moment_shapes(lam: np.ndarray, p: np.ndarray, q: np.ndarray) -> np.ndarray:
    """Moment-matched shapes r_j = lam_j * p_j / (1 - p_j), zero where saturated."""
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(q > 0.0, lam * p / np.where(q > 0.0, q, 1.0), 0.0)


def simulate_next_year_negbin(
    config: BootstrapConfig,
    fit: NegBinFit,
    pair: TrianglePair,
    e_next: float,
) -> BootstrapResult:
    """Bootstrap distribution of next year's count under the dispersion model.

    Per simulation: redraw the drop probabilities, resimulate the whole
    newcomer triangle from the fitted law, re-estimate ``p1`` and the
    column rates on it, then draw the total from the negative binomial
    whose shapes pair the re-estimated rates with the simulation's own
    drop probabilities. Simulations whose re-estimated ``p1`` exceeds the
    degeneracy threshold are drawn from the Poisson machinery instead
    (rates from the simulated triangle, redrawn drops); the result reports
    how many fell back. Both candidate draws are generated for every
    simulation (fixed draw order) and selected at the end.

    Raises:
        DegenerateFit: the entry fit is already degenerate.
    """
    if fit.degenerate:
        raise DegenerateFit("negative-binomial fit is degenerate; bootstrap under Poisson")
    n = fit.n
    key = target_key(n + 1, n)
    profile, cell_shape, cell_p = _negbin_context(fit, pair)

    def worker(rng: Generator, size: int):
        dl = _delta_draws(fit.delta_hat, pair, rng, size, config.freeze_parameters)
        counts = _resimulate_upper_triangle(profile, cell_shape, cell_p, rng, size)
        p1, lam, degenerate = _reestimate(profile, counts, config.nb_degeneracy_threshold)
        poisson_draws = rng.poisson(_cumulative_intensity(lam, dl, 1) * e_next)
        p, q = _batch_success_probs(p1, dl)
        total_shape = _moment_shapes(lam, p, q).sum(axis=0) * e_next
        scale = np.where(p[n - 1] > 0.0, q[n - 1] / p[n - 1], 0.0)
        negbin_draws = rng.poisson(rng.gamma(np.maximum(total_shape, 0.0), scale))
        draws = np.where(degenerate, poisson_draws, negbin_draws)
        return {key: draws.astype(np.int64)}, {"poisson_fallbacks": int(degenerate.sum())}

    histograms, counters, raw = _run_blocked(config, worker)
    return _build_result(config, "negbin", histograms, counters, raw)


def simulate_lower_triangle_negbin(
    config: BootstrapConfig,
    fit: NegBinFit,
    pair: TrianglePair,
    targets: Sequence[tuple[int, int]] | None = None,
) -> BootstrapResult:
    """Bootstrap distribution of unobserved cells under the dispersion model.

    Mirrors the Poisson path simulation with negative-binomial newcomer
    increments drawn at the re-estimated per-simulation parameters;
    simulations that degenerate use Poisson increments. ``fast_ultimate``
    draws ultimate cells in one shot (surviving stock plus a newcomer law
    with the summed shapes).
    """
    if fit.degenerate:
        raise DegenerateFit("negative-binomial fit is degenerate; bootstrap under Poisson")
    n = fit.n
    wanted = _lower_triangle_targets(n, targets)
    fast = config.fast_ultimate and all(j == n for _, j in wanted)
    rows = sorted({i for i, _ in wanted})
    wanted_set = set(wanted)
    profile, cell_shape, cell_p = _negbin_context(fit, pair)

    def worker(rng: Generator, size: int):
        dl = _delta_draws(fit.delta_hat, pair, rng, size, config.freeze_parameters)
        counts = _resimulate_upper_triangle(profile, cell_shape, cell_p, rng, size)
        p1, lam, degenerate = _reestimate(profile, counts, config.nb_degeneracy_threshold)
        p, q = _batch_success_probs(p1, dl)
        shapes = _moment_shapes(lam, p, q)
        samples: dict[str, np.ndarray] = {}
        for i in rows:
            exposure = pair.E.of(i)
            if fast:
                stay = _survival_probability(dl, n - i + 1)
                survivors = rng.binomial(pair.C.latest(i), stay)
                pois_new = rng.poisson(_cumulative_intensity(lam, dl, n - i + 2) * exposure)
                row_shape = shapes[n - i + 1 :].sum(axis=0) * exposure
                scale = np.where(p[n - 1] > 0.0, q[n - 1] / p[n - 1], 0.0)
                nb_new = rng.poisson(rng.gamma(np.maximum(row_shape, 0.0), scale))
                newcomers = np.where(degenerate, pois_new, nb_new)
                samples[target_key(i, n)] = (survivors + newcomers).astype(np.int64)
                continue
            level = np.full(size, pair.C.latest(i), dtype=np.int64)
            for j in range(n - i + 1, n):
                pois_inc = rng.poisson(lam[j] * exposure)
                scale = np.where(p[j] > 0.0, q[j] / p[j], 0.0)
                nb_inc = rng.poisson(rng.gamma(np.maximum(shapes[j] * exposure, 0.0), scale))
                newcomers = np.where(degenerate, pois_inc, nb_inc)
                drops = rng.binomial(level, dl[j - 1])
                level = level + newcomers - drops
                if (i, j + 1) in wanted_set:
                    samples[target_key(i, j + 1)] = level.copy()
        return samples, {"poisson_fallbacks": int(degenerate.sum())}

    histograms, counters, raw = _run_blocked(config, worker)
    return _build_result(config, "negbin", histograms, counters, raw)
