"""Monte Carlo harnesses for the walk's limit behavior at desk scale.

Four families of checks:

* Log-averaged weighted empirical measures of the rescaled position along a
  single path, compared to their Gaussian targets by weighted KS distance
  (diffusive 1/k weights under log n; critical 1/(k log k) under log log n).
* Even-moment path functionals whose almost sure limits are the Gaussian
  moments sigma^{2r} (2r)!/(2^r r! (1-2 alpha)^r), respectively
  (4q(1-p))^r (2r)!/(2^r r!).
* Path skeletons of the rescaled process on a time grid, with empirical
  covariance matrices matched against the theoretical kernels (the critical
  regime lives on the n^t time change).
* The superdiffusive almost-sure limit of n^(1-alpha)(S_n/n - q/(1-alpha)),
  with a coupled-stream Cauchy contraction check between horizons n and 2n.

Every operation validates its regime by exact comparison of alpha with 1/2
and derives all replica streams from RngStreamSpec, merging accumulators in
replica-index order, so results are reproducible bit for bit at any thread
count.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.stats import norm

from .core_process import (
    ModelParams,
    Regime,
    RegimeError,
    RngStreamSpec,
    classify_regime,
    walk_checkpoints_batch,
    walk_position_chunks,
    walk_positions_batch,
)
from .martingale_sequences import sigma_squared
from .urn_spectral import (
    theoretical_covariance_critical,
    theoretical_covariance_diffusive,
)

__all__ = [
    "WeightedSample",
    "MomentFunctionalResult",
    "PathSkeleton",
    "CovarianceEstimate",
    "LimitEstimate",
    "asclt_measure_diffusive",
    "asclt_measure_critical",
    "weighted_ks_to_normal",
    "weighted_mean_variance",
    "qsl_functional",
    "qsl_functional_batch",
    "qsl_target",
    "fclt_skeleton",
    "fclt_skeletons_batch",
    "skeleton_steps",
    "covariance_grid",
    "superdiffusive_limit",
]

# Raw (point, weight) storage up to this horizon (~16 MB of float64 pairs at
# 10^6); beyond it the measure is accumulated into a fixed histogram.
RAW_POINT_LIMIT = 10**6
HISTOGRAM_BINS = 10_000
HISTOGRAM_SPAN_SDS = 8.0

DEFAULT_GRID_DIFFUSIVE = (0.25, 0.5, 0.75, 1.0)
DEFAULT_GRID_CRITICAL = (0.5, 0.75, 1.0)


def _require(params: ModelParams, regime: Regime, what: str) -> None:
    actual = classify_regime(params)
    if actual is not regime:
        cond = {
            Regime.DIFFUSIVE: "alpha < 1/2",
            Regime.CRITICAL: "alpha = 1/2",
            Regime.SUPERDIFFUSIVE: "alpha > 1/2",
        }[regime]
        raise RegimeError(
            f"{what} requires {cond}; got alpha = {params.alpha} ({actual.value})"
        )


@dataclass
class WeightedSample:
    """A weighted empirical measure of rescaled positions from one path.

    In raw form, points/weights list every contribution. In histogram form
    (horizons beyond RAW_POINT_LIMIT), points are bin centers and weights
    are accumulated bin masses; out-of-span contributions are folded into
    the edge bins. normalizer is the limit statement's mass scale (log n or
    log log n); weights.sum()/normalizer -> 1 as n grows. CDF-based queries
    renormalize to total mass one.
    """

    points: np.ndarray
    weights: np.ndarray
    normalizer: float
    target_variance: float
    n: int
    histogram: bool = False

    def mass_ratio(self) -> float:
        return float(self.weights.sum()) / self.normalizer


def weighted_ks_to_normal(sample: WeightedSample, variance: float | None = None) -> float:
    """Sup distance between the weighted empirical CDF and a centered normal."""
    var = sample.target_variance if variance is None else variance
    if var <= 0:
        raise ValueError("KS comparison needs a positive target variance")
    order = np.argsort(sample.points, kind="stable")
    pts = sample.points[order]
    w = sample.weights[order]
    cum = np.cumsum(w)
    cum /= cum[-1]
    ref = norm.cdf(pts, scale=math.sqrt(var))
    below = np.concatenate([[0.0], cum[:-1]])
    return float(max(np.max(np.abs(cum - ref)), np.max(np.abs(below - ref))))


def weighted_mean_variance(sample: WeightedSample) -> tuple[float, float]:
    """Mean and variance of the weighted measure (about its own mean)."""
    w = sample.weights / sample.weights.sum()
    mean = float(np.dot(w, sample.points))
    var = float(np.dot(w, (sample.points - mean) ** 2))
    return mean, var


def _accumulate_weighted(params, n, rng, start_k, point_fn, weight_fn, normalizer, target_var):
    """Stream one path; collect raw pairs or a histogram depending on n."""
    raw = n <= RAW_POINT_LIMIT
    if raw:
        points = np.empty(n - start_k + 1, dtype=np.float64)
        weights = np.empty_like(points)
    else:
        half_span = HISTOGRAM_SPAN_SDS * math.sqrt(target_var)
        edges = np.linspace(-half_span, half_span, HISTOGRAM_BINS + 1)
        centers = 0.5 * (edges[:-1] + edges[1:])
        masses = np.zeros(HISTOGRAM_BINS, dtype=np.float64)
    for k_start, values in walk_position_chunks(params, n, rng):
        k = np.arange(k_start, k_start + len(values), dtype=np.float64)
        keep = k >= start_k
        if not np.any(keep):
            continue
        k = k[keep]
        pts = point_fn(k, values[keep])
        w = weight_fn(k)
        if raw:
            lo = int(k[0]) - start_k
            points[lo : lo + len(k)] = pts
            weights[lo : lo + len(k)] = w
        else:
            idx = np.clip(np.searchsorted(edges, pts, side="right") - 1, 0, HISTOGRAM_BINS - 1)
            np.add.at(masses, idx, w)
    if raw:
        return WeightedSample(points, weights, normalizer, target_var, n, histogram=False)
    return WeightedSample(centers, masses, normalizer, target_var, n, histogram=True)


def asclt_measure_diffusive(params: ModelParams, n: int, rng: RngStreamSpec) -> WeightedSample:
    """Weighted measure of sqrt(k)(S_k/k - q/(1-alpha)), weights 1/k, k = 1..n.

    Its weak limit along almost every path is N(0, sigma^2/(1-2 alpha)).
    """
    _require(params, Regime.DIFFUSIVE, "the diffusive weighted measure")
    if n < 10:
        raise ValueError("n must be at least 10")
    alpha = params.alpha
    center = params.q / (1.0 - alpha)
    target_var = sigma_squared(params) / (1.0 - 2.0 * alpha)
    return _accumulate_weighted(
        params,
        n,
        rng,
        start_k=1,
        point_fn=lambda k, S: np.sqrt(k) * (S / k - center),
        weight_fn=lambda k: 1.0 / k,
        normalizer=math.log(n),
        target_var=target_var,
    )


def asclt_measure_critical(params: ModelParams, n: int, rng: RngStreamSpec) -> WeightedSample:
    """Weighted measure of sqrt(k/log k)(S_k/k - 2q), weights 1/(k log k), k >= 2.

    Its weak limit along almost every path is N(0, 4q(1-p)); the mass scale
    is log log n, so convergence is very slow and only coarse agreement can
    be expected at desk horizons.
    """
    _require(params, Regime.CRITICAL, "the critical weighted measure")
    if n < 3:
        raise ValueError("n must be at least 3")
    center = 2.0 * params.q
    target_var = 4.0 * params.q * (1.0 - params.p)
    return _accumulate_weighted(
        params,
        n,
        rng,
        start_k=2,
        point_fn=lambda k, S: np.sqrt(k / np.log(k)) * (S / k - center),
        weight_fn=lambda k: 1.0 / (k * np.log(k)),
        normalizer=math.log(math.log(n)),
        target_var=target_var,
    )


@dataclass
class MomentFunctionalResult:
    """One path's even-moment functional against its theoretical limit."""

    r: int
    value: float
    target: float
    n: int
    regime: Regime


def qsl_target(params: ModelParams, r: int, regime: Regime) -> float:
    two_r_fact = math.factorial(2 * r)
    norm_const = 2**r * math.factorial(r)
    if regime is Regime.DIFFUSIVE:
        alpha = params.alpha
        return sigma_squared(params) ** r * two_r_fact / (norm_const * (1.0 - 2.0 * alpha) ** r)
    if regime is Regime.CRITICAL:
        return (4.0 * params.q * (1.0 - params.p)) ** r * two_r_fact / norm_const
    raise RegimeError("no even-moment limit is implemented for alpha > 1/2")


def qsl_functional(params: ModelParams, n: int, r: int, rng: RngStreamSpec) -> MomentFunctionalResult:
    """Log-averaged 2r-th power functional of one path.

    Diffusive: (1/log n) sum_{k<=n} k^(r-1) (S_k/k - q/(1-alpha))^(2r).
    Critical: (1/log log n) sum_{2<=k<=n} k^(r-1) (log k)^-(r+1) (S_k/k - 2q)^(2r).
    """
    if r < 1:
        raise ValueError("moment order r must be at least 1")
    regime = classify_regime(params)
    if regime is Regime.SUPERDIFFUSIVE:
        raise RegimeError("even-moment functionals require alpha <= 1/2")
    if n < 3:
        raise ValueError("n must be at least 3")
    alpha = params.alpha
    center = params.q / (1.0 - alpha)
    total = 0.0
    for k_start, values in walk_position_chunks(params, n, rng):
        k = np.arange(k_start, k_start + len(values), dtype=np.float64)
        if regime is Regime.CRITICAL:
            keep = k >= 2
            k = k[keep]
            if len(k) == 0:
                continue
            dev = values[keep] / k - center
            total += float(np.sum(k ** (r - 1) * np.log(k) ** (-(r + 1)) * dev ** (2 * r)))
        else:
            dev = values / k - center
            total += float(np.sum(k ** (r - 1) * dev ** (2 * r)))
    scale = math.log(math.log(n)) if regime is Regime.CRITICAL else math.log(n)
    return MomentFunctionalResult(
        r=r,
        value=total / scale,
        target=qsl_target(params, r, regime),
        n=n,
        regime=regime,
    )


def qsl_functional_batch(
    params: ModelParams,
    n: int,
    r: int,
    specs: Sequence[RngStreamSpec],
    threads: int = 1,
) -> np.ndarray:
    """The functional of qsl_functional for many replicas, vectorized.

    Returns one value per spec, in spec order. Uses the full trajectory
    matrix, so replicas * n is bounded by memory; the acceptance workloads
    (hundreds of replicas at n = 10^5) are far below any limit.
    """
    if r < 1:
        raise ValueError("moment order r must be at least 1")
    regime = classify_regime(params)
    if regime is Regime.SUPERDIFFUSIVE:
        raise RegimeError("even-moment functionals require alpha <= 1/2")
    if n < 3:
        raise ValueError("n must be at least 3")
    pos = walk_positions_batch(params, n, specs, threads=threads)
    center = params.q / (1.0 - params.alpha)
    values = np.zeros(len(specs), dtype=np.float64)
    chunk = 1 << 16
    start = 2 if regime is Regime.CRITICAL else 1
    for lo in range(start, n + 1, chunk):
        hi = min(lo + chunk, n + 1)
        k = np.arange(lo, hi, dtype=np.float64)
        dev = pos[:, lo:hi] / k - center
        if regime is Regime.CRITICAL:
            values += (k ** (r - 1) * np.log(k) ** (-(r + 1)) * dev ** (2 * r)).sum(axis=1)
        else:
            values += (k ** (r - 1) * dev ** (2 * r)).sum(axis=1)
    scale = math.log(math.log(n)) if regime is Regime.CRITICAL else math.log(n)
    return values / scale


@dataclass
class PathSkeleton:
    """Rescaled process values at grid times for one replica."""

    grid: np.ndarray
    steps: np.ndarray
    values: np.ndarray
    regime: Regime


def skeleton_steps(n: int, grid: Sequence[float], regime: Regime) -> np.ndarray:
    """Map grid times to step indices: floor(n t) diffusive, floor(n^t) critical."""
    times = np.asarray(list(grid), dtype=np.float64)
    if len(times) == 0 or np.any(np.diff(times) <= 0):
        raise ValueError("grid times must be strictly increasing")
    if regime is Regime.CRITICAL:
        steps = np.floor(np.power(float(n), times)).astype(np.int64)
        min_allowed = 2
    else:
        steps = np.floor(n * times).astype(np.int64)
        min_allowed = 1
    if steps[0] < min_allowed:
        raise ValueError(
            f"grid underflow: time {times[0]} maps to step {steps[0]} < {min_allowed}"
        )
    if np.any(np.diff(steps) <= 0):
        raise ValueError("grid times map to duplicate steps at this horizon")
    return steps


def _skeleton_values(params, n, grid, steps_at, positions, regime):
    times = np.asarray(list(grid), dtype=np.float64)
    center = params.q / (1.0 - params.alpha)
    m = steps_at.astype(np.float64)
    if regime is Regime.CRITICAL:
        scale = np.sqrt(m / math.log(n))
    else:
        scale = np.full_like(m, math.sqrt(n))
    return scale * (positions / m - center), times


def fclt_skeleton(
    params: ModelParams,
    n: int,
    grid: Sequence[float] | None,
    rng: RngStreamSpec,
) -> PathSkeleton:
    """One replica's rescaled values at the grid times.

    Diffusive: sqrt(n)(S_{floor(nt)}/floor(nt) - q/(1-alpha)). Critical:
    sqrt(n^t/log n)(S_{floor(n^t)}/floor(n^t) - 2q) on the n^t time change.
    """
    regime = classify_regime(params)
    if regime is Regime.SUPERDIFFUSIVE:
        raise RegimeError("path skeletons require alpha <= 1/2")
    if grid is None:
        grid = DEFAULT_GRID_CRITICAL if regime is Regime.CRITICAL else DEFAULT_GRID_DIFFUSIVE
    steps = skeleton_steps(n, grid, regime)
    pos = walk_checkpoints_batch(params, steps, [rng])[0]
    values, times = _skeleton_values(params, n, grid, steps, pos, regime)
    return PathSkeleton(grid=times, steps=steps, values=values, regime=regime)


def fclt_skeletons_batch(
    params: ModelParams,
    n: int,
    grid: Sequence[float] | None,
    specs: Sequence[RngStreamSpec],
    threads: int = 1,
) -> PathSkeleton:
    """Skeletons for many replicas; values has shape (replicas, grid)."""
    regime = classify_regime(params)
    if regime is Regime.SUPERDIFFUSIVE:
        raise RegimeError("path skeletons require alpha <= 1/2")
    if grid is None:
        grid = DEFAULT_GRID_CRITICAL if regime is Regime.CRITICAL else DEFAULT_GRID_DIFFUSIVE
    steps = skeleton_steps(n, grid, regime)
    pos = walk_checkpoints_batch(params, steps, specs, threads=threads)
    values, times = _skeleton_values(params, n, grid, steps, pos, regime)
    return PathSkeleton(grid=times, steps=steps, values=values, regime=regime)


@dataclass
class CovarianceEstimate:
    """Empirical vs. theoretical covariance of the rescaled process."""

    grid: np.ndarray
    empirical: np.ndarray
    theoretical: np.ndarray
    standard_errors: np.ndarray
    n: int
    replicas: int


def covariance_grid(
    params: ModelParams,
    n: int,
    grid: Sequence[float] | None,
    replicas: int,
    rng: RngStreamSpec,
    threads: int = 1,
    batches: int = 20,
) -> CovarianceEstimate:
    """Monte Carlo covariance matrix of skeleton values against the kernel.

    Standard errors per cell come from batch means over contiguous
    replica-index batches, so they are reproducible at any thread count.
    """
    if replicas < 1000:
        raise ValueError("covariance estimation needs at least 1000 replicas")
    regime = classify_regime(params)
    specs = [rng.replica(i) for i in range(replicas)]
    skel = fclt_skeletons_batch(params, n, grid, specs, threads=threads)
    values = skel.values
    times = skel.grid
    G = len(times)
    centered = values - values.mean(axis=0, keepdims=True)
    empirical = centered.T @ centered / (replicas - 1)
    kernel = (
        theoretical_covariance_critical
        if regime is Regime.CRITICAL
        else theoretical_covariance_diffusive
    )
    theoretical = np.empty((G, G))
    for i in range(G):
        for j in range(G):
            lo_t, hi_t = min(times[i], times[j]), max(times[i], times[j])
            theoretical[i, j] = kernel(params, lo_t, hi_t)
    bounds = np.linspace(0, replicas, batches + 1, dtype=np.int64)
    batch_vals = []
    for b in range(batches):
        part = values[bounds[b] : bounds[b + 1]]
        pc = part - part.mean(axis=0, keepdims=True)
        batch_vals.append(pc.T @ pc / (len(part) - 1))
    batch_vals = np.array(batch_vals)
    standard_errors = batch_vals.std(axis=0, ddof=1) / math.sqrt(batches)
    return CovarianceEstimate(
        grid=times,
        empirical=empirical,
        theoretical=theoretical,
        standard_errors=standard_errors,
        n=n,
        replicas=replicas,
    )


@dataclass
class LimitEstimate:
    """Sample of the superdiffusive statistic at one horizon."""

    n: int
    mean: float
    mean_se: float
    variance: float
    variance_se: float
    cauchy_rms: float
    samples: np.ndarray | None = None


def superdiffusive_limit(
    params: ModelParams,
    n_list: Sequence[int],
    replicas: int,
    rng: RngStreamSpec,
    threads: int = 1,
    keep_samples: bool = False,
) -> list[LimitEstimate]:
    """Samples of n^(1-alpha)(S_n/n - q/(1-alpha)) across horizons.

    Each replica stream is simulated once through 2*max(n_list), recording
    each horizon n and its double 2n, so the per-horizon statistics are
    coupled pathwise. cauchy_rms is the across-replica RMS of the statistic
    difference between 2n and n; almost sure convergence makes it shrink as
    n grows.
    """
    _require(params, Regime.SUPERDIFFUSIVE, "the superdiffusive limit sample")
    ns = [int(x) for x in n_list]
    if not ns or any(b <= a for a, b in zip(ns, ns[1:])) or ns[0] < 1:
        raise ValueError("n_list must be strictly increasing positive horizons")
    if replicas < 2:
        raise ValueError("need at least 2 replicas")
    alpha = params.alpha
    center = params.q / (1.0 - alpha)
    checkpoints = sorted(set(ns) | {2 * x for x in ns})
    col = {cp: i for i, cp in enumerate(checkpoints)}
    specs = [rng.replica(i) for i in range(replicas)]
    pos = walk_checkpoints_batch(params, checkpoints, specs, threads=threads)

    def stat(n: int) -> np.ndarray:
        S = pos[:, col[n]]
        return n ** (1.0 - alpha) * (S / n - center)

    results = []
    for n in ns:
        x = stat(n)
        diff = stat(2 * n) - x
        mean = float(x.mean())
        var = float(x.var(ddof=1))
        m4 = float(np.mean((x - mean) ** 4))
        mean_se = math.sqrt(var / replicas)
        var_se = math.sqrt(max(m4 - var**2, 0.0) / replicas)
        results.append(
            LimitEstimate(
                n=n,
                mean=mean,
                mean_se=mean_se,
                variance=var,
                variance_se=var_se,
                cauchy_rms=float(np.sqrt(np.mean(diff**2))),
                samples=x if keep_samples else None,
            )
        )
    return results
