"""Replicated Monte-Carlo execution and estimator bookkeeping.

Every statistical claim in this package funnels through the helpers here:
``EstimatorSummary`` (streaming mean / variance with exact merging),
``z_gap`` with the single global sigma policy, and ``run_replicates``,
which executes a pure experiment over numbered RNG streams and is
bit-deterministic for a given master seed no matter how many worker
processes are used.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import DegenerateSampleError
from .seeding import replicate_rng

SIGMA_POLICY = 4.0  # acceptance assertions are at four standard errors
DEGENERATE_BUDGET = 1e-3  # abort a run if more than 0.1% of replicates fail

__all__ = [
    "SIGMA_POLICY",
    "EstimatorSummary",
    "summarize",
    "merge",
    "z_gap",
    "passes",
    "median_of_means",
    "median_of_means_summary",
    "trend_slope",
    "RunResult",
    "run_replicates",
]


@dataclass(frozen=True)
class EstimatorSummary:
    """Count, mean, and centered second-moment accumulator of a sample."""

    n: int
    mean: float
    m2: float
    extras: dict = field(default_factory=dict, compare=False)

    @property
    def variance(self) -> float:
        return self.m2 / (self.n - 1) if self.n >= 2 else math.nan

    @property
    def se(self) -> float:
        return math.sqrt(self.m2 / (self.n * (self.n - 1))) if self.n >= 2 else math.nan

    @property
    def ci95(self) -> float:
        return 1.96 * self.se


def summarize(values: Sequence[float], quantiles: Sequence[float] = ()) -> EstimatorSummary:
    arr = np.asarray(values, dtype=float)
    if arr.ndim != 1 or arr.size == 0:
        raise ValueError("summarize needs a nonempty 1-d sample")
    n = arr.size
    mean = float(arr.mean())
    m2 = float(((arr - mean) ** 2).sum())
    extras = {}
    if quantiles:
        extras["quantiles"] = {
            float(q): float(np.quantile(arr, q)) for q in quantiles
        }
    return EstimatorSummary(n, mean, m2, extras)


def merge(a: EstimatorSummary, b: EstimatorSummary) -> EstimatorSummary:
    """Combine two disjoint-sample summaries (Chan et al. update)."""
    n = a.n + b.n
    delta = b.mean - a.mean
    mean = (a.n * a.mean + b.n * b.mean) / n
    m2 = a.m2 + b.m2 + delta * delta * a.n * b.n / n
    return EstimatorSummary(n, mean, m2)


def z_gap(a: EstimatorSummary, target) -> float:
    """Standardized gap between a summary and a target.

    ``target`` may be a constant (one-sample z) or another summary
    (two-sample z with independent errors).
    """
    if isinstance(target, EstimatorSummary):
        se = math.hypot(a.se, target.se)
        return (a.mean - target.mean) / se if se > 0 else math.inf
    se = a.se
    if se == 0:
        return 0.0 if a.mean == target else math.inf
    return (a.mean - float(target)) / se


def passes(a: EstimatorSummary, target, sigmas: float | None = None) -> bool:
    return abs(z_gap(a, target)) <= (SIGMA_POLICY if sigmas is None else sigmas)


def median_of_means(values: Sequence[float], n_blocks: int = 16) -> float:
    """Heavy-tail-robust location estimate: median of block means."""
    arr = np.asarray(values, dtype=float)
    if arr.size < n_blocks:
        raise ValueError("need at least one value per block")
    blocks = np.array_split(arr, n_blocks)
    return float(np.median([b.mean() for b in blocks]))


def median_of_means_summary(
    values: Sequence[float], n_blocks: int = 16
) -> EstimatorSummary:
    """Median-of-means point estimate packaged with a standard error.

    The block means are close to normal once blocks are large, and the
    sample median of B normals has asymptotic variance (pi/2) sigma^2 / B,
    so the reported se is sqrt(pi/2) * sd(block means) / sqrt(B).
    """
    arr = np.asarray(values, dtype=float)
    if arr.size < 2 * n_blocks:
        raise ValueError("need at least two values per block")
    means = np.array([b.mean() for b in np.array_split(arr, n_blocks)])
    est = float(np.median(means))
    sd = float(means.std(ddof=1))
    se = math.sqrt(math.pi / 2.0) * sd / math.sqrt(n_blocks)
    m2 = se * se * n_blocks * (n_blocks - 1)  # so .se reproduces it at n=B
    return EstimatorSummary(n_blocks, est, m2,
                            {"estimator": "median_of_means",
                             "n_values": int(arr.size)})


def trend_slope(xs: Sequence[float], ys: Sequence[float],
                ses: Sequence[float]) -> tuple[float, float]:
    """Least-squares slope of y against x with propagated standard error.

    The fit is ordinary (unweighted); the se combines the per-point
    measurement errors through the linear slope functional, which is the
    right error bar when each y_i is an independent MC mean with its own se.
    """
    x = np.asarray(xs, dtype=float)
    y = np.asarray(ys, dtype=float)
    e = np.asarray(ses, dtype=float)
    if x.size != y.size or x.size != e.size or x.size < 2:
        raise ValueError("need matching xs/ys/ses with at least two points")
    xc = x - x.mean()
    sxx = float(xc @ xc)
    if sxx == 0:
        raise ValueError("xs must not be constant")
    slope = float(xc @ y) / sxx
    se = float(np.sqrt((xc / sxx) ** 2 @ (e * e)))
    return slope, se


@dataclass(frozen=True)
class RunResult:
    """Per-coordinate summaries of a replicated experiment."""

    summaries: tuple[EstimatorSummary, ...]
    n_requested: int
    n_degenerate: int

    @property
    def summary(self) -> EstimatorSummary:
        if len(self.summaries) != 1:
            raise ValueError("experiment returned more than one coordinate")
        return self.summaries[0]


def _replicate_worker(args):
    fn, master_seed, i = args
    try:
        out = np.atleast_1d(np.asarray(fn(replicate_rng(master_seed, i)), dtype=float))
    except DegenerateSampleError:
        return i, None
    return i, out


def run_replicates(
    experiment: Callable[[np.random.Generator], object],
    n: int,
    master_seed: int,
    workers: int = 1,
) -> RunResult:
    """Run ``experiment`` over n numbered RNG streams and summarize.

    Replicate i always sees the stream derived from (master_seed, i), and
    results are accumulated in replicate order, so the outcome is
    bit-identical for any worker count.  Replicates aborted by a
    degenerate-sample error are skipped and counted; more than 0.1% of
    them fails the whole run, since that event is supposed to be
    measure-zero numerics.
    """
    if n < 1:
        raise ValueError("need at least one replicate")
    tasks = [(experiment, master_seed, i) for i in range(n)]
    if workers <= 1:
        results = map(_replicate_worker, tasks)
        collected: list = [None] * n
        for i, vec in results:
            collected[i] = vec
    else:
        collected = [None] * n
        with ProcessPoolExecutor(max_workers=workers) as pool:
            for i, vec in pool.map(_replicate_worker, tasks, chunksize=max(1, n // (4 * workers))):
                collected[i] = vec
    good = [v for v in collected if v is not None]
    n_degenerate = n - len(good)
    if n_degenerate > DEGENERATE_BUDGET * n:
        raise RuntimeError(
            f"{n_degenerate}/{n} replicates degenerate — beyond the "
            f"{DEGENERATE_BUDGET:.1%} budget; check the model, not the RNG"
        )
    if not good:
        raise RuntimeError("all replicates degenerate")
    width = good[0].size
    if any(v.size != width for v in good):
        raise ValueError("experiment returned vectors of inconsistent length")
    mat = np.vstack(good)
    summaries = tuple(summarize(mat[:, j]) for j in range(width))
    return RunResult(summaries, n, n_degenerate)
