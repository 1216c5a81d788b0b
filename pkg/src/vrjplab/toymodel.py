"""One-dimensional closed forms and the slab-comparison surgery chain.

Three layers live here.  The exactly solvable layer: a finite chain with a
terminal cemetery edge whose partition function factorizes into a product
of independent inverse-Gaussian variables, giving closed-form moments of
every order.  The pinned-segment layer: the same chain with extra cemetery
edges at periodically spaced sites, whose moments stay bounded in the
segment length once the pinning weights rarely fall below a floor.  The
surgery layer: the four-stage sequence of graph modifications that
sandwiches a box partition function between convex-order neighbours,
ending at a realization of the pinned segment.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np

from .errors import VrjplabError
from .estimators import (SIGMA_POLICY, EstimatorSummary, median_of_means_summary,
                         summarize, trend_slope, z_gap)
from .graphs import (Label, WeightedGraph, build_box_lattice, build_toy_graph,
                     component_of, from_edges, transform_comparison_step)
from .inverse_gaussian import ig_moment, sample_ig
from .operators import psi
from .potential import sample_beta
from .seeding import replicate_rng

__all__ = [
    "build_toy_chain",
    "chain_beta_sample",
    "chain_partition_identity",
    "ToyMomentSpec",
    "ToyMomentResult",
    "toy_moment_check",
    "toy_moment_factorized",
    "WeightSampler",
    "point_mass_weights",
    "uniform_weights",
    "file_weights",
    "ToyBoundReport",
    "toy_uniform_bound_experiment",
    "comparison_chain",
    "CONVEX_TEST_FUNCTIONS",
    "ConvexOrderReport",
    "convex_order_pair",
    "convex_order_chain_test",
]


# -- the exactly solvable chain ------------------------------------------


def build_toy_chain(ell: int, epsilon: float, eta0: float) -> WeightedGraph:
    """Path 0 -- 1 -- ... -- ell with one cemetery edge at the far end.

    Interior edges carry conductance ``epsilon``; the single edge
    (ell, *) carries ``eta0``.  For ell = 0 the graph is one vertex tied
    to the cemetery with eta0.
    """
    if ell < 0:
        raise ValueError("ell must be nonnegative")
    if epsilon <= 0 or eta0 <= 0:
        raise ValueError("epsilon and eta0 must be positive")
    edges: dict[tuple[Label, Label], float] = {
        ((i,), (i + 1,)): epsilon for i in range(ell)
    }
    edges[((ell,), "*")] = eta0
    labels = [*((i,) for i in range(ell + 1)), "*"]
    return from_edges(
        labels, edges, classes={"*": "cemetery"}, root=(0,),
        meta={"kind": "toy_chain", "ell": ell, "epsilon": epsilon,
              "eta0": eta0},
    )


def chain_beta_sample(
    ell: int, epsilon: float, eta0: float, rng: np.random.Generator
) -> tuple[dict[Label, float], np.ndarray]:
    """Draw the chain potential through its product representation.

    Samples A_0..A_{ell-1} ~ IG(1, epsilon) and A_ell ~ IG(1, eta0), then
    assembles beta_0 = epsilon/A_0, beta_i = epsilon A_{i-1} + epsilon/A_i
    and beta_ell = epsilon A_{ell-1} + eta0/A_ell.  The resulting field has
    exactly the chain-graph potential law (the Laplace transforms match
    factor by factor), and the A_i are returned so callers can hold the
    product identity against a linear solve.
    """
    if ell < 0:
        raise ValueError("ell must be nonnegative")
    a = np.empty(ell + 1)
    for i in range(ell):
        a[i] = sample_ig(1.0, epsilon, rng)
    a[ell] = sample_ig(1.0, eta0, rng)
    beta: dict[Label, float] = {}
    if ell == 0:
        beta[(0,)] = eta0 / a[0]
        return beta, a
    beta[(0,)] = epsilon / a[0]
    for i in range(1, ell):
        beta[(i,)] = epsilon * a[i - 1] + epsilon / a[i]
    beta[(ell,)] = epsilon * a[ell - 1] + eta0 / a[ell]
    return beta, a


def chain_partition_identity(
    ell: int, epsilon: float, eta0: float, rng: np.random.Generator
) -> tuple[float, float]:
    """One replicate of the chain identity: linear solve vs product.

    Returns (solve_value, product_value) where the first is the partition
    function computed by the Schroedinger solve on the chain graph under
    the sampled potential and the second is prod A_i.  Exact algebra says
    they coincide; callers assert the float gap.
    """
    g = build_toy_chain(ell, epsilon, eta0)
    beta, a = chain_beta_sample(ell, epsilon, eta0, rng)
    solve = psi(g, beta)
    return float(solve.psi[g.index((0,))]), float(np.prod(a))


# -- closed-form moments on the deterministic sub-chain ------------------


@dataclass(frozen=True)
class ToyMomentSpec:
    """Parameters of one solvable-chain moment check.

    The chain has length (2m+1)*k: that is (2m+1)*k edges of conductance
    epsilon followed by the terminal eta0 edge.  ``closed_form`` is filled
    in automatically and may be math.inf when the moment overflows a
    float, which callers must treat as "not checkable at desk scale".
    """

    p: int
    k: int
    m: int
    epsilon: float
    eta0: float
    closed_form: float = field(init=False)

    def __post_init__(self):
        if self.p < 1:
            raise ValueError("moment order p must be >= 1")
        if self.k < 0 or self.m < 0:
            raise ValueError("k and m must be nonnegative")
        if self.epsilon <= 0 or self.eta0 <= 0:
            raise ValueError("epsilon and eta0 must be positive")
        base = ig_moment(self.p, self.epsilon)
        tail = ig_moment(self.p, self.eta0)
        try:
            value = base ** self.chain_length * tail
        except OverflowError:
            value = math.inf
        object.__setattr__(self, "closed_form", value)

    @property
    def chain_length(self) -> int:
        return (2 * self.m + 1) * self.k


@dataclass(frozen=True)
class ToyMomentResult:
    spec: ToyMomentSpec
    summary: EstimatorSummary
    z: float
    method: str

    @property
    def estimate(self) -> float:
        return self.summary.mean


def toy_moment_check(
    spec: ToyMomentSpec,
    replicates: int,
    rng: np.random.Generator,
    *,
    n_blocks: int = 32,
) -> ToyMomentResult:
    """Monte-Carlo estimate of E[(chain partition function)^p] vs closed form.

    The potential is drawn by the generic sequential sampler on the chain
    graph — deliberately not through the product representation, so the
    check pits two independent routes against each other.  Orders p >= 3
    use a median-of-means summary; plain means of such heavy-tailed powers
    have CIs too wide to mean anything.
    """
    if not math.isfinite(spec.closed_form):
        raise VrjplabError(
            f"closed form overflows for {spec}; nothing to compare against"
        )
    log_rel2 = _log_relative_second_moment(spec)
    if log_rel2 > math.log(1e4):
        warnings.warn(
            f"heavy tail: relative second moment exp({log_rel2:.1f}) makes "
            f"the p={spec.p} estimate fragile at desk scale",
            stacklevel=2,
        )
    g = build_toy_chain(spec.chain_length, spec.epsilon, spec.eta0)
    root = g.index((0,))
    values = np.empty(replicates)
    for i in range(replicates):
        beta = sample_beta(g, rng)
        values[i] = float(psi(g, beta).psi[root]) ** spec.p
    if spec.p >= 3:
        summary = median_of_means_summary(values, n_blocks=n_blocks)
        method = "median_of_means"
    else:
        summary = summarize(values)
        method = "mean"
    return ToyMomentResult(spec, summary, z_gap(summary, spec.closed_form),
                           method)


def _log_relative_second_moment(spec: ToyMomentSpec) -> float:
    """log( E[M^2p] / E[M^p]^2 ), the squared relative error of one draw."""
    def lr(lam: float) -> float:
        m2 = ig_moment(2 * spec.p, lam)
        m1 = ig_moment(spec.p, lam)
        if not (math.isfinite(m2) and math.isfinite(m1)):
            return math.inf
        return math.log(m2) - 2.0 * math.log(m1)

    return spec.chain_length * lr(spec.epsilon) + lr(spec.eta0)


def toy_moment_factorized(
    spec: ToyMomentSpec,
    replicates: int,
    rng: np.random.Generator,
    *,
    identity_rtol: float = 1e-12,
) -> ToyMomentResult:
    """Chain moment estimated through the per-level ratio factorization.

    The solved field on the chain telescopes: with psi(ell+1) read at the
    cemetery (where it is one), the partition function is the product of
    the ratios psi(i)/psi(i+1).  Under the chain potential law these
    ratios are independent with inverse-Gaussian marginals, which is
    exactly what gives the closed form its product shape — so estimating
    each factor's p-th moment on a disjoint block of replicates and
    multiplying yields an estimator whose relative error adds across
    levels instead of multiplying.  That is the difference between a
    usable check and a hopeless one when the direct estimator's relative
    second moment runs to 1e8 and beyond.

    Per replicate the telescoping product is asserted against the solved
    partition function at ``identity_rtol``, and the returned summary
    carries the largest absolute cross-level correlation of the powered
    ratios in ``extras`` so the independence being leaned on is itself
    measured, not assumed.
    """
    if not math.isfinite(spec.closed_form):
        raise VrjplabError(
            f"closed form overflows for {spec}; nothing to compare against"
        )
    n_factors = spec.chain_length + 1
    if replicates < 2 * n_factors:
        raise ValueError("need at least two replicates per level")
    g = build_toy_chain(spec.chain_length, spec.epsilon, spec.eta0)
    pos = [g.index((i,)) for i in range(spec.chain_length + 1)]
    pos.append(g.index("*"))
    ratios = np.empty((replicates, n_factors))
    for r in range(replicates):
        beta = sample_beta(g, rng)
        vec = psi(g, beta).psi
        ratios[r] = vec[pos[:-1]] / vec[pos[1:]]
        value = float(vec[pos[0]])
        prod = float(np.prod(ratios[r]))
        if abs(prod - value) > identity_rtol * abs(value):
            raise VrjplabError(
                f"telescoping product broke at replicate {r}: "
                f"{prod} vs {value}"
            )
    powered = ratios ** spec.p
    blocks = np.array_split(np.arange(replicates), n_factors)
    factor_means = np.empty(n_factors)
    rel_var = 0.0
    for i in range(n_factors):
        s = summarize(powered[blocks[i], i])
        factor_means[i] = s.mean
        rel_var += (s.se / s.mean) ** 2
    estimate = float(np.prod(factor_means))
    se = estimate * math.sqrt(rel_var)
    corr = np.corrcoef(powered, rowvar=False)
    max_corr = float(np.abs(corr[np.triu_indices(n_factors, k=1)]).max()) \
        if n_factors > 1 else 0.0
    pseudo_n = n_factors
    m2 = se * se * pseudo_n * (pseudo_n - 1)
    summary = EstimatorSummary(pseudo_n, estimate, m2,
                               {"estimator": "factorized",
                                "n_values": replicates,
                                "max_cross_correlation": max_corr})
    z = (estimate - spec.closed_form) / se if se > 0 else math.inf
    return ToyMomentResult(spec, summary, z, "factorized")


# -- pinned segment: uniform-in-length moment bound ----------------------


WeightSampler = Callable[[np.random.Generator], float]


def point_mass_weights(value: float) -> WeightSampler:
    """Degenerate pinning law: every weight equals ``value``."""
    if value <= 0:
        raise ValueError("weight must be positive")
    return lambda rng: value


def uniform_weights(lo: float, hi: float) -> WeightSampler:
    if not 0 < lo < hi:
        raise ValueError("need 0 < lo < hi")
    return lambda rng: float(rng.uniform(lo, hi))


def file_weights(path) -> WeightSampler:
    """Empirical pinning law from a file with one positive decimal per line."""
    values = []
    with open(path) as fh:
        for line_no, line in enumerate(fh, start=1):
            text = line.strip()
            if not text:
                continue
            try:
                v = float(text)
            except ValueError as exc:
                raise ValueError(f"{path}:{line_no}: not a decimal: {text!r}") from exc
            if v <= 0:
                raise ValueError(f"{path}:{line_no}: weights must be positive")
            values.append(v)
    if not values:
        raise ValueError(f"{path}: no weights found")
    arr = np.asarray(values)
    return lambda rng: float(arr[rng.integers(arr.size)])


@dataclass(frozen=True)
class ToyBoundReport:
    """Outcome of the uniform-in-n moment experiment on the pinned segment."""

    rows: tuple[dict, ...]              # one per n: n, mean, se, n_replicates
    k_rows: tuple[dict, ...]            # k, count, p_ge, bound, within_ci
    k_censored: int
    mu0_small_mass: float               # empirical mass below eta0
    epsilon0: float
    c0: float                           # ig_moment(p, epsilon)^(2m+1)
    epsilon0_star: float                # 1/(2 c0), where the 2c1 bound applies
    bound: float                        # 2 * ig_moment(p, eta0), reported only
    slope: float
    slope_se: float
    trend_ok: bool
    asserted: bool
    message: str


def toy_uniform_bound_experiment(
    n_grid: Sequence[int],
    m: int,
    epsilon: float,
    mu0: WeightSampler,
    eta0: float,
    epsilon0: float,
    p: int,
    rng: np.random.Generator,
    *,
    replicates: int = 400,
) -> ToyBoundReport:
    """Moments of the pinned segment across lengths, plus the geometric gate.

    For each n the segment [-n, n] is built with pinning weights drawn from
    ``mu0`` at the eligible periodic sites, the potential is sampled, and
    the p-th moment of the partition function is estimated.  The report
    asserts "no upward trend in n" only when the empirical mass of mu0
    below eta0 stays under epsilon0; otherwise it still carries all the
    numbers but refuses the assertion.  K is the index of the first
    nonnegative pinning site at or above the floor; its histogram is held
    against the geometric tail epsilon0^k.
    """
    if epsilon0 <= 0 or epsilon0 >= 1:
        raise ValueError("epsilon0 must lie in (0, 1)")
    if eta0 <= 0 or eta0 > epsilon:
        raise ValueError("need 0 < eta0 <= epsilon")
    period = 2 * m + 1
    rows = []
    k_counts: dict[int, int] = {}
    k_censored = 0
    n_small = 0
    n_weights = 0
    for n in n_grid:
        values = np.empty(replicates)
        for i in range(replicates):
            eligible = _eligible_sites(n, m)
            side = {site: mu0(rng) for site in eligible}
            n_weights += len(side)
            n_small += sum(1 for w in side.values() if w < eta0)
            n_centers = sum(1 for j in range(n + 1) if period * j in side)
            k_val = next((j for j in range(n_centers)
                          if side[period * j] >= eta0), None)
            if k_val is None:
                k_censored += 1
            else:
                k_counts[k_val] = k_counts.get(k_val, 0) + 1
            g = build_toy_graph(n, m, epsilon, side)
            beta = sample_beta(g, rng)
            values[i] = float(psi(g, beta).psi[g.index((0,))]) ** p
        s = summarize(values)
        rows.append({"n": int(n), "mean": s.mean, "se": s.se,
                     "n_replicates": replicates})
    small_mass = n_small / n_weights if n_weights else 0.0
    if len(rows) >= 2:
        slope, slope_se = trend_slope(
            [r["n"] for r in rows], [r["mean"] for r in rows],
            [r["se"] for r in rows])
        trend_ok = slope - SIGMA_POLICY * slope_se <= 0
    else:
        slope, slope_se = math.nan, math.nan
        trend_ok = True  # one length measured: no trend to speak of
    mass_ok = small_mass < epsilon0
    c0 = ig_moment(p, epsilon) ** period
    k_rows = _k_tail_rows(k_counts, k_censored, epsilon0)
    if not mass_ok:
        message = (f"pinning law puts mass {small_mass:.4f} below eta0, "
                   f"epsilon0 = {epsilon0}; no assertion made")
    elif not trend_ok:
        message = (f"upward trend in n: slope {slope:.3e} "
                   f"+/- {slope_se:.3e}")
    else:
        message = "no upward trend in n within the sigma policy"
    return ToyBoundReport(
        rows=tuple(rows),
        k_rows=tuple(k_rows),
        k_censored=k_censored,
        mu0_small_mass=small_mass,
        epsilon0=epsilon0,
        c0=c0,
        epsilon0_star=0.5 / c0 if math.isfinite(c0) else 0.0,
        bound=2.0 * ig_moment(p, eta0),
        slope=slope,
        slope_se=slope_se,
        trend_ok=trend_ok,
        asserted=mass_ok and trend_ok,
        message=message,
    )


def _eligible_sites(n: int, m: int) -> list[int]:
    if n - m - 2 < 0:
        return []
    period = 2 * m + 1
    return [i for i in range(-(n - m - 2), n - m - 1) if i % period == 0]


def _k_tail_rows(k_counts: dict[int, int], censored: int,
                 epsilon0: float) -> list[dict]:
    total = sum(k_counts.values()) + censored
    if total == 0:
        return []
    rows = []
    k_max = max(k_counts) if k_counts else 0
    for k in range(k_max + 1):
        n_ge = sum(c for kk, c in k_counts.items() if kk >= k) + censored
        p_ge = n_ge / total
        se = math.sqrt(p_ge * (1 - p_ge) / total)
        bound = epsilon0 ** k
        rows.append({
            "k": k,
            "count": k_counts.get(k, 0),
            "p_ge": p_ge,
            "bound": bound,
            "within_ci": p_ge <= bound + SIGMA_POLICY * se,
        })
    return rows


# -- surgery chain -------------------------------------------------------


def _slab_centers(n: int, m: int) -> list[int]:
    return _eligible_sites(n, m)


def _slab_interval_of(i: int, centers: Sequence[int], m: int) -> int | None:
    for c in centers:
        if c - m <= i <= c + m:
            return c
    return None


def comparison_chain(
    d: int, n: int, m: int, W: float, *, epsilon: float | None = None
) -> list[WeightedGraph]:
    """The four-stage modification sequence from the full box to slabs.

    Stage 0 is the wired box [-n, n]^d at uniform conductance W.  Stage 1
    deletes every interior edge that is neither inside one of the
    horizontal slabs of width 2m+1 (centred on the periodic eligible
    heights) nor on the vertical line through the origin.  Stage 2
    duplicates the vertical line: the original keeps W - epsilon, the copy
    gets epsilon, and matching vertices are joined by unit cross edges, so
    contracting the copies back recovers stage 1 exactly (the two chain
    weights re-sum to W).  Stage 3 cuts the original line between slabs,
    keeps only the centre cross edges into slabs, and scales every slab
    conductance (cemetery wiring included) down to W - epsilon.

    ``epsilon`` defaults to W/4; any value in (0, W/2) yields a chain in
    which each step only removes or lowers conductances apart from the
    mandated unit cross edges, which is what the convex-order comparison
    needs.  The slab critical value itself is not numerically accessible,
    so the split W = (W - 2 eps) + 2 eps is a stand-in configuration, not
    a claim about criticality.
    """
    if d < 2:
        raise ValueError("the surgery chain needs d >= 2")
    if n - m - 2 < 0:
        raise ValueError("need n >= m + 2 so at least one slab fits")
    if W <= 0:
        raise ValueError("conductance must be positive")
    eps = W / 4.0 if epsilon is None else float(epsilon)
    if not 0 < eps < W / 2:
        raise ValueError("epsilon must lie in (0, W/2)")
    centers = _slab_centers(n, m)
    line = [(0,) * (d - 1) + (i,) for i in range(-n, n + 1)]
    line_set = set(line)

    g0 = build_box_lattice(d, n, W)

    star = g0.index("*")
    drop = []
    for i in range(g0.n_vertices):
        if i == star:
            continue
        for j in g0.neighbors(i):
            if j <= i or j == star:
                continue
            u, v = g0.labels[i], g0.labels[int(j)]
            cu = _slab_interval_of(u[-1], centers, m)
            cv = _slab_interval_of(v[-1], centers, m)
            same_slab = cu is not None and cu == cv
            on_line = u in line_set and v in line_set
            if not (same_slab or on_line):
                drop.append((u, v))
    g1 = transform_comparison_step(g0, "remove_edges", {"edges": drop})

    g2 = transform_comparison_step(
        g1, "duplicate_line",
        {"line": line, "line_value": W - eps, "copy_value": eps})

    cut_line = []
    for i in range(-n, n):
        a, b = (0,) * (d - 1) + (i,), (0,) * (d - 1) + (i + 1,)
        ca = _slab_interval_of(i, centers, m)
        cb = _slab_interval_of(i + 1, centers, m)
        if not (ca is not None and ca == cb):
            cut_line.append((a, b))
    g3 = transform_comparison_step(g2, "remove_edges", {"edges": cut_line})

    off_center = []
    for i in range(-n, n + 1):
        if _slab_interval_of(i, centers, m) is not None and i not in centers:
            u = (0,) * (d - 1) + (i,)
            off_center.append((u, ("dup", *u)))
    g3 = transform_comparison_step(g3, "remove_edges", {"edges": off_center})

    slab_edges = []
    for i in range(g3.n_vertices):
        u = g3.labels[i]
        if not (isinstance(u, tuple) and u and u[0] != "dup"):
            continue
        if _slab_interval_of(u[-1], centers, m) is None:
            continue
        for j in g3.neighbors(i):
            j = int(j)
            v = g3.labels[j]
            if v == "*":
                slab_edges.append((u, v))
            elif j > i and isinstance(v, tuple) and v[0] != "dup" \
                    and _slab_interval_of(v[-1], centers, m) is not None \
                    and g3.conductance[i, j] == W:
                slab_edges.append((u, v))
    g3 = transform_comparison_step(
        g3, "lower_weights", {"edges": slab_edges, "scale": (W - eps) / W})
    return [g0, g1, g2, g3]


CONVEX_TEST_FUNCTIONS: dict[str, Callable[[np.ndarray], np.ndarray]] = {
    "x^2": lambda x: x ** 2,
    "x^3": lambda x: x ** 3,
    "(x-1)^2": lambda x: (x - 1.0) ** 2,
}


def _stage_samples(g: WeightedGraph, replicates: int, seed: int) -> np.ndarray:
    """Partition-function samples at the root, one RNG stream per replicate.

    Only the root's connected component is sampled: the potential law
    factorizes over components, so stranded vertices left behind by the
    surgery cost nothing and change nothing.
    """
    gc = component_of(g, g.labels[g.root])
    root = gc.root
    out = np.empty(replicates)
    for i in range(replicates):
        beta = sample_beta(gc, replicate_rng(seed, i))
        out[i] = float(psi(gc, beta).psi[root])
    return out


def _resolve_seed(rng) -> int:
    if isinstance(rng, (int, np.integer)):
        return int(rng)
    return int(rng.integers(2 ** 62))


@dataclass(frozen=True)
class ConvexOrderReport:
    stage_names: tuple[str, ...]
    stage_sizes: tuple[int, ...]
    means: dict              # f name -> tuple of stage summaries
    steps: dict              # f name -> tuple of per-step dicts
    w_pair: dict | None      # the plain two-conductance comparison
    monotone: bool           # no step decreased beyond the sigma policy

    def step_status(self, f_name: str) -> tuple[str, ...]:
        return tuple(s["status"] for s in self.steps[f_name])


def convex_order_pair(
    d: int, n: int, w_low: float, w_high: float, f_name: str,
    replicates: int, rng,
) -> dict:
    """Paired comparison of E[f(partition fn)] at two conductances.

    Higher conductance should sit lower in convex order, so
    diff = f(value at w_low) - f(value at w_high) has nonnegative mean.
    The same replicate streams feed both boxes, which couples the draws
    enough to sharpen the difference.
    """
    if w_low >= w_high:
        raise ValueError("need w_low < w_high")
    f = CONVEX_TEST_FUNCTIONS[f_name]
    seed = _resolve_seed(rng)
    lo = _stage_samples(build_box_lattice(d, n, w_low), replicates, seed)
    hi = _stage_samples(build_box_lattice(d, n, w_high), replicates, seed)
    diff = summarize(f(lo) - f(hi))
    return {
        "w_low": w_low,
        "w_high": w_high,
        "f": f_name,
        "mean_low": float(f(lo).mean()),
        "mean_high": float(f(hi).mean()),
        "diff_mean": diff.mean,
        "diff_se": diff.se,
        "ordered": diff.mean >= -SIGMA_POLICY * diff.se,
    }


def convex_order_chain_test(
    d: int, n: int, m: int, W: float,
    f_set: Sequence[str],
    replicates: int,
    rng,
    *,
    epsilon: float | None = None,
    w_delta: float = 1.0,
) -> ConvexOrderReport:
    """Statistical check that the surgery chain moves up in convex order.

    Each stage's partition function is sampled with common replicate
    streams, every requested convex f is evaluated, and consecutive stages
    are compared through paired differences.  A step is ``up`` when the
    difference clears the sigma policy, ``flat`` when it is inside it, and
    ``down`` (a violation) when it clears it the wrong way.  The report
    also carries the plain two-conductance comparison at (W, W + w_delta)
    for the first requested f.
    """
    unknown = set(f_set) - set(CONVEX_TEST_FUNCTIONS)
    if unknown:
        raise ValueError(f"unknown test functions {sorted(unknown)}; "
                         f"known: {sorted(CONVEX_TEST_FUNCTIONS)}")
    if not f_set:
        raise ValueError("f_set must not be empty")
    seed = _resolve_seed(rng)
    chain = comparison_chain(d, n, m, W, epsilon=epsilon)
    names = tuple(f"stage{j}" for j in range(len(chain)))
    samples = [_stage_samples(g, replicates, seed) for g in chain]
    means: dict = {}
    steps: dict = {}
    monotone = True
    for f_name in f_set:
        f = CONVEX_TEST_FUNCTIONS[f_name]
        vals = [f(s) for s in samples]
        means[f_name] = tuple(summarize(v) for v in vals)
        rows = []
        for j in range(len(vals) - 1):
            diff = summarize(vals[j + 1] - vals[j])
            z = diff.mean / diff.se if diff.se > 0 else math.inf
            if z > SIGMA_POLICY:
                status = "up"
            elif z < -SIGMA_POLICY:
                status = "down"
                monotone = False
            else:
                status = "flat"
            rows.append({"step": f"{j}->{j + 1}", "diff_mean": diff.mean,
                         "diff_se": diff.se, "z": z, "status": status})
        steps[f_name] = tuple(rows)
    w_pair = convex_order_pair(d, n, W, W + w_delta, list(f_set)[0],
                               replicates, seed)
    if not w_pair["ordered"]:
        monotone = False
    return ConvexOrderReport(
        stage_names=names,
        stage_sizes=tuple(g.n_vertices for g in chain),
        means=means,
        steps=steps,
        w_pair=w_pair,
        monotone=monotone,
    )
