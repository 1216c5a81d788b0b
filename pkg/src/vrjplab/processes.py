"""Continuous-time simulators: the reinforced jump process and its quenched
Markov representation.

The reinforced process jumps from x to a neighbor y with rate
W_{xy} (1 + L_y(t)), where L_y is the local time of y.  While the process
sits at x, every L_y with y != x is frozen, so each sojourn is a single
exponential race with constant rates — no event queue needed.

The quenched process is an ordinary Markov jump process in a frozen
potential: rate W_{ij} G(i0, j) / G(i0, i), with G the full-graph Green
matrix of the potential.  Annealing it over the potential reproduces the
reinforced process up to time change, so the two simulators are only ever
compared through time-change-invariant functionals (exit classes, discrete
skeletons), never through clock-time laws.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateInputError
from .estimators import summarize
from .graphs import ABSORBING_CLASSES, Label, WeightedGraph, wire_boundary
from .operators import boundary_split, green
from .potential import BetaField, sample_beta
from .seeding import replicate_rng

DEFAULT_JUMP_BUDGET = 1_000_000

__all__ = [
    "StopRule",
    "Trajectory",
    "simulate_vrjp",
    "simulate_quenched",
    "quenched_rate_matrix",
    "quenched_exit_solve",
    "exit_probability_annealed",
    "trajectory_rows",
]


@dataclass(frozen=True)
class StopRule:
    """When to end a trajectory; at least one criterion must be set.

    ``exit_classes`` stops on arrival at a vertex of one of the named
    boundary classes; ``time_horizon`` truncates the clock; ``max_jumps``
    is a hard budget that marks the trajectory truncated when exhausted.
    """

    exit_classes: frozenset[str] | None = None
    time_horizon: float | None = None
    max_jumps: int = DEFAULT_JUMP_BUDGET

    def __post_init__(self):
        if self.exit_classes is not None:
            object.__setattr__(self, "exit_classes", frozenset(self.exit_classes))
            bad = self.exit_classes - ABSORBING_CLASSES
            if bad:
                raise ValueError(f"unknown exit classes {sorted(bad)}")
        if self.time_horizon is not None and self.time_horizon <= 0:
            raise ValueError("time_horizon must be positive")
        if self.max_jumps < 1:
            raise ValueError("max_jumps must be at least 1")


@dataclass(frozen=True, eq=False)
class Trajectory:
    """Arrival events, terminal local times, and how the run ended."""

    events: tuple[tuple[Label, float], ...]
    local_time: dict
    exit_class: str | None
    clock: float
    truncated: bool = False

    def n_jumps(self) -> int:
        return len(self.events) - 1


def _run_jump_process(
    g: WeightedGraph,
    start_idx: int,
    rate_fn,
    stop: StopRule,
    rng: np.random.Generator,
) -> Trajectory:
    """Shared engine: rate_fn(x, local_time) -> rate vector over vertices."""
    n = g.n_vertices
    local = np.zeros(n)
    t = 0.0
    x = start_idx
    events = [(g.labels[x], 0.0)]
    exit_class = None
    truncated = False
    for _ in range(stop.max_jumps):
        rates = rate_fn(x, local)
        total = rates.sum()
        if total <= 0:
            raise DegenerateInputError(
                f"no outgoing rate at vertex {g.labels[x]!r}"
            )
        hold = rng.exponential(1.0 / total)
        if stop.time_horizon is not None and t + hold >= stop.time_horizon:
            local[x] += stop.time_horizon - t
            t = stop.time_horizon
            break
        t += hold
        local[x] += hold
        x = int(rng.choice(n, p=rates / total))
        events.append((g.labels[x], t))
        if stop.exit_classes and g.boundary_class[x] in stop.exit_classes:
            exit_class = g.boundary_class[x]
            break
    else:
        truncated = True
    return Trajectory(
        tuple(events),
        {g.labels[i]: float(local[i]) for i in range(n) if local[i] > 0.0},
        exit_class,
        float(t),
        truncated,
    )


def simulate_vrjp(
    g: WeightedGraph,
    start: Label,
    stop: StopRule,
    rng: np.random.Generator,
) -> Trajectory:
    """Simulate the reinforced process from ``start`` until ``stop``."""
    s = g.index(start)
    if g.boundary_class[s] in ABSORBING_CLASSES:
        raise ValueError("start vertex must not be absorbing")
    if stop.exit_classes is None and stop.time_horizon is None:
        raise ValueError("stop rule needs an exit class set or a horizon")
    w = g.conductance

    def rates(x, local):
        r = w[x] * (1.0 + local)
        r[x] = 0.0  # builders have no self-loops; a loop is not a jump
        return r

    return _run_jump_process(g, s, rates, stop, rng)


def quenched_rate_matrix(
    g: WeightedGraph, beta: BetaField, i0: Label
) -> np.ndarray:
    """Rate matrix W_{ij} G(i0,j)/G(i0,i) over all vertices of g.

    ``beta`` must live on a graph with the same labels, all active (an
    unwired twin of g is the usual source), so the full-matrix Green row
    at i0 exists.
    """
    bg = beta.graph
    if set(bg.labels) != set(g.labels):
        raise ValueError("beta field must cover exactly the graph's vertices")
    if bg.absorbing_indices().size:
        raise ValueError(
            "beta must be sampled on an unwired graph (no absorbing vertices)"
        )
    gfull = green(bg, beta)
    order = [bg.index(lab) for lab in g.labels]
    grow = gfull[np.ix_(order, order)][g.index(i0), :]
    if np.any(grow <= 0):
        raise DegenerateInputError("Green row must be strictly positive")
    rates = g.conductance * grow[None, :] / grow[:, None]
    np.fill_diagonal(rates, 0.0)
    return rates


def simulate_quenched(
    g: WeightedGraph,
    beta: BetaField,
    i0: Label,
    stop: StopRule,
    rng: np.random.Generator,
) -> Trajectory:
    """Markov jump process in the frozen potential, started at i0."""
    s = g.index(i0)
    if g.boundary_class[s] in ABSORBING_CLASSES:
        raise ValueError("start vertex must not be absorbing")
    rate_matrix = quenched_rate_matrix(g, beta, i0)

    def rates(x, local):
        return rate_matrix[x]

    return _run_jump_process(g, s, rates, stop, rng)


def quenched_exit_solve(
    split: WeightedGraph, beta_full: BetaField, i0: Label | None = None
) -> dict:
    """Exact exit-class distribution of the quenched chain, by linear solve.

    ``split`` is a graph with classified absorbing vertices (e.g. a
    half-space box with separate top and side cemeteries).  The chain is
    run on the merged graph — all absorbing vertices contracted to one
    cemetery, which is the construction under which exit probabilities
    reduce to partition-mass ratios — and a jump into the merged cemetery
    is attributed to a class proportionally to that vertex's conductance
    into the class (exact thinning of the merged edge).

    ``beta_full`` must be a field on the unwired merged graph (see
    ``exit_probability_annealed`` for how to produce one).
    """
    absorbing = [split.labels[i] for i in split.absorbing_indices()]
    if not absorbing:
        raise ValueError("split graph needs absorbing vertices")
    merged = wire_boundary(split, absorbing)
    i0 = merged.labels[merged.root] if i0 is None else i0
    rates = quenched_rate_matrix(merged, beta_full, i0)
    star = merged.index("*")
    interior = [i for i in range(merged.n_vertices) if i != star]
    p = rates / rates.sum(axis=1, keepdims=True)
    # expected visit counts of the absorbed chain started at i0
    pbb = p[np.ix_(interior, interior)]
    e0 = np.zeros(len(interior))
    e0[interior.index(merged.index(i0))] = 1.0
    visits = np.linalg.solve(np.eye(len(interior)) - pbb.T, e0)
    hit = visits * p[interior, star]  # P(absorption happens from each x)
    # thin each merged edge by its class composition in the split graph
    out: dict[str, float] = {}
    for pos, i in enumerate(interior):
        lab = merged.labels[i]
        si = split.index(lab)
        for a in absorbing:
            cls = split.vertex_class(a)
            mass = split.conductance[si, split.index(a)]
            if mass > 0:
                share = mass / merged.conductance[i, star]
                out[cls] = out.get(cls, 0.0) + float(hit[pos] * share)
    for i in split.absorbing_indices():
        out.setdefault(split.boundary_class[i], 0.0)
    return out


def exit_probability_annealed(
    g: WeightedGraph,
    k: int,
    master_seed: int,
    *,
    n_side_runs: int | None = None,
) -> dict:
    """Two independent estimators of the side-exit probability.

    (a) averages the partition-mass ratio M_side / M over k potential
    replicates on the box; (b) runs the reinforced process and counts side
    exits over ``n_side_runs`` trajectories (default k).  The two numbers
    estimate the same quantity — that identity is the content of the
    annealed representation — and are returned as summaries with CIs,
    along with the trajectory truncation rate (a truncation rate above 1%
    marks estimator (b) invalid).
    """
    if g.root is None:
        raise ValueError("box must have a root")
    classes = {g.boundary_class[i] for i in g.absorbing_indices()}
    if "top" not in classes or "side" not in classes:
        raise ValueError("need a half-space box with top and side classes")
    ratios = np.empty(k)
    for i in range(k):
        rng = replicate_rng(master_seed, i)
        f = sample_beta(g, rng)
        masses = boundary_split(g, f)
        total = sum(masses.values())
        ratios[i] = masses.get("side", 0.0) / total
    n_runs = k if n_side_runs is None else n_side_runs
    stop = StopRule(exit_classes=frozenset({"top", "side"}))
    root_label = g.labels[g.root]
    hits = np.empty(n_runs)
    truncated = 0
    for i in range(n_runs):
        rng = replicate_rng(master_seed, k + i)
        traj = simulate_vrjp(g, root_label, stop, rng)
        if traj.truncated:
            truncated += 1
            hits[i] = np.nan
        else:
            hits[i] = 1.0 if traj.exit_class == "side" else 0.0
    ok = hits[~np.isnan(hits)]
    truncation_rate = truncated / n_runs
    return {
        "mass_ratio": summarize(ratios),
        "trajectory": summarize(ok) if ok.size else None,
        "truncation_rate": truncation_rate,
        "trajectory_valid": truncation_rate <= 0.01,
    }


def trajectory_rows(replicate: int, traj: Trajectory) -> list[tuple]:
    """Rows (replicate, event index, vertex id, time) for CSV export."""
    from .graphs import _label_id

    return [
        (replicate, k, _label_id(v), t) for k, (v, t) in enumerate(traj.events)
    ]
