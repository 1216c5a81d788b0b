"""Renewal structure of level-crossing masses on half-space boxes.

A cut at height k splits a box into the region below the cut, the cut row
itself, and everything above.  Integrating the below-cut region out turns
the cut row into a complete graph with boosted conductances (W-check) plus
self-loops, and the mass M_{k+l} of reaching level k+l factorizes exactly
into M_k times an alpha-weighted slab mass.  The overshoot machinery then
reveals each remaining cut vertex one at a time and tracks the conditional
expectation R_n of the next-level mass, which moves by inverse-Gaussian
multiplicative kicks.

The conditional-expectation functions require boxes built with
``side="free"``: with a wired lateral boundary the restricted masses pick
up lateral exit terms and the clean identities below hold only
approximately.  The renewal product identity itself is pure path algebra
and holds for either lateral convention.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate

from .errors import VrjplabError
from .graphs import Label, WeightedGraph
from .inverse_gaussian import ig_pdf, ig_sf
from .operators import green, psi
from .potential import BetaField, condition_params, sample_beta

RENEWAL_RTOL = 1e-10

__all__ = [
    "RENEWAL_RTOL",
    "RenewalDecomposition",
    "OvershootTrace",
    "cut_vertices",
    "level_mass",
    "exit_distribution",
    "check_conductances",
    "renewal_decompose",
    "conditional_expectation_mcheck",
    "overshoot_trace",
    "resample_mcheck_values",
    "ig_tail_constant",
    "ig_tail_check",
]


# -- cut geometry --------------------------------------------------------


def _box_meta(g: WeightedGraph) -> dict:
    if g.meta.get("kind") != "halfspace_box":
        raise ValueError("renewal machinery needs a half-space box")
    return g.meta


def _require_free_side(g: WeightedGraph) -> None:
    if g.meta.get("side") != "free":
        raise ValueError(
            "conditional cut expectations need a side='free' box; wired "
            "lateral edges add exit mass the cut identities do not see"
        )


def _level(label: Label) -> int:
    return label[-1]


def _active_labels(g: WeightedGraph) -> list[Label]:
    return [g.labels[i] for i in g.active_indices()]


def _below_labels(g: WeightedGraph, k: int) -> list[Label]:
    return [lab for lab in _active_labels(g) if _level(lab) < k]


def cut_vertices(g: WeightedGraph, k: int, order="lex") -> list[Label]:
    """Cut-row vertices at height k, in enumeration order.

    ``order`` is "lex" (lateral lexicographic), "reversed", or an explicit
    permutation of the row.
    """
    meta = _box_meta(g)
    if not 1 <= k <= meta["n"] - 1:
        raise ValueError(f"cut level must lie in [1, {meta['n'] - 1}]")
    row = sorted(
        (lab for lab in _active_labels(g) if _level(lab) == k),
        key=lambda lab: lab[:-1],
    )
    if order == "lex":
        return row
    if order == "reversed":
        return row[::-1]
    explicit = list(order)
    if sorted(explicit, key=lambda lab: lab[:-1]) != row:
        raise ValueError("enumeration must be a permutation of the cut row")
    return explicit


def _mass_into(g, beta, U: list[Label], targets: list[Label]) -> float:
    """Sum over U-paths from the root, times the conductance into targets."""
    gmat = green(g, beta, U)
    u_idx = [g.index(lab) for lab in U]
    t_idx = [g.index(lab) for lab in targets]
    c = g.conductance[np.ix_(u_idx, t_idx)].sum(axis=1)
    return float(gmat[U.index(g.labels[g.root])] @ c)


def level_mass(g: WeightedGraph, beta, j: int) -> float:
    """M_j: the mass of polymers from the root reaching height j.

    Start-vertex-inclusive weights, final vertex unweighted; j = n means
    reaching the top boundary, i.e. the full top-exit mass.
    """
    meta = _box_meta(g)
    if not 1 <= j <= meta["n"]:
        raise ValueError(f"level must lie in [1, {meta['n']}]")
    if j == meta["n"]:
        targets: list[Label] = ["*top"]
    else:
        targets = [lab for lab in _active_labels(g) if _level(lab) == j]
    return _mass_into(g, beta, _below_labels(g, j), targets)


def exit_distribution(g: WeightedGraph, beta, k: int, order="lex") -> dict:
    """alpha_z: where polymers from the root first touch the cut row."""
    row = cut_vertices(g, k, order)
    U = _below_labels(g, k)
    gmat = green(g, beta, U)
    u_idx = [g.index(lab) for lab in U]
    r = gmat[U.index(g.labels[g.root])]
    raw = {z: float(r @ g.conductance[u_idx, g.index(z)]) for z in row}
    total = sum(raw.values())
    if total <= 0:
        raise VrjplabError(f"no mass reaches level {k}")
    return {z: v / total for z, v in raw.items()}


def check_conductances(g: WeightedGraph, beta, k: int) -> WeightedGraph:
    """The graph above the cut after integrating the below-cut region out.

    Cut-row pairs gain W_{xu} G^below(u, v) W_{vy} (diagonal included, as
    self-loops); all other conductances are untouched.  Equals the
    conductance block of ``condition_params`` on the below-cut region.
    """
    meta = _box_meta(g)
    if not 0 <= k <= meta["n"] - 1:
        raise ValueError(f"cut level must lie in [0, {meta['n'] - 1}]")
    below = _below_labels(g, k)
    keep = [lab for lab in _active_labels(g) if _level(lab) >= k]
    keep += [g.labels[i] for i in g.absorbing_indices()]
    keep_idx = [g.index(lab) for lab in keep]
    w = g.conductance[np.ix_(keep_idx, keep_idx)].copy()
    if below:
        gmat = green(g, beta, below)
        b_idx = [g.index(lab) for lab in below]
        bridge = g.conductance[np.ix_(b_idx, keep_idx)]
        w += bridge.T @ gmat @ bridge
    return WeightedGraph(
        labels=tuple(keep),
        conductance=w,
        eta=g.eta[keep_idx],
        boundary_class=tuple(g.boundary_class[i] for i in keep_idx),
        root=None,
        meta={**meta, "kind": "cut_graph", "cut_level": k},
    )


@dataclass(frozen=True)
class RenewalDecomposition:
    """A verified factorization M_{k+l} = M_k * sum_z alpha_z M-check_l(z)."""

    cut_level: int
    alpha: dict
    w_check_graph: WeightedGraph
    m_check: dict
    product_value: float


def _slab_masses(
    gcheck: WeightedGraph, beta, row: list[Label], ell: int, n_levels: int
) -> dict:
    """M-check_l(z): mass from each cut vertex z to height k+l in the
    integrated-out graph.  l = 0 is an empty slab: mass one."""
    if ell == 0:
        return {z: 1.0 for z in row}
    k = _level(row[0])
    slab = [
        lab
        for lab in _active_labels(gcheck)
        if k <= _level(lab) < k + ell
    ]
    if k + ell == n_levels:
        targets: list[Label] = ["*top"]
    else:
        targets = [lab for lab in _active_labels(gcheck) if _level(lab) == k + ell]
    gmat = green(gcheck, beta, slab)
    s_idx = [gcheck.index(lab) for lab in slab]
    t_idx = [gcheck.index(lab) for lab in targets]
    c = gcheck.conductance[np.ix_(s_idx, t_idx)].sum(axis=1)
    vals = gmat @ c
    return {z: float(vals[slab.index(z)]) for z in row}


def renewal_decompose(
    g: WeightedGraph, beta, k: int, ell: int, order="lex"
) -> RenewalDecomposition:
    """Factorize M_{k+l} across the cut at k and verify the identity.

    Raises VrjplabError when the product deviates from the directly
    computed M_{k+l} by more than RENEWAL_RTOL relative — the identity is
    exact, so any miss is a defect, not noise.
    """
    meta = _box_meta(g)
    if ell < 0 or k + ell > meta["n"]:
        raise ValueError("need 0 <= ell and k + ell <= n")
    row = cut_vertices(g, k, order)
    alpha = exit_distribution(g, beta, k, order)
    gap = abs(sum(alpha.values()) - 1.0)
    if gap > 1e-12:
        raise VrjplabError(f"alpha must sum to one (off by {gap:.2e})")
    gcheck = check_conductances(g, beta, k)
    beta_map = {lab: beta.beta_of(lab) for lab in _active_labels(gcheck)}
    m_check = _slab_masses(gcheck, beta_map, row, ell, meta["n"])
    m_k = level_mass(g, beta, k)
    product = m_k * sum(alpha[z] * m_check[z] for z in row)
    direct = level_mass(g, beta, k + ell)
    if abs(product - direct) > RENEWAL_RTOL * abs(direct):
        raise VrjplabError(
            f"renewal identity failed at k={k}, ell={ell}: "
            f"product {product!r} vs direct {direct!r}"
        )
    return RenewalDecomposition(
        cut_level=k,
        alpha=alpha,
        w_check_graph=gcheck,
        m_check=m_check,
        product_value=product,
    )


# -- revealed-cut conditional expectations -------------------------------


def _lambda_labels(g, k: int, n: int, order) -> list[Label]:
    return _below_labels(g, k) + cut_vertices(g, k, order)[:n]


def conditional_expectation_mcheck(
    g: WeightedGraph, beta_on_lambda, z: Label, n: int, *, cut_level: int,
    order="lex",
) -> float:
    """E[M-check_1(z) | beta revealed on Lambda_n].

    Lambda_n is the below-cut region plus the first n enumerated cut
    vertices.  For z outside Lambda_n the expectation is identically one;
    inside, it is the restricted mass psi_{Lambda_n}(z) — one linear solve
    on the revealed region, no sampling.
    """
    _require_free_side(g)
    lam = _lambda_labels(g, cut_level, n, order)
    if z not in lam:
        if z not in cut_vertices(g, cut_level, order):
            raise ValueError(f"{z!r} is not a cut vertex")
        return 1.0
    solve = psi(g, beta_on_lambda, lam)
    return float(solve.psi[g.index(z)])


def resample_mcheck_values(
    g: WeightedGraph,
    beta: BetaField,
    k: int,
    n: int,
    z: Label,
    n_samples: int,
    rng: np.random.Generator,
    order="lex",
) -> np.ndarray:
    """Monte-Carlo oracle for the cut conditional expectations.

    Holds beta fixed on Lambda_n, redraws the rest of the field from its
    exact conditional law, and recomputes the slab mass M-check_1(z) for
    each redraw.  Averages converge to conditional_expectation_mcheck; the
    spread checks second-moment bounds.
    """
    _require_free_side(g)
    lam = _lambda_labels(g, k, n, order)
    lam_full = _lambda_labels(g, k, g.n_vertices, order)
    beta_known = {lab: beta.beta_of(lab) for lab in lam}
    spec = condition_params(g, beta_known)
    z_pos = g.index(z)
    out = np.empty(n_samples)
    for i in range(n_samples):
        redraw = sample_beta(spec.as_graph(), rng)
        combined = dict(beta_known)
        for lab in spec.support:
            combined[lab] = redraw.beta_of(lab)
        out[i] = psi(g, combined, lam_full).psi[z_pos]
    return out


@dataclass(frozen=True)
class OvershootTrace:
    """One replicate's level masses and revealed-cut martingale path.

    ``r_sequence[n]`` is R_n = E[M_{k+1}/M_k | first n cut vertices];
    ``x_path``/``y_path`` split R_{n-1} into the part that flows through
    the next vertex and the rest, so R_n = x_path[n-1] * z_path[n-1] +
    y_path[n-1] with z_path the inverse-Gaussian kick psi_{Lambda_n}(z_n)
    and e_path its conditional IG parameter.
    """

    t: float
    B: float
    martingale_path: tuple[float, ...]
    tau: int | None
    cut_level: int
    enumeration: tuple[Label, ...]
    r_sequence: tuple[float, ...]
    T: int | None
    x_path: tuple[float, ...]
    y_path: tuple[float, ...]
    z_path: tuple[float, ...]
    e_path: tuple[float, ...]


def overshoot_trace(
    g: WeightedGraph,
    beta: BetaField,
    t: float,
    B: float,
    enumeration="lex",
    *,
    cut_level: int | None = None,
) -> OvershootTrace:
    """Reveal the cut row vertex by vertex and record the R_n martingale.

    The cut defaults to one level below the first crossing of t by the
    level masses (clamped inside the box).  T is the first n with
    R_n >= 2B; tau and T are None when never reached.
    """
    _require_free_side(g)
    meta = _box_meta(g)
    n_levels = meta["n"]
    m_path = [level_mass(g, beta, j) for j in range(1, n_levels)]
    tau = next((j for j, m in enumerate(m_path, start=1) if m > t), None)
    if cut_level is None:
        cut_level = min(max((tau if tau is not None else n_levels) - 1, 1),
                        n_levels - 1)
    row = cut_vertices(g, cut_level, enumeration)
    alpha = exit_distribution(g, beta, cut_level, enumeration)
    below = _below_labels(g, cut_level)
    w = g.conductance
    psi_prev = psi(g, beta, below).psi  # full-length; 1 outside the region
    lam_prev = list(below)
    r_seq = [float(sum(alpha.values()))]
    xs, ys, zs, es = [], [], [], []
    for step, j in enumerate(row):
        lam_idx = [g.index(lab) for lab in lam_prev]
        w_col = w[lam_idx, g.index(j)]
        a_vec = green(g, beta, lam_prev) @ w_col
        q = float(w_col @ a_vec)
        b_val = float(w_col @ psi_prev[lam_idx])
        x = alpha[j] + sum(
            alpha[zz] * float(a_vec[lam_prev.index(zz)])
            for zz in row[:step]
        )
        y = r_seq[-1] - x
        lam_now = lam_prev + [j]
        psi_now = psi(g, beta, lam_now).psi
        r_now = sum(alpha[zz] * float(psi_now[g.index(zz)]) for zz in row)
        # conductance out of Lambda_n at j, absorbing vertices included
        out_mask = np.ones(g.n_vertices, dtype=bool)
        out_mask[[g.index(lab) for lab in lam_now]] = False
        eta_hat_j = float(w[g.index(j), out_mask].sum()) + float(
            g.eta[g.index(j)]
        )
        xs.append(x)
        ys.append(y)
        zs.append(float(psi_now[g.index(j)]))
        es.append(eta_hat_j + b_val - q)
        r_seq.append(float(r_now))
        lam_prev, psi_prev = lam_now, psi_now
    stop_T = next((i for i, r in enumerate(r_seq[1:], start=1) if r >= 2 * B),
                  None)
    return OvershootTrace(
        t=t,
        B=B,
        martingale_path=tuple(m_path),
        tau=tau,
        cut_level=cut_level,
        enumeration=tuple(row),
        r_sequence=tuple(r_seq),
        T=stop_T,
        x_path=tuple(xs),
        y_path=tuple(ys),
        z_path=tuple(zs),
        e_path=tuple(es),
    )


# -- inverse-Gaussian tail lemma -----------------------------------------


def ig_tail_constant(lambda0: float) -> float:
    """c(lambda0) = sum_{k>=1} (k+1)^2 exp(-(k-1) lambda0 / 2)."""
    if lambda0 <= 0:
        raise ValueError("lambda0 must be positive")
    total, k = 0.0, 1
    while True:
        term = (k + 1) ** 2 * math.exp(-(k - 1) * lambda0 / 2)
        total += term
        if term < 1e-16 * total or k > 100_000:
            return total
        k += 1


def ig_tail_check(lambda0: float, a_grid, lambda_grid=None) -> list[dict]:
    """Tail-weight table for IG(1, lambda): E[Z^2 1{Z>=A}] / (A^2 P(Z>=A)).

    Each row reports the quadrature ratio and whether it sits below the
    closed-form constant ig_tail_constant(lambda0), which bounds it for
    every lambda >= lambda0 and A >= 2.
    """
    lambdas = [lambda0] if lambda_grid is None else list(lambda_grid)
    bound = ig_tail_constant(lambda0)
    rows = []
    for lam in lambdas:
        if lam < lambda0:
            raise ValueError("lambda grid must stay >= lambda0")
        for a in a_grid:
            if a < 2:
                raise ValueError("tail thresholds start at A = 2")
            num, err = integrate.quad(
                lambda s: s * s * ig_pdf(s, 1.0, lam),
                a,
                np.inf,
                epsabs=1e-14,
                epsrel=1e-11,
            )
            if err > 1e-6 * num + 1e-13:
                raise VrjplabError(
                    f"tail quadrature did not converge at lambda={lam}, A={a}"
                )
            den = a * a * ig_sf(a, 1.0, lam)
            ratio = num / den
            rows.append(
                {
                    "lam": lam,
                    "A": a,
                    "ratio": ratio,
                    "bound": bound,
                    "ok": ratio <= bound,
                }
            )
    return rows
