"""The random potential law on a finite weighted graph.

A field beta on the active (non-absorbing) vertices with density

    (2 pi)^{-n/2} 1_{H > 0} det(H)^{-1/2}
        exp( -1/2 <1, H 1> - 1/2 <eta, H^{-1} eta> + <eta, 1> ),

where H = diag(beta) - W and eta is the effective boundary field (explicit
eta plus wired cemetery mass).  Everything in this module is exact algebra
on that density: the analytic Laplace transform, restriction and
conditioning (both Schur complements), and a sequential sampler that
eliminates one vertex at a time and is exact in law for every elimination
order.

Convention note: Laplace transforms are always of the half-scaled form
E[exp(-1/2 <lambda, beta>)].  A self-conductance W_xx (which only ever
appears through conditioning) enters H on the diagonal once, so it shifts
beta by W_xx and contributes exp(-1/2 W_xx lambda_x) to the transform —
half the weight of a proper edge.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .errors import DegenerateInputError, DegenerateSampleError
from .graphs import Label, WeightedGraph, from_edges
from .inverse_gaussian import sample_ig

PIVOT_RTOL = 1e-12  # pivots below PIVOT_RTOL * max diag(H) are degenerate

__all__ = [
    "BetaField",
    "ConditionalSpec",
    "laplace_analytic",
    "log_density",
    "marginal_params",
    "condition_params",
    "sample_beta_single",
    "sample_beta",
    "serialize_beta",
    "parse_beta",
]


@dataclass(frozen=True, eq=False)
class BetaField:
    """A sampled potential: beta over all vertices, NaN on absorbing ones."""

    graph: WeightedGraph
    beta: np.ndarray
    seed_info: dict = field(default_factory=dict)

    def __post_init__(self):
        b = np.array(self.beta, dtype=float)
        if b.shape != (self.graph.n_vertices,):
            raise ValueError("beta length must match vertex count")
        b.setflags(write=False)
        object.__setattr__(self, "beta", b)

    def beta_active(self) -> np.ndarray:
        return self.beta[self.graph.active_indices()]

    def beta_of(self, label: Label) -> float:
        return float(self.beta[self.graph.index(label)])

    def h_matrix(self) -> np.ndarray:
        """diag(beta) - W on the active block."""
        w = self.graph.active_conductance()
        h = -w.copy()
        np.fill_diagonal(h, self.beta_active() - np.diag(w))
        return h


@dataclass(frozen=True, eq=False)
class ConditionalSpec:
    """Parameters (W-check, eta-check) of the law of the unsampled block.

    ``support`` lists the remaining vertices; ``w_check`` is symmetric with
    self-terms on its diagonal; both arrays dominate the original graph's
    restriction entrywise whenever ``parent`` is supplied.
    """

    support: tuple[Label, ...]
    w_check: np.ndarray
    eta_check: np.ndarray
    parent: WeightedGraph | None = None

    def __post_init__(self):
        w = np.array(self.w_check, dtype=float)
        e = np.array(self.eta_check, dtype=float)
        k = len(self.support)
        if w.shape != (k, k) or e.shape != (k,):
            raise ValueError("w_check/eta_check shapes must match support")
        if not np.allclose(w, w.T, rtol=0, atol=0):
            raise ValueError("w_check must be symmetric")
        if self.parent is not None:
            idx = [self.parent.index(lab) for lab in self.support]
            w0 = self.parent.conductance[np.ix_(idx, idx)]
            if np.any(w < w0 - 1e-9 * (1.0 + w0)):
                raise ValueError("w_check must dominate the original conductances")
            if np.any(e < self.parent.eta[idx] - 1e-9):
                raise ValueError("eta_check must dominate the original eta")
        w.setflags(write=False)
        e.setflags(write=False)
        object.__setattr__(self, "w_check", w)
        object.__setattr__(self, "eta_check", e)

    def as_graph(self) -> WeightedGraph:
        """Package as a stand-alone graph, ready for sampling or nesting."""
        k = len(self.support)
        root = None
        if self.parent is not None and self.parent.root is not None:
            root_lab = self.parent.labels[self.parent.root]
            if root_lab in self.support:
                root = root_lab
        edges = {
            (self.support[i], self.support[j]): self.w_check[i, j]
            for i in range(k)
            for j in range(i, k)
            if self.w_check[i, j] != 0.0
        }
        g = from_edges(
            self.support, edges,
            eta={lab: self.eta_check[i] for i, lab in enumerate(self.support)},
            classes={lab: "plain" for lab in self.support},
            root=root,
            meta={"kind": "conditional"},
        )
        return g


def _lambda_array(g: WeightedGraph, lam) -> np.ndarray:
    act = g.active_indices()
    if isinstance(lam, Mapping):
        out = np.array([float(lam.get(g.labels[i], 0.0)) for i in act])
    else:
        out = np.asarray(lam, dtype=float)
        if out.shape != (act.size,):
            raise ValueError(
                f"lambda must have one entry per active vertex ({act.size})"
            )
    if np.any(out < 0):
        raise ValueError("lambda must be nonnegative")
    return out


def laplace_analytic(g: WeightedGraph, lam) -> float:
    """E[exp(-1/2 <lambda, beta>)], evaluated in closed form.

    ``lam`` is a mapping from active-vertex labels (missing keys read as 0)
    or an array over the active vertices in graph order.
    """
    lam = _lambda_array(g, lam)
    w = g.active_conductance()
    eta = g.eta_effective()
    s = np.sqrt(1.0 + lam)
    edge_term = 0.5 * (s @ w @ s - w.sum())
    log_val = -eta @ (s - 1.0) - edge_term - np.log(s).sum()
    return float(np.exp(log_val))


def log_density(g: WeightedGraph, beta) -> float:
    """Log of the potential density at ``beta``; -inf outside the support.

    ``beta`` is a mapping on active labels or an array over active vertices.
    """
    act = g.active_indices()
    if isinstance(beta, Mapping):
        b = np.array([float(beta[g.labels[i]]) for i in act])
    else:
        b = np.asarray(beta, dtype=float)
        if b.shape != (act.size,):
            raise ValueError("beta must have one entry per active vertex")
    if not np.all(np.isfinite(b)):
        raise ValueError("beta must be finite")
    w = g.active_conductance()
    h = -w.copy()
    np.fill_diagonal(h, b - np.diag(w))
    try:
        chol = np.linalg.cholesky(h)
    except np.linalg.LinAlgError:
        return -np.inf
    n = act.size
    eta = g.eta_effective()
    half_logdet = np.log(np.diag(chol)).sum()
    quad_one = h.sum()  # <1, H 1>
    y = np.linalg.solve(chol, eta)
    quad_eta = y @ y  # <eta, H^-1 eta>
    return float(
        -0.5 * n * np.log(2.0 * np.pi)
        - half_logdet
        - 0.5 * quad_one
        - 0.5 * quad_eta
        + eta.sum()
    )


def marginal_params(g: WeightedGraph, U: Sequence[Label]) -> WeightedGraph:
    """Law of the restriction beta_U, packaged as a graph on U.

    The restriction is again a potential law, with the same conductances
    inside U and boundary field eta_hat = eta_U + (mass of edges leaving U).
    Absorbing vertices count toward the leaving mass, which is exactly the
    cemetery-to-field conversion.
    """
    idx = [g.index(lab) for lab in U]
    if not idx:
        raise ValueError("U must be nonempty")
    absorbing = set(g.absorbing_indices().tolist())
    if absorbing & set(idx):
        raise ValueError("U must consist of non-absorbing vertices")
    comp = [i for i in range(g.n_vertices) if i not in set(idx)]
    w_uu = g.conductance[np.ix_(idx, idx)]
    eta_hat = g.eta[idx] + g.conductance[np.ix_(idx, comp)].sum(axis=1)
    labels = tuple(g.labels[i] for i in idx)
    edges = {
        (labels[a], labels[b]): w_uu[a, b]
        for a in range(len(idx))
        for b in range(a, len(idx))
        if w_uu[a, b] != 0.0
    }
    root = None
    if g.root is not None and g.root in idx:
        root = g.labels[g.root]
    return from_edges(
        labels, edges,
        eta={lab: eta_hat[a] for a, lab in enumerate(labels)},
        classes={lab: "plain" for lab in labels},
        root=root,
        meta={"kind": "marginal", "of": g.meta.get("kind")},
    )


def condition_params(g: WeightedGraph, beta_u: Mapping[Label, float]) -> ConditionalSpec:
    """Law of the unsampled block given beta on U: a Schur complement.

    W-check = W_cc + W_cu (H_uu)^-1 W_uc  (self-terms on the diagonal),
    eta-check = eta_c + W_cu (H_uu)^-1 eta_u,
    where u = U, c = remaining active vertices, and eta is the effective
    field.  Raises DegenerateInputError when (H_beta)_{U,U} is not safely
    positive definite.
    """
    act = g.active_indices()
    act_set = {int(i) for i in act}
    u_idx = []
    for lab in beta_u:
        i = g.index(lab)
        if i not in act_set:
            raise ValueError(f"vertex {lab!r} is absorbing; cannot condition on it")
        u_idx.append(i)
    c_idx = [int(i) for i in act if int(i) not in set(u_idx)]
    eta_eff = np.zeros(g.n_vertices)
    eta_eff[act] = g.eta_effective()
    support = tuple(g.labels[i] for i in c_idx)
    if not u_idx:
        return ConditionalSpec(
            support,
            g.conductance[np.ix_(c_idx, c_idx)],
            eta_eff[c_idx],
            parent=g,
        )
    b = np.array([float(beta_u[g.labels[i]]) for i in u_idx])
    w_uu = g.conductance[np.ix_(u_idx, u_idx)]
    h_uu = -w_uu.copy()
    np.fill_diagonal(h_uu, b - np.diag(w_uu))
    eigs = np.linalg.eigvalsh(h_uu)
    if eigs[0] <= 0 or eigs[-1] / eigs[0] > 1e14:
        raise DegenerateInputError(
            f"(H_beta)_UU not safely positive definite: spectrum "
            f"[{eigs[0]:.3e}, {eigs[-1]:.3e}]"
        )
    w_cu = g.conductance[np.ix_(c_idx, u_idx)]
    solve_wu = np.linalg.solve(h_uu, w_cu.T)  # (u, c)
    w_check = g.conductance[np.ix_(c_idx, c_idx)] + w_cu @ solve_wu
    w_check = 0.5 * (w_check + w_check.T)  # kill round-off asymmetry
    eta_check = eta_eff[c_idx] + w_cu @ np.linalg.solve(h_uu, eta_eff[u_idx])
    return ConditionalSpec(support, w_check, eta_check, parent=g)


def sample_beta_single(w_self: float, eta: float, rng: np.random.Generator) -> float:
    """One draw from the one-vertex potential law with a self-conductance.

    The density forces beta - w_self to follow the loop-free law, so
    beta = w_self + eta / Y with Y ~ IG(1, eta) when eta > 0, and
    beta = w_self + (a chi-square of one degree of freedom) when eta = 0.
    """
    if w_self < 0 or eta < 0:
        raise ValueError("w_self and eta must be nonnegative")
    if eta == 0.0:
        return w_self + 2.0 * rng.standard_gamma(0.5)
    return w_self + eta / sample_ig(1.0, eta, rng)


def _resolve_order(g: WeightedGraph, order, w_live: np.ndarray) -> list[int] | None:
    act = [int(i) for i in g.active_indices()]
    if order is None:
        return list(range(len(act)))
    if order == "min_degree":
        return None  # chosen adaptively during elimination
    pos_of = {g.labels[i]: p for p, i in enumerate(act)}
    seq = [pos_of[lab] for lab in order]
    if sorted(seq) != list(range(len(act))):
        raise ValueError("order must enumerate every active vertex exactly once")
    return seq


def sample_beta(
    g: WeightedGraph,
    rng: np.random.Generator,
    order: Sequence[Label] | str | None = None,
) -> BetaField:
    """Exact draw of the potential by sequential vertex elimination.

    Maintains the conditional parameters (W-check, eta-check) of the
    unsampled set.  The next vertex j is drawn from its one-vertex marginal
    inside the conditional law — self-term W-check_jj, field eta-check_j
    plus the W-check row into the other unsampled vertices — and is then
    folded into the conditioning by a rank-one Schur update with pivot
    beta_j - W-check_jj.  The output law does not depend on ``order``;
    ``order="min_degree"`` picks the sparsest live row first, an explicit
    label sequence forces that sequence.
    """
    act = [int(i) for i in g.active_indices()]
    k = len(act)
    w = g.conductance[np.ix_(act, act)].copy()
    eta = g.eta_effective().copy()
    seq = _resolve_order(g, order, w)
    adaptive = seq is None
    remaining = list(range(k))
    beta_act = np.full(k, np.nan)
    for step in range(k):
        if adaptive:
            j = min(
                remaining,
                key=lambda p: (int((w[p, remaining] > 0).sum()), p),
            )
        else:
            j = seq[step]
        others = [p for p in remaining if p != j]
        e = eta[j] + w[j, others].sum()
        beta_j = sample_beta_single(w[j, j], e, rng)
        pivot = beta_j - w[j, j]
        if pivot <= PIVOT_RTOL * max(1.0, beta_j):
            raise DegenerateSampleError(
                f"pivot {pivot:.3e} at vertex {g.labels[act[j]]!r}"
            )
        beta_act[j] = beta_j
        if others:
            col = w[others, j]
            w[np.ix_(others, others)] += np.outer(col, col) / pivot
            eta[others] += col * (eta[j] / pivot)
        remaining = others
    beta = np.full(g.n_vertices, np.nan)
    beta[act] = beta_act
    return BetaField(g, beta, seed_info={"order": "adaptive" if adaptive else "fixed"})


# -- dump format ---------------------------------------------------------


def serialize_beta(fieldv: BetaField) -> str:
    """Graph serialization plus one ``beta <vertex_id> <value>`` line per
    active vertex."""
    from .graphs import _label_id, serialize_graph

    lines = [serialize_graph(fieldv.graph).rstrip("\n")]
    for i in fieldv.graph.active_indices():
        lines.append(
            f"beta {_label_id(fieldv.graph.labels[i])} {repr(float(fieldv.beta[i]))}"
        )
    return "\n".join(lines) + "\n"


def parse_beta(text: str) -> BetaField:
    from .graphs import _parse_id, parse_graph

    graph_lines = []
    beta_lines = []
    for raw in text.splitlines():
        if raw.strip().startswith("beta "):
            beta_lines.append(raw.strip())
        else:
            graph_lines.append(raw)
    g = parse_graph("\n".join(graph_lines))
    beta = np.full(g.n_vertices, np.nan)
    for line in beta_lines:
        _, vid, val = line.split()
        beta[g.index(_parse_id(vid))] = float(val)
    return BetaField(g, beta, seed_info={"source": "parsed"})
