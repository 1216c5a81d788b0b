"""Positive-definite solves for H = diag(beta) - W and path-sum checks.

The Green matrix on a vertex subset U is the inverse of the restriction
H_{U,U}; the vector psi solves H psi = 0 on U with psi = 1 outside U, and
its value at the root is the polymer partition function (mass of paths from
the root to the complement).  A truncated path-sum oracle recomputes these
quantities combinatorially with a certified geometric tail bound, which is
what the linear-algebra implementations are tested against.

Path-weight convention: a path sigma_0 ... sigma_L is weighted by
prod_{i=0}^{L-1} W_{sigma_i sigma_{i+1}} / beta_{sigma_i} — the start
vertex's beta divides, the final vertex's does not (for Green entries the
final 1/beta_y is applied once on top).  This is the convention forced by
the H psi = 0 characterization.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np
from scipy.linalg import cho_solve, get_lapack_funcs

from .errors import DegenerateInputError, OracleInapplicableError
from .graphs import ABSORBING_CLASSES, Label, WeightedGraph
from .potential import PIVOT_RTOL, BetaField

SOLVE_TOL = 1e-10
ORACLE_SIZE_GUARD = 12

__all__ = [
    "PolymerSolve",
    "green",
    "psi",
    "boundary_split",
    "path_sum_oracle",
]


@dataclass(frozen=True, eq=False)
class PolymerSolve:
    """Green matrix, psi vector, and the root mass split by exit class."""

    u_labels: tuple[Label, ...]
    green: np.ndarray
    psi: np.ndarray  # full length, 1 off U
    boundary_mass: dict
    residual: float

    def psi_of(self, g: WeightedGraph, label: Label) -> float:
        return float(self.psi[g.index(label)])


def _beta_vec(g: WeightedGraph, beta, idx: Sequence[int]) -> np.ndarray:
    if isinstance(beta, BetaField):
        return beta.beta[list(idx)]
    if isinstance(beta, Mapping):
        return np.array([float(beta[g.labels[i]]) for i in idx])
    raise TypeError("beta must be a BetaField or a mapping from labels")

def _u_indices(g: WeightedGraph, U) -> list[int]:
    if U is None:
        return [int(i) for i in g.active_indices()]
    idx = [g.index(lab) for lab in U]
    absorbing = set(g.absorbing_indices().tolist())
    bad = [g.labels[i] for i in idx if i in absorbing]
    if bad:
        raise ValueError(f"U contains absorbing vertices: {bad}")
    return idx


def _h_block(g: WeightedGraph, beta, idx: Sequence[int]) -> np.ndarray:
    b = _beta_vec(g, beta, idx)
    if not np.all(np.isfinite(b)):
        raise ValueError("beta must be finite on U")
    w = g.conductance[np.ix_(idx, idx)]
    h = -w.copy()
    np.fill_diagonal(h, b - np.diag(w))
    return h


def _cholesky_named(h: np.ndarray, labels: Sequence[Label]) -> np.ndarray:
    """Lower Cholesky factor; failures name the vertex whose pivot broke."""
    (potrf,) = get_lapack_funcs(("potrf",), (h,))
    c, info = potrf(h, lower=1, clean=1, overwrite_a=0)
    if info > 0:
        raise DegenerateInputError(
            f"H not positive definite: pivot failed at vertex "
            f"{labels[info - 1]!r} (position {info - 1})"
        )
    if info < 0:
        raise ValueError(f"bad argument {-info} to potrf")
    piv = np.diag(c) ** 2
    floor = PIVOT_RTOL * max(np.diag(h).max(), 1.0)
    if piv.min() <= floor:
        k = int(np.argmin(piv))
        raise DegenerateInputError(
            f"H nearly singular: pivot {piv[k]:.3e} at vertex {labels[k]!r}"
        )
    return c


def green(g: WeightedGraph, beta, U: Sequence[Label] | None = None) -> np.ndarray:
    """Inverse of H restricted to U (all active vertices when U is None).

    Symmetric with nonnegative entries; tiny factorization round-off below
    zero is clamped, anything materially negative is a bug and raises.
    """
    idx = _u_indices(g, U)
    if not idx:
        return np.zeros((0, 0))
    h = _h_block(g, beta, idx)
    labels = [g.labels[i] for i in idx]
    c = _cholesky_named(h, labels)
    ginv = cho_solve((c, True), np.eye(len(idx)))
    ginv = 0.5 * (ginv + ginv.T)
    neg = ginv.min()
    if neg < -1e-10 * max(ginv.max(), 1.0):
        raise DegenerateInputError(
            f"Green matrix has a negative entry {neg:.3e}; H is not an M-matrix here"
        )
    np.clip(ginv, 0.0, None, out=ginv)
    return ginv


def _eta_hat_split(g: WeightedGraph, idx: list[int]) -> dict[str, np.ndarray]:
    """Decompose the boundary field on U by where the mass goes.

    Keys: each absorbing class with edges from U, ``active`` for edges to
    non-absorbing vertices outside U, ``field`` for explicit eta on U.
    """
    comp = [i for i in range(g.n_vertices) if i not in set(idx)]
    out: dict[str, np.ndarray] = {}
    if comp:
        comp_cls = [g.boundary_class[i] for i in comp]
        for cls in sorted(set(comp_cls)):
            cols = [c for c, k in zip(comp, comp_cls) if k == cls]
            mass = g.conductance[np.ix_(idx, cols)].sum(axis=1)
            key = cls if cls in ABSORBING_CLASSES else "active"
            out[key] = out.get(key, 0.0) + mass
    fieldv = g.eta[idx]
    if np.any(fieldv > 0):
        out["field"] = out.get("field", 0.0) + fieldv
    return out


def psi(g: WeightedGraph, beta, U: Sequence[Label] | None = None) -> PolymerSolve:
    """Solve H psi = 0 on U with psi = 1 outside U.

    Equivalently psi_U = G eta_hat with eta_hat the marginal boundary field;
    both routes are computed and compared at 1e-10.  One step of iterative
    refinement is applied if the raw residual exceeds tolerance.
    boundary_mass splits psi(root) by exit class when the root is in U.
    """
    idx = _u_indices(g, U)
    full = np.ones(g.n_vertices)
    if not idx:
        return PolymerSolve((), np.zeros((0, 0)), full, {}, 0.0)
    h = _h_block(g, beta, idx)
    labels = tuple(g.labels[i] for i in idx)
    c = _cholesky_named(h, labels)
    parts = _eta_hat_split(g, idx)
    eta_hat = sum(parts.values())
    if np.isscalar(eta_hat):  # no boundary at all: psi = 0 on U, H psi = 0
        eta_hat = np.zeros(len(idx))
    psi_u = cho_solve((c, True), eta_hat)
    resid = np.abs(h @ psi_u - eta_hat).max()
    scale = max(np.abs(eta_hat).max(), 1.0)
    if resid > SOLVE_TOL * scale:
        psi_u = psi_u + cho_solve((c, True), eta_hat - h @ psi_u)
        resid = np.abs(h @ psi_u - eta_hat).max()
    ginv = cho_solve((c, True), np.eye(len(idx)))
    ginv = 0.5 * (ginv + ginv.T)
    np.clip(ginv, 0.0, None, out=ginv)
    alt = ginv @ eta_hat
    if not np.allclose(alt, psi_u, rtol=1e-8, atol=1e-10 * scale):
        raise DegenerateInputError(
            "solve and explicit-inverse routes disagree; H is too ill-conditioned"
        )
    full[idx] = psi_u
    boundary_mass = {}
    if g.root is not None and g.root in idx:
        r = idx.index(g.root)
        grow = ginv[r]
        boundary_mass = {
            key: float(grow @ mass) for key, mass in sorted(parts.items())
        }
    return PolymerSolve(labels, ginv, full, boundary_mass, float(resid))


def boundary_split(
    g: WeightedGraph, beta, U: Sequence[Label] | None = None
) -> dict:
    """Root mass by exit class: M^class = (G eta_hat^class)(root)."""
    if g.root is None:
        raise ValueError("graph has no root")
    solve = psi(g, beta, U)
    if not solve.boundary_mass and len(solve.u_labels):
        raise ValueError("root must belong to U for a boundary split")
    return solve.boundary_mass


def path_sum_oracle(
    g: WeightedGraph,
    beta,
    x: Label,
    target,
    Lmax: int,
    *,
    allow_large: bool = False,
) -> tuple[float, float]:
    """Truncated sum over paths from x, with a certified tail bound.

    ``target`` is either a vertex label (Green-entry expansion, the final
    vertex contributing 1/beta once) or a boundary-class name (partition
    mass, final hop into the class included, its beta not).  Paths stay in
    the active set; path length counts edges, self-loops included.  Returns
    (truncated value, tail bound): the exact quantity lies within
    tail_bound of the returned value, provided the transfer operator is a
    strict contraction — otherwise OracleInapplicableError.

    Deliberately brute force; guarded to small graphs unless
    ``allow_large=True``.
    """
    idx = _u_indices(g, None)
    if len(idx) > ORACLE_SIZE_GUARD and not allow_large:
        raise ValueError(
            f"{len(idx)} active vertices exceeds the oracle guard "
            f"({ORACLE_SIZE_GUARD}); pass allow_large=True to override"
        )
    if Lmax < 0:
        raise ValueError("Lmax must be nonnegative")
    class_target = isinstance(target, str) and target in ABSORBING_CLASSES
    xi = g.index(x)
    if g.boundary_class[xi] in ABSORBING_CLASSES:
        if class_target and g.boundary_class[xi] == target:
            return 1.0, 0.0  # empty path, already absorbed
        return 0.0, 0.0
    b = _beta_vec(g, beta, idx)
    if np.any(b <= 0):
        raise OracleInapplicableError("oracle needs beta > 0 on the active set")
    w = g.conductance[np.ix_(idx, idx)]
    # symmetrized transfer operator: spectral norm certifies the tail
    d_half = np.sqrt(b)
    s = w / np.outer(d_half, d_half)
    sigma = float(np.linalg.norm(s, 2))
    if sigma >= 1.0 - 1e-9:
        raise OracleInapplicableError(
            f"transfer operator norm {sigma:.12f} is not a strict contraction"
        )
    pos = {int(i): p for p, i in enumerate(idx)}
    px = pos[xi]
    if class_target:
        cols = [i for i in g.absorbing_indices() if g.boundary_class[i] == target]
        rhs = g.conductance[np.ix_(idx, cols)].sum(axis=1) if cols else np.zeros(len(idx))
        v = rhs / b
        n_powers = Lmax - 1  # final hop consumes one edge of the budget
    else:
        ti = g.index(target)
        if ti not in pos:
            raise ValueError("vertex target must be active")
        v = np.zeros(len(idx))
        v[pos[ti]] = 1.0 / b[pos[ti]]
        n_powers = Lmax
    total = 0.0
    cur = v.copy()
    if n_powers >= 0:
        total += cur[px]
        t = w / b[:, None]  # T = D^-1 W acting on the left of v-vectors
        for _ in range(n_powers):
            cur = t @ cur
            total += cur[px]
    tail = (
        (1.0 / d_half[px])
        * sigma ** (n_powers + 1)
        / (1.0 - sigma)
        * float(np.linalg.norm(d_half * v))
    )
    return float(total), float(tail)
