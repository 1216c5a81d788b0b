"""Finite weighted graphs with classified absorbing boundaries.

Vertices carry a label (a tuple of lattice coordinates, or a string tag for
special vertices such as the cemetery ``*``), a boundary class, and a field
value eta >= 0.  Conductances live in a dense symmetric matrix whose diagonal
is allowed to be positive: self-loops appear when part of the potential is
integrated out, never from the builders here.

Classes:
  ``interior`` / ``plain``  ordinary vertices the process may occupy;
  ``top`` / ``side`` / ``cemetery``  absorbing vertices that collect wired
  boundary edges.  At most one vertex may have class ``cemetery``.

Builders emit vertices in lexicographic coordinate order with absorbing
vertices last, so matrix layouts are reproducible run to run.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

Label = tuple | str

ABSORBING_CLASSES = frozenset({"top", "side", "cemetery"})
_CLASSES = ABSORBING_CLASSES | {"interior", "plain"}


@dataclass(frozen=True, eq=False)
class WeightedGraph:
    labels: tuple[Label, ...]
    conductance: np.ndarray
    eta: np.ndarray
    boundary_class: tuple[str, ...]
    root: int | None = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        n = len(self.labels)
        w = np.array(self.conductance, dtype=float)
        e = np.array(self.eta, dtype=float)
        if w.shape != (n, n):
            raise ValueError(f"conductance must be {n}x{n}, got {w.shape}")
        if e.shape != (n,):
            raise ValueError("eta length must match vertex count")
        if not np.allclose(w, w.T, rtol=0, atol=0):
            raise ValueError("conductance matrix must be exactly symmetric")
        if np.any(w < 0):
            raise ValueError("conductances must be nonnegative")
        if np.any(e < 0):
            raise ValueError("eta must be nonnegative")
        if len(self.boundary_class) != n:
            raise ValueError("boundary_class length must match vertex count")
        bad = set(self.boundary_class) - _CLASSES
        if bad:
            raise ValueError(f"unknown boundary classes: {sorted(bad)}")
        if self.boundary_class.count("cemetery") > 1:
            raise ValueError("at most one cemetery vertex allowed")
        if len(set(self.labels)) != n:
            raise ValueError("vertex labels must be distinct")
        if self.root is not None and not 0 <= self.root < n:
            raise ValueError("root out of range")
        w.setflags(write=False)
        e.setflags(write=False)
        object.__setattr__(self, "conductance", w)
        object.__setattr__(self, "eta", e)
        object.__setattr__(self, "_index", {lab: i for i, lab in enumerate(self.labels)})

    # -- lookups ---------------------------------------------------------

    @property
    def n_vertices(self) -> int:
        return len(self.labels)

    def index(self, label: Label) -> int:
        try:
            return self._index[label]
        except KeyError:
            raise KeyError(f"no vertex labeled {label!r}") from None

    def is_absorbing(self) -> np.ndarray:
        return np.array([c in ABSORBING_CLASSES for c in self.boundary_class])

    def active_indices(self) -> np.ndarray:
        """Indices of non-absorbing vertices, in graph order."""
        return np.flatnonzero(~self.is_absorbing())

    def absorbing_indices(self) -> np.ndarray:
        return np.flatnonzero(self.is_absorbing())

    def eta_effective(self) -> np.ndarray:
        """Boundary field on active vertices: explicit eta plus wired mass.

        Folding every absorbing vertex c into the field via
        eta(x) + sum_c W(x, c) is exact for all partition and potential
        computations; it is the bridge between the wired-graph picture and
        the field picture.
        """
        act = self.active_indices()
        absb = self.absorbing_indices()
        out = self.eta[act].copy()
        if absb.size:
            out += self.conductance[np.ix_(act, absb)].sum(axis=1)
        return out

    def active_conductance(self) -> np.ndarray:
        act = self.active_indices()
        return self.conductance[np.ix_(act, act)]

    def neighbors(self, i: int) -> np.ndarray:
        """Off-diagonal neighbors of vertex i (self-loops excluded)."""
        row = self.conductance[i].copy()
        row[i] = 0.0
        return np.flatnonzero(row > 0)

    def vertex_class(self, label: Label) -> str:
        return self.boundary_class[self.index(label)]

    # -- derived graphs --------------------------------------------------

    def with_meta(self, **extra) -> "WeightedGraph":
        return WeightedGraph(
            self.labels, self.conductance, self.eta, self.boundary_class,
            self.root, {**self.meta, **extra},
        )


def _sort_key(label: Label):
    # lattice tuples first (lexicographic), then everything else by repr,
    # absorbing tags conventionally come out last because builders place
    # them explicitly.
    if isinstance(label, tuple):
        return (0, label)
    return (1, str(label))


def from_edges(
    labels: Sequence[Label],
    edges: Mapping[tuple[Label, Label], float],
    *,
    eta: Mapping[Label, float] | None = None,
    classes: Mapping[Label, str] | None = None,
    root: Label | None = None,
    meta: dict | None = None,
) -> WeightedGraph:
    """Assemble a graph from an edge map; labels keep the given order.

    ``edges`` keys are unordered pairs; listing both orientations with
    conflicting values is an error.  Self-loops use the pair (u, u).
    """
    labels = tuple(labels)
    idx = {lab: i for i, lab in enumerate(labels)}
    n = len(labels)
    w = np.zeros((n, n))
    for (u, v), c in edges.items():
        i, j = idx[u], idx[v]
        if w[i, j] != 0.0 and w[i, j] != c:
            raise ValueError(f"conflicting conductances for edge {(u, v)}")
        w[i, j] = c
        w[j, i] = c
    eta_arr = np.array([(eta or {}).get(lab, 0.0) for lab in labels])
    cls = tuple((classes or {}).get(lab, "interior") for lab in labels)
    return WeightedGraph(
        labels, w, eta_arr, cls,
        None if root is None else idx[root], meta or {},
    )


# -- builders ------------------------------------------------------------


def build_box_lattice(d: int, n: int, W: float) -> WeightedGraph:
    """Box [-n, n]^d with its outer boundary wired into one cemetery.

    Interior nearest-neighbor edges get conductance W.  A vertex with k
    lattice neighbors outside the box gets a single edge of conductance k*W
    to the cemetery ``*``.  Root is the origin; eta is identically zero.
    """
    if d < 1 or n < 0:
        raise ValueError("need d >= 1 and n >= 0")
    if W <= 0:
        raise ValueError("conductance must be positive")
    verts = sorted(itertools.product(range(-n, n + 1), repeat=d))
    labels = [*verts, "*"]
    edges: dict[tuple[Label, Label], float] = {}
    for x in verts:
        for i in range(d):
            for s in (1, -1):
                y = x[:i] + (x[i] + s,) + x[i + 1:]
                if max(abs(c) for c in y) <= n:
                    if s == 1:
                        edges[(x, y)] = W
                else:
                    edges[(x, "*")] = edges.get((x, "*"), 0.0) + W
    return from_edges(
        labels, edges, classes={"*": "cemetery"}, root=(0,) * d,
        meta={"kind": "box_lattice", "d": d, "n": n, "W": W},
    )


def build_halfspace_box(
    d: int, n: int, m: int, W: float, *, side: str = "wired"
) -> WeightedGraph:
    """Half-space box B(n, m) with split absorbing boundary.

    Vertices are x with 0 <= x_d <= n-1 and |x_i| <= m-1 for i < d.  Exits
    through level n are wired into ``*top``; lateral exits are wired into
    ``*side`` when ``side="wired"`` and simply absent when ``side="free"``
    (the ``*side`` vertex is kept, edge-less, so boundary bookkeeping is
    uniform — this is also what happens naturally in d=1).  There is no
    floor boundary: the ambient half-space has nothing below level 0.
    """
    if d < 1 or n < 1 or m < 1:
        raise ValueError("need d >= 1, n >= 1, m >= 1")
    if W <= 0:
        raise ValueError("conductance must be positive")
    if side not in ("wired", "free"):
        raise ValueError("side must be 'wired' or 'free'")
    lateral = itertools.product(range(-(m - 1), m), repeat=d - 1)
    verts = sorted(base + (h,) for base in lateral for h in range(n))
    labels = [*verts, "*top", "*side"]
    edges: dict[tuple[Label, Label], float] = {}
    for x in verts:
        for i in range(d):
            for s in (1, -1):
                y = x[:i] + (x[i] + s,) + x[i + 1:]
                if i == d - 1:
                    if y[-1] < 0:
                        continue  # half-space floor: no vertex below level 0
                    if y[-1] > n - 1:
                        edges[(x, "*top")] = edges.get((x, "*top"), 0.0) + W
                        continue
                elif abs(y[i]) > m - 1:
                    if side == "wired":
                        edges[(x, "*side")] = edges.get((x, "*side"), 0.0) + W
                    continue
                if s == 1:
                    edges[(x, y)] = W
    return from_edges(
        labels, edges,
        classes={"*top": "top", "*side": "side"},
        root=(0,) * d,
        meta={"kind": "halfspace_box", "d": d, "n": n, "m": m, "W": W,
              "side": side},
    )


def build_toy_graph(
    n: int, m: int, epsilon: float, side_weights: Mapping[int, float]
) -> WeightedGraph:
    """Segment [-n, n] with a cemetery, epsilon chain, and pinning edges.

    Nearest neighbors are joined with conductance epsilon, both endpoints
    are tied to the cemetery with conductance epsilon, and each i in
    (2m+1)Z with |i| <= n-m-2 may carry an extra edge (i, *) of conductance
    side_weights[i] > 0.  Eligible positions without a key simply get no
    pinning edge, so thinned variants of the same graph are easy to build.
    """
    if n < 0 or m < 0:
        raise ValueError("need n >= 0 and m >= 0")
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    period = 2 * m + 1
    eligible = {i for i in range(-(n - m - 2), n - m - 1) if i % period == 0} \
        if n - m - 2 >= 0 else set()
    bad = set(side_weights) - eligible
    if bad:
        raise ValueError(
            f"side weights at ineligible positions {sorted(bad)}; "
            f"eligible: {sorted(eligible)}"
        )
    edges: dict[tuple[Label, Label], float] = {}
    for i in range(-n, n):
        edges[((i,), (i + 1,))] = epsilon
    edges[((-n,), "*")] = epsilon
    edges[((n,), "*")] = epsilon
    if n == 0:
        edges[((0,), "*")] = 2 * epsilon  # both end edges land on the same vertex
    for i, wt in side_weights.items():
        if wt <= 0:
            raise ValueError(f"side weight at {i} must be positive")
        edges[((i,), "*")] = edges.get(((i,), "*"), 0.0) + wt
    labels = [*((i,) for i in range(-n, n + 1)), "*"]
    return from_edges(
        labels, edges, classes={"*": "cemetery"}, root=(0,),
        meta={"kind": "toy", "n": n, "m": m, "epsilon": epsilon,
              "eligible": tuple(sorted(eligible))},
    )


def random_connected_graph(
    rng: np.random.Generator,
    n: int = 6,
    density: float = 0.6,
    with_cemetery: bool = False,
    eta_range: tuple[float, float] = (0.0, 1.5),
) -> WeightedGraph:
    """A small random test graph: chain backbone plus random chords.

    Conductances are uniform in (0.2, 2), eta uniform in ``eta_range`` on
    every plain vertex; ``with_cemetery`` wires vertex 0 to a cemetery at
    0.8.  Intended for identity probes, where topology should be
    incidental.  Raise the eta floor when a check needs the killed walk
    to be a strong contraction (truncated path sums, e.g.) — with eta
    near zero the walk is almost conservative and geometric tails decay
    arbitrarily slowly.
    """
    if n < 2:
        raise ValueError("need at least two vertices")
    lo, hi = eta_range
    if not 0.0 <= lo <= hi:
        raise ValueError("eta_range must be ordered and nonnegative")
    labels: list[Label] = [(i,) for i in range(n)]
    edges: dict[tuple[Label, Label], float] = {}
    for i in range(n):
        for j in range(i + 1, n):
            if rng.random() < density:
                edges[(labels[i], labels[j])] = float(rng.uniform(0.2, 2.0))
    for i in range(n - 1):
        edges.setdefault((labels[i], labels[i + 1]), 1.0)
    eta = {lab: float(rng.uniform(lo, hi)) for lab in labels}
    classes: dict[Label, str] = {lab: "plain" for lab in labels}
    if with_cemetery:
        labels = labels + ["*"]
        classes["*"] = "cemetery"
        edges[(labels[0], "*")] = 0.8
    return from_edges(labels, edges, eta=eta, classes=classes, root=(0,),
                      meta={"kind": "random", "n": n})


# -- surgery -------------------------------------------------------------


def wire_boundary(g: WeightedGraph, S: Iterable[Label]) -> WeightedGraph:
    """Contract the vertex set S into a single fresh cemetery ``*``.

    Parallel edges are summed, edges internal to S and eta values on S are
    discarded.  If the graph already has a cemetery it must be part of S
    (two cemeteries cannot coexist).
    """
    S = {g.index(lab) for lab in S}
    if not S:
        raise ValueError("S must be nonempty")
    if len(S) >= g.n_vertices:
        raise ValueError("S must be a proper subset of the vertices")
    for i, c in enumerate(g.boundary_class):
        if c == "cemetery" and i not in S:
            raise ValueError("existing cemetery must be included in S")
    keep = [i for i in range(g.n_vertices) if i not in S]
    n = len(keep)
    w = np.zeros((n + 1, n + 1))
    w[:n, :n] = g.conductance[np.ix_(keep, keep)]
    into = g.conductance[np.ix_(keep, sorted(S))].sum(axis=1)
    w[:n, n] = into
    w[n, :n] = into
    labels = tuple(g.labels[i] for i in keep) + ("*",)
    eta = np.append(g.eta[keep], 0.0)
    cls = tuple(g.boundary_class[i] for i in keep) + ("cemetery",)
    root = keep.index(g.root) if g.root in keep else None
    return WeightedGraph(labels, w, eta, cls, root,
                         {**g.meta, "wired": True})


def unwire_absorbing(g: WeightedGraph) -> WeightedGraph:
    """Reclass every absorbing vertex as ``plain``, keeping all edges.

    The result has no absorbing part: potential sampling then covers every
    vertex, which is what trajectory simulation under a frozen environment
    needs.
    """
    cls = tuple("plain" if c in ABSORBING_CLASSES else c
                for c in g.boundary_class)
    return WeightedGraph(g.labels, g.conductance, g.eta, cls, g.root,
                         {**g.meta, "unwired": True})


def component_of(g: WeightedGraph, label: Label) -> WeightedGraph:
    """Induced subgraph on the connected component of ``label``.

    Absorbing vertices always ride along (edge-less ones included), so
    boundary bookkeeping stays uniform.  Because the potential law
    factorizes over components, sampling on the component is exactly the
    marginal of sampling on the whole graph — surgery chains with stranded
    vertices can be measured without paying for the stranded part.
    """
    start = g.index(label)
    absorbing = g.is_absorbing()
    seen = {start}
    frontier = [start]
    while frontier:
        i = frontier.pop()
        if absorbing[i]:
            continue  # walkers stop there; do not cross to the far side
        for j in g.neighbors(i):
            if j not in seen:
                seen.add(int(j))
                frontier.append(int(j))
    keep = [i for i in range(g.n_vertices) if i in seen or absorbing[i]]
    if len(keep) == g.n_vertices:
        return g
    sub = np.ix_(keep, keep)
    labels = tuple(g.labels[i] for i in keep)
    cls = tuple(g.boundary_class[i] for i in keep)
    root = keep.index(g.root) if g.root in keep else None
    return WeightedGraph(labels, g.conductance[sub], g.eta[keep], cls, root,
                         {**g.meta, "component": g.labels[start]})


def transform_comparison_step(
    g: WeightedGraph, step: str, params: Mapping
) -> WeightedGraph:
    """One surgery step of the slab-comparison chain.

    ``remove_edges``   params: edges=[(u, v), ...]           -> zero them
    ``lower_weights``  params: edges=[(u, v), ...], value=w  -> set to w,
        or scale=s in (0, 1] to multiply each chosen edge instead (what a
        per-edge proportional decrease like "W -> W - eps across mixed
        multiplicities" needs)
    ``duplicate_line`` params: line=[u_-n ... u_n], line_value=a, copy_value=b
        adds a disjoint copy of the line with chain conductance b, lowers
        the original line's chain edges to a, and joins each vertex to its
        copy with the mandated unit cross edge.

    Any other increase of a conductance is rejected, so the sequence of
    steps always moves down in the comparison order.
    """
    if step == "remove_edges":
        w = np.array(g.conductance)
        for u, v in params["edges"]:
            i, j = g.index(u), g.index(v)
            if w[i, j] == 0.0:
                raise ValueError(f"no edge {(u, v)} to remove")
            w[i, j] = w[j, i] = 0.0
        out = WeightedGraph(g.labels, w, g.eta, g.boundary_class, g.root,
                            dict(g.meta))
    elif step == "lower_weights":
        scale = params.get("scale")
        if scale is not None:
            scale = float(scale)
            if not 0 < scale <= 1:
                raise ValueError("scale must lie in (0, 1]")
        else:
            value = float(params["value"])
            if value < 0:
                raise ValueError("value must be nonnegative")
        w = np.array(g.conductance)
        for u, v in params["edges"]:
            i, j = g.index(u), g.index(v)
            if w[i, j] == 0.0:
                raise ValueError(f"no edge {(u, v)} to lower")
            new = w[i, j] * scale if scale is not None else value
            if new > w[i, j]:
                raise ValueError(
                    f"refusing to raise edge {(u, v)}: {w[i, j]} -> {new}"
                )
            w[i, j] = w[j, i] = new
        out = WeightedGraph(g.labels, w, g.eta, g.boundary_class, g.root,
                            dict(g.meta))
    elif step == "duplicate_line":
        out = _duplicate_line(g, params)
    else:
        raise ValueError(f"unknown comparison step {step!r}")
    _check_no_increase(g, out)
    return out


def _duplicate_line(g: WeightedGraph, params: Mapping) -> WeightedGraph:
    line = [g.index(lab) for lab in params["line"]]
    line_value = float(params["line_value"])
    copy_value = float(params["copy_value"])
    if len(line) < 2:
        raise ValueError("line must contain at least two vertices")
    for a, b in zip(line, line[1:]):
        if g.conductance[a, b] == 0.0:
            raise ValueError("line labels must form a path of existing edges")
        if line_value > g.conductance[a, b] or copy_value > g.conductance[a, b]:
            raise ValueError("duplication may only lower line conductances")
    n = g.n_vertices
    k = len(line)
    n_active = int((~g.is_absorbing()).sum())
    # copies go after the active block, absorbing vertices stay last
    order = list(range(n_active)) + [None] * k + list(range(n_active, n))
    new_of_old = {}
    labels: list[Label] = []
    pos = 0
    for slot in order:
        if slot is None:
            old = line[pos]
            lab = g.labels[old]
            labels.append(("dup", *lab) if isinstance(lab, tuple)
                          else ("dup", lab))
            pos += 1
        else:
            new_of_old[slot] = len(labels)
            labels.append(g.labels[slot])
    copy_of = {line[i]: n_active + i for i in range(k)}
    w = np.zeros((n + k, n + k))
    old_idx = [new_of_old[i] for i in range(n)]
    w[np.ix_(old_idx, old_idx)] = g.conductance
    for a, b in zip(line, line[1:]):
        w[new_of_old[a], new_of_old[b]] = w[new_of_old[b], new_of_old[a]] = line_value
        w[copy_of[a], copy_of[b]] = w[copy_of[b], copy_of[a]] = copy_value
    for v in line:
        w[new_of_old[v], copy_of[v]] = w[copy_of[v], new_of_old[v]] = 1.0
    eta = np.zeros(n + k)
    eta[old_idx] = g.eta
    cls: list[str] = ["interior"] * (n + k)
    for i in range(n):
        cls[new_of_old[i]] = g.boundary_class[i]
    root = new_of_old[g.root] if g.root is not None else None
    return WeightedGraph(tuple(labels), w, eta, tuple(cls), root,
                         {**g.meta, "duplicated": tuple(params["line"])})


def _check_no_increase(old: WeightedGraph, new: WeightedGraph) -> None:
    """Entrywise monotonicity on shared vertices, unit cross edges excepted."""
    shared = [lab for lab in old.labels if lab in new._index]
    oi = [old.index(lab) for lab in shared]
    ni = [new.index(lab) for lab in shared]
    w_old = old.conductance[np.ix_(oi, oi)]
    w_new = new.conductance[np.ix_(ni, ni)]
    if np.any(w_new > w_old + 1e-15):
        raise AssertionError("comparison step raised a shared conductance")


# -- serialization -------------------------------------------------------


def _label_id(label: Label) -> str:
    if isinstance(label, str):
        return label
    return ",".join(str(c) for c in label)


def _parse_id(text: str) -> Label:
    if text.startswith("*"):
        return text
    parts = text.split(",")
    out = []
    for p in parts:
        try:
            out.append(int(p))
        except ValueError:
            out.append(p)
    return tuple(out)


def _fmt(x: float) -> str:
    return repr(float(x))


def serialize_graph(g: WeightedGraph) -> str:
    """Line format: header, vertex lines, edge lines, root comment.

    ``graph <n>`` / ``v <id> <class> <eta>`` / ``e <id1> <id2> <w>``.
    Floats are written with repr, whose shortest form round-trips exactly.
    The root is recorded in a trailing ``# root <id>`` comment so readers
    of the plain format can ignore it.
    """
    lines = [f"graph {g.n_vertices}"]
    for lab, cls, eta in zip(g.labels, g.boundary_class, g.eta):
        lines.append(f"v {_label_id(lab)} {cls} {_fmt(eta)}")
    for i in range(g.n_vertices):
        for j in range(i, g.n_vertices):
            if g.conductance[i, j] > 0.0:
                lines.append(
                    f"e {_label_id(g.labels[i])} {_label_id(g.labels[j])} "
                    f"{_fmt(g.conductance[i, j])}"
                )
    if g.root is not None:
        lines.append(f"# root {_label_id(g.labels[g.root])}")
    return "\n".join(lines) + "\n"


def parse_graph(text: str) -> WeightedGraph:
    labels: list[Label] = []
    classes: dict[Label, str] = {}
    eta: dict[Label, float] = {}
    edges: dict[tuple[Label, Label], float] = {}
    root: Label | None = None
    declared = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line:
            continue
        parts = line.split()
        if parts[0] == "#":
            if len(parts) == 3 and parts[1] == "root":
                root = _parse_id(parts[2])
            continue
        kind = parts[0]
        if kind == "graph":
            declared = int(parts[1])
        elif kind == "v":
            if len(parts) != 4:
                raise ValueError(f"line {lineno}: bad vertex line")
            lab = _parse_id(parts[1])
            labels.append(lab)
            classes[lab] = parts[2]
            eta[lab] = float(parts[3])
        elif kind == "e":
            if len(parts) != 4:
                raise ValueError(f"line {lineno}: bad edge line")
            edges[(_parse_id(parts[1]), _parse_id(parts[2]))] = float(parts[3])
        else:
            raise ValueError(f"line {lineno}: unknown record {kind!r}")
    if declared is None:
        raise ValueError("missing 'graph <n>' header")
    if declared != len(labels):
        raise ValueError(
            f"header declares {declared} vertices, found {len(labels)}"
        )
    return from_edges(labels, edges, eta=eta, classes=classes, root=root)
