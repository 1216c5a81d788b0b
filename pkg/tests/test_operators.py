import math

import numpy as np
import pytest

from vrjplab.errors import DegenerateInputError, OracleInapplicableError
from vrjplab.graphs import (
    build_box_lattice,
    build_halfspace_box,
    from_edges,
    unwire_absorbing,
)
from vrjplab.operators import boundary_split, green, path_sum_oracle, psi
from vrjplab.potential import sample_beta


def chain2(W=1.0):
    return from_edges(
        [("a",), ("b",)],
        {(("a",), ("b",)): W},
        classes={("a",): "plain", ("b",): "plain"},
    )


class TestGreen:
    def test_scalar_inverse(self):
        g = from_edges([("a",)], {}, classes={("a",): "plain"})
        np.testing.assert_allclose(green(g, {("a",): 2.5}), [[0.4]])

    def test_two_vertex_by_hand(self):
        W, b1, b2 = 0.8, 1.5, 2.0
        g = chain2(W)
        G = green(g, {("a",): b1, ("b",): b2})
        det = b1 * b2 - W * W
        assert G[0, 0] == pytest.approx(b2 / det)
        assert G[0, 1] == pytest.approx(W / det)
        assert G[1, 1] == pytest.approx(b1 / det)

    def test_identity_and_symmetry(self):
        g = build_box_lattice(2, 1, 1.0)
        f = sample_beta(g, np.random.default_rng(1))
        G = green(g, f)
        h = f.h_matrix()
        np.testing.assert_allclose(h @ G, np.eye(len(G)), atol=1e-10)
        np.testing.assert_allclose(G, G.T)
        assert G.min() >= 0

    def test_domain_monotonicity(self):
        # enlarging U can only add paths, so no common entry decreases
        g = unwire_absorbing(build_box_lattice(1, 2, 1.0))
        inner = [(i,) for i in (-1, 0, 1)]
        rng = np.random.default_rng(2)
        for _ in range(5):
            f = sample_beta(g, rng)
            G_small = green(g, f, inner)
            G_big = green(g, f)
            sel = [g.index(lab) for lab in inner]
            np.testing.assert_array_less(-1e-14, G_big[np.ix_(sel, sel)] - G_small)

    def test_non_pd_names_vertex(self):
        g = chain2(1.0)
        with pytest.raises(DegenerateInputError, match=r"\('b',\)"):
            green(g, {("a",): 2.0, ("b",): 0.25})  # second pivot fails


class TestPsi:
    def test_empty_u(self):
        g = build_box_lattice(1, 1, 1.0)
        s = psi(g, {}, [])
        assert np.all(s.psi == 1.0)
        assert s.boundary_mass == {}

    def test_single_wired_vertex(self):
        W = 2.0
        g = build_box_lattice(1, 0, W)  # one vertex, conductance 2W to *
        s = psi(g, {(0,): 5.0})
        assert s.psi[g.index((0,))] == pytest.approx(2 * W / 5.0)
        assert s.boundary_mass["cemetery"] == pytest.approx(2 * W / 5.0)

    def test_psi_is_one_off_u(self):
        g = build_box_lattice(1, 2, 1.0)
        f = sample_beta(g, np.random.default_rng(3))
        s = psi(g, f, [(0,)])
        for lab in [(-2,), (-1,), (1,), (2,), "*"]:
            assert s.psi[g.index(lab)] == 1.0

    def test_martingale_mean(self):
        g = build_box_lattice(2, 1, 1.0)
        rng = np.random.default_rng(4)
        n = 3000
        vals = np.empty(n)
        for i in range(n):
            f = sample_beta(g, rng)
            vals[i] = psi(g, f).psi[g.root]
        se = vals.std(ddof=1) / math.sqrt(n)
        assert abs(vals.mean() - 1.0) < 4 * se

    def test_residual_small_and_routes_agree(self):
        g = build_box_lattice(2, 2, 0.5)
        f = sample_beta(g, np.random.default_rng(5))
        s = psi(g, f)
        assert s.residual < 1e-10 * max(1.0, np.abs(f.beta_active()).max())
        eta_hat = g.eta_effective()
        np.testing.assert_allclose(
            s.green @ eta_hat, s.psi[g.active_indices()], rtol=1e-10
        )


class TestBoundarySplit:
    def test_d1_side_mass_is_zero(self):
        g = build_halfspace_box(1, 2, 1, 1.0)
        f = sample_beta(g, np.random.default_rng(6))
        masses = boundary_split(g, f)
        assert masses["side"] == 0.0  # the side class exists but is edge-less
        assert masses["top"] > 0

    def test_single_column_ratio(self):
        g = build_halfspace_box(2, 1, 1, 1.5)
        f = sample_beta(g, np.random.default_rng(7))
        masses = boundary_split(g, f)
        assert masses["top"] / masses["side"] == pytest.approx(0.5)

    def test_split_sums_to_psi(self):
        g = build_halfspace_box(2, 2, 2, 1.0)
        rng = np.random.default_rng(8)
        for _ in range(5):
            f = sample_beta(g, rng)
            s = psi(g, f)
            total = sum(s.boundary_mass.values())
            assert total == pytest.approx(s.psi[g.root], rel=1e-12)

    def test_requires_root_in_u(self):
        g = build_box_lattice(1, 1, 1.0)
        f = sample_beta(g, np.random.default_rng(9))
        with pytest.raises(ValueError):
            boundary_split(g, f, [(1,)])


class TestPathSumOracle:
    def test_absorbed_start(self):
        g = build_box_lattice(1, 1, 1.0)
        assert path_sum_oracle(g, {}, "*", "cemetery", 0) == (1.0, 0.0)

    def test_single_vertex_one_hop(self):
        W = 2.0
        g = build_box_lattice(1, 0, W)
        val, tail = path_sum_oracle(g, {(0,): 5.0}, (0,), "cemetery", 1)
        assert val == pytest.approx(2 * W / 5.0)
        assert tail == 0.0 or tail < 1e-15  # no return paths exist... bound may not know

    def test_green_entry_bracket(self):
        g = build_box_lattice(2, 1, 1.0)
        f = sample_beta(g, np.random.default_rng(10))
        G = green(g, f)
        act = list(g.active_indices())
        x, y = (0, 0), (1, 1)
        val, tail = path_sum_oracle(g, f, x, y, 60)
        exact = G[act.index(g.index(x)), act.index(g.index(y))]
        assert abs(val - exact) <= tail
        assert tail < 1e-6

    def test_class_mass_bracket(self):
        # 2x2 interior block, each vertex doubly wired: truncation vs solve
        block = [(0, 0), (0, 1), (1, 0), (1, 1)]
        edges = {}
        for a in block:
            for b in block:
                if a < b and abs(a[0] - b[0]) + abs(a[1] - b[1]) == 1:
                    edges[(a, b)] = 1.0
            edges[(a, "*")] = 2.0
        g = from_edges(block + ["*"], edges, classes={"*": "cemetery"},
                       root=(0, 0))
        f = sample_beta(g, np.random.default_rng(11))
        s = psi(g, f)
        val, tail = path_sum_oracle(g, f, (0, 0), "cemetery", 80)
        # the certified bound is for exact arithmetic; allow float round-off
        assert abs(val - s.psi[g.root]) <= tail + 1e-14
        assert abs(val - s.psi[g.root]) < 1e-8

    def test_convention_start_vertex_divides(self):
        # one-hop path weight must be W / beta_start, nothing else
        g = build_box_lattice(1, 0, 1.0)
        val, _ = path_sum_oracle(g, {(0,): 4.0}, (0,), "cemetery", 1)
        assert val == pytest.approx(2.0 / 4.0)

    def test_contraction_guard(self):
        g = chain2(1.0)
        with pytest.raises(OracleInapplicableError):
            path_sum_oracle(g, {("a",): 1.0, ("b",): 1.0}, ("a",), ("b",), 10)

    def test_size_guard(self):
        g = build_box_lattice(2, 2, 1.0)
        f = sample_beta(g, np.random.default_rng(12))
        with pytest.raises(ValueError, match="allow_large"):
            path_sum_oracle(g, f, (0, 0), "cemetery", 10)

    def test_lmax_zero_class_target(self):
        g = build_box_lattice(1, 0, 1.0)
        val, tail = path_sum_oracle(g, {(0,): 3.0}, (0,), "cemetery", 0)
        assert val == 0.0
        assert tail > 0  # whole mass still in the tail
