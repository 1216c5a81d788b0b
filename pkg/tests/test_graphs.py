import itertools

import numpy as np
import pytest

from vrjplab.graphs import (
    build_box_lattice,
    build_halfspace_box,
    build_toy_graph,
    from_edges,
    parse_graph,
    serialize_graph,
    transform_comparison_step,
    unwire_absorbing,
    wire_boundary,
)


def boundary_edge_count(d, n):
    """Brute force: number of lattice edges leaving [-n, n]^d."""
    count = 0
    for x in itertools.product(range(-n, n + 1), repeat=d):
        for i in range(d):
            for s in (1, -1):
                y = x[:i] + (x[i] + s,) + x[i + 1:]
                if max(abs(c) for c in y) > n:
                    count += 1
    return count


class TestBoxLattice:
    def test_d1_n0(self):
        g = build_box_lattice(1, 0, 2.0)
        assert g.labels == ((0,), "*")
        assert g.conductance[0, 1] == 4.0  # two outside neighbors collapsed
        assert g.boundary_class == ("interior", "cemetery")
        assert g.root == 0

    def test_d2_n1_corner_and_edge_weights(self):
        g = build_box_lattice(2, 1, 1.0)
        assert g.n_vertices == 10
        star = g.index("*")
        assert g.conductance[g.index((1, 1)), star] == 2.0
        assert g.conductance[g.index((0, 1)), star] == 1.0
        assert g.conductance[g.index((0, 0)), star] == 0.0

    def test_d3_n2_total_boundary_mass(self):
        # frozen: the 5^3 box has 150 outgoing edges (6 faces of 25)
        assert boundary_edge_count(3, 2) == 150
        g = build_box_lattice(3, 2, 0.5)
        assert g.n_vertices == 126
        star = g.index("*")
        assert g.conductance[:, star].sum() == pytest.approx(0.5 * 150)

    def test_symmetry_and_eta(self):
        g = build_box_lattice(2, 2, 0.7)
        assert np.array_equal(g.conductance, g.conductance.T)
        assert np.all(g.eta == 0.0)
        np.testing.assert_allclose(
            g.eta_effective(),
            g.conductance[g.active_indices(), g.index("*")],
        )

    def test_rejects_bad_conductance(self):
        with pytest.raises(ValueError):
            build_box_lattice(2, 1, 0.0)
        with pytest.raises(ValueError):
            build_box_lattice(0, 1, 1.0)


class TestHalfspaceBox:
    def test_d1_is_a_chain_with_empty_side(self):
        g = build_halfspace_box(1, 2, 1, 1.0)
        assert g.labels == ((0,), (1,), "*top", "*side")
        side = g.index("*side")
        assert np.all(g.conductance[side] == 0.0)
        assert g.conductance[g.index((1,)), g.index("*top")] == 1.0
        assert g.conductance[g.index((0,)), g.index((1,))] == 1.0

    def test_d2_strip(self):
        g = build_halfspace_box(2, 2, 2, 1.0)
        lattice = [lab for lab in g.labels if isinstance(lab, tuple)]
        assert len(lattice) == 6  # 3 columns x 2 levels
        top, side = g.index("*top"), g.index("*side")
        assert np.count_nonzero(g.conductance[:, top]) == 3
        assert np.count_nonzero(g.conductance[:, side]) == 4
        assert g.conductance[:, side].sum() == 4.0

    def test_single_column(self):
        g = build_halfspace_box(2, 1, 1, 2.0)
        assert g.conductance[g.index((0, 0)), g.index("*top")] == 2.0
        assert g.conductance[g.index((0, 0)), g.index("*side")] == 4.0

    def test_free_side_keeps_vertex_drops_edges(self):
        wired = build_halfspace_box(2, 3, 2, 1.0)
        free = build_halfspace_box(2, 3, 2, 1.0, side="free")
        assert free.labels == wired.labels
        side = free.index("*side")
        assert np.all(free.conductance[side] == 0.0)
        # everything except the side column/row agrees
        mask = np.ones(free.n_vertices, bool)
        mask[side] = False
        np.testing.assert_array_equal(
            free.conductance[np.ix_(mask, mask)],
            wired.conductance[np.ix_(mask, mask)],
        )

    def test_no_floor_boundary(self):
        g = build_halfspace_box(2, 3, 2, 1.0)
        x = g.index((0, 0))
        # level-0 vertex: neighbors are in-box only, plus possible side exits
        assert g.conductance[x, g.index("*top")] == 0.0
        row_sum = g.conductance[x].sum()
        assert row_sum == 3.0  # (-1,0), (1,0), (0,1); no (0,-1)


class TestToyGraph:
    def test_smallest(self):
        g = build_toy_graph(1, 0, 1.0, {})
        assert g.labels == ((-1,), (0,), (1,), "*")
        star = g.index("*")
        assert g.conductance[g.index((-1,)), star] == 1.0
        assert g.conductance[g.index((1,)), star] == 1.0
        assert g.meta["eligible"] == ()

    def test_one_pinning_edge(self):
        g = build_toy_graph(4, 1, 0.5, {0: 2.0})
        assert g.meta["eligible"] == (0,)
        assert g.conductance[g.index((0,)), g.index("*")] == 2.0
        assert g.conductance[g.index((1,)), g.index((2,))] == 0.5

    def test_eligible_positions_n7_m1(self):
        g = build_toy_graph(7, 1, 1.0, {-3: 1.0, 0: 1.0, 3: 1.0})
        assert g.meta["eligible"] == (-3, 0, 3)

    def test_rejects_ineligible_key(self):
        with pytest.raises(ValueError, match="ineligible"):
            build_toy_graph(4, 1, 0.5, {1: 2.0})
        with pytest.raises(ValueError):
            build_toy_graph(4, 1, 0.5, {0: -1.0})


def triangle():
    return from_edges(
        ["a", "b", "c"],
        {("a", "b"): 1.0, ("b", "c"): 1.0, ("a", "c"): 1.0},
    )


class TestWireBoundary:
    def test_single_vertex_is_relabeling(self):
        g = triangle()
        h = wire_boundary(g, ["c"])
        assert h.labels == ("a", "b", "*")
        assert h.conductance[h.index("a"), h.index("*")] == 1.0
        assert h.boundary_class[-1] == "cemetery"

    def test_parallel_edges_sum(self):
        h = wire_boundary(triangle(), ["b", "c"])
        assert h.n_vertices == 2
        assert h.conductance[0, 1] == 2.0

    def test_reproduces_box_builder(self):
        W = 0.75
        full = sorted(itertools.product(range(-2, 3), repeat=2))
        edges = {}
        for x in full:
            for i in range(2):
                y = x[:i] + (x[i] + 1,) + x[i + 1:]
                if max(abs(c) for c in y) <= 2:
                    edges[(x, y)] = W
        g = from_edges(full, edges, root=(0, 0))
        shell = [x for x in full if max(abs(c) for c in x) == 2]
        wired = wire_boundary(g, shell)
        built = build_box_lattice(2, 1, W)
        assert wired.labels == built.labels
        np.testing.assert_allclose(wired.conductance, built.conductance)
        assert wired.boundary_class == built.boundary_class
        assert wired.root == built.root

    def test_mass_conservation(self):
        rng = np.random.default_rng(3)
        for _ in range(5):
            n = 6
            w = rng.random((n, n))
            w = np.triu(w, 1)
            w = w + w.T
            g = from_edges(
                [(i,) for i in range(n)],
                {((i,), (j,)): w[i, j] for i in range(n) for j in range(i + 1, n)},
            )
            S = [(0,), (1,)]
            h = wire_boundary(g, S)
            cross = w[2:, :2].sum()
            assert h.conductance[:-1, h.index("*")].sum() == pytest.approx(cross)

    def test_rejects_bad_sets(self):
        g = triangle()
        with pytest.raises(ValueError):
            wire_boundary(g, [])
        with pytest.raises(ValueError):
            wire_boundary(g, ["a", "b", "c"])
        h = wire_boundary(g, ["c"])
        with pytest.raises(ValueError, match="cemetery"):
            wire_boundary(h, ["a"])  # existing cemetery left outside S


class TestComparisonSteps:
    def test_remove_nothing_is_identity(self):
        g = build_toy_graph(2, 0, 1.0, {})
        h = transform_comparison_step(g, "remove_edges", {"edges": []})
        np.testing.assert_array_equal(g.conductance, h.conductance)
        assert g.labels == h.labels

    def test_remove_and_absent_edge(self):
        g = triangle()
        h = transform_comparison_step(
            g, "remove_edges", {"edges": [("a", "b")]}
        )
        assert h.conductance[h.index("a"), h.index("b")] == 0.0
        with pytest.raises(ValueError):
            transform_comparison_step(h, "remove_edges", {"edges": [("a", "b")]})

    def test_lower_weights(self):
        g = triangle()
        h = transform_comparison_step(
            g, "lower_weights", {"edges": [("a", "b"), ("b", "c")], "value": 0.25}
        )
        assert h.conductance[h.index("a"), h.index("b")] == 0.25
        assert h.conductance[h.index("a"), h.index("c")] == 1.0
        with pytest.raises(ValueError, match="raise"):
            transform_comparison_step(
                g, "lower_weights", {"edges": [("a", "b")], "value": 2.0}
            )

    def test_duplicate_line(self):
        g = from_edges(
            [("x", 0), ("x", 1), ("x", 2), "*"],
            {
                (("x", 0), ("x", 1)): 2.0,
                (("x", 1), ("x", 2)): 2.0,
                (("x", 2), "*"): 1.0,
            },
            classes={"*": "cemetery"},
            root=("x", 0),
        )
        line = [("x", 0), ("x", 1), ("x", 2)]
        h = transform_comparison_step(
            g, "duplicate_line",
            {"line": line, "line_value": 1.5, "copy_value": 0.5},
        )
        assert h.n_vertices == 7
        for lab in line:
            dup = ("dup", *lab)
            assert h.conductance[h.index(lab), h.index(dup)] == 1.0
        assert h.conductance[h.index(("x", 0)), h.index(("x", 1))] == 1.5
        assert (
            h.conductance[h.index(("dup", "x", 0)), h.index(("dup", "x", 1))]
            == 0.5
        )
        # copy attaches only to the line, absorbing block stays last
        assert h.boundary_class[-1] == "cemetery"
        assert h.conductance[h.index(("dup", "x", 2)), h.index("*")] == 0.0
        # original non-line edges untouched
        assert h.conductance[h.index(("x", 2)), h.index("*")] == 1.0

    def test_duplicate_rejects_raising(self):
        g = from_edges(
            [("x", 0), ("x", 1)], {(("x", 0), ("x", 1)): 0.5}
        )
        with pytest.raises(ValueError):
            transform_comparison_step(
                g, "duplicate_line",
                {"line": [("x", 0), ("x", 1)], "line_value": 0.9,
                 "copy_value": 0.1},
            )


def test_unwire_absorbing():
    g = build_halfspace_box(2, 2, 2, 1.0)
    h = unwire_absorbing(g)
    assert set(h.boundary_class) == {"interior", "plain"}
    np.testing.assert_array_equal(g.conductance, h.conductance)
    assert h.active_indices().size == h.n_vertices


def test_self_loop_allowed_in_from_edges():
    g = from_edges([("a",)], {(("a",), ("a",)): 0.3})
    assert g.conductance[0, 0] == 0.3
    assert g.neighbors(0).size == 0


class TestSerialization:
    def test_round_trip_box(self):
        g = build_box_lattice(2, 1, 0.1)
        h = parse_graph(serialize_graph(g))
        assert h.labels == g.labels
        np.testing.assert_array_equal(h.conductance, g.conductance)
        np.testing.assert_array_equal(h.eta, g.eta)
        assert h.boundary_class == g.boundary_class
        assert h.root == g.root

    def test_round_trip_halfspace_with_eta(self):
        g = build_halfspace_box(2, 2, 2, 1.0 / 3.0)
        eta = np.zeros(g.n_vertices)
        eta[g.root] = 0.2
        g2 = type(g)(g.labels, g.conductance, eta, g.boundary_class, g.root)
        h = parse_graph(serialize_graph(g2))
        np.testing.assert_array_equal(h.eta, g2.eta)
        np.testing.assert_array_equal(h.conductance, g2.conductance)

    def test_exact_decimals(self):
        text = serialize_graph(build_box_lattice(1, 1, 0.5))
        assert "0.5" in text
        assert "graph 4" in text.splitlines()[0]
        assert text.rstrip().endswith("# root 0")

    def test_parse_errors(self):
        with pytest.raises(ValueError, match="header"):
            parse_graph("v 0 interior 0.0\n")
        with pytest.raises(ValueError, match="declares"):
            parse_graph("graph 2\nv 0 interior 0.0\n")
        with pytest.raises(ValueError, match="unknown record"):
            parse_graph("graph 0\nq zzz\n")

    def test_serialize_self_loop(self):
        g = from_edges([(0,), (1,)], {((0,), (0,)): 0.25, ((0,), (1,)): 1.0})
        h = parse_graph(serialize_graph(g))
        assert h.conductance[0, 0] == 0.25
