import math

import numpy as np
import pytest
from scipy import integrate

from vrjplab.errors import DegenerateInputError
from vrjplab.graphs import build_box_lattice, from_edges
from vrjplab.potential import (
    BetaField,
    condition_params,
    laplace_analytic,
    log_density,
    marginal_params,
    parse_beta,
    sample_beta,
    sample_beta_single,
    serialize_beta,
)


def one_vertex(eta=0.0, self_loop=0.0):
    edges = {(("a",), ("a",)): self_loop} if self_loop else {}
    return from_edges([("a",)], edges, eta={("a",): eta}, classes={("a",): "plain"})


def two_vertex(W=1.0, eta=(0.0, 0.0)):
    return from_edges(
        [("a",), ("b",)],
        {(("a",), ("b",)): W},
        eta={("a",): eta[0], ("b",): eta[1]},
        classes={("a",): "plain", ("b",): "plain"},
    )


def random_plain_graph(rng, n=6, density=0.6, with_cemetery=False):
    labels = [(i,) for i in range(n)]
    edges = {}
    for i in range(n):
        for j in range(i + 1, n):
            if rng.random() < density:
                edges[(labels[i], labels[j])] = float(rng.uniform(0.2, 2.0))
    # keep it connected enough: chain backbone
    for i in range(n - 1):
        edges.setdefault((labels[i], labels[i + 1]), 1.0)
    eta = {lab: float(rng.uniform(0.0, 1.5)) for lab in labels}
    classes = {lab: "plain" for lab in labels}
    if with_cemetery:
        labels = labels + ["*"]
        classes["*"] = "cemetery"
        edges[(labels[0], "*")] = 0.8
    return from_edges(labels, edges, eta=eta, classes=classes)


class TestLaplaceAnalytic:
    def test_normalization(self):
        g = build_box_lattice(2, 1, 1.0)
        assert laplace_analytic(g, {}) == 1.0

    def test_single_vertex(self):
        g = one_vertex()
        assert laplace_analytic(g, {("a",): 3.0}) == pytest.approx(0.5)

    def test_single_vertex_with_eta(self):
        g = one_vertex(eta=1.0)
        assert laplace_analytic(g, {("a",): 3.0}) == pytest.approx(
            math.exp(-1.0) * 0.5
        )

    def test_two_vertex_closed_form(self):
        W, l1, l2 = 0.7, 0.9, 2.3
        g = two_vertex(W)
        s1, s2 = math.sqrt(1 + l1), math.sqrt(1 + l2)
        expected = math.exp(-W * (s1 * s2 - 1.0)) / (s1 * s2)
        got = laplace_analytic(g, {("a",): l1, ("b",): l2})
        assert got == pytest.approx(expected, rel=1e-12)

    def test_rejects_negative_lambda(self):
        with pytest.raises(ValueError):
            laplace_analytic(one_vertex(), {("a",): -0.5})


class TestLogDensity:
    def test_hand_value_single_vertex(self):
        g = one_vertex(eta=1.0)
        # -1/2 log 2pi - 1/2 log det - 1/2 <1,H1> - 1/2 <eta,G eta> + <eta,1>
        assert log_density(g, [1.0]) == pytest.approx(-0.5 * math.log(2 * math.pi))

    def test_outside_support(self):
        g = two_vertex(1.0)
        assert log_density(g, [0.5, 0.5]) == -math.inf  # det H < 0

    def test_normalization_two_vertex_quadrature(self):
        W = 0.7
        g = two_vertex(W, eta=(0.3, 0.5))

        def inner(b1):
            val, _ = integrate.quad(
                lambda b2: math.exp(log_density(g, [b1, b2])),
                W * W / b1,
                np.inf,
                limit=100,
            )
            return val

        total, err = integrate.quad(inner, 0.0, np.inf, limit=100)
        assert total == pytest.approx(1.0, abs=5e-6)

    def test_laplace_matches_density_with_self_loop(self):
        # One vertex with a self-conductance: the transform picks up the
        # half-weight factor exp(-w lam / 2).  Quadrature of the density
        # against the closed form pins the convention down analytically.
        w, eta, lam = 0.8, 0.6, 1.3
        g = one_vertex(eta=eta, self_loop=w)
        val, _ = integrate.quad(
            lambda b: math.exp(log_density(g, [b]) - 0.5 * lam * b),
            w,
            np.inf,
            limit=200,
        )
        assert val == pytest.approx(laplace_analytic(g, {("a",): lam}), rel=1e-8)
        norm, _ = integrate.quad(
            lambda b: math.exp(log_density(g, [b])), w, np.inf, limit=200
        )
        assert norm == pytest.approx(1.0, abs=1e-8)


class TestMarginalParams:
    def test_full_set_is_identity(self):
        rng = np.random.default_rng(0)
        g = random_plain_graph(rng)
        m = marginal_params(g, list(g.labels))
        np.testing.assert_allclose(m.conductance, g.conductance)
        np.testing.assert_allclose(m.eta, g.eta)

    def test_edge_mass_moves_to_eta(self):
        g = two_vertex(1.7)
        m = marginal_params(g, [("b",)])
        assert m.n_vertices == 1
        assert m.eta[0] == pytest.approx(1.7)

    def test_box_inner_shell(self):
        g = build_box_lattice(2, 1, 1.0)
        act = [g.labels[i] for i in g.active_indices()]
        m = marginal_params(g, act)
        star = g.index("*")
        np.testing.assert_allclose(
            m.eta, g.conductance[g.active_indices(), star]
        )

    def test_rejects_absorbing_member(self):
        g = build_box_lattice(1, 1, 1.0)
        with pytest.raises(ValueError):
            marginal_params(g, ["*"])


class TestConditionParams:
    def test_empty_u(self):
        rng = np.random.default_rng(1)
        g = random_plain_graph(rng)
        spec = condition_params(g, {})
        np.testing.assert_allclose(spec.w_check, g.conductance)
        np.testing.assert_allclose(spec.eta_check, g.eta)

    def test_two_vertex_schur_by_hand(self):
        W, eta = 1.3, (0.4, 0.9)
        g = two_vertex(W, eta)
        b1 = 2.0
        spec = condition_params(g, {("a",): b1})
        assert spec.support == (("b",),)
        assert spec.w_check[0, 0] == pytest.approx(W * W / b1)
        assert spec.eta_check[0] == pytest.approx(eta[1] + W * eta[0] / b1)

    def test_degenerate_block_raises(self):
        g = two_vertex(1.0)
        with pytest.raises(DegenerateInputError):
            condition_params(g, {("a",): 0.5, ("b",): 0.5})

    def test_tower_identity(self):
        # conditioning commutes with restriction, as exact matrix algebra
        rng = np.random.default_rng(42)
        for trial in range(8):
            g = random_plain_graph(rng, n=7, with_cemetery=(trial % 2 == 0))
            act = [g.labels[i] for i in g.active_indices()]
            sub = list(rng.choice(len(act), size=5, replace=False))
            vprime = [act[i] for i in sub]
            u = vprime[:2]
            beta_u = {
                lab: float(
                    g.conductance[g.index(lab)].sum() + rng.uniform(0.5, 2.0)
                )
                for lab in u
            }
            a = condition_params(marginal_params(g, vprime), beta_u)
            b_graph = condition_params(g, beta_u).as_graph()
            b = marginal_params(b_graph, [lab for lab in vprime if lab not in u])
            assert a.support == b.labels
            np.testing.assert_allclose(a.w_check, b.conductance, rtol=1e-12, atol=1e-13)
            np.testing.assert_allclose(a.eta_check, b.eta, rtol=1e-12, atol=1e-13)

    def test_density_factorization(self):
        # log nu_g(beta) = log nu_marginal(beta_U) + log nu_cond(beta_rest):
        # the chain rule that the sequential sampler is built on.
        rng = np.random.default_rng(7)
        for trial in range(5):
            g = random_plain_graph(rng, n=6, with_cemetery=(trial == 2))
            act = [g.labels[i] for i in g.active_indices()]
            w_act = g.active_conductance()
            beta = w_act.sum(axis=1) + rng.uniform(0.3, 1.5, size=len(act))
            u = act[:3]
            rest = act[3:]
            beta_map = dict(zip(act, beta))
            full = log_density(g, beta_map)
            marg = log_density(
                marginal_params(g, u), {lab: beta_map[lab] for lab in u}
            )
            cond_graph = condition_params(
                g, {lab: beta_map[lab] for lab in u}
            ).as_graph()
            cond = log_density(cond_graph, {lab: beta_map[lab] for lab in rest})
            assert full == pytest.approx(marg + cond, rel=1e-10)


class TestSingleVertexSampler:
    def test_flat_case_laplace(self):
        rng = np.random.default_rng(10)
        draws = np.array([sample_beta_single(0.0, 0.0, rng) for _ in range(60_000)])
        lam = 1.5
        vals = np.exp(-0.5 * lam * draws)
        se = vals.std(ddof=1) / math.sqrt(len(vals))
        assert abs(vals.mean() - (1 + lam) ** -0.5) < 4 * se

    def test_eta_case_reciprocal_mean(self):
        rng = np.random.default_rng(11)
        draws = np.array([sample_beta_single(0.0, 1.0, rng) for _ in range(60_000)])
        recip = 1.0 / draws
        se = recip.std(ddof=1) / math.sqrt(len(recip))
        assert abs(recip.mean() - 1.0) < 4 * se

    def test_self_term_shifts_once(self):
        # the support starts at w_self, not 2 w_self: the density has
        # H = beta - w_self on one vertex
        rng = np.random.default_rng(12)
        draws = np.array([sample_beta_single(3.0, 0.0, rng) for _ in range(5_000)])
        assert draws.min() > 3.0
        assert (draws < 6.0).mean() > 0.5  # chi-square mass below 3

    def test_self_term_laplace_probe(self):
        rng = np.random.default_rng(13)
        w, eta, lam = 0.8, 0.6, 1.1
        g = one_vertex(eta=eta, self_loop=w)
        draws = np.array(
            [sample_beta_single(w, eta, rng) for _ in range(120_000)]
        )
        vals = np.exp(-0.5 * lam * draws)
        se = vals.std(ddof=1) / math.sqrt(len(vals))
        assert abs(vals.mean() - laplace_analytic(g, {("a",): lam})) < 4 * se


class TestSequentialSampler:
    def test_single_vertex_reciprocal(self):
        g = one_vertex(eta=2.0)
        rng = np.random.default_rng(20)
        recip = np.array(
            [1.0 / sample_beta(g, rng).beta_active()[0] for _ in range(50_000)]
        )
        se = recip.std(ddof=1) / math.sqrt(len(recip))
        assert abs(recip.mean() - 0.5) < 4 * se

    def test_distance_two_independence(self):
        g = from_edges(
            [("a",), ("b",), ("c",)],
            {(("a",), ("b",)): 1.0, (("b",), ("c",)): 1.0},
            eta={("a",): 0.5, ("b",): 0.5, ("c",): 0.5},
            classes={lab: "plain" for lab in [("a",), ("b",), ("c",)]},
        )
        rng = np.random.default_rng(21)
        n = 40_000
        draws = np.array([sample_beta(g, rng).beta_active() for _ in range(n)])
        a, c = draws[:, 0], draws[:, 2]
        prod = (a - a.mean()) * (c - c.mean())
        se = prod.std(ddof=1) / math.sqrt(n)
        assert abs(prod.mean()) < 4 * se

    def test_laplace_probe_small_box(self):
        g = build_box_lattice(1, 1, 1.0)  # 3 active vertices, wired ends
        rng = np.random.default_rng(22)
        lam = np.array([0.7, 0.2, 1.4])
        n = 60_000
        vals = np.empty(n)
        for i in range(n):
            vals[i] = math.exp(-0.5 * lam @ sample_beta(g, rng).beta_active())
        se = vals.std(ddof=1) / math.sqrt(n)
        assert abs(vals.mean() - laplace_analytic(g, lam)) < 4 * se

    def test_order_options_agree(self):
        g = build_box_lattice(2, 1, 0.8)
        act_labels = [g.labels[i] for i in g.active_indices()]
        n = 20_000
        means = {}
        for name, order in [
            ("natural", None),
            ("reversed", list(reversed(act_labels))),
            ("min_degree", "min_degree"),
        ]:
            rng = np.random.default_rng(23)
            draws = np.array(
                [sample_beta(g, rng, order=order).beta_active() for _ in range(n)]
            )
            means[name] = (draws.mean(axis=0), draws.std(axis=0, ddof=1))
        for name in ("reversed", "min_degree"):
            diff = means[name][0] - means["natural"][0]
            se = np.sqrt(
                (means[name][1] ** 2 + means["natural"][1] ** 2) / n
            )
            assert np.all(np.abs(diff) < 4 * se), name

    def test_sampled_field_is_positive_definite(self):
        g = build_box_lattice(2, 1, 1.0)
        rng = np.random.default_rng(24)
        for _ in range(30):
            f = sample_beta(g, rng)
            eigs = np.linalg.eigvalsh(f.h_matrix())
            assert eigs[0] > 0
            assert math.isfinite(log_density(g, f.beta_active()))

    def test_bad_order_rejected(self):
        g = build_box_lattice(1, 1, 1.0)
        rng = np.random.default_rng(25)
        with pytest.raises(ValueError):
            sample_beta(g, rng, order=[(0,)])

    def test_beta_nan_on_absorbing(self):
        g = build_box_lattice(1, 1, 1.0)
        f = sample_beta(g, np.random.default_rng(26))
        assert math.isnan(f.beta[g.index("*")])


def test_beta_dump_round_trip():
    g = build_box_lattice(1, 1, 0.5)
    f = sample_beta(g, np.random.default_rng(30))
    f2 = parse_beta(serialize_beta(f))
    assert f2.graph.labels == g.labels
    act = g.active_indices()
    np.testing.assert_array_equal(f2.beta[act], f.beta[act])
    assert math.isnan(f2.beta[g.index("*")])
