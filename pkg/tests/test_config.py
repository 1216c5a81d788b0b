"""Run-configuration parsing: typed keys, strict vocabulary, overrides."""

import pytest

from vrjplab.config import (
    DEFAULT_CONFIG,
    Tolerances,
    load_run_config,
    parse_mu0,
)
from vrjplab.errors import ConfigError


class TestLoad:
    def test_default_text_parses_for_every_experiment(self):
        for name in ("validate", "scan", "simulate", "toy", "renewal",
                     "exitprob"):
            cfg = load_run_config(DEFAULT_CONFIG, name)
            assert cfg.experiment == name
            assert cfg.seed == 20260823
            assert cfg.graph["W"] == 1.0
            assert cfg.tolerances == Tolerances(1e-10, 4.0, 1e-12)

    def test_overrides_beat_run_section(self):
        cfg = load_run_config(DEFAULT_CONFIG, "scan", seed=7, workers=4,
                              out="elsewhere")
        assert (cfg.seed, cfg.workers, cfg.out) == (7, 4, "elsewhere")

    def test_missing_sections_fall_back_to_defaults(self):
        cfg = load_run_config("", "validate")
        assert cfg.seed == 0 and cfg.workers == 1 and cfg.out == "runs"
        assert cfg.graph == {} and cfg.options == {}

    def test_unknown_section_rejected(self):
        with pytest.raises(ConfigError, match="not a known section"):
            load_run_config("[sacn]\nkind = phase\n", "scan")

    def test_unknown_key_rejected(self):
        with pytest.raises(ConfigError, match=r"\[graph\] q: unknown key"):
            load_run_config("[graph]\nq = 3\n", "scan")

    def test_nonpositive_w_rejected_before_execution(self):
        with pytest.raises(ConfigError, match=r"\[graph\] W"):
            load_run_config("[graph]\nW = -1.0\n", "scan")

    def test_w_and_grid_exclusive(self):
        text = "[graph]\nW = 1.0\nW_grid = 0.5, 2.0\n"
        with pytest.raises(ConfigError, match="mutually exclusive"):
            load_run_config(text, "scan")

    def test_bad_syntax_reports_line(self):
        with pytest.raises(ConfigError, match="syntax"):
            load_run_config("no section header\n", "scan")

    def test_unknown_experiment(self):
        with pytest.raises(ConfigError, match="unknown experiment"):
            load_run_config(DEFAULT_CONFIG, "paint")

    def test_scan_kind_vocabulary(self):
        with pytest.raises(ConfigError, match="choose from"):
            load_run_config("[scan]\nkind = sideways\n", "scan")

    def test_renewal_pairs(self):
        cfg = load_run_config("[renewal]\npairs = 1:1, 2:3\n", "renewal")
        assert cfg.options["pairs"] == ((1, 1), (2, 3))
        with pytest.raises(ConfigError, match="k <= l"):
            load_run_config("[renewal]\npairs = 3:2\n", "renewal")
        with pytest.raises(ConfigError, match="k:l"):
            load_run_config("[renewal]\npairs = 12\n", "renewal")

    def test_tolerance_override(self):
        cfg = load_run_config("[tolerances]\nstatistical_sigma = 3.0\n",
                              "scan")
        assert cfg.tolerances.statistical_sigma == 3.0
        assert cfg.tolerances.algebraic == 1e-10


class TestMu0:
    def test_point(self):
        sampler = parse_mu0("point:0.75")
        assert sampler(None) == 0.75

    def test_uniform(self):
        import numpy as np

        sampler = parse_mu0("uniform:0.25,1.25")
        rng = np.random.default_rng(0)
        draws = [sampler(rng) for _ in range(200)]
        assert all(0.25 < x < 1.25 for x in draws)

    def test_file(self, tmp_path):
        p = tmp_path / "w.txt"
        p.write_text("0.5\n1.5\n")
        import numpy as np

        sampler = parse_mu0(f"file:{p}")
        rng = np.random.default_rng(1)
        assert {sampler(rng) for _ in range(50)} == {0.5, 1.5}

    def test_bad_kind(self):
        with pytest.raises(ConfigError, match="point, uniform, or file"):
            parse_mu0("gamma:2")

    def test_bad_number(self):
        with pytest.raises(ConfigError, match="mu0"):
            parse_mu0("point:huge")
