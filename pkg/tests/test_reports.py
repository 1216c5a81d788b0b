"""CSV/manifest writers: canonical cells, shared-index trace, no clocks."""

import csv
import json

import numpy as np
import pytest

from vrjplab.graphs import build_halfspace_box
from vrjplab.potential import sample_beta
from vrjplab.renewal import OvershootTrace, overshoot_trace
from vrjplab.reports import (
    TRACE_FIELDS,
    config_digest,
    format_cell,
    trace_rows,
    write_csv,
    write_manifest,
)
from vrjplab.seeding import replicate_rng


def test_format_cell_round_trips():
    assert format_cell(0.1) == "0.1"
    assert float(format_cell(1 / 3)) == 1 / 3
    assert format_cell(np.float64(2.5)) == "2.5"
    assert format_cell(7) == "7"
    assert format_cell(np.int64(-3)) == "-3"
    assert format_cell(None) == ""
    assert format_cell(True) == "1"
    assert format_cell(False) == "0"
    assert format_cell("top") == "top"


def test_write_csv_dict_and_sequence_rows(tmp_path):
    path = tmp_path / "out" / "a.csv"
    write_csv(path, ("x", "y"), [{"x": 1, "y": 0.5}, (2, None)])
    text = path.read_text()
    assert text == "x,y\n1,0.5\n2,\n"


def test_write_csv_rejects_ragged_sequence(tmp_path):
    with pytest.raises(ValueError, match="length"):
        write_csv(tmp_path / "b.csv", ("x", "y"), [(1, 2, 3)])


def test_write_csv_byte_stable(tmp_path):
    rows = [{"v": 1 / 7}, {"v": 3.0}]
    p1 = write_csv(tmp_path / "r1.csv", ("v",), rows)
    p2 = write_csv(tmp_path / "r2.csv", ("v",), rows)
    assert p1.read_bytes() == p2.read_bytes()


def test_trace_rows_shared_index():
    trace = OvershootTrace(
        t=2.0, B=1.0,
        martingale_path=(0.3, 2.4),
        tau=2, cut_level=1, enumeration=((0, 1),),
        r_sequence=(1.0, 2.1, 2.2),
        T=1,
        x_path=(0.5,), y_path=(0.5,), z_path=(1.0,), e_path=(1.0,),
    )
    rows = trace_rows(5, trace)
    assert [r["n"] for r in rows] == [0, 1, 2]
    assert rows[0]["M_n"] is None and rows[0]["R_n"] == 1.0
    assert rows[1]["M_n"] == 0.3 and rows[1]["T_flag"] == 1
    assert rows[2]["tau_flag"] == 1 and rows[2]["R_n"] == 2.2
    assert all(r["replicate"] == 5 for r in rows)


def test_trace_csv_end_to_end(tmp_path):
    g = build_halfspace_box(2, 4, 2, 1.0, side="free")
    beta = sample_beta(g, replicate_rng(17, 0))
    trace = overshoot_trace(g, beta, t=1.5, B=2.0)
    path = write_csv(tmp_path / "trace.csv", TRACE_FIELDS,
                     trace_rows(0, trace))
    with open(path, newline="") as fh:
        got = list(csv.reader(fh))
    assert got[0] == list(TRACE_FIELDS)
    # row n = 0 has no level mass but does have R_0
    assert got[1][2] == "" and got[1][4] != ""
    # every data row parses back
    for row in got[1:]:
        assert int(row[0]) == 0
        if row[2]:
            float(row[2])


def test_config_digest_is_sha256():
    assert config_digest("") == (
        "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855"
    )
    assert config_digest("a") != config_digest("b")


def test_manifest_contents_and_determinism(tmp_path):
    p1 = write_manifest(tmp_path / "one", seed=42, config_text="[x]\nk = 1\n")
    p2 = write_manifest(tmp_path / "two", seed=42, config_text="[x]\nk = 1\n")
    assert p1.read_bytes() == p2.read_bytes()
    doc = json.loads(p1.read_text())
    assert doc["seed"] == 42
    assert doc["config_sha256"] == config_digest("[x]\nk = 1\n")
    assert set(doc["versions"]) == {"vrjplab", "numpy", "scipy", "python"}
    assert "time" not in p1.read_text() and "date" not in p1.read_text()


def test_manifest_extra_block(tmp_path):
    p = write_manifest(tmp_path, seed=1, extra={"experiment": "scan"})
    assert json.loads(p.read_text())["extra"] == {"experiment": "scan"}
