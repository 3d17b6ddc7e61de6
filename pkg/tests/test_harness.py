import csv
import io
import json

import numpy as np
import pytest

from stokes_dg_lab.harness import (
    CSV_HEADER,
    StudyConfig,
    StudyReport,
    bounded_check,
    expected_order,
    leray_test_field,
    read_report_json,
    report_csv,
    report_json,
    run_convergence_study,
    run_probe,
    write_report,
)


def small(**kw):
    base = dict(problem="stokes_vortex_exp", spatial_levels=[2, 4], temporal_levels=[4])
    base.update(kw)
    return StudyConfig(**base)


# -- configuration ------------------------------------------------------------


@pytest.mark.parametrize("bad", [
    {"equation": "navier"},
    {"w": 2},
    {"coupling": "diagonal"},
    {"norms": ["l1"]},
    {"spatial_levels": []},
    {"problem": "nope"},
    {"problem": "heat_mode"},  # preset solves the heat equation
    {"domain_kind": "l_shape"},  # k = 1 vortex violates no-slip on the re-entrant edges
    {"coupling": "coupled_h2", "spatial_levels": [2, 4], "temporal_levels": [4, 8]},
    {"coupling": "coupled_h", "spatial_levels": [2, 4], "temporal_levels": [4]},
])
def test_config_validation(bad):
    with pytest.raises(ValueError):
        small(**bad)


def test_config_unknown_field_and_load(tmp_path):
    with pytest.raises(ValueError, match="unknown config fields"):
        StudyConfig.from_dict({"problem": "heat_mode", "colour": "red"})
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps({"problem": "heat_mode", "equation": "heat", "w": 0}))
    cfg = StudyConfig.load(path, w=1, norms=None)
    assert cfg.w == 1 and cfg.norms == ["l2l2"]
    assert StudyConfig.from_dict(cfg.to_dict()) == cfg
    assert cfg.tolerances == {"order": 0.2, "bound_factor": 1.5, "infsup_spread": 0.1}


def test_cells_per_coupling():
    S, T = [2, 4, 8], [4, 16, 64]
    assert small(spatial_levels=S, temporal_levels=T).cells() == [(2, 4), (4, 4), (8, 4)]
    assert small(spatial_levels=S, temporal_levels=T, coupling="refine_time_only").cells() == [(2, 4), (2, 16), (2, 64)]
    assert small(spatial_levels=S, temporal_levels=T, coupling="coupled_h2").cells() == [(2, 4), (4, 16), (8, 64)]
    assert len(small(spatial_levels=S, temporal_levels=T, coupling="grid").cells()) == 9


def test_expected_orders():
    assert expected_order(small(), "l2l2") == 2.0
    assert expected_order(small(), "l2h1") == 1.0
    assert expected_order(small(coupling="refine_time_only", w=1), "l2l2") == 2.0
    assert expected_order(small(coupling="refine_time_only"), "l2h1") == 0.5
    assert expected_order(small(), "linfl2_sampled") is None


# -- studies ------------------------------------------------------------------


def test_convergence_study_rows_and_checks():
    rep = run_convergence_study(small(norms=["l2l2", "l2h1"]))
    assert [(r["n"], r["M"]) for r in rep.rows] == [(2, 4), (4, 4)]
    assert all(r["status"] == "ok" for r in rep.rows)
    for norm in ("l2l2", "l2h1"):
        orders = rep.orders[norm]
        assert len(orders) == 1
        # pass/fail derives only from reported numbers
        check = rep.checks[norm]
        assert check["last_order"] == orders[-1]
        assert check["passed"] == (orders[-1] >= check["expected"] - check["tolerance"])
    assert rep.passed == all(c["passed"] for c in rep.checks.values())
    with pytest.raises(ValueError):
        run_convergence_study(small(coupling="grid"))


def test_failed_cells_are_recorded():
    rep = run_convergence_study(small(spatial_levels=[2, 0]))
    assert rep.rows[0]["status"] == "ok"
    assert rep.rows[1]["status"] == "failed" and "ValueError" in rep.rows[1]["message"]
    assert not rep.passed


def test_determinism_across_threads(monkeypatch):
    cfg = small(spatial_levels=[2, 4, 2], temporal_levels=[4])
    monkeypatch.setenv("STOKES_DG_LAB_THREADS", "1")
    a = report_json(run_convergence_study(cfg))
    monkeypatch.setenv("STOKES_DG_LAB_THREADS", "3")
    b = report_json(run_convergence_study(cfg))
    assert a == b


def test_zero_data_stability_rows_are_degenerate():
    cfg = StudyConfig(problem="zero", spatial_levels=[2], temporal_levels=[2, 4], coupling="grid")
    rep = run_probe("stability", cfg)
    assert all(r["degenerate"] and r["ratio"] is None for r in rep.rows)
    assert not rep.passed  # nothing left to bound


def test_bounded_check():
    assert bounded_check([1.0, None, 1.4], 1.5)["passed"]
    assert not bounded_check([1.0, 1.6], 1.5)["passed"]
    assert not bounded_check([1.0, float("inf")], 1.5)["passed"]
    assert bounded_check([None, 2.0, 2.9], 1.5)["coarsest"] == 2.0


def test_probe_preconditions():
    with pytest.raises(ValueError):
        run_probe("ritz", small())
    heat = StudyConfig(problem="heat_mode", equation="heat", spatial_levels=[2], temporal_levels=[2])
    with pytest.raises(ValueError):
        run_probe("infsup", heat)
    lshape = StudyConfig(problem="stokes_vortex_lshape", domain_kind="l_shape",
                         spatial_levels=[2], temporal_levels=[2], norms=["l2h1"])
    with pytest.raises(ValueError):
        run_probe("leray_h1", lshape)
    with pytest.raises(ValueError):
        run_probe("bestapprox", lshape)


def test_infsup_and_leray_probes_small():
    rep = run_probe("infsup", small(spatial_levels=[2, 4]))
    assert rep.checks["infsup"]["all_positive"] and len(rep.rows) == 2
    rep = run_probe("leray_h1", small(spatial_levels=[4, 8]))
    assert all(0 < r["ratio"] < 2 for r in rep.rows)


@pytest.mark.parametrize("name", ["vortex", "vortex_2", "vortex_3"])
def test_leray_fields_are_divergence_free(name):
    _, grad = leray_test_field(name)
    x, y = np.random.default_rng(0).uniform(size=(2, 50))
    G = grad(x, y)
    np.testing.assert_allclose(G[0, 0] + G[1, 1], 0.0, atol=1e-12)


# -- report files -------------------------------------------------------------


def test_empty_study_gives_header_only_csv():
    rep = StudyReport("convergence", {}, [])
    assert report_csv(rep) == ",".join(CSV_HEADER) + "\n"


def test_csv_format_and_json_round_trip(tmp_path):
    rep = run_convergence_study(small())
    text = report_csv(rep)
    rows = list(csv.DictReader(io.StringIO(text)))
    assert list(rows[0]) == list(CSV_HEADER)
    assert float(rows[0]["l2l2"]) == rep.rows[0]["l2l2"]  # 17 significant digits round-trip
    assert rows[0]["beta_h"] == ""
    path = write_report(rep, "json", tmp_path / "r.json")
    assert read_report_json(path) == rep.to_dict()
    write_report(rep, "csv", tmp_path / "r.csv")
    assert (tmp_path / "r.csv").read_text() == text
    with pytest.raises(ValueError):
        write_report(rep, "xml", tmp_path / "r.xml")


def test_number_formatting():
    rep = StudyReport("x", {}, [{"n": 2, "M": 4, "h": 0.1, "tau": 1 / 3, "status": "ok",
                                 "l2l2": float("nan")}])
    row = report_csv(rep).splitlines()[1].split(",")
    assert row[3] == "0.10000000000000001"
    assert row[4] == "0.33333333333333331"
    assert json.loads(report_json(rep))["rows"][0]["l2l2"] is None
