"""Harness behavior: determinism, exit codes, expected negatives, formats."""
import json

import pytest

from detourcert import cli


def run_config(**kw):
    base = dict(metric="sphere4", suites=("tractor",), points=2, seed=9,
                tol=1e-8, fmt="json")
    base.update(kw)
    return cli.RunConfig(**base)


def test_json_is_byte_identical_for_same_config():
    a = cli.run(run_config()).to_json()
    b = cli.run(run_config()).to_json()
    assert a == b
    payload = json.loads(a)
    assert payload["schema"] == cli.SCHEMA
    assert payload["passed"] is True
    assert {c["id"] for c in payload["checks"]} == {
        "tractor-metric-parallel", "splitting-commutation",
        "adjoint-factorization", "curvature-skew", "signature",
    }


def test_different_seed_changes_sample_points_not_verdict():
    a = cli.run(run_config(seed=1))
    b = cli.run(run_config(seed=2))
    assert a.passed and b.passed
    ra = [c.max_residual for c in a.checks]
    rb = [c.max_residual for c in b.checks]
    assert ra != rb  # different points, different roundoff


def test_expected_negative_composition_on_bump():
    report = cli.run(run_config(metric="generic_bump4", suites=("detour",),
                                points=1, seed=3))
    rec = {c.check_id: c for c in report.checks}["complex-composition"]
    assert rec.expected_negative
    assert rec.passed
    assert rec.max_residual > 1e-8
    assert rec.prediction_gap is not None and rec.prediction_gap < 1e-6
    assert report.passed


def test_composition_is_positive_on_einstein_background():
    report = cli.run(run_config(metric="sphere4", suites=("detour",),
                                points=1, seed=3))
    rec = {c.check_id: c for c in report.checks}["complex-composition"]
    assert not rec.expected_negative
    assert rec.passed and rec.max_residual < 1e-8


def test_jet_order_below_suite_minimum_rejected():
    with pytest.raises(cli.ConfigError, match="below the minimum"):
        run_config(suites=("detour",), jet_order=4)


def test_unknown_suite_rejected():
    with pytest.raises(cli.ConfigError, match="unknown suite"):
        run_config(suites=("spectral",))


def test_deformation_needs_dimension_four():
    with pytest.raises(cli.ConfigError, match="four dimensional"):
        cli.run(run_config(metric="generic_bump3", suites=("deformation",),
                           points=1))


def test_residuals_do_not_grow_with_extra_jet_orders():
    lo = cli.run(run_config(metric="sphere4", suites=("curvature",), points=1,
                            seed=5, jet_order=4))
    hi = cli.run(run_config(metric="sphere4", suites=("curvature",), points=1,
                            seed=5, jet_order=6))
    by_id_lo = {c.check_id: c.max_residual for c in lo.checks}
    for c in hi.checks:
        assert c.max_residual <= by_id_lo[c.check_id] + 1e-12


def test_main_exit_codes(tmp_path, capsys):
    assert cli.main(["verify", "--metric", "flat4", "--suite", "curvature",
                     "--points", "1"]) == 0
    capsys.readouterr()
    # nonzero residual above an absurd tolerance -> failure exit
    assert cli.main(["verify", "--metric", "sphere4", "--suite", "tractor",
                     "--points", "1", "--tol", "1e-18"]) == 1
    capsys.readouterr()
    assert cli.main(["verify", "--metric", "no_such_metric",
                     "--suite", "curvature"]) == 2
    err = capsys.readouterr().err
    assert "error:" in err


def test_text_report_shape(capsys):
    assert cli.main(["verify", "--metric", "flat3", "--suite", "curvature",
                     "--points", "1", "--format", "text"]) == 0
    out = capsys.readouterr().out
    assert "overall: PASS" in out
    assert "algebraic-bianchi" in out
    # n=3: no Weyl or obstruction tensor rows
    assert "weyl-trace" not in out
    assert "bach-shape" not in out


def test_catalog_export_roundtrips_through_verify(tmp_path, capsys):
    path = tmp_path / "bump.metric"
    assert cli.main(["catalog", "export", "generic_bump4", str(path)]) == 0
    capsys.readouterr()
    assert cli.main(["verify", "--metric", str(path), "--suite", "curvature",
                     "--points", "2", "--seed", "7"]) == 0
    out = capsys.readouterr().out
    assert "overall: PASS" in out


def test_catalog_export_unknown_name(capsys):
    assert cli.main(["catalog", "export", "nope", "-"]) == 2
    assert "unknown catalog metric" in capsys.readouterr().err


def test_catalog_list_names(capsys):
    assert cli.main(["catalog", "list"]) == 0
    out = capsys.readouterr().out
    for name in ("flat4", "schwarzschild", "generic_bump3"):
        assert name in out


def test_report_written_to_file(tmp_path):
    out = tmp_path / "report.json"
    code = cli.main(["verify", "--metric", "flat4", "--suite", "curvature",
                     "--points", "1", "--format", "json", "--out", str(out)])
    assert code == 0
    payload = json.loads(out.read_text())
    assert payload["environment"]["prng"] == "numpy PCG64"
    assert payload["environment"]["versions"]["detourcert"]
    assert all(c["passed"] for c in payload["checks"])


def test_flat_all_suites_clean():
    config = cli.RunConfig("flat4", tuple(cli.SUITES), points=2, seed=0)
    report = cli.run(config)
    assert report.passed
    assert all(c.max_residual < 1e-9 for c in report.checks)
