"""Tests for CSV ingestion, result documents, diagnostics, and the CLI."""

import json

import numpy as np
import pandas as pd
import pytest

from inceff.cli import main, parse_regressor_spec
from inceff.data import Dataset, NuisanceValues
from inceff.exceptions import ConfigError, DataError
from inceff.io import (
    ColumnRoles,
    ResultDocument,
    diagnose_positivity,
    ingest_csv,
    write_document,
)
from inceff.simulation import benchmark_dgp

ROLES = ColumnRoles(outcome="y", treatment="a", covariates=("x1", "x2"))


def _write_csv(path, text):
    path.write_text(text)
    return path


# ---------------------------------------------------------------------------
# ColumnRoles and ingestion
# ---------------------------------------------------------------------------

def test_roles_reject_conflicts():
    with pytest.raises(ConfigError):
        ColumnRoles(outcome="y", treatment="y", covariates=("x",))
    with pytest.raises(ConfigError):
        ColumnRoles(outcome="y", treatment="a", covariates=("x",), condition_on=("z",))


def test_ingest_well_formed(tmp_path):
    path = _write_csv(tmp_path / "d.csv", "y,a,x1,x2\n1.0,0,0.5,2\n2.0,1,0.2,3\n0.5,1,0.1,4\n")
    data = ingest_csv(path, ROLES)
    assert data.n == 3
    assert data.columns == ("x1", "x2")
    np.testing.assert_array_equal(data.a, [0, 1, 1])


def test_ingest_rejects_nonbinary_treatment(tmp_path):
    path = _write_csv(tmp_path / "d.csv", "y,a,x1,x2\n1.0,0,0.5,2\n2.0,2,0.2,3\n")
    with pytest.raises(DataError, match=r"found \['2'\] at rows \[1\]"):
        ingest_csv(path, ROLES)


def test_ingest_rejects_empty(tmp_path):
    path = _write_csv(tmp_path / "d.csv", "y,a,x1,x2\n")
    with pytest.raises(DataError, match="no data rows"):
        ingest_csv(path, ROLES)


def test_ingest_names_missing_column(tmp_path):
    path = _write_csv(tmp_path / "d.csv", "y,a,x1\n1.0,0,0.5\n")
    with pytest.raises(DataError, match="x2"):
        ingest_csv(path, ROLES)


def test_ingest_drops_missing_rows_with_report(tmp_path, caplog):
    path = _write_csv(
        tmp_path / "d.csv",
        "y,a,x1,x2\n1.0,0,0.5,2\n,1,0.2,3\n2.0,1,0.1,4\n1.5,0,0.3,5\n",
    )
    with caplog.at_level("WARNING", logger="inceff"):
        data = ingest_csv(path, ROLES)
    assert data.n == 3
    assert "rejected 1 of 4 rows" in caplog.text


# ---------------------------------------------------------------------------
# result documents
# ---------------------------------------------------------------------------

def test_round_trip_bit_exact(tmp_path):
    rng = np.random.default_rng(3)
    table = pd.DataFrame(
        {"v": rng.normal(size=50), "estimate": rng.normal(size=50) * 1e-7}
    )
    doc = ResultDocument(command="fit", config={"seed": 1})
    doc.tables["curve"] = table
    write_document(doc, tmp_path / "out")
    back = pd.read_csv(tmp_path / "out" / "curve.csv", float_precision="round_trip")
    np.testing.assert_array_equal(back.v.to_numpy(), table.v.to_numpy())
    np.testing.assert_array_equal(back.estimate.to_numpy(), table.estimate.to_numpy())


def test_document_embeds_config_and_null_timestamp(tmp_path):
    doc = ResultDocument(command="fit", config={"seed": 7, "delta": [1.0, 2.0]})
    doc.tables["curve"] = pd.DataFrame({"v": [1.0]})
    write_document(doc, tmp_path / "out")
    meta = json.loads((tmp_path / "out" / "document.json").read_text())
    assert meta["config"]["seed"] == 7
    assert meta["created"] is None
    assert meta["outputs"] == {"curve": "curve.csv"}


def test_document_stamp_opt_in(tmp_path):
    doc = ResultDocument(command="fit", config={}, stamp=True)
    doc.tables["t"] = pd.DataFrame({"v": [1.0]})
    write_document(doc, tmp_path / "out")
    meta = json.loads((tmp_path / "out" / "document.json").read_text())
    assert meta["created"] is not None


# ---------------------------------------------------------------------------
# positivity diagnostic
# ---------------------------------------------------------------------------

def _diag_inputs(pi):
    n = len(pi)
    rng = np.random.default_rng(0)
    data = Dataset(x=rng.normal(size=(n, 1)), a=np.tile([0, 1], n // 2), y=np.zeros(n))
    nuis = NuisanceValues(pi=pi, mu0=np.zeros(n), mu1=np.zeros(n))
    return data, nuis


def test_diagnose_constant_propensity_single_bin():
    data, nuis = _diag_inputs(np.full(20, 0.5))
    table, summary = diagnose_positivity(data, nuis, bins=10)
    overall = table[table.group == "all"]
    assert overall["count"].sum() == 20
    assert (overall["count"] > 0).sum() == 1
    assert not summary["flagged"]


def test_diagnose_one_bin_counts_everything():
    data, nuis = _diag_inputs(np.linspace(0.1, 0.9, 20))
    table, _ = diagnose_positivity(data, nuis, bins=1)
    assert table[table.group == "all"]["count"].tolist() == [20]


def test_diagnose_flags_boundary_mass():
    data, nuis = _diag_inputs(np.concatenate([np.full(10, 0.01), np.full(10, 0.5)]))
    _, summary = diagnose_positivity(data, nuis, bins=10)
    assert summary["flagged"]
    assert summary["share_below_0.05"] == pytest.approx(0.5)


def test_diagnose_benchmark_process_mass_interior():
    dgp = benchmark_dgp()
    data = dgp.generate(4000, seed=8)
    nuis = dgp.truth().values(data.x)
    table, summary = diagnose_positivity(data, nuis, bins=20, by="x")
    # pi ranges over [0.12, 0.88] on the support, so no boundary mass
    assert summary["share_below_0.05"] == 0.0
    assert summary["share_above_0.95"] == 0.0
    assert any(g.startswith("x in") for g in table.group.unique())


# ---------------------------------------------------------------------------
# CLI surface
# ---------------------------------------------------------------------------

@pytest.fixture(scope="module")
def data_csv(tmp_path_factory):
    path = tmp_path_factory.mktemp("cli") / "data.csv"
    ds = benchmark_dgp().generate(600, seed=42)
    pd.DataFrame({"x": ds.x[:, 0], "a": ds.a, "y": ds.y}).to_csv(path, index=False)
    return path


def _base_flags(data_csv, out):
    return [
        "--data", str(data_csv), "--outcome", "y", "--treatment", "a",
        "--covariates", "x", "--seed", "3", "--out", str(out),
    ]


def test_cli_intercept_basis_one_row_per_delta(data_csv, tmp_path):
    out = tmp_path / "fit"
    code = main(
        ["fit", *_base_flags(data_csv, out), "--effect", "cide",
         "--delta", "0.5,1,2", "--learner", "projection", "--basis", "1"]
    )
    assert code == 0
    curve = pd.read_csv(out / "curve.csv")
    assert len(curve) == 3  # one intercept row per delta
    assert curve.delta.tolist() == [0.5, 1.0, 2.0]
    coef = pd.read_csv(out / "coefficients.csv")
    assert set(coef.term.astype(str)) == {"1"}


def test_cli_idr_curve(data_csv, tmp_path):
    out = tmp_path / "idr"
    code = main(
        ["fit", *_base_flags(data_csv, out), "--effect", "cie",
         "--delta", "1", "--learner", "idr", "--bandwidth", "0.8"]
    )
    assert code == 0
    curve = pd.read_csv(out / "curve.csv")
    assert len(curve) == 101
    assert (curve.ci_lower <= curve.estimate).all()


def test_cli_vcide_record_fields(data_csv, tmp_path):
    out = tmp_path / "v"
    code = main(["vcide", *_base_flags(data_csv, out), "--delta", "1,2"])
    assert code == 0
    table = pd.read_csv(out / "vcide.csv")
    assert len(table) == 2
    for col in ("psi_hat", "sigma2_standard", "sigma2_delta_method", "p_value"):
        assert col in table.columns


def test_cli_missing_file_exit_3(tmp_path):
    code = main(
        ["fit", "--data", str(tmp_path / "none.csv"), "--outcome", "y",
         "--treatment", "a", "--covariates", "x", "--effect", "cie",
         "--delta", "1", "--basis", "1", "--out", str(tmp_path / "o")]
    )
    assert code == 3


def test_cli_bad_delta_exit_2(data_csv, tmp_path):
    code = main(
        ["fit", *_base_flags(data_csv, tmp_path / "o"), "--effect", "cie",
         "--delta", "-1", "--basis", "1"]
    )
    assert code == 2


def test_cli_conflicting_roles_exit_2(data_csv, tmp_path):
    code = main(
        ["fit", "--data", str(data_csv), "--outcome", "y", "--treatment", "y",
         "--covariates", "x", "--effect", "cie", "--delta", "1",
         "--basis", "1", "--out", str(tmp_path / "o")]
    )
    assert code == 2


def test_cli_oracle_check_passes(tmp_path, capsys):
    code = main(["oracle-check", "--instances", "3", "--seed", "5",
                 "--out", str(tmp_path / "oc")])
    assert code == 0
    assert "FAIL" not in capsys.readouterr().out
    checks = pd.read_csv(tmp_path / "oc" / "checks.csv")
    assert checks["pass"].all()


def test_cli_simulate_writes_table(tmp_path):
    out = tmp_path / "sim"
    code = main(
        ["simulate", "--experiment", "type1", "--n", "200", "--reps", "5",
         "--delta", "1", "--seed", "5", "--out", str(out)]
    )
    assert code == 0
    table = pd.read_csv(out / "table.csv")
    assert "rejection_rate" in table.columns and "mc_se" in table.columns


def test_cli_diagnose(data_csv, tmp_path):
    out = tmp_path / "diag"
    code = main(["diagnose", *_base_flags(data_csv, out), "--condition-on", "x",
                 "--bins", "10"])
    assert code == 0
    meta = json.loads((out / "document.json").read_text())
    assert "share_below_0.05" in meta["summary"]


def test_cli_rerun_bit_exact(data_csv, tmp_path):
    out = tmp_path / "det"
    flags = ["vcide", *_base_flags(data_csv, out), "--delta", "1"]
    assert main(flags) == 0
    first = {p.name: p.read_bytes() for p in out.iterdir()}
    assert main(flags) == 0
    second = {p.name: p.read_bytes() for p in out.iterdir()}
    assert first == second


def test_parse_regressor_spec_grammar():
    spec = parse_regressor_spec("knn:k=7", "continuous")
    assert spec.method == "knn" and spec.k == 7
    spec = parse_regressor_spec("glm:degree=3,ridge=0.01", "binary")
    assert spec.method == "penalized-glm" and spec.degree == 3
    with pytest.raises(ConfigError):
        parse_regressor_spec("glm:bogus=1", "binary")


def test_threads_env_fallback(monkeypatch):
    from inceff.cli import _resolve_threads

    monkeypatch.delenv("ICE_THREADS", raising=False)
    assert _resolve_threads(None) == 1
    monkeypatch.setenv("ICE_THREADS", "3")
    assert _resolve_threads(None) == 3
    assert _resolve_threads("2") == 2
    with pytest.raises(ConfigError):
        _resolve_threads("0")
