"""End-to-end runner and CLI behavior on the bundled dataset."""
import csv
import hashlib
import json
from pathlib import Path

import numpy as np
import pytest

from lpdecomp.cli import main
from lpdecomp.config import load_config
from lpdecomp.dataset import load_csv, subsample
from lpdecomp.runner import run, thread_count, verify
from lpdecomp.util import DataError, DesignError, fmt_float

DATA = str(Path(__file__).resolve().parents[1] / "data" / "synthetic.csv")


def base_overrides(outdir, extra=None):
    ov = {
        ("data", "path"): DATA,
        ("data", "target"): "y",
        ("data", "shock"): "s",
        ("data", "controls"): "g",
        ("data", "lags"): "2",
        ("data", "horizons"): "2",
        ("forest", "trees"): "40",
        ("output", "directory"): str(outdir),
    }
    ov.update(extra or {})
    return ov


def read_rows(path):
    with open(path, newline="", encoding="utf-8") as fh:
        return list(csv.reader(fh))


def test_linear_run_writes_the_full_bundle(tmp_path):
    cfg = load_config(None, base_overrides(tmp_path, {("estimator", "kind"): "linear"}))
    result = run(cfg)
    assert result.passed
    names = set(result.artifacts)
    for expected in (
        "config_resolved.ini",
        "irf_linear.csv",
        "decomposition_h0.csv",
        "decomposition_h2.csv",
        "concentration_linear.csv",
        "trimmed_linear.csv",
        "windows_h1.csv",
        "chart_irf_linear.svg",
        "chart_evidence_h0.svg",
        "chart_weights_h2.svg",
        "manifest.json",
    ):
        assert expected in names, expected
    assert not any(n.startswith(("irf_forest", "cluster")) for n in names)
    # one header plus one row per horizon
    assert len(read_rows(tmp_path / "irf_linear.csv")) == 4


def test_manifest_checksums_are_real(tmp_path):
    cfg = load_config(None, base_overrides(tmp_path, {("estimator", "kind"): "linear"}))
    result = run(cfg)
    manifest = json.loads((tmp_path / "manifest.json").read_text())
    assert manifest["version"]
    listed = {a["path"]: a for a in manifest["artifacts"]}
    assert set(listed) == set(result.artifacts) - {"manifest.json"}
    for name, entry in listed.items():
        blob = (tmp_path / name).read_bytes()
        assert hashlib.sha256(blob).hexdigest() == entry["sha256"]
        assert len(blob) == entry["bytes"]
    checks = {c["name"]: c for c in manifest["self_checks"]}
    assert checks["linear-contribution-identity"]["passed"]


def test_decomposition_table_sums_to_the_reported_beta(tmp_path):
    cfg = load_config(None, base_overrides(tmp_path, {("estimator", "kind"): "linear"}))
    run(cfg, parts=frozenset({"linear-irf", "decompose"}))
    irf = read_rows(tmp_path / "irf_linear.csv")
    beta_h0 = float(irf[1][1])
    dec = read_rows(tmp_path / "decomposition_h0.csv")
    header = dec[0]
    evidence = [float(r[header.index("evidence")]) for r in dec[1:]]
    contribs = [float(r[header.index("contribution")]) for r in dec[1:]]
    assert abs(evidence[-1] - beta_h0) < 1e-10
    assert abs(sum(contribs) - beta_h0) < 1e-8
    weights = [float(r[header.index("weight")]) for r in dec[1:]]
    assert abs(sum(weights)) < 1e-12


def test_forest_run_writes_forest_tables(tmp_path):
    cfg = load_config(
        None,
        base_overrides(
            tmp_path,
            {("estimator", "kind"): "forest", ("data", "horizons"): "1"},
        ),
    )
    result = run(cfg)
    names = set(result.artifacts)
    assert "irf_forest.csv" in names
    assert "conditional_irf.csv" in names
    assert "forest_decomposition_h0.csv" in names
    assert "chart_irf_forest.svg" in names
    assert "irf_linear.csv" not in names
    rows = read_rows(tmp_path / "irf_forest.csv")
    assert len(rows) == 3  # header + h0 + h1
    # the irf weights in the table sum to ~0
    dec = read_rows(tmp_path / "forest_decomposition_h0.csv")
    idx = dec[0].index("irf_weight")
    assert abs(sum(float(r[idx]) for r in dec[1:])) < 1e-10


def test_cluster_outputs_written_when_enabled(tmp_path):
    cfg = load_config(
        None,
        base_overrides(
            tmp_path,
            {
                ("estimator", "kind"): "forest",
                ("data", "horizons"): "1",
                ("clustering", "enabled"): "true",
            },
        ),
    )
    result = run(cfg)
    names = set(result.artifacts)
    assert {"cluster_assignments.csv", "cluster_irf.csv", "silhouette.csv"} <= names
    assert any(c.name == "cluster-share-recombination" and c.passed for c in result.checks)
    shares = [float(r[1]) for r in read_rows(tmp_path / "cluster_irf.csv")[1:]]
    assert abs(sum(shares) - 1.0) < 1e-12


def test_subsample_flag_equals_fresh_run_on_truncated_file(tmp_path):
    sub_out = tmp_path / "sub"
    cfg_sub = load_config(
        None,
        base_overrides(
            sub_out,
            {("estimator", "kind"): "linear", ("data", "subsample"): "1970-01:1989-12"},
        ),
    )
    run(cfg_sub, parts=frozenset({"linear-irf", "decompose"}))

    frame = subsample(load_csv(DATA), "1970-01", "1989-12")
    trunc_csv = tmp_path / "trunc.csv"
    with open(trunc_csv, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\r\n")
        names = list(frame.columns)
        w.writerow(["date"] + names)
        for i, date in enumerate(frame.dates):
            w.writerow([date] + [fmt_float(float(frame.columns[n][i])) for n in names])
    fresh_out = tmp_path / "fresh"
    cfg_fresh = load_config(
        None,
        base_overrides(
            fresh_out,
            {("estimator", "kind"): "linear", ("data", "path"): str(trunc_csv)},
        ),
    )
    run(cfg_fresh, parts=frozenset({"linear-irf", "decompose"}))
    for name in ("irf_linear.csv", "decomposition_h0.csv", "decomposition_h2.csv"):
        assert (sub_out / name).read_bytes() == (fresh_out / name).read_bytes()


def test_thread_count_env(monkeypatch):
    monkeypatch.delenv("LPDECOMP_THREADS", raising=False)
    assert thread_count() == 1
    monkeypatch.setenv("LPDECOMP_THREADS", "4")
    assert thread_count() == 4
    monkeypatch.setenv("LPDECOMP_THREADS", "zero")
    with pytest.raises(DataError):
        thread_count()
    monkeypatch.setenv("LPDECOMP_THREADS", "0")
    with pytest.raises(DataError):
        thread_count()


def test_manifest_identical_across_thread_counts(tmp_path, monkeypatch):
    overrides = base_overrides(
        tmp_path / "o",
        {
            ("data", "horizons"): "1",
            ("forest", "trees"): "30",
            ("clustering", "enabled"): "true",
        },
    )
    manifests = []
    for n in ("1", "4"):
        monkeypatch.setenv("LPDECOMP_THREADS", n)
        cfg = load_config(None, overrides)
        run(cfg)
        manifests.append((tmp_path / "o" / "manifest.json").read_bytes())
    assert manifests[0] == manifests[1]


def test_failure_removes_partial_outputs(tmp_path):
    bad_csv = tmp_path / "collinear.csv"
    rng = np.random.default_rng(0)
    with open(bad_csv, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\r\n")
        w.writerow(["date", "y", "s", "c"])
        for i in range(60):
            s = rng.standard_normal()
            w.writerow(
                [f"{1960 + i // 12:04d}-{i % 12 + 1:02d}",
                 fmt_float(rng.standard_normal()), fmt_float(s), fmt_float(2.0 * s)]
            )
    outdir = tmp_path / "out"
    cfg = load_config(
        None,
        {
            ("data", "path"): str(bad_csv),
            ("data", "target"): "y",
            ("data", "shock"): "s",
            ("data", "controls"): "c",
            ("data", "contemporaneous_controls"): "true",
            ("estimator", "kind"): "linear",
            ("output", "directory"): str(outdir),
        },
    )
    with pytest.raises(DesignError, match="rank deficient"):
        run(cfg)
    assert list(outdir.iterdir()) == []


def test_verify_reports_all_identity_families(tmp_path):
    cfg = load_config(
        None,
        base_overrides(
            tmp_path, {("data", "horizons"): "1", ("forest", "trees"): "50"}
        ),
    )
    checks = {c.name: c for c in verify(cfg)}
    for name in (
        "linear-weight-sum",
        "linear-contribution-identity",
        "fwl-weights",
        "primal-dual-coefficients",
        "proximity-weights",
        "proximity-recombination",
        "influence-split",
        "forest-irf-weight-sum",
        "forest-weight-convexity",
        "forest-dual-route",
        "forest-weight-duality",
    ):
        assert name in checks, name
        assert checks[name].passed, name
    assert checks["forest-weight-duality"].max_violation == 0.0


def test_window_config_sets_the_first_rolling_row(tmp_path):
    cfg = load_config(
        None,
        base_overrides(
            tmp_path,
            {
                ("estimator", "kind"): "linear",
                ("data", "horizons"): "0",
                ("diagnostics", "window"): "40",
            },
        ),
    )
    run(cfg, parts=frozenset({"robustness"}))
    rows = read_rows(tmp_path / "windows_h0.csv")
    header = rows[0]
    rolling = [r[header.index("rolling")] for r in rows[1:]]
    assert all(cell == "nan" for cell in rolling[:39])
    assert rolling[39] != "nan"


def test_cli_verify_exits_zero(tmp_path, capsys):
    rc = main(
        [
            "verify",
            "--data", DATA,
            "--target", "y",
            "--shock", "s",
            "--controls", "g",
            "--lags", "1",
            "--horizons", "1",
            "--estimator", "linear",
        ]
    )
    out = capsys.readouterr().out
    assert rc == 0
    assert "all identities hold" in out


def test_cli_fit_linear_writes_only_the_irf_table(tmp_path, capsys):
    rc = main(
        [
            "fit-linear",
            "--data", DATA,
            "--target", "y",
            "--shock", "s",
            "--lags", "1",
            "--horizons", "1",
            "--output", str(tmp_path),
        ]
    )
    assert rc == 0
    assert (tmp_path / "irf_linear.csv").exists()
    assert not (tmp_path / "decomposition_h0.csv").exists()
    assert not (tmp_path / "manifest.json").exists()


def test_cli_error_paths(tmp_path, capsys):
    rc = main(["cluster", "--data", DATA, "--estimator", "linear"])
    assert rc == 1
    assert "forest" in capsys.readouterr().err
    rc = main(["run", "--data", DATA, "--set", "nonsense"])
    assert rc == 1
    rc = main(["run", "--data", str(tmp_path / "missing.csv"), "--output", str(tmp_path)])
    assert rc == 1
    rc = main(["run", "--data", DATA, "--set", "forest.depth=3"])
    assert rc == 1
    assert "forest.depth" in capsys.readouterr().err


def test_cli_subsample_flag_round_trips(tmp_path):
    rc = main(
        [
            "fit-linear",
            "--data", DATA,
            "--target", "y",
            "--shock", "s",
            "--lags", "1",
            "--horizons", "0",
            "--subsample", "1980-01:",
            "--output", str(tmp_path),
        ]
    )
    assert rc == 0
    ini = (tmp_path / "config_resolved.ini").read_text()
    assert "subsample = 1980-01:" in ini
