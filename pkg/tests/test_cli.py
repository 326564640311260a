"""End-to-end command line checks: exit codes, deterministic outputs, the
CSV/JSON layouts, and the self-check suites on reduced grids."""

import csv
import json
from pathlib import Path

import numpy as np
import pytest

from floquetgerbe.cli import main
from floquetgerbe.config import RunConfig, load_config

REPO = Path(__file__).resolve().parents[1]
CONFIGS = REPO / "configs"
TWO_PI = 2.0 * np.pi


def _write_config(tmp_path, payload, name="config.json"):
    path = tmp_path / name
    path.write_text(json.dumps(payload))
    return str(path)


def _read_rows(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


# ---------------------------------------------------------------------------
# configuration handling
# ---------------------------------------------------------------------------


def test_shipped_configs_load():
    assert load_config(str(CONFIGS / "default.json")) == RunConfig()
    smoke = load_config(str(CONFIGS / "smoke.json"))
    assert smoke.grids.n_lambda == 128
    corrupt = load_config(str(CONFIGS / "corrupt.json"))
    assert corrupt.verify.corrupt_phi.pair == (1, 3)


def test_unknown_config_key_exits_2(tmp_path, capsys):
    cfg = _write_config(tmp_path, {"grids": {"n_lambda": 128, "bogus": 1}})
    rc = main(["quasienergies", "--config", cfg, "--out", str(tmp_path)])
    assert rc == 2
    err = capsys.readouterr().err
    assert "grids.bogus" in err


def test_malformed_json_exits_2(tmp_path, capsys):
    path = tmp_path / "broken.json"
    path.write_text("{not json")
    rc = main(["quasienergies", "--config", str(path), "--out", str(tmp_path)])
    assert rc == 2
    assert "configuration error" in capsys.readouterr().err


def test_invalid_grid_value_exits_2(tmp_path, capsys):
    cfg = _write_config(tmp_path, {"grids": {"n_lambda": 100}})
    rc = main(["quasienergies", "--config", cfg, "--out", str(tmp_path)])
    assert rc == 2
    assert "n_lambda" in capsys.readouterr().err


def test_bad_worker_count_exits_2(tmp_path, capsys):
    rc = main(["quasienergies", "--out", str(tmp_path), "--workers", "0"])
    assert rc == 2
    assert "--workers" in capsys.readouterr().err


def test_missing_subcommand_is_a_usage_error(capsys):
    with pytest.raises(SystemExit):
        main([])
    capsys.readouterr()


# ---------------------------------------------------------------------------
# quasienergies
# ---------------------------------------------------------------------------


@pytest.fixture(scope="module")
def quasi_run(tmp_path_factory):
    out = tmp_path_factory.mktemp("quasi")
    cfg = _write_config(
        out,
        {
            "grids": {"n_lambda": 128, "n_theta": 512},
            "frequencies": {"n_points": 257},
        },
    )
    rc = main(["quasienergies", "--config", cfg, "--out", str(out)])
    assert rc == 0
    return out


def test_quasienergy_csv_matches_closed_form(quasi_run):
    rows = _read_rows(quasi_run / "quasienergies.csv")
    assert {r["omega0_over_omega1"] for r in rows} == {"1", "0.5"}
    checked = 0
    for r in rows:
        if r["omega0_over_omega1"] == "1" and r["branch"] == "1":
            lam = float(r["lambda"])
            expected = np.mod(lam / (4.0 * np.pi), 1.0)
            value = float(r["chi_mod_omega0"])
            gap = min(abs(value - expected), 1.0 - abs(value - expected))
            assert gap < 1e-8
            checked += 1
    assert checked == 257
    charts = {int(r["chart"]) for r in rows}
    assert charts <= {1, 2, 3}
    assert len(charts) == 3


def test_crossing_sidecar_locates_degeneracies(quasi_run):
    report = json.loads((quasi_run / "quasienergies_crossings.json").read_text())
    assert report["schema_version"] == "1"
    by_ratio = {f["omega0_over_omega1"]: f["crossings"] for f in report["families"]}
    assert by_ratio[1.0] == []
    found = sorted(c["lambda"] for c in by_ratio[0.5])
    expected = [0.0, TWO_PI, 2.0 * TWO_PI]
    assert len(found) == 3
    for got, want in zip(found, expected):
        assert abs(got - want) < 1e-6
    assert all(c["gap"] < 1e-6 for c in by_ratio[0.5])


def test_outputs_are_deterministic_across_runs_and_workers(tmp_path):
    payload = {"frequencies": {"ratios": [1.0], "n_points": 65}}
    blobs = []
    for tag, workers in (("a", "1"), ("b", "3")):
        out = tmp_path / tag
        cfg = _write_config(tmp_path, payload, name=f"{tag}.json")
        rc = main(
            ["quasienergies", "--config", cfg, "--out", str(out), "--workers", workers]
        )
        assert rc == 0
        blobs.append(
            (
                (out / "quasienergies.csv").read_bytes(),
                (out / "quasienergies_crossings.json").read_bytes(),
            )
        )
    assert blobs[0] == blobs[1]


def test_figures_flag_is_opt_in(tmp_path):
    payload = {"frequencies": {"ratios": [1.0], "n_points": 33}}
    cfg = _write_config(tmp_path, payload)
    plain = tmp_path / "plain"
    rc = main(["quasienergies", "--config", cfg, "--out", str(plain)])
    assert rc == 0
    assert not (plain / "quasienergies.png").exists()
    figs = tmp_path / "figs"
    rc = main(["quasienergies", "--config", cfg, "--out", str(figs), "--figures"])
    assert rc == 0
    assert (figs / "quasienergies.png").stat().st_size > 0


# ---------------------------------------------------------------------------
# anholonomy
# ---------------------------------------------------------------------------


def test_anholonomy_reports_swap_and_block_shift(tmp_path):
    rc = main(
        ["anholonomy", "--config", str(CONFIGS / "smoke.json"), "--out", str(tmp_path)]
    )
    assert rc == 0
    report = json.loads((tmp_path / "anholonomy.json").read_text())
    single = report["spans"][0]
    double = report["spans"][1]
    assert single["name"] == "single"
    assert single["permutation"] == [2, 1]
    assert single["block_shifts"] == [0, 1]
    assert double["name"] == "double"
    assert double["permutation"] == [1, 2]
    assert double["block_shifts"] == [1, 1]


def test_anholonomy_flags_crossing_at_double_frequency(tmp_path):
    cfg = _write_config(
        tmp_path, {"model": {"omega1": 2.0}, "grids": {"n_lambda": 128}}
    )
    rc = main(["anholonomy", "--config", cfg, "--out", str(tmp_path)])
    assert rc == 0
    report = json.loads((tmp_path / "anholonomy.json").read_text())
    single = report["spans"][0]
    assert "permutation" not in single
    loc = single["crossing"]["location"] % TWO_PI
    assert min(loc, TWO_PI - loc) < 1e-6


# ---------------------------------------------------------------------------
# holonomy
# ---------------------------------------------------------------------------


def test_holonomy_report_layout(tmp_path):
    rc = main(
        ["holonomy", "--config", str(CONFIGS / "smoke.json"), "--out", str(tmp_path)]
    )
    assert rc == 0
    report = json.loads((tmp_path / "holonomy.json").read_text())
    assert report["loop"]["kick_count"] == 64
    assert report["loop"]["chart_path"] == [1, 2, 3, 1]
    assert len(report["legs"]) == 4
    assert [e["winding"] for e in report["edges"]] == [0, 0, -1]
    assert report["agreement_with_exact"]["phase_difference"] < 1e-5
    assert abs(report["agreement_with_exact"]["fidelity_deficit"]) < 1e-9
    ref = report["reference"]
    assert "overall sign" in ref["note"]
    # the quoted factor disagrees with both assembly and exact evolution by pi
    assert ref["agreement_with_prediction"]["phase_difference"] > 3.0
    assert ref["agreement_with_exact"]["phase_difference"] > 3.0
    rows = _read_rows(tmp_path / "holonomy_convergence.csv")
    assert [int(r["kick_count"]) for r in rows] == [16, 32, 64]
    assert all(float(r["phase_error"]) < 1e-5 for r in rows)


# ---------------------------------------------------------------------------
# verify
# ---------------------------------------------------------------------------


def test_verify_passes_on_reduced_grids(tmp_path, capsys):
    rc = main(
        [
            "verify",
            "--config",
            str(CONFIGS / "smoke.json"),
            "--out",
            str(tmp_path),
            "--refine",
        ]
    )
    assert rc == 0
    capsys.readouterr()
    report = json.loads((tmp_path / "verify.json").read_text())
    assert report["ok"] is True
    assert report["failures"] == []
    suites = report["suites"]
    assert set(suites) == {"gluing", "cocycles", "gauge", "convergence", "transitions"}
    gluing = suites["gluing"]
    assert gluing["max_pair"] < 1e-4
    assert gluing["max_triple"] == 0.0
    for factor in gluing["refined"]["shrink_factors"].values():
        assert factor > 3.5
    cocycles = suites["cocycles"]
    assert cocycles["canonical"]["nu"] == 1
    assert cocycles["wide"]["nu"] == 1
    assert cocycles["canonical"]["ok"] and cocycles["wide"]["ok"]
    gauge = suites["gauge"]
    assert len(gauge["trials"]) == 3
    assert all(t["witness_identity"] for t in gauge["trials"])
    assert all(t["nu"] == gauge["base_nu"] for t in gauge["trials"])
    assert all(t["phase_shift_vs_base"] < 1e-6 for t in gauge["trials"])
    conv = suites["convergence"]["rows"]
    assert [r["kick_count"] for r in conv] == [16, 32, 64]
    assert all(r["phase_error"] < 1e-6 for r in conv)
    placements = suites["transitions"]["placements"]
    assert len(placements) == 5
    assert all(p["phase_vs_centre"] < 1e-6 for p in placements)


def test_verify_detects_corrupted_transition_phase(tmp_path, capsys):
    rc = main(
        ["verify", "--config", str(CONFIGS / "corrupt.json"), "--out", str(tmp_path)]
    )
    assert rc == 1
    assert "verification failed" in capsys.readouterr().err
    report = json.loads((tmp_path / "verify.json").read_text())
    assert report["ok"] is False
    assert report["corrupt_phi"]["pair"] == "1-3"
    assert any("record-consistency" in f for f in report["failures"])
    violations = report["suites"]["cocycles"]["canonical"]["consistency_violations"]
    assert len(violations) == 1
    assert violations[0]["pair"] == "1-3"
    assert abs(violations[0]["magnitude"] - 0.1) < 0.02


def test_verify_rejects_corruption_outside_every_cover(tmp_path, capsys):
    cfg = _write_config(
        tmp_path,
        {
            "grids": {"n_lambda": 128, "n_theta": 512},
            "verify": {
                "suites": ["transitions"],
                "corrupt_phi": {"pair": [1, 4], "magnitude": 0.1},
            },
        },
    )
    rc = main(["verify", "--config", cfg, "--out", str(tmp_path)])
    assert rc == 2
    assert "corrupt_phi" in capsys.readouterr().err


def test_output_directory_is_created(tmp_path):
    nested = tmp_path / "a" / "b"
    payload = {"frequencies": {"ratios": [1.0], "n_points": 33}}
    cfg = _write_config(tmp_path, payload)
    rc = main(["quasienergies", "--config", cfg, "--out", str(nested)])
    assert rc == 0
    assert (nested / "quasienergies.csv").exists()
