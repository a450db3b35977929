import json
import math
from pathlib import Path

import pytest

from lattice_spectra.cli import EXIT_CONFIG, EXIT_FAILED, EXIT_INAPPLICABLE, EXIT_OK, round_floats, run
from lattice_spectra.config import ConfigError, ExperimentConfig

ROOT = Path(__file__).resolve().parents[1]
CONFIGS = ROOT / "baselines" / "configs"


def _config(tmp_path, name, **edits):
    cfg = ExperimentConfig.load(CONFIGS / f"{name}.toml")
    data = cfg.to_dict()
    data["output"]["directory"] = str(tmp_path / "out")
    for section, values in edits.items():
        if isinstance(values, dict):
            data[section].update(values)
        else:
            data[section] = values
    path = tmp_path / f"{name}.toml"
    path.write_text(ExperimentConfig.from_dict(data).dumps())
    return path


def _report(tmp_path, command):
    return json.loads((tmp_path / "out" / f"report_{command}.json").read_text())


# --- configuration ------------------------------------------------------------


@pytest.mark.parametrize("path", sorted(CONFIGS.glob("*.toml")), ids=lambda p: p.stem)
def test_config_round_trip(path):
    cfg = ExperimentConfig.load(path)
    again = ExperimentConfig.loads(cfg.dumps())
    assert again == cfg
    assert again.dumps() == cfg.dumps()


def test_config_rejects_dirac_dimension():
    with pytest.raises(ConfigError):
        ExperimentConfig(model="dirac", n=2, N=8)


def test_config_rejects_nonpositive_tolerance():
    with pytest.raises(ConfigError):
        ExperimentConfig.from_dict({"tolerances": {"slack": 0.0}})


def test_config_rejects_unknown_keys():
    with pytest.raises(ConfigError):
        ExperimentConfig.from_dict({"colour": "blue"})
    with pytest.raises(ConfigError):
        ExperimentConfig.from_dict({"grid": {"spacing": 3}})


def test_config_rejects_odd_criterion_grid():
    with pytest.raises(ConfigError):
        ExperimentConfig.from_dict({"grid": {"criterion": 33}})


def test_config_bad_toml():
    with pytest.raises(ConfigError):
        ExperimentConfig.loads("model = ")


def test_config_matrix_profile_shape_checked():
    cfg = ExperimentConfig.from_dict({"n": 1, "N": 2, "profile": {"kind": "constant", "value": [[1.0, 0.0, 0.0]]}})
    with pytest.raises(ConfigError):
        cfg.potential()


# --- commands -----------------------------------------------------------------


def test_spectrum_schrodinger_free(tmp_path):
    assert run(["spectrum", "--config", str(_config(tmp_path, "schrodinger_free"))]) == EXIT_OK
    rep = _report(tmp_path, "spectrum")
    assert rep["essential"] == [[0.0, 4.0]]
    assert rep["gaps"] == []
    assert rep["discrepancy"]["hausdorff"] <= 2e-3
    assert "tolerance" in rep["sweep"] and "tolerance" in rep["discrepancy"]


def test_spectrum_dirac_defaults(tmp_path):
    cfg = _config(tmp_path, "dirac_free")
    assert run(["spectrum", "--config", str(cfg), "--grid", "12"]) == EXIT_OK
    rep = _report(tmp_path, "spectrum")
    s13 = math.sqrt(13)
    assert rep["essential"] == [[-s13, -1.0], [1.0, s13]]
    assert rep["gaps"] == [[-1.0, 1.0]]
    assert rep["discrepancy"]["contained"]


def test_spectrum_klein_gordon_defaults(tmp_path):
    assert run(["spectrum", "--config", str(_config(tmp_path, "klein_gordon"))]) == EXIT_OK
    rep = _report(tmp_path, "spectrum")
    assert rep["essential"] == [[1.0, math.sqrt(5)]]
    assert rep["band_truncation"]["bandwidth"] <= 40
    assert rep["band_truncation"]["tail_bound"] <= 1e-8


def test_spectrum_invalid_config(tmp_path, capsys):
    bad = tmp_path / "bad.toml"
    bad.write_text('model = "dirac"\nn = 2\nN = 8\n')
    assert run(["spectrum", "--config", str(bad)]) == EXIT_CONFIG
    assert "n = 3" in capsys.readouterr().err


def test_decay_schrodinger(tmp_path):
    assert run(["decay", "--config", str(_config(tmp_path, "schrodinger_free")), "--lambda", "6"]) == EXIT_OK
    rep = _report(tmp_path, "decay")
    assert rep["case"] == "above"
    assert rep["r_max_closed_form"] == pytest.approx(math.acosh(2.0), abs=1e-12)
    assert abs(rep["r_max_criterion"] - math.acosh(2.0)) <= 1e-3


def test_decay_inside_spectrum_exit_code(tmp_path, capsys):
    code = run(["decay", "--config", str(_config(tmp_path, "schrodinger_free")), "--lambda", "2"])
    assert code == EXIT_INAPPLICABLE
    assert "essential spectrum" in capsys.readouterr().err


def test_decay_dirac_gap(tmp_path):
    cfg = _config(tmp_path, "dirac_free")
    assert run(["decay", "--config", str(cfg), "--lambda", "0", "--grid", "16"]) == EXIT_OK
    rep = _report(tmp_path, "decay")
    assert rep["r_max_closed_form"] == pytest.approx(math.acosh(7 / 6), abs=1e-12)
    assert abs(rep["r_max_criterion"] - math.acosh(7 / 6)) <= 1e-3


def test_decay_klein_gordon_as_stated(tmp_path):
    assert run(["decay", "--config", str(_config(tmp_path, "klein_gordon")), "--lambda", "3"]) == EXIT_OK
    rep = _report(tmp_path, "decay")
    assert rep["r_max_closed_form"] is None
    assert rep["closed_form"]["argument"] == pytest.approx(-3.0)
    assert any("<= 1" in d for d in rep["diagnostics"])
    assert abs(rep["r_max_criterion"] - math.acosh(3.0)) <= 1e-3


def test_verify_delta_well(tmp_path):
    assert run(["verify", "--config", str(_config(tmp_path, "delta_well"))]) == EXIT_OK
    rep = _report(tmp_path, "verify")
    (row,) = rep["eigenvalues"]
    assert row["status"] == "PASS"
    assert row["lambda"] == pytest.approx(-0.5, abs=1e-3)
    assert row["rho_fit"] == pytest.approx(math.log(2), abs=0.02)
    assert row["r_max"] == pytest.approx(math.log(2), abs=1e-4)
    lines = (tmp_path / "out" / row["csv"]).read_text().splitlines()
    assert lines[0] == "shell_index,max_abs,log_max_abs"
    assert len(lines) == 1 + 61
    s, a, la = lines[3].split(",")
    assert int(s) == 2 and float(la) == pytest.approx(math.log(float(a)))


def test_verify_free_has_empty_table(tmp_path):
    assert run(["verify", "--config", str(_config(tmp_path, "schrodinger_free"))]) == EXIT_OK
    assert _report(tmp_path, "verify")["eigenvalues"] == []


def test_verify_missing_baseline_is_config_error(tmp_path):
    cfg = _config(tmp_path, "delta_well")
    code = run(["verify", "--config", str(cfg), "--baseline", str(tmp_path / "missing.json")])
    assert code == EXIT_CONFIG


def test_symbol_compose_gives_laplacian(tmp_path):
    cfg = _config(tmp_path, "schrodinger_free")
    assert run(["symbol", "--config", str(cfg), "--op", "compose", "--operand", "d1*", "--with", "d1"]) == EXIT_OK
    table = {tuple(c["alpha"]): c["re"][0][0] for c in _report(tmp_path, "symbol")["coefficients"]}
    assert table == {(-1,): -1.0, (0,): 2.0, (1,): -1.0}


def test_symbol_wiener_laplacian_3d(tmp_path):
    cfg = _config(tmp_path, "schrodinger_free", n=3, box={"L_list": [1, 2]})
    assert run(["symbol", "--config", str(cfg), "--op", "wiener", "--operand", "laplacian"]) == EXIT_OK
    assert _report(tmp_path, "symbol")["wiener_norm"] == 12.0


def test_symbol_kg_coeffs(tmp_path):
    cfg = _config(tmp_path, "klein_gordon")
    assert run(["symbol", "--config", str(cfg), "--op", "coeffs"]) == EXIT_OK
    rep = _report(tmp_path, "symbol")
    assert rep["band_truncation"]["tail_bound"] <= 1e-8
    alphas = [c["alpha"][0] for c in rep["coefficients"]]
    B = rep["band_truncation"]["bandwidth"]
    assert alphas == list(range(-B, B + 1))


def test_symbol_unknown_operand(tmp_path):
    cfg = _config(tmp_path, "schrodinger_free")
    assert run(["symbol", "--config", str(cfg), "--op", "coeffs", "--operand", "d7"]) == EXIT_CONFIG


def test_threads_env_validated(tmp_path, monkeypatch):
    monkeypatch.setenv("LATTICE_SPECTRA_THREADS", "zero")
    assert run(["spectrum", "--config", str(_config(tmp_path, "schrodinger_free"))]) == EXIT_CONFIG
    monkeypatch.setenv("LATTICE_SPECTRA_THREADS", "1")
    assert run(["spectrum", "--config", str(_config(tmp_path, "schrodinger_free"))]) == EXIT_OK


def test_reports_are_byte_identical(tmp_path):
    cfg = _config(tmp_path, "delta_well")
    path = tmp_path / "out" / "report_spectrum.json"
    run(["spectrum", "--config", str(cfg)])
    first = path.read_bytes()
    run(["spectrum", "--config", str(cfg)])
    assert path.read_bytes() == first


def test_round_floats():
    assert round_floats({"a": [1.23456789012345, -1e-12]}) == {"a": [1.23456789, 0.0]}


@pytest.mark.slow
def test_verify_dirac_well_golden(tmp_path):
    cfg = _config(tmp_path, "dirac_well")
    baseline = ROOT / "baselines" / "dirac_well_verify.json"
    code = run(["verify", "--config", str(cfg), "--baseline", str(baseline)])
    rep = _report(tmp_path, "verify")
    assert rep["baseline"]["match"]
    # documented: the forward-difference Dirac operator has no (-1, 1) gap, and three of the
    # four bound states decay slower than the closed-form rate, so verification fails
    assert code == EXIT_FAILED
    for row in rep["eigenvalues"]:
        assert row["residual"] <= 1e-8 * row["matrix_norm"]
        assert row["lambda"] < -math.sqrt(13)
