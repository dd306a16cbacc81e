import json

import pytest

from app import cli
from app.core.errors import AsymmetricResistanceError, ConfigError, SingularSystemError
from app.services import analysis_service, rc2pi, rlc_decouple


def _write(tmp_path, data, name="case.json") -> str:
    path = tmp_path / name
    path.write_text(json.dumps(data), encoding="utf-8")
    return str(path)


def _run(capsys, argv):
    code = cli.main(argv)
    return code, capsys.readouterr().out


# =========================
# Config ingestion
# =========================

def test_rc_config_is_converted_to_si(rc_config, geometry):
    cfg = analysis_service.parse_config_dict(rc_config)
    assert cfg.mode == "rc"
    assert cfg.geometry.c_pul == pytest.approx(geometry.c_pul)
    assert cfg.geometry.tr == pytest.approx(100e-12)
    assert cfg.geometry.lc_len == 200.0


def test_unit_strings_match_plain_numbers(rc_config):
    plain = analysis_service.parse_config_dict(rc_config)
    suffixed = analysis_service.parse_config_dict(
        {**rc_config, "cc_pul": "0.25 fF", "tr": "0.1 ns", "cload": "5 fF"}
    )
    assert suffixed.geometry.cc_pul == pytest.approx(plain.geometry.cc_pul)
    assert suffixed.geometry.tr == pytest.approx(plain.geometry.tr)
    assert suffixed.geometry.cload == pytest.approx(plain.geometry.cload)


def test_wrong_dimension_in_unit_string(rc_config):
    with pytest.raises(ConfigError, match="tr"):
        analysis_service.parse_config_dict({**rc_config, "tr": "3 fF"})


def test_defaults_are_filled(rc_config):
    """
    This test:
     - vdd, segment_um y método se completan con sus valores por defecto.
    """
    resolved = analysis_service.parse_config_dict(rc_config).resolved()
    assert resolved["geometry"]["vdd"] == 1.0
    assert resolved["sim"]["segment_um"] == 10.0
    assert resolved["method"] == "ladder"
    assert resolved["output"]["samples"] == 501


def test_unknown_key_suggests_canonical_name(rc_config):
    data = {k: v for k, v in rc_config.items() if k != "cc_pul"}
    data["couplingcap"] = 0.25
    with pytest.raises(ConfigError, match="did you mean 'cc_pul'"):
        analysis_service.parse_config_dict(data)


def test_close_misspelling_is_suggested(rc_config):
    data = {k: v for k, v in rc_config.items() if k != "cload"}
    data["cloda"] = 5
    with pytest.raises(ConfigError, match="cload"):
        analysis_service.parse_config_dict(data)


def test_missing_required_key(rc_config):
    data = {k: v for k, v in rc_config.items() if k != "rd"}
    with pytest.raises(ConfigError, match="rd: required key is missing"):
        analysis_service.parse_config_dict(data)


def test_invalid_geometry_reports_all_problems(rc_config):
    with pytest.raises(ConfigError) as exc:
        analysis_service.parse_config_dict({**rc_config, "rd": -1, "lc_len": 0})
    assert "rd" in str(exc.value)
    assert "lc_len" in str(exc.value)


def test_resistance_asymmetry_rejected():
    with pytest.raises(AsymmetricResistanceError):
        analysis_service.parse_config_dict({**rlc_decouple.INDUCTIVE_POINT, "dr": 0.1})


def test_normalized_rlc_config(inductive_pair):
    cfg = analysis_service.parse_config_dict(dict(rlc_decouple.INDUCTIVE_POINT))
    assert cfg.mode == "rlc"
    assert cfg.pair.lm == pytest.approx(inductive_pair.lm)
    assert cfg.pair.r == pytest.approx(inductive_pair.r)


def test_normalized_rlc_needs_one_of_zeta_and_rr():
    point = {k: v for k, v in rlc_decouple.INDUCTIVE_POINT.items() if k != "zeta"}
    with pytest.raises(ConfigError, match="zeta"):
        analysis_service.parse_config_dict(point)
    with pytest.raises(ConfigError, match="zeta"):
        analysis_service.parse_config_dict({**rlc_decouple.INDUCTIVE_POINT, "rr": 1.0})


def test_physical_rlc_config_in_boundary_units():
    cfg = analysis_service.parse_config_dict(
        {"r": 0.05, "l": 0.5, "lm": 0.2, "cg": 0.1, "cc": 0.05, "h": 1000, "rs_drv": 20, "cl_load": 5}
    )
    assert cfg.pair.l == pytest.approx(0.5e-12)
    assert cfg.pair.cg == pytest.approx(0.1e-15)
    assert cfg.pair.cl_load == pytest.approx(5e-15)


def test_invalid_json_text():
    with pytest.raises(ConfigError, match="invalid JSON"):
        analysis_service.parse_config("{not json")


def test_flags_override_config_file(rc_config):
    cfg = analysis_service.parse_config_dict({**rc_config, "sim": {"dt": 1.0, "segment_um": 20}})
    assert cfg.sim.dt == pytest.approx(1e-12)
    merged = analysis_service.with_overrides(cfg, dt_ps=0.5, segment_um=5.0)
    assert merged.sim.dt == pytest.approx(0.5e-12)
    assert merged.sim.segment_um == 5.0


# =========================
# Commands
# =========================

def test_analyze_rc_prints_metrics(tmp_path, capsys, rc_config, geometry):
    code, out = _run(capsys, ["analyze-rc", _write(tmp_path, rc_config)])
    assert code == cli.EXIT_OK

    report = json.loads(out)
    expected = rc2pi.analyze(rc2pi.model_from_geometry(geometry))
    assert report["metrics"]["vmax"] == pytest.approx(expected.vmax, rel=1e-9)
    assert report["metrics"]["width"] == pytest.approx(expected.width, rel=1e-9)
    assert report["config"]["geometry"]["vdd"] == 1.0


def test_analyze_rc_writes_waveforms(tmp_path, capsys, rc_config):
    out_csv = tmp_path / "wave.csv"
    code, _ = _run(capsys, ["analyze-rc", _write(tmp_path, rc_config), "--out", str(out_csv), "--samples", "11"])
    assert code == cli.EXIT_OK
    lines = out_csv.read_text().splitlines()
    assert lines[0] == "t_s,v_dominant,v_exact"
    assert len(lines) == 12


def test_analyze_rc_input_error_exit_code(tmp_path, capsys, rc_config):
    data = dict(rc_config)
    data["couplingcap"] = data.pop("cc_pul")
    code, out = _run(capsys, ["analyze-rc", _write(tmp_path, data)])
    assert code == cli.EXIT_INPUT
    assert out == ""


def test_missing_config_file(tmp_path, capsys):
    code, _ = _run(capsys, ["analyze-rc", str(tmp_path / "nope.json")])
    assert code == cli.EXIT_INPUT


def test_numerical_failure_exit_code(tmp_path, capsys, rc_config, monkeypatch):
    def boom(cfg):
        raise SingularSystemError("v3")

    monkeypatch.setattr(analysis_service, "analyze_rc", boom)
    code, _ = _run(capsys, ["analyze-rc", _write(tmp_path, rc_config)])
    assert code == cli.EXIT_NUMERICAL


def test_analyze_rlc_inductive_point(tmp_path, capsys):
    path = _write(tmp_path, dict(rlc_decouple.INDUCTIVE_POINT))
    code, out = _run(capsys, ["analyze-rlc", path, "--segment-um", "50"])
    assert code == cli.EXIT_OK

    estimate = json.loads(out)["estimate"]
    assert estimate["tf1"] > estimate["tf2"]
    assert estimate["v_neg"] < 0
    assert estimate["v_peak"] == pytest.approx(max(abs(estimate["v_neg"]), abs(estimate["v_pos"])))


def test_analyze_rlc_twa_refuses_overdamped_mode(tmp_path, capsys):
    path = _write(tmp_path, dict(rlc_decouple.INDUCTIVE_POINT))
    code, _ = _run(capsys, ["analyze-rlc", path, "--twa"])
    assert code == cli.EXIT_INPUT


def test_analyze_rlc_rejects_resistance_asymmetry(tmp_path, capsys):
    path = _write(tmp_path, {**rlc_decouple.INDUCTIVE_POINT, "dr": 0.2})
    code, _ = _run(capsys, ["analyze-rlc", path])
    assert code == cli.EXIT_INPUT


def test_analyze_rlc_stop_time_before_reflection(tmp_path, capsys):
    """
    This test:
     - tf_max es ~9.4 ps en el punto inductivo; --tstop 10 ps termina antes de 3 tf_max.
     - Espera salida de entrada inválida en lugar de leer el final de la forma de onda.
    """
    path = _write(tmp_path, dict(rlc_decouple.INDUCTIVE_POINT))
    code, _ = _run(capsys, ["analyze-rlc", path, "--tstop", "10"])
    assert code == cli.EXIT_INPUT


def test_analyze_rlc_closed_form_variant(tmp_path, capsys):
    path = _write(tmp_path, {**rlc_decouple.INDUCTIVE_POINT, "dc": 0.2, "dl": 0.1})
    code, out = _run(capsys, ["analyze-rlc", path, "--ccprime", "consistent", "--segment-um", "50"])
    assert code == cli.EXIT_OK
    body = json.loads(out)
    assert body["config"]["ccprime_variant"] == "consistent"
    assert body["effective"]["cc_eff"] > 0



def test_analyze_rlc_rejects_rc_config(tmp_path, capsys, rc_config):
    code, _ = _run(capsys, ["analyze-rlc", _write(tmp_path, rc_config)])
    assert code == cli.EXIT_INPUT


def test_simulate_to_stdout(tmp_path, capsys, rc_config):
    code, out = _run(capsys, ["simulate", _write(tmp_path, rc_config), "--segment-um", "50", "--dt", "1", "--tstop", "50"])
    assert code == cli.EXIT_OK
    lines = out.splitlines()
    assert lines[0] == "t_s,v_out"
    assert len(lines) == 52


def test_simulate_rlc_to_file(tmp_path, capsys):
    out_csv = tmp_path / "pair.csv"
    path = _write(tmp_path, dict(rlc_decouple.INDUCTIVE_POINT))
    code, out = _run(capsys, ["simulate", path, "--out", str(out_csv), "--segment-um", "100", "--tstop", "20"])
    assert code == cli.EXIT_OK
    assert out == ""
    assert out_csv.read_text().startswith("t_s,v_line1,v_line2\n")


def test_sweep_prints_csv(capsys):
    code, out = _run(capsys, ["sweep", "--param", "zeta", "--grid", "0.5,1.0", "--no-oracle"])
    assert code == cli.EXIT_OK
    lines = out.splitlines()
    assert lines[0] == "param,value,model_peak,oracle_peak,rel_err"
    assert lines[1].startswith("zeta,0.5,")
    assert lines[1].endswith(",,")


def test_sweep_fixed_values_and_bad_json(capsys, tmp_path):
    out_csv = tmp_path / "kc.csv"
    code, _ = _run(
        capsys,
        ["sweep", "--param", "kc", "--grid", "0.2,0.4", "--fixed", '{"kl": 0.5}', "--no-oracle", "--out", str(out_csv)],
    )
    assert code == cli.EXIT_OK
    assert len(out_csv.read_text().splitlines()) == 3

    code, _ = _run(capsys, ["sweep", "--param", "kc", "--fixed", "{kl: 0.5}"])
    assert code == cli.EXIT_INPUT


def test_sweep_bad_grid(capsys):
    code, _ = _run(capsys, ["sweep", "--param", "zeta", "--grid", "a,b"])
    assert code == cli.EXIT_INPUT


def test_unknown_sweep_param_is_a_usage_error(capsys):
    code, _ = _run(capsys, ["sweep", "--param", "foo"])
    assert code == cli.EXIT_INPUT


def test_validate_small_corpus(capsys, tmp_path):
    out_csv = tmp_path / "rc.csv"
    code, out = _run(
        capsys,
        ["validate", "--kind", "rc", "--count", "2", "--seed", "3", "--segment-um", "100", "--out", str(out_csv)],
    )
    assert code == cli.EXIT_OK

    report = json.loads(out)
    assert set(report) == {"peak", "width", "config"}
    assert report["config"]["corpus"]["seed"] == 3
    assert report["peak"]["n_cases"] + report["peak"]["n_excluded"] <= 2
    assert out_csv.read_text().splitlines()[0] == "case_id,model,oracle,rel_err"


CASE_A = {"rd": 100, "rs": 50, "re": 50, "c1": 10, "c2": 30, "cl": 20, "cx": 50, "tr": 100}


def test_analyze_rc_explicit_two_pi(tmp_path, capsys):
    """
    This test:
     - Corre analyze-rc con el circuito 2-π dado directamente (caso A).
     - tx = 7.5 ps, tv = 17 ps, vmax ~ 0.0748.
    """
    code, out = _run(capsys, ["analyze-rc", _write(tmp_path, CASE_A)])
    assert code == cli.EXIT_OK

    report = json.loads(out)
    metrics = report["metrics"]
    assert metrics["tx"] == pytest.approx(7.5e-12, rel=1e-9)
    assert metrics["tv"] == pytest.approx(1.7e-11, rel=1e-9)
    assert metrics["vmax"] == pytest.approx(0.0748, abs=1e-4)
    assert report["lumped"] is None
    assert report["config"]["two_pi"]["cx"] == pytest.approx(50e-15)


def test_two_pi_config_missing_key():
    data = {k: v for k, v in CASE_A.items() if k != "re"}
    with pytest.raises(ConfigError, match="re: required key is missing"):
        analysis_service.parse_config_dict(data)


def test_simulate_explicit_two_pi(tmp_path, capsys):
    code, out = _run(capsys, ["simulate", _write(tmp_path, CASE_A), "--dt", "1", "--tstop", "10"])
    assert code == cli.EXIT_OK
    lines = out.splitlines()
    assert lines[0] == "t_s,v_out"
    assert len(lines) == 12
