from app.core.errors import SingularSystemError
from app.services import analysis_service, rlc_decouple


def test_health(client):
    r = client.get("/health")
    assert r.status_code == 200
    assert r.json() == {"status": "ok"}


def test_root_reports_settings(client):
    body = client.get("/").json()
    assert body["ok"] is True
    assert body["segment_um"] > 0
    assert body["ccprime_variant"] in ("modal", "consistent", "printed")


def test_analyze_rc(client, rc_config):
    """
    This test:
     - Envía la red de referencia en unidades de frontera.
     - Verifica que el pico sea positivo y menor que vdd.
    """
    r = client.post("/analyze/rc", json=rc_config)
    assert r.status_code == 200
    metrics = r.json()["metrics"]
    assert 0 < metrics["vmax"] < 1
    assert metrics["width"] > 0


def test_analyze_rc_unknown_key_is_400(client, rc_config):
    body = dict(rc_config)
    body["couplingcap"] = body.pop("cc_pul")
    r = client.post("/analyze/rc", json=body)
    assert r.status_code == 400
    assert "cc_pul" in r.json()["detail"]


def test_analyze_rc_refuses_file_output(client, rc_config):
    r = client.post("/analyze/rc", json={**rc_config, "output": {"out": "/tmp/x.csv"}})
    assert r.status_code == 400
    assert "output.out" in r.json()["detail"]


def test_analyze_rlc_asymmetric_resistance_is_400(client):
    r = client.post("/analyze/rlc", json={**rlc_decouple.INDUCTIVE_POINT, "dr": 0.1})
    assert r.status_code == 400


def test_analyze_rlc(client):
    r = client.post("/analyze/rlc", json={**rlc_decouple.INDUCTIVE_POINT, "sim": {"segment_um": 50}})
    assert r.status_code == 200
    body = r.json()
    assert body["estimate"]["v_peak"] > 0
    assert abs(body["normalized"]["kl"] - 0.769) < 1e-12


def test_numerical_failure_is_500(client, rc_config, monkeypatch):
    def boom(cfg):
        raise SingularSystemError("v1")

    monkeypatch.setattr(analysis_service, "analyze_rc", boom)
    r = client.post("/analyze/rc", json=rc_config)
    assert r.status_code == 500
    assert "floating" in r.json()["detail"]


def test_validate_returns_report(client, monkeypatch):
    seen = {}

    def fake(kind, *, seed, count, symmetric):
        seen.update(kind=kind, seed=seed, count=count, symmetric=symmetric)
        return {"peak": {"n_cases": count}, "config": {"seed": seed}}, []

    monkeypatch.setattr(analysis_service, "validate_corpus", fake)
    r = client.post("/validate", json={"kind": "rlc", "seed": 4, "count": 3, "symmetric": True})
    assert r.status_code == 200
    assert r.json() == {"peak": {"n_cases": 3}, "config": {"seed": 4}}
    assert seen == {"kind": "rlc", "seed": 4, "count": 3, "symmetric": True}


def test_validate_rejects_bad_request(client):
    assert client.post("/validate", json={"kind": "rc", "count": 0}).status_code == 422
    assert client.post("/validate", json={"kind": "lc"}).status_code == 422
    assert client.post("/validate", json={"kind": "rc", "workers": 8}).status_code == 422
