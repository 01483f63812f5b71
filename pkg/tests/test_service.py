import base64

import pytest
from fastapi.testclient import TestClient

from qdp import deserialize, oracle, build_percolation
from qdp.service.app import create_app


@pytest.fixture(scope="module")
def client():
    return TestClient(create_app())


def test_health(client):
    r = client.get("/v1/health")
    assert r.status_code == 200 and r.json() == {"status": "ok"}


def test_count_exact_endpoint(client):
    r = client.post("/v1/count-exact", json={"d": 2, "p": 1.0, "seed": 0, "method": "brute"})
    assert r.status_code == 200
    body = r.json()
    assert body["count"] == "7"
    r2 = client.post("/v1/count-exact", json={"d": 2, "p": 1.0, "seed": 0})
    assert r2.json()["count"] == "7"  # evensum default agrees


def test_count_size_errors_are_422(client):
    r = client.post("/v1/count-exact", json={"d": 7, "p": 0.5, "seed": 0})
    assert r.status_code == 422
    r = client.post("/v1/count-exact", json={"d": 5, "p": 0.5, "seed": 0, "method": "brute"})
    assert r.status_code == 422
    # pydantic-level validation also 422
    r = client.post("/v1/count-exact", json={"d": 40, "p": 0.5, "seed": 0})
    assert r.status_code == 422


def test_estimate_endpoint(client):
    r = client.post("/v1/estimate", json={"d": 6, "p": 0.7, "seed": 3})
    assert r.status_code == 200
    body = r.json()
    for key in ("psi_even", "psi_odd", "phi_log_even", "delta_even", "delta_tilde_even", "log2_count_estimate"):
        assert key in body["report"]
    for key in ("mu1", "sigma_sq", "mu_prime", "mu2_enum", "mu2_nominal", "mu_enum", "covariance_bound", "regime"):
        assert key in body["constants"]


def test_sample_endpoint(client):
    r = client.post(
        "/v1/sample",
        json={"d": 5, "p": 0.8, "seed": 1, "trials": 20, "emit_sets": True},
    )
    assert r.status_code == 200
    body = r.json()
    assert body["kind"] == "sample"
    assert len(body["rows"]) == 20
    assert body["summary"]["independence_violations"] == 0


def test_thresholds_endpoint(client):
    r = client.get("/v1/thresholds")
    assert r.status_code == 200
    body = r.json()
    assert body["count"] == 10
    assert body["passed"] is True
    assert 0.548 < body["entries"]["worst_case_adjacency"]["value"] < 0.549


def test_clt_refusal_is_422(client):
    r = client.post("/v1/experiments/clt", json={"d": 12, "p": 1.0, "trials": 1000, "seed": 0})
    assert r.status_code == 422


def test_tv_endpoint_small(client):
    r = client.post(
        "/v1/experiments/tv", json={"d": 3, "p": 0.8, "trials": 5000, "seed": 2, "side": "even"}
    )
    assert r.status_code == 200
    assert "tv" in r.json()["summary"]


def test_config_endpoint_roundtrip(client):
    r = client.post("/v1/config", json={"d": 4, "p": 0.5, "seed": 11})
    assert r.status_code == 200
    body = r.json()
    blob = base64.b64decode(body["config_base64"])
    H = deserialize(blob)
    assert (H.d, H.p, H.seed) == (4, 0.5, 11)
    assert H.packed == build_percolation(4, 0.5, 11).packed
    assert oracle.count_evensum(H).value == oracle.count_evensum(build_percolation(4, 0.5, 11)).value


def test_moments_endpoint_small(client):
    r = client.post(
        "/v1/experiments/moments", json={"d": 8, "p": 0.6, "trials": 500, "seed": 9, "threads": 2}
    )
    assert r.status_code == 200
    body = r.json()
    assert body["kind"] == "moments"
    assert "phi1" in body["summary"]
    # json_lines round-trips through the report renderer
    assert body["json_lines"].count("\n") == len(body["rows"]) + 1
