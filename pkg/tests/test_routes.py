import math

import pytest
from fastapi.testclient import TestClient

from main import app


@pytest.fixture(scope="module")
def client():
    with TestClient(app) as test_client:
        yield test_client


def test_health(client):
    response = client.get("/health")
    assert response.status_code == 200
    assert response.json() == {"status": "healthy"}


def test_numbers_fibonacci(client):
    response = client.get("/api/numbers/", params={"family": "fibonacci", "n_max": 10})
    assert response.status_code == 200
    body = response.json()
    assert body["failed"] is False
    values = [row["value"] for row in body["rows"]]
    assert values == pytest.approx([0, 1, 1, 2, 3, 5, 8, 13, 21, 34, 55], abs=1e-9)


def test_families(client):
    families = client.get("/api/numbers/families").json()["families"]
    kinds = {f["kind"] for f in families}
    assert {"fibonacci", "tammdankov"} <= kinds
    fib = next(f for f in families if f["kind"] == "fibonacci")
    assert fib["p"] * fib["q"] == pytest.approx(-1.0)


def test_identities(client):
    response = client.get("/api/numbers/identities", params={"n": 4, "m": 3, "family": "sym"})
    assert response.status_code == 200
    assert response.json()["residuals"]
    assert client.get("/api/numbers/identities", params={"n": 40, "m": 3}).status_code == 422


def test_exp_undeformed(client):
    response = client.post("/api/calculus/exp", json={"p": 1.0, "q": 1.0, "z_re": 1.0})
    assert response.status_code == 200
    body = response.json()
    assert body["small"]["re"] == pytest.approx(math.e, rel=1e-14)
    assert body["big"]["re"] == pytest.approx(math.e, rel=1e-14)
    assert body["relation_residual"] <= 1e-14


def test_concurrence(client):
    payload = {"family": "fibonacci", "alpha": {"point": [0.0, 0.0]}}
    response = client.post("/api/entanglement/concurrence", params={"kind": "L"}, json=payload)
    assert response.status_code == 200
    (row,) = response.json()["rows"]
    assert row["value"] == pytest.approx(2.0 / math.sqrt(5.0), abs=1e-9)


def test_spectrum(client):
    response = client.post("/api/oscillator/spectrum", json={"p": 1.0, "q": 1.0, "n_max": 3})
    assert response.status_code == 200
    assert [row["value"] for row in response.json()["rows"]] == pytest.approx([0.5, 1.5, 2.5, 3.5])


def test_conflicting_parameters(client):
    response = client.get("/api/numbers/", params={"family": "sym", "p": 2.0})
    assert response.status_code == 422
    assert response.json()["detail"]["error"] == "ConfigInvalid"


def test_verify(client):
    assert "partial-trace" in client.get("/api/verify/").json()["suites"]
    response = client.get("/api/verify/pq-numbers")
    assert response.status_code == 200
    (result,) = response.json()
    assert result["status"] == "pass"
    assert client.get("/api/verify/unknown").status_code == 422
