import pytest
from fastapi.testclient import TestClient

from recon_app.backend.app import CORS_ORIGINS_ENV, app, cors_origins

COORDS = [[40.0, -100.0], [40.5, -100.2], [41.0, -99.5], [39.5, -99.8], [40.2, -98.9], [39.8, -100.6]]


@pytest.fixture
def client():
    return TestClient(app)


def test_root(client):
    response = client.get("/")
    assert response.status_code == 200
    assert "message" in response.json()


def test_reconstruct(client):
    observed = [[1.0, 2.0, 3.0] for _ in COORDS]
    observed[2][1] = None
    observed[4] = [None, None, None]
    response = client.post("/reconstruct", json={
        "coordinates": COORDS, "observed": observed, "lam": 1.0, "epsilon": 0.5, "k": 3,
    })
    assert response.status_code == 200
    body = response.json()
    assert body["variant"] == "sobolev"
    assert len(body["values"]) == len(COORDS)
    assert all(len(row) == 3 for row in body["values"])
    assert body["converged"]
    assert body["possibly_singular"]


def test_reconstruct_qiu_variant(client):
    observed = [[float(i), float(i) + 1.0] for i in range(len(COORDS))]
    response = client.post("/reconstruct", json={"coordinates": COORDS, "observed": observed, "lam": 0.5})
    assert response.status_code == 200
    assert response.json()["variant"] == "qiu"
    assert not response.json()["possibly_singular"]


def test_estimate_constant_field(client):
    response = client.post("/estimate", json={
        "coordinates": COORDS[:5],
        "observed": [[2.0, 2.0, 2.0] for _ in range(5)],
        "lam": 1.0,
        "epsilon": 0.5,
        "k": 3,
        "new_coordinates": [[40.1, -99.7]],
        "new_labels": ["mid"],
    })
    assert response.status_code == 200
    body = response.json()
    assert body["labels"] == ["mid"]
    assert body["values"][0] == pytest.approx([2.0, 2.0, 2.0], abs=1e-6)


@pytest.mark.parametrize("payload", [
    {"coordinates": COORDS, "observed": [[1.0, 2.0]] * 6, "lam": 0.0},
    {"coordinates": COORDS, "observed": [[1.0, 2.0]] * 5, "lam": 1.0},
    {"coordinates": COORDS, "observed": [[1.0, 2.0]] * 5 + [[1.0]], "lam": 1.0},
    {"coordinates": [[100.0, 0.0]] + COORDS[1:], "observed": [[1.0, 2.0]] * 6, "lam": 1.0},
    {"coordinates": COORDS, "observed": [[1.0]] * 6, "lam": 1.0},
])
def test_invalid_requests(client, payload):
    assert client.post("/reconstruct", json=payload).status_code == 422


def test_root_lists_endpoints(client):
    assert client.get("/").json()["endpoints"] == ["/estimate", "/reconstruct"]


def test_cors_origins_from_environment(monkeypatch):
    monkeypatch.setenv(CORS_ORIGINS_ENV, "http://a.example, http://b.example")
    assert cors_origins() == ["http://a.example", "http://b.example"]
    monkeypatch.delenv(CORS_ORIGINS_ENV)
    assert cors_origins() == ["*"]
