import pytest

from services import bergman, function_theory


def test_health_check(client):
    response = client.get("/api/health")
    assert response.status_code == 200
    assert response.get_json() == {"status": "ok", "q": "1/2", "N": 32, "max_api_dim": 64}


def test_integrals_table(client):
    response = client.get("/api/table/integrals?q=1/2")
    assert response.status_code == 200
    rows = response.get_json()
    assert len(rows) == 6
    assert rows[1]["exact"] == "2/3"


def test_table_errors(client):
    assert client.get("/api/table/volumes").status_code == 400
    assert client.get("/api/table/moments?q=0").status_code == 400
    response = client.get("/api/table/moments?N=65")
    assert response.status_code == 400
    assert "API limit" in response.get_json()["error"]


def test_dirichlet_endpoint(client):
    response = client.post("/api/dirichlet", json={"q": "1/2", "N": 32, "boundary": {"0": [2, 0]}})
    assert response.status_code == 200
    body = response.get_json()
    assert body["mean"] == pytest.approx([2.0, 0.0], abs=1e-9)
    assert body["norm"] == pytest.approx(2.0, abs=1e-8)
    assert "element" not in body


def test_dirichlet_can_return_element(client):
    response = client.post("/api/dirichlet", json={"N": 16, "boundary": {"1": [1, 0]}, "include_element": True})
    assert response.status_code == 200
    element = response.get_json()["element"]
    assert element["N"] == 16
    assert len(element["entries"]) == 256


def test_integrate_endpoint(client):
    poly = {"terms": [{"m": 1, "n": 1, "re": "1"}]}
    response = client.post("/api/integrate", json={"q": "1/2", "poly": poly})
    assert response.status_code == 200
    body = response.get_json()
    assert body["exact"] == {"re": "2/3", "im": "0"}
    assert body["abs_diff"] <= 1e-12 + body["truncation_bound"]


def test_symbol_endpoint(client):
    poly = {"terms": [{"m": 0, "n": 2, "re": "1"}, {"m": 1, "n": 0, "im": "1"}]}
    response = client.post("/api/symbol", json={"poly": poly})
    assert response.status_code == 200
    assert response.get_json()["fourier"] == {"-1": [0.0, 1.0], "2": [1.0, 0.0]}


@pytest.mark.parametrize(
    "body",
    [
        {"q": "1/2", "N": 65, "boundary": {"0": [1, 0]}},
        {"q": "0", "boundary": {"0": [1, 0]}},
        {"q": "0.5", "boundary": {"0": [1, 0]}},
        {"N": "many", "boundary": {"0": [1, 0]}},
        {"boundary": {"x": [1, 0]}},
    ],
)
def test_dirichlet_rejects_bad_requests(client, body):
    response = client.post("/api/dirichlet", json=body)
    assert response.status_code == 400
    assert "error" in response.get_json()


def test_non_json_body_is_rejected(client):
    response = client.post("/api/integrate", data="terms", content_type="text/plain")
    assert response.status_code == 400


def test_runs_listing(client):
    response = client.get("/api/runs?limit=5")
    assert response.status_code == 200
    assert isinstance(response.get_json(), list)


def test_dirichlet_maps_quadrature_errors_to_bad_request(client, monkeypatch):
    def out_of_range(a, ctx, **kwargs):
        raise bergman.QuadratureError("|eta|=0.97 exceeds the coherent-state radius 0.95")

    monkeypatch.setattr(function_theory, "coherent_sup", out_of_range)
    response = client.post("/api/dirichlet", json={"N": 16, "boundary": {"0": [1, 0]}})
    assert response.status_code == 400
    assert "coherent-state radius" in response.get_json()["error"]


def test_dirichlet_endpoint_at_default_dimension(client):
    response = client.post("/api/dirichlet", json={"q": "1/2", "boundary": {"1": [1, 0], "-1": [1, 0]}})
    assert response.status_code == 200
    body = response.get_json()
    assert body["diagnostics"]["passed"] is True
