import pytest
from fastapi.testclient import TestClient

from config import Config, PRESETS
from main import app
from tests.conftest import OPB_DIR

EXAMPLE_1 = (OPB_DIR / "example1.opb").read_text()


@pytest.fixture
def client():
    return TestClient(app)


def test_root(client):
    response = client.get("/")
    assert response.status_code == 200
    assert "POST /solve" in response.json()["endpoints"]


def test_health(client):
    response = client.get("/health")
    assert response.status_code == 200
    body = response.json()
    assert body["status"] == "healthy"
    assert body["version"] == Config.VERSION
    assert body["presets"] == list(PRESETS)


def test_solve(client):
    response = client.post("/solve", json={"opb": EXAMPLE_1, "cutoff": 5, "max_flips": 20000, "seed": 3})
    assert response.status_code == 200
    body = response.json()
    assert body["status"] == "SATISFIABLE"
    assert body["cost"] == 1
    assert body["literals"][0] == "x1"
    assert len(body["literals"]) == 4
    assert body["improvements"][-1][0] == 1
    assert body["statistics"]["flips"] <= 20000


def test_solve_infeasible_is_unknown(client):
    opb = (OPB_DIR / "infeasible.opb").read_text()
    response = client.post("/solve", json={"opb": opb, "cutoff": 5, "max_flips": 500})
    body = response.json()
    assert body["status"] == "UNKNOWN"
    assert body["literals"] is None


def test_solve_trivially_unsat(client):
    response = client.post("/solve", json={"opb": "+1 x1 >= 2 ;\n"})
    assert response.status_code == 200
    assert response.json()["status"] == "UNSATISFIABLE"


def test_solve_parse_error(client):
    response = client.post("/solve", json={"opb": "+1 x1 >= 1\n"})
    assert response.status_code == 400
    body = response.json()
    assert body["status"] == "error"
    assert "line 1" in body["message"]


def test_solve_rejects_excessive_cutoff(client):
    response = client.post("/solve", json={"opb": EXAMPLE_1, "cutoff": Config.MAX_API_CUTOFF + 1})
    assert response.status_code == 422


def test_solve_rejects_unknown_preset(client):
    response = client.post("/solve", json={"opb": EXAMPLE_1, "preset": "fastest"})
    assert response.status_code == 422


def test_verify(client):
    response = client.post("/verify", json={"opb": EXAMPLE_1, "solution": "s SATISFIABLE\nv x1 x2 -x3 -x4\n"})
    assert response.status_code == 200
    assert response.json() == {"feasible": True, "violated": [], "objective_value": 1}


def test_verify_violation(client):
    response = client.post("/verify", json={"opb": EXAMPLE_1, "solution": "v x1 -x2 -x3 -x4\n"})
    body = response.json()
    assert body["feasible"] is False
    assert body["violated"] == [0]


@pytest.mark.parametrize("solution", ["s UNKNOWN\n", "v x1 x2\n", "v x1 x2 x3 x4 x5\n"])
def test_verify_bad_solution(client, solution):
    response = client.post("/verify", json={"opb": EXAMPLE_1, "solution": solution})
    assert response.status_code == 400
    assert response.json()["status"] == "error"
