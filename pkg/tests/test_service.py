"""HTTP facade: merge sessions end to end, paging, restart survival."""

import pytest
from fastapi.testclient import TestClient

from fixtures import A_STATEMENTS, B_STATEMENTS
from mergetab.service import create_app
from mergetab.store import Repository

BASE_CSV = """City,State,Population,Electricity
Los Angles,CA,3.2,43
Seattle,D.C.,0.6,8709
Burbank,CA,0.1,0
San Jose,CA,1.0,0
"""


@pytest.fixture
def repo(tmp_path):
    r = Repository.init(tmp_path / "repo", BASE_CSV)
    for stmt in A_STATEMENTS:
        r.commit("alvarez", stmt)
    for stmt in B_STATEMENTS:
        r.commit("bano", stmt)
    return r


@pytest.fixture
def client(repo):
    return TestClient(create_app(repo.root))


def open_session(client):
    resp = client.post("/api/merge", json={"branch_a": "alvarez", "branch_b": "bano"})
    assert resp.status_code == 200
    return resp.json()


class TestBranchesAndTable:
    def test_branches(self, client):
        data = client.get("/api/branches").json()
        assert data["schema_version"] == 1
        names = {b["name"]: b for b in data["branches"]}
        assert names["alvarez"]["commits"] == 2
        assert names["bano"]["commits"] == 3

    def test_table_paging(self, client):
        # Alvarez's replay keeps LA, Seattle and San Jose (only Burbank
        # falls to the population filter)
        page = client.get("/api/table/alvarez", params={"limit": 1, "offset": 1}).json()
        assert page["total"] == 3
        assert len(page["rows"]) == 1
        assert page["rows"][0]["City"] == "Seattle"

    def test_unknown_branch_404(self, client):
        assert client.get("/api/table/nope").status_code == 404


class TestMergeFlow:
    def test_open_reports_conflicts(self, client):
        data = open_session(client)
        assert data["report"]["auto_mergeable"] is False
        assert "base:3" in data["report"]["conflict_rows"]

    def test_duplicate_pair_409(self, client):
        open_session(client)
        resp = client.post("/api/merge", json={"branch_a": "bano", "branch_b": "alvarez"})
        assert resp.status_code == 409

    def test_unknown_branch_404(self, client):
        resp = client.post("/api/merge", json={"branch_a": "alvarez", "branch_b": "nope"})
        assert resp.status_code == 404

    def test_full_session_reproduces_ideal_state(self, client):
        sid = open_session(client)["session_id"]
        prompt = client.get(f"/api/merge/{sid}/prompt").json()
        assert prompt["left"]["id"] == "alvarez:1"
        assert prompt["right"]["id"] == "bano:1"
        assert len(prompt["sample_rows"]) <= 20
        sj = prompt["sample_rows"][0]
        assert sj["left_first"]["Electricity"] == "9"
        assert sj["right_first"]["Electricity"] == "9000"

        nxt = client.post(f"/api/merge/{sid}/answer", json={"precedes": "right"}).json()
        assert nxt["done"] is False
        done = client.post(f"/api/merge/{sid}/answer", json={"precedes": "left"}).json()
        assert done["done"] is True
        assert done["order"] == ["bano:1", "alvarez:1", "alvarez:2", "bano:2", "bano:3"]

        fin = client.post(f"/api/merge/{sid}/finalize")
        assert fin.status_code == 200
        assert fin.json()["epoch"] == 1
        assert fin.json()["merged_rows"] == 3

        table = client.get("/api/table/alvarez").json()
        by_city = {r["City"]: r for r in table["rows"]}
        assert by_city["San Jose"]["Electricity"] == "9000"

    def test_answer_after_done_409(self, client):
        sid = open_session(client)["session_id"]
        client.post(f"/api/merge/{sid}/answer", json={"precedes": "left"})
        done = client.get(f"/api/merge/{sid}/prompt").json()
        assert done["done"] is True
        resp = client.post(f"/api/merge/{sid}/answer", json={"precedes": "left"})
        assert resp.status_code == 409

    def test_finalize_before_done_409(self, client):
        sid = open_session(client)["session_id"]
        assert client.post(f"/api/merge/{sid}/finalize").status_code == 409

    def test_unknown_session_404(self, client):
        assert client.get("/api/merge/deadbeef/prompt").status_code == 404

    def test_session_survives_restart(self, repo):
        app1 = create_app(repo.root)
        c1 = TestClient(app1)
        sid = c1.post("/api/merge", json={"branch_a": "alvarez", "branch_b": "bano"}).json()[
            "session_id"
        ]
        c1.post(f"/api/merge/{sid}/answer", json={"precedes": "right"})
        # new process: fresh app over the same repository
        c2 = TestClient(create_app(repo.root))
        prompt = c2.get(f"/api/merge/{sid}/prompt").json()
        assert prompt["done"] is False
        assert prompt["left"]["id"] == "alvarez:1"
        assert prompt["right"]["id"] == "bano:2"
        assert prompt["answered"] == 1


class TestAuth:
    def test_token_enforced(self, repo):
        client = TestClient(create_app(repo.root, token="sekrit"))
        assert client.get("/api/branches").status_code == 401
        ok = client.get("/api/branches", headers={"Authorization": "Bearer sekrit"})
        assert ok.status_code == 200
