"""CLI surface: exit codes, diagnostics, end-to-end repo flows."""

import json

import pytest
from click.testing import CliRunner

from fixtures import A_STATEMENTS, B_STATEMENTS
from mergetab.cli import main

BASE_CSV = """City,State,Population,Electricity
Los Angles,CA,3.2,43
Seattle,D.C.,0.6,8709
Burbank,CA,0.1,0
San Jose,CA,1.0,0
"""


@pytest.fixture
def runner():
    return CliRunner()


@pytest.fixture
def repo(tmp_path, runner):
    csv = tmp_path / "data.csv"
    csv.write_text(BASE_CSV)
    root = tmp_path / "repo"
    res = runner.invoke(main, ["init", str(csv), "--repo", str(root)])
    assert res.exit_code == 0, res.output
    for stmt in A_STATEMENTS:
        assert runner.invoke(main, ["commit", stmt, "--repo", str(root), "--branch", "alvarez"]).exit_code == 0
    for stmt in B_STATEMENTS:
        assert runner.invoke(main, ["commit", stmt, "--repo", str(root), "--branch", "bano"]).exit_code == 0
    return root


class TestDetect:
    def test_conflicts_exit_3_and_lists_row(self, runner, repo):
        res = runner.invoke(main, ["detect", "alvarez", "bano", "--repo", str(repo)])
        assert res.exit_code == 3
        assert "base:3" in res.output

    def test_json_report(self, runner, repo):
        res = runner.invoke(main, ["detect", "alvarez", "bano", "--repo", str(repo), "--json"])
        data = json.loads(res.output)
        assert data["auto_mergeable"] is False
        assert "base:3" in data["conflict_rows"]

    def test_disjoint_exit_0(self, runner, repo):
        r = runner
        assert r.invoke(main, ["commit", "UPDATE db SET Population = 7 WHERE City = 'Seattle'", "--repo", str(repo), "--branch", "carol"]).exit_code == 0
        assert r.invoke(main, ["commit", "UPDATE db SET Electricity = 1 WHERE City = 'Burbank'", "--repo", str(repo), "--branch", "dave"]).exit_code == 0
        res = r.invoke(main, ["detect", "carol", "dave", "--repo", str(repo)])
        assert res.exit_code == 0, res.output
        assert "auto-mergeable" in res.output


class TestCommitErrors:
    def test_malformed_statement_exit_2_with_caret(self, runner, repo):
        res = runner.invoke(main, ["commit", "UPDATE db SET = 5", "--repo", str(repo)])
        assert res.exit_code == 2
        assert "^" in res.output

    def test_unknown_attribute_exit_2(self, runner, repo):
        res = runner.invoke(main, ["commit", "UPDATE db SET Nope = 5 WHERE City = 'x'", "--repo", str(repo)])
        assert res.exit_code == 2

    def test_wrong_table_exit_2(self, runner, repo):
        res = runner.invoke(main, ["commit", "UPDATE other SET Population = 5 WHERE City = 'x'", "--repo", str(repo)])
        assert res.exit_code == 2
        assert "single table" in res.output


class TestMerge:
    def test_scripted_merge_reproduces_ideal_state(self, runner, repo):
        res = runner.invoke(
            main,
            ["merge", "alvarez", "bano", "--repo", str(repo), "--answers", "right,left"],
        )
        assert res.exit_code == 0, res.output
        assert "merged order: bano:1 alvarez:1 alvarez:2 bano:2 bano:3" in res.output
        table = runner.invoke(main, ["table", "alvarez", "--repo", str(repo)])
        assert "San Jose" in table.output and "9000" in table.output
        assert "Burbank" not in table.output

    def test_merge_without_finalize_leaves_epoch(self, runner, repo):
        res = runner.invoke(
            main,
            ["merge", "alvarez", "bano", "--repo", str(repo), "--answers", "left", "--no-finalize"],
        )
        assert res.exit_code == 0, res.output
        meta = json.loads((repo / "repo.json").read_text())
        assert meta["epoch"] == 0


class TestCloneAndPush:
    def test_clone_then_push_roundtrip(self, runner, repo, tmp_path):
        dst = tmp_path / "copy"
        assert runner.invoke(main, ["clone", str(repo), str(dst)]).exit_code == 0
        assert runner.invoke(
            main,
            ["commit", "UPDATE db SET Population = 7 WHERE City = 'Seattle'", "--repo", str(dst), "--branch", "alvarez"],
        ).exit_code == 0
        res = runner.invoke(main, ["push", str(repo), "--repo", str(dst), "--branch", "alvarez"])
        assert res.exit_code == 0
        assert "pushed 1 commits" in res.output


class TestOracleAndBench:
    def test_oracle_lists_ground_truth(self, runner, repo):
        res = runner.invoke(main, ["oracle", "alvarez", "bano", "--repo", str(repo)])
        assert res.exit_code == 0
        assert "base:3" in res.output
        assert "1 conflicting row(s)" in res.output

    def test_bench_tiny_config(self, runner, tmp_path):
        cfg = {"rows": 400, "width": 6, "history_len": 5, "seed": 3}
        p = tmp_path / "bench.json"
        p.write_text(json.dumps(cfg))
        out = tmp_path / "results.csv"
        res = runner.invoke(main, ["bench", "--config", str(p), "--out", str(out), "--seeds", "1"])
        assert res.exit_code == 0, res.output
        lines = out.read_text().splitlines()
        assert lines[0].startswith("seed,method,flagged")
        assert any(line.startswith("3,detect") for line in lines)
