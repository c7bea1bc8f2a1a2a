"""Repository lifecycle: init, commit, clone, push, merge finalize."""

import pytest

from fixtures import A_STATEMENTS, B_STATEMENTS, base_snapshot, visible_by_city
from mergetab.csvio import CsvFormatError, read_snapshot, write_snapshot
from mergetab.mods import Interleaving, apply_history, concat
from mergetab.store import RepoError, RepoLockedError, Repository
from mergetab.table import snapshot_equal

import io

BASE_CSV = """City,State,Population,Electricity
Los Angles,CA,3.2,43
Seattle,D.C.,0.6,8709
Burbank,CA,0.1,0
San Jose,CA,1.0,0
"""


@pytest.fixture
def repo(tmp_path):
    return Repository.init(tmp_path / "repo", BASE_CSV)


def fill(repo):
    for stmt in A_STATEMENTS:
        repo.commit("alvarez", stmt)
    for stmt in B_STATEMENTS:
        repo.commit("bano", stmt)


class TestInit:
    def test_schema_inference_and_base(self, repo):
        assert repo.schema.types == ("str", "str", "dec", "dec")
        base = repo.base()
        assert len(base) == 4
        assert snapshot_equal(base, base_snapshot())

    def test_header_only_csv(self, tmp_path):
        r = Repository.init(tmp_path / "r", "City,State,Population,Electricity\n")
        assert len(r.base()) == 0

    def test_malformed_row_names_line(self, tmp_path):
        from mergetab.schema import Schema

        bad = "City,Population\nX,1\nY,not-a-number\n"
        with pytest.raises(CsvFormatError) as err:
            Repository.init(
                tmp_path / "r", bad, schema=Schema([("City", "str"), ("Population", "dec")])
            )
        assert err.value.line == 3

    def test_inference_falls_back_to_str(self, tmp_path):
        mixed = "City,Population\nX,1\nY,not-a-number\n"
        r = Repository.init(tmp_path / "r2", mixed)
        assert r.schema.types == ("str", "str")

    def test_nonempty_path_refused(self, tmp_path):
        (tmp_path / "r").mkdir()
        (tmp_path / "r" / "junk").write_text("x")
        with pytest.raises(RepoError):
            Repository.init(tmp_path / "r", BASE_CSV)


class TestCommit:
    def test_sequences_and_kinds(self, repo):
        m1 = repo.commit("alvarez", A_STATEMENTS[0])
        m2 = repo.commit("alvarez", A_STATEMENTS[1])
        assert (m1.id.seq, m2.id.seq) == (1, 2)
        assert m1.kind == "update" and m2.kind == "delete"

    def test_duplicate_statement_gets_next_seq(self, repo):
        a = repo.commit("alvarez", A_STATEMENTS[0])
        b = repo.commit("alvarez", A_STATEMENTS[0])
        assert (a.id.seq, b.id.seq) == (1, 2)

    def test_wrong_table_name(self, repo):
        with pytest.raises(RepoError):
            repo.commit("alvarez", "UPDATE other SET Population = 1 WHERE City = 'x'")

    def test_unknown_attribute(self, repo):
        with pytest.raises(KeyError):
            repo.commit("alvarez", "UPDATE db SET Nope = 1 WHERE City = 'x'")

    def test_reopen_reads_identical_history(self, repo):
        fill(repo)
        again = Repository(repo.root)
        assert again.history("alvarez").mods == repo.history("alvarez").mods
        assert again.history("bano").mods == repo.history("bano").mods

    def test_branch_snapshot_replays(self, repo):
        fill(repo)
        v = repo.branch_snapshot("bano")
        assert set(visible_by_city(v)) == {"Los Angles", "Seattle"}


class TestClone:
    def test_clone_is_identical_and_independent(self, repo, tmp_path):
        fill(repo)
        other = Repository.clone(repo.root, tmp_path / "copy")
        assert other.history("alvarez").mods == repo.history("alvarez").mods
        assert snapshot_equal(other.base(), repo.base())
        other.commit("alvarez", "UPDATE db SET Population = 1 WHERE City = 'Seattle'")
        assert len(repo.history("alvarez")) == 2
        assert len(other.history("alvarez")) == 3

    def test_clone_of_clone(self, repo, tmp_path):
        c1 = Repository.clone(repo.root, tmp_path / "c1")
        c2 = Repository.clone(c1.root, tmp_path / "c2")
        assert snapshot_equal(c2.base(), repo.base())

    def test_clone_replays_identically(self, repo, tmp_path):
        fill(repo)
        other = Repository.clone(repo.root, tmp_path / "copy")
        assert snapshot_equal(other.branch_snapshot("bano"), repo.branch_snapshot("bano"))


class TestPush:
    def test_fast_forward(self, repo, tmp_path):
        remote = Repository.clone(repo.root, tmp_path / "remote")
        fill(repo)
        pushed = repo.push(remote, "alvarez")
        assert pushed == 2
        assert remote.history("alvarez").mods == repo.history("alvarez").mods
        assert repo.push(remote, "alvarez") == 0  # idempotent

    def test_divergence_refused(self, repo, tmp_path):
        remote = Repository.clone(repo.root, tmp_path / "remote")
        repo.commit("alvarez", A_STATEMENTS[0])
        remote.commit("alvarez", B_STATEMENTS[0])
        with pytest.raises(RepoError, match="merge must occur"):
            repo.push(remote, "alvarez")


class TestMergeFinalize:
    def test_epoch_snapshot_equals_replay(self, repo):
        fill(repo)
        h1 = repo.history("alvarez")
        h2 = repo.history("bano")
        order = Interleaving([h2[0], h2[1], h1[0], h1[1], h2[2]])
        merged = repo.merge_finalize(order, "alvarez")
        assert repo.epoch == 1
        assert snapshot_equal(merged, apply_history(base_snapshot(), order))
        again = Repository(repo.root)
        assert snapshot_equal(again.base(), merged)
        assert again.branch_meta("alvarez")["merged"]
        assert again.merge_records()[0]["epoch"] == 1

    def test_commit_to_merged_branch_refused(self, repo):
        fill(repo)
        repo.merge_finalize(concat(repo.history("alvarez"), repo.history("bano")), "alvarez")
        with pytest.raises(RepoError, match="merged"):
            repo.commit("alvarez", A_STATEMENTS[0])

    def test_partial_interleaving_refused(self, repo):
        fill(repo)
        h1 = repo.history("alvarez")
        h2 = repo.history("bano")
        with pytest.raises(RepoError):
            repo.merge_finalize(Interleaving([h1[0], h2[0]]), "alvarez")

    def test_stale_branch_cannot_commit(self, repo):
        fill(repo)
        repo.commit("carol", "UPDATE db SET Population = 1 WHERE City = 'Seattle'")
        repo.merge_finalize(concat(repo.history("alvarez"), repo.history("bano")), "alvarez")
        with pytest.raises(RepoError, match="epoch"):
            repo.commit("carol", "UPDATE db SET Population = 2 WHERE City = 'Seattle'")


class TestLock:
    def test_exclusive(self, repo):
        with repo.lock():
            with pytest.raises(RepoLockedError):
                with repo.lock():
                    pass
        with repo.lock():
            pass


class TestCsvFormat:
    def test_internal_roundtrip_preserves_tombstones(self, repo):
        fill(repo)
        v = apply_history(repo.base(), repo.history("alvarez"))
        buf = io.StringIO()
        write_snapshot(v, buf, internal=True)
        back = read_snapshot(buf.getvalue(), v.schema)
        assert snapshot_equal(back, v)
        assert set(back.rids) == set(v.rids)  # tombstones kept

    def test_export_omits_tombstones(self, repo):
        fill(repo)
        v = apply_history(repo.base(), repo.history("alvarez"))
        buf = io.StringIO()
        write_snapshot(v, buf, internal=False)
        text = buf.getvalue()
        assert "Burbank" not in text
        assert text.splitlines()[0] == "_rid,City,State,Population,Electricity"

    def test_null_vs_empty_string(self):
        from mergetab.schema import RowId, Schema
        from mergetab.table import Row, TableSnapshot

        schema = Schema([("s", "str")])
        v = TableSnapshot.from_rows(
            schema,
            [Row(RowId("base", 0), schema, ("",), False), Row(RowId("base", 1), schema, (None,), False)],
        )
        buf = io.StringIO()
        write_snapshot(v, buf, internal=True)
        back = read_snapshot(buf.getvalue(), schema)
        assert back.row(RowId("base", 0))["s"] == ""
        assert back.row(RowId("base", 1))["s"] is None

    def test_quoting_commas_quotes_newlines(self):
        from mergetab.schema import RowId, Schema
        from mergetab.table import Row, TableSnapshot

        schema = Schema([("s", "str")])
        tricky = 'a,"b"\nc'
        v = TableSnapshot.from_rows(schema, [Row(RowId("base", 0), schema, (tricky,), False)])
        buf = io.StringIO()
        write_snapshot(v, buf, internal=True)
        back = read_snapshot(buf.getvalue(), schema)
        assert back.row(RowId("base", 0))["s"] == tricky
