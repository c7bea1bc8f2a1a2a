"""Ground-truth DP, exhaustive replay, locking and 3-way-diff baselines."""

import pytest

from fixtures import (
    BURBANK,
    LA,
    SAN_JOSE,
    SEATTLE,
    alvarez_history,
    bano_history,
    base_snapshot,
)
from gen import random_instance
from mergetab.detect import detect
from mergetab.mods import History, apply_history
from mergetab.oracles import (
    StateExplosion,
    exhaustive_automergeable,
    exhaustive_conflicts,
    locking_conflicts,
    oracle_conflicts,
    three_way_diff_conflicts,
)


class TestOracle:
    def test_fixture_exactly_san_jose(self):
        assert oracle_conflicts(base_snapshot(), alvarez_history(), bano_history()) == {SAN_JOSE}

    def test_empty_history_no_conflicts(self):
        assert oracle_conflicts(base_snapshot(), alvarez_history(), History("bano", [])) == set()

    def test_matches_exhaustive_replay(self):
        for seed in range(200):
            d0, h1, h2 = random_instance(seed, max_mods=4)
            dp = oracle_conflicts(d0, h1, h2)
            brute = exhaustive_conflicts(d0, h1, h2)
            assert dp == brute, seed

    def test_state_explosion_abort(self):
        d0, h1, h2 = random_instance(3, max_rows=8, max_mods=5)
        if not (len(h1) and len(h2)):
            pytest.skip("degenerate instance")
        with pytest.raises(StateExplosion):
            oracle_conflicts(d0, h1, h2, threshold=1)


class TestExhaustive:
    def test_fixture_not_automergeable(self):
        assert not exhaustive_automergeable(base_snapshot(), alvarez_history(), bano_history())

    def test_single_branch_trivially_automergeable(self):
        assert exhaustive_automergeable(base_snapshot(), alvarez_history(), History("bano", []))

    def test_noop_histories_automergeable(self):
        from fixtures import CITY_SCHEMA
        from mergetab.mods import ModId
        from mergetab.sqltext import parse_statement

        noop1 = History(
            "x", [parse_statement("DELETE FROM db WHERE City = 'none'").lower(CITY_SCHEMA, ModId("x", 1))]
        )
        noop2 = History(
            "y", [parse_statement("DELETE FROM db WHERE City = 'none'").lower(CITY_SCHEMA, ModId("y", 1))]
        )
        assert exhaustive_automergeable(base_snapshot(), noop1, noop2)


class TestLocking:
    def test_fixture_record_level(self):
        rows = locking_conflicts(base_snapshot(), alvarez_history(), bano_history(), "record")
        assert rows >= {LA, BURBANK, SAN_JOSE}
        assert SEATTLE not in rows

    def test_cell_subset_of_record(self):
        for seed in range(60):
            d0, h1, h2 = random_instance(seed)
            cell = locking_conflicts(d0, h1, h2, "cell")
            record = locking_conflicts(d0, h1, h2, "record")
            assert cell <= record, seed

    def test_disjoint_attribute_histories_cell_empty(self):
        from fixtures import CITY_SCHEMA
        from mergetab.mods import ModId
        from mergetab.sqltext import parse_statement

        h1 = History(
            "x",
            [
                parse_statement("UPDATE db SET Electricity = 1 WHERE Electricity = 0").lower(
                    CITY_SCHEMA, ModId("x", 1)
                )
            ],
        )
        h2 = History(
            "y",
            [
                parse_statement("UPDATE db SET Population = 9 WHERE Population <= 0.2").lower(
                    CITY_SCHEMA, ModId("y", 1)
                )
            ],
        )
        assert locking_conflicts(base_snapshot(), h1, h2, "cell") == set()

    def test_locking_never_misses_true_conflicts(self):
        for seed in range(150):
            d0, h1, h2 = random_instance(seed)
            truth = oracle_conflicts(d0, h1, h2)
            cell = locking_conflicts(d0, h1, h2, "cell")
            record = locking_conflicts(d0, h1, h2, "record")
            assert truth <= cell <= record, seed

    def test_unknown_granularity(self):
        with pytest.raises(ValueError):
            locking_conflicts(base_snapshot(), alvarez_history(), bano_history(), "page")


class TestThreeWayDiff:
    def test_fixture_misses_san_jose(self):
        d0 = base_snapshot()
        f1 = apply_history(d0, alvarez_history())
        f2 = apply_history(d0, bano_history())
        rows = three_way_diff_conflicts(d0, f1, f2)
        assert SAN_JOSE not in rows  # the defining false negative

    def test_identical_finals_empty(self):
        d0 = base_snapshot()
        f = apply_history(d0, alvarez_history())
        assert three_way_diff_conflicts(d0, f, f) == set()

    def test_one_sided_edit_not_flagged(self):
        d0 = base_snapshot()
        f1 = apply_history(d0, alvarez_history())
        assert three_way_diff_conflicts(d0, f1, d0) == set()

    def test_flags_doubly_edited_rows(self):
        from fixtures import CITY_SCHEMA
        from mergetab.mods import ModId
        from mergetab.sqltext import parse_statement

        def one(branch, text):
            return History(branch, [parse_statement(text).lower(CITY_SCHEMA, ModId(branch, 1))])

        d0 = base_snapshot()
        f1 = apply_history(d0, one("x", "UPDATE db SET Electricity = 1 WHERE City = 'Seattle'"))
        f2 = apply_history(d0, one("y", "UPDATE db SET Electricity = 2 WHERE City = 'Seattle'"))
        assert three_way_diff_conflicts(d0, f1, f2) == {SEATTLE}


class TestCrossMethodInvariants:
    def test_detect_between_oracle_and_locking(self):
        for seed in range(80):
            d0, h1, h2 = random_instance(seed)
            truth = oracle_conflicts(d0, h1, h2)
            flagged = set(detect(d0, h1, h2).conflict_set)
            assert truth <= flagged, seed
