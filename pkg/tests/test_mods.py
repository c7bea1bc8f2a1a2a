"""Replay semantics, histories, interleavings, history-log round trips."""

import json
import math
from fractions import Fraction

import pytest

from fixtures import (
    BURBANK,
    CITY_SCHEMA,
    SAN_JOSE,
    alvarez_history,
    bano_history,
    base_snapshot,
    visible_by_city,
)
from gen import random_instance
from mergetab.mods import (
    History,
    Interleaving,
    InterleavingCapError,
    ModId,
    apply_history,
    apply_modification,
    affected_set,
    concat,
    enumerate_interleavings,
    mod_from_record,
    mod_to_record,
    prefix,
)
from mergetab.schema import RowId
from mergetab.sqltext import parse_statement
from mergetab.table import snapshot_equal


def mod(text, branch="z", seq=1):
    return parse_statement(text).lower(CITY_SCHEMA, ModId(branch, seq))


class TestApply:
    def test_scaling_update(self):
        v = apply_modification(base_snapshot(), alvarez_history()[0])
        by_city = visible_by_city(v)
        assert by_city["Los Angles"][3] == 43000
        assert by_city["Burbank"][3] == 0
        assert by_city["San Jose"][3] == 0

    def test_noop_update_preserves_state(self):
        v = base_snapshot()
        out = apply_modification(v, mod("UPDATE db SET Electricity = 1 WHERE City = 'nowhere'"))
        assert snapshot_equal(v, out)

    def test_bano_final_state(self):
        v = apply_history(base_snapshot(), bano_history())
        assert visible_by_city(v) == {
            "Los Angles": ("Los Angles", "CA", Fraction("3.2"), Fraction(43)),
            "Seattle": ("Seattle", "D.C.", Fraction("0.6"), Fraction(8709)),
        }

    def test_ideal_interleaving_matches_published_result(self):
        h1, h2 = alvarez_history(), bano_history()
        v = apply_history(base_snapshot(), [h2[0], h2[1], h1[0], h1[1], h2[2]])
        assert visible_by_city(v) == {
            "Los Angles": ("Los Angles", "CA", Fraction("3.2"), Fraction(43000)),
            "Seattle": ("Seattle", "D.C.", Fraction("0.6"), Fraction(8709)),
            "San Jose": ("San Jose", "CA", Fraction(1), Fraction(9000)),
        }

    def test_serial_drops_san_jose(self):
        h1, h2 = alvarez_history(), bano_history()
        v = apply_history(base_snapshot(), concat(h1, h2))
        assert set(visible_by_city(v)) == {"Los Angles", "Seattle"}

    def test_empty_history_identity(self):
        v = base_snapshot()
        assert snapshot_equal(apply_history(v, []), v)

    def test_insert_assigns_branch_rid(self):
        m = mod("INSERT INTO db (City, State) VALUES ('X', 'TX')", branch="w", seq=4)
        v = apply_modification(base_snapshot(), m)
        assert v.has_rid(RowId("w", 4))
        r = v.row(RowId("w", 4))
        assert r["City"] == "X" and r["Population"] is None

    def test_insert_arity_and_unknown_attr(self):
        with pytest.raises(ValueError):
            parse_statement("INSERT INTO db (City, Nope) VALUES ('X', 1)").lower(
                CITY_SCHEMA, ModId("w", 1)
            )

    def test_update_rhs_uses_pre_state(self):
        # doubling twice through replay: each step reads the prior value
        m1 = mod("UPDATE db SET Electricity = Electricity * 10 WHERE City = 'Seattle'", seq=1)
        m2 = mod("UPDATE db SET Electricity = Electricity * 10 WHERE City = 'Seattle'", seq=2)
        v = apply_history(base_snapshot(), History("z", [m1, m2]))
        assert visible_by_city(v)["Seattle"][3] == 870900

    def test_delete_tombstones_all_null(self):
        v = apply_modification(base_snapshot(), alvarez_history()[1])
        pos = v.rid_pos()[BURBANK]
        assert v.dead.vals[pos]
        assert all(col.vals[pos] is None for col in v._cols)

    def test_input_snapshot_unchanged(self):
        v = base_snapshot()
        before = visible_by_city(v)
        apply_history(v, alvarez_history())
        assert visible_by_city(v) == before


class TestAffectedSet:
    def test_population_filter(self):
        assert affected_set(base_snapshot(), alvarez_history()[1]) == {BURBANK}

    def test_false_pred_empty(self):
        assert affected_set(base_snapshot(), mod("DELETE FROM db WHERE City = 'none'")) == set()

    def test_guard_on_initial_data(self):
        # computed directly: 43/3.2 and 8709/0.6 are >= 10; 0/0.1 and 0/1 are < 10
        assert affected_set(base_snapshot(), bano_history()[2]) == {BURBANK, SAN_JOSE}

    def test_insert_reports_future_rid(self):
        m = mod("INSERT INTO db (City) VALUES ('X')", branch="w", seq=2)
        assert affected_set(base_snapshot(), m) == {RowId("w", 2)}


class TestInterleavings:
    def test_count_matches_binomial(self):
        h1 = History("x", [mod("DELETE FROM db WHERE TRUE", "x", s) for s in (1, 2)])
        h2 = History("y", [mod("DELETE FROM db WHERE TRUE", "y", s) for s in (1, 2, 3)])
        inters = list(enumerate_interleavings(h1, h2))
        assert len(inters) == math.comb(5, 2) == 10
        assert len({tuple(i.ids()) for i in inters}) == 10

    def test_cap_refusal_names_count(self):
        h1 = History("x", [mod("DELETE FROM db WHERE TRUE", "x", s) for s in range(1, 31)])
        h2 = History("y", [mod("DELETE FROM db WHERE TRUE", "y", s) for s in range(1, 31)])
        with pytest.raises(InterleavingCapError) as err:
            list(enumerate_interleavings(h1, h2))
        assert err.value.count == math.comb(60, 30)
        assert "118264581564861424" in str(err.value)

    def test_empty_side_single_interleaving(self):
        h1 = History("x", [])
        h2 = bano_history()
        inters = list(enumerate_interleavings(h1, h2))
        assert len(inters) == 1
        assert inters[0].ids() == [m.id for m in h2]

    def test_validity_invariant(self):
        h1 = alvarez_history()
        h2 = bano_history()
        for inter in enumerate_interleavings(h1, h2):
            assert inter.covers(h1, h2)

    def test_invalid_order_rejected(self):
        h2 = bano_history()
        with pytest.raises(ValueError):
            Interleaving([h2[1], h2[0]])

    def test_replay_determinism(self):
        for seed in range(25):
            d0, h1, h2 = random_instance(seed)
            a = apply_history(d0, h1, h2)
            b = apply_history(d0, h1, h2)
            assert snapshot_equal(a, b)


class TestPrefixConcat:
    def test_prefix_zero_empty(self):
        assert len(prefix(alvarez_history(), 0)) == 0

    def test_prefix_two(self):
        p = prefix(bano_history(), 2)
        assert [m.id.seq for m in p] == [1, 2]

    def test_concat_serial_order(self):
        h1, h2 = alvarez_history(), bano_history()
        assert concat(h1, h2).ids() == [m.id for m in h1] + [m.id for m in h2]

    def test_prefix_out_of_range(self):
        with pytest.raises(ValueError):
            prefix(alvarez_history(), 3)


class TestHistoryLog:
    def test_record_shape(self):
        rec = mod_to_record(alvarez_history()[0])
        assert rec == {
            "branch": "alvarez",
            "seq": 1,
            "kind": "update",
            "set": {"attr": "Electricity", "expr": "Electricity * 1000"},
            "where": "State = 'CA'",
        }

    def test_roundtrip_all_fixture_mods(self):
        for h in (alvarez_history(), bano_history()):
            for m in h:
                rec = json.loads(json.dumps(mod_to_record(m)))
                assert mod_from_record(rec, CITY_SCHEMA) == m

    def test_roundtrip_random_mods(self):
        for seed in range(40):
            d0, h1, h2 = random_instance(seed)
            for m in list(h1) + list(h2):
                rec = json.loads(json.dumps(mod_to_record(m)))
                back = mod_from_record(rec, d0.schema)
                assert back == m, (m, back)

    def test_dec_values_string_encoded(self):
        m = mod("INSERT INTO db (Population) VALUES (0.4)", branch="w", seq=1)
        rec = mod_to_record(m)
        assert rec["values"]["Population"] == "0.4"

    def test_float_rejected(self):
        rec = {"branch": "w", "seq": 1, "kind": "insert", "values": {"Population": 0.4}}
        with pytest.raises(ValueError):
            mod_from_record(rec, CITY_SCHEMA)
