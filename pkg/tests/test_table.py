"""Values, expressions, snapshots: evaluation semantics and invariants."""

import random
from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fixtures import BURBANK, CITY_SCHEMA, LA, SAN_JOSE, base_snapshot
from gen import random_condition, random_instance
from mergetab.exprs import And, Attr, Bin, Cmp, In, Lit, Not, Or, eval_condition, eval_expr
from mergetab.schema import RowId, Schema
from mergetab.table import Row, TableSnapshot, snapshot_equal
from mergetab.values import EvalError, arith, check_value, format_value, parse_value
from mergetab.sqltext import parse_condition


def row(schema, **vals):
    return Row(
        RowId("base", 99),
        schema,
        tuple(vals.get(a) for a in schema.attrs),
        False,
    )


class TestEvalExpr:
    def test_electricity_scaling(self):
        t = row(CITY_SCHEMA, Electricity=Fraction(43))
        assert eval_expr(t, Bin("*", Attr("Electricity"), Lit(1000))) == 43000

    def test_per_capita_guard_value(self):
        t = row(CITY_SCHEMA, Electricity=Fraction(9000), Population=Fraction(1))
        assert eval_expr(t, Bin("/", Attr("Electricity"), Attr("Population"))) == Fraction(9000)

    def test_null_propagates(self):
        t = row(CITY_SCHEMA, Population=None)
        assert eval_expr(t, Bin("+", Attr("Population"), Lit(1))) is None

    def test_division_by_zero_is_null(self):
        t = row(CITY_SCHEMA, Population=Fraction(0), Electricity=Fraction(5))
        assert eval_expr(t, Bin("/", Attr("Electricity"), Attr("Population"))) is None

    def test_int_division_yields_dec(self):
        s = Schema([("a", "int"), ("b", "int")])
        t = row(s, a=7, b=2)
        v = eval_expr(t, Bin("/", Attr("a"), Attr("b")))
        assert v == Fraction(7, 2) and isinstance(v, Fraction)

    def test_arith_on_str_raises(self):
        t = row(CITY_SCHEMA, City="x")
        with pytest.raises(EvalError):
            eval_expr(t, Bin("+", Attr("City"), Lit(1)))


class TestEvalCondition:
    def test_population_threshold(self):
        t = row(CITY_SCHEMA, Population=Fraction("0.1"))
        assert eval_condition(t, parse_condition("Population <= 0.2"))

    def test_tombstone_satisfies_no_atom(self):
        dead = Row(RowId("base", 7), CITY_SCHEMA, (None,) * 4, True)
        assert not eval_condition(dead, parse_condition("Population <= 0.2"))
        assert not eval_condition(dead, parse_condition("City = 'Seattle'"))
        # connective negation applies to the collapsed atom
        assert eval_condition(dead, parse_condition("NOT City = 'Seattle'"))

    def test_per_capita_guard(self):
        t = row(CITY_SCHEMA, Electricity=Fraction(0), Population=Fraction(1))
        assert eval_condition(t, parse_condition("Electricity / Population < 10"))

    def test_null_comparison_false_and_negation_true(self):
        t = row(CITY_SCHEMA, City=None)
        assert not eval_condition(t, parse_condition("City = 'x'"))
        assert not eval_condition(t, parse_condition("City <> 'x'"))
        assert eval_condition(t, parse_condition("NOT City = 'x'"))

    def test_str_only_compares_with_str(self):
        t = row(CITY_SCHEMA, City="5")
        assert not eval_condition(t, Cmp("=", Attr("City"), Lit(5)))
        assert not eval_condition(t, Cmp("<>", Attr("City"), Lit(5)))

    def test_in_membership_cross_numeric(self):
        t = row(CITY_SCHEMA, Population=Fraction(2))
        assert eval_condition(t, In(Attr("Population"), (2, 3, 5)))


class TestSelect:
    def test_ca_rows(self):
        v = base_snapshot()
        assert v.select(parse_condition("State = 'CA'")) == {LA, BURBANK, SAN_JOSE}

    def test_false_selects_nothing(self):
        v = base_snapshot()
        from mergetab.exprs import FALSE

        assert v.select(FALSE) == set()

    def test_zero_electricity(self):
        v = base_snapshot()
        assert v.select(parse_condition("Electricity = 0")) == {BURBANK, SAN_JOSE}

    def test_select_excludes_tombstones(self):
        schema = Schema([("a", "int")])
        v = TableSnapshot.from_rows(
            schema,
            [
                Row(RowId("base", 0), schema, (1,), False),
                Row(RowId("base", 1), schema, (None,), True),
            ],
        )
        from mergetab.exprs import TRUE

        assert v.select(TRUE) == {RowId("base", 0)}

    def test_intersection_distributivity(self):
        rng = random.Random(7)
        for seed in range(40):
            d0, _, _ = random_instance(seed)
            c1 = random_condition(rng, d0.schema)
            c2 = random_condition(rng, d0.schema)
            both = d0.select(And((c1, c2)))
            assert both == (d0.select(c1) & d0.select(c2))
            assert d0.select(Or((c1, c2))) == (d0.select(c1) | d0.select(c2))

    def test_negation_complement_on_nullfree(self):
        rng = random.Random(3)
        for seed in range(40):
            d0, _, _ = random_instance(seed)
            rows = [r for r in d0.rows() if None not in r.values and not r.tombstone]
            c = random_condition(rng, d0.schema)
            pos = d0.select(c)
            neg = d0.select(Not(c))
            for r in rows:
                assert (r.rid in pos) != (r.rid in neg)


class TestSnapshotEqual:
    def test_reflexive(self):
        v = base_snapshot()
        assert snapshot_equal(v, v)

    def test_good_and_serial_merge_results_differ(self):
        from fixtures import alvarez_history, bano_history
        from mergetab.mods import apply_history, concat

        d0 = base_snapshot()
        h1, h2 = alvarez_history(), bano_history()
        good = apply_history(d0, [h2[0], h2[1], h1[0], h1[1], h2[2]])
        serial = apply_history(d0, concat(h1, h2))
        assert not snapshot_equal(good, serial)

    def test_tombstone_flip_breaks_equality(self):
        schema = Schema([("a", "int")])
        r0 = Row(RowId("base", 0), schema, (1,), False)
        v1 = TableSnapshot.from_rows(schema, [r0])
        v2 = TableSnapshot.from_rows(schema, [Row(RowId("base", 0), schema, (None,), True)])
        assert not snapshot_equal(v1, v2)

    def test_schema_mismatch_raises(self):
        v = base_snapshot()
        other = TableSnapshot.from_rows(Schema([("a", "int")]), [])
        with pytest.raises(ValueError):
            snapshot_equal(v, other)

    def test_equivalence_relation(self):
        for seed in range(30):
            d0, _, _ = random_instance(seed)
            rebuilt = TableSnapshot.from_rows(d0.schema, list(d0.rows()))
            assert snapshot_equal(d0, rebuilt)
            assert snapshot_equal(rebuilt, d0)


class TestValues:
    @given(
        st.fractions(min_value=-100, max_value=100),
        st.fractions(min_value=-100, max_value=100),
    )
    @settings(max_examples=200, deadline=None)
    def test_exact_division_roundtrip(self, a, b):
        if b != 0:
            assert arith("*", arith("/", a, b), b) == a

    def test_dec_reduction(self):
        assert check_value(Fraction(4, 8), "dec") == Fraction(1, 2)

    def test_int64_bounds(self):
        with pytest.raises(ValueError):
            check_value(2**63, "int")
        assert check_value(2**63 - 1, "int") == 2**63 - 1

    @pytest.mark.parametrize(
        "v,text",
        [
            (Fraction(1, 4), "0.25"),
            (Fraction(1, 3), "1/3"),
            (Fraction(-7, 2), "-3.5"),
            (Fraction(16, 5), "3.2"),
            (5, "5"),
            (None, ""),
        ],
    )
    def test_value_text_roundtrip(self, v, text):
        assert format_value(v) == text
        if v is not None and not isinstance(v, int):
            assert parse_value(text, "dec") == v

    def test_eval_deterministic(self):
        t = row(CITY_SCHEMA, Population=Fraction("0.6"), Electricity=Fraction(8709))
        e = Bin("/", Attr("Electricity"), Attr("Population"))
        assert eval_expr(t, e) == eval_expr(t, e)
