"""Shared test fixture: the four-city energy dataset and its two branches."""

from __future__ import annotations

from fractions import Fraction

from mergetab.mods import History, ModId
from mergetab.schema import BASE_ORIGIN, RowId, Schema
from mergetab.sqltext import parse_statement
from mergetab.table import Row, TableSnapshot

CITY_SCHEMA = Schema(
    [("City", "str"), ("State", "str"), ("Population", "dec"), ("Electricity", "dec")]
)

LA = RowId(BASE_ORIGIN, 0)
SEATTLE = RowId(BASE_ORIGIN, 1)
BURBANK = RowId(BASE_ORIGIN, 2)
SAN_JOSE = RowId(BASE_ORIGIN, 3)

# 'Los Angles' is deliberate: the dataset ships with the typo one of the
# branches in the worked examples fixes.
_BASE_ROWS = [
    (LA, ("Los Angles", "CA", Fraction("3.2"), Fraction(43)), False),
    (SEATTLE, ("Seattle", "D.C.", Fraction("0.6"), Fraction(8709)), False),
    (BURBANK, ("Burbank", "CA", Fraction("0.1"), Fraction(0)), False),
    (SAN_JOSE, ("San Jose", "CA", Fraction("1.0"), Fraction(0)), False),
]

A_STATEMENTS = [
    "UPDATE db SET Electricity = Electricity * 1000 WHERE State = 'CA'",
    "DELETE FROM db WHERE Population <= 0.2",
]

B_STATEMENTS = [
    "UPDATE db SET Electricity = 9 WHERE City = 'San Jose'",
    "UPDATE db SET Electricity = 0.4 WHERE City = 'Burbank'",
    "DELETE FROM db WHERE Electricity / Population < 10",
]


def base_snapshot() -> TableSnapshot:
    return TableSnapshot.from_rows(
        CITY_SCHEMA, [Row(rid, CITY_SCHEMA, vals, dead) for rid, vals, dead in _BASE_ROWS]
    )


def _history(branch: str, statements: list[str]) -> History:
    mods = [
        parse_statement(text).lower(CITY_SCHEMA, ModId(branch, seq))
        for seq, text in enumerate(statements, start=1)
    ]
    return History(branch, mods)


def alvarez_history() -> History:
    return _history("alvarez", A_STATEMENTS)


def bano_history() -> History:
    return _history("bano", B_STATEMENTS)


def visible_by_city(v: TableSnapshot) -> dict[str, tuple]:
    out = {}
    for row in v.rows():
        if not row.tombstone:
            out[row["City"]] = row.values
    return out
