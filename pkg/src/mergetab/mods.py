"""Logical modifications, branch histories, interleavings and replay.

Replay is persistent: applying a modification returns a new snapshot and
leaves the input untouched. A module-level counter records every
snapshot-level application so tests can assert that the symbolic conflict
detector never materializes intermediate versions.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterator, Sequence

import numpy as np

from .exprs import (
    Condition,
    Expr,
    eval_condition,
    eval_expr,
    expr_type,
    validate_condition,
)
from .schema import RowId, Schema
from .table import Column, TableSnapshot
from .values import DEC, INT, STR, Value, check_value, format_value, parse_value

_materializations = 0


def materialization_count() -> int:
    """Number of snapshot-level modification applications so far."""
    return _materializations


@dataclass(frozen=True, order=True)
class ModId:
    branch: str
    seq: int

    def __str__(self) -> str:
        return f"{self.branch}:{self.seq}"


@dataclass(frozen=True)
class Assignment:
    """Single-attribute write: target := rhs, rhs evaluated on the pre-state."""

    target: str
    rhs: Expr

    def is_constant(self) -> bool:
        from .exprs import Lit

        return type(self.rhs) is Lit


@dataclass(frozen=True)
class Update:
    id: ModId
    pred: Condition
    assign: Assignment

    kind = "update"


@dataclass(frozen=True)
class Insert:
    id: ModId
    values: tuple  # ((attr, Value), ...) — missing attributes default to Null

    kind = "insert"

    def value_map(self) -> dict[str, Value]:
        return dict(self.values)

    @property
    def rid(self) -> RowId:
        """Identity of the row this insert creates; fixed at commit time."""
        return RowId(self.id.branch, self.id.seq)


@dataclass(frozen=True)
class Delete:
    id: ModId
    pred: Condition

    kind = "delete"


Modification = Update | Insert | Delete


def make_insert(id: ModId, values: dict[str, Value]) -> Insert:
    return Insert(id, tuple(sorted(values.items())))


def validate_modification(m: Modification, schema: Schema) -> None:
    if m.kind == "insert":
        for attr, v in m.values:
            check_value(v, schema.type_of(attr))
        return
    validate_condition(m.pred, schema)
    if m.kind == "update":
        tgt_type = schema.type_of(m.assign.target)
        rhs_type = expr_type(m.assign.rhs, schema)
        ok = (
            rhs_type is None
            or rhs_type == tgt_type
            or (rhs_type == INT and tgt_type == DEC)
        )
        if not ok:
            raise ValueError(
                f"cannot assign {rhs_type} expression to {tgt_type} "
                f"attribute {m.assign.target!r}"
            )


# --------------------------------------------------------------------------
# Replay


class _StateView:
    """Attr -> Value view over a bare value vector (for per-tuple replay)."""

    __slots__ = ("schema", "values")

    def __init__(self, schema: Schema, values: tuple):
        self.schema = schema
        self.values = values

    def __getitem__(self, attr: str) -> Value:
        return self.values[self.schema.index_of(attr)]


def apply_to_state(schema: Schema, values: tuple, dead: bool, m: Modification):
    """Apply m to a single existing tuple's state; inserts are identity.

    Models the per-tuple locality of state-independent modifications:
    tombstoned states satisfy no predicate and never change.
    """
    if dead or m.kind == "insert":
        return values, dead
    view = _StateView(schema, values)
    if not eval_condition(view, m.pred):
        return values, dead
    if m.kind == "delete":
        return (None,) * len(schema), True
    i = schema.index_of(m.assign.target)
    v = check_value(eval_expr(view, m.assign.rhs), schema.types[i])
    out = list(values)
    out[i] = v
    return tuple(out), dead


def apply_modification(v: TableSnapshot, m: Modification) -> TableSnapshot:
    """One replay step; returns a new snapshot sharing untouched columns."""
    global _materializations
    _materializations += 1
    schema = v.schema
    if m.kind == "insert":
        rid = m.rid
        if v.has_rid(rid):
            raise ValueError(f"row id {rid} already exists")
        vals = m.value_map()
        unknown = set(vals) - set(schema.attrs)
        if unknown:
            raise ValueError(f"insert references unknown attributes {sorted(unknown)}")
        new_cols = []
        for attr, typ, col in zip(schema.attrs, schema.types, v._cols):
            new_cols.append(Column(col.vals + (check_value(vals.get(attr), typ),)))
        return TableSnapshot(
            schema, v.rids + (rid,), tuple(new_cols), Column(v.dead.vals + (False,))
        )

    mask = v.select_mask(m.pred)
    idx = np.nonzero(mask)[0]
    if len(idx) == 0:
        return v

    if m.kind == "delete":
        dead_vals = list(v.dead.vals)
        new_cols = []
        for col in v._cols:
            vals = list(col.vals)
            for i in idx:
                vals[i] = None
            new_cols.append(Column(tuple(vals)))
        for i in idx:
            dead_vals[i] = True
        return TableSnapshot(schema, v.rids, tuple(new_cols), Column(tuple(dead_vals)))

    # update
    ci = schema.index_of(m.assign.target)
    typ = schema.types[ci]
    col = v._cols[ci]
    vals = list(col.vals)
    kernel_out = None
    if typ == INT:
        from ._kernel import try_eval_rows

        kernel_out = try_eval_rows(v, m.assign.rhs, idx)
    if kernel_out is not None:
        out_v, out_n = kernel_out
        for k, i in enumerate(idx):
            vals[i] = None if out_n[k] else int(out_v[k])
    else:
        from .table import _Cursor

        cur = _Cursor(v)
        for i in idx:
            cur.i = int(i)
            vals[i] = check_value(eval_expr(cur, m.assign.rhs), typ)
    new_cols = list(v._cols)
    new_cols[ci] = Column(tuple(vals))
    return TableSnapshot(schema, v.rids, tuple(new_cols), v.dead)


def apply_history(v: TableSnapshot, *seqs) -> TableSnapshot:
    """Left fold of apply_modification over histories/interleavings/lists."""
    for seq in seqs:
        for m in _mods_of(seq):
            v = apply_modification(v, m)
    return v


def affected_set(v: TableSnapshot, m: Modification) -> set[RowId]:
    """Rows impacted by m on v: matching rows, or the future inserted rid."""
    if m.kind == "insert":
        return {m.rid}
    return v.select(m.pred)


# --------------------------------------------------------------------------
# Histories and interleavings


class History:
    """One branch's ordered modification sequence."""

    def __init__(self, branch: str, mods: Sequence[Modification]):
        mods = tuple(mods)
        last = 0
        for m in mods:
            if m.id.branch != branch:
                raise ValueError(f"modification {m.id} does not belong to {branch!r}")
            if m.id.seq <= last:
                raise ValueError(f"non-increasing seq at {m.id}")
            last = m.id.seq
        self.branch = branch
        self.mods = mods

    def __len__(self) -> int:
        return len(self.mods)

    def __iter__(self) -> Iterator[Modification]:
        return iter(self.mods)

    def __getitem__(self, i):
        return self.mods[i]

    def __repr__(self):
        return f"History({self.branch}, {len(self.mods)} mods)"

    def validate(self, schema: Schema) -> None:
        for m in self.mods:
            validate_modification(m, schema)


class Interleaving:
    """A total order over two histories' modifications, locally consistent."""

    def __init__(self, mods: Sequence[Modification]):
        self.mods = tuple(mods)
        seen = set()
        pos: dict[str, int] = {}
        for m in self.mods:
            if m.id in seen:
                raise ValueError(f"duplicate modification {m.id}")
            seen.add(m.id)
            prev = pos.get(m.id.branch)
            if prev is not None and m.id.seq <= prev:
                raise ValueError(f"local order violated at {m.id}")
            pos[m.id.branch] = m.id.seq

    def __len__(self):
        return len(self.mods)

    def __iter__(self):
        return iter(self.mods)

    def ids(self) -> list[ModId]:
        return [m.id for m in self.mods]

    def covers(self, h1: History, h2: History) -> bool:
        return {m.id for m in self.mods} == {m.id for m in h1} | {m.id for m in h2} and len(
            self.mods
        ) == len(h1) + len(h2)


def _mods_of(seq) -> Sequence[Modification]:
    if isinstance(seq, (History, Interleaving)):
        return seq.mods
    return tuple(seq)


def prefix(h: History, k: int) -> History:
    if not (0 <= k <= len(h)):
        raise ValueError(f"prefix length {k} out of range for {h!r}")
    return History(h.branch, h.mods[:k])


def concat(h1: History, h2: History) -> Interleaving:
    """Serial ordering: all of h1 first, then all of h2."""
    return Interleaving(h1.mods + h2.mods)


class InterleavingCapError(Exception):
    def __init__(self, m: int, n: int, cap: int):
        self.count = math.comb(m + n, n)
        super().__init__(
            f"refusing to enumerate {self.count} interleavings "
            f"({m}+{n} modifications exceeds the cap of {cap} combined)"
        )


DEFAULT_ENUM_CAP = 24


def enumerate_interleavings(
    h1: History, h2: History, cap: int = DEFAULT_ENUM_CAP
) -> Iterator[Interleaving]:
    """Every valid interleaving, exactly once, branch-1-first lexicographic."""
    m, n = len(h1), len(h2)
    if m + n > cap:
        raise InterleavingCapError(m, n, cap)

    def rec(i: int, j: int, acc: list):
        if i == m and j == n:
            yield Interleaving(acc)
            return
        if i < m:
            acc.append(h1.mods[i])
            yield from rec(i + 1, j, acc)
            acc.pop()
        if j < n:
            acc.append(h2.mods[j])
            yield from rec(i, j + 1, acc)
            acc.pop()

    return rec(0, 0, [])


# --------------------------------------------------------------------------
# History log records (JSON lines)


def mod_to_record(m: Modification) -> dict:
    from .sqltext import print_condition, print_expr

    rec = {"branch": m.id.branch, "seq": m.id.seq, "kind": m.kind}
    if m.kind == "update":
        rec["set"] = {"attr": m.assign.target, "expr": print_expr(m.assign.rhs)}
        rec["where"] = print_condition(m.pred)
    elif m.kind == "delete":
        rec["where"] = print_condition(m.pred)
    else:
        rec["values"] = {attr: _value_to_json(v) for attr, v in m.values}
    return rec


def mod_from_record(rec: dict, schema: Schema) -> Modification:
    from .sqltext import parse_condition, parse_expr

    mid = ModId(rec["branch"], int(rec["seq"]))
    kind = rec["kind"]
    if kind == "update":
        m: Modification = Update(
            mid,
            parse_condition(rec["where"]),
            Assignment(rec["set"]["attr"], parse_expr(rec["set"]["expr"])),
        )
    elif kind == "delete":
        m = Delete(mid, parse_condition(rec["where"]))
    elif kind == "insert":
        vals = {
            attr: _value_from_json(v, schema.type_of(attr))
            for attr, v in rec["values"].items()
        }
        m = make_insert(mid, vals)
    else:
        raise ValueError(f"unknown modification kind {kind!r}")
    validate_modification(m, schema)
    return m


def _value_to_json(v: Value):
    if v is None:
        return None
    if isinstance(v, Fraction):
        # Dec values go through the exact text form; JSON floats would round.
        return format_value(v)
    if not isinstance(v, bool) and isinstance(v, (int, str)):
        return v
    raise ValueError(f"unsupported value {v!r}")


def _value_from_json(v, typ: str) -> Value:
    if v is None:
        return None
    if isinstance(v, bool):
        raise ValueError("boolean values are not part of the data model")
    if isinstance(v, float):
        raise ValueError(
            f"refusing float {v!r} in history record; encode Dec values as strings"
        )
    if isinstance(v, int):
        return check_value(v, typ)
    if isinstance(v, str):
        return check_value(parse_value(v, typ), typ) if typ != STR else v
    raise ValueError(f"unsupported value {v!r}")
