"""Single-table snapshots: immutable, column-oriented, identity-keyed.

Snapshots are persistent values: applying a modification produces a new
snapshot sharing every untouched column with its parent, which also shares
the cached numpy views used by the fast evaluation kernel. Deleted rows
stay in the snapshot as tombstones (all attributes Null) so state
comparison across replay orders stays well-defined per RowId.
"""

from __future__ import annotations

from typing import Iterable, Iterator

import numpy as np

from .exprs import And, Condition, Lit, eval_condition
from .schema import RowId, Schema
from .values import Value, check_value


class Column:
    """One attribute's values; shared structurally between snapshots."""

    __slots__ = ("vals", "_np", "_eqidx")

    def __init__(self, vals: tuple):
        self.vals = vals
        self._np = None
        self._eqidx = None

    def np_view(self):
        """(int64 values, uint8 null mask) for Int columns; Nulls hold 0."""
        if self._np is None:
            n = len(self.vals)
            out = np.zeros(n, dtype=np.int64)
            nulls = np.zeros(n, dtype=np.uint8)
            for i, v in enumerate(self.vals):
                if v is None:
                    nulls[i] = 1
                else:
                    out[i] = v
            self._np = (out, nulls)
        return self._np

    def eq_index(self) -> dict:
        """value -> row-index array, Nulls excluded; shared via column sharing.

        Numeric keys use Python's cross-type hashing, so an Int probe finds
        Dec values of equal magnitude and vice versa.
        """
        if self._eqidx is None:
            idx: dict = {}
            ints_only = True
            for v in self.vals:
                if v is not None and (isinstance(v, bool) or not isinstance(v, int)):
                    ints_only = False
                    break
            if ints_only and self.vals:
                vals, nulls = self.np_view()
                order = np.argsort(vals, kind="stable")
                sv = vals[order]
                boundaries = np.nonzero(np.diff(sv))[0] + 1
                starts = np.concatenate(([0], boundaries))
                ends = np.concatenate((boundaries, [len(sv)]))
                for s, e in zip(starts, ends):
                    idx[int(sv[s])] = order[s:e]
                if nulls.any() and 0 in idx:
                    # Nulls sit in the zero bucket of the packed view
                    null_rows = np.nonzero(nulls)[0]
                    kept = idx[0][~np.isin(idx[0], null_rows)]
                    if len(kept):
                        idx[0] = kept
                    else:
                        del idx[0]
            else:
                buckets: dict = {}
                for i, v in enumerate(self.vals):
                    if v is not None:
                        buckets.setdefault(v, []).append(i)
                idx = {k: np.asarray(v, dtype=np.int64) for k, v in buckets.items()}
            self._eqidx = idx
        return self._eqidx


class Row:
    """One tuple: hidden identity, attribute values, tombstone flag."""

    __slots__ = ("rid", "schema", "values", "tombstone")

    def __init__(self, rid: RowId, schema: Schema, values: tuple, tombstone: bool = False):
        if len(values) != len(schema):
            raise ValueError("row arity does not match schema")
        if tombstone and any(v is not None for v in values):
            raise ValueError("tombstoned row must hold only Nulls")
        self.rid = rid
        self.schema = schema
        self.values = values
        self.tombstone = tombstone

    def __getitem__(self, attr: str) -> Value:
        return self.values[self.schema.index_of(attr)]

    def as_dict(self) -> dict[str, Value]:
        return dict(zip(self.schema.attrs, self.values))

    def __eq__(self, other):
        return (
            isinstance(other, Row)
            and self.rid == other.rid
            and self.tombstone == other.tombstone
            and self.values == other.values
        )

    def __hash__(self):
        return hash((self.rid, self.tombstone, self.values))

    def __repr__(self):
        flag = " (dead)" if self.tombstone else ""
        return f"Row({self.rid}{flag}: {self.values})"


class _Cursor:
    """Reusable row view for bulk evaluation without per-row allocation."""

    __slots__ = ("_snap", "i")

    def __init__(self, snap: "TableSnapshot"):
        self._snap = snap
        self.i = 0

    def __getitem__(self, attr: str) -> Value:
        return self._snap._cols[self._snap.schema.index_of(attr)].vals[self.i]


class TableSnapshot:
    """Immutable table state: schema + rows keyed by hidden RowId."""

    __slots__ = ("schema", "rids", "_cols", "dead", "_rid_pos")

    def __init__(self, schema: Schema, rids: tuple, cols: tuple, dead: Column):
        self.schema = schema
        self.rids = rids
        self._cols = cols
        self.dead = dead
        self._rid_pos = None

    # -- construction ------------------------------------------------------

    @classmethod
    def from_rows(cls, schema: Schema, rows: Iterable[Row] | Iterable[tuple]) -> "TableSnapshot":
        rids = []
        seen = set()
        per_col: list[list[Value]] = [[] for _ in schema.attrs]
        dead_flags = []
        for r in rows:
            if not isinstance(r, Row):
                rid, values, tomb = r
                r = Row(rid, schema, tuple(values), tomb)
            if r.rid in seen:
                raise ValueError(f"duplicate row id {r.rid}")
            seen.add(r.rid)
            rids.append(r.rid)
            for i, v in enumerate(r.values):
                per_col[i].append(check_value(v, schema.types[i]))
            dead_flags.append(r.tombstone)
        cols = tuple(Column(tuple(c)) for c in per_col)
        return cls(schema, tuple(rids), cols, Column(tuple(dead_flags)))

    @classmethod
    def empty(cls, schema: Schema) -> "TableSnapshot":
        return cls(schema, (), tuple(Column(()) for _ in schema.attrs), Column(()))

    # -- access ------------------------------------------------------------

    def __len__(self) -> int:
        return len(self.rids)

    def rid_pos(self) -> dict:
        if self._rid_pos is None:
            self._rid_pos = {rid: i for i, rid in enumerate(self.rids)}
        return self._rid_pos

    def has_rid(self, rid: RowId) -> bool:
        return rid in self.rid_pos()

    def row_at(self, i: int) -> Row:
        return Row(
            self.rids[i],
            self.schema,
            tuple(col.vals[i] for col in self._cols),
            bool(self.dead.vals[i]),
        )

    def row(self, rid: RowId) -> Row:
        return self.row_at(self.rid_pos()[rid])

    def rows(self) -> Iterator[Row]:
        for i in range(len(self.rids)):
            yield self.row_at(i)

    def visible_rids(self) -> set[RowId]:
        return {rid for i, rid in enumerate(self.rids) if not self.dead.vals[i]}

    def n_visible(self) -> int:
        return sum(1 for d in self.dead.vals if not d)

    def column(self, attr: str) -> Column:
        return self._cols[self.schema.index_of(attr)]

    def dead_np(self) -> np.ndarray:
        arr = self.dead._np
        if arr is None:
            arr = np.fromiter((1 if d else 0 for d in self.dead.vals), dtype=np.uint8, count=len(self.rids))
            self.dead._np = arr
        return arr

    # -- evaluation --------------------------------------------------------

    def select_mask(self, cond: Condition) -> np.ndarray:
        """Boolean mask of visible rows satisfying cond (uint8, len == rows)."""
        mask = self._indexed_mask(cond)
        if mask is not None:
            return mask
        from ._kernel import try_select_mask

        mask = try_select_mask(self, cond)
        if mask is not None:
            return mask
        return self._scan_mask(cond, None)

    def _scan_mask(self, cond: Condition, rows) -> np.ndarray:
        out = np.zeros(len(self.rids) if rows is None else len(rows), dtype=np.uint8)
        cur = _Cursor(self)
        dead = self.dead.vals
        it = range(len(self.rids)) if rows is None else rows
        for k, i in enumerate(it):
            i = int(i)
            if dead[i]:
                continue
            cur.i = i
            if eval_condition(cur, cond):
                out[k if rows is not None else i] = 1
        return out

    def _anchor_rows(self, branch: Condition):
        """Smallest candidate row set from a positive equality/IN conjunct."""
        from .exprs import Attr as _Attr, Cmp as _Cmp, In as _In

        conjuncts = branch.children if isinstance(branch, And) else (branch,)
        best = None
        for c in conjuncts:
            rows = None
            if type(c) is _Cmp and c.op == "=" and type(c.left) is _Attr and type(c.right) is Lit:
                if c.right.value is not None:
                    idx = self.column(c.left.name).eq_index()
                    rows = idx.get(c.right.value)
                    rows = rows if rows is not None else np.zeros(0, dtype=np.int64)
            elif type(c) is _In and type(c.expr) is _Attr:
                idx = self.column(c.expr.name).eq_index()
                parts = [idx[v] for v in c.choices if v is not None and v in idx]
                rows = np.concatenate(parts) if parts else np.zeros(0, dtype=np.int64)
            if rows is not None and (best is None or len(rows) < len(best)):
                best = rows
        return best

    def _indexed_mask(self, cond: Condition):
        """Index-driven evaluation for disjunctions of anchored conjunctions.

        Every disjunct must carry a positive equality/IN atom on a bare
        attribute; its index bucket bounds the candidate rows, which are
        then verified against the full branch condition."""
        from .exprs import Or as _Or

        branches = list(cond.children) if type(cond) is _Or else [cond]
        plans = []
        total = 0
        for b in branches:
            rows = self._anchor_rows(b)
            if rows is None:
                return None
            plans.append((b, rows))
            total += len(rows)
            if total * 3 > len(self.rids):
                return None  # scanning is cheaper
        out = np.zeros(len(self.rids), dtype=np.uint8)
        from ._kernel import try_select_on_rows

        for b, rows in plans:
            if len(rows) == 0:
                continue
            sub = try_select_on_rows(self, b, rows)
            if sub is None:
                sub = self._scan_mask(b, rows)
            out[rows[np.nonzero(sub)[0]]] = 1
        return out

    def select(self, cond: Condition) -> set[RowId]:
        """RowIds of the non-tombstoned rows satisfying cond."""
        mask = self.select_mask(cond)
        return {self.rids[i] for i in np.nonzero(mask)[0]}


def snapshot_equal(v1: TableSnapshot, v2: TableSnapshot) -> bool:
    """True iff the visible row sets match exactly, keyed by RowId."""
    if v1.schema != v2.schema:
        raise ValueError("snapshot_equal across different schemas")
    if v1 is v2:
        return True
    p2 = v2.rid_pos()
    seen = 0
    for i, rid in enumerate(v1.rids):
        if v1.dead.vals[i]:
            continue
        j = p2.get(rid)
        if j is None or v2.dead.vals[j]:
            return False
        # Columns are type-homogeneous (check_value coerces on construction),
        # so plain equality is exact here.
        for c1, c2 in zip(v1._cols, v2._cols):
            a, b = c1.vals[i], c2.vals[j]
            if (a is None) != (b is None) or a != b:
                return False
        seen += 1
    return seen == v2.n_visible()


def select(v: TableSnapshot, c: Condition) -> set[RowId]:
    return v.select(c)
