"""Pairwise commutativity analysis and the whole-history conflict scan.

A pair of modifications conflicts on a version V when applying them in
the two possible orders leaves at least one tuple of V different. The
scan walks every cross-branch pair (i, j), derives that pair's
non-commutativity condition as valid on the version reached by the serial
prefix arrangement pref_{i-1}(H1) pref_{j-1}(H2), rewrites it back onto
the common ancestor by condition backtracking, and evaluates it there.
No intermediate version is ever materialized.

Flagged rows form a superset of the truly order-dependent rows (pairwise
commutativity is sufficient, not necessary, for auto-mergeability); the
oracle tests assert the no-false-negative direction.
"""

from __future__ import annotations

from dataclasses import dataclass

from .conditions import (
    backtrack_condition,
    backtrack_through,
    simplify,
    values_differ,
)
from .exprs import (
    FALSE,
    TRUE,
    And,
    Attr,
    Condition,
    Not,
    Or,
    _FalseC,
    conj,
    disj,
    eval_condition,
)
from .mods import Delete, History, Insert, Modification, Update
from .schema import RowId
from .table import TableSnapshot
from .values import Value, values_equal


@dataclass(frozen=True)
class PairConflict:
    """One conflicting cross-branch pair, with its rows evaluated on the
    common ancestor version."""

    i: int  # 1-based index into H1
    j: int  # 1-based index into H2
    kinds: frozenset
    cond_on_d0: Condition | None
    rows: frozenset
    flagged_inserts: frozenset

    def to_json(self) -> dict:
        from .sqltext import print_condition

        return {
            "i": self.i,
            "j": self.j,
            "kinds": sorted(self.kinds),
            "condition": None if self.cond_on_d0 is None else print_condition(self.cond_on_d0),
            "row_count": len(self.rows),
            "sample_rows": [str(r) for r in sorted(self.rows)[:10]],
        }


@dataclass(frozen=True)
class ConflictReport:
    pairs: tuple
    conflict_set: frozenset
    auto_mergeable: bool

    def to_json(self) -> dict:
        return {
            "auto_mergeable": self.auto_mergeable,
            "conflict_rows": [str(r) for r in sorted(self.conflict_set)],
            "pair_count": len(self.pairs),
            "pairs": [p.to_json() for p in self.pairs],
        }


# --------------------------------------------------------------------------
# Attribute footprints


def written_attrs(m: Modification, all_attrs) -> frozenset:
    if m.kind == "update":
        return frozenset((m.assign.target,))
    return frozenset(all_attrs)  # deletes and inserts touch the whole row


def read_attrs(m: Modification) -> frozenset:
    if m.kind == "insert":
        return frozenset()
    reads = m.pred.attrs
    if m.kind == "update":
        reads = reads | m.assign.rhs.attrs
    return reads


def _footprints_disjoint(phi: Modification, psi: Modification, all_attrs) -> bool:
    w1 = written_attrs(phi, all_attrs)
    w2 = written_attrs(psi, all_attrs)
    return not (w1 & w2) and not (read_attrs(phi) & w2) and not (w1 & read_attrs(psi))


def pair_kinds(phi: Modification, psi: Modification, all_attrs) -> frozenset:
    kinds = set()
    w1 = written_attrs(phi, all_attrs)
    w2 = written_attrs(psi, all_attrs)
    if w1 & w2:
        kinds.add("WW")
    if read_attrs(phi) & w2:
        kinds.add("RW")
    if read_attrs(psi) & w1:
        kinds.add("WR")
    return frozenset(kinds)


# --------------------------------------------------------------------------
# Specialized builders (constant-assignment updates)


def _lits_equal(a: Value, b: Value) -> bool:
    if a is None and b is None:
        return True
    return values_equal(a, b)


def ww_condition(phi: Update, psi: Update) -> Condition | None:
    """Write-write condition for two constant-assignment updates.

    None when the targets differ (they cannot write the same cell) or the
    written literals are equal (order cannot matter). Otherwise the tuple
    conflicts when it is affected by each update after the other has run,
    or - possible only when the written attribute is read by both
    predicates - when each update disables the other yet both fire on V.
    """
    if phi.assign.target != psi.assign.target:
        return None
    b = phi.assign.rhs.value
    l = psi.assign.rhs.value
    if _lits_equal(b, l):
        return None
    tgt = phi.assign.target
    phi_after_psi = backtrack_condition(phi.pred, psi).cond
    psi_after_phi = backtrack_condition(psi.pred, phi).cond
    parts = [And((phi_after_psi, psi_after_phi))]
    if tgt in phi.pred.attrs and tgt in psi.pred.attrs:
        parts.append(
            And((Not(phi_after_psi), Not(psi_after_phi), phi.pred, psi.pred))
        )
    return simplify(disj(parts))


def rw_condition(reader: Update | Delete, writer: Update) -> Condition | None:
    """Read-write condition: writer's target feeds the reader's predicate.

    None when the written attribute is never read by the reader's
    predicate, or when both write the same attribute (write-write
    territory). Otherwise the conflict needs the reader's write to matter
    on the tuple (vacuous for deletes), the writer to touch the tuple,
    and the writer to flip whether the reader selects it.
    """
    tgt = writer.assign.target
    if tgt not in reader.pred.attrs:
        return None
    if reader.kind == "update" and reader.assign.target == tgt:
        return None
    after = backtrack_condition(reader.pred, writer).cond
    flip = Or((And((reader.pred, Not(after))), And((Not(reader.pred), after))))
    parts = [writer.pred, flip]
    if reader.kind == "update":
        parts.insert(0, values_differ(Attr(reader.assign.target), reader.assign.rhs))
    return simplify(And(tuple(parts)))


# --------------------------------------------------------------------------
# General builder


class _DeadState:
    def __repr__(self):
        return "DEAD"


_DEAD = _DeadState()


def _subst_state(e, subst: dict):
    """Simultaneous substitution: every Attr X becomes subst[X] (pre-state)."""
    from .exprs import Bin

    if not (e.attrs & subst.keys()):
        return e
    if type(e) is Attr:
        return subst.get(e.name, e)
    if type(e) is Bin:
        return Bin(e.op, _subst_state(e.left, subst), _subst_state(e.right, subst))
    return e


def _compose(fired: list[Modification]):
    """Symbolic final state after the fired modifications, as pre-state exprs.

    The map sends each written attribute to an expression over the
    original tuple state; unwritten attributes are implicit identities.
    """
    subst: dict[str, object] = {}
    dead = False
    for m in fired:
        if dead:
            # unreachable under a satisfiable minterm; keep the map stable
            continue
        if m.kind == "delete":
            dead = True
            subst = {}
            continue
        subst = dict(subst)
        subst[m.assign.target] = _subst_state(m.assign.rhs, subst)
    return _DEAD if dead else subst


def _state_diff(f1, f2) -> Condition:
    if f1 is _DEAD and f2 is _DEAD:
        return FALSE
    if f1 is _DEAD or f2 is _DEAD:
        return TRUE  # present-vs-tombstone is always a visible difference
    attrs = set(f1) | set(f2)
    parts = []
    for a in sorted(attrs):
        e1 = f1.get(a, Attr(a))
        e2 = f2.get(a, Attr(a))
        d = values_differ(e1, e2)
        if type(d) is not _FalseC:
            parts.append(d)
    return disj(parts)


def _insert_verdict(ins: Insert, other: Modification) -> bool:
    """Does `other` commute with `ins` on the row the insert creates?

    The inserted row exists after one order and is modified (or missing)
    after the other exactly when other's predicate matches the inserted
    values and its write actually changes them.
    """
    if other.kind == "insert":
        return False
    from .conditions import _InsertRowView

    row = _InsertRowView(ins.value_map())
    if not eval_condition(row, other.pred):
        return False
    if other.kind == "delete":
        return True
    from .exprs import eval_expr

    new_val = eval_expr(row, other.assign.rhs)
    old_val = row[other.assign.target]
    if new_val is None and old_val is None:
        return False
    if new_val is None or old_val is None:
        return True
    return not values_equal(old_val, new_val)


def noncommute_condition(phi: Modification, psi: Modification):
    """Exact non-commutativity condition for any modification pair.

    Returns (condition on existing tuples | None, insert verdicts) where
    insert verdicts are (rid, conflicted) pairs for rows the pair itself
    creates. The condition is built by case-splitting the four membership
    bits (each fires-before/fires-after combination) and comparing the
    symbolic final states per written attribute inside each case.
    """
    iverdicts = []
    if phi.kind == "insert" or psi.kind == "insert":
        if phi.kind == "insert" and psi.kind == "insert":
            return None, ()
        ins, other = (phi, psi) if phi.kind == "insert" else (psi, phi)
        iverdicts.append((ins.rid, _insert_verdict(ins, other)))
        return None, tuple(iverdicts)

    a = phi.pred
    b = psi.pred
    a_after = backtrack_condition(phi.pred, psi).cond  # phi's pred after psi ran
    b_after = backtrack_condition(psi.pred, phi).cond  # psi's pred after phi ran

    parts = []
    for a_bit in (True, False):
        for b_after_bit in (True, False):
            for b_bit in (True, False):
                for a_after_bit in (True, False):
                    fired1 = ([phi] if a_bit else []) + ([psi] if b_after_bit else [])
                    fired2 = ([psi] if b_bit else []) + ([phi] if a_after_bit else [])
                    delta = _state_diff(_compose(fired1), _compose(fired2))
                    if type(delta) is _FalseC:
                        continue
                    lits = [
                        a if a_bit else Not(a),
                        b_after if b_after_bit else Not(b_after),
                        b if b_bit else Not(b),
                        a_after if a_after_bit else Not(a_after),
                    ]
                    parts.append(simplify(conj(lits + [delta])))
    out = simplify(disj([p for p in parts if type(p) is not _FalseC]))
    return (None if type(out) is _FalseC else out), ()


# --------------------------------------------------------------------------
# Pair analysis and the detect driver


def _constant_update(m: Modification) -> bool:
    return m.kind == "update" and m.assign.is_constant()


def pair_condition(phi: Modification, psi: Modification, all_attrs):
    """(condition | None, insert verdicts) for one cross-branch pair."""
    if _footprints_disjoint(phi, psi, all_attrs):
        return None, ()
    if _constant_update(phi) and _constant_update(psi):
        parts = []
        for c in (
            ww_condition(phi, psi),
            rw_condition(phi, psi),
            rw_condition(psi, phi),
        ):
            if c is not None and type(c) is not _FalseC:
                parts.append(c)
        if not parts:
            return None, ()
        out = simplify(disj(parts))
        return (None if type(out) is _FalseC else out), ()
    return noncommute_condition(phi, psi)


def detect(d0: TableSnapshot, h1: History, h2: History) -> ConflictReport:
    """Scan every cross-branch pair; evaluate each condition on the ancestor.

    Pairwise commutativity of all cross pairs is sufficient for
    auto-mergeability, so an empty union here is a safe green light."""
    all_attrs = d0.schema.attrs
    pairs = []
    conflict_rows: set[RowId] = set()
    for i in range(1, len(h1) + 1):
        phi = h1[i - 1]
        for j in range(1, len(h2) + 1):
            psi = h2[j - 1]
            cond, iverdicts = pair_condition(phi, psi, all_attrs)
            rows: set[RowId] = set()
            flagged: set[RowId] = set()
            for rid, bad in iverdicts:
                if bad:
                    flagged.add(rid)
            cond_d0 = None
            if cond is not None:
                prefix = h1.mods[: i - 1] + h2.mods[: j - 1]
                bt = backtrack_through(cond, prefix)
                cond_d0 = bt.cond
                flagged |= {rid for rid, _ in bt.flagged_inserts}
                if type(cond_d0) is not _FalseC:
                    rows |= d0.select(cond_d0)
            rows |= flagged
            if rows:
                pairs.append(
                    PairConflict(
                        i,
                        j,
                        pair_kinds(phi, psi, all_attrs),
                        cond_d0,
                        frozenset(rows),
                        frozenset(flagged),
                    )
                )
                conflict_rows |= rows
    return ConflictReport(
        pairs=tuple(pairs),
        conflict_set=frozenset(conflict_rows),
        auto_mergeable=not conflict_rows,
    )
