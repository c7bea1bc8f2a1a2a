"""Condition algebra: substitution, simplification, and backtracking.

Backtracking rewrites a condition that is valid on a later table version
into an equivalent condition on an earlier version, one modification at a
time, in reverse. The update rule is the general substitution form

    C' = (NOT P AND C) OR (P AND C[target := rhs])

whose constant/equality special cases fall out of ``simplify``. Deletes
contribute ``C AND NOT P``; inserts leave the condition untouched but the
newborn row is judged immediately against the condition as it stands at
the insert's version.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .exprs import (
    FALSE,
    TRUE,
    And,
    Attr,
    Bin,
    Cmp,
    Condition,
    Expr,
    In,
    Lit,
    Not,
    Or,
    _FalseC,
    _TrueC,
    conj,
    disj,
    eval_condition,
)
from .mods import Modification
from .values import EvalError, Value, compare, is_numeric, values_equal

_MAX_ROUNDS = 25


# --------------------------------------------------------------------------
# Substitution


def substitute_expr(e: Expr, attr: str, rhs: Expr) -> Expr:
    if attr not in e.attrs:
        return e
    if type(e) is Attr:
        return rhs if e.name == attr else e
    if type(e) is Bin:
        return Bin(e.op, substitute_expr(e.left, attr, rhs), substitute_expr(e.right, attr, rhs))
    return e


def substitute(c: Condition, attr: str, rhs: Expr) -> Condition:
    """Replace every reference to attr inside c by rhs (purely syntactic)."""
    if attr not in c.attrs:
        return c
    t = type(c)
    if t is Cmp:
        return Cmp(c.op, substitute_expr(c.left, attr, rhs), substitute_expr(c.right, attr, rhs))
    if t is In:
        return In(substitute_expr(c.expr, attr, rhs), c.choices)
    if t is Not:
        return Not(substitute(c.child, attr, rhs))
    if t is And:
        return And(tuple(substitute(ch, attr, rhs) for ch in c.children))
    if t is Or:
        return Or(tuple(substitute(ch, attr, rhs) for ch in c.children))
    return c


# --------------------------------------------------------------------------
# Simplification

_MIRROR = {"=": "=", "<>": "<>", "<": ">", "<=": ">=", ">": "<", ">=": "<="}


class _EmptyRow:
    def __getitem__(self, attr: str):  # pragma: no cover - unreachable on closed atoms
        raise KeyError(attr)


_EMPTY_ROW = _EmptyRow()

_NULL_EXPR = object()  # marks a subexpression that always evaluates to Null


def _linear(e: Expr):
    """(attr | None, k, b) when e == k*attr + b over exact rationals.

    Returns None for non-linear or multi-attribute shapes, and _NULL_EXPR
    for expressions that are constantly Null (division by literal zero).
    """
    from fractions import Fraction

    if type(e) is Lit:
        v = e.value
        if v is None:
            return _NULL_EXPR
        if isinstance(v, str):
            return None
        return (None, Fraction(0), Fraction(v))
    if type(e) is Attr:
        return (e.name, Fraction(1), Fraction(0))
    if type(e) is Bin:
        l = _linear(e.left)
        r = _linear(e.right)
        if l is _NULL_EXPR or r is _NULL_EXPR:
            return _NULL_EXPR
        if l is None or r is None:
            return None
        la, lk, lb = l
        ra, rk, rb = r
        if e.op in ("+", "-"):
            sign = 1 if e.op == "+" else -1
            if la is None or ra is None or la == ra:
                # k may cancel to 0 with the attr retained: the value is then
                # constant on non-Null rows but still Null when attr is Null
                return (la if la is not None else ra, lk + sign * rk, lb + sign * rb)
            return None
        if e.op == "*":
            if la is None:
                return (ra, lb * rk, lb * rb)
            if ra is None:
                return (la, rb * lk, rb * lb)
            return None
        # division by a literal constant
        if ra is None:
            if rb == 0:
                return _NULL_EXPR
            return (la, lk / rb, lb / rb)
        return None
    return None


def _as_value(q):
    """Exact literal for a rational: collapse integral values to Int."""
    if q.denominator == 1:
        return int(q)
    return q


def _normalize_atom(c: Condition) -> Condition:
    """Canonical atom shape: bare attribute on the left where possible.

    Single-attribute linear comparisons are solved for the attribute
    (exactly, over rationals): 2*A - 1 < 5 becomes A < 3. The rewrite
    preserves the Null collapse because the attribute set is unchanged.
    """
    if type(c) is Cmp:
        if type(c.left) is Attr and type(c.right) is Lit:
            return c
        if type(c.right) is Attr and type(c.left) is Lit:
            return Cmp(_MIRROR[c.op], c.right, c.left)
        if c.left == c.right and len(c.attrs) == 1 and type(c.left) is not Attr:
            # e op e depends only on whether e is Null; for single-attr
            # linear e that is exactly "attr is (non-)Null"
            if _linear(c.left) is not None and _linear(c.left) is not _NULL_EXPR:
                a = next(iter(c.attrs))
                return Cmp(c.op, Attr(a), Attr(a))
        if len(c.attrs) <= 1:
            l = _linear(c.left)
            r = _linear(c.right)
            if l is _NULL_EXPR or r is _NULL_EXPR:
                return FALSE
            if l is not None and r is not None:
                la, lk, lb = l
                ra, rk, rb = r
                attr = la if la is not None else ra
                if attr is not None:
                    k = lk - rk
                    b = lb - rb
                    if k != 0:
                        q = -b / k
                        op = c.op if k > 0 else _MIRROR[c.op]
                        return Cmp(op, Attr(attr), Lit(_as_value(q)))
        return c
    if type(c) is In and type(c.expr) is not Attr and len(c.attrs) == 1:
        l = _linear(c.expr)
        if l is _NULL_EXPR:
            return FALSE
        if l is not None and l[0] is not None and l[1] != 0:
            from fractions import Fraction

            attr, k, b = l
            vals = []
            for v in c.choices:
                if v is None or isinstance(v, str):
                    continue  # an exact numeric expression never equals these
                vals.append(_as_value((Fraction(v) - b) / k))
            return In(Attr(attr), vals) if vals else FALSE
    return c


def _const_eval(c: Condition) -> Condition:
    """Fold atoms with no attribute references to TRUE/FALSE."""
    if c.attrs:
        return c
    try:
        return TRUE if eval_condition(_EMPTY_ROW, c) else FALSE
    except (EvalError, KeyError):  # pragma: no cover - defensive
        return c


def _complement(c: Condition) -> Condition:
    return c.child if type(c) is Not else Not(c)


def _is_atom(c: Condition) -> bool:
    return type(c) in (Cmp, In)


def _eq_unit(c: Condition) -> tuple[str, Value] | None:
    """(attr, literal) when c is the atom  Attr = Lit  with non-Null literal."""
    if type(c) is Cmp and c.op == "=" and type(c.left) is Attr and type(c.right) is Lit:
        if c.right.value is not None:
            return (c.left.name, c.right.value)
    return None


def _decide_under_eq(c: Condition, attr: str, value: Value) -> Condition | None:
    """Truth of an atom on `attr` given the assumption attr = value holds."""
    if type(c) is Cmp and type(c.left) is Attr and c.left.name == attr and type(c.right) is Lit:
        if c.right.value is None:
            return FALSE
        # comparable kinds only; cross-kind stays undecided -> collapse rule
        return TRUE if compare(c.op, value, c.right.value) else FALSE
    if type(c) is In and type(c.expr) is Attr and c.expr.name == attr:
        return TRUE if any(values_equal(value, ch) for ch in c.choices) else FALSE
    return None


def _assume(c: Condition, truths: dict[Condition, bool], eqs: dict[str, Value]) -> Condition:
    """Rewrite c under assumed unit truths; returns a (possibly) new tree."""
    known = truths.get(c)
    if known is not None:
        return TRUE if known else FALSE
    if _is_atom(c):
        if type(c) is Cmp and type(c.left) is Attr and c.left.name in eqs:
            decided = _decide_under_eq(c, c.left.name, eqs[c.left.name])
            if decided is not None:
                return decided
        if type(c) is In and type(c.expr) is Attr and c.expr.name in eqs:
            decided = _decide_under_eq(c, c.expr.name, eqs[c.expr.name])
            if decided is not None:
                return decided
        return c
    if type(c) is Not:
        inner = _assume(c.child, truths, eqs)
        return c if inner is c.child else Not(inner)
    if type(c) is And:
        kids = tuple(_assume(ch, truths, eqs) for ch in c.children)
        return c if kids == c.children else And(kids)
    if type(c) is Or:
        kids = tuple(_assume(ch, truths, eqs) for ch in c.children)
        return c if kids == c.children else Or(kids)
    return c


def _units_excluding(children: list[Condition], skip: int, positive: bool):
    """Assumption maps from unit siblings of children[skip].

    In an And, unit conjuncts are assumed true (positive); in an Or, unit
    disjuncts are assumed false while rewriting their siblings (dual rule:
    Or(u, rest) keeps its value when rest is evaluated under NOT u).
    """
    truths: dict[Condition, bool] = {}
    eqs: dict[str, Value] = {}
    for k, ch in enumerate(children):
        if k == skip:
            continue
        if _is_atom(ch):
            truths[ch] = positive
            if positive:
                eq = _eq_unit(ch)
                if eq and eq[0] not in eqs:
                    eqs[eq[0]] = eq[1]
        elif type(ch) is Not and _is_atom(ch.child):
            truths[ch.child] = not positive
            truths[ch] = positive
            if not positive:
                eq = _eq_unit(ch.child)
                if eq and eq[0] not in eqs:
                    eqs[eq[0]] = eq[1]
    return truths, eqs


def _has_units(children: list[Condition]) -> bool:
    return any(
        _is_atom(ch) or (type(ch) is Not and _is_atom(ch.child)) for ch in children
    )


def _conjuncts(c: Condition) -> tuple[Condition, ...]:
    return c.children if type(c) is And else (c,)


class _Range:
    """Conjunction of positive atoms over one bare attribute.

    A satisfied positive atom asserts the value is non-Null, so the whole
    group reduces to 'value in (allowed-set or interval) minus exclusions';
    an empty region makes the conjunction unsatisfiable.
    """

    __slots__ = ("allowed", "lo", "lo_strict", "hi", "hi_strict", "excl", "kindsets")

    def __init__(self):
        self.allowed: list | None = None  # from '=' and IN atoms
        self.lo = None
        self.lo_strict = False
        self.hi = None
        self.hi_strict = False
        self.excl: list = []
        # each positive atom pins the value's kind (numeric vs Str); an
        # empty intersection of requirements is unsatisfiable
        self.kindsets: list = []

    def _note_kinds(self, vs) -> None:
        self.kindsets.append(frozenset(is_numeric(v) for v in vs))

    def add_eq(self, v) -> None:
        self._note_kinds((v,))
        vals = [v]
        self.allowed = (
            vals if self.allowed is None else [x for x in self.allowed if values_equal(x, v)]
        )

    def add_in(self, vs) -> None:
        self._note_kinds(vs)
        if self.allowed is None:
            self.allowed = list(vs)
        else:
            self.allowed = [x for x in self.allowed if any(values_equal(x, v) for v in vs)]

    def add_bound(self, op: str, v) -> None:
        self._note_kinds((v,))
        if op in ("<", "<="):
            if self.hi is None or compare("<", v, self.hi) or (
                values_equal(v, self.hi) and op == "<" and not self.hi_strict
            ):
                self.hi = v
                self.hi_strict = op == "<"
        else:
            if self.lo is None or compare(">", v, self.lo) or (
                values_equal(v, self.lo) and op == ">" and not self.lo_strict
            ):
                self.lo = v
                self.lo_strict = op == ">"

    def add_ne(self, v) -> None:
        self._note_kinds((v,))
        if not any(values_equal(v, x) for x in self.excl):
            self.excl.append(v)

    def _inside(self, v) -> bool:
        if self.lo is not None:
            if not compare(">" if self.lo_strict else ">=", v, self.lo):
                return False
        if self.hi is not None:
            if not compare("<" if self.hi_strict else "<=", v, self.hi):
                return False
        return not any(values_equal(v, x) for x in self.excl)

    def atoms(self, attr: str) -> list[Condition] | None:
        """Canonical minimal atom list, or None when unsatisfiable."""
        a = Attr(attr)
        feasible_kinds = frozenset((True, False))
        for ks in self.kindsets:
            feasible_kinds &= ks
        if not feasible_kinds:
            return None
        if self.allowed is not None:
            vals = [v for v in self.allowed if self._inside(v)]
            if not vals:
                return None
            if len(vals) == 1:
                return [Cmp("=", a, Lit(vals[0]))]
            return [In(a, vals)]
        if self.lo is not None and self.hi is not None:
            if not compare("<", self.lo, self.hi) and not (
                values_equal(self.lo, self.hi) and not self.lo_strict and not self.hi_strict
            ):
                return None
        out: list[Condition] = []
        if self.lo is not None:
            out.append(Cmp(">" if self.lo_strict else ">=", a, Lit(self.lo)))
        if self.hi is not None:
            out.append(Cmp("<" if self.hi_strict else "<=", a, Lit(self.hi)))
        for v in self.excl:
            if (self.lo is None and self.hi is None) or self._inside_bounds_only(v):
                out.append(Cmp("<>", a, Lit(v)))
        if self.lo is not None and self.hi is not None and values_equal(self.lo, self.hi):
            # closed single-point interval collapses to equality
            if not any(values_equal(self.lo, v) for v in self.excl):
                return [Cmp("=", a, Lit(self.lo))]
            return None
        return out

    def _inside_bounds_only(self, v) -> bool:
        if self.lo is not None and not compare(">" if self.lo_strict else ">=", v, self.lo):
            return False
        if self.hi is not None and not compare("<" if self.hi_strict else "<=", v, self.hi):
            return False
        return True


def _bare_attr_atom(c: Condition):
    """(attr, op, literal) for atoms of shape  Attr op Lit  / Attr IN (...)."""
    if type(c) is Cmp and type(c.left) is Attr and type(c.right) is Lit and c.right.value is not None:
        return (c.left.name, c.op, c.right.value)
    if type(c) is In and type(c.expr) is Attr:
        if all(v is not None for v in c.choices) and c.choices:
            return (c.expr.name, "in", c.choices)
    return None


def _collapse_ranges(out: list[Condition]):
    """Merge same-attribute positive atoms inside an And; None if unsat.

    Bounds the per-attribute atom count, which keeps repeated backtracking
    through same-attribute update chains from growing conditions without
    limit.
    """
    groups: dict[str, list[int]] = {}
    for k, ch in enumerate(out):
        info = _bare_attr_atom(ch)
        if info is not None:
            groups.setdefault(info[0], []).append(k)
    if not any(len(idx) > 1 for idx in groups.values()):
        return out
    result: list[Condition] = []
    drop: set[int] = set()
    replacement: dict[int, list[Condition]] = {}
    for attr, idxs in groups.items():
        if len(idxs) < 2:
            continue
        rng = _Range()
        for k in idxs:
            a, op, val = _bare_attr_atom(out[k])
            if op == "=":
                rng.add_eq(val)
            elif op == "in":
                rng.add_in(val)
            elif op == "<>":
                rng.add_ne(val)
            else:
                rng.add_bound(op, val)
        atoms = rng.atoms(attr)
        if atoms is None:
            return None
        replacement[idxs[0]] = atoms
        drop.update(idxs[1:])
    for k, ch in enumerate(out):
        if k in drop:
            continue
        if k in replacement:
            result.extend(replacement[k])
        else:
            result.append(ch)
    return result


def _simplify_once(c: Condition) -> Condition:
    t = type(c)
    if t in (_TrueC, _FalseC):
        return c
    if t is In and not c.choices:
        return FALSE
    if t in (Cmp, In):
        return _const_eval(_normalize_atom(c))
    if t is Not:
        child = _simplify_once(c.child)
        if child is TRUE or type(child) is _TrueC:
            return FALSE
        if child is FALSE or type(child) is _FalseC:
            return TRUE
        if type(child) is Not:
            return child.child
        # push negation through connectives; helps unit propagation
        if type(child) is And:
            return Or(tuple(Not(ch) for ch in child.children))
        if type(child) is Or:
            return And(tuple(Not(ch) for ch in child.children))
        return Not(child)

    if t is And:
        flat: list[Condition] = []
        for ch in c.children:
            ch = _simplify_once(ch)
            if type(ch) is _FalseC:
                return FALSE
            if type(ch) is _TrueC:
                continue
            if type(ch) is And:
                flat.extend(ch.children)
            else:
                flat.append(ch)
        out: list[Condition] = []
        seen = set()
        for ch in flat:
            if ch in seen:
                continue
            seen.add(ch)
            out.append(ch)
        for ch in out:
            if _complement(ch) in seen:
                return FALSE
        # same-attribute equality contradiction: A = a AND A = a'
        eq_seen: dict[str, Value] = {}
        for ch in out:
            eq = _eq_unit(ch)
            if eq:
                prev = eq_seen.get(eq[0], _MISSING)
                if prev is not _MISSING and not values_equal(prev, eq[1]):
                    return FALSE
                eq_seen[eq[0]] = eq[1]
        collapsed = _collapse_ranges(out)
        if collapsed is None:
            return FALSE
        out = collapsed
        if _has_units(out):
            changed = False
            rewritten: list[Condition] = []
            for k, ch in enumerate(out):
                truths, eqs = _units_excluding(out, k, positive=True)
                new = _assume(ch, truths, eqs)
                if new is not ch:
                    changed = True
                    new = _simplify_once(new)
                    if type(new) is _FalseC:
                        return FALSE
                    if type(new) is _TrueC:
                        continue
                rewritten.append(new)
            out = rewritten
            if changed:
                return _simplify_once(conj(out))
        if not out:
            return TRUE
        if len(out) == 1:
            return out[0]
        return And(tuple(out))

    if t is Or:
        flat = []
        for ch in c.children:
            ch = _simplify_once(ch)
            if type(ch) is _TrueC:
                return TRUE
            if type(ch) is _FalseC:
                continue
            if type(ch) is Or:
                flat.extend(ch.children)
            else:
                flat.append(ch)
        out = []
        seen = set()
        for ch in flat:
            if ch in seen:
                continue
            seen.add(ch)
            out.append(ch)
        for ch in out:
            if _complement(ch) in seen:
                return TRUE
        if _has_units(out):
            changed = False
            rewritten = []
            for k, ch in enumerate(out):
                truths, eqs = _units_excluding(out, k, positive=False)
                new = _assume(ch, truths, eqs)
                if new is not ch:
                    changed = True
                    new = _simplify_once(new)
                    if type(new) is _TrueC:
                        return TRUE
                    if type(new) is _FalseC:
                        continue
                rewritten.append(new)
            out = rewritten
            if changed:
                return _simplify_once(disj(out))
        # factor conjuncts common to every disjunct
        if len(out) > 1:
            common = [p for p in _conjuncts(out[0]) if all(p in _conjuncts(o) for o in out[1:])]
            if common:
                residues = []
                for o in out:
                    rest = [p for p in _conjuncts(o) if p not in common]
                    residues.append(conj(rest))
                return _simplify_once(conj(common + [disj(residues)]))
        if not out:
            return FALSE
        if len(out) == 1:
            return out[0]
        return Or(tuple(out))

    raise TypeError(f"not a condition node: {c!r}")


_MISSING = object()

_SIMP_CACHE: dict[Condition, Condition] = {}
_SIMP_CACHE_MAX = 50_000


def simplify(c: Condition) -> Condition:
    """Equivalence-preserving cleanup; idempotent (runs to a fixed point).

    Results are memoized on structural equality; the cache is safe because
    conditions are immutable and simplification is pure.
    """
    hit = _SIMP_CACHE.get(c)
    if hit is not None:
        return hit
    orig = c
    for _ in range(_MAX_ROUNDS):
        nxt = _simplify_once(c)
        if nxt == c:
            break
        c = nxt
    if len(_SIMP_CACHE) >= _SIMP_CACHE_MAX:
        _SIMP_CACHE.clear()
    _SIMP_CACHE[orig] = c
    _SIMP_CACHE[c] = c
    return c


def canonicalize(c: Condition) -> Condition:
    """Deterministic child ordering for syntactic comparison of conditions."""
    t = type(c)
    if t is Not:
        return Not(canonicalize(c.child))
    if t in (And, Or):
        kids = sorted((canonicalize(ch) for ch in c.children), key=_struct_key)
        return And(tuple(kids)) if t is And else Or(tuple(kids))
    if t is Cmp:
        return _normalize_atom(c)
    if t is In:
        return In(c.expr, tuple(sorted(c.choices, key=repr)))
    return c


def _struct_key(c: Condition) -> str:
    from .sqltext import print_condition

    return print_condition(c)


# --------------------------------------------------------------------------
# Null-aware helpers for value-difference conditions


def is_null(e: Expr) -> Condition:
    """Condition that holds exactly when e evaluates to Null."""
    return Not(Cmp("=", e, e))


def values_differ(e1: Expr, e2: Expr) -> Condition:
    """Condition: e1 and e2 evaluate to different values (Null-aware).

    A bare '<>' atom is False when either side is Null, which would hide
    real divergence (a delete writes Nulls); the extra clauses catch the
    exactly-one-Null cases. Both-Null counts as equal.
    """
    if e1 == e2:
        return FALSE
    return Or(
        (
            Cmp("<>", e1, e2),
            And((is_null(e1), Not(is_null(e2)))),
            And((Not(is_null(e1)), is_null(e2))),
        )
    )


# --------------------------------------------------------------------------
# Backtracking


@dataclass(frozen=True)
class BacktrackResult:
    """Condition rewritten onto the earlier version, plus rows born on the way.

    flagged_inserts holds (rid, condition-at-that-version) pairs for insert
    rows that satisfied the condition the moment they were created.
    """

    cond: Condition
    flagged_inserts: tuple = field(default_factory=tuple)


class _InsertRowView:
    __slots__ = ("vals",)

    def __init__(self, vals: dict[str, Value]):
        self.vals = vals

    def __getitem__(self, attr: str) -> Value:
        return self.vals.get(attr)


def backtrack_condition(c: Condition, m: Modification) -> BacktrackResult:
    """One backtracking step: c valid on D_m becomes c' valid on D.

    Soundness contract: for every tuple t of D, t satisfies c' iff m(t)
    satisfies c; rows born from an Insert are reported separately.
    """
    if m.kind == "update":
        tgt = m.assign.target
        if tgt not in c.attrs:
            return BacktrackResult(c)
        moved = substitute(c, tgt, m.assign.rhs)
        out = simplify(Or((And((Not(m.pred), c)), And((m.pred, moved)))))
        return BacktrackResult(out)
    if m.kind == "delete":
        return BacktrackResult(simplify(And((c, Not(m.pred)))))
    # insert: judge the newborn row right here, then skip the insert
    row = _InsertRowView(m.value_map())
    flagged = ((m.rid, c),) if eval_condition(row, c) else ()
    return BacktrackResult(c, flagged)


def _or_branches(c: Condition) -> list[Condition]:
    if type(c) is Or:
        return list(c.children)
    if type(c) is _FalseC:
        return []
    return [c]


def _resolve_branches(store: dict) -> dict:
    """Merge disjuncts differing in exactly one complemented conjunct.

    Or(S and u, S and NOT u) is exactly And(S): the complement pair covers
    Null rows too, because negation applies to the collapsed atom value.
    Repeating to a fixed point keeps the accumulated predicate guards from
    cascading into an exponential branch count.
    """
    while True:
        index: dict = {}
        used: set = set()
        pending: list = []
        for key in store:
            for lit in key:
                if type(lit) is Not:
                    core, pos = lit.child, False
                else:
                    core, pos = lit, True
                probe = (key - {lit}, core)
                other = index.get(probe)
                if other is not None and other[1] != pos and other[0] not in used and key not in used:
                    pending.append((key, other[0], key - {lit}))
                    used.add(key)
                    used.add(other[0])
                    break
                index[probe] = (key, pos)
        if not pending:
            return store
        for key, other_key, rest in pending:
            store.pop(key, None)
            store.pop(other_key, None)
            into = conj(sorted(rest, key=_struct_key)) if rest else TRUE
            for piece in _or_branches(simplify(into)):
                store.setdefault(frozenset(_conjuncts(piece)), piece)


_BT_STEP_CACHE: dict = {}
_BT_STEP_CACHE_MAX = 100_000


def _backtrack_branch(branch: Condition, m) -> tuple:
    """One branch through one non-insert modification; memoized.

    Pure in (modification, branch); the modification object is pinned in
    the value so its id cannot be recycled while the entry lives.
    """
    key = (id(m), branch)
    hit = _BT_STEP_CACHE.get(key)
    if hit is not None:
        return hit[0]
    if m.kind == "delete":
        pieces = tuple(_or_branches(simplify(And((branch, Not(m.pred))))))
    else:
        tgt = m.assign.target
        if tgt not in branch.attrs:
            pieces = (branch,)
        else:
            out = list(_or_branches(simplify(And((Not(m.pred), branch)))))
            out.extend(
                _or_branches(simplify(And((m.pred, substitute(branch, tgt, m.assign.rhs)))))
            )
            pieces = tuple(out)
    if len(_BT_STEP_CACHE) >= _BT_STEP_CACHE_MAX:
        _BT_STEP_CACHE.clear()
    _BT_STEP_CACHE[key] = (pieces, m)
    return pieces


def backtrack_through(c: Condition, prefix) -> BacktrackResult:
    """Fold backtrack_condition over a modification sequence in reverse.

    The condition is kept as a flat disjunction of branches and each step
    rewrites only the branches that mention the crossed modification's
    written attribute, so the usual case (a mod irrelevant to most of the
    disjunction) costs nothing on the untouched branches.
    """
    flagged: list = []
    branches = _or_branches(simplify(c))

    for m in reversed(list(prefix)):
        if not branches:
            break
        if m.kind == "insert":
            row = _InsertRowView(m.value_map())
            if any(eval_condition(row, b) for b in branches):
                flagged.append((m.rid, disj(list(branches))))
            continue
        nxt: dict = {}
        for b in branches:
            for piece in _backtrack_branch(b, m):
                nxt.setdefault(frozenset(_conjuncts(piece)), piece)
        if len(nxt) > 32:
            nxt = _resolve_branches(nxt)
        branches = list(nxt.values())
        if any(type(b) is _TrueC for b in branches):
            branches = [TRUE]
    return BacktrackResult(disj(branches), tuple(flagged))
