"""Expression and condition trees over a single tuple's attributes.

Conditions are state-independent by construction: atoms can only mention
the tuple's own attributes and literal values, so truth on a tuple never
depends on the rest of the table. Comparison atoms collapse to False when
either side is Null (or the kinds are incomparable, e.g. Str vs Int);
negation applies to the collapsed result, so NOT (A = 1) is True on a
Null A. Tombstoned rows hold only Nulls and therefore satisfy no atom.
"""

from __future__ import annotations

from fractions import Fraction
from typing import Iterable

from .schema import Schema
from .values import DEC, INT, STR, EvalError, Value, arith, compare, values_equal

ARITH_OPS = ("+", "-", "*", "/")
CMP_OPS = ("=", "<>", "<", "<=", ">", ">=")


# --------------------------------------------------------------------------
# Expressions


class Expr:
    __slots__ = ("_hash", "attrs")

    def __eq__(self, other) -> bool:  # pragma: no cover - overridden
        raise NotImplementedError

    def __hash__(self) -> int:
        return self._hash


class Lit(Expr):
    __slots__ = ("value",)
    __hash__ = Expr.__hash__

    def __init__(self, value: Value):
        self.value = value
        self.attrs = frozenset()
        self._hash = hash(("lit", value))

    def __eq__(self, other):
        return isinstance(other, Lit) and type(self.value) is type(other.value) and self.value == other.value

    def __repr__(self):
        return f"Lit({self.value!r})"


class Attr(Expr):
    __slots__ = ("name",)
    __hash__ = Expr.__hash__

    def __init__(self, name: str):
        self.name = name
        self.attrs = frozenset((name,))
        self._hash = hash(("attr", name))

    def __eq__(self, other):
        return isinstance(other, Attr) and self.name == other.name

    def __repr__(self):
        return f"Attr({self.name})"


class Bin(Expr):
    __slots__ = ("op", "left", "right")
    __hash__ = Expr.__hash__

    def __init__(self, op: str, left: Expr, right: Expr):
        if op not in ARITH_OPS:
            raise ValueError(f"unknown arithmetic operator {op!r}")
        self.op = op
        self.left = left
        self.right = right
        self.attrs = left.attrs | right.attrs
        self._hash = hash(("bin", op, left, right))

    def __eq__(self, other):
        return (
            isinstance(other, Bin)
            and self.op == other.op
            and self._hash == other._hash
            and self.left == other.left
            and self.right == other.right
        )

    def __repr__(self):
        return f"Bin({self.left!r} {self.op} {self.right!r})"


# --------------------------------------------------------------------------
# Conditions


class Condition:
    __slots__ = ("_hash", "attrs")

    def __eq__(self, other) -> bool:  # pragma: no cover - overridden
        raise NotImplementedError

    def __hash__(self) -> int:
        return self._hash


class _TrueC(Condition):
    __slots__ = ()
    __hash__ = Condition.__hash__

    def __init__(self):
        self.attrs = frozenset()
        self._hash = hash("true")

    def __eq__(self, other):
        return isinstance(other, _TrueC)

    def __repr__(self):
        return "TRUE"


class _FalseC(Condition):
    __slots__ = ()
    __hash__ = Condition.__hash__

    def __init__(self):
        self.attrs = frozenset()
        self._hash = hash("false")

    def __eq__(self, other):
        return isinstance(other, _FalseC)

    def __repr__(self):
        return "FALSE"


TRUE = _TrueC()
FALSE = _FalseC()


class Cmp(Condition):
    __slots__ = ("op", "left", "right")
    __hash__ = Condition.__hash__

    def __init__(self, op: str, left: Expr, right: Expr):
        if op not in CMP_OPS:
            raise ValueError(f"unknown comparison operator {op!r}")
        self.op = op
        self.left = left
        self.right = right
        self.attrs = left.attrs | right.attrs
        self._hash = hash(("cmp", op, left, right))

    def __eq__(self, other):
        return (
            isinstance(other, Cmp)
            and self.op == other.op
            and self._hash == other._hash
            and self.left == other.left
            and self.right == other.right
        )

    def __repr__(self):
        return f"Cmp({self.left!r} {self.op} {self.right!r})"


class In(Condition):
    __slots__ = ("expr", "choices")
    __hash__ = Condition.__hash__

    def __init__(self, expr: Expr, choices: Iterable[Value]):
        self.expr = expr
        self.choices = tuple(choices)
        self.attrs = expr.attrs
        self._hash = hash(("in", expr, self.choices))

    def __eq__(self, other):
        return isinstance(other, In) and self.expr == other.expr and self.choices == other.choices

    def __repr__(self):
        return f"In({self.expr!r}, {self.choices!r})"


class And(Condition):
    __slots__ = ("children",)
    __hash__ = Condition.__hash__

    def __init__(self, children: Iterable[Condition]):
        self.children = tuple(children)
        a = frozenset()
        for c in self.children:
            a |= c.attrs
        self.attrs = a
        self._hash = hash(("and", self.children))

    def __eq__(self, other):
        return isinstance(other, And) and self._hash == other._hash and self.children == other.children

    def __repr__(self):
        return f"And{self.children!r}"


class Or(Condition):
    __slots__ = ("children",)
    __hash__ = Condition.__hash__

    def __init__(self, children: Iterable[Condition]):
        self.children = tuple(children)
        a = frozenset()
        for c in self.children:
            a |= c.attrs
        self.attrs = a
        self._hash = hash(("or", self.children))

    def __eq__(self, other):
        return isinstance(other, Or) and self._hash == other._hash and self.children == other.children

    def __repr__(self):
        return f"Or{self.children!r}"


class Not(Condition):
    __slots__ = ("child",)
    __hash__ = Condition.__hash__

    def __init__(self, child: Condition):
        self.child = child
        self.attrs = child.attrs
        self._hash = hash(("not", child))

    def __eq__(self, other):
        return isinstance(other, Not) and self.child == other.child

    def __repr__(self):
        return f"Not({self.child!r})"


def conj(parts: Iterable[Condition]) -> Condition:
    parts = [p for p in parts]
    if not parts:
        return TRUE
    if len(parts) == 1:
        return parts[0]
    return And(parts)


def disj(parts: Iterable[Condition]) -> Condition:
    parts = [p for p in parts]
    if not parts:
        return FALSE
    if len(parts) == 1:
        return parts[0]
    return Or(parts)


# --------------------------------------------------------------------------
# Evaluation (single tuple)


def eval_expr(row, e: Expr) -> Value:
    """Evaluate an expression on one row (a mapping attr -> Value)."""
    if type(e) is Lit:
        return e.value
    if type(e) is Attr:
        return row[e.name]
    if type(e) is Bin:
        return arith(e.op, eval_expr(row, e.left), eval_expr(row, e.right))
    raise TypeError(f"not an expression node: {e!r}")


def eval_condition(row, c: Condition) -> bool:
    """Evaluate a condition on one row with the fixed Null collapse rule."""
    t = type(c)
    if t is _TrueC:
        return True
    if t is _FalseC:
        return False
    if t is Cmp:
        return compare(c.op, eval_expr(row, c.left), eval_expr(row, c.right))
    if t is In:
        v = eval_expr(row, c.expr)
        if v is None:
            return False
        return any(values_equal(v, choice) for choice in c.choices)
    if t is And:
        return all(eval_condition(row, ch) for ch in c.children)
    if t is Or:
        return any(eval_condition(row, ch) for ch in c.children)
    if t is Not:
        return not eval_condition(row, c.child)
    raise TypeError(f"not a condition node: {c!r}")


# --------------------------------------------------------------------------
# Static validation


def _lit_type(v: Value) -> str | None:
    if v is None:
        return None
    if isinstance(v, Fraction):
        return DEC
    if isinstance(v, int):
        return INT
    return STR


def expr_type(e: Expr, schema: Schema) -> str | None:
    """Type-check an expression; returns its type tag (None for bare Null).

    Raises EvalError on arithmetic over Str operands and KeyError on
    unknown attributes, so ill-typed trees are rejected before replay.
    """
    if type(e) is Lit:
        return _lit_type(e.value)
    if type(e) is Attr:
        return schema.type_of(e.name)
    if type(e) is Bin:
        lt = expr_type(e.left, schema)
        rt = expr_type(e.right, schema)
        if lt == STR or rt == STR:
            raise EvalError(f"arithmetic on Str operand in {e!r}")
        if e.op == "/":
            return DEC
        if lt == DEC or rt == DEC:
            return DEC
        return INT
    raise TypeError(f"not an expression node: {e!r}")


def validate_condition(c: Condition, schema: Schema) -> None:
    """Check every atom against the schema (attribute existence, Str math)."""
    if type(c) in (_TrueC, _FalseC):
        return
    if type(c) is Cmp:
        expr_type(c.left, schema)
        expr_type(c.right, schema)
        return
    if type(c) is In:
        expr_type(c.expr, schema)
        return
    if type(c) is Not:
        validate_condition(c.child, schema)
        return
    if type(c) in (And, Or):
        for ch in c.children:
            validate_condition(ch, schema)
        return
    raise TypeError(f"not a condition node: {c!r}")
