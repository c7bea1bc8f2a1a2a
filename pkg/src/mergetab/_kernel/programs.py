"""Flat bytecode programs for the evaluation kernels.

Conditions and expressions over all-integer data compile to postfix
programs interpreted by either the compiled or the pure-Python kernel.
Anything the int64 program model cannot represent exactly (Dec or Str
attributes, division, non-integral literals in order comparisons) makes
``compile_*`` return None and the caller uses the generic object path.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from ..exprs import And, Attr, Bin, Cmp, Condition, Expr, In, Lit, Not, Or, _FalseC, _TrueC
from ..schema import Schema
from ..values import INT, INT64_MAX, INT64_MIN

OP_LIT = 0
OP_COL = 1
OP_ADD = 2
OP_SUB = 3
OP_MUL = 4
OP_EQ = 5
OP_NE = 6
OP_LT = 7
OP_LE = 8
OP_GT = 9
OP_GE = 10
OP_IN = 11
OP_AND = 12
OP_OR = 13
OP_NOT = 14
OP_TRUE = 15
OP_FALSE = 16
# short-circuit jumps: if the top of stack decides the connective, skip the
# remaining operands keeping the value; otherwise pop it and continue
OP_JF = 17
OP_JT = 18

_CMP_OP = {"=": OP_EQ, "<>": OP_NE, "<": OP_LT, "<=": OP_LE, ">": OP_GT, ">=": OP_GE}

MAX_SLOTS = 128


class Ineligible(Exception):
    """Internal: the tree cannot be compiled to the int64 model."""


class SymbolTable:
    """Shared literal/set/column tables for one or more programs."""

    def __init__(self, schema: Schema):
        self.schema = schema
        self.lits: list[int] = []
        self._lit_idx: dict[int, int] = {}
        self.pool: list[int] = []
        self.set_off: list[int] = []
        self.set_len: list[int] = []
        self.slots: list[str] = []
        self._slot_idx: dict[str, int] = {}

    def lit(self, v: int) -> int:
        i = self._lit_idx.get(v)
        if i is None:
            i = len(self.lits)
            self.lits.append(v)
            self._lit_idx[v] = i
        return i

    def slot(self, attr: str) -> int:
        i = self._slot_idx.get(attr)
        if i is None:
            if self.schema.type_of(attr) != INT:
                raise Ineligible(attr)
            if len(self.slots) >= MAX_SLOTS:
                raise Ineligible("too many columns")
            i = len(self.slots)
            self.slots.append(attr)
            self._slot_idx[attr] = i
        return i

    def int_set(self, values) -> int:
        vs = sorted(set(values))
        i = len(self.set_off)
        self.set_off.append(len(self.pool))
        self.set_len.append(len(vs))
        self.pool.extend(vs)
        return i

    def packed(self):
        return (
            np.asarray(self.lits or [0], dtype=np.int64),
            np.asarray(self.pool or [0], dtype=np.int64),
            np.asarray(self.set_off or [0], dtype=np.int32),
            np.asarray(self.set_len or [0], dtype=np.int32),
        )


@dataclass
class Program:
    ops: np.ndarray
    args: np.ndarray
    max_stack: int
    table: SymbolTable = field(repr=False)


def _as_int(v) -> int | None:
    """Integer view of a literal value, or None when it has none."""
    if isinstance(v, bool) or v is None or isinstance(v, str):
        return None
    if isinstance(v, Fraction):
        if v.denominator != 1:
            return None
        v = v.numerator
    if not (INT64_MIN <= v <= INT64_MAX):
        return None
    return int(v)


class _Emitter:
    def __init__(self, table: SymbolTable):
        self.t = table
        self.ops: list[int] = []
        self.args: list[int] = []
        self.depth = 0
        self.max_depth = 0

    def emit(self, op: int, arg: int = 0, pops: int = 0, pushes: int = 1):
        self.ops.append(op)
        self.args.append(arg)
        self.depth += pushes - pops
        self.max_depth = max(self.max_depth, self.depth)

    def expr(self, e: Expr):
        if type(e) is Lit:
            iv = _as_int(e.value)
            if iv is None:
                raise Ineligible(e)
            self.emit(OP_LIT, self.t.lit(iv))
        elif type(e) is Attr:
            self.emit(OP_COL, self.t.slot(e.name))
        elif type(e) is Bin:
            if e.op == "/":
                raise Ineligible(e)
            self.expr(e.left)
            self.expr(e.right)
            self.emit({"+": OP_ADD, "-": OP_SUB, "*": OP_MUL}[e.op], pops=2, pushes=1)
        else:
            raise Ineligible(e)

    def _kind(self, e: Expr) -> str:
        """Static kind of an expression: int | dec | str | null."""
        if type(e) is Lit:
            if e.value is None:
                return "null"
            if isinstance(e.value, str):
                return "str"
            return "int" if _as_int(e.value) is not None else "dec"
        if type(e) is Attr:
            return self.t.schema.type_of(e.name)
        if type(e) is Bin:
            lk, rk = self._kind(e.left), self._kind(e.right)
            if "str" in (lk, rk):
                raise Ineligible(e)
            if e.op == "/" or "dec" in (lk, rk):
                return "dec"
            return "int"
        raise Ineligible(e)

    def _expr_is_intish(self, e: Expr) -> bool:
        """Can e be compiled, i.e. is it an int64 expression?"""
        try:
            return self._kind(e) == "int"
        except (Ineligible, KeyError):
            return False

    def cond(self, c: Condition):
        t = type(c)
        if t is _TrueC:
            self.emit(OP_TRUE)
        elif t is _FalseC:
            self.emit(OP_FALSE)
        elif t is Cmp:
            lk = self._kind(c.left)
            rk = self._kind(c.right)
            if lk == "int" and rk == "int":
                self.expr(c.left)
                self.expr(c.right)
                self.emit(_CMP_OP[c.op], pops=2, pushes=1)
            elif "null" in (lk, rk) or ("str" in (lk, rk) and lk != rk):
                # Null or incomparable kinds: the atom collapses to False.
                self.emit(OP_FALSE)
            else:
                raise Ineligible(c)
        elif t is In:
            if not self._expr_is_intish(c.expr):
                raise Ineligible(c)
            ints = [iv for iv in (_as_int(v) for v in c.choices) if iv is not None]
            if not ints:
                self.emit(OP_FALSE)
            else:
                self.expr(c.expr)
                self.emit(OP_IN, self.t.int_set(ints), pops=1, pushes=1)
        elif t is And:
            if not c.children:
                self.emit(OP_TRUE)
            else:
                self.cond(c.children[0])
                holes = []
                for ch in c.children[1:]:
                    holes.append(len(self.ops))
                    self.emit(OP_JF, 0, pops=1, pushes=0)
                    self.cond(ch)
                for h in holes:
                    self.args[h] = len(self.ops)
        elif t is Or:
            if not c.children:
                self.emit(OP_FALSE)
            else:
                self.cond(c.children[0])
                holes = []
                for ch in c.children[1:]:
                    holes.append(len(self.ops))
                    self.emit(OP_JT, 0, pops=1, pushes=0)
                    self.cond(ch)
                for h in holes:
                    self.args[h] = len(self.ops)
        elif t is Not:
            self.cond(c.child)
            self.emit(OP_NOT, pops=1, pushes=1)
        else:
            raise Ineligible(c)

    def finish(self) -> Program:
        return Program(
            np.asarray(self.ops, dtype=np.int32),
            np.asarray(self.args, dtype=np.int32),
            max(self.max_depth, 1),
            self.t,
        )


def compile_condition(c: Condition, table: SymbolTable) -> Program | None:
    em = _Emitter(table)
    try:
        em.cond(c)
    except (Ineligible, KeyError):
        return None
    return em.finish()


def compile_expr(e: Expr, table: SymbolTable) -> Program | None:
    em = _Emitter(table)
    try:
        em.expr(e)
    except (Ineligible, KeyError):
        return None
    return em.finish()
