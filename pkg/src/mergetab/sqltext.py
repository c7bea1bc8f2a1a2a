"""SQL-subset surface syntax: tokenizer, parser, canonical printer.

Grammar (case-insensitive keywords):

    stmt    := update | insert | delete
    update  := UPDATE ident SET ident '=' expr WHERE cond
    delete  := DELETE FROM ident WHERE cond
    insert  := INSERT INTO ident '(' ident-list ')' VALUES '(' literal-list ')'
    cond    := or-chain of AND-chains; atoms are comparisons,
               'expr IN (literals)', NOT cond, TRUE, FALSE and '(' cond ')'
    expr    := + - * / arithmetic over idents, literals and parentheses

Literals: integers, decimal numbers (exact), single-quoted strings with ''
escaping, NULL. parse(print(ast)) == ast for every grammar-reachable tree.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

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
)
from .mods import Assignment, Delete, ModId, Modification, Update, make_insert, validate_modification
from .schema import Schema
from .values import Value, format_value

KEYWORDS = {
    "UPDATE", "SET", "WHERE", "DELETE", "FROM", "INSERT", "INTO", "VALUES",
    "AND", "OR", "NOT", "IN", "TRUE", "FALSE", "NULL", "JOIN",
}

# '.' tokenizes only so qualified names reach the parser for a proper
# diagnostic (JOIN-style statements) instead of a lexer error
_SYMBOLS = ("<>", "<=", ">=", "!=", "=", "<", ">", "+", "-", "*", "/", "(", ")", ",", ".")


class ParseError(Exception):
    def __init__(self, msg: str, text: str, pos: int):
        self.msg = msg
        self.text = text
        self.pos = pos
        super().__init__(f"{msg} at position {pos}")

    def pretty(self) -> str:
        return f"{self.msg}\n  {self.text}\n  {' ' * self.pos}^"


@dataclass(frozen=True)
class Token:
    kind: str  # kw | ident | int | dec | str | sym | eof
    value: object
    pos: int


def tokenize(text: str) -> list[Token]:
    toks: list[Token] = []
    i, n = 0, len(text)
    while i < n:
        ch = text[i]
        if ch.isspace():
            i += 1
            continue
        if ch == "'":
            j = i + 1
            buf = []
            while True:
                if j >= n:
                    raise ParseError("unterminated string literal", text, i)
                if text[j] == "'":
                    if j + 1 < n and text[j + 1] == "'":
                        buf.append("'")
                        j += 2
                        continue
                    break
                buf.append(text[j])
                j += 1
            toks.append(Token("str", "".join(buf), i))
            i = j + 1
            continue
        if ch.isdigit() or (ch == "." and i + 1 < n and text[i + 1].isdigit()):
            j = i
            seen_dot = False
            while j < n and (text[j].isdigit() or (text[j] == "." and not seen_dot)):
                if text[j] == ".":
                    seen_dot = True
                j += 1
            lit = text[i:j]
            if seen_dot:
                toks.append(Token("dec", Fraction(lit), i))
            else:
                toks.append(Token("int", int(lit), i))
            i = j
            continue
        if ch.isalpha() or ch == "_":
            j = i
            while j < n and (text[j].isalnum() or text[j] == "_"):
                j += 1
            word = text[i:j]
            if word.upper() in KEYWORDS:
                toks.append(Token("kw", word.upper(), i))
            else:
                toks.append(Token("ident", word, i))
            i = j
            continue
        for sym in _SYMBOLS:
            if text.startswith(sym, i):
                toks.append(Token("sym", "<>" if sym == "!=" else sym, i))
                i += len(sym)
                break
        else:
            raise ParseError(f"unexpected character {ch!r}", text, i)
    toks.append(Token("eof", None, n))
    return toks


class _Parser:
    def __init__(self, text: str):
        self.text = text
        self.toks = tokenize(text)
        self.i = 0

    # -- primitives ----------------------------------------------------

    def peek(self) -> Token:
        return self.toks[self.i]

    def next(self) -> Token:
        t = self.toks[self.i]
        self.i += 1
        return t

    def error(self, msg: str) -> ParseError:
        return ParseError(msg, self.text, self.peek().pos)

    def expect_kw(self, word: str) -> Token:
        t = self.peek()
        if t.kind != "kw" or t.value != word:
            raise self.error(f"expected {word}")
        return self.next()

    def accept_kw(self, word: str) -> bool:
        t = self.peek()
        if t.kind == "kw" and t.value == word:
            self.next()
            return True
        return False

    def expect_sym(self, sym: str) -> Token:
        t = self.peek()
        if t.kind != "sym" or t.value != sym:
            raise self.error(f"expected {sym!r}")
        return self.next()

    def accept_sym(self, sym: str) -> bool:
        t = self.peek()
        if t.kind == "sym" and t.value == sym:
            self.next()
            return True
        return False

    def expect_ident(self) -> str:
        t = self.peek()
        if t.kind == "kw" and t.value == "JOIN":
            raise self.error(
                "JOIN predicates are not supported; rewrite the join as an IN (...) "
                "membership test over literal values"
            )
        if t.kind != "ident":
            raise self.error("expected identifier")
        return self.next().value  # type: ignore[return-value]

    # -- expressions ----------------------------------------------------

    def literal(self) -> Value:
        t = self.peek()
        if t.kind in ("int", "dec", "str"):
            return self.next().value  # type: ignore[return-value]
        if t.kind == "kw" and t.value == "NULL":
            self.next()
            return None
        if t.kind == "sym" and t.value == "-":
            self.next()
            v = self.literal()
            if v is None or isinstance(v, str):
                raise self.error("cannot negate a non-numeric literal")
            return -v
        raise self.error("expected literal")

    def expr(self) -> Expr:
        e = self.term()
        while True:
            t = self.peek()
            if t.kind == "sym" and t.value in ("+", "-"):
                self.next()
                e = Bin(t.value, e, self.term())
            else:
                return e

    def term(self) -> Expr:
        e = self.factor()
        while True:
            t = self.peek()
            if t.kind == "sym" and t.value in ("*", "/"):
                self.next()
                e = Bin(t.value, e, self.factor())
            else:
                return e

    def factor(self) -> Expr:
        t = self.peek()
        if t.kind in ("int", "dec", "str"):
            self.next()
            return Lit(t.value)
        if t.kind == "kw" and t.value == "NULL":
            self.next()
            return Lit(None)
        if t.kind == "sym" and t.value == "-":
            self.next()
            inner = self.factor()
            if type(inner) is Lit and inner.value is not None and not isinstance(inner.value, str):
                return Lit(-inner.value)
            return Bin("-", Lit(0), inner)
        if t.kind == "sym" and t.value == "(":
            self.next()
            e = self.expr()
            self.expect_sym(")")
            return e
        if t.kind == "ident":
            return Attr(self.next().value)  # type: ignore[arg-type]
        if t.kind == "kw" and t.value == "JOIN":
            raise self.error(
                "JOIN predicates are not supported; rewrite the join as an IN (...) "
                "membership test over literal values"
            )
        raise self.error("expected expression")

    # -- conditions -------------------------------------------------------

    def condition(self) -> Condition:
        parts = [self.conjunction()]
        while self.accept_kw("OR"):
            parts.append(self.conjunction())
        return parts[0] if len(parts) == 1 else Or(parts)

    def conjunction(self) -> Condition:
        parts = [self.cond_atom()]
        while self.accept_kw("AND"):
            parts.append(self.cond_atom())
        return parts[0] if len(parts) == 1 else And(parts)

    def cond_atom(self) -> Condition:
        if self.accept_kw("NOT"):
            return Not(self.cond_atom())
        if self.accept_kw("TRUE"):
            return TRUE
        if self.accept_kw("FALSE"):
            return FALSE
        if self.peek().kind == "sym" and self.peek().value == "(":
            # '(' opens either a nested condition or a parenthesized
            # expression inside a comparison; try the condition first and
            # fall back when the continuation says otherwise.
            mark = self.i
            try:
                self.next()
                c = self.condition()
                self.expect_sym(")")
                nxt = self.peek()
                if not (
                    nxt.kind == "sym" and nxt.value in ("=", "<>", "<", "<=", ">", ">=", "+", "-", "*", "/")
                ) and not (nxt.kind == "kw" and nxt.value == "IN"):
                    return c
            except ParseError:
                pass
            self.i = mark
        left = self.expr()
        if self.accept_kw("IN"):
            self.expect_sym("(")
            vals = [self.literal()]
            while self.accept_sym(","):
                vals.append(self.literal())
            self.expect_sym(")")
            return In(left, vals)
        t = self.peek()
        if t.kind == "sym" and t.value in ("=", "<>", "<", "<=", ">", ">="):
            self.next()
            return Cmp(t.value, left, self.expr())
        raise self.error("expected comparison operator or IN")

    # -- statements -------------------------------------------------------

    def statement(self) -> "Statement":
        if self.accept_kw("UPDATE"):
            table = self.expect_ident()
            if self.peek().kind == "kw" and self.peek().value == "JOIN":
                raise self.error(
                    "JOIN predicates are not supported; rewrite the join as an "
                    "IN (...) membership test over literal values"
                )
            self.expect_kw("SET")
            attr = self.expect_ident()
            self.expect_sym("=")
            rhs = self.expr()
            self.expect_kw("WHERE")
            cond = self.condition()
            self._eof()
            return UpdateStmt(table, attr, rhs, cond)
        if self.accept_kw("DELETE"):
            self.expect_kw("FROM")
            table = self.expect_ident()
            self.expect_kw("WHERE")
            cond = self.condition()
            self._eof()
            return DeleteStmt(table, cond)
        if self.accept_kw("INSERT"):
            self.expect_kw("INTO")
            table = self.expect_ident()
            self.expect_sym("(")
            attrs = [self.expect_ident()]
            while self.accept_sym(","):
                attrs.append(self.expect_ident())
            self.expect_sym(")")
            self.expect_kw("VALUES")
            self.expect_sym("(")
            vals = [self.literal()]
            while self.accept_sym(","):
                vals.append(self.literal())
            self.expect_sym(")")
            self._eof()
            if len(attrs) != len(vals):
                raise ParseError(
                    f"{len(attrs)} attributes but {len(vals)} values", self.text, 0
                )
            if len(set(attrs)) != len(attrs):
                raise ParseError("duplicate attribute in insert", self.text, 0)
            return InsertStmt(table, tuple(attrs), tuple(vals))
        raise self.error("expected UPDATE, DELETE or INSERT")

    def _eof(self):
        if self.peek().kind != "eof":
            raise self.error("unexpected trailing input")


# --------------------------------------------------------------------------
# Statement ASTs


@dataclass(frozen=True)
class UpdateStmt:
    table: str
    attr: str
    rhs: Expr
    where: Condition

    def lower(self, schema: Schema, mid: ModId) -> Modification:
        m = Update(mid, self.where, Assignment(self.attr, self.rhs))
        validate_modification(m, schema)
        return m


@dataclass(frozen=True)
class DeleteStmt:
    table: str
    where: Condition

    def lower(self, schema: Schema, mid: ModId) -> Modification:
        m = Delete(mid, self.where)
        validate_modification(m, schema)
        return m


@dataclass(frozen=True)
class InsertStmt:
    table: str
    attrs: tuple
    vals: tuple

    def lower(self, schema: Schema, mid: ModId) -> Modification:
        for a in self.attrs:
            if not schema.has(a):
                raise ValueError(f"unknown attribute {a!r}")
        m = make_insert(mid, dict(zip(self.attrs, self.vals)))
        validate_modification(m, schema)
        return m


Statement = UpdateStmt | DeleteStmt | InsertStmt


def parse_statement(text: str) -> Statement:
    return _Parser(text).statement()


def parse_condition(text: str) -> Condition:
    p = _Parser(text)
    c = p.condition()
    p._eof()
    return c


def parse_expr(text: str) -> Expr:
    p = _Parser(text)
    e = p.expr()
    p._eof()
    return e


# --------------------------------------------------------------------------
# Canonical printer


def print_literal(v: Value) -> str:
    if v is None:
        return "NULL"
    if isinstance(v, str):
        return "'" + v.replace("'", "''") + "'"
    if isinstance(v, Fraction):
        if v.denominator == 1:
            # keep the decimal point so the literal parses back as Dec
            return f"{v.numerator}.0"
        return format_value(v)
    return str(v)


_EXPR_PREC = {"+": 1, "-": 1, "*": 2, "/": 2}


def print_expr(e: Expr, prec: int = 0) -> str:
    if type(e) is Lit:
        if isinstance(e.value, Fraction) and e.value < 0:
            s = print_literal(e.value)
            return f"({s})" if prec > 0 else s
        if isinstance(e.value, int) and not isinstance(e.value, bool) and e.value < 0:
            return f"({e.value})" if prec > 0 else str(e.value)
        return print_literal(e.value)
    if type(e) is Attr:
        return e.name
    if type(e) is Bin:
        p = _EXPR_PREC[e.op]
        left = print_expr(e.left, p)
        # left-associative grammar: the right child needs parens at equal prec
        right = print_expr(e.right, p + 1)
        s = f"{left} {e.op} {right}"
        return f"({s})" if p < prec else s
    raise TypeError(f"not an expression node: {e!r}")


def print_condition(c: Condition, prec: int = 0) -> str:
    # precedence: OR=1, AND=2, NOT/atom=3
    t = type(c)
    if t is _TrueC:
        return "TRUE"
    if t is _FalseC:
        return "FALSE"
    if t is Cmp:
        return f"{print_expr(c.left, 1)} {c.op} {print_expr(c.right, 1)}"
    if t is In:
        body = ", ".join(print_literal(v) for v in c.choices)
        return f"{print_expr(c.expr, 1)} IN ({body})"
    if t is Not:
        return f"NOT {print_condition(c.child, 3)}"
    if t is And:
        s = " AND ".join(print_condition(ch, 3) for ch in c.children)
        return f"({s})" if prec >= 3 else s
    if t is Or:
        s = " OR ".join(print_condition(ch, 2) for ch in c.children)
        return f"({s})" if prec >= 2 else s
    raise TypeError(f"not a condition node: {c!r}")


def print_statement(s: Statement) -> str:
    if isinstance(s, UpdateStmt):
        return (
            f"UPDATE {s.table} SET {s.attr} = {print_expr(s.rhs)} "
            f"WHERE {print_condition(s.where)}"
        )
    if isinstance(s, DeleteStmt):
        return f"DELETE FROM {s.table} WHERE {print_condition(s.where)}"
    if isinstance(s, InsertStmt):
        attrs = ", ".join(s.attrs)
        vals = ", ".join(print_literal(v) for v in s.vals)
        return f"INSERT INTO {s.table} ({attrs}) VALUES ({vals})"
    raise TypeError(f"not a statement: {s!r}")


def print_modification(m: Modification, table: str = "t") -> str:
    """Render a modification back to its statement form."""
    if m.kind == "update":
        return print_statement(UpdateStmt(table, m.assign.target, m.assign.rhs, m.pred))
    if m.kind == "delete":
        return print_statement(DeleteStmt(table, m.pred))
    attrs = tuple(a for a, _ in m.values)
    vals = tuple(v for _, v in m.values)
    return print_statement(InsertStmt(table, attrs, vals))
