"""Interactive reconciliation: build one total order from pairwise answers.

The session walks the head of branch 1 against branch 2, pausing at the
first genuinely conflicting pair for a precedence answer. Conflicts are
judged on the *current virtual version* - the base plus everything chosen
so far - by backtracking the pair's condition through the chosen prefix,
never by materializing it. Every answer retires at least one
modification, so a session never asks more than |H1| + |H2| questions.
"""

from __future__ import annotations

from dataclasses import dataclass

from .conditions import backtrack_through
from .detect import pair_condition, pair_kinds
from .exprs import _FalseC
from .mods import History, Interleaving, ModId, Modification, apply_to_state
from .schema import RowId
from .table import TableSnapshot
from .values import check_value

MAX_SAMPLE_ROWS = 20


class SessionStateError(Exception):
    """Raised when answer() is called while no prompt is pending."""


@dataclass(frozen=True)
class PromptRow:
    """One conflicting tuple with its outcome under each precedence choice.

    values/left_first/right_first are attribute maps; None in place of a
    map means the row is absent (tombstoned or not yet inserted).
    """

    rid: RowId
    values: dict | None
    left_first: dict | None
    right_first: dict | None


@dataclass(frozen=True)
class Prompt:
    left: Modification
    right: Modification
    pair_kinds: frozenset
    sample_rows: tuple


class MergeSession:
    """Algorithm state: accumulated order, remaining histories, pending ask.

    The conflict test and prompt rendering are injected, so the same
    control flow drives real data-backed merges and synthetic simulations.
    """

    def __init__(self, items1, items2, conflict_test, prompt_builder=None, first_conflict=None):
        self.order: list = []
        self.rem1: list = list(items1)
        self.rem2: list = list(items2)
        self._conflict = conflict_test
        self._prompt_builder = prompt_builder or (lambda order, phi, psi: (phi, psi))
        self._first_conflict = first_conflict or self._scan_conflict
        self._bound = len(self.rem1) + len(self.rem2)
        self.questions = 0
        self.prompt = None
        self._pending_j: int | None = None
        self._advance()

    def _scan_conflict(self, order, phi, rem2):
        for j, psi in enumerate(rem2):
            if self._conflict(order, phi, psi):
                return j
        return None

    @property
    def state(self) -> str:
        if self.prompt is not None:
            return "needs_answer"
        return "done" if not self.rem1 and not self.rem2 else "advancing"

    @property
    def done(self) -> bool:
        return self.state == "done"

    def _advance(self) -> None:
        while self.rem1 and self.rem2:
            phi = self.rem1[0]
            hit = self._first_conflict(self.order, phi, self.rem2)
            if hit is None:
                self.order.append(self.rem1.pop(0))
                continue
            self._pending_j = hit
            self.prompt = self._prompt_builder(self.order, phi, self.rem2[hit])
            return
        self.order.extend(self.rem1)
        self.order.extend(self.rem2)
        self.rem1 = []
        self.rem2 = []
        self.prompt = None
        self._pending_j = None

    def answer(self, choice: str) -> "MergeSession":
        """Record one precedence decision and advance to the next prompt."""
        if self.prompt is None:
            raise SessionStateError("session is not awaiting an answer")
        if choice not in ("left_first", "right_first", "left", "right"):
            raise ValueError(f"unknown choice {choice!r}")
        self.questions += 1
        assert self.questions <= self._bound, "interaction bound exceeded"
        if choice.startswith("left"):
            self.order.append(self.rem1.pop(0))
        else:
            j = self._pending_j
            self.order.extend(self.rem2[: j + 1])
            del self.rem2[: j + 1]
        self.prompt = None
        self._pending_j = None
        self._advance()
        return self

    def result(self) -> list:
        if not self.done:
            raise SessionStateError("session is not finished")
        return list(self.order)


# --------------------------------------------------------------------------
# Data-backed sessions


def _born_values(schema, m: Modification):
    vals = m.value_map()
    return tuple(check_value(vals.get(a), t) for a, t in zip(schema.attrs, schema.types))


def _replay_row(schema, start_values, mods, rid: RowId):
    """Per-tuple replay: values tuple or None when absent/tombstoned."""
    values = start_values
    dead = False
    for m in mods:
        if values is None:
            if m.kind == "insert" and m.rid == rid:
                values = _born_values(schema, m)
            continue
        values, dead = apply_to_state(schema, values, dead, m)
        if dead:
            values = None
    return values


def _virtual_state(d0: TableSnapshot, applied: list, rid: RowId):
    pos = d0.rid_pos().get(rid)
    if pos is not None and not d0.dead.vals[pos]:
        start = tuple(col.vals[pos] for col in d0._cols)
    else:
        start = None
    return _replay_row(d0.schema, start, applied, rid)


def _value_dict(schema, values) -> dict | None:
    from .mods import _value_to_json

    if values is None:
        return None
    return {a: _value_to_json(v) for a, v in zip(schema.attrs, values)}


def _conflict_rows(d0: TableSnapshot, applied: list, phi, psi) -> set[RowId]:
    """Rows on which phi and psi collide on the current virtual version."""
    cond, iverdicts = pair_condition(phi, psi, d0.schema.attrs)
    rows = {rid for rid, bad in iverdicts if bad}
    if cond is not None and type(cond) is not _FalseC:
        bt = backtrack_through(cond, applied)
        rows |= {rid for rid, _ in bt.flagged_inserts}
        if type(bt.cond) is not _FalseC:
            rows |= d0.select(bt.cond)
    return rows


def _make_session(d0: TableSnapshot, h1: History, h2: History, debug_materialize: bool):
    schema = d0.schema

    def conflict_test(applied, phi, psi) -> bool:
        rows = _conflict_rows(d0, applied, phi, psi)
        if debug_materialize:
            from .mods import apply_history
            from .oracles import exhaustive_conflicts

            virtual = apply_history(d0, applied)
            brute = exhaustive_conflicts(
                virtual, History(phi.id.branch, [phi]), History(psi.id.branch, [psi])
            )
            assert bool(brute) == bool(rows), (
                f"virtual conditioning disagrees with materialized check "
                f"for {phi.id} vs {psi.id}"
            )
        return bool(rows)

    def prompt_builder(applied, phi, psi) -> Prompt:
        rows = sorted(_conflict_rows(d0, applied, phi, psi))[:MAX_SAMPLE_ROWS]
        samples = []
        for rid in rows:
            values = _virtual_state(d0, applied, rid)
            left = _replay_row(schema, values, [phi, psi], rid)
            right = _replay_row(schema, values, [psi, phi], rid)
            samples.append(
                PromptRow(
                    rid,
                    _value_dict(schema, values),
                    _value_dict(schema, left),
                    _value_dict(schema, right),
                )
            )
        return Prompt(phi, psi, pair_kinds(phi, psi, schema.attrs), tuple(samples))

    return conflict_test, prompt_builder


def start_session(
    d0: TableSnapshot, h1: History, h2: History, debug_materialize: bool = False
) -> MergeSession:
    """Open a reconciliation session over two branches of d0."""
    h1.validate(d0.schema)
    h2.validate(d0.schema)
    conflict_test, prompt_builder = _make_session(d0, h1, h2, debug_materialize)
    session = MergeSession(h1.mods, h2.mods, conflict_test, prompt_builder)
    session.d0 = d0
    session.h1 = h1
    session.h2 = h2
    return session


def answer(session: MergeSession, choice: str) -> MergeSession:
    return session.answer(choice)


def resolve(d0: TableSnapshot, h1: History, h2: History, answerer) -> Interleaving:
    """Batch driver: answerer(prompt) -> 'left_first' | 'right_first'."""
    session = start_session(d0, h1, h2)
    while not session.done:
        session.answer(answerer(session.prompt))
    return Interleaving(session.result())


def precedence_answerer(desired: Interleaving):
    """Answerer consistent with a hidden desired interleaving."""
    rank = {m.id: k for k, m in enumerate(desired.mods)}

    def ask(prompt: Prompt) -> str:
        return "left_first" if rank[prompt.left.id] < rank[prompt.right.id] else "right_first"

    return ask


# --------------------------------------------------------------------------
# Session persistence


def session_state(session: MergeSession) -> dict:
    """JSON-ready state; restore_session rebuilds the identical session."""
    return {
        "order": [[m.id.branch, m.id.seq] for m in session.order],
        "questions": session.questions,
    }


def restore_session(d0: TableSnapshot, h1: History, h2: History, state: dict) -> MergeSession:
    """Rebuild a session from its serialized state.

    Only the answered prefix needs storing: re-running the advance loop on
    the restored remainder deterministically lands on the same prompt.
    """
    by_id = {m.id: m for m in list(h1) + list(h2)}
    order = [by_id[ModId(b, s)] for b, s in state["order"]]
    consumed1 = sum(1 for m in order if m.id.branch == h1.branch)
    consumed2 = len(order) - consumed1
    conflict_test, prompt_builder = _make_session(d0, h1, h2, False)
    session = MergeSession.__new__(MergeSession)
    session.order = order
    session.rem1 = list(h1.mods[consumed1:])
    session.rem2 = list(h2.mods[consumed2:])
    session._conflict = conflict_test
    session._prompt_builder = prompt_builder
    session._first_conflict = session._scan_conflict
    session._bound = len(h1) + len(h2)
    session.questions = int(state["questions"])
    session.prompt = None
    session._pending_j = None
    session.d0 = d0
    session.h1 = h1
    session.h2 = h2
    session._advance()
    return session
