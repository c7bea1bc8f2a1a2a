"""Kernel selection: compiled extension when available, pure Python otherwise.

Set MP_KERNEL=py (or =c) to force a backend. All entry points here are
*try*-style: they return None when the inputs fall outside the int64
program model, and the caller evaluates on the generic object path
instead, so results never depend on which backend is active.
"""

from __future__ import annotations

import os

import numpy as np

from ..exprs import Condition, Expr
from . import programs as _p
from . import pykernel as _py

_FORCED = os.environ.get("MP_KERNEL", "").strip().lower()

_impl = None
_impl_name = "py"
if _FORCED != "py":
    try:
        from . import _ckernel as _c  # type: ignore

        _impl = _c
        _impl_name = "c"
    except ImportError:
        if _FORCED == "c":
            raise
        _impl = None
if _impl is None:
    _impl = _py
    _impl_name = "py"


class StateExplosion(Exception):
    """The DP oracle exceeded its aggregate state threshold."""


def kernel_name() -> str:
    return _impl_name


def _packed_cols(snapshot, table: _p.SymbolTable):
    colvals = []
    colnulls = []
    for attr in table.slots:
        v, n = snapshot.column(attr).np_view()
        colvals.append(v)
        colnulls.append(n)
    if not colvals:
        z = np.zeros(len(snapshot.rids), dtype=np.int64)
        colvals = [z]
        colnulls = [np.zeros(len(snapshot.rids), dtype=np.uint8)]
    return colvals, colnulls


def try_select_mask(snapshot, cond: Condition):
    """Visible-row mask for cond, or None when not kernel-eligible."""
    table = _p.SymbolTable(snapshot.schema)
    prog = _p.compile_condition(cond, table)
    if prog is None:
        return None
    lits, pool, soff, slen = table.packed()
    colvals, colnulls = _packed_cols(snapshot, table)
    out = np.zeros(len(snapshot.rids), dtype=np.uint8)
    status = _impl.run_select(
        prog.ops, prog.args, lits, pool, soff, slen,
        colvals, colnulls, snapshot.dead_np(), out, prog.max_stack,
    )
    if status != _py.OK:
        return None
    return out


def try_select_on_rows(snapshot, cond: Condition, rows: np.ndarray):
    """Mask (len == len(rows)) of cond over the given rows, or None."""
    table = _p.SymbolTable(snapshot.schema)
    prog = _p.compile_condition(cond, table)
    if prog is None:
        return None
    lits, pool, soff, slen = table.packed()
    colvals, colnulls = _packed_cols(snapshot, table)
    out = np.zeros(len(rows), dtype=np.uint8)
    status = _impl.run_select_idx(
        prog.ops, prog.args, lits, pool, soff, slen,
        colvals, colnulls, snapshot.dead_np(), np.asarray(rows, dtype=np.int64),
        out, prog.max_stack,
    )
    if status != _py.OK:
        return None
    return out


def try_eval_rows(snapshot, expr: Expr, idx: np.ndarray):
    """(values, null flags) of expr over the given row indices, or None."""
    table = _p.SymbolTable(snapshot.schema)
    prog = _p.compile_expr(expr, table)
    if prog is None:
        return None
    lits, pool, soff, slen = table.packed()
    colvals, colnulls = _packed_cols(snapshot, table)
    out_v = np.zeros(len(idx), dtype=np.int64)
    out_n = np.zeros(len(idx), dtype=np.uint8)
    status = _impl.run_eval_rows(
        prog.ops, prog.args, lits, pool, soff, slen,
        colvals, colnulls, np.asarray(idx, dtype=np.int64), out_v, out_n, prog.max_stack,
    )
    if status != _py.OK:
        return None
    return out_v, out_n


def try_dp_conflicts(d0, mods1, mods2, rows_idx: np.ndarray, threshold: int):
    """Per-row conflict flags from the grid DP, or None when ineligible.

    Raises StateExplosion when the aggregate state count passes threshold.
    Inserts are identity maps here; insert-born rows are handled by the
    caller on the object path.
    """
    mods1 = list(mods1)
    mods2 = list(mods2)
    table = _p.SymbolTable(d0.schema)
    kinds = []
    targets = []
    pred_progs = []
    rhs_progs = []
    for mod in mods1 + mods2:
        k = mod.kind
        if k == "insert":
            kinds.append(2)
            targets.append(-1)
            pred_progs.append(None)
            rhs_progs.append(None)
            continue
        pred = _p.compile_condition(mod.pred, table)
        if pred is None:
            return None
        if k == "delete":
            kinds.append(1)
            targets.append(-1)
            pred_progs.append(pred)
            rhs_progs.append(None)
        else:
            rhs = _p.compile_expr(mod.assign.rhs, table)
            if rhs is None:
                return None
            try:
                tgt = table.slot(mod.assign.target)
            except (_p.Ineligible, KeyError):
                return None
            kinds.append(0)
            targets.append(tgt)
            pred_progs.append(pred)
            rhs_progs.append(rhs)
    K = len(table.slots)
    if K > 62:
        return None

    code_ops: list[int] = []
    code_args: list[int] = []
    max_stack = 1

    def _append(prog):
        if prog is None:
            return 0, 0
        off = len(code_ops)
        code_ops.extend(prog.ops.tolist())
        code_args.extend(prog.args.tolist())
        return off, len(prog.ops)

    pred_off = []
    pred_len = []
    rhs_off = []
    rhs_len = []
    for p, r in zip(pred_progs, rhs_progs):
        o, l = _append(p)
        pred_off.append(o)
        pred_len.append(l)
        o, l = _append(r)
        rhs_off.append(o)
        rhs_len.append(l)
        for prog in (p, r):
            if prog is not None:
                max_stack = max(max_stack, prog.max_stack)

    lits, pool, soff, slen = table.packed()
    n = len(d0.rids)
    if K:
        vals2d = np.empty((n, K), dtype=np.int64)
        nulls2d = np.empty((n, K), dtype=np.uint8)
        for s, attr in enumerate(table.slots):
            v, nn = d0.column(attr).np_view()
            vals2d[:, s] = v
            nulls2d[:, s] = nn
    else:
        vals2d = np.zeros((n, 1), dtype=np.int64)
        nulls2d = np.zeros((n, 1), dtype=np.uint8)
    rows_idx = np.asarray(rows_idx, dtype=np.int64)
    out = np.zeros(len(rows_idx), dtype=np.uint8)
    status = _impl.run_dp(
        np.asarray(kinds, dtype=np.int32),
        np.asarray(targets, dtype=np.int32),
        np.asarray(pred_off, dtype=np.int32),
        np.asarray(pred_len, dtype=np.int32),
        np.asarray(rhs_off, dtype=np.int32),
        np.asarray(rhs_len, dtype=np.int32),
        np.asarray(code_ops or [16], dtype=np.int32),
        np.asarray(code_args or [0], dtype=np.int32),
        lits, pool, soff, slen,
        len(mods1),
        vals2d, nulls2d, d0.dead_np(), rows_idx,
        int(threshold), out, max_stack,
    )
    if status == _py.EXPLOSION:
        raise StateExplosion(threshold)
    if status != _py.OK:
        return None
    return out
