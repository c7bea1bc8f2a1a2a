"""Pure-Python interpreter for kernel programs.

Mirrors the compiled extension exactly: same opcodes, same int64 overflow
behavior (raising instead of wrapping), same DP state encoding. Selected
at import time when the extension is unavailable or disabled.
"""

from __future__ import annotations

from .programs import (
    OP_ADD,
    OP_AND,
    OP_COL,
    OP_EQ,
    OP_FALSE,
    OP_GE,
    OP_GT,
    OP_IN,
    OP_JF,
    OP_JT,
    OP_LE,
    OP_LIT,
    OP_LT,
    OP_MUL,
    OP_NE,
    OP_NOT,
    OP_OR,
    OP_SUB,
    OP_TRUE,
)
from ..values import INT64_MAX, INT64_MIN

OK = 0
OVERFLOW = 1
EXPLOSION = 2

_DEAD_BIT = 1 << 62


class _Overflow(Exception):
    pass


def _check(v: int) -> int:
    if v < INT64_MIN or v > INT64_MAX:
        raise _Overflow
    return v


def _in_set(pool, off, ln, v) -> bool:
    lo, hi = off, off + ln
    while lo < hi:
        mid = (lo + hi) // 2
        if pool[mid] < v:
            lo = mid + 1
        else:
            hi = mid
    return lo < off + ln and pool[lo] == v


def _run_program(ops, args, lits, pool, soff, slen, read_col, stack):
    """Interpret one program; read_col(slot) -> (value, is_null)."""
    sp = 0
    k = 0
    n = len(ops)
    while k < n:
        op = ops[k]
        a = args[k]
        k += 1
        if op == OP_LIT:
            stack[sp] = (lits[a], 0)
            sp += 1
        elif op == OP_COL:
            stack[sp] = read_col(a)
            sp += 1
        elif op <= OP_MUL:  # ADD, SUB, MUL
            (bv, bn) = stack[sp - 1]
            (av, an) = stack[sp - 2]
            sp -= 1
            if an or bn:
                stack[sp - 1] = (0, 1)
            elif op == OP_ADD:
                stack[sp - 1] = (_check(av + bv), 0)
            elif op == OP_SUB:
                stack[sp - 1] = (_check(av - bv), 0)
            else:
                stack[sp - 1] = (_check(av * bv), 0)
        elif op <= OP_GE:  # comparisons -> bool
            (bv, bn) = stack[sp - 1]
            (av, an) = stack[sp - 2]
            sp -= 1
            if an or bn:
                r = 0
            elif op == OP_EQ:
                r = 1 if av == bv else 0
            elif op == OP_NE:
                r = 1 if av != bv else 0
            elif op == OP_LT:
                r = 1 if av < bv else 0
            elif op == OP_LE:
                r = 1 if av <= bv else 0
            elif op == OP_GT:
                r = 1 if av > bv else 0
            else:
                r = 1 if av >= bv else 0
            stack[sp - 1] = (r, 0)
        elif op == OP_IN:
            (av, an) = stack[sp - 1]
            r = 0 if an else (1 if _in_set(pool, soff[a], slen[a], av) else 0)
            stack[sp - 1] = (r, 0)
        elif op == OP_AND:
            (bv, _) = stack[sp - 1]
            (av, _) = stack[sp - 2]
            sp -= 1
            stack[sp - 1] = (av and bv, 0)
        elif op == OP_OR:
            (bv, _) = stack[sp - 1]
            (av, _) = stack[sp - 2]
            sp -= 1
            stack[sp - 1] = (av or bv, 0)
        elif op == OP_NOT:
            (av, _) = stack[sp - 1]
            stack[sp - 1] = (0 if av else 1, 0)
        elif op == OP_TRUE:
            stack[sp] = (1, 0)
            sp += 1
        elif op == OP_FALSE:
            stack[sp] = (0, 0)
            sp += 1
        elif op == OP_JF:
            if stack[sp - 1][0]:
                sp -= 1
            else:
                k = a
        elif op == OP_JT:
            if stack[sp - 1][0]:
                k = a
            else:
                sp -= 1
        else:  # pragma: no cover
            raise AssertionError(f"bad opcode {op}")
    return stack[sp - 1]


def run_select(ops, args, lits, pool, soff, slen, colvals, colnulls, dead, out, max_stack):
    ops = ops.tolist()
    args = args.tolist()
    lits = lits.tolist()
    pool = pool.tolist()
    soff = soff.tolist()
    slen = slen.tolist()
    cv = [c.tolist() for c in colvals]
    cn = [c.tolist() for c in colnulls]
    dd = dead.tolist()
    stack = [(0, 0)] * (max_stack + 1)
    try:
        for i in range(len(dd)):
            if dd[i]:
                continue
            v, _ = _run_program(
                ops, args, lits, pool, soff, slen, lambda s: (cv[s][i], cn[s][i]), stack
            )
            if v:
                out[i] = 1
    except _Overflow:
        return OVERFLOW
    return OK


def run_select_idx(ops, args, lits, pool, soff, slen, colvals, colnulls, dead, idx, out, max_stack):
    """Evaluate a condition program on selected rows only."""
    ops = ops.tolist()
    args = args.tolist()
    lits = lits.tolist()
    pool = pool.tolist()
    soff = soff.tolist()
    slen = slen.tolist()
    cv = [c.tolist() for c in colvals]
    cn = [c.tolist() for c in colnulls]
    dd = dead.tolist()
    stack = [(0, 0)] * (max_stack + 1)
    try:
        for k, i in enumerate(idx.tolist()):
            if dd[i]:
                continue
            v, _ = _run_program(
                ops, args, lits, pool, soff, slen, lambda s: (cv[s][i], cn[s][i]), stack
            )
            if v:
                out[k] = 1
    except _Overflow:
        return OVERFLOW
    return OK


def run_eval_rows(ops, args, lits, pool, soff, slen, colvals, colnulls, idx, out_vals, out_nulls, max_stack):
    ops = ops.tolist()
    args = args.tolist()
    lits = lits.tolist()
    pool = pool.tolist()
    soff = soff.tolist()
    slen = slen.tolist()
    cv = [c.tolist() for c in colvals]
    cn = [c.tolist() for c in colnulls]
    stack = [(0, 0)] * (max_stack + 1)
    try:
        for k, i in enumerate(idx.tolist()):
            v, n = _run_program(
                ops, args, lits, pool, soff, slen, lambda s: (cv[s][i], cn[s][i]), stack
            )
            out_vals[k] = 0 if n else v
            out_nulls[k] = n
    except _Overflow:
        return OVERFLOW
    return OK


def run_dp(
    kind,
    target,
    pred_off,
    pred_len,
    rhs_off,
    rhs_len,
    ops,
    args,
    lits,
    pool,
    soff,
    slen,
    m1,
    vals2d,
    nulls2d,
    dead,
    rows,
    threshold,
    out,
    max_stack,
):
    """Per-row DP over interleaving prefixes; out[k]=1 iff row conflicts.

    States are tuples (v_0..v_{K-1}, meta) with meta packing per-slot null
    bits plus a dead bit; null slots canonically hold 0 so structural
    equality is state equality.
    """
    K = vals2d.shape[1]
    kind = kind.tolist()
    target = target.tolist()
    pred_off = pred_off.tolist()
    pred_len = pred_len.tolist()
    rhs_off = rhs_off.tolist()
    rhs_len = rhs_len.tolist()
    ops = ops.tolist()
    args = args.tolist()
    lits = lits.tolist()
    pool = pool.tolist()
    soff = soff.tolist()
    slen = slen.tolist()
    m = len(kind)
    m2 = m - m1
    stack = [(0, 0)] * (max_stack + 1)
    total = 0

    dead_state = (0,) * K + (((1 << K) - 1) | _DEAD_BIT,)

    def eval_prog(off, ln, state):
        return _run_program(
            ops[off : off + ln],
            args[off : off + ln],
            lits,
            pool,
            soff,
            slen,
            lambda s: (state[s], (state[K] >> s) & 1),
            stack,
        )

    def apply_mod(mi, state):
        meta = state[K]
        if meta & _DEAD_BIT:
            return state
        kd = kind[mi]
        if kd == 2:
            return state
        fire, _ = eval_prog(pred_off[mi], pred_len[mi], state)
        if not fire:
            return state
        if kd == 1:
            return dead_state
        v, n = eval_prog(rhs_off[mi], rhs_len[mi], state)
        tgt = target[mi]
        new = list(state)
        if n:
            new[tgt] = 0
            new[K] = meta | (1 << tgt)
        else:
            new[tgt] = v
            new[K] = meta & ~(1 << tgt)
        return tuple(new)

    try:
        for out_i, r in enumerate(rows.tolist()):
            if dead[r]:
                out[out_i] = 0
                continue
            meta = 0
            for s in range(K):
                if nulls2d[r, s]:
                    meta |= 1 << s
            s0 = tuple(int(vals2d[r, s]) for s in range(K)) + (meta,)
            prev = [None] * (m2 + 1)
            prev[0] = {s0}
            total += 1
            for j in range(1, m2 + 1):
                prev[j] = {apply_mod(m1 + j - 1, s) for s in prev[j - 1]}
                total += len(prev[j])
            for i in range(1, m1 + 1):
                cur = [None] * (m2 + 1)
                cur[0] = {apply_mod(i - 1, s) for s in prev[0]}
                total += len(cur[0])
                for j in range(1, m2 + 1):
                    cell = {apply_mod(i - 1, s) for s in prev[j]}
                    cell |= {apply_mod(m1 + j - 1, s) for s in cur[j - 1]}
                    cur[j] = cell
                    total += len(cell)
                prev = cur
                if total > threshold:
                    return EXPLOSION
            out[out_i] = 1 if len(prev[m2]) > 1 else 0
            if total > threshold:
                return EXPLOSION
    except _Overflow:
        return OVERFLOW
    return OK
