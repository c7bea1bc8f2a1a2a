# cython: boundscheck=False, wraparound=False, nonecheck=False, cdivision=True
"""Compiled evaluation kernel: bulk condition scans and the per-row DP.

Semantics match pykernel.py exactly; tests compare the two on random
programs. int64 overflow aborts the call with a status the caller turns
into a fallback to exact object arithmetic.
"""

from libc.stdlib cimport free, malloc, realloc
from libc.string cimport memcmp, memcpy

import numpy as np

cimport numpy as cnp

cnp.import_array()

cdef extern from *:
    ctypedef long long int128 "__int128"

ctypedef cnp.int64_t i64
ctypedef cnp.int32_t i32
ctypedef cnp.uint8_t u8

DEF MAXSLOTS = 128

cdef i64 I64_MAX = 9223372036854775807
cdef i64 I64_MIN = -9223372036854775807 - 1
cdef i64 DEAD_BIT = (<i64>1) << 62

DEF S_OK = 0
DEF S_OVERFLOW = 1
DEF S_EXPLOSION = 2

OK = S_OK
OVERFLOW = S_OVERFLOW
EXPLOSION = S_EXPLOSION

DEF OP_LIT = 0
DEF OP_COL = 1
DEF OP_ADD = 2
DEF OP_SUB = 3
DEF OP_MUL = 4
DEF OP_EQ = 5
DEF OP_NE = 6
DEF OP_LT = 7
DEF OP_LE = 8
DEF OP_GT = 9
DEF OP_GE = 10
DEF OP_IN = 11
DEF OP_AND = 12
DEF OP_OR = 13
DEF OP_NOT = 14
DEF OP_TRUE = 15
DEF OP_FALSE = 16
DEF OP_JF = 17
DEF OP_JT = 18


cdef inline bint _in_set(const i64* pool, int off, int ln, i64 v) noexcept nogil:
    cdef int lo = off
    cdef int hi = off + ln
    cdef int mid
    while lo < hi:
        mid = (lo + hi) >> 1
        if pool[mid] < v:
            lo = mid + 1
        else:
            hi = mid
    return lo < off + ln and pool[lo] == v


cdef int _arith(int op, i64 a, i64 b, i64* out) noexcept nogil:
    cdef int128 p
    if op == OP_ADD:
        p = <int128> a + <int128> b
    elif op == OP_SUB:
        p = <int128> a - <int128> b
    else:
        p = <int128> a * <int128> b
    if p > <int128> I64_MAX or p < <int128> I64_MIN:
        return S_OVERFLOW
    out[0] = <i64> p
    return S_OK


cdef int _eval(const i32* ops, const i32* args, int n,
               const i64* lits, const i64* pool, const i32* soff, const i32* slen,
               i64** cols, u8** nulls, Py_ssize_t row,
               const i64* state, int K,
               i64* vstack, u8* nstack, i64* res_v, u8* res_n) noexcept nogil:
    """Interpret one program. Column reads come from (cols,nulls)[row] in
    table mode (state == NULL) or from the packed state vector otherwise."""
    cdef int sp = 0
    cdef int k = 0
    cdef int op, a, r
    cdef i64 av, bv, v
    cdef u8 an, bn
    while k < n:
        op = ops[k]
        a = args[k]
        k += 1
        if op == OP_LIT:
            vstack[sp] = lits[a]
            nstack[sp] = 0
            sp += 1
        elif op == OP_COL:
            if state == NULL:
                vstack[sp] = cols[a][row]
                nstack[sp] = nulls[a][row]
            else:
                vstack[sp] = state[a]
                nstack[sp] = <u8> ((state[K] >> a) & 1)
            sp += 1
        elif op <= OP_MUL:
            bv = vstack[sp - 1]; bn = nstack[sp - 1]
            av = vstack[sp - 2]; an = nstack[sp - 2]
            sp -= 1
            if an or bn:
                vstack[sp - 1] = 0
                nstack[sp - 1] = 1
            else:
                if _arith(op, av, bv, &v) != S_OK:
                    return S_OVERFLOW
                vstack[sp - 1] = v
                nstack[sp - 1] = 0
        elif op <= OP_GE:
            bv = vstack[sp - 1]; bn = nstack[sp - 1]
            av = vstack[sp - 2]; an = nstack[sp - 2]
            sp -= 1
            if an or bn:
                r = 0
            elif op == OP_EQ:
                r = av == bv
            elif op == OP_NE:
                r = av != bv
            elif op == OP_LT:
                r = av < bv
            elif op == OP_LE:
                r = av <= bv
            elif op == OP_GT:
                r = av > bv
            else:
                r = av >= bv
            vstack[sp - 1] = r
            nstack[sp - 1] = 0
        elif op == OP_IN:
            av = vstack[sp - 1]
            if nstack[sp - 1]:
                vstack[sp - 1] = 0
            else:
                vstack[sp - 1] = 1 if _in_set(pool, soff[a], slen[a], av) else 0
            nstack[sp - 1] = 0
        elif op == OP_AND:
            sp -= 1
            vstack[sp - 1] = vstack[sp - 1] and vstack[sp]
        elif op == OP_OR:
            sp -= 1
            vstack[sp - 1] = vstack[sp - 1] or vstack[sp]
        elif op == OP_NOT:
            vstack[sp - 1] = 0 if vstack[sp - 1] else 1
        elif op == OP_TRUE:
            vstack[sp] = 1
            nstack[sp] = 0
            sp += 1
        elif op == OP_FALSE:
            vstack[sp] = 0
            nstack[sp] = 0
            sp += 1
        elif op == OP_JF:
            if vstack[sp - 1]:
                sp -= 1
            else:
                k = a
        else:  # OP_JT
            if vstack[sp - 1]:
                k = a
            else:
                sp -= 1
    res_v[0] = vstack[sp - 1]
    res_n[0] = nstack[sp - 1]
    return S_OK


def run_select(cnp.ndarray[i32, ndim=1] ops, cnp.ndarray[i32, ndim=1] args,
               cnp.ndarray[i64, ndim=1] lits, cnp.ndarray[i64, ndim=1] pool,
               cnp.ndarray[i32, ndim=1] soff, cnp.ndarray[i32, ndim=1] slen,
               list colvals, list colnulls,
               cnp.ndarray[u8, ndim=1] dead, cnp.ndarray[u8, ndim=1] out,
               int max_stack):
    cdef i64* cols[MAXSLOTS]
    cdef u8* nulls[MAXSLOTS]
    cdef int nc = len(colvals)
    cdef int c
    cdef cnp.ndarray[i64, ndim=1] cv
    cdef cnp.ndarray[u8, ndim=1] cn
    for c in range(nc):
        cv = colvals[c]
        cn = colnulls[c]
        if cv.shape[0]:
            cols[c] = &cv[0]
        else:
            cols[c] = NULL
        if cn.shape[0]:
            nulls[c] = &cn[0]
        else:
            nulls[c] = NULL
    cdef Py_ssize_t n_rows = dead.shape[0]
    cdef int n_ops = ops.shape[0]
    cdef i64* vstack = <i64*> malloc((max_stack + 1) * sizeof(i64))
    cdef u8* nstack = <u8*> malloc(max_stack + 1)
    if vstack == NULL or nstack == NULL:
        free(vstack); free(nstack)
        raise MemoryError
    cdef i64 rv
    cdef u8 rn
    cdef Py_ssize_t i
    cdef int status = S_OK
    with nogil:
        for i in range(n_rows):
            if dead[i]:
                continue
            if _eval(&ops[0], &args[0], n_ops, &lits[0], &pool[0], &soff[0], &slen[0],
                     cols, nulls, i, NULL, 0, vstack, nstack, &rv, &rn) != S_OK:
                status = S_OVERFLOW
                break
            if rv:
                out[i] = 1
    free(vstack)
    free(nstack)
    return status


def run_select_idx(cnp.ndarray[i32, ndim=1] ops, cnp.ndarray[i32, ndim=1] args,
                   cnp.ndarray[i64, ndim=1] lits, cnp.ndarray[i64, ndim=1] pool,
                   cnp.ndarray[i32, ndim=1] soff, cnp.ndarray[i32, ndim=1] slen,
                   list colvals, list colnulls,
                   cnp.ndarray[u8, ndim=1] dead, cnp.ndarray[i64, ndim=1] idx,
                   cnp.ndarray[u8, ndim=1] out, int max_stack):
    cdef i64* cols[MAXSLOTS]
    cdef u8* nulls[MAXSLOTS]
    cdef int nc = len(colvals)
    cdef int c
    cdef cnp.ndarray[i64, ndim=1] cv
    cdef cnp.ndarray[u8, ndim=1] cn
    for c in range(nc):
        cv = colvals[c]
        cn = colnulls[c]
        if cv.shape[0]:
            cols[c] = &cv[0]
        else:
            cols[c] = NULL
        if cn.shape[0]:
            nulls[c] = &cn[0]
        else:
            nulls[c] = NULL
    cdef Py_ssize_t n = idx.shape[0]
    cdef int n_ops = ops.shape[0]
    cdef i64* vstack = <i64*> malloc((max_stack + 1) * sizeof(i64))
    cdef u8* nstack = <u8*> malloc(max_stack + 1)
    if vstack == NULL or nstack == NULL:
        free(vstack); free(nstack)
        raise MemoryError
    cdef i64 rv
    cdef u8 rn
    cdef Py_ssize_t k, i
    cdef int status = S_OK
    with nogil:
        for k in range(n):
            i = idx[k]
            if dead[i]:
                continue
            if _eval(&ops[0], &args[0], n_ops, &lits[0], &pool[0], &soff[0], &slen[0],
                     cols, nulls, i, NULL, 0, vstack, nstack, &rv, &rn) != S_OK:
                status = S_OVERFLOW
                break
            if rv:
                out[k] = 1
    free(vstack)
    free(nstack)
    return status


def run_eval_rows(cnp.ndarray[i32, ndim=1] ops, cnp.ndarray[i32, ndim=1] args,
                  cnp.ndarray[i64, ndim=1] lits, cnp.ndarray[i64, ndim=1] pool,
                  cnp.ndarray[i32, ndim=1] soff, cnp.ndarray[i32, ndim=1] slen,
                  list colvals, list colnulls,
                  cnp.ndarray[i64, ndim=1] idx,
                  cnp.ndarray[i64, ndim=1] out_vals, cnp.ndarray[u8, ndim=1] out_nulls,
                  int max_stack):
    cdef i64* cols[MAXSLOTS]
    cdef u8* nulls[MAXSLOTS]
    cdef int nc = len(colvals)
    cdef int c
    cdef cnp.ndarray[i64, ndim=1] cv
    cdef cnp.ndarray[u8, ndim=1] cn
    for c in range(nc):
        cv = colvals[c]
        cn = colnulls[c]
        if cv.shape[0]:
            cols[c] = &cv[0]
        else:
            cols[c] = NULL
        if cn.shape[0]:
            nulls[c] = &cn[0]
        else:
            nulls[c] = NULL
    cdef Py_ssize_t n = idx.shape[0]
    cdef int n_ops = ops.shape[0]
    cdef i64* vstack = <i64*> malloc((max_stack + 1) * sizeof(i64))
    cdef u8* nstack = <u8*> malloc(max_stack + 1)
    if vstack == NULL or nstack == NULL:
        free(vstack); free(nstack)
        raise MemoryError
    cdef i64 rv
    cdef u8 rn
    cdef Py_ssize_t k
    cdef int status = S_OK
    with nogil:
        for k in range(n):
            if _eval(&ops[0], &args[0], n_ops, &lits[0], &pool[0], &soff[0], &slen[0],
                     cols, nulls, idx[k], NULL, 0, vstack, nstack, &rv, &rn) != S_OK:
                status = S_OVERFLOW
                break
            out_vals[k] = 0 if rn else rv
            out_nulls[k] = rn
    free(vstack)
    free(nstack)
    return status


cdef struct Cell:
    i64* data
    int cnt
    int cap


cdef inline int _cell_insert(Cell* c, const i64* st, int stride) noexcept nogil:
    """Insert with dedupe; returns 1 if appended, 0 if present, -1 on OOM."""
    cdef int k
    cdef i64* nd
    cdef size_t nbytes = stride * sizeof(i64)
    for k in range(c.cnt):
        if memcmp(c.data + k * stride, st, nbytes) == 0:
            return 0
    if c.cnt == c.cap:
        nd = <i64*> realloc(c.data, 2 * c.cap * nbytes)
        if nd == NULL:
            return -1
        c.data = nd
        c.cap *= 2
    memcpy(c.data + c.cnt * stride, st, nbytes)
    c.cnt += 1
    return 1


def run_dp(cnp.ndarray[i32, ndim=1] kind, cnp.ndarray[i32, ndim=1] target,
           cnp.ndarray[i32, ndim=1] pred_off, cnp.ndarray[i32, ndim=1] pred_len,
           cnp.ndarray[i32, ndim=1] rhs_off, cnp.ndarray[i32, ndim=1] rhs_len,
           cnp.ndarray[i32, ndim=1] ops, cnp.ndarray[i32, ndim=1] args,
           cnp.ndarray[i64, ndim=1] lits, cnp.ndarray[i64, ndim=1] pool,
           cnp.ndarray[i32, ndim=1] soff, cnp.ndarray[i32, ndim=1] slen,
           int m1,
           cnp.ndarray[i64, ndim=2] vals2d, cnp.ndarray[u8, ndim=2] nulls2d,
           cnp.ndarray[u8, ndim=1] dead,
           cnp.ndarray[i64, ndim=1] rows, i64 threshold,
           cnp.ndarray[u8, ndim=1] out, int max_stack):
    cdef int m = kind.shape[0]
    cdef int m2 = m - m1
    cdef int K = vals2d.shape[1]
    cdef int stride = K + 1
    cdef int n_cells = m2 + 1
    cdef i64 total = 0
    cdef int status = S_OK

    cdef Cell* bank_a = <Cell*> malloc(n_cells * sizeof(Cell))
    cdef Cell* bank_b = <Cell*> malloc(n_cells * sizeof(Cell))
    cdef i64* tmp = <i64*> malloc(stride * sizeof(i64))
    cdef i64* dead_state = <i64*> malloc(stride * sizeof(i64))
    cdef i64* vstack = <i64*> malloc((max_stack + 1) * sizeof(i64))
    cdef u8* nstack = <u8*> malloc(max_stack + 1)
    if not (bank_a and bank_b and tmp and dead_state and vstack and nstack):
        free(bank_a); free(bank_b); free(tmp); free(dead_state); free(vstack); free(nstack)
        raise MemoryError
    cdef int j, k
    for j in range(n_cells):
        bank_a[j].data = <i64*> malloc(4 * stride * sizeof(i64))
        bank_a[j].cap = 4
        bank_a[j].cnt = 0
        bank_b[j].data = <i64*> malloc(4 * stride * sizeof(i64))
        bank_b[j].cap = 4
        bank_b[j].cnt = 0
        if bank_a[j].data == NULL or bank_b[j].data == NULL:
            raise MemoryError
    for k in range(K):
        dead_state[k] = 0
    dead_state[K] = (((<i64>1) << K) - 1) | DEAD_BIT

    cdef const i32* p_ops = &ops[0]
    cdef const i32* p_args = &args[0]
    cdef const i64* p_lits = &lits[0]
    cdef const i64* p_pool = &pool[0]
    cdef const i32* p_soff = &soff[0]
    cdef const i32* p_slen = &slen[0]

    cdef Py_ssize_t n_rows = rows.shape[0]
    cdef Py_ssize_t ri, r
    cdef Cell* prev
    cdef Cell* cur
    cdef Cell* swp
    cdef int i, mi, ins
    cdef i64 meta

    with nogil:
        for ri in range(n_rows):
            if status != S_OK:
                break
            r = rows[ri]
            if dead[r]:
                out[ri] = 0
                continue
            prev = bank_a
            cur = bank_b
            for j in range(n_cells):
                prev[j].cnt = 0
                cur[j].cnt = 0
            # T[0][0] = {initial state}
            meta = 0
            for k in range(K):
                tmp[k] = vals2d[r, k]
                if nulls2d[r, k]:
                    tmp[k] = 0
                    meta |= (<i64>1) << k
            tmp[K] = meta
            if _cell_insert(&prev[0], tmp, stride) < 0:
                status = S_EXPLOSION
                break
            total += 1
            # T[0][j] = psi_j(T[0][j-1])
            for j in range(1, n_cells):
                for k in range(prev[j - 1].cnt):
                    ins = _apply_into(m1 + j - 1, prev[j - 1].data + k * stride, &prev[j],
                                      &kind[0], &target[0], &pred_off[0], &pred_len[0],
                                      &rhs_off[0], &rhs_len[0],
                                      p_ops, p_args, p_lits, p_pool, p_soff, p_slen,
                                      K, stride, tmp, dead_state, vstack, nstack)
                    if ins < 0:
                        status = S_OVERFLOW if ins == -2 else S_EXPLOSION
                        break
                    total += ins
                if status != S_OK:
                    break
                if total > threshold:
                    status = S_EXPLOSION
                    break
            # rows i = 1..m1
            i = 1
            while i <= m1 and status == S_OK:
                mi = i - 1
                cur[0].cnt = 0
                for k in range(prev[0].cnt):
                    ins = _apply_into(mi, prev[0].data + k * stride, &cur[0],
                                      &kind[0], &target[0], &pred_off[0], &pred_len[0],
                                      &rhs_off[0], &rhs_len[0],
                                      p_ops, p_args, p_lits, p_pool, p_soff, p_slen,
                                      K, stride, tmp, dead_state, vstack, nstack)
                    if ins < 0:
                        status = S_OVERFLOW if ins == -2 else S_EXPLOSION
                        break
                    total += ins
                for j in range(1, n_cells):
                    if status != S_OK:
                        break
                    cur[j].cnt = 0
                    for k in range(prev[j].cnt):
                        ins = _apply_into(mi, prev[j].data + k * stride, &cur[j],
                                          &kind[0], &target[0], &pred_off[0], &pred_len[0],
                                          &rhs_off[0], &rhs_len[0],
                                          p_ops, p_args, p_lits, p_pool, p_soff, p_slen,
                                          K, stride, tmp, dead_state, vstack, nstack)
                        if ins < 0:
                            status = S_OVERFLOW if ins == -2 else S_EXPLOSION
                            break
                        total += ins
                    if status != S_OK:
                        break
                    for k in range(cur[j - 1].cnt):
                        ins = _apply_into(m1 + j - 1, cur[j - 1].data + k * stride, &cur[j],
                                          &kind[0], &target[0], &pred_off[0], &pred_len[0],
                                          &rhs_off[0], &rhs_len[0],
                                          p_ops, p_args, p_lits, p_pool, p_soff, p_slen,
                                          K, stride, tmp, dead_state, vstack, nstack)
                        if ins < 0:
                            status = S_OVERFLOW if ins == -2 else S_EXPLOSION
                            break
                        total += ins
                if total > threshold:
                    status = S_EXPLOSION
                if status != S_OK:
                    break
                swp = prev
                prev = cur
                cur = swp
                i += 1
            if status != S_OK:
                break
            out[ri] = 1 if prev[m2].cnt > 1 else 0

    for j in range(n_cells):
        free(bank_a[j].data)
        free(bank_b[j].data)
    free(bank_a); free(bank_b); free(tmp); free(dead_state); free(vstack); free(nstack)
    return status


cdef int _apply_into(int mi, const i64* src, Cell* dst,
                     const i32* kind, const i32* target,
                     const i32* pred_off, const i32* pred_len,
                     const i32* rhs_off, const i32* rhs_len,
                     const i32* ops, const i32* args,
                     const i64* lits, const i64* pool, const i32* soff, const i32* slen,
                     int K, int stride, i64* tmp, const i64* dead_state,
                     i64* vstack, u8* nstack) noexcept nogil:
    """Apply modification mi to one state and insert the image into dst.

    Returns number of states appended (0/1), -1 on OOM, -2 on overflow.
    """
    cdef i64 fv
    cdef u8 fn
    cdef int ins
    cdef int tgt
    if (src[K] & DEAD_BIT) or kind[mi] == 2:
        ins = _cell_insert(dst, src, stride)
        return -1 if ins < 0 else ins
    if _eval(ops + pred_off[mi], args + pred_off[mi], pred_len[mi],
             lits, pool, soff, slen, NULL, NULL, 0, src, K,
             vstack, nstack, &fv, &fn) != S_OK:
        return -2
    if not fv:
        ins = _cell_insert(dst, src, stride)
        return -1 if ins < 0 else ins
    if kind[mi] == 1:
        ins = _cell_insert(dst, dead_state, stride)
        return -1 if ins < 0 else ins
    # update: evaluate rhs on the pre-state, then write the target slot
    if _eval(ops + rhs_off[mi], args + rhs_off[mi], rhs_len[mi],
             lits, pool, soff, slen, NULL, NULL, 0, src, K,
             vstack, nstack, &fv, &fn) != S_OK:
        return -2
    memcpy(tmp, src, stride * sizeof(i64))
    tgt = target[mi]
    if fn:
        tmp[tgt] = 0
        tmp[K] = tmp[K] | ((<i64>1) << tgt)
    else:
        tmp[tgt] = fv
        tmp[K] = tmp[K] & ~((<i64>1) << tgt)
    ins = _cell_insert(dst, tmp, stride)
    return -1 if ins < 0 else ins
