# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled 2x2-block elimination of skew-symmetric sparse matrices.

See ``_elim_py.py`` for the reference implementation with identical
semantics; both are exercised by the test-suite and compared in
``benchmarks/bench_kernels.py``.
"""

import numpy as np
cimport numpy as cnp
from libc.math cimport fabs, log
from libcpp.vector cimport vector
from libcpp.algorithm cimport sort

cnp.import_array()

ctypedef long long i64


cdef inline i64 _find(const i64* rows, i64 lo, i64 hi, i64 key) noexcept nogil:
    cdef i64 mid
    while lo < hi:
        mid = (lo + hi) >> 1
        if rows[mid] < key:
            lo = mid + 1
        else:
            hi = mid
    return lo


def symbolic(i64 npairs, i64 ntail, const i64[::1] colptr, const i64[::1] rowidx):
    """Column structures of the block factor for columns before the tail.

    Returns ``(lptr, lrows)``: rows of column ``i`` are
    ``lrows[lptr[i]:lptr[i+1]]`` in increasing order.
    """
    cdef i64 ts = npairs - ntail
    cdef vector[i64] rows
    cdef vector[i64] ptr
    cdef vector[vector[i64]] kids
    cdef vector[i64] mark
    cdef i64 i, j, k, c, p, start, q
    kids.resize(ts if ts > 0 else 0)
    mark.assign(npairs, -1)
    ptr.push_back(0)
    for i in range(ts):
        start = rows.size()
        mark[i] = i
        for k in range(colptr[i], colptr[i + 1]):
            j = rowidx[k]
            if mark[j] != i:
                mark[j] = i
                rows.push_back(j)
        for q in range(<i64>kids[i].size()):
            c = kids[i][q]
            for k in range(ptr[c], ptr[c + 1]):
                j = rows[k]
                if mark[j] != i:
                    mark[j] = i
                    rows.push_back(j)
        sort(rows.begin() + start, rows.end())
        ptr.push_back(rows.size())
        if <i64>rows.size() > start:
            p = rows[start]
            if p < ts:
                kids[p].push_back(i)
    lptr = np.empty(ptr.size(), dtype=np.int64)
    lrows = np.empty(rows.size(), dtype=np.int64)
    cdef i64[::1] lp = lptr
    cdef i64[::1] lr = lrows
    for i in range(<i64>ptr.size()):
        lp[i] = ptr[i]
    for i in range(<i64>rows.size()):
        lr[i] = rows[i]
    return lptr, lrows


def factor(i64 npairs, i64 ntail,
           const i64[::1] colptr, const i64[::1] rowidx, const double[:, ::1] vals,
           const double[:, ::1] diag, double pivot_rtol):
    """Eliminate all columns before the tail.

    ``vals[k]`` is the 2x2 block (row-major) at row ``rowidx[k] > i`` of column
    ``i``; ``diag[i]`` the diagonal block.  Returns
    ``(log_abs_det, status, bad_column, tail)`` where ``tail`` is the dense
    skew Schur complement on the last ``ntail`` block rows/columns.
    """
    cdef i64 ts = npairs - ntail
    lptr, lrows = symbolic(npairs, ntail, colptr, rowidx)
    cdef i64[::1] lp = lptr
    cdef i64[::1] lr = lrows
    cdef i64 nnz = lr.shape[0]
    L_arr = np.zeros((nnz, 4), dtype=np.float64)
    D_arr = np.array(diag, dtype=np.float64, copy=True).reshape(npairs, 4)
    T_arr = np.zeros((2 * ntail, 2 * ntail), dtype=np.float64)
    cdef double[:, ::1] L = L_arr
    cdef double[:, ::1] D = D_arr
    cdef double[:, ::1] T = T_arr
    cdef i64 i, j, k, q, pos, jj, kk, a0, a1, tj, tk, lo
    cdef double a, det, scale, x, logabs = 0.0
    cdef double m00, m01, m10, m11, l00, l01, l10, l11
    cdef double u00, u01, u10, u11
    cdef const i64* rp = &lr[0] if nnz > 0 else NULL
    cdef vector[double] M
    cdef i64 bad = -1

    # scatter the input
    for i in range(npairs):
        for q in range(colptr[i], colptr[i + 1]):
            j = rowidx[q]
            if i < ts:
                pos = _find(rp, lp[i], lp[i + 1], j)
                for k in range(4):
                    L[pos, k] += vals[q, k]
            else:
                tj = 2 * (j - ts)
                tk = 2 * (i - ts)
                T[tj, tk] += vals[q, 0]
                T[tj, tk + 1] += vals[q, 1]
                T[tj + 1, tk] += vals[q, 2]
                T[tj + 1, tk + 1] += vals[q, 3]
    for i in range(ts, npairs):
        tk = 2 * (i - ts)
        T[tk, tk] += D[i, 0]
        T[tk, tk + 1] += D[i, 1]
        T[tk + 1, tk] += D[i, 2]
        T[tk + 1, tk + 1] += D[i, 3]

    with nogil:
        for i in range(ts):
            a = 0.5 * (D[i, 1] - D[i, 2])
            scale = fabs(a)
            for q in range(lp[i], lp[i + 1]):
                for k in range(4):
                    x = fabs(L[q, k])
                    if x > scale:
                        scale = x
            det = a * a
            if not (det > pivot_rtol * scale * scale) or scale == 0.0:
                bad = i
                break
            logabs += log(det)
            a0 = lp[i]
            a1 = lp[i + 1]
            M.resize(4 * (a1 - a0))
            # P^{-1} = [[0, -1/a], [1/a, 0]]
            for jj in range(a1 - a0):
                q = a0 + jj
                M[4 * jj + 0] = L[q, 1] / a
                M[4 * jj + 1] = -L[q, 0] / a
                M[4 * jj + 2] = L[q, 3] / a
                M[4 * jj + 3] = -L[q, 2] / a
            for kk in range(a1 - a0):
                k = rp[a0 + kk]
                l00 = L[a0 + kk, 0]
                l01 = L[a0 + kk, 1]
                l10 = L[a0 + kk, 2]
                l11 = L[a0 + kk, 3]
                lo = lp[k] if k < ts else 0
                for jj in range(kk, a1 - a0):
                    j = rp[a0 + jj]
                    m00 = M[4 * jj]
                    m01 = M[4 * jj + 1]
                    m10 = M[4 * jj + 2]
                    m11 = M[4 * jj + 3]
                    u00 = m00 * l00 + m01 * l01
                    u01 = m00 * l10 + m01 * l11
                    u10 = m10 * l00 + m11 * l01
                    u11 = m10 * l10 + m11 * l11
                    if k >= ts:
                        tj = 2 * (j - ts)
                        tk = 2 * (k - ts)
                        T[tj, tk] += u00
                        T[tj, tk + 1] += u01
                        T[tj + 1, tk] += u10
                        T[tj + 1, tk + 1] += u11
                    elif j == k:
                        D[k, 0] += u00
                        D[k, 1] += u01
                        D[k, 2] += u10
                        D[k, 3] += u11
                    else:
                        pos = _find(rp, lo, lp[k + 1], j)
                        lo = pos + 1
                        L[pos, 0] += u00
                        L[pos, 1] += u01
                        L[pos, 2] += u10
                        L[pos, 3] += u11
    if bad != -1:
        return logabs, 1, bad, None
    # complete the skew tail from its lower block triangle
    cdef i64 nt2 = 2 * ntail
    for tj in range(0, nt2, 2):
        a = 0.5 * (T[tj, tj + 1] - T[tj + 1, tj])
        T[tj, tj] = 0.0
        T[tj + 1, tj + 1] = 0.0
        T[tj, tj + 1] = a
        T[tj + 1, tj] = -a
        for tk in range(0, tj, 2):
            T[tk, tj] = -T[tj, tk]
            T[tk, tj + 1] = -T[tj + 1, tk]
            T[tk + 1, tj] = -T[tj, tk + 1]
            T[tk + 1, tj + 1] = -T[tj + 1, tk + 1]
    return logabs, 0, -1, T_arr
