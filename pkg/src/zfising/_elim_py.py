"""Pure-Python 2x2-block elimination, the fallback for ``_elim``.

Same inputs, outputs and arithmetic order as the compiled kernel.
"""

from __future__ import annotations

import math
from bisect import bisect_left

import numpy as np


def symbolic(npairs, ntail, colptr, rowidx):
    ts = npairs - ntail
    kids: list[list[int]] = [[] for _ in range(max(ts, 0))]
    cols: list[list[int]] = []
    ptr = [0]
    rows_all: list[int] = []
    for i in range(ts):
        s = set(int(j) for j in rowidx[colptr[i]:colptr[i + 1]])
        for c in kids[i]:
            s.update(cols[c])
        s.discard(i)
        col = sorted(s)
        cols.append(col)
        rows_all.extend(col)
        ptr.append(len(rows_all))
        if col and col[0] < ts:
            kids[col[0]].append(i)
    return np.asarray(ptr, dtype=np.int64), np.asarray(rows_all, dtype=np.int64)


def factor(npairs, ntail, colptr, rowidx, vals, diag, pivot_rtol):
    ts = npairs - ntail
    lptr, lrows = symbolic(npairs, ntail, colptr, rowidx)
    lp = lptr.tolist()
    rows = lrows.tolist()
    L = [[0.0, 0.0, 0.0, 0.0] for _ in range(len(rows))]
    D = [list(map(float, diag[i])) for i in range(npairs)]
    nt2 = 2 * ntail
    T = np.zeros((nt2, nt2))
    for i in range(npairs):
        for q in range(colptr[i], colptr[i + 1]):
            j = int(rowidx[q])
            v = vals[q]
            if i < ts:
                pos = bisect_left(rows, j, lp[i], lp[i + 1])
                for k in range(4):
                    L[pos][k] += float(v[k])
            else:
                tj, tk = 2 * (j - ts), 2 * (i - ts)
                T[tj:tj + 2, tk:tk + 2] += np.asarray(v).reshape(2, 2)
    for i in range(ts, npairs):
        tk = 2 * (i - ts)
        T[tk:tk + 2, tk:tk + 2] += np.asarray(D[i]).reshape(2, 2)

    logabs = 0.0
    for i in range(ts):
        a = 0.5 * (D[i][1] - D[i][2])
        a0, a1 = lp[i], lp[i + 1]
        scale = abs(a)
        for q in range(a0, a1):
            scale = max(scale, max(abs(x) for x in L[q]))
        det = a * a
        if not (det > pivot_rtol * scale * scale) or scale == 0.0:
            return logabs, 1, i, None
        logabs += math.log(det)
        M = [(Lq[1] / a, -Lq[0] / a, Lq[3] / a, -Lq[2] / a) for Lq in L[a0:a1]]
        for kk in range(a1 - a0):
            k = rows[a0 + kk]
            l00, l01, l10, l11 = L[a0 + kk]
            lo = lp[k] if k < ts else 0
            for jj in range(kk, a1 - a0):
                j = rows[a0 + jj]
                m00, m01, m10, m11 = M[jj]
                u00 = m00 * l00 + m01 * l01
                u01 = m00 * l10 + m01 * l11
                u10 = m10 * l00 + m11 * l01
                u11 = m10 * l10 + m11 * l11
                if k >= ts:
                    tj, tk = 2 * (j - ts), 2 * (k - ts)
                    T[tj, tk] += u00
                    T[tj, tk + 1] += u01
                    T[tj + 1, tk] += u10
                    T[tj + 1, tk + 1] += u11
                elif j == k:
                    Dk = D[k]
                    Dk[0] += u00
                    Dk[1] += u01
                    Dk[2] += u10
                    Dk[3] += u11
                else:
                    pos = bisect_left(rows, j, lo, lp[k + 1])
                    lo = pos + 1
                    Lp = L[pos]
                    Lp[0] += u00
                    Lp[1] += u01
                    Lp[2] += u10
                    Lp[3] += u11
    for tj in range(0, nt2, 2):
        a = 0.5 * (T[tj, tj + 1] - T[tj + 1, tj])
        T[tj, tj] = T[tj + 1, tj + 1] = 0.0
        T[tj, tj + 1] = a
        T[tj + 1, tj] = -a
        for tk in range(0, tj, 2):
            T[tk:tk + 2, tj:tj + 2] = -T[tj:tj + 2, tk:tk + 2].T
    return logabs, 0, -1, T
