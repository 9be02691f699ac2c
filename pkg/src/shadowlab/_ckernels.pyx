# distutils: language = c++
"""Compiled twins of the ``_pykernels`` loops (int64 arithmetic).

Callers guarantee that every intermediate fits in 62 bits; ``kernels.py``
checks the bounds before dispatching here.
"""

from libc.stdint cimport int64_t
from libcpp.unordered_map cimport unordered_map
from libcpp.vector cimport vector
from cython.operator cimport dereference as deref

from ._kernel_errors import KernelCapError


def bs_ball(long long n, list gens, int scale, int radius, long long cap):
    cdef int ngens = len(gens)
    cdef vector[int64_t] tg, mult, div
    cdef vector[int] mg
    cdef int64_t t, t2, key, width, off
    cdef int m, m2, r, k, mabs = 0
    cdef size_t i, start, stop, j
    cdef vector[int64_t] ts
    cdef vector[int] ms, norms, parents, labels
    cdef unordered_map[int64_t, size_t] where
    cdef unordered_map[int64_t, size_t].iterator it

    for T, M in gens:
        tg.push_back(T)
        mg.push_back(M)
        if M >= 0:
            mult.push_back(n ** M)
            div.push_back(0)
        else:
            mult.push_back(0)
            div.push_back(n ** (-M))
        mabs = max(mabs, abs(M))
    off = radius * mabs
    width = 2 * off + 1

    ts.push_back(0)
    ms.push_back(0)
    norms.push_back(0)
    parents.push_back(-1)
    labels.push_back(-1)
    where[off] = 0
    start = 0
    stop = 1
    for r in range(1, radius + 1):
        for i in range(start, stop):
            t = ts[i]
            m = ms[i]
            for k in range(ngens):
                if div[k]:
                    if t % div[k] != 0:
                        raise ArithmeticError("scaled BS coordinate not divisible; scale too small")
                    t2 = tg[k] + t // div[k]
                else:
                    t2 = tg[k] + mult[k] * t
                m2 = m + mg[k]
                key = t2 * width + (m2 + off)
                it = where.find(key)
                if it == where.end():
                    where[key] = ts.size()
                    ts.push_back(t2)
                    ms.push_back(m2)
                    norms.push_back(r)
                    parents.push_back(<int>i)
                    labels.push_back(k)
                else:
                    j = deref(it).second
                    if norms[j] == r and k < labels[j]:
                        parents[j] = <int>i
                        labels[j] = k
        if <long long>ts.size() > cap:
            raise KernelCapError(f"ball of radius {r} exceeds cap {cap}")
        start = stop
        stop = ts.size()
        if start == stop:
            break
    return list(ts), list(ms), list(norms), list(parents), list(labels)


def grid_scan(a, b, c, long long ni, long long nj):
    cdef vector[int64_t] va = a, vb = b, vc = c
    cdef size_t nk = va.size(), k
    cdef long long i, j
    cdef bint ok
    for i in range(ni):
        for j in range(nj):
            ok = True
            for k in range(nk):
                if va[k] * i + vb[k] * j > vc[k]:
                    ok = False
                    break
            if ok:
                return i, j
    return None
