"""Pure-Python kernels; the reference behaviour for ``_ckernels``."""

from __future__ import annotations

from ._kernel_errors import KernelCapError


def bs_ball(n, gens, scale, radius, cap):
    """BFS over BS(1,n) with ``t`` stored as the integer ``t * n**scale``.

    ``gens`` lists ``(T_s, m_s)`` with ``T_s`` already scaled.  Left
    multiplication is ``(T, m) -> (T_s + n**m_s * T, m_s + m)``.  Returns five
    lists in discovery order: scaled ``t``, ``m``, norm, parent index, generator
    index.  Ties between parents are resolved towards the lowest generator index.
    """
    ts = [0]
    ms = [0]
    norms = [0]
    parents = [-1]
    labels = [-1]
    where = {(0, 0): 0}
    steps = []
    for tg, mg in gens:
        if mg >= 0:
            steps.append((tg, mg, n**mg, 0))
        else:
            steps.append((tg, mg, 0, n**-mg))
    start, stop = 0, 1
    for r in range(1, radius + 1):
        for i in range(start, stop):
            t = ts[i]
            m = ms[i]
            for k, (tg, mg, mult, div) in enumerate(steps):
                if div:
                    q, rem = divmod(t, div)
                    if rem:
                        raise ArithmeticError("scaled BS coordinate not divisible; scale too small")
                    t2 = tg + q
                else:
                    t2 = tg + mult * t
                key = (t2, m + mg)
                j = where.get(key)
                if j is None:
                    where[key] = len(ts)
                    ts.append(t2)
                    ms.append(m + mg)
                    norms.append(r)
                    parents.append(i)
                    labels.append(k)
                elif norms[j] == r and k < labels[j]:
                    parents[j] = i
                    labels[j] = k
        if len(ts) > cap:
            raise KernelCapError(f"ball of radius {r} exceeds cap {cap}")
        start, stop = stop, len(ts)
        if start == stop:
            break
    return ts, ms, norms, parents, labels


def grid_scan(a, b, c, ni, nj):
    """First ``(i, j)`` in row-major order with ``a[k]*i + b[k]*j <= c[k]`` for all k."""
    rows = list(zip(a, b, c))
    for i in range(ni):
        for j in range(nj):
            for ak, bk, ck in rows:
                if ak * i + bk * j > ck:
                    break
            else:
                return i, j
    return None
