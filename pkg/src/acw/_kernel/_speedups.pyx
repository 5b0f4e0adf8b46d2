# cython: language_level=3, boundscheck=False, wraparound=False
"""Compiled twin of the pure-Python polynomial kernel.

Same data model: dict {monomial: Fraction}, monomial = sorted tuple of
(atom_id, exponent) pairs.  Coefficients stay Python Fractions; the win
is in the C-level loops and tuple merging of the hot inner products.
"""

from fractions import Fraction

BACKEND = "cython"

cdef object _ONE = Fraction(1)


cpdef tuple mono_mul(tuple m1, tuple m2):
    cdef Py_ssize_t i = 0, j = 0, n1 = len(m1), n2 = len(m2)
    cdef long a1, a2
    if n1 == 0:
        return m2
    if n2 == 0:
        return m1
    out = []
    while i < n1 and j < n2:
        p1 = <tuple> m1[i]
        p2 = <tuple> m2[j]
        a1 = <long> p1[0]
        a2 = <long> p2[0]
        if a1 == a2:
            out.append((p1[0], p1[1] + p2[1]))
            i += 1
            j += 1
        elif a1 < a2:
            out.append(p1)
            i += 1
        else:
            out.append(p2)
            j += 1
    while i < n1:
        out.append(m1[i])
        i += 1
    while j < n2:
        out.append(m2[j])
        j += 1
    return tuple(out)


cpdef dict poly_add(dict p, dict q):
    cdef dict out
    if not q:
        return dict(p)
    if not p:
        return dict(q)
    out = dict(p)
    for m, c in q.items():
        acc = out.get(m)
        if acc is None:
            out[m] = c
        else:
            acc = acc + c
            if acc:
                out[m] = acc
            else:
                del out[m]
    return out


cpdef dict poly_sub(dict p, dict q):
    cdef dict out
    if not q:
        return dict(p)
    out = dict(p)
    for m, c in q.items():
        acc = out.get(m)
        if acc is None:
            out[m] = -c
        else:
            acc = acc - c
            if acc:
                out[m] = acc
            else:
                del out[m]
    return out


cpdef dict poly_neg(dict p):
    cdef dict out = {}
    for m, c in p.items():
        out[m] = -c
    return out


cpdef dict poly_scale(dict p, c):
    cdef dict out = {}
    if not c:
        return out
    for m, k in p.items():
        out[m] = k * c
    return out


cpdef dict poly_mul(dict p, dict q):
    cdef dict out = {}
    if not p or not q:
        return out
    if len(p) > len(q):
        p, q = q, p
    for m1, c1 in p.items():
        for m2, c2 in q.items():
            m = mono_mul(<tuple> m1, <tuple> m2)
            acc = out.get(m)
            if acc is None:
                out[m] = c1 * c2
            else:
                acc = acc + c1 * c2
                if acc:
                    out[m] = acc
                else:
                    del out[m]
    return out


cpdef dict poly_pow(dict p, long n):
    if n < 0:
        raise ValueError("negative exponent in poly_pow")
    cdef dict result = {(): _ONE}
    cdef dict base = p
    while n:
        if n & 1:
            result = poly_mul(result, base)
        n >>= 1
        if n:
            base = poly_mul(base, base)
    return result
