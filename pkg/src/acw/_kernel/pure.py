"""Pure-Python polynomial kernel.

A polynomial is a dict mapping monomials to nonzero Fraction coefficients.
A monomial is a tuple of (atom_id, exponent) pairs, sorted by atom_id,
with all exponents positive.  The empty tuple is the constant monomial.
"""

from fractions import Fraction

BACKEND = "pure"


def mono_mul(m1, m2):
    if not m1:
        return m2
    if not m2:
        return m1
    out = []
    i = j = 0
    n1, n2 = len(m1), len(m2)
    while i < n1 and j < n2:
        a1, e1 = m1[i]
        a2, e2 = m2[j]
        if a1 == a2:
            out.append((a1, e1 + e2))
            i += 1
            j += 1
        elif a1 < a2:
            out.append((a1, e1))
            i += 1
        else:
            out.append((a2, e2))
            j += 1
    out.extend(m1[i:])
    out.extend(m2[j:])
    return tuple(out)


def poly_add(p, q):
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


def poly_sub(p, q):
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


def poly_neg(p):
    return {m: -c for m, c in p.items()}


def poly_scale(p, c):
    if not c:
        return {}
    return {m: k * c for m, k in p.items()}


def poly_mul(p, q):
    if not p or not q:
        return {}
    if len(p) > len(q):
        p, q = q, p
    out = {}
    for m1, c1 in p.items():
        for m2, c2 in q.items():
            m = mono_mul(m1, m2)
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


def poly_pow(p, n):
    if n < 0:
        raise ValueError("negative exponent in poly_pow")
    result = {(): Fraction(1)}
    base = p
    while n:
        if n & 1:
            result = poly_mul(result, base)
        n >>= 1
        if n:
            base = poly_mul(base, base)
    return result
