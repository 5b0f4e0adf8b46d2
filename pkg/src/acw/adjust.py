"""Three-tier adjustment checker: plain, covariant, strict.

Plain: the basic curvature vanishes.  Covariant: additionally the curvature
of the connection is trivialized by the 2-form, R + nabla^bas(zeta) = 0.
Strict: the fully antisymmetrized cubic identity on zeta holds; it is also
computed a second way through the shifted connection nabla^zeta as an exact
cross-check (the two residuals agree with factor 1, and equal 6 times the
cubic coefficient of the Weil differential).
"""

from dataclasses import dataclass, field
from fractions import Fraction

from .algebroid import derived_tensors
from .coeff import ExprError, ScalarExpr, differentiate, is_zero

__all__ = [
    "AdjustmentVerdict",
    "check_plain",
    "check_covariant",
    "check_strict",
    "nabla_zeta_crosscheck",
]

TIERS = ("none", "plain", "covariant", "strict")


@dataclass
class AdjustmentVerdict:
    tier: str
    residuals: dict = field(default_factory=dict)  # condition -> [(indices, expr, verdict)]
    confidence: str = "exact"

    def reaches(self, tier):
        return TIERS.index(self.tier) >= TIERS.index(tier)

    def worst(self, condition):
        entries = self.residuals.get(condition, [])
        bad = [(i, e, v) for i, e, v in entries if not v.is_zero()]
        return bad


def _classify(table, seed):
    """Zero-test a list of (indices, expr); returns entries, all_zero, confidence."""
    entries = []
    all_zero = True
    confidence = "exact"
    for idx, e in table:
        v = is_zero(e, seed=seed)
        entries.append((idx, e, v))
        if not v.is_zero():
            all_zero = False
        if v.confidence == "numeric":
            confidence = "numeric"
    return entries, all_zero, confidence


def _plain_table(spec, tens):
    n, r = spec.dim, spec.rank
    out = []
    for al in range(r):
        for be in range(r):
            for ga in range(be + 1, r):
                for a in range(n):
                    out.append(((al, be, ga, a), tens.r_bas[al][be][ga][a]))
    if not out:  # rank < 2 or dim 0: vacuous
        for al in range(r):
            for be in range(r):
                for ga in range(r):
                    for a in range(n):
                        out.append(((al, be, ga, a), tens.r_bas[al][be][ga][a]))
    return out


def _covariant_table(spec, tens):
    n, r = spec.dim, spec.rank
    out = []
    for al in range(r):
        for a in range(n):
            for b in range(a + 1, n):
                for be in range(r):
                    out.append(
                        ((al, a, b, be),
                         tens.r_nabla[al][a][b][be] + tens.nabla_bas_zeta[al][a][b][be])
                    )
    return out


def strict_residual(spec, adj, tens=None):
    """Antisymmetrized cubic residual, definition normalization.

    Returns [(indices, expr)] over alpha and a < b < c.  Internally asserts
    the factor-6 agreement with the cubic coefficient of the Weil
    differential's normalization.
    """
    if tens is None:
        tens = derived_tensors(spec, adj)
    n, r = spec.dim, spec.rank
    ttr, ze = spec.ttr, adj.ze

    def zrz(al, a, b, c):
        e = ScalarExpr.const(spec.base, 0)
        for dd in range(n):
            for be in range(r):
                e = e + ze(al, a, dd) * ttr(dd, be) * ze(be, b, c)
        return e

    perms = [((0, 1, 2), 1), ((1, 2, 0), 1), ((2, 0, 1), 1),
             ((0, 2, 1), -1), ((1, 0, 2), -1), ((2, 1, 0), -1)]

    def antisym(fn, a, b, c):
        idx = (a, b, c)
        e = ScalarExpr.const(spec.base, 0)
        for p, s in perms:
            t = fn(idx[p[0]], idx[p[1]], idx[p[2]])
            e = e + (t if s > 0 else -t)
        return e * Fraction(1, 6)

    out = []
    for al in range(r):
        for a in range(n):
            for b in range(a + 1, n):
                for c in range(b + 1, n):
                    dnz = tens.d_nabla_zeta[al][a][b][c]  # already antisymmetric
                    res = dnz - 3 * antisym(lambda x, y, z: zrz(al, x, y, z), a, b, c)
                    weil_cubic = dnz * Fraction(1, 6) - antisym(
                        lambda x, y, z: zrz(al, x, y, z), a, b, c
                    ) * Fraction(1, 2)
                    if not (res - 6 * weil_cubic).is_exact_zero():
                        raise ExprError(
                            "strictness normalizations disagree beyond the fixed factor"
                        )
                    out.append(((al, a, b, c), res))
    return out


def check_plain(spec, adj, seed=0):
    tens = derived_tensors(spec, adj)
    entries, ok, conf = _classify(_plain_table(spec, tens), seed)
    return AdjustmentVerdict("plain" if ok else "none", {"r_bas": entries}, conf)


def check_covariant(spec, adj, seed=0):
    tens = derived_tensors(spec, adj)
    p_entries, p_ok, p_conf = _classify(_plain_table(spec, tens), seed)
    c_entries, c_ok, c_conf = _classify(_covariant_table(spec, tens), seed)
    tier = "covariant" if (p_ok and c_ok) else ("plain" if p_ok else "none")
    conf = "numeric" if "numeric" in (p_conf, c_conf) else "exact"
    return AdjustmentVerdict(tier, {"r_bas": p_entries, "covariant": c_entries}, conf)


def check_strict(spec, adj, seed=0):
    tens = derived_tensors(spec, adj)
    p_entries, p_ok, p_conf = _classify(_plain_table(spec, tens), seed)
    c_entries, c_ok, c_conf = _classify(_covariant_table(spec, tens), seed)
    s_entries, s_ok, s_conf = _classify(strict_residual(spec, adj, tens), seed)
    if p_ok and c_ok and s_ok:
        tier = "strict"
    elif p_ok and c_ok:
        tier = "covariant"
    elif p_ok:
        tier = "plain"
    else:
        tier = "none"
    conf = "numeric" if "numeric" in (p_conf, c_conf, s_conf) else "exact"
    return AdjustmentVerdict(
        tier,
        {"r_bas": p_entries, "covariant": c_entries, "strict": s_entries},
        conf,
    )


def nabla_zeta_crosscheck(spec, adj, seed=0):
    """Strictness residual through the shifted connection; asserts exact
    agreement with the definition-normalization residual (factor 1)."""
    tens = derived_tensors(spec, adj)
    n, r = spec.dim, spec.rank
    coords = spec.base.coords
    ze = adj.ze
    nz = tens.nabla_zeta  # shifted connection coefficients

    out = []
    direct = dict((idx, e) for idx, e in strict_residual(spec, adj, tens))
    for al in range(r):
        for a in range(n):
            for b in range(a + 1, n):
                for c in range(b + 1, n):
                    e = (
                        differentiate(ze(al, b, c), coords[a])
                        + differentiate(ze(al, c, a), coords[b])
                        + differentiate(ze(al, a, b), coords[c])
                    )
                    for be in range(r):
                        e = (
                            e
                            + nz[al][a][be] * ze(be, b, c)
                            + nz[al][b][be] * ze(be, c, a)
                            + nz[al][c][be] * ze(be, a, b)
                        )
                    if not (e - direct[(al, a, b, c)]).is_exact_zero():
                        raise ExprError(
                            "nabla^zeta reformulation disagrees with the direct residual"
                        )
                    out.append(((al, a, b, c), e, is_zero(e, seed=seed)))
    return out
