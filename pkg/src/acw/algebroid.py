"""Lie algebroid presentations: CE differential, derived connection tensors,
and the split Weil algebra.

Index conventions: anchor[a][alpha] with a a base index and alpha a fiber
index; bracket[alpha][beta][gamma] antisymmetric in (beta, gamma);
omega[alpha][a][beta] with a the base direction; zeta[alpha][a][b]
antisymmetric in (a, b).

Several displayed terms of the split Weil differential reuse a bound index
that is already free; here every such contraction uses a fresh bound index,
the resolution being pinned by the nilpotency checks in the test suite.
"""

from dataclasses import dataclass
from fractions import Fraction

from .coeff import ChartSpec, ExprError, ScalarExpr, differentiate
from .gca import DerivationSpec, GeneratorSet, GradedElem, elem_verdict, normal_form

__all__ = [
    "AlgebroidSpec",
    "AdjustmentData",
    "DerivedTensors",
    "WeilAlgebra",
    "ValidationVerdict",
    "build_ce",
    "validate",
    "derived_tensors",
    "build_weil",
]

_HALF = Fraction(1, 2)


def _zero(chart):
    return ScalarExpr.const(chart, 0)


def _nested(shape, fill):
    if not shape:
        return fill()
    return tuple(_nested(shape[1:], fill) for _ in range(shape[0]))


@dataclass(frozen=True)
class AlgebroidSpec:
    base: ChartSpec
    rank: int
    anchor: tuple  # anchor[a][alpha]
    bracket: tuple  # bracket[alpha][beta][gamma]
    name: str = "algebroid"

    def __post_init__(self):
        n, r = self.base.dim, self.rank
        anchor = tuple(tuple(row) for row in self.anchor)
        bracket = tuple(tuple(tuple(col) for col in mat) for mat in self.bracket)
        object.__setattr__(self, "anchor", anchor)
        object.__setattr__(self, "bracket", bracket)
        if len(anchor) != n or any(len(row) != r for row in anchor):
            raise ExprError(f"anchor must be {n}x{r}")
        if len(bracket) != r or any(
            len(mat) != r or any(len(col) != r for col in mat) for mat in bracket
        ):
            raise ExprError(f"bracket must be {r}x{r}x{r}")
        for al in range(r):
            for be in range(r):
                for ga in range(r):
                    if not (bracket[al][be][ga] + bracket[al][ga][be]).is_exact_zero():
                        raise ExprError(
                            f"bracket not antisymmetric at ({al + 1},{be + 1},{ga + 1})"
                        )

    @property
    def dim(self):
        return self.base.dim

    def ttr(self, a, alpha):
        return self.anchor[a][alpha]

    def ttf(self, alpha, beta, gamma):
        return self.bracket[alpha][beta][gamma]


@dataclass(frozen=True)
class AdjustmentData:
    omega: tuple  # omega[alpha][a][beta]
    zeta: tuple  # zeta[alpha][a][b], antisymmetric in (a, b)

    @classmethod
    def zero(cls, spec):
        n, r = spec.dim, spec.rank
        z = _zero(spec.base)
        return cls(
            omega=_nested((r, n, r), lambda: z),
            zeta=_nested((r, n, n), lambda: z),
        )

    def __post_init__(self):
        omega = tuple(tuple(tuple(col) for col in mat) for mat in self.omega)
        zeta = tuple(tuple(tuple(col) for col in mat) for mat in self.zeta)
        object.__setattr__(self, "omega", omega)
        object.__setattr__(self, "zeta", zeta)
        n = len(zeta[0]) if zeta else 0
        for al in range(len(zeta)):
            for a in range(n):
                for b in range(n):
                    if not (zeta[al][a][b] + zeta[al][b][a]).is_exact_zero():
                        raise ExprError(f"zeta not antisymmetric at ({al + 1},{a + 1},{b + 1})")

    def om(self, alpha, a, beta):
        return self.omega[alpha][a][beta]

    def ze(self, alpha, a, b):
        return self.zeta[alpha][a][b]


def ce_generators(spec):
    return GeneratorSet(spec.base, tuple((f"xi{al + 1}", 1) for al in range(spec.rank)))


def build_ce(spec):
    """Chevalley-Eilenberg differential from anchor and bracket functions."""
    gens = ce_generators(spec)
    chart = spec.base
    coord_images = {}
    for a, c in enumerate(chart.coords):
        coord_images[c] = normal_form(
            gens, [((f"xi{al + 1}",), spec.ttr(a, al)) for al in range(spec.rank)]
        )
    gen_images = {}
    for al in range(spec.rank):
        terms = []
        for be in range(spec.rank):
            for ga in range(spec.rank):
                f = spec.ttf(al, be, ga)
                if not f.is_exact_zero():
                    terms.append(((f"xi{be + 1}", f"xi{ga + 1}"), f * Fraction(-1, 2)))
        gen_images[f"xi{al + 1}"] = normal_form(gens, terms)
    return DerivationSpec(gens, 1, coord_images, gen_images, name="d_CE")


@dataclass
class ValidationVerdict:
    ok: bool
    residuals: list  # (symbol, GradedElem, ZeroVerdict)
    confidence: str

    def failing(self):
        return [(s, e) for s, e, v in self.residuals if not v.is_zero()]


def validate(spec, seed=0):
    """Nilpotency of the CE differential: anchor morphism and Jacobi checks."""
    from .gca import square_check

    d = build_ce(spec)
    residuals = []
    ok = True
    confidence = "exact"
    for sym, elem in square_check(d):
        v = elem_verdict(elem, seed=seed)
        residuals.append((sym, elem, v))
        if not v.is_zero():
            ok = False
        if v.confidence == "numeric":
            confidence = "numeric"
    return ValidationVerdict(ok, residuals, confidence)


@dataclass
class DerivedTensors:
    """Connection tensors in components, all ScalarExpr.

    r_nabla[alpha][a][b][beta], r_bas[alpha][beta][gamma][a],
    nabla_bas_zeta[alpha][a][b][beta], d_nabla_zeta[alpha][a][b][c],
    nabla_zeta[alpha][a][beta].
    """

    r_nabla: tuple
    r_bas: tuple
    nabla_bas_zeta: tuple
    d_nabla_zeta: tuple
    nabla_zeta: tuple


def derived_tensors(spec, adj):
    n, r = spec.dim, spec.rank
    chart = spec.base
    coords = chart.coords
    om, ze, ttr, ttf = adj.om, adj.ze, spec.ttr, spec.ttf
    zero = _zero(chart)

    def d(e, a):
        return differentiate(e, coords[a])

    r_nabla = _nested((r, n, n, r), lambda: zero)
    r_nabla = [[[[None] * r for _ in range(n)] for _ in range(n)] for _ in range(r)]
    for al in range(r):
        for a in range(n):
            for b in range(n):
                for be in range(r):
                    e = d(om(al, b, be), a) - d(om(al, a, be), b)
                    for ga in range(r):
                        e = e + om(al, a, ga) * om(ga, b, be) - om(al, b, ga) * om(ga, a, be)
                    r_nabla[al][a][b][be] = e

    r_bas = [[[[None] * n for _ in range(r)] for _ in range(r)] for _ in range(r)]
    for al in range(r):
        for be in range(r):
            for ga in range(r):
                for a in range(n):
                    e = d(ttf(al, be, ga), a)
                    for de in range(r):
                        e = e + ttf(de, be, ga) * om(al, a, de)
                        e = e - (ttf(al, be, de) * om(de, a, ga) - ttf(al, ga, de) * om(de, a, be))
                    for b in range(n):
                        e = e + om(al, b, be) * d(ttr(b, ga), a) - om(al, b, ga) * d(ttr(b, be), a)
                        e = e + d(om(al, a, be), b) * ttr(b, ga) - d(om(al, a, ga), b) * ttr(b, be)
                        for de in range(r):
                            e = e - (
                                om(al, b, be) * om(de, a, ga) - om(al, b, ga) * om(de, a, be)
                            ) * ttr(b, de)
                    r_bas[al][be][ga][a] = e

    nbz = [[[[None] * r for _ in range(n)] for _ in range(n)] for _ in range(r)]
    for al in range(r):
        for a in range(n):
            for b in range(n):
                for be in range(r):
                    e = zero
                    for ga in range(r):
                        e = e + ttf(al, be, ga) * ze(ga, a, b)
                    for c in range(n):
                        e = e + ttr(c, be) * d(ze(al, a, b), c)
                        for ga in range(r):
                            e = e + om(al, c, be) * ttr(c, ga) * ze(ga, a, b)
                        cov_b = d(ttr(c, be), b)
                        cov_a = d(ttr(c, be), a)
                        for ga in range(r):
                            cov_b = cov_b - ttr(c, ga) * om(ga, b, be)
                            cov_a = cov_a - ttr(c, ga) * om(ga, a, be)
                        e = e + ze(al, a, c) * cov_b - ze(al, b, c) * cov_a
                    nbz[al][a][b][be] = e

    dnz = [[[[None] * n for _ in range(n)] for _ in range(n)] for _ in range(r)]
    for al in range(r):
        for a in range(n):
            for b in range(n):
                for c in range(n):
                    e = d(ze(al, b, c), a) + d(ze(al, c, a), b) + d(ze(al, a, b), c)
                    for be in range(r):
                        e = (
                            e
                            + om(al, a, be) * ze(be, b, c)
                            + om(al, b, be) * ze(be, c, a)
                            + om(al, c, be) * ze(be, a, b)
                        )
                    dnz[al][a][b][c] = e

    nz = [[[None] * r for _ in range(n)] for _ in range(r)]
    for al in range(r):
        for a in range(n):
            for be in range(r):
                e = om(al, a, be)
                for b in range(n):
                    e = e - ze(al, a, b) * ttr(b, be)
                nz[al][a][be] = e

    tup = lambda x: tuple(tup(v) for v in x) if isinstance(x, list) else x
    return DerivedTensors(tup(r_nabla), tup(r_bas), tup(nbz), tup(dnz), tup(nz))


def weil_generators(spec):
    names = [(f"xi{al + 1}", 1) for al in range(spec.rank)]
    names += [(f"bm{a + 1}", 1) for a in range(spec.dim)]
    names += [(f"bxi{al + 1}", 2) for al in range(spec.rank)]
    return GeneratorSet(spec.base, tuple(names))


@dataclass
class WeilAlgebra:
    gens: GeneratorSet
    diff: DerivationSpec
    spec: AlgebroidSpec
    adj: AdjustmentData
    tensors: DerivedTensors
    presentation: str  # "zeta" | "pre"

    @property
    def curvature_generators(self):
        """Generators selected by the projection onto T[1]M + g[2]."""
        return tuple(
            n for n, _ in self.gens.gens if n.startswith("bm") or n.startswith("bxi")
        )

    def connection_generators(self):
        return tuple(n for n, _ in self.gens.gens if n.startswith("xi"))


def build_weil(spec, adj=None, presentation="zeta"):
    """Split Weil differential for a connection and optional 2-form shift.

    presentation "pre" is the connection-split frame before the shift by the
    2-form (the 2-form is ignored there); "zeta" is the shifted frame and the
    default everywhere else in the package.
    """
    if adj is None:
        adj = AdjustmentData.zero(spec)
    if presentation not in ("zeta", "pre"):
        raise ExprError(f"unknown Weil presentation {presentation!r}")
    if presentation == "pre":
        n, r = spec.dim, spec.rank
        z = _zero(spec.base)
        adj = AdjustmentData(omega=adj.omega, zeta=_nested((r, n, n), lambda: z))

    n, r = spec.dim, spec.rank
    chart = spec.base
    coords = chart.coords
    gens = weil_generators(spec)
    om, ze, ttr, ttf = adj.om, adj.ze, spec.ttr, spec.ttf
    one = ScalarExpr.const(chart, 1)
    tens = derived_tensors(spec, adj)

    def xi(al):
        return f"xi{al + 1}"

    def bm(a):
        return f"bm{a + 1}"

    def bxi(al):
        return f"bxi{al + 1}"

    coord_images = {}
    for a, c in enumerate(coords):
        terms = [((bm(a),), one)]
        for al in range(r):
            terms.append(((xi(al),), ttr(a, al)))
        coord_images[c] = normal_form(gens, terms)

    gen_images = {}
    for al in range(r):
        terms = [((bxi(al),), one)]
        for be in range(r):
            for ga in range(r):
                terms.append(((xi(be), xi(ga)), ttf(al, be, ga) * Fraction(-1, 2)))
        for a in range(n):
            for be in range(r):
                terms.append(((bm(a), xi(be)), -om(al, a, be)))
            for b in range(n):
                terms.append(((bm(a), bm(b)), ze(al, a, b) * Fraction(-1, 2)))
        gen_images[xi(al)] = normal_form(gens, terms)

    for a in range(n):
        terms = []
        for al in range(r):
            terms.append(((bxi(al),), -ttr(a, al)))
            for b in range(n):
                for be in range(r):
                    terms.append(((bm(b), xi(be)), ttr(a, al) * om(al, b, be)))
                for c in range(n):
                    terms.append(((bm(b), bm(c)), ttr(a, al) * ze(al, b, c) * _HALF))
            for b in range(n):
                terms.append(((xi(al), bm(b)), differentiate(ttr(a, al), coords[b])))
        gen_images[bm(a)] = normal_form(gens, terms)

    for al in range(r):
        terms = []
        for be in range(r):
            for ga in range(r):
                coeff = ttf(al, be, ga)
                for a in range(n):
                    coeff = coeff + ttr(a, ga) * om(al, a, be)
                terms.append(((xi(be), bxi(ga)), -coeff))
        for a in range(n):
            for be in range(r):
                terms.append(((bm(a), bxi(be)), -tens.nabla_zeta[al][a][be]))
        for be in range(r):
            for ga in range(r):
                for a in range(n):
                    terms.append(
                        ((xi(be), xi(ga), bm(a)), tens.r_bas[al][be][ga][a] * _HALF)
                    )
        for a in range(n):
            for b in range(n):
                for c in range(n):
                    coeff = tens.d_nabla_zeta[al][a][b][c] * Fraction(1, 6)
                    for de in range(r):
                        for dd in range(n):
                            coeff = coeff - (
                                ze(al, a, dd) * ttr(dd, de) * ze(de, b, c) * _HALF
                            )
                    terms.append(((bm(a), bm(b), bm(c)), coeff))
                for be in range(r):
                    terms.append(
                        (
                            (bm(a), bm(b), xi(be)),
                            (tens.r_nabla[al][a][b][be] + tens.nabla_bas_zeta[al][a][b][be])
                            * _HALF,
                        )
                    )
        gen_images[bxi(al)] = normal_form(gens, terms)

    diff = DerivationSpec(gens, 1, coord_images, gen_images, name="d_W")
    return WeilAlgebra(gens, diff, spec, adj, tens, presentation)


def ce_projection(weil):
    """Induced derivation after setting the bm and bxi generators to zero."""
    spec = weil.spec
    ce_gens = ce_generators(spec)
    drop = weil.curvature_generators
    mapping = {weil.gens.index(f"xi{al + 1}"): al for al in range(spec.rank)}

    def convert(elem):
        out = {}
        for m, c in elem.restrict(drop).terms.items():
            out[tuple(mapping[i] for i in m)] = c
        return GradedElem(ce_gens, out)

    coord_images = {c: convert(weil.diff.coord_image(c)) for c in spec.base.coords}
    gen_images = {
        f"xi{al + 1}": convert(weil.diff.gen_image(f"xi{al + 1}")) for al in range(spec.rank)
    }
    return DerivationSpec(ce_gens, 1, coord_images, gen_images, name="d_CE|proj")
