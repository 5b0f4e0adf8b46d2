"""Free graded-commutative algebra over scalar coefficients.

Elements are normal-form sums of generator monomials with ScalarExpr
coefficients; the Koszul sign of every reordering is absorbed into the
coefficient, with monomials kept sorted in declaration order.  Graded
derivations act through the Leibniz rule on generators and through the
chain rule on coefficients.
"""

from dataclasses import dataclass, field
from fractions import Fraction

from .coeff import (
    ChartSpec,
    ExprError,
    ScalarExpr,
    atom_partial,
    describe_atom,
    differentiate,
    func_argument,
    is_zero,
)

__all__ = [
    "GeneratorSet",
    "GradedElem",
    "DerivationSpec",
    "normal_form",
    "apply_derivation",
    "square_check",
]


class GradingError(ExprError):
    pass


@dataclass(frozen=True)
class GeneratorSet:
    chart: ChartSpec
    gens: tuple  # ((name, degree), ...)
    bidegrees: tuple | None = None  # optional ((form, ghost), ...) metadata

    def __post_init__(self):
        object.__setattr__(self, "gens", tuple((n, int(d)) for n, d in self.gens))
        names = [n for n, _ in self.gens]
        if len(set(names)) != len(names):
            raise ValueError("duplicate generator names")
        if set(names) & set(self.chart.coords):
            raise ValueError("generator names collide with chart coordinates")
        for n, d in self.gens:
            if d < 1:
                raise ValueError(f"generator {n!r} must have degree >= 1")
        if self.bidegrees is not None:
            object.__setattr__(self, "bidegrees", tuple(map(tuple, self.bidegrees)))
            if len(self.bidegrees) != len(self.gens):
                raise ValueError("bidegree metadata length mismatch")
            for (n, d), (f, g) in zip(self.gens, self.bidegrees):
                if f + g != d:
                    raise ValueError(f"bidegree of {n!r} does not sum to its degree")

    def index(self, name):
        for i, (n, _) in enumerate(self.gens):
            if n == name:
                return i
        raise KeyError(name)

    def name(self, i):
        return self.gens[i][0]

    def degree(self, i):
        return self.gens[i][1]

    @property
    def names(self):
        return tuple(n for n, _ in self.gens)


def _sort_word(word, degrees):
    """Sort generator indices, tracking the Koszul sign. None if an odd square."""
    lst = list(word)
    sign = 1
    for i in range(1, len(lst)):
        j = i
        while j > 0 and lst[j - 1] > lst[j]:
            if degrees[lst[j - 1]] & 1 and degrees[lst[j]] & 1:
                sign = -sign
            lst[j - 1], lst[j] = lst[j], lst[j - 1]
            j -= 1
    for k in range(len(lst) - 1):
        if lst[k] == lst[k + 1] and degrees[lst[k]] & 1:
            return None, 0
    return tuple(lst), sign


class GradedElem:
    __slots__ = ("gens", "terms")

    def __init__(self, gens, terms=None):
        self.gens = gens
        self.terms = {}
        if terms:
            for m, c in terms.items():
                if not c.is_exact_zero():
                    self.terms[m] = c

    # -- constructors ------------------------------------------------------

    @classmethod
    def zero(cls, gens):
        return cls(gens)

    @classmethod
    def scalar(cls, gens, value):
        if not isinstance(value, ScalarExpr):
            value = ScalarExpr.const(gens.chart, value)
        return cls(gens, {(): value})

    @classmethod
    def generator(cls, gens, name, coeff=None):
        i = gens.index(name)
        c = coeff if coeff is not None else ScalarExpr.const(gens.chart, 1)
        return cls(gens, {(i,): c})

    # -- structure ---------------------------------------------------------

    def is_exact_zero(self):
        return not self.terms

    def mono_degree(self, mono):
        return sum(self.gens.degree(i) for i in mono)

    def degrees(self):
        return sorted({self.mono_degree(m) for m in self.terms})

    def is_homogeneous(self, deg=None):
        ds = self.degrees()
        if not ds:
            return True
        if len(ds) > 1:
            return False
        return deg is None or ds[0] == deg

    def bidegree_part(self, form, ghost):
        """Part of given (form, ghost) bidegree; needs bidegree metadata."""
        bids = self.gens.bidegrees
        if bids is None:
            raise GradingError("generator set carries no bidegree metadata")
        out = {}
        for m, c in self.terms.items():
            f = sum(bids[i][0] for i in m)
            g = sum(bids[i][1] for i in m)
            if (f, g) == (form, ghost):
                out[m] = c
        return GradedElem(self.gens, out)

    def restrict(self, zero_names):
        """Set the listed generators to zero (projection of the algebra)."""
        idx = {self.gens.index(n) for n in zero_names}
        return GradedElem(
            self.gens, {m: c for m, c in self.terms.items() if not set(m) & idx}
        )

    def map_coefficients(self, fn):
        return GradedElem(self.gens, {m: fn(c) for m, c in self.terms.items()})

    def coefficient(self, mono):
        return self.terms.get(tuple(mono), ScalarExpr.const(self.gens.chart, 0))

    # -- arithmetic ---------------------------------------------------------

    def _check(self, other):
        if self.gens is not other.gens and self.gens != other.gens:
            raise GradingError("mixed generator sets")

    def __add__(self, other):
        self._check(other)
        out = dict(self.terms)
        for m, c in other.terms.items():
            if m in out:
                s = out[m] + c
                if s.is_exact_zero():
                    del out[m]
                else:
                    out[m] = s
            else:
                out[m] = c
        return GradedElem(self.gens, out)

    def __sub__(self, other):
        return self + (-other)

    def __neg__(self):
        return GradedElem(self.gens, {m: -c for m, c in self.terms.items()})

    def scalar_mul(self, s):
        if not isinstance(s, ScalarExpr):
            s = ScalarExpr.const(self.gens.chart, s)
        if s.is_exact_zero():
            return GradedElem(self.gens)
        return GradedElem(self.gens, {m: c * s for m, c in self.terms.items()})

    def __mul__(self, other):
        if isinstance(other, (ScalarExpr, int, Fraction)):
            return self.scalar_mul(other)
        self._check(other)
        degrees = [d for _, d in self.gens.gens]
        out = {}
        for m1, c1 in self.terms.items():
            for m2, c2 in other.terms.items():
                word, sign = _sort_word(m1 + m2, degrees)
                if word is None:
                    continue
                c = c1 * c2
                if sign < 0:
                    c = -c
                if word in out:
                    s = out[word] + c
                    if s.is_exact_zero():
                        del out[word]
                    else:
                        out[word] = s
                else:
                    if not c.is_exact_zero():
                        out[word] = c
        return GradedElem(self.gens, out)

    def __rmul__(self, other):
        if isinstance(other, (ScalarExpr, int, Fraction)):
            return self.scalar_mul(other)
        return NotImplemented

    def __eq__(self, other):
        if not isinstance(other, GradedElem):
            return NotImplemented
        return self.gens == other.gens and self.terms == other.terms

    def __hash__(self):
        return hash((self.gens, tuple(sorted((m, c.key()) for m, c in self.terms.items()))))

    def __repr__(self):
        if not self.terms:
            return "<GradedElem 0>"
        bits = []
        for m in sorted(self.terms):
            word = "*".join(self.gens.name(i) for i in m) or "1"
            bits.append(f"({self.terms[m]})*{word}")
        return "<GradedElem " + " + ".join(bits) + ">"


def normal_form(gens, raw):
    """Build an element from (generator-name sequence, ScalarExpr) pairs."""
    degrees = [d for _, d in gens.gens]
    acc = {}
    for names, coeff in raw:
        word = tuple(gens.index(n) for n in names)
        sorted_word, sign = _sort_word(word, degrees)
        if sorted_word is None:
            continue
        c = coeff if sign > 0 else -coeff
        if sorted_word in acc:
            acc[sorted_word] = acc[sorted_word] + c
        else:
            acc[sorted_word] = c
    return GradedElem(gens, acc)


@dataclass
class DerivationSpec:
    """Graded derivation: images on chart coordinates and generators.

    opaque_images assigns variations to opaque coefficient symbols; symbols
    without an explicit image differentiate through the coordinates (chain
    rule with coord_images).  jet_map supplies the first-jet generator of a
    generator along a coordinate, for prolonging opaque images; a None value
    means the generator is constant along that coordinate.
    """

    gens: GeneratorSet
    degree: int
    coord_images: dict
    gen_images: dict
    opaque_images: dict = field(default_factory=dict)
    jet_map: dict = field(default_factory=dict)
    name: str = "D"

    def __post_init__(self):
        for c, img in self.coord_images.items():
            if c not in self.gens.chart.coords:
                raise GradingError(f"image given for unknown coordinate {c!r}")
            if not img.is_homogeneous(self.degree):
                raise GradingError(f"image of coordinate {c!r} is not homogeneous "
                                   f"of degree {self.degree}")
        for g, img in self.gen_images.items():
            d = self.gens.degree(self.gens.index(g))
            if not img.is_homogeneous(d + self.degree):
                raise GradingError(f"image of generator {g!r} is not homogeneous "
                                   f"of degree {d + self.degree}")

    def coord_image(self, c):
        return self.coord_images.get(c) or GradedElem(self.gens)

    def gen_image(self, name):
        return self.gen_images.get(name) or GradedElem(self.gens)


def _prolong(elem, coord, jet_map):
    """Coordinate derivative of an element, via jet partners for generators."""
    gens = elem.gens
    out = GradedElem(gens)
    for m, c in elem.terms.items():
        dc = differentiate(c, coord)
        if not dc.is_exact_zero():
            out = out + GradedElem(gens, {m: dc})
        for i, g in enumerate(m):
            if (g, coord) not in jet_map:
                raise GradingError(
                    f"no jet partner for generator {gens.name(g)!r} along {coord!r}"
                )
            partner = jet_map[(g, coord)]
            if partner is None:
                continue
            out = out + GradedElem(gens, {m[:i] + (partner,) + m[i + 1:]: c})
    return out


def _scalar_image(D, s, cache):
    """D applied to a scalar coefficient, as a GradedElem of degree |D|."""
    gens = D.gens
    out = GradedElem(gens)
    for aid in sorted(s.atoms()):
        v = _atom_image(D, aid, cache)
        if v is None or v.is_exact_zero():
            continue
        ds = atom_partial(s, aid)
        if ds.is_exact_zero():
            continue
        out = out + v.scalar_mul(ds)
    return out


def _atom_image(D, aid, cache):
    if aid in cache:
        return cache[aid]
    desc = describe_atom(aid)
    if desc[0] == "c":
        v = D.coord_images.get(desc[1])
    elif desc[0] == "o":
        name, deps, multi = desc[1], desc[2], desc[3]
        if name in D.opaque_images:
            v = D.opaque_images[name]
            for c in multi:
                v = _prolong(v, c, D.jet_map)
        else:
            v = GradedElem(D.gens)
            for c in deps:
                ci = D.coord_images.get(c)
                if ci is None or ci.is_exact_zero():
                    continue
                v = v + ci.scalar_mul(ScalarExpr.opaque(D.gens.chart, name, multi + (c,)))
    else:
        arg = func_argument(aid)
        v = _scalar_image(D, arg, cache)
        if not v.is_exact_zero():
            from .coeff import _FUNC_DERIV

            v = v.scalar_mul(_FUNC_DERIV[desc[1]](arg))
    cache[aid] = v
    return v


def apply_derivation(D, e):
    """Graded Leibniz extension of D to an arbitrary element."""
    gens = e.gens
    out = GradedElem(gens)
    cache = {}
    odd_sign = D.degree & 1
    for mono, coeff in e.terms.items():
        dc = _scalar_image(D, coeff, cache)
        if not dc.is_exact_zero():
            out = out + dc * GradedElem(gens, {mono: ScalarExpr.const(gens.chart, 1)})
        prefix = 0
        for i, g in enumerate(mono):
            img = D.gen_images.get(gens.name(g))
            if img is not None and not img.is_exact_zero():
                c = coeff if not (odd_sign and prefix & 1) else -coeff
                left = GradedElem(gens, {mono[:i]: c})
                right = GradedElem(gens, {mono[i + 1:]: ScalarExpr.const(gens.chart, 1)})
                out = out + left * img * right
            prefix += gens.degree(g)
    return out


def square_check(D):
    """Residuals D(D(s)) for every chart coordinate and generator s.

    For odd D, empty residuals are equivalent to D^2 = 0 on the whole
    algebra by the Leibniz rule.
    """
    if not D.degree & 1:
        raise GradingError("square_check requires an odd derivation")
    out = []
    for c in D.gens.chart.coords:
        out.append((c, apply_derivation(D, D.coord_image(c))))
    for name, _ in D.gens.gens:
        out.append((name, apply_derivation(D, D.gen_image(name))))
    return out


def elem_verdict(e, seed=0):
    """Aggregate zero-verdict over all coefficients (worst one wins)."""
    worst = None
    for m in sorted(e.terms):
        v = is_zero(e.terms[m], seed=seed)
        if v.kind == "nonzero":
            return v
        if worst is None or (worst.kind == "exact_zero" and v.kind == "numeric_zero"):
            worst = v
    if worst is None:
        from .coeff import ZeroVerdict

        return ZeroVerdict("exact_zero", "exact")
    return worst
