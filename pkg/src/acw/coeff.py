"""Scalar coefficient calculus on coordinate charts.

Expressions are kept in rational canonical form: a pair of multivariate
polynomials over Fraction coefficients in interned "atoms".  Atoms are
chart coordinates, opaque function symbols carrying a multi-index of
formal partials, and elementary function applications (sin, cos, exp,
sqrt) whose arguments are themselves canonical expressions.

Zero testing is exact on the rational fragment (no elementary-function
atoms) and falls back to seeded numeric sampling otherwise; the verdict
records which route decided.
"""

import math
import random
import re
from dataclasses import dataclass, field
from fractions import Fraction
from math import gcd as _int_gcd

from ._kernel import poly_add, poly_mul, poly_neg, poly_pow, poly_scale, poly_sub

__all__ = [
    "ChartSpec",
    "ScalarExpr",
    "NumericPoint",
    "ZeroVerdict",
    "ExprError",
    "ParseError",
    "UnknownSymbolError",
    "ChartMismatchError",
    "EvalError",
    "parse",
    "differentiate",
    "variation",
    "substitute",
    "is_zero",
]

_ZERO = Fraction(0)
_ONE = Fraction(1)
_POLY_ONE = {(): _ONE}

ELEMENTARY = ("sin", "cos", "exp", "sqrt")
RESERVED = set(ELEMENTARY) | {"d"}

_IDENT_RE = re.compile(r"[A-Za-z][A-Za-z0-9_]*")


class ExprError(Exception):
    pass


class ParseError(ExprError):
    def __init__(self, msg, pos):
        super().__init__(f"{msg} (at position {pos})")
        self.pos = pos


class UnknownSymbolError(ExprError):
    pass


class ChartMismatchError(ExprError):
    pass


class EvalError(ExprError):
    pass


@dataclass(frozen=True)
class ChartSpec:
    name: str
    coords: tuple

    def __post_init__(self):
        object.__setattr__(self, "coords", tuple(self.coords))
        if len(set(self.coords)) != len(self.coords):
            raise ValueError(f"duplicate coordinate names in chart {self.name!r}")
        for c in self.coords:
            if not _IDENT_RE.fullmatch(c) or c in RESERVED:
                raise ValueError(f"bad coordinate name {c!r}")

    @property
    def dim(self):
        return len(self.coords)


# ---------------------------------------------------------------------------
# Atom registry
#
# Atom keys:
#   ("c", name)                       chart coordinate
#   ("o", name, deps, multiindex)     opaque symbol; deps = coords it may
#                                     depend on; multiindex sorted tuple
#   ("f", fname, arg_key)             elementary function application
# ---------------------------------------------------------------------------

_ATOM_KEYS = []  # id -> key
_ATOM_IDS = {}  # key -> id
_FUNC_ARGS = {}  # id -> argument ScalarExpr for "f" atoms


def _intern(key, func_arg=None):
    aid = _ATOM_IDS.get(key)
    if aid is None:
        aid = len(_ATOM_KEYS)
        _ATOM_KEYS.append(key)
        _ATOM_IDS[key] = aid
        if func_arg is not None:
            _FUNC_ARGS[aid] = func_arg
    return aid


def _atom_key(aid):
    return _ATOM_KEYS[aid]


def _atom_sort_key(aid):
    """Structural key, stable across interning order."""
    key = _ATOM_KEYS[aid]
    if key[0] == "f":
        return ("f", key[1], _FUNC_ARGS[aid].sort_key())
    return key


# ---------------------------------------------------------------------------
# Polynomial helpers beyond the kernel
# ---------------------------------------------------------------------------


def _poly_atoms(p):
    out = set()
    for m in p:
        for aid, _ in m:
            out.add(aid)
    return out


def _poly_partial(p, aid):
    out = {}
    for m, c in p.items():
        for i, (a, e) in enumerate(m):
            if a == aid:
                nm = m[:i] + ((a, e - 1),) + m[i + 1 :] if e > 1 else m[:i] + m[i + 1 :]
                nc = c * e
                acc = out.get(nm)
                out[nm] = nc if acc is None else acc + nc
                if not out[nm]:
                    del out[nm]
                break
    return out


def _mono_lex_gt(m1, m2):
    # lex order on exponent vectors, smaller atom id = more significant
    i = j = 0
    while i < len(m1) and j < len(m2):
        a1, e1 = m1[i]
        a2, e2 = m2[j]
        if a1 == a2:
            if e1 != e2:
                return e1 > e2
            i += 1
            j += 1
        elif a1 < a2:
            return True
        else:
            return False
    return i < len(m1)


def _poly_lead(p):
    it = iter(p)
    best = next(it)
    for m in it:
        if _mono_lex_gt(m, best):
            best = m
    return best


def _mono_div(m1, m2):
    """m1 / m2, or None if m2 does not divide m1."""
    out = []
    i = j = 0
    while j < len(m2):
        if i >= len(m1):
            return None
        a1, e1 = m1[i]
        a2, e2 = m2[j]
        if a1 == a2:
            if e1 < e2:
                return None
            if e1 > e2:
                out.append((a1, e1 - e2))
            i += 1
            j += 1
        elif a1 < a2:
            out.append((a1, e1))
            i += 1
        else:
            return None
    out.extend(m1[i:])
    return tuple(out)


def _poly_div_exact(p, q):
    """Exact polynomial division; raises ValueError if not divisible."""
    if not q:
        raise ZeroDivisionError("polynomial division by zero")
    if not p:
        return {}
    lq = _poly_lead(q)
    cq = q[lq]
    rem = dict(p)
    quot = {}
    while rem:
        lr = _poly_lead(rem)
        mono = _mono_div(lr, lq)
        if mono is None:
            raise ValueError("inexact polynomial division")
        c = rem[lr] / cq
        quot[mono] = quot.get(mono, _ZERO) + c
        rem = poly_sub(rem, poly_mul({mono: c}, q))
    return {m: c for m, c in quot.items() if c}


def _poly_to_int(p):
    """Scale Fraction-coefficient poly to primitive integer coefficients."""
    if not p:
        return {}
    den_lcm = 1
    for c in p.values():
        den_lcm = den_lcm * c.denominator // _int_gcd(den_lcm, c.denominator)
    num_gcd = 0
    for c in p.values():
        num_gcd = _int_gcd(num_gcd, abs(c.numerator * (den_lcm // c.denominator)))
    return {m: int(c * den_lcm) // num_gcd for m, c in p.items()}


def _int_content(p):
    g = 0
    for c in p.values():
        g = _int_gcd(g, abs(c))
    return g


def _univ(p, aid):
    """View p as univariate in atom aid: {degree: coefficient-poly}."""
    out = {}
    for m, c in p.items():
        deg = 0
        rest = []
        for a, e in m:
            if a == aid:
                deg = e
            else:
                rest.append((a, e))
        level = out.setdefault(deg, {})
        rest = tuple(rest)
        level[rest] = level.get(rest, 0) + c
    return {d: {m: c for m, c in lvl.items() if c} for d, lvl in out.items() if any(lvl.values())}


def _from_univ(u, aid):
    out = {}
    for d, cp in u.items():
        shift = ((aid, d),) if d else ()
        for m, c in cp.items():
            mono = tuple(sorted(m + shift))
            out[mono] = out.get(mono, 0) + c
    return {m: c for m, c in out.items() if c}


def _ipoly_mul(p, q):
    out = {}
    for m1, c1 in p.items():
        for m2, c2 in q.items():
            m = _mono_mul_sorted(m1, m2)
            out[m] = out.get(m, 0) + c1 * c2
    return {m: c for m, c in out.items() if c}


def _mono_mul_sorted(m1, m2):
    out = []
    i = j = 0
    while i < len(m1) and j < len(m2):
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


def _ipoly_sub(p, q):
    out = dict(p)
    for m, c in q.items():
        out[m] = out.get(m, 0) - c
        if not out[m]:
            del out[m]
    return out


def _igcd_poly(p, q):
    """GCD of integer-coefficient polynomial dicts, primitive, positive lead."""
    if not p:
        return _iprimitive(q)
    if not q:
        return _iprimitive(p)
    ap, aq = _poly_atoms(p), _poly_atoms(q)
    if not ap and not aq:
        return {(): _int_gcd(abs(p[()]), abs(q[()]))}
    main = max(ap | aq)
    if main not in ap:
        return _igcd_poly(p, _icontent_poly(_univ(q, main)))
    if main not in aq:
        return _igcd_poly(_icontent_poly(_univ(p, main)), q)
    pu, qu = _univ(p, main), _univ(q, main)
    cont_p, cont_q = _icontent_poly(pu), _icontent_poly(qu)
    cont = _igcd_poly(cont_p, cont_q)
    pp = {d: _idiv_exact(c, cont_p) for d, c in pu.items()}
    qq = {d: _idiv_exact(c, cont_q) for d, c in qu.items()}
    if max(pu) < max(qu):
        pp, qq = qq, pp
    a, b = pp, qq
    while b:
        r = _prem(a, b, main)
        a = b
        if not r:
            b = {}
        else:
            ru = _univ(r, main)
            b = {d: _idiv_exact(c, _icontent_poly(ru)) for d, c in ru.items()}
    if max(a) == 0:
        return _iprimitive(cont)
    g = _ipoly_mul(_from_univ(a, main), cont)
    return _iprimitive(g)


def _icontent_poly(u):
    it = iter(u.values())
    g = next(it)
    for c in it:
        g = _igcd_poly(g, c)
        if g == {(): 1}:
            break
    return _iprimitive(g)


def _iprimitive(p):
    if not p:
        return {}
    c = _int_content(p)
    out = {m: v // c for m, v in p.items()}
    lead = _poly_lead(out)
    if out[lead] < 0:
        out = {m: -v for m, v in out.items()}
    return out


def _idiv_exact(p, q):
    """Exact division of int polys (q divides p)."""
    pf = {m: Fraction(c) for m, c in p.items()}
    qf = {m: Fraction(c) for m, c in q.items()}
    r = _poly_div_exact(pf, qf)
    return {m: int(c) for m, c in r.items()}


def _prem(a, b, main):
    """Pseudo-remainder of univariate views a, b (dicts deg->coeffpoly)."""
    da, db = max(a), max(b)
    lb = b[db]
    r = a
    while r and max(r) >= db:
        dr = max(r)
        lr = r[dr]
        # r = lb*r - lr * x^(dr-db) * b
        new = {}
        for d, c in r.items():
            new[d] = _ipoly_mul(c, lb)
        for d, c in b.items():
            dd = d + dr - db
            new[dd] = _ipoly_sub(new.get(dd, {}), _ipoly_mul(c, lr))
        r = {d: c for d, c in new.items() if c}
        if dr in r and not r[dr]:
            del r[dr]
    return _from_univ(r, main) if r else {}


def _poly_gcd(p, q):
    """GCD of Fraction-coefficient polys; {(): 1} when coprime."""
    pi, qi = _poly_to_int(p), _poly_to_int(q)
    g = _igcd_poly(pi, qi)
    return {m: Fraction(c) for m, c in g.items()}


# ---------------------------------------------------------------------------
# ScalarExpr
# ---------------------------------------------------------------------------


class ScalarExpr:
    """Rational function in atoms over one chart; immutable normal form."""

    __slots__ = ("chart", "num", "den", "caveats", "_key")

    def __init__(self, chart, num, den=None, caveats=()):
        self.chart = chart
        if den is None:
            den = dict(_POLY_ONE)
        num, den, extra = _normalize(num, den)
        self.num = num
        self.den = den
        self.caveats = tuple(caveats) + extra
        self._key = None

    # -- constructors ------------------------------------------------------

    @classmethod
    def const(cls, chart, value):
        value = Fraction(value)
        return cls(chart, {(): value} if value else {})

    @classmethod
    def coord(cls, chart, name):
        if name not in chart.coords:
            raise UnknownSymbolError(f"{name!r} is not a coordinate of chart {chart.name!r}")
        aid = _intern(("c", name))
        return cls(chart, {((aid, 1),): _ONE})

    @classmethod
    def opaque(cls, chart, name, multiindex=()):
        multiindex = tuple(sorted(multiindex))
        for c in multiindex:
            if c not in chart.coords:
                raise UnknownSymbolError(f"partial w.r.t. {c!r} outside chart {chart.name!r}")
        aid = _intern(("o", name, chart.coords, multiindex))
        return cls(chart, {((aid, 1),): _ONE})

    @classmethod
    def apply_func(cls, fname, arg):
        if fname not in ELEMENTARY:
            raise UnknownSymbolError(f"unknown function {fname!r}")
        folded = _fold_const(fname, arg)
        if folded is not None:
            return folded
        aid = _intern(("f", fname, arg.key()), func_arg=arg)
        return cls(arg.chart, {((aid, 1),): _ONE})

    # -- structure ---------------------------------------------------------

    def key(self):
        if self._key is None:
            self._key = (
                tuple(sorted((m, c) for m, c in self.num.items())),
                tuple(sorted((m, c) for m, c in self.den.items())),
            )
        return self._key

    def sort_key(self):
        return (
            tuple(
                sorted(
                    (tuple((_atom_sort_key(a), e) for a, e in m), c) for m, c in self.num.items()
                )
            ),
            tuple(
                sorted(
                    (tuple((_atom_sort_key(a), e) for a, e in m), c) for m, c in self.den.items()
                )
            ),
        )

    def atoms(self):
        return _poly_atoms(self.num) | _poly_atoms(self.den)

    def is_exact_zero(self):
        return not self.num

    def is_rational_form(self):
        """True when no elementary-function atom occurs (zero test is exact)."""
        return all(_atom_key(a)[0] != "f" for a in self.atoms())

    def as_fraction(self):
        if _poly_atoms(self.num) or _poly_atoms(self.den):
            raise ExprError("expression is not constant")
        num = self.num.get((), _ZERO)
        den = self.den.get((), _ONE)
        return num / den

    def free_coords(self):
        out = set()
        for a in self.atoms():
            out |= _atom_coords(a)
        return out

    def opaque_names(self):
        out = set()
        for a in self.atoms():
            out |= _atom_opaques(a)
        return out

    # -- arithmetic ---------------------------------------------------------

    def _coerce(self, other):
        if isinstance(other, ScalarExpr):
            if other.chart != self.chart:
                raise ChartMismatchError(
                    f"charts {self.chart.name!r} and {other.chart.name!r} do not match"
                )
            return other
        if isinstance(other, (int, Fraction)):
            return ScalarExpr.const(self.chart, other)
        return NotImplemented

    def __add__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return NotImplemented
        if self.den == other.den:
            return ScalarExpr(
                self.chart, poly_add(self.num, other.num), dict(self.den),
                self.caveats + other.caveats,
            )
        num = poly_add(poly_mul(self.num, other.den), poly_mul(other.num, self.den))
        return ScalarExpr(self.chart, num, poly_mul(self.den, other.den),
                          self.caveats + other.caveats)

    __radd__ = __add__

    def __neg__(self):
        return ScalarExpr(self.chart, poly_neg(self.num), dict(self.den), self.caveats)

    def __sub__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return NotImplemented
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return NotImplemented
        return ScalarExpr(
            self.chart,
            poly_mul(self.num, other.num),
            poly_mul(self.den, other.den),
            self.caveats + other.caveats,
        )

    __rmul__ = __mul__

    def __truediv__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return NotImplemented
        if not other.num:
            raise ZeroDivisionError("division by exact zero expression")
        return ScalarExpr(
            self.chart,
            poly_mul(self.num, other.den),
            poly_mul(self.den, other.num),
            self.caveats + other.caveats,
        )

    def __rtruediv__(self, other):
        other = self._coerce(other)
        return other / self

    def __pow__(self, n):
        if not isinstance(n, int):
            raise ExprError("exponent must be an integer")
        if n >= 0:
            return ScalarExpr(self.chart, poly_pow(self.num, n), poly_pow(self.den, n),
                              self.caveats)
        if not self.num:
            raise ZeroDivisionError("zero to a negative power")
        return ScalarExpr(self.chart, poly_pow(self.den, -n), poly_pow(self.num, -n),
                          self.caveats)

    def __eq__(self, other):
        if not isinstance(other, ScalarExpr):
            if isinstance(other, (int, Fraction)):
                other = ScalarExpr.const(self.chart, other)
            else:
                return NotImplemented
        return self.chart == other.chart and self.num == other.num and self.den == other.den

    def __hash__(self):
        return hash((self.chart, self.key()))

    def __repr__(self):
        return f"<ScalarExpr {to_string(self)!r} on {self.chart.name}>"

    def __str__(self):
        return to_string(self)


def _normalize(num, den):
    """Canonical (num, den): cancelled gcd, den lead coeff 1."""
    if not den:
        raise ZeroDivisionError("zero denominator")
    num = {m: c for m, c in num.items() if c}
    caveats = ()
    if not num:
        return {}, dict(_POLY_ONE), ()
    if den != _POLY_ONE and (len(den) > 1 or () not in den):
        g = _poly_gcd(num, den)
        if g != _POLY_ONE and _poly_atoms(g):
            num = _poly_div_exact(num, g)
            den = _poly_div_exact(den, g)
            caveats = (tuple(sorted(g.items())),)
    lead = den[_poly_lead(den)]
    if lead != 1:
        num = poly_scale(num, 1 / lead)
        den = poly_scale(den, 1 / lead)
    return num, den, caveats


def _fold_const(fname, arg):
    if _poly_atoms(arg.num) or _poly_atoms(arg.den):
        return None
    v = arg.as_fraction()
    if fname == "sin" and v == 0:
        return ScalarExpr.const(arg.chart, 0)
    if fname == "cos" and v == 0:
        return ScalarExpr.const(arg.chart, 1)
    if fname == "exp" and v == 0:
        return ScalarExpr.const(arg.chart, 1)
    if fname == "sqrt":
        if v == 0:
            return ScalarExpr.const(arg.chart, 0)
        if v > 0:
            rn, rd = _isqrt_exact(v.numerator), _isqrt_exact(v.denominator)
            if rn is not None and rd is not None:
                return ScalarExpr.const(arg.chart, Fraction(rn, rd))
        if v < 0:
            raise EvalError("sqrt of negative constant")
    return None


def _isqrt_exact(n):
    r = math.isqrt(n)
    return r if r * r == n else None


def _atom_coords(aid):
    key = _ATOM_KEYS[aid]
    if key[0] == "c":
        return {key[1]}
    if key[0] == "o":
        return set(key[2])
    return _FUNC_ARGS[aid].free_coords()


def _atom_opaques(aid):
    key = _ATOM_KEYS[aid]
    if key[0] == "o":
        return {key[1]}
    if key[0] == "f":
        return _FUNC_ARGS[aid].opaque_names()
    return set()


# ---------------------------------------------------------------------------
# Parsing
# ---------------------------------------------------------------------------

_TOKEN_RE = re.compile(
    r"\s*(?:(?P<num>\d+\.\d+|\d+)|(?P<ident>[A-Za-z][A-Za-z0-9_]*)|(?P<op>[-+*/^(),]))"
)


def _tokenize(src):
    pos = 0
    out = []
    while pos < len(src):
        m = _TOKEN_RE.match(src, pos)
        if not m or m.end() == pos:
            if src[pos:].strip():
                raise ParseError(f"unexpected character {src[pos:].strip()[0]!r}", pos)
            break
        if m.lastgroup == "num":
            out.append(("num", m.group("num"), m.start("num")))
        elif m.lastgroup == "ident":
            out.append(("ident", m.group("ident"), m.start("ident")))
        else:
            out.append(("op", m.group("op"), m.start("op")))
        pos = m.end()
    out.append(("end", "", len(src)))
    return out


class _Parser:
    def __init__(self, tokens, chart, opaques):
        self.toks = tokens
        self.i = 0
        self.chart = chart
        self.opaques = frozenset(opaques)

    def peek(self):
        return self.toks[self.i]

    def next(self):
        t = self.toks[self.i]
        self.i += 1
        return t

    def expect(self, val):
        kind, v, pos = self.next()
        if v != val:
            raise ParseError(f"expected {val!r}, found {v!r}", pos)

    def parse(self):
        e = self.expr()
        kind, v, pos = self.peek()
        if kind != "end":
            raise ParseError(f"trailing input {v!r}", pos)
        return e

    def expr(self):
        e = self.term()
        while True:
            kind, v, _ = self.peek()
            if kind == "op" and v in "+-":
                self.next()
                rhs = self.term()
                e = e + rhs if v == "+" else e - rhs
            else:
                return e

    def term(self):
        e = self.factor()
        while True:
            kind, v, _ = self.peek()
            if kind == "op" and v in "*/":
                self.next()
                rhs = self.factor()
                e = e * rhs if v == "*" else e / rhs
            else:
                return e

    def factor(self):
        kind, v, pos = self.peek()
        if kind == "op" and v == "-":
            self.next()
            return -self.factor()
        if kind == "op" and v == "+":
            self.next()
            return self.factor()
        return self.power()

    def power(self):
        base = self.atom()
        kind, v, _ = self.peek()
        if kind == "op" and v == "^":
            self.next()
            return base ** self.int_exponent()
        return base

    def int_exponent(self):
        sign = 1
        kind, v, pos = self.peek()
        if kind == "op" and v == "-":
            self.next()
            sign = -1
        kind, v, pos = self.next()
        if kind == "num" and "." not in v:
            return sign * int(v)
        if kind == "op" and v == "(":
            n = self.int_exponent()
            self.expect(")")
            return sign * n
        raise ParseError("exponent must be an integer literal", pos)

    def atom(self):
        kind, v, pos = self.next()
        if kind == "num":
            return ScalarExpr.const(self.chart, Fraction(v))
        if kind == "op" and v == "(":
            e = self.expr()
            self.expect(")")
            return e
        if kind == "ident":
            nkind, nv, _ = self.peek()
            if nkind == "op" and nv == "(":
                return self.call(v, pos)
            return self.symbol(v, pos)
        raise ParseError(f"unexpected token {v!r}", pos)

    def call(self, name, pos):
        self.expect("(")
        args = [self.expr() if name != "d" else self.d_argument()]
        while True:
            kind, v, _ = self.peek()
            if kind == "op" and v == ",":
                self.next()
                args.append(self.expr() if name != "d" else self.d_argument())
            else:
                break
        self.expect(")")
        if name in ELEMENTARY:
            if len(args) != 1:
                raise ParseError(f"{name} takes one argument", pos)
            return ScalarExpr.apply_func(name, args[0])
        if name == "d":
            return self.derivative_atom(args, pos)
        raise UnknownSymbolError(f"unknown function {name!r}")

    def d_argument(self):
        kind, v, pos = self.next()
        if kind != "ident":
            raise ParseError("d(...) arguments must be identifiers", pos)
        return v

    def derivative_atom(self, names, pos):
        if len(names) < 2:
            raise ParseError("d(f, coord, ...) needs a symbol and coordinates", pos)
        fname, coords = names[0], names[1:]
        if fname not in self.opaques:
            raise UnknownSymbolError(f"{fname!r} is not a declared opaque symbol")
        for c in coords:
            if c not in self.chart.coords:
                raise UnknownSymbolError(f"{c!r} is not a coordinate of chart {self.chart.name!r}")
        return ScalarExpr.opaque(self.chart, fname, coords)

    def symbol(self, name, pos):
        if name in self.chart.coords:
            return ScalarExpr.coord(self.chart, name)
        if name in self.opaques:
            return ScalarExpr.opaque(self.chart, name)
        raise UnknownSymbolError(f"unknown symbol {name!r}")


def parse(src, chart, opaques=()):
    """Parse an expression string against a chart and declared opaque symbols."""
    return _Parser(_tokenize(src), chart, opaques).parse()


# ---------------------------------------------------------------------------
# Printing (round-trips through parse)
# ---------------------------------------------------------------------------


def _atom_str(aid):
    key = _ATOM_KEYS[aid]
    if key[0] == "c":
        return key[1]
    if key[0] == "o":
        name, _, multi = key[1], key[2], key[3]
        if not multi:
            return name
        return f"d({name},{','.join(multi)})"
    return f"{key[1]}({to_string(_FUNC_ARGS[aid])})"


def _poly_str(p):
    if not p:
        return "0"
    parts = []
    monos = sorted(p, key=lambda m: (sum(e for _, e in m), tuple((_atom_sort_key(a), e) for a, e in m)))
    for m in monos:
        c = p[m]
        factors = []
        if not m or abs(c) != 1:
            factors.append(_frac_str(abs(c)))
        for a, e in m:
            s = _atom_str(a)
            factors.append(f"{s}^{e}" if e > 1 else s)
        term = "*".join(factors)
        if not parts:
            parts.append(term if c > 0 else f"-{term}")
        else:
            parts.append(f"+ {term}" if c > 0 else f"- {term}")
    return " ".join(parts)


def _frac_str(c):
    if c.denominator == 1:
        return str(c.numerator)
    return f"{c.numerator}/{c.denominator}"


def to_string(e):
    if e.den == _POLY_ONE:
        return _poly_str(e.num)
    return f"({_poly_str(e.num)})/({_poly_str(e.den)})"


# ---------------------------------------------------------------------------
# Differentiation and variation
# ---------------------------------------------------------------------------


def _derive(e, image):
    """Derivation on e with atom images given by image(aid) -> ScalarExpr."""
    chart = e.chart
    out = ScalarExpr.const(chart, 0)
    d2 = None
    for aid in sorted(e.atoms()):
        v = image(aid)
        if v is None or v.is_exact_zero():
            continue
        pn = _poly_partial(e.num, aid)
        pd = _poly_partial(e.den, aid)
        if not pn and not pd:
            continue
        if e.den == _POLY_ONE:
            part = ScalarExpr(chart, pn)
        else:
            if d2 is None:
                d2 = poly_mul(e.den, e.den)
            part = ScalarExpr(
                chart, poly_sub(poly_mul(pn, e.den), poly_mul(e.num, pd)), dict(d2)
            )
        out = out + part * v
    return out


_FUNC_DERIV = {
    "sin": lambda a: ScalarExpr.apply_func("cos", a),
    "cos": lambda a: -ScalarExpr.apply_func("sin", a),
    "exp": lambda a: ScalarExpr.apply_func("exp", a),
    "sqrt": lambda a: ScalarExpr.const(a.chart, Fraction(1, 2)) / ScalarExpr.apply_func("sqrt", a),
}


def differentiate(e, coord):
    """Partial derivative along one chart coordinate."""
    if coord not in e.chart.coords:
        raise UnknownSymbolError(f"{coord!r} is not a coordinate of chart {e.chart.name!r}")

    def image(aid):
        key = _ATOM_KEYS[aid]
        if key[0] == "c":
            return ScalarExpr.const(e.chart, 1) if key[1] == coord else None
        if key[0] == "o":
            if coord not in key[2]:
                return None
            return ScalarExpr.opaque(e.chart, key[1], key[3] + (coord,))
        arg = _FUNC_ARGS[aid]
        return _FUNC_DERIV[key[1]](arg) * differentiate(arg, coord)

    return _derive(e, image)


def variation(e, images):
    """First variation: opaque base symbols move by images[name], coords fixed.

    Derivative atoms vary by the corresponding coordinate derivatives of the
    image, so the variation commutes with formal partials.
    """

    def image(aid):
        key = _ATOM_KEYS[aid]
        if key[0] == "c":
            return None
        if key[0] == "o":
            img = images.get(key[1])
            if img is None:
                return None
            for c in key[3]:
                img = differentiate(img, c)
            return img
        arg = _FUNC_ARGS[aid]
        return _FUNC_DERIV[key[1]](arg) * variation(arg, images)

    return _derive(e, image)


def substitute(e, mapping, target_chart):
    """Compose e with coordinate expressions over another chart.

    mapping: coord-name -> ScalarExpr over target_chart.  Every coordinate
    and function argument is substituted; opaque symbols over the source
    chart cannot be pulled back and raise.
    """

    cache = {}

    def atom_value(aid):
        got = cache.get(aid)
        if got is not None:
            return got
        key = _ATOM_KEYS[aid]
        if key[0] == "c":
            try:
                v = mapping[key[1]]
            except KeyError:
                raise ExprError(f"no substitution for coordinate {key[1]!r}")
        elif key[0] == "o":
            if set(key[2]) & set(mapping):
                raise ExprError(
                    f"cannot pull back opaque symbol {key[1]!r} through a coordinate map"
                )
            # depends on no substituted coordinate: transplant unchanged
            v = ScalarExpr(target_chart, {((aid, 1),): _ONE})
        else:
            v = ScalarExpr.apply_func(key[1], poly_pair_subst(_FUNC_ARGS[aid]))
        cache[aid] = v
        return v

    def poly_subst(p):
        out = ScalarExpr.const(target_chart, 0)
        for m, c in p.items():
            term = ScalarExpr.const(target_chart, c)
            for a, exp in m:
                term = term * atom_value(a) ** exp
            out = out + term
        return out

    def poly_pair_subst(expr):
        return poly_subst(expr.num) / poly_subst(expr.den)

    return poly_pair_subst(e)


def describe_atom(aid):
    """Public atom view: ("c", name) | ("o", name, deps, multiindex) | ("f", fname)."""
    key = _ATOM_KEYS[aid]
    if key[0] == "f":
        return ("f", key[1])
    return key


def func_argument(aid):
    return _FUNC_ARGS[aid]


def atom_partial(e, aid):
    """Formal partial of e with respect to a single atom (as a free variable)."""
    pn = _poly_partial(e.num, aid)
    if e.den == _POLY_ONE:
        return ScalarExpr(e.chart, pn)
    pd = _poly_partial(e.den, aid)
    d2 = poly_mul(e.den, e.den)
    return ScalarExpr(e.chart, poly_sub(poly_mul(pn, e.den), poly_mul(e.num, pd)), d2)


# ---------------------------------------------------------------------------
# Numeric evaluation
# ---------------------------------------------------------------------------


@dataclass
class NumericPoint:
    coords: dict = field(default_factory=dict)
    opaques: dict = field(default_factory=dict)  # (name, multiindex) -> float


_MIN_DEN = 1e-300


def eval_expr(e, point):
    """IEEE evaluation; raises EvalError on missing values or singularities."""
    num = _eval_poly(e.num, point)
    den = _eval_poly(e.den, point)
    if abs(den) < _MIN_DEN:
        raise EvalError("division by (near-)zero denominator")
    return num / den


def _eval_poly(p, point):
    total = 0.0
    for m, c in p.items():
        v = float(c)
        for aid, exp in m:
            v *= _eval_atom(aid, point) ** exp
        total += v
    return total


def _eval_atom(aid, point):
    key = _ATOM_KEYS[aid]
    if key[0] == "c":
        try:
            return point.coords[key[1]]
        except KeyError:
            raise EvalError(f"missing value for coordinate {key[1]!r}")
    if key[0] == "o":
        try:
            return point.opaques[(key[1], key[3])]
        except KeyError:
            raise EvalError(f"missing valuation for opaque {key[1]!r} with partials {key[3]}")
    arg = eval_expr(_FUNC_ARGS[aid], point)
    if key[1] == "sqrt":
        if arg < 0:
            raise EvalError("sqrt of negative value")
        return math.sqrt(arg)
    return getattr(math, key[1])(arg)


# ---------------------------------------------------------------------------
# Zero testing
# ---------------------------------------------------------------------------


@dataclass
class ZeroVerdict:
    kind: str  # "exact_zero" | "numeric_zero" | "nonzero"
    confidence: str  # "exact" | "numeric"
    witness: NumericPoint | None = None
    max_abs: float = 0.0
    n_samples: int = 0
    caveats: tuple = ()

    def is_zero(self):
        return self.kind in ("exact_zero", "numeric_zero")

    def __repr__(self):
        if self.kind == "exact_zero":
            return "ExactZero"
        if self.kind == "numeric_zero":
            return f"NumericZero(max|e|={self.max_abs:.2e}, n={self.n_samples})"
        return f"NonZero(|e|={self.max_abs:.2e})"


ZERO_TOL = 1e-9
WITNESS_TOL = 1e-6
N_SAMPLES = 24


def sample_point(e, rng, lo=-2.0, hi=2.0):
    pt = NumericPoint()
    for aid in sorted(e.atoms()):
        _fill_atom(aid, pt, rng, lo, hi)
    return pt


def _fill_atom(aid, pt, rng, lo, hi):
    key = _ATOM_KEYS[aid]
    if key[0] == "c":
        pt.coords.setdefault(key[1], rng.uniform(lo, hi))
    elif key[0] == "o":
        pt.opaques.setdefault((key[1], key[3]), rng.uniform(lo, hi))
    else:
        for sub in sorted(_FUNC_ARGS[aid].atoms()):
            _fill_atom(sub, pt, rng, lo, hi)


def is_zero(e, seed=0):
    """Three-way zero verdict; exact on the rational fragment."""
    if e.is_exact_zero():
        return ZeroVerdict("exact_zero", "exact", caveats=e.caveats)
    rng = random.Random(seed)
    exact = e.is_rational_form()
    values = []
    tries = 0
    max_tries = 10 * N_SAMPLES
    best = (0.0, None)
    while len(values) < N_SAMPLES and tries < max_tries:
        tries += 1
        pt = sample_point(e, rng)
        try:
            v = abs(eval_expr(e, pt))
        except EvalError:
            continue
        values.append(v)
        if v > best[0]:
            best = (v, pt)
        if v > WITNESS_TOL:
            return ZeroVerdict("nonzero", "exact" if exact else "numeric",
                               witness=pt, max_abs=v, n_samples=len(values),
                               caveats=e.caveats)
    if not values:
        raise EvalError("could not sample a regular point after 10x oversampling")
    if exact:
        # nonzero normal form in free atoms: certainly nonzero
        return ZeroVerdict("nonzero", "exact", witness=best[1], max_abs=best[0],
                           n_samples=len(values), caveats=e.caveats)
    if best[0] <= ZERO_TOL:
        return ZeroVerdict("numeric_zero", "numeric", max_abs=best[0],
                           n_samples=len(values), caveats=e.caveats)
    return ZeroVerdict("nonzero", "numeric", witness=best[1], max_abs=best[0],
                       n_samples=len(values), caveats=e.caveats)
