"""Exact sparse multivariate polynomials over the rationals.

These are the carriers for all symbolic computations: Poisson brackets,
deformation cochains, Chevalley-Eilenberg style differentials and the
Moser rescaling family.  Coefficients are `fractions.Fraction`, so every
identity asserted on them (Jacobi, d

 = 0, involution) is tested exactly,
not up to a tolerance.
"""

from __future__ import annotations

import json
from fractions import Fraction
from typing import Iterable, Mapping, Sequence

__all__ = ["Polynomial", "poly_jacobian", "poly_hessian"]


def _as_fraction(c) -> Fraction:
    if isinstance(c, Fraction):
        return c
    if isinstance(c, int):
        return Fraction(c)
    if isinstance(c, str):
        return Fraction(c)
    raise TypeError(f"coefficient must be rational, got {type(c).__name__}")


class Polynomial:
    """Sparse polynomial: map from exponent tuples to nonzero Fractions.

    Instances are immutable; arithmetic returns new objects in canonical
    form (no zero coefficients stored).
    """

    __slots__ = ("nvars", "terms")

    def __init__(self, nvars: int, terms: Mapping[tuple, object] | None = None):
        if nvars < 0:
            raise ValueError("nvars must be nonnegative")
        self.nvars = nvars
        clean: dict[tuple, Fraction] = {}
        if terms:
            for exps, c in terms.items():
                e = tuple(int(x) for x in exps)
                if len(e) != nvars or any(x < 0 for x in e):
                    raise ValueError(f"bad exponent tuple {e} for nvars={nvars}")
                c = _as_fraction(c)
                if c != 0:
                    acc = clean.get(e)
                    clean[e] = c if acc is None else acc + c
                    if clean[e] == 0:
                        del clean[e]
        self.terms = clean

    # ------------------------------------------------------------------ #
    # constructors

    @staticmethod
    def zero(nvars: int) -> "Polynomial":
        return Polynomial(nvars)

    @staticmethod
    def constant(c, nvars: int) -> "Polynomial":
        return Polynomial(nvars, {(0,) * nvars: c})

    @staticmethod
    def variable(i: int, nvars: int) -> "Polynomial":
        if not 0 <= i < nvars:
            raise ValueError(f"variable index {i} out of range")
        e = [0] * nvars
        e[i] = 1
        return Polynomial(nvars, {tuple(e): 1})

    @staticmethod
    def monomial(exps: Sequence[int], c, nvars: int) -> "Polynomial":
        return Polynomial(nvars, {tuple(exps): c})

    # ------------------------------------------------------------------ #
    # ring operations

    def __add__(self, other):
        other = self._coerce(other)
        out = dict(self.terms)
        for e, c in other.terms.items():
            s = out.get(e, Fraction(0)) + c
            if s == 0:
                out.pop(e, None)
            else:
                out[e] = s
        return self._raw(self.nvars, out)

    def __radd__(self, other):
        return self.__add__(other)

    def __neg__(self):
        return self._raw(self.nvars, {e: -c for e, c in self.terms.items()})

    def __sub__(self, other):
        return self + (-self._coerce(other))

    def __rsub__(self, other):
        return self._coerce(other) - self

    def __mul__(self, other):
        if isinstance(other, (int, Fraction)):
            c0 = _as_fraction(other)
            if c0 == 0:
                return Polynomial.zero(self.nvars)
            return self._raw(self.nvars, {e: c * c0 for e, c in self.terms.items()})
        other = self._coerce(other)
        out: dict[tuple, Fraction] = {}
        for e1, c1 in self.terms.items():
            for e2, c2 in other.terms.items():
                e = tuple(a + b for a, b in zip(e1, e2))
                s = out.get(e, Fraction(0)) + c1 * c2
                if s == 0:
                    out.pop(e, None)
                else:
                    out[e] = s
        return self._raw(self.nvars, out)

    def __rmul__(self, other):
        return self.__mul__(other)

    def __pow__(self, k: int):
        if k < 0:
            raise ValueError("negative power")
        out = Polynomial.constant(1, self.nvars)
        base = self
        while k:
            if k & 1:
                out = out * base
            base = base * base if k > 1 else base
            k >>= 1
        return out

    def __eq__(self, other):
        if isinstance(other, (int, Fraction)):
            other = Polynomial.constant(other, self.nvars)
        return isinstance(other, Polynomial) and self.nvars == other.nvars and self.terms == other.terms

    def __hash__(self):
        return hash((self.nvars, frozenset(self.terms.items())))

    def _coerce(self, other) -> "Polynomial":
        if isinstance(other, Polynomial):
            if other.nvars != self.nvars:
                raise ValueError("mixed variable counts")
            return other
        return Polynomial.constant(other, self.nvars)

    @classmethod
    def _raw(cls, nvars, terms):
        p = object.__new__(cls)
        p.nvars = nvars
        p.terms = terms
        return p

    # ------------------------------------------------------------------ #
    # calculus

    def diff(self, i: int) -> "Polynomial":
        out: dict[tuple, Fraction] = {}
        for e, c in self.terms.items():
            if e[i] == 0:
                continue
            ne = list(e)
            ne[i] -= 1
            out[tuple(ne)] = c * e[i]
        return self._raw(self.nvars, out)

    def eval(self, point: Sequence) -> Fraction:
        if len(point) != self.nvars:
            raise ValueError("point has wrong length")
        pt = [_as_fraction(x) for x in point]
        total = Fraction(0)
        for e, c in self.terms.items():
            v = c
            for x, k in zip(pt, e):
                if k:
                    v *= x**k
            total += v
        return total

    def subs(self, replacements: Sequence["Polynomial"]) -> "Polynomial":
        """Substitute variable i by replacements[i] (full composition)."""
        if len(replacements) != self.nvars:
            raise ValueError("need one replacement per variable")
        nv = replacements[0].nvars
        out = Polynomial.zero(nv)
        for e, c in self.terms.items():
            term = Polynomial.constant(c, nv)
            for r, k in zip(replacements, e):
                for _ in range(k):
                    term = term * r
            out = out + term
        return out

    def scale_vars(self, factors: Sequence["Polynomial | Fraction | int"]) -> "Polynomial":
        """Substitute x_i -> factors[i] * x_i; monomial factors stay cheap."""
        out: dict[tuple, Fraction] = {}
        nv = self.nvars
        fpolys = []
        for f in factors:
            fpolys.append(f if isinstance(f, Polynomial) else Polynomial.constant(f, nv))
        result = Polynomial.zero(nv)
        for e, c in self.terms.items():
            scale = Polynomial.constant(c, nv)
            for f, k in zip(fpolys, e):
                for _ in range(k):
                    scale = scale * f
            result = result + self._raw(nv, {te: tc for te, tc in (scale * Polynomial.monomial(e, 1, nv)).terms.items()})
        return result

    def extend(self, extra: int) -> "Polynomial":
        """Append `extra` fresh variables (exponent 0 everywhere)."""
        return self._raw(
            self.nvars + extra,
            {e + (0,) * extra: c for e, c in self.terms.items()},
        )

    # ------------------------------------------------------------------ #
    # structure

    @property
    def is_zero(self) -> bool:
        return not self.terms

    def degree(self) -> int:
        return max((sum(e) for e in self.terms), default=0)

    def graded_part(self, d: int) -> "Polynomial":
        return self._raw(self.nvars, {e: c for e, c in self.terms.items() if sum(e) == d})

    def coefficient(self, exps: Sequence[int]) -> Fraction:
        return self.terms.get(tuple(exps), Fraction(0))

    # ------------------------------------------------------------------ #
    # serialization: JSON list of (exponent-vector, numerator, denominator)

    def to_json(self) -> str:
        items = sorted(self.terms.items())
        return json.dumps([[list(e), c.numerator, c.denominator] for e, c in items])

    @staticmethod
    def from_json(text: str, nvars: int | None = None) -> "Polynomial":
        data = json.loads(text)
        if not data and nvars is None:
            raise ValueError("nvars required for empty polynomial")
        nv = nvars if nvars is not None else len(data[0][0])
        return Polynomial(nv, {tuple(e): Fraction(num, den) for e, num, den in data})

    def __repr__(self):
        if not self.terms:
            return "0"
        bits = []
        for e, c in sorted(self.terms.items()):
            mono = "*".join(f"x{i}^{k}" if k > 1 else f"x{i}" for i, k in enumerate(e) if k)
            bits.append(f"{c}" + (f"*{mono}" if mono else ""))
        return " + ".join(bits)


def poly_jacobian(polys: Iterable[Polynomial], nactive: int) -> list[list[Polynomial]]:
    """Rows = polynomials, columns = partials w.r.t. the first nactive vars."""
    return [[p.diff(i) for i in range(nactive)] for p in polys]


def poly_hessian(p: Polynomial, point: Sequence, nactive: int) -> list[list[Fraction]]:
    """Exact Hessian matrix of p at a rational point (active vars only)."""
    pt = list(point)
    return [[p.diff(i).diff(j).eval(pt) for j in range(nactive)] for i in range(nactive)]
