"""Numeric sparse polynomials compiled from sympy expressions.

These are the evaluation workhorses: they accept floats or jets (anything
supporting +, *, ** with ints), so the same compiled object serves plain
field evaluation, implicit differentiation, and Taylor-coefficient work.
"""

from __future__ import annotations

import sympy as sp


class NumPoly:
    """Sparse polynomial with float coefficients over ``nvars`` variables."""

    __slots__ = ("nvars", "terms")

    def __init__(self, nvars, terms):
        self.nvars = nvars
        self.terms = list(terms)  # (coeff, exponent tuple)

    @classmethod
    def from_expr(cls, expr, syms, subs=None):
        """Compile ``expr`` over the variables ``syms``; any other symbols
        must be bound to numbers through ``subs``."""
        e = sp.expand(expr.subs(subs) if subs else expr)
        if e == 0:
            return cls(len(syms), [])
        poly = sp.Poly(e, *syms)
        terms = []
        for exps, coeff in poly.terms():
            terms.append((float(coeff), tuple(int(k) for k in exps)))
        return cls(len(syms), terms)

    @property
    def is_zero(self):
        return not self.terms

    def __call__(self, args):
        total = 0.0
        for coeff, exps in self.terms:
            term = coeff
            for a, e in zip(args, exps):
                if e == 1:
                    term = term * a
                elif e:
                    term = term * a ** e
            total = total + term
        return total

    def diff(self, index):
        out = []
        for coeff, exps in self.terms:
            e = exps[index]
            if e:
                newexps = tuple(x - 1 if i == index else x for i, x in enumerate(exps))
                out.append((coeff * e, newexps))
        return NumPoly(self.nvars, out)

    def __repr__(self):
        return f"NumPoly({self.nvars} vars, {len(self.terms)} terms)"


def compile_vector(exprs, syms, subs=None):
    """Compile a sequence of expressions into NumPoly objects."""
    return [NumPoly.from_expr(e, syms, subs) for e in exprs]


def vector_fn(polys):
    """Fast float-only evaluator for a compiled polynomial vector.

    Generates specialised source once; used in integration hot loops.
    """
    import numpy as np

    n = len(polys)
    lines = []
    for i, p in enumerate(polys):
        if p.is_zero:
            lines.append("0.0")
            continue
        terms = []
        for coeff, exps in p.terms:
            factors = [repr(coeff)]
            for j, e in enumerate(exps):
                if e == 1:
                    factors.append(f"y[{j}]")
                elif e:
                    factors.append(f"y[{j}]**{e}")
            terms.append("*".join(factors))
        lines.append(" + ".join(terms))
    src = "def _f(y):\n    return np.array([" + ", ".join(lines) + "])\n"
    ns = {"np": np}
    exec(src, ns)
    return ns["_f"]


def jacobian_fn(polys, nvars):
    """Float-only Jacobian evaluator for a compiled polynomial vector."""
    import numpy as np

    rows = [[p.diff(j) for j in range(nvars)] for p in polys]

    def _jac(y):
        J = np.empty((len(polys), nvars))
        for i, row in enumerate(rows):
            for j, p in enumerate(row):
                J[i, j] = p(y)
        return J

    return _jac
