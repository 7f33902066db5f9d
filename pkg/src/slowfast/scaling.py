"""Asymptotic parameter scalings and the resulting perturbation structure.

Each dimensionless parameter is declared small (~eps), order one, or large
(~1/eps), with a positive O(1) stand-in ("tilde value"). Substituting the
scalings into the reduced vector field and collecting powers of eps yields a
finite expansion F(y, eps) = sum eps^i F_i(y). If negative powers appear,
time is rescaled by eps^m so the leading term enters at order zero.

The leading term is then examined for singular-perturbation structure: a
positive-dimensional zero set, detected through a common polynomial factor
of the components, and factored as F_0 = N_0 f_0 (one factorisation per
branch of the critical set).
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Optional, Sequence

import sympy as sp

from .crn import ReducedSystem, param_symbol, species_symbol
from .errors import ModelError

__all__ = [
    "SMALL",
    "ONE",
    "LARGE",
    "CATEGORIES",
    "ScalingAssignment",
    "EpsilonSystem",
    "Factorization",
    "SingularityVerdict",
    "expand",
    "detect_singular",
    "factorize",
    "load_scaling_json",
]

SMALL, ONE, LARGE = "small", "one", "large"
CATEGORIES = (SMALL, ONE, LARGE)

#: eps exponent contributed by each category.
_CAT_POWER = {SMALL: 1, ONE: 0, LARGE: -1}

_EPS = sp.Symbol("_eps", positive=True)


@dataclass(frozen=True)
class ScalingAssignment:
    """Category and O(1) stand-in value for every parameter."""

    categories: dict[str, str]
    tilde: dict[str, float]
    epsilon: Optional[float] = None

    def __post_init__(self):
        for p, cat in self.categories.items():
            if cat not in CATEGORIES:
                raise ModelError(f"unknown category {cat!r} for parameter {p!r}")
        for p, v in self.tilde.items():
            if not float(v) > 0:
                raise ModelError(f"tilde value for {p!r} must be positive")

    def category(self, param: str) -> str:
        return self.categories[param]

    def tilde_value(self, param: str) -> float:
        try:
            return float(self.tilde[param])
        except KeyError:
            raise ModelError(f"missing tilde value for parameter {param!r}") from None

    def param_value(self, param: str, epsilon: float) -> float:
        """Actual parameter value mu = tilde * eps^(+1|0|-1)."""
        return self.tilde_value(param) * epsilon ** _CAT_POWER[self.categories[param]]

    def numeric_params(self, epsilon: float) -> dict[str, float]:
        return {p: self.param_value(p, epsilon) for p in self.categories}


def tilde_symbol(param: str, category: str) -> sp.Symbol:
    """Symbol standing for the O(1) part of a parameter (scaled parameters
    get a decorated name, order-one parameters keep their own)."""
    if category == ONE:
        return param_symbol(param)
    return sp.Symbol(param + "_t", positive=True)


@dataclass(frozen=True)
class EpsilonSystem:
    """Finite eps-power expansion of a reduced vector field.

    ``terms[i]`` is F_i as a polynomial vector in the chart coordinates with
    coefficients in the tilde parameters; ``time_shift`` is the number m of
    dt = eps^m dt' rescalings applied so that F_0 is nonzero.
    """

    reduced: ReducedSystem
    scaling: ScalingAssignment
    chart: tuple[str, ...]
    terms: tuple[tuple[sp.Expr, ...], ...]
    time_shift: int

    @property
    def order(self) -> int:
        """Highest eps power J present."""
        return len(self.terms) - 1

    @property
    def dim(self) -> int:
        return len(self.chart)

    def chart_syms(self) -> list[sp.Symbol]:
        return [species_symbol(s) for s in self.chart]

    def f0(self) -> tuple[sp.Expr, ...]:
        return self.terms[0]

    def tilde_values(self) -> dict[sp.Symbol, float]:
        """Numeric bindings for every tilde symbol appearing in the terms."""
        out = {}
        for p, cat in self.scaling.categories.items():
            out[tilde_symbol(p, cat)] = self.scaling.tilde_value(p)
        return out

    def term_matrix(self, i: int) -> sp.Matrix:
        return sp.Matrix(list(self.terms[i]))

    def evaluate(self, y: Sequence[float], epsilon: float) -> list[float]:
        """Value of sum_i eps^i F_i(y) at numeric chart point y."""
        subs = dict(zip(self.chart_syms(), y))
        subs.update(self.tilde_values())
        total = [0.0] * self.dim
        for i, term in enumerate(self.terms):
            w = epsilon ** i
            for j, comp in enumerate(term):
                total[j] += w * float(comp.subs(subs))
        return total

    def reconstructed(self, y: Sequence[float], epsilon: float) -> list[float]:
        """Original reduced field at mu = scaled values: eps^-m * sum eps^i F_i."""
        vals = self.evaluate(y, epsilon)
        scale = epsilon ** (-self.time_shift)
        return [v * scale for v in vals]


def _laurent_coeffs(expr: sp.Expr) -> dict[int, sp.Expr]:
    """Coefficients of the (finite) Laurent expansion of ``expr`` in _eps."""
    out: dict[int, sp.Expr] = {}
    expr = sp.expand(expr)
    if expr == 0:
        return out
    for term in sp.Add.make_args(expr):
        power = term.as_powers_dict().get(_EPS, 0)
        k = int(power)
        out[k] = out.get(k, sp.Integer(0)) + term / _EPS ** k
    return {k: sp.expand(v) for k, v in out.items() if sp.expand(v) != 0}


def expand(reduced: ReducedSystem, scaling: ScalingAssignment) -> EpsilonSystem:
    """Substitute the scaling into the reduced field and collect eps powers."""
    params = reduced.param_names()
    for p in params:
        if p not in scaling.categories:
            raise ModelError(f"no category assigned to parameter {p!r}")

    subs = {}
    for p in params:
        cat = scaling.categories[p]
        subs[param_symbol(p)] = tilde_symbol(p, cat) * _EPS ** _CAT_POWER[cat]

    comps = [sp.expand(reduced.rhs[i].subs(subs)) for i in range(reduced.dim)]
    coeffs = [_laurent_coeffs(c) for c in comps]
    powers = [k for c in coeffs for k in c]
    if not powers:
        raise ModelError("vector field vanishes identically: not a perturbation problem")
    lo, hi = min(powers), max(powers)
    m = max(0, -lo)
    terms = []
    for i in range(lo + m, hi + m + 1):
        terms.append(tuple(c.get(i - m, sp.Integer(0)) for c in coeffs))
    return EpsilonSystem(
        reduced=reduced,
        scaling=scaling,
        chart=reduced.chart,
        terms=tuple(terms),
        time_shift=m,
    )


@dataclass(frozen=True)
class SingularityVerdict:
    singular: bool
    k: Optional[int] = None          # dimension of the critical set
    codim: Optional[int] = None
    common_factor: Optional[sp.Expr] = None

    def __bool__(self):
        return self.singular


def _chart_degree(expr: sp.Expr, chart_syms) -> int:
    if expr == 0:
        return -1
    return sp.Poly(sp.together(expr), *chart_syms).total_degree()


def _chart_gcd(comps, chart_syms) -> sp.Expr:
    """GCD of the components as polynomials in the chart variables (the
    parameters live in the coefficient field), denominators cleared."""
    polys = [sp.Poly(sp.together(c), *chart_syms) for c in comps]
    g = polys[0]
    for p in polys[1:]:
        g = g.gcd(p)
    num, _ = sp.fraction(sp.together(g.as_expr()))
    return sp.expand(num)


def detect_singular(eps: EpsilonSystem) -> SingularityVerdict:
    """Decide whether {F_0 = 0} contains a positive-dimensional component.

    Criterion: some component vanishes identically, or the nonzero
    components share a nonconstant polynomial factor (in the chart
    variables, over the field of tilde parameters).
    """
    chart_syms = eps.chart_syms()
    comps = [sp.expand(c) for c in eps.f0()]
    nonzero = [c for c in comps if c != 0]
    if not nonzero:
        raise ModelError("F0 vanishes identically")
    g = _chart_gcd(nonzero, chart_syms)
    if _chart_degree(g, chart_syms) >= 1:
        r = eps.dim
        return SingularityVerdict(True, k=r - 1, codim=1, common_factor=g)
    return SingularityVerdict(False)


@dataclass(frozen=True)
class Factorization:
    """One branch of the layer-problem structure F_0 = N_0 f_0.

    For reducible critical sets, the sibling branches are absorbed into N_0;
    for a branch cut out by a quadratic (in one chart variable), root_sign
    selects the solution branch. ``curves`` lists every irreducible branch
    polynomial of the configuration, shared across the set.
    """

    system: EpsilonSystem
    n0: tuple[sp.Expr, ...]
    f0: sp.Expr
    branch_id: str
    curves: tuple[sp.Expr, ...]
    degenerate: bool = False
    root_sign: Optional[int] = None

    @property
    def chart(self) -> tuple[str, ...]:
        return self.system.chart

    def chart_syms(self) -> list[sp.Symbol]:
        return self.system.chart_syms()

    def n0_matrix(self) -> sp.Matrix:
        return sp.Matrix(list(self.n0))

    def df0(self) -> tuple[sp.Expr, ...]:
        syms = self.chart_syms()
        return tuple(sp.expand(sp.diff(self.f0, v)) for v in syms)

    def eigen_expr(self) -> sp.Expr:
        """Nontrivial eigenvalue Df_0 N_0 as a polynomial (codim 1)."""
        return sp.expand(sum(d * n for d, n in zip(self.df0(), self.n0)))

    def tilde_values(self) -> dict[sp.Symbol, float]:
        return self.system.tilde_values()


def _vanishes_on_branch(expr: sp.Expr, f0: sp.Expr, chart_syms) -> bool:
    expr = sp.expand(expr)
    if expr == 0:
        return True
    _, rem = sp.div(expr, sp.expand(f0), *chart_syms)
    return sp.expand(rem) == 0


def _canonical_sign(n0_vec, f0, tilde_vals, chart_syms):
    """Flip (N_0, f_0) so the last nonzero N_0 entry is positive at the
    tilde values (sampled at an interior chart point)."""
    probe = {v: 0.37 + 0.11 * i for i, v in enumerate(chart_syms)}
    probe.update(tilde_vals)
    for comp in reversed(n0_vec):
        if sp.expand(comp) == 0:
            continue
        val = float(comp.subs(probe))
        if val < 0:
            return [sp.expand(-c) for c in n0_vec], sp.expand(-f0)
        break
    return [sp.expand(c) for c in n0_vec], sp.expand(f0)


def factorize(eps: EpsilonSystem) -> list[Factorization]:
    """All branch factorisations F_0 = N_0 f_0 of a singular configuration."""
    verdict = detect_singular(eps)
    if not verdict:
        raise ModelError("leading-order term has no positive-dimensional zero set")
    chart_syms = eps.chart_syms()
    tilde_vals = eps.tilde_values()
    comps = [sp.expand(c) for c in eps.f0()]
    g = verdict.common_factor
    base = [sp.cancel(c / g) for c in comps]

    _, factors = sp.factor_list(g)
    curves = tuple(
        sp.expand(q) for q, mult in factors if _chart_degree(q, chart_syms) >= 1
    )

    out = []
    for q in curves:
        cofactor = sp.cancel(g / q)
        n0 = [sp.expand(b * cofactor) for b in base]
        n0, q_signed = _canonical_sign(n0, q, tilde_vals, chart_syms)
        lam = sum(sp.diff(q_signed, v) * n for v, n in zip(chart_syms, n0))
        degenerate = _vanishes_on_branch(lam, q_signed, chart_syms)
        quad_var = _quadratic_variable(q_signed, chart_syms)
        if quad_var is not None:
            for sign, tag in ((-1, "-sqrt"), (1, "+sqrt")):
                out.append(
                    Factorization(
                        system=eps,
                        n0=tuple(n0),
                        f0=q_signed,
                        branch_id=f"{sp.sstr(q_signed)}[{tag}]",
                        curves=curves,
                        degenerate=degenerate,
                        root_sign=sign,
                    )
                )
        else:
            out.append(
                Factorization(
                    system=eps,
                    n0=tuple(n0),
                    f0=q_signed,
                    branch_id=sp.sstr(q_signed),
                    curves=curves,
                    degenerate=degenerate,
                )
            )
    return out


def _quadratic_variable(f0: sp.Expr, chart_syms) -> Optional[sp.Symbol]:
    """Chart variable in which f0 is an honest quadratic, if any."""
    for v in chart_syms:
        try:
            d = sp.Poly(f0, v).degree()
        except sp.PolynomialError:
            continue
        if d == 2:
            return v
    return None


def load_scaling_json(path: str, params: Sequence[str]) -> tuple[ScalingAssignment, float]:
    """Read a scaling assignment file.

    Schema: {"epsilon": number, "categories": {param: "small"|"one"|"large"},
             "tilde": {param: number}}
    """
    try:
        with open(path) as fh:
            data = json.load(fh)
    except OSError as exc:
        raise ModelError(f"cannot read scaling file {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ModelError(f"scaling file {path} is not valid JSON: {exc}") from exc
    try:
        categories = dict(data["categories"])
        tilde = {k: float(v) for k, v in data.get("tilde", {}).items()}
        epsilon = float(data["epsilon"])
    except (KeyError, TypeError, ValueError) as exc:
        raise ModelError(f"malformed scaling file {path}: {exc}") from exc
    for p in params:
        if p not in categories:
            raise ModelError(f"scaling file {path} misses category for {p!r}")
        if p not in tilde:
            raise ModelError(f"scaling file {path} misses tilde value for {p!r}")
    if epsilon <= 0:
        raise ModelError("epsilon must be positive")
    return ScalingAssignment(categories=categories, tilde=tilde, epsilon=epsilon), epsilon
