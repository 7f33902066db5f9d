"""Critical-manifold geometry: graph solving, normal hyperbolicity,
fast-fiber orientation, and the taxonomy of manifold shapes.

The critical set of a branch factorisation is solved as a graph eta(rho)
over a chart split, by damped Newton iteration (affine and quadratic
branches are seeded in closed form). Normal hyperbolicity is judged
pointwise from the single nontrivial eigenvalue Df_0 N_0; classification of
the manifold shape is a symbolic template match on the branch polynomials,
so the verdict holds configuration-wide.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import sympy as sp

from .errors import ModelError, NumericalError
from .jets import Jet
from .poly import NumPoly
from .scaling import Factorization

__all__ = [
    "HYPERBOLICITY_THRESHOLD",
    "ChartSplit",
    "ManifoldPoint",
    "GeometryClass",
    "default_split",
    "solve_graph",
    "implicit_jet",
    "classify_fibers",
    "classify_form",
    "classify_geometry",
    "branch_verdict",
]

#: |Re lambda| below this counts as loss of normal hyperbolicity (pointwise).
HYPERBOLICITY_THRESHOLD = 1e-8

_NEWTON_MAX_ITER = 50
_NEWTON_TOL = 1e-12


@dataclass(frozen=True)
class ChartSplit:
    """Partition of the chart coordinates into manifold chart (rho) and
    solved (eta) indices."""

    rho: tuple[int, ...]
    eta: tuple[int, ...]

    def __post_init__(self):
        if set(self.rho) & set(self.eta):
            raise ModelError("rho and eta indices overlap")
        n = len(self.rho) + len(self.eta)
        if set(self.rho) | set(self.eta) != set(range(n)):
            raise ModelError("rho and eta must partition the chart coordinates")

    @property
    def k(self) -> int:
        return len(self.rho)

    @property
    def dim(self) -> int:
        return len(self.rho) + len(self.eta)


def default_split(fact: Factorization) -> ChartSplit:
    """Solve for the last chart coordinate that f_0 actually depends on."""
    syms = fact.chart_syms()
    depends = [i for i, v in enumerate(syms) if sp.degree(fact.f0, v) >= 1]
    if not depends:
        raise ModelError("f0 does not depend on any chart coordinate")
    eta = depends[-1]
    rho = tuple(i for i in range(len(syms)) if i != eta)
    return ChartSplit(rho=rho, eta=(eta,))


@dataclass(frozen=True)
class ManifoldPoint:
    """A solved point on a critical-manifold branch with its stability data."""

    rho: tuple[float, ...]
    eta: tuple[float, ...]
    point: tuple[float, ...]  # full chart coordinates
    eigenvalues: tuple[complex, ...]
    hyperbolic: bool
    attracting: bool
    residual: float


class _Compiled:
    """Numeric kernels of a branch factorisation (cached per Factorization)."""

    def __init__(self, fact: Factorization, split: ChartSplit):
        syms = fact.chart_syms()
        if split.dim != len(syms):
            raise ModelError("chart split does not match chart dimension")
        subs = fact.tilde_values()
        self.fact = fact
        self.split = split
        self.syms = syms
        self.f0 = NumPoly.from_expr(fact.f0, syms, subs)
        self.df0 = [NumPoly.from_expr(sp.diff(fact.f0, v), syms, subs) for v in syms]
        self.n0 = [NumPoly.from_expr(c, syms, subs) for c in fact.n0]
        eta_sym = syms[split.eta[0]]
        poly = sp.Poly(fact.f0, eta_sym)
        self.eta_degree = poly.degree()
        # coefficients of f0 as a polynomial in eta, highest first
        self.eta_coeffs = [
            NumPoly.from_expr(c, syms, subs) for c in poly.all_coeffs()
        ]

    def f0_at(self, args):
        return self.f0(args)

    def dfdeta_at(self, args):
        return self.df0[self.split.eta[0]](args)

    def lambda_at(self, args):
        return sum(d(args) * n(args) for d, n in zip(self.df0, self.n0))

    def assemble(self, rho, eta):
        args = [0.0] * self.split.dim
        for i, v in zip(self.split.rho, rho):
            args[i] = v
        args[self.split.eta[0]] = eta
        return args

    def closed_form_eta(self, rho) -> Optional[float]:
        """Affine or quadratic solution in eta, if available."""
        args = self.assemble(rho, 0.0)
        coeffs = [c(args) for c in self.eta_coeffs]
        if self.eta_degree == 1:
            a, b = coeffs
            if a == 0.0:
                return None
            return -b / a
        if self.eta_degree == 2:
            a, b, c = coeffs
            disc = b * b - 4.0 * a * c
            if disc < 0.0 or a == 0.0:
                return None
            sign = self.fact.root_sign or -1
            return (-b + sign * disc ** 0.5) / (2.0 * a)
        return None


_compiled_cache: dict[tuple[int, tuple[int, ...], tuple[int, ...]], _Compiled] = {}


def compiled(fact: Factorization, split: ChartSplit) -> _Compiled:
    key = (id(fact), split.rho, split.eta)
    hit = _compiled_cache.get(key)
    if hit is None or hit.fact is not fact:
        hit = _Compiled(fact, split)
        _compiled_cache[key] = hit
    return hit


def solve_graph(
    fact: Factorization,
    split: ChartSplit,
    rho: Sequence[float],
    eta_guess: Optional[float] = None,
) -> ManifoldPoint:
    """Newton solve of f_0(rho, eta) = 0 for eta, with stability data."""
    comp = compiled(fact, split)
    rho = [float(v) for v in rho]

    if eta_guess is None:
        eta = comp.closed_form_eta(rho)
        if eta is None:
            # coarse scan over the physical box
            grid = [i / 40.0 for i in range(41)]
            eta = min(grid, key=lambda g: abs(comp.f0_at(comp.assemble(rho, g))))
    else:
        eta = float(eta_guess)

    res = abs(comp.f0_at(comp.assemble(rho, eta)))
    for _ in range(_NEWTON_MAX_ITER):
        if res <= _NEWTON_TOL:
            break
        args = comp.assemble(rho, eta)
        d = comp.dfdeta_at(args)
        if d == 0.0:
            raise NumericalError(
                f"graph property lost at rho={rho}: singular df0/deta"
            )
        step = comp.f0_at(args) / d
        new_eta, new_res = eta, res
        damp = 1.0
        for _ in range(12):
            trial = eta - damp * step
            trial_res = abs(comp.f0_at(comp.assemble(rho, trial)))
            if trial_res < res:
                new_eta, new_res = trial, trial_res
                break
            damp *= 0.5
        if new_res >= res:
            raise NumericalError(f"Newton stalled at rho={rho} (residual {res:.3e})")
        eta, res = new_eta, new_res
    if res > _NEWTON_TOL:
        raise NumericalError(
            f"Newton did not reach residual {_NEWTON_TOL} at rho={rho} (got {res:.3e})"
        )

    args = comp.assemble(rho, eta)
    lam = comp.lambda_at(args)
    eigs = (complex(lam),)
    hyperbolic = abs(lam) > HYPERBOLICITY_THRESHOLD
    return ManifoldPoint(
        rho=tuple(rho),
        eta=(eta,),
        point=tuple(args),
        eigenvalues=eigs,
        hyperbolic=hyperbolic,
        attracting=bool(lam < 0),
        residual=res,
    )


def implicit_jet(
    fact: Factorization,
    split: ChartSplit,
    rho: Sequence[float],
    order: int,
) -> Jet:
    """Jet of the implicit graph eta = psi0(rho), to the given order.

    The jet's coefficients are Taylor coefficients; derivative values are
    available through Jet.derivative / Jet.grad.
    """
    if order < 0:
        raise ModelError("order must be nonnegative")
    point = solve_graph(fact, split, rho)
    comp = compiled(fact, split)
    k = split.k
    rho_jets = [Jet.var(v, j, k, order) for j, v in enumerate(point.rho)]
    eta = Jet.const(point.eta[0], k, order)
    # Newton in jet arithmetic: quadratic convergence in attained jet order
    for _ in range(max(1, order.bit_length() + 2)):
        args = _jet_args(comp, rho_jets, eta)
        eta = eta - comp.f0(args) / comp.dfdeta_at(args)
    return eta


def _jet_args(comp: _Compiled, rho_jets, eta_jet):
    args = [None] * comp.split.dim
    for j, i in enumerate(comp.split.rho):
        args[i] = rho_jets[j]
    args[comp.split.eta[0]] = eta_jet
    return args


def classify_fibers(fact: Factorization) -> str:
    """Fast-fiber orientation for planar charts: S vertical, R horizontal,
    T otherwise."""
    if len(fact.chart) != 2:
        return "unclassified"
    first, second = (sp.expand(c) for c in fact.n0)
    if first == 0:
        return "S"
    if second == 0:
        return "R"
    return "T"


@dataclass(frozen=True)
class GeometryClass:
    """Joint fiber-orientation and manifold-shape classification."""

    fiber_class: str
    form: str
    metadata: dict = field(default_factory=dict)


def _positive_at_probe(expr: sp.Expr, tilde_vals, s_sym) -> bool:
    probe = {s_sym: 0.37}
    probe.update(tilde_vals)
    return float(expr.subs(probe)) > 0


def _classify_curve(q: sp.Expr, s_sym, c_sym, tilde_vals):
    """One irreducible branch polynomial -> (kind, metadata)."""
    q = sp.expand(q)
    deg_c = sp.degree(q, c_sym)
    deg_s = sp.degree(q, s_sym)
    if deg_c == 2:
        a = q.coeff(c_sym, 2)
        return "quad", {
            "lead": a,
            "h1": sp.expand(-q.coeff(c_sym, 1)),
            "h2": sp.expand(q.coeff(c_sym, 1) ** 2 - 4 * a * q.coeff(c_sym, 0)),
        }
    if deg_c == 0:
        if deg_s != 1:
            return "unknown", {}
        a, b = q.coeff(s_sym, 1), q.coeff(s_sym, 0)
        return "vline", {"s_star": sp.simplify(-b / a)}
    if deg_c != 1:
        return "unknown", {}
    # q = a(s) c + b(s)
    a = sp.expand(q.coeff(c_sym, 1))
    b = sp.expand(q - a * c_sym)
    if s_sym not in a.free_symbols:
        sol = sp.cancel(-b / a)
        if s_sym not in sol.free_symbols:
            h = sp.simplify(sol)
            if h == 0:
                return "c0", {}
            if h == 1:
                return "c1", {}
            return "hline", {"height": h}
        if sp.degree(sol, s_sym) == 1:
            return "slant", {"c_of_s": sol}
        return "unknown", {}
    # genuine hyperbola c = A(s)/B(s)
    c_sol = sp.cancel(-b / a)
    num, den = sp.fraction(c_sol)
    num, den = sp.expand(num), sp.expand(den)
    if not _positive_at_probe(den, tilde_vals, s_sym):
        num, den = sp.expand(-num), sp.expand(-den)
    delta_big = sp.simplify(den - num)
    if delta_big == 0 or s_sym in delta_big.free_symbols:
        return "unknown", {}
    at_zero = sp.simplify(num.subs(s_sym, 0))
    if at_zero == 0:
        return "form1", {"Delta": delta_big, "c_of_s": c_sol}
    return "form4", {
        "Delta": delta_big,
        "delta0": at_zero,
        "g": sp.expand(num - at_zero),
        "c_of_s": c_sol,
    }


def classify_geometry(facts: Sequence[Factorization]) -> GeometryClass:
    """Classify a singular configuration from all its branch factorisations."""
    if not facts:
        raise ModelError("no factorizations supplied")
    fact = facts[0]
    fiber = classify_fibers(fact)
    if len(fact.chart) != 2:
        return GeometryClass(fiber_class=fiber, form="unclassified", metadata={})
    s_sym, c_sym = fact.chart_syms()
    tilde_vals = fact.tilde_values()

    kinds = []
    meta: dict = {}
    for q in fact.curves:
        kind, m = _classify_curve(q, s_sym, c_sym, tilde_vals)
        kinds.append(kind)
        meta.update(m)
    key = tuple(sorted(kinds))

    form = "unclassified"
    if key == ("form1",):
        form = "1"
    elif key == ("form4",):
        form = "4"
    elif key == ("c0",):
        form = "2b"
    elif key == ("c1",):
        form = "5c"
    elif key == ("c1", "vline"):
        form = "2a"
    elif key == ("quad",):
        form = "3"
    elif key == ("c1", "slant"):
        form = "5a"
    elif key == ("c0", "c1"):
        form = "5b"
    meta["curve_kinds"] = key
    return GeometryClass(fiber_class=fiber, form=form, metadata=meta)


def classify_form(facts) -> tuple[str, dict]:
    """Manifold-shape template match (accepts one branch or the full set)."""
    if isinstance(facts, Factorization):
        facts = [facts]
    g = classify_geometry(list(facts))
    return g.form, g.metadata


def branch_verdict(fact: Factorization, ngrid: int = 21) -> str:
    """Stability verdict of one branch, sampled on a closed-box grid.

    Returns attracting | repelling | loses-nh | degenerate | outside-box.
    The grid includes the box boundary, so endpoint losses of normal
    hyperbolicity are caught.
    """
    if fact.degenerate:
        return "degenerate"
    split = default_split(fact)
    comp = compiled(fact, split)
    if split.k != 1:
        raise ModelError("branch sampling implemented for planar charts only")
    lams = []
    lams_any = []
    for i in range(ngrid):
        r = i / (ngrid - 1)
        eta = comp.closed_form_eta([r])
        if eta is None:
            continue
        lam = comp.lambda_at(comp.assemble([r], eta))
        lams_any.append(lam)
        if -1e-9 <= eta <= 1 + 1e-9:
            lams.append(lam)
    if not lams:
        # branch lives outside the physical box: judge it on its own range
        lams = lams_any
    if not lams:
        return "outside-box"
    if all(l < -HYPERBOLICITY_THRESHOLD for l in lams):
        return "attracting"
    if all(l > HYPERBOLICITY_THRESHOLD for l in lams):
        return "repelling"
    return "loses-nh"
