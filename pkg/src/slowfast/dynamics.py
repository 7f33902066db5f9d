"""Trajectory-level machinery: field builders, fast-fiber base points,
substrate/product rates, and full-vs-reduced comparisons."""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
import sympy as sp

from .crn import CrnModel, ReducedSystem, build_rhs, param_symbol
from .errors import ModelError, NumericalError
from .geometry import ChartSplit, compiled
from .integrators import Trajectory
from .poly import compile_vector, jacobian_fn, vector_fn
from .reduction import ReductionJet
from .scaling import Factorization

__all__ = [
    "BasePoint",
    "chart_field",
    "species_field",
    "base_point",
    "substrate_product_pair",
    "one_step_coefficients",
    "select_engine",
    "reconstruct_chart_states",
    "tracking_report",
]

#: Engine heuristic: implicit when eps * |fastest eigenvalue| drops below this.
STIFFNESS_SWITCH = 1e-3


def chart_field(reduced: ReducedSystem, params: dict[str, float]):
    """Numeric (f, jac) pair for the reduced system in its chart coordinates."""
    syms = reduced.chart_syms()
    subs = {param_symbol(k): float(v) for k, v in params.items()}
    polys = compile_vector(list(reduced.rhs), syms, subs)
    f_vec = vector_fn(polys)
    j_vec = jacobian_fn(polys, len(syms))
    return (lambda t, y: f_vec(y)), (lambda t, y: j_vec(y))


def species_field(model: CrnModel, params: dict[str, float]):
    """Numeric (f, jac) pair for the full species-space system dx/dt = S V(x)."""
    syms = model.species_syms()
    subs = {param_symbol(k): float(v) for k, v in params.items()}
    polys = compile_vector(list(build_rhs(model)), syms, subs)
    f_vec = vector_fn(polys)
    j_vec = jacobian_fn(polys, len(syms))
    return (lambda t, y: f_vec(y)), (lambda t, y: j_vec(y))


def select_engine(epsilon: float, fast_eigenvalue: float) -> str:
    """Automatic explicit/implicit choice from the timescale gap."""
    return "implicit" if epsilon * abs(fast_eigenvalue) < STIFFNESS_SWITCH else "explicit"


@dataclass(frozen=True)
class BasePoint:
    """Projection of an initial condition along the fast fibers onto the
    critical manifold (or its corrected graph)."""

    y0: tuple[float, ...]
    yb: tuple[float, ...]
    rho: tuple[float, ...]
    fiber_kind: str  # linear-exact | linear-approx


def _constant_vector(fact: Factorization):
    """N0 as a float vector when it does not depend on the chart point."""
    syms = fact.chart_syms()
    vals = []
    subs = fact.tilde_values()
    for comp in fact.n0:
        if any(sp.degree(comp, v) >= 1 for v in syms):
            return None
        vals.append(float(sp.expand(comp).subs(subs)))
    return np.array(vals)


def base_point(
    fact: Factorization,
    split: ChartSplit,
    y0: Sequence[float],
    epsilon: Optional[float] = None,
    order: int = 0,
    box_tol: float = 1e-9,
) -> BasePoint:
    """Intersect the fast fiber through ``y0`` with the critical manifold.

    With constant N0 the linear fiber is the exact nonlinear fiber and the
    intersection is found by a 1-D Newton solve along y0 + t N0. A
    nonconstant N0 falls back to the fiber direction frozen at y0
    (linear-approx, with a warning). For order >= 1 the solved coordinate is
    corrected to the perturbed graph eta = sum eps^j psi_j(rho_b), the exact
    base point for fibers aligned with the eta direction.
    """
    comp = compiled(fact, split)
    y0 = np.array([float(v) for v in y0])
    n0 = _constant_vector(fact)
    if n0 is None:
        kind = "linear-approx"
        warnings.warn(
            "N0 varies along the manifold: base point uses the frozen fiber "
            "direction at y0", stacklevel=2)
        n0 = np.array([p(list(y0)) for p in comp.n0])
    else:
        kind = "linear-exact"
    n0 = n0 / np.linalg.norm(n0)

    def g(t):
        return comp.f0_at(list(y0 + t * n0))

    def dg(t):
        args = list(y0 + t * n0)
        return sum(comp.df0[i](args) * n0[i] for i in range(len(n0)))

    roots = []
    for seed in (0.0, 0.2, -0.2, 0.5, -0.5, 1.0, -1.0):
        t = seed
        ok = True
        for _ in range(60):
            gt = g(t)
            if abs(gt) < 1e-13:
                break
            d = dg(t)
            if d == 0.0:
                ok = False
                break
            t -= gt / d
        else:
            ok = False
        if ok and abs(g(t)) < 1e-12:
            if not any(abs(t - r) < 1e-9 for r in roots):
                roots.append(t)

    lo, hi = -box_tol, 1.0 + box_tol
    candidates = []
    for t in roots:
        yb = y0 + t * n0
        if np.all(yb >= lo) and np.all(yb <= hi):
            candidates.append((abs(t), yb))
    if not candidates:
        raise NumericalError("no fiber intersection with the manifold inside the box")
    yb = min(candidates)[1]
    rho = tuple(yb[i] for i in split.rho)

    if order >= 1:
        if epsilon is None:
            raise ModelError("epsilon required for a corrected base point")
        from .reduction import parametrize

        jet = parametrize(fact, split, fact.system, list(rho), order=order)
        yb = yb.copy()
        yb[split.eta[0]] = jet.graph_value(epsilon)
    return BasePoint(
        y0=tuple(y0), yb=tuple(float(v) for v in yb), rho=rho, fiber_kind=kind
    )


def _mm_context(jet: ReductionJet, epsilon: float):
    fact = jet.fact
    if tuple(fact.chart) != ("s", "c") or jet.split.rho != (0,):
        raise ModelError("substrate/product rates require the MM chart over s")
    beta = fact.system.scaling.param_value("beta", epsilon)
    c0_prime = jet.psi_jets[0].grad(0)
    return beta, c0_prime


def substrate_product_pair(
    jet: ReductionJet, epsilon: float, order: Optional[int] = None
) -> tuple[float, float]:
    """Leading-order substrate depletion and product formation rates.

    ds/dt = eps^j R_j(s) (negative for a depleting substrate) and
    dp/dt = -(beta c0'(s) + 1) ds/dt, with j the first nonzero slow-field
    order (or the requested one).
    """
    beta, c0p = _mm_context(jet, epsilon)
    j = order if order is not None else jet.first_nonzero_order()
    if j is None:
        raise NumericalError(
            f"slow flow vanishes through order {jet.order}: "
            "flow slower than computed order"
        )
    rj = float(jet.r_terms[j - 1][0])
    ds = epsilon ** j * rj
    dp = -(beta * c0p + 1.0) * ds
    return ds, dp


def one_step_coefficients(
    jet: ReductionJet, epsilon: float, s: float, order: Optional[int] = None
) -> tuple[float, float]:
    """Effective one-step network rates k+(s), l+(s) of the reduced flow.

    k+ s is the product formation rate and (k+ - l+) s the substrate
    depletion rate; undefined at s = 0.
    """
    if s == 0:
        raise ModelError("one-step coefficients are undefined at s = 0")
    beta, c0p = _mm_context(jet, epsilon)
    j = order if order is not None else jet.first_nonzero_order()
    if j is None:
        raise NumericalError("slow flow vanishes through the computed order")
    rj_dep = -float(jet.r_terms[j - 1][0])  # depletion-positive form
    k_plus = epsilon ** j * (beta * c0p + 1.0) * rj_dep / s
    l_plus = epsilon ** j * beta * c0p * rj_dep / s
    return k_plus, l_plus


def reconstruct_chart_states(
    fact: Factorization,
    split: ChartSplit,
    rho_states: "np.ndarray",
    epsilon: float,
    order: int = 1,
):
    """Lift reduced-flow states to the full chart: the solved coordinate is
    rebuilt from the corrected graph eta = sum_j eps^j psi_j(rho)."""
    from .reduction import parametrize

    rho_states = np.atleast_2d(np.asarray(rho_states, dtype=float))
    n, k = rho_states.shape
    out = np.empty((n, split.dim))
    for i, rho in enumerate(rho_states):
        jet = parametrize(fact, split, fact.system, list(rho), order=order)
        for j, idx in enumerate(split.rho):
            out[i, idx] = rho[j]
        out[i, split.eta[0]] = jet.graph_value(epsilon)
    return out


def tracking_report(
    full: Trajectory,
    reduced: Trajectory,
    component: int,
    reduced_component: int,
    epsilon: float,
    order: int,
    n_samples: int = 400,
) -> dict:
    """Sup- and L2-norm discrepancy of one coordinate on a uniform grid."""
    t0 = max(full.times[0], reduced.times[0])
    t1 = min(full.times[-1], reduced.times[-1])
    ts = np.linspace(t0, t1, n_samples)
    yf = full.sample(ts)[:, component]
    yr = reduced.sample(ts)[:, reduced_component]
    diff = yf - yr
    return {
        "sup_error": float(np.max(np.abs(diff))),
        "l2_error": float(np.sqrt(np.trapezoid(diff ** 2, ts) / (t1 - t0))),
        "epsilon": float(epsilon),
        "order": int(order),
    }
