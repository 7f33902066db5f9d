"""Oblique projectors and higher-order slow-flow terms via the
parametrization method.

At a hyperbolic graph point the tangent/fast splitting gives the projector
Pi_s = I - N0 (Df0 N0)^-1 Df0. The invariance (conjugacy) equation of the
perturbed slow manifold is solved order by order in eps: at order j the
inhomogeneity G_j is the eps^j coefficient of sum_i eps^i F_i(phi) composed
with the already-computed graph corrections, minus the transport terms
D(phi_l) R_(j-l). Applying the projectors splits G_j into the slow-field
update R_j and the graph update psi_j. All derivatives in rho are carried
by jet arithmetic, so no finite differences enter the main path.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
import sympy as sp

from .errors import ModelError, NumericalError
from .geometry import (
    HYPERBOLICITY_THRESHOLD,
    ChartSplit,
    ManifoldPoint,
    _jet_args,
    compiled,
    implicit_jet,
    solve_graph,
)
from .jets import Jet
from .poly import NumPoly
from .scaling import EpsilonSystem, Factorization

__all__ = [
    "MAX_ORDER",
    "Projectors",
    "ReductionJet",
    "build_projectors",
    "reduced_field_1",
    "parametrize",
    "conjugacy_residual",
    "reduced_field_fn",
]

#: Highest supported expansion order of the slow vector field.
MAX_ORDER = 4


# ----------------------------------------------------------------------
# Projectors
# ----------------------------------------------------------------------

@dataclass(frozen=True)
class Projectors:
    """Oblique projector data at one hyperbolic manifold point."""

    pi_s: np.ndarray        # r x r projector onto the tangent space along N0
    pi_n: np.ndarray        # complementary projector
    dphi0: np.ndarray       # r x k tangent frame of the graph embedding
    dphi0_left: np.ndarray  # k x r chosen left inverse (chart rows)
    df0_right: np.ndarray   # r x 1 Moore-Penrose right inverse of Df0
    n0: np.ndarray          # fast direction at the point
    eigenvalue: complex


def build_projectors(
    fact: Factorization, split: ChartSplit, point: ManifoldPoint
) -> Projectors:
    """Pi_s = I - N0 (Df0 N0)^-1 Df0 and companions at a manifold point."""
    comp = compiled(fact, split)
    args = list(point.point)
    n0 = np.array([p(args) for p in comp.n0], dtype=float)
    df0 = np.array([p(args) for p in comp.df0], dtype=float)
    lam = float(df0 @ n0)
    if abs(lam) <= HYPERBOLICITY_THRESHOLD:
        raise NumericalError(
            f"projector undefined at non-hyperbolic point rho={point.rho}"
        )
    r = split.dim
    k = split.k
    pi_s = np.eye(r) - np.outer(n0, df0) / lam
    pi_n = np.eye(r) - pi_s

    dfdeta = df0[split.eta[0]]
    dphi0 = np.zeros((r, k))
    for j, i in enumerate(split.rho):
        dphi0[i, j] = 1.0
        # implicit-function derivative of the solved coordinate
        dphi0[split.eta[0], j] = -df0[i] / dfdeta
    left = np.zeros((k, r))
    for j, i in enumerate(split.rho):
        left[j, i] = 1.0
    df0_right = (df0 / (df0 @ df0)).reshape(r, 1)
    return Projectors(
        pi_s=pi_s,
        pi_n=pi_n,
        dphi0=dphi0,
        dphi0_left=left,
        df0_right=df0_right,
        n0=n0,
        eigenvalue=complex(lam),
    )


# ----------------------------------------------------------------------
# eps-series with jet coefficients
# ----------------------------------------------------------------------

class _EpsSeries:
    """Truncated polynomial in eps whose coefficients are jets (or floats)."""

    __slots__ = ("coeffs",)

    def __init__(self, coeffs):
        self.coeffs = list(coeffs)

    @classmethod
    def const(cls, value, order):
        return cls([value] + [0.0] * order)

    def __add__(self, other):
        if isinstance(other, _EpsSeries):
            return _EpsSeries([a + b for a, b in zip(self.coeffs, other.coeffs)])
        out = list(self.coeffs)
        out[0] = out[0] + other
        return _EpsSeries(out)

    __radd__ = __add__

    def __mul__(self, other):
        if isinstance(other, _EpsSeries):
            n = len(self.coeffs)
            out = [0.0] * n
            for i, a in enumerate(self.coeffs):
                if isinstance(a, float) and a == 0.0:
                    continue
                for j in range(n - i):
                    b = other.coeffs[j]
                    if isinstance(b, float) and b == 0.0:
                        continue
                    out[i + j] = out[i + j] + a * b
            return _EpsSeries(out)
        return _EpsSeries([c * other for c in self.coeffs])

    __rmul__ = __mul__

    def __pow__(self, n):
        out = _EpsSeries.const(1.0, len(self.coeffs) - 1)
        base = self
        while n:
            if n & 1:
                out = out * base
            base = base * base
            n >>= 1
        return out


class _ReductionCompiled:
    """Numeric F-terms of an eps-system (cached)."""

    def __init__(self, eps_sys: EpsilonSystem):
        syms = eps_sys.chart_syms()
        subs = eps_sys.tilde_values()
        self.system = eps_sys
        self.terms = [
            [NumPoly.from_expr(c, syms, subs) for c in term]
            for term in eps_sys.terms
        ]


_rcomp_cache: dict[int, _ReductionCompiled] = {}


def _reduction_compiled(eps_sys: EpsilonSystem) -> _ReductionCompiled:
    hit = _rcomp_cache.get(id(eps_sys))
    if hit is None or hit.system is not eps_sys:
        hit = _ReductionCompiled(eps_sys)
        _rcomp_cache[id(eps_sys)] = hit
    return hit


# ----------------------------------------------------------------------
# The parametrization method
# ----------------------------------------------------------------------

@dataclass
class ReductionJet:
    """Pointwise slow-manifold and slow-field data at one chart point.

    ``psi[j]`` is the order-j graph correction value and ``r_terms[j-1]``
    the order-j slow-field term (actual field coefficients: the flow is
    d(rho)/dt = sum_j eps^j R_j). Jets carry the rho-derivatives.
    """

    fact: Factorization
    split: ChartSplit
    rho: tuple[float, ...]
    order: int
    psi: list[float]
    psi_jets: list[Jet]
    r_terms: list[np.ndarray]
    r_jets: list[list[Jet]]
    eigenvalues: tuple[complex, ...]
    g_terms: list[np.ndarray] = field(default_factory=list)

    @property
    def manifold_height(self) -> float:
        return self.psi[0]

    def graph_value(self, epsilon: float) -> float:
        """eta-coordinate of the slow manifold: sum_j eps^j psi_j."""
        return sum(epsilon ** j * p for j, p in enumerate(self.psi))

    def first_nonzero_order(self, tol: float = 1e-13) -> Optional[int]:
        for j, rv in enumerate(self.r_terms, start=1):
            if np.max(np.abs(rv)) > tol:
                return j
        return None


def parametrize(
    fact: Factorization,
    split: ChartSplit,
    eps_sys: EpsilonSystem,
    rho: Sequence[float],
    order: int = 1,
    left_inverse: str = "graph",
) -> ReductionJet:
    """Solve the homological equations up to ``order`` at one chart point."""
    if not 1 <= order <= MAX_ORDER:
        raise ModelError(f"order must be in 1..{MAX_ORDER}")
    if left_inverse not in ("graph", "moore-penrose"):
        raise ModelError("left_inverse must be 'graph' or 'moore-penrose'")
    if eps_sys is not fact.system:
        raise ModelError("eps_sys does not match the factorization")

    comp = compiled(fact, split)
    rcomp = _reduction_compiled(eps_sys)
    k, r = split.k, split.dim
    eta_idx = split.eta[0]

    psi0 = implicit_jet(fact, split, rho, order)
    rho_jets = [Jet.var(float(v), j, k, order) for j, v in enumerate(rho)]
    args0 = _jet_args(comp, rho_jets, psi0)

    lam = _as_jet(comp.lambda_at(args0), k, order)
    if abs(lam.value) <= HYPERBOLICITY_THRESHOLD:
        raise NumericalError(f"non-hyperbolic point rho={tuple(rho)}")
    dfdeta = _as_jet(comp.dfdeta_at(args0), k, order)
    df0_jets = [p(args0) for p in comp.df0]
    n0_jets = [p(args0) for p in comp.n0]

    # graph embedding as eps-series of jets, extended order by order
    phi = [_EpsSeries.const(args0[i], order) for i in range(r)]

    psi_jets = [psi0]
    r_jets: list[list[Jet]] = []
    g_values: list[np.ndarray] = []

    for j in range(1, order + 1):
        total = [_EpsSeries.const(0.0, order) for _ in range(r)]
        for i, polys in enumerate(rcomp.terms):
            if i > order:
                break
            for comp_idx, p in enumerate(polys):
                if p.is_zero:
                    continue
                val = p(phi)
                if not isinstance(val, _EpsSeries):
                    val = _EpsSeries.const(val, order)
                shifted = [0.0] * (order + 1)
                for q in range(order + 1 - i):
                    shifted[q + i] = val.coeffs[q]
                total[comp_idx] = total[comp_idx] + _EpsSeries(shifted)

        G = [_as_jet(total[i].coeffs[j], k, order) for i in range(r)]
        # transport terms -D(phi_l) R_(j-l), nonzero only in the eta row
        for l in range(1, j):
            rl = r_jets[j - l - 1]
            for q in range(k):
                G[eta_idx] = G[eta_idx] - psi_jets[l].diff(q) * rl[q]

        w = Jet.const(0.0, k, order)
        for i in range(r):
            w = w + df0_jets[i] * G[i]
        wol = w / lam
        Rj = [G[i] - n0_jets[i] * wol for i in split.rho]
        psij = -(wol / dfdeta)

        r_jets.append(Rj)
        psi_jets.append(psij)
        g_values.append(np.array([g.value for g in G]))
        phi[eta_idx].coeffs[j] = phi[eta_idx].coeffs[j] + psij

    r_terms = [np.array([c.value for c in Rj]) for Rj in r_jets]
    if left_inverse == "moore-penrose":
        point = solve_graph(fact, split, rho)
        proj = build_projectors(fact, split, point)
        left_mp = np.linalg.pinv(proj.dphi0)
        r_terms = [left_mp @ (proj.pi_s @ g) for g in g_values]

    lam_val = complex(lam.value)
    return ReductionJet(
        fact=fact,
        split=split,
        rho=tuple(float(v) for v in rho),
        order=order,
        psi=[p.value for p in psi_jets],
        psi_jets=psi_jets,
        r_terms=r_terms,
        r_jets=r_jets,
        eigenvalues=(lam_val,),
        g_terms=g_values,
    )


def _as_jet(x, nvars, order):
    if isinstance(x, Jet):
        return x
    return Jet.const(float(x), nvars, order)


def reduced_field_1(
    fact: Factorization, split: ChartSplit, rho: Sequence[float]
) -> np.ndarray:
    """Leading slow-field term R_1(rho) = Dphi0^L Pi_s F_1(phi_0(rho))."""
    return parametrize(fact, split, fact.system, rho, order=1).r_terms[0]


def conjugacy_residual(
    jet: ReductionJet, eps_sys: EpsilonSystem, epsilon: float
) -> float:
    """Norm of Dphi(rho,eps)·eps R(rho,eps) - F(phi(rho,eps), eps) with the
    truncated series of the jet."""
    comp = compiled(jet.fact, jet.split)
    rcomp = _reduction_compiled(eps_sys)
    split = jet.split
    r, k = split.dim, split.k

    phi = np.zeros(r)
    for j, i in enumerate(split.rho):
        phi[i] = jet.rho[j]
    phi[split.eta[0]] = jet.graph_value(epsilon)

    dphi = np.zeros((r, k))
    for j, i in enumerate(split.rho):
        dphi[i, j] = 1.0
    for q in range(k):
        dphi[split.eta[0], q] = sum(
            epsilon ** j * jet.psi_jets[j].grad(q) for j in range(jet.order + 1)
        )

    eps_r = np.zeros(k)
    for j, rv in enumerate(jet.r_terms, start=1):
        eps_r += epsilon ** j * rv

    field = np.zeros(r)
    args = list(phi)
    for i, polys in enumerate(rcomp.terms):
        w = epsilon ** i
        for comp_idx, p in enumerate(polys):
            if not p.is_zero:
                field[comp_idx] += w * p(args)

    return float(np.linalg.norm(dphi @ eps_r - field))


def reduced_field_fn(
    fact: Factorization,
    split: ChartSplit,
    eps_sys: EpsilonSystem,
    epsilon: float,
    order: int = 1,
):
    """Callable rho -> sum_j eps^j R_j(rho) for integrating the slow flow.

    Order 1 uses a direct pointwise path (no jets); higher orders run the
    full parametrization at each evaluation.
    """
    comp = compiled(fact, split)
    rcomp = _reduction_compiled(eps_sys)
    if len(rcomp.terms) < 2:
        raise ModelError("eps-system has no perturbation term")

    if order == 1:
        f1 = rcomp.terms[1]

        def field(rho):
            rho = list(map(float, rho))
            eta = comp.closed_form_eta(rho)
            if eta is None:
                eta = solve_graph(fact, split, rho).eta[0]
            args = comp.assemble(rho, eta)
            lam = comp.lambda_at(args)
            g = [p(args) if not p.is_zero else 0.0 for p in f1]
            w = sum(d(args) * gi for d, gi in zip(comp.df0, g))
            return np.array(
                [epsilon * (g[i] - comp.n0[i](args) * w / lam) for i in split.rho]
            )

        return field

    def field(rho):
        jet = parametrize(fact, split, eps_sys, rho, order=order)
        out = np.zeros(split.k)
        for j, rv in enumerate(jet.r_terms, start=1):
            out += epsilon ** j * rv
        return out

    return field
