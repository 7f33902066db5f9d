"""Independent oracle: order-by-order series solution of the invariance
equation, in pure sympy.

Given the eps-expansion F(y, eps) = sum eps^i F_i over a planar chart
(rho, eta) and a leading graph eta0(rho), substitute the ansatz
eta = sum eps^j eta_j(rho) into the invariance identity

    F_eta(rho, eta) = (d eta / d rho) * F_rho(rho, eta)

and solve the eps^j coefficient (linear in eta_j) for each correction; the
slow-field terms are the eps coefficients of F_rho on the solved graph.
No projectors, factorizations, or jets are involved, so this provides an
independent check of the parametrization engine.
"""

from __future__ import annotations

import sympy as sp

_E = sp.Symbol("_E")


def series_reduction(terms_rho, terms_eta, rho, eta, eta0, order):
    """Return (eta_corrections, slow_terms) up to the requested order.

    terms_rho/terms_eta: eps-coefficients of the two field components, as
    sympy expressions in (rho, eta). eta0: leading graph solution in rho.
    slow_terms[j-1] is the eps^j coefficient of d(rho)/dt on the graph.
    """
    w = sp.Dummy("w")
    etas = [sp.together(eta0)]

    def field_on(graph, comp_terms, trunc):
        total = sp.Integer(0)
        for i, expr in enumerate(comp_terms):
            if i > trunc:
                break
            total += _E ** i * expr.subs(eta, graph)
        return sp.expand(total)

    for j in range(1, order + 1):
        graph = sum(_E ** l * etas[l] for l in range(j)) + _E ** j * w
        f_rho = field_on(graph, terms_rho, j)
        f_eta = field_on(graph, terms_eta, j)
        dgraph = sp.diff(graph, rho)
        residual = sp.expand(f_eta - dgraph * f_rho)
        coeff_j = residual.coeff(_E, j)
        sol = sp.solve(coeff_j, w)
        if len(sol) != 1:
            raise RuntimeError(f"series solve at order {j} returned {sol}")
        etas.append(sp.together(sp.cancel(sol[0])))

    graph = sum(_E ** l * etas[l] for l in range(order + 1))
    f_rho = field_on(graph, terms_rho, order)
    slow = [sp.cancel(f_rho.coeff(_E, j)) for j in range(1, order + 1)]
    return etas, slow
