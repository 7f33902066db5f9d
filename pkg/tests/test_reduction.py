import random

import numpy as np
import pytest
import sympy as sp

from slowfast import builtin_reduction
from slowfast.errors import ModelError, NumericalError
from slowfast.geometry import default_split, solve_graph
from slowfast.reduction import (
    build_projectors,
    conjugacy_residual,
    parametrize,
    reduced_field_1,
)
from slowfast.scaling import ScalingAssignment, expand, factorize

from _series_oracle import series_reduction

s, c = sp.symbols("s c", real=True)


def test_projector_tqssa_displayed_matrix(tqssa_case):
    _, facts = tqssa_case
    f = facts[0]
    split = default_split(f)
    pt = solve_graph(f, split, [1.0])
    proj = build_projectors(f, split, pt)
    # (alpha+s)^2/(alpha beta + (alpha+s)^2) block structure at alpha=0.75, s=1
    a = 1.75 ** 2 / (0.75 + 1.75 ** 2)
    expected = np.array([[a, a], [1 - a, 1 - a]])
    assert np.allclose(proj.pi_s, expected, atol=1e-12)
    assert np.allclose(proj.pi_s @ proj.pi_s, proj.pi_s, atol=1e-13)
    assert np.allclose(proj.pi_n @ proj.pi_n, proj.pi_n, atol=1e-13)
    assert np.allclose(proj.pi_s + proj.pi_n, np.eye(2), atol=1e-15)
    assert np.allclose(proj.pi_s @ proj.n0, 0.0, atol=1e-13)
    assert np.allclose(proj.pi_s @ proj.dphi0, proj.dphi0, atol=1e-13)
    assert np.allclose(proj.dphi0_left @ proj.dphi0, np.eye(1), atol=1e-15)


def test_projector_kf_sigmas(kf_case):
    _, facts = kf_case
    f = facts[0]
    split = default_split(f)
    pt = solve_graph(f, split, [1.0, 1.0, 0.06128])
    proj = build_projectors(f, split, pt)
    alpha, beta, z = 0.004, 1.0, 0.06128
    azb = alpha + beta * z
    sigma1 = azb ** 2 / (azb ** 2 + alpha)
    sigma2 = alpha / (azb ** 2 + alpha)
    assert proj.pi_s[2, 2] == pytest.approx(sigma1, rel=1e-12)
    assert proj.pi_s[3, 3] == pytest.approx(sigma2, rel=1e-12)
    assert proj.pi_s[2, 2] + proj.pi_s[3, 3] == pytest.approx(1.0, abs=1e-14)
    assert proj.pi_s[2, 3] == pytest.approx(-sigma1 / beta, rel=1e-12)
    assert proj.pi_s[3, 2] == pytest.approx(-beta * sigma2, rel=1e-12)


def test_projector_orthogonal_on_flat_branch():
    """Flat manifold {c=1} with a vertical fast direction: Pi_s = diag(1, 0)."""
    red = builtin_reduction("mm-irreversible")
    eps = expand(red, ScalingAssignment(
        categories={"alpha": "small", "beta": "small", "gamma": "small"},
        tilde={"alpha": 1.0, "beta": 1.0, "gamma": 1.0},
    ))
    flat = [f for f in factorize(eps)
            if sp.degree(f.f0, c) == 1][0]
    split = default_split(flat)
    pt = solve_graph(flat, split, [0.6])
    proj = build_projectors(flat, split, pt)
    assert np.allclose(proj.pi_s, np.diag([1.0, 0.0]), atol=1e-13)


def test_projector_rejects_nonhyperbolic_point():
    red = builtin_reduction("mm-irreversible")
    eps = expand(red, ScalingAssignment(
        categories={"alpha": "small", "beta": "one", "gamma": "small"},
        tilde={"alpha": 1.0, "beta": 1.0, "gamma": 1.0},
    ))
    flat = [f for f in factorize(eps) if sp.degree(f.f0, c) == 1][0]
    split = default_split(flat)
    # eigenvalue -s vanishes at s=0 on the {c=1} branch
    pt = solve_graph(flat, split, [0.0])
    assert not pt.hyperbolic
    with pytest.raises(NumericalError):
        build_projectors(flat, split, pt)
    with pytest.raises(NumericalError):
        parametrize(flat, split, eps, [0.0], order=1)


def test_reduced_field_tqssa_value(tqssa_case):
    eps, facts = tqssa_case
    f = facts[0]
    split = default_split(f)
    r1 = reduced_field_1(f, split, [1.0])
    # field coefficient; depletion form is its negative 0.459016
    assert r1[0] == pytest.approx(-0.45901639344, abs=1e-9)
    # closed form at generic points
    for s0 in (0.2, 0.55, 0.9):
        expected = -1.0 * s0 * (0.75 + s0) / (0.75 * 1.0 + (0.75 + s0) ** 2)
        assert reduced_field_1(f, split, [s0])[0] == pytest.approx(expected, rel=1e-12)


def test_reduced_field_sqssa_vanishes(sqssa_case):
    eps, facts = sqssa_case
    f = facts[0]
    split = default_split(f)
    for s0 in (0.1, 0.37, 0.62, 0.95):
        assert reduced_field_1(f, split, [s0])[0] == pytest.approx(0.0, abs=1e-14)


def test_parametrize_sqssa_worked_example(sqssa_case):
    """psi1 and R2 against the independent series oracle and the hand values
    psi1(1) = -1/4 (graph correction is downward), R2(1) = -1/2."""
    eps, facts = sqssa_case
    f = facts[0]
    split = default_split(f)
    jet = parametrize(f, split, eps, [1.0], order=2)
    assert jet.r_terms[0][0] == pytest.approx(0.0, abs=1e-14)
    assert jet.psi[1] == pytest.approx(-0.25, abs=1e-12)
    assert jet.r_terms[1][0] == pytest.approx(-0.5, abs=1e-12)

    # independent series oracle on the symbolic expansion
    terms_rho = [t[0] for t in eps.terms]
    terms_eta = [t[1] for t in eps.terms]
    alpha = sp.Symbol("alpha", positive=True)
    etas, slow = series_reduction(terms_rho, terms_eta, s, c, s / (alpha + s), 2)
    gamma_t = sp.Symbol("gamma_t", positive=True)
    beta_t = sp.Symbol("beta_t", positive=True)
    subs = {alpha: 1.0, gamma_t: 1.0, beta_t: 1.0}
    assert float(etas[1].subs(subs).subs(s, 1.0)) == pytest.approx(-0.25, abs=1e-12)
    assert float(slow[1].subs(subs).subs(s, 1.0)) == pytest.approx(-0.5, abs=1e-12)
    # closed forms: psi1 = -g~ s/(alpha+s)^2, R2 = -b~ g~ s/(alpha+s)
    assert sp.simplify(etas[1] + gamma_t * s / (alpha + s) ** 2) == 0
    assert sp.simplify(slow[1] + beta_t * gamma_t * s / (alpha + s)) == 0


def test_parametrize_g2_summands_match_display(sqssa_case):
    """Only DF1.phi1 survives in G2; its value is (-g~s/(a+s), g~^2 s/(a+s)^2)."""
    eps, facts = sqssa_case
    f = facts[0]
    split = default_split(f)
    jet = parametrize(f, split, eps, [1.0], order=2)
    g2 = jet.g_terms[1]
    assert g2[0] == pytest.approx(-0.5, abs=1e-12)   # -g~ s/(alpha+s) at s=1
    assert g2[1] == pytest.approx(0.25, abs=1e-12)   # g~^2 s/(alpha+s)^2


def test_parametrize_matches_series_oracle_high_order():
    """Order-3 check on a configuration with a shifted timescale."""
    red = builtin_reduction("mm-reversible")
    tilde = {"alpha": 1.4, "beta": 1.0, "gamma": 0.9, "delta": 0.7}
    eps = expand(red, ScalingAssignment(
        categories={"alpha": "large", "beta": "small", "gamma": "one", "delta": "small"},
        tilde=tilde,
    ))
    f = factorize(eps)[0]
    split = default_split(f)
    terms_rho = [t[0] for t in eps.terms]
    terms_eta = [t[1] for t in eps.terms]
    etas, slow = series_reduction(terms_rho, terms_eta, s, c, sp.Integer(0), 3)
    subs = {sp.Symbol("alpha_t", positive=True): tilde["alpha"],
            sp.Symbol("beta_t", positive=True): tilde["beta"],
            sp.Symbol("gamma", positive=True): tilde["gamma"],
            sp.Symbol("delta_t", positive=True): tilde["delta"]}
    for s0 in (0.25, 0.6, 0.85):
        jet = parametrize(f, split, eps, [s0], order=3)
        for j in range(1, 4):
            want = float(slow[j - 1].subs(subs).subs(s, s0))
            assert jet.r_terms[j - 1][0] == pytest.approx(want, abs=1e-10), j
        for j in range(1, 3):
            want = float(etas[j].subs(subs).subs(s, s0))
            assert jet.psi[j] == pytest.approx(want, abs=1e-10)


def test_tqssa_substrate_depletes_everywhere(tqssa_case):
    """R1 vanishes at s=0 and the substrate-depletion rate is strictly
    negative on (0, 1]."""
    eps, facts = tqssa_case
    f = facts[0]
    split = default_split(f)
    assert reduced_field_1(f, split, [0.0])[0] == pytest.approx(0.0, abs=1e-14)
    for s0 in np.linspace(0.05, 1.0, 20):
        assert reduced_field_1(f, split, [float(s0)])[0] < 0.0


def test_left_inverse_choice_invariance(tqssa_case, sqssa_case):
    for eps, facts in (tqssa_case, sqssa_case):
        f = facts[0]
        split = default_split(f)
        for s0 in (0.2, 0.5, 0.8):
            a = parametrize(f, split, eps, [s0], order=2)
            b = parametrize(f, split, eps, [s0], order=2,
                            left_inverse="moore-penrose")
            for ra, rb in zip(a.r_terms, b.r_terms):
                assert np.allclose(ra, rb, atol=1e-12)


def test_r1_two_code_paths_agree(tqssa_case):
    eps, facts = tqssa_case
    f = facts[0]
    split = default_split(f)
    rng = random.Random(5)
    # explicit formula Dphi0^L (I - N0 (Df0 N0)^-1 Df0) F1 via projector data
    from slowfast.geometry import compiled
    comp = compiled(f, split)
    for _ in range(10):
        s0 = rng.uniform(0.05, 0.95)
        pt = solve_graph(f, split, [s0])
        proj = build_projectors(f, split, pt)
        args = list(pt.point)
        f1 = np.array([p(args) for p in
                       __import__("slowfast.reduction", fromlist=["x"])
                       ._reduction_compiled(eps).terms[1]])
        explicit = proj.dphi0_left @ (proj.pi_s @ f1)
        engine = reduced_field_1(f, split, [s0])
        assert np.allclose(explicit, engine, atol=1e-12)


def test_trivial_perturbation_leaves_manifold_invariant(tqssa_case):
    """With all perturbing terms removed, corrections and residual vanish."""
    import dataclasses

    eps, facts = tqssa_case
    bare = dataclasses.replace(eps, terms=(eps.terms[0],))
    f = dataclasses.replace(facts[0], system=bare)
    split = default_split(f)
    jet = parametrize(f, split, bare, [0.7], order=3)
    assert all(abs(p) < 1e-14 for p in jet.psi[1:])
    assert all(np.max(np.abs(r)) < 1e-14 for r in jet.r_terms)
    for e in (1e-2, 1e-3):
        assert conjugacy_residual(jet, bare, e) < 1e-13


def test_conjugacy_residual_order_scaling(tqssa_case, sqssa_case):
    eps1, facts1 = tqssa_case
    jet1 = parametrize(facts1[0], default_split(facts1[0]), eps1, [0.8], order=1)
    r_hi = conjugacy_residual(jet1, eps1, 1e-2)
    r_lo = conjugacy_residual(jet1, eps1, 1e-3)
    assert r_hi / r_lo == pytest.approx(100.0, rel=0.2)

    eps2, facts2 = sqssa_case
    jet2 = parametrize(facts2[0], default_split(facts2[0]), eps2, [0.8], order=2)
    r_hi = conjugacy_residual(jet2, eps2, 1e-2)
    r_lo = conjugacy_residual(jet2, eps2, 1e-3)
    assert r_hi / r_lo == pytest.approx(1000.0, rel=0.2)


def test_kf_reduction_matches_closed_form(kf_case):
    eps, facts = kf_case
    f = facts[0]
    split = default_split(f)
    rng = random.Random(0)
    alpha, beta = 0.004, 1.0
    r2t, r3t, r4t, r5t, r6t, gat = 0.2, 2.0, 0.2, 0.2, 0.2, 0.2
    for _ in range(20):
        x = rng.uniform(0.1, 2.0)
        y = rng.uniform(0.1, 2.0)
        z = rng.uniform(0.01, 1.0)
        jet = parametrize(f, split, eps, [x, y, z], order=1)
        azb = alpha + beta * z
        K = azb / (azb ** 2 + alpha)
        expected = np.array([
            alpha / azb - r2t * x,
            r3t * x - r4t * y,
            K * (azb * (r5t * y - r6t * z) - gat * z),
        ])
        rel = np.abs(jet.r_terms[0] - expected) / np.maximum(1e-12, np.abs(expected))
        assert np.max(rel) < 1e-10


def test_order_bounds():
    red = builtin_reduction("mm-irreversible")
    eps = expand(red, ScalingAssignment(
        categories={"alpha": "one", "beta": "one", "gamma": "small"},
        tilde={"alpha": 1.0, "beta": 1.0, "gamma": 1.0},
    ))
    f = factorize(eps)[0]
    split = default_split(f)
    with pytest.raises(ModelError):
        parametrize(f, split, eps, [0.5], order=5)
    with pytest.raises(ModelError):
        parametrize(f, split, eps, [0.5], order=0)
