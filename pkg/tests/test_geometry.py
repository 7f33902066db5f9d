import dataclasses
import random

import pytest
import sympy as sp

from slowfast import builtin_reduction
from slowfast.errors import NumericalError
from slowfast.geometry import (
    ChartSplit,
    branch_verdict,
    classify_fibers,
    classify_form,
    classify_geometry,
    default_split,
    implicit_jet,
    solve_graph,
)
from slowfast.scaling import ScalingAssignment, expand, factorize


def _mm_facts(categories, tilde, reversible=False):
    red = builtin_reduction("mm-reversible" if reversible else "mm-irreversible")
    eps = expand(red, ScalingAssignment(categories=categories, tilde=tilde))
    return factorize(eps)


def test_solve_graph_tqssa_point(tqssa_case):
    _, facts = tqssa_case
    split = default_split(facts[0])
    assert split == ChartSplit(rho=(0,), eta=(1,))
    pt = solve_graph(facts[0], split, [1.0])
    # closed form: c0(s) = s/(alpha+s), eigenvalue -beta(1-c) - alpha - s
    assert pt.eta[0] == pytest.approx(1.0 / 1.75, abs=1e-12)
    assert pt.eigenvalues[0].real == pytest.approx(-2.178571428571, abs=1e-9)
    assert pt.hyperbolic and pt.attracting
    assert pt.residual <= 1e-12


def test_solve_graph_origin_trivial(tqssa_case):
    _, facts = tqssa_case
    pt = solve_graph(facts[0], default_split(facts[0]), [0.0])
    assert pt.eta[0] == pytest.approx(0.0, abs=1e-14)
    assert pt.eigenvalues[0].real == pytest.approx(-(1.0 + 0.75), abs=1e-12)


def test_solve_graph_kf_point(kf_case):
    _, facts = kf_case
    split = default_split(facts[0])
    pt = solve_graph(facts[0], split, [1.0, 1.0, 0.06128])
    alpha, beta = 0.004, 1.0
    z = 0.06128
    assert pt.eta[0] == pytest.approx(alpha / (alpha + beta * z), rel=1e-12)
    assert pt.eigenvalues[0].real == pytest.approx(
        -(pt.eta[0] + alpha + beta * z), rel=1e-12)


def test_solve_graph_form3_negative_root():
    facts = _mm_facts(
        {"alpha": "small", "beta": "one", "gamma": "large", "delta": "large"},
        {"alpha": 1.0, "beta": 1.0, "gamma": 1.0, "delta": 1.0},
        reversible=True,
    )
    neg = [f for f in facts if f.root_sign == -1][0]
    pt = solve_graph(neg, default_split(neg), [0.5])
    # closed form with gamma~=1: c = (h1 - sqrt(h2))/(2 beta delta)
    h1 = 1.0 * (1 - 0.5) + 1.0 * 1.0 + 1.0
    h2 = (1.0 * (1.0 + 0.5) - 2.0) ** 2 + 4.0
    expected = (h1 - h2 ** 0.5) / 2.0
    assert pt.eta[0] == pytest.approx(expected, rel=1e-12)
    assert pt.attracting


def test_graph_property_lost_on_vertical_branch():
    facts = _mm_facts(
        {"alpha": "small", "beta": "one", "gamma": "small"},
        {"alpha": 1.0, "beta": 1.0, "gamma": 1.0},
    )
    vertical = [f for f in facts if sp.expand(f.f0).has(sp.Symbol("s", real=True))
                and not sp.expand(f.f0).has(sp.Symbol("c", real=True))][0]
    bad_split = ChartSplit(rho=(0,), eta=(1,))  # demand a graph over s
    with pytest.raises(NumericalError):
        solve_graph(vertical, bad_split, [0.5])


def test_implicit_jet_closed_form():
    facts = _mm_facts(
        {"alpha": "one", "beta": "one", "gamma": "small"},
        {"alpha": 1.0, "beta": 1.0, "gamma": 1.0},
    )
    jet = implicit_jet(facts[0], default_split(facts[0]), [1.0], 3)
    # c0 = s/(alpha+s) at alpha=1: derivatives 1/4, -1/4, 3/8 at s=1
    assert jet.value == pytest.approx(0.5, abs=1e-13)
    assert jet.derivative((1,)) == pytest.approx(0.25, abs=1e-12)
    assert jet.derivative((2,)) == pytest.approx(-0.25, abs=1e-12)
    assert jet.derivative((3,)) == pytest.approx(0.375, abs=1e-11)


def test_implicit_jet_flat_branch_zero_derivatives():
    facts = _mm_facts(
        {"alpha": "small", "beta": "small", "gamma": "small"},
        {"alpha": 1.0, "beta": 1.0, "gamma": 1.0},
    )
    flat = [f for f in facts
            if sp.degree(f.f0, sp.Symbol("c", real=True)) == 1][0]
    jet = implicit_jet(flat, default_split(flat), [0.4], 3)
    assert jet.value == pytest.approx(1.0, abs=1e-13)
    for k in (1, 2, 3):
        assert jet.derivative((k,)) == pytest.approx(0.0, abs=1e-12)


def test_implicit_jet_matches_finite_differences(tqssa_case):
    _, facts = tqssa_case
    split = default_split(facts[0])
    rng = random.Random(3)
    h = 1e-5
    for _ in range(5):
        s0 = rng.uniform(0.2, 0.8)
        jet = implicit_jet(facts[0], split, [s0], 2)
        up = solve_graph(facts[0], split, [s0 + h]).eta[0]
        dn = solve_graph(facts[0], split, [s0 - h]).eta[0]
        mid = solve_graph(facts[0], split, [s0]).eta[0]
        fd1 = (up - dn) / (2 * h)
        fd2 = (up - 2 * mid + dn) / h ** 2
        assert jet.derivative((1,)) == pytest.approx(fd1, abs=1e-7)
        assert jet.derivative((2,)) == pytest.approx(fd2, abs=1e-4)


def test_classify_fibers_three_classes(tqssa_case, sqssa_case):
    assert classify_fibers(tqssa_case[1][0]) == "T"
    assert classify_fibers(sqssa_case[1][0]) == "S"
    horizontal = _mm_facts(
        {"alpha": "one", "beta": "large", "gamma": "one"},
        {"alpha": 1.0, "beta": 1.0, "gamma": 1.0},
    )[0]
    assert classify_fibers(horizontal) == "R"


def test_classify_fibers_scaling_invariance(tqssa_case):
    f = tqssa_case[1][0]
    scaled = dataclasses.replace(
        f,
        n0=tuple(sp.expand(3 * x) for x in f.n0),
        f0=sp.expand(f.f0 / 3),
    )
    assert classify_fibers(scaled) == classify_fibers(f)


def test_classify_form_examples(tqssa_case):
    form, meta = classify_form(tqssa_case[1])
    alpha = sp.Symbol("alpha", positive=True)
    assert form == "1"
    assert sp.simplify(meta["Delta"] - alpha) == 0

    s1i = _mm_facts({"alpha": "one", "beta": "small", "gamma": "one"},
                    {"alpha": 1.3, "beta": 1.0, "gamma": 0.7})
    form, meta = classify_form(s1i)
    gamma = sp.Symbol("gamma", positive=True)
    assert form == "1"
    assert sp.simplify(meta["Delta"] - (alpha + gamma)) == 0


def test_classify_form_branch_pairs():
    # {c=0} u {c=1}: beta and delta large, alpha/gamma order one
    form5b = _mm_facts(
        {"alpha": "one", "beta": "large", "gamma": "one", "delta": "large"},
        {"alpha": 1.0, "beta": 1.0, "gamma": 1.0, "delta": 1.0},
        reversible=True,
    )
    assert classify_form(form5b)[0] == "5b"

    form2a = _mm_facts(
        {"alpha": "small", "beta": "small", "gamma": "small"},
        {"alpha": 1.0, "beta": 1.0, "gamma": 1.0},
    )
    form, meta = classify_form(form2a)
    assert form == "2a"
    assert meta["s_star"] == 0

    form5a = _mm_facts(
        {"alpha": "small", "beta": "one", "gamma": "small", "delta": "large"},
        {"alpha": 1.0, "beta": 1.0, "gamma": 1.0, "delta": 1.0},
        reversible=True,
    )
    assert classify_form(form5a)[0] == "5a"

    form3 = _mm_facts(
        {"alpha": "small", "beta": "one", "gamma": "large", "delta": "large"},
        {"alpha": 1.0, "beta": 1.0, "gamma": 1.0, "delta": 1.0},
        reversible=True,
    )
    assert classify_form(form3)[0] == "3"

    form4 = _mm_facts(
        {"alpha": "one", "beta": "small", "gamma": "one", "delta": "one"},
        {"alpha": 1.0, "beta": 1.0, "gamma": 1.0, "delta": 1.0},
        reversible=True,
    )
    form, meta = classify_form(form4)
    delta = sp.Symbol("delta", positive=True)
    assert form == "4"
    assert sp.simplify(meta["delta0"] - delta) == 0

    form5c = _mm_facts(
        {"alpha": "small", "beta": "one", "gamma": "small", "delta": "one"},
        {"alpha": 1.0, "beta": 1.0, "gamma": 1.0, "delta": 1.0},
        reversible=True,
    )
    assert classify_form(form5c)[0] == "5c"


def test_geometry_class_bundles_both(tqssa_case):
    geo = classify_geometry(tqssa_case[1])
    assert geo.fiber_class == "T"
    assert geo.form == "1"


def test_eigenvalue_is_df0_dot_n0(tqssa_case):
    _, facts = tqssa_case
    f = facts[0]
    split = default_split(f)
    rng = random.Random(11)
    tilde = f.tilde_values()
    syms = f.chart_syms()
    for _ in range(10):
        s0 = rng.uniform(0.05, 0.95)
        pt = solve_graph(f, split, [s0])
        subs = dict(zip(syms, pt.point))
        subs.update(tilde)
        lam = float(f.eigen_expr().subs(subs))
        assert pt.eigenvalues[0].real == pytest.approx(lam, rel=1e-12)
        assert pt.attracting == (lam < 0)


def test_unrecognised_curve_reported_not_dropped(tqssa_case):
    """A branch polynomial outside the template family classifies as
    'unclassified' with the curve kinds recorded."""
    import dataclasses

    f = tqssa_case[1][0]
    s_sym, c_sym = f.chart_syms()
    cubic = sp.expand(c_sym ** 3 + s_sym - 1)
    fake = dataclasses.replace(f, f0=cubic, curves=(cubic,))
    geo = classify_geometry([fake])
    assert geo.form == "unclassified"
    assert geo.metadata["curve_kinds"] == ("unknown",)


def test_manifold_point_residual_and_field(tqssa_case):
    """Solved points satisfy |f0| <= 1e-12 and F0 there is bounded by the
    fast-direction magnitude."""
    _, facts = tqssa_case
    f = facts[0]
    split = default_split(f)
    from slowfast.geometry import compiled

    comp = compiled(f, split)
    for s0 in (0.1, 0.5, 0.9):
        pt = solve_graph(f, split, [s0])
        assert pt.residual <= 1e-12
        args = list(pt.point)
        f0_terms = [comp.f0(args)]
        n0_vals = [p(args) for p in comp.n0]
        f0_norm = abs(f0_terms[0]) * sum(abs(v) for v in n0_vals) ** 0.5
        n0_norm = max(abs(v) for v in n0_vals)
        assert f0_norm <= 1e-10 * max(1.0, n0_norm)


def test_branch_verdicts():
    # red-box configuration: single repelling manifold
    red_box = _mm_facts(
        {"alpha": "small", "beta": "large", "gamma": "one", "delta": "one"},
        {"alpha": 1.0, "beta": 1.0, "gamma": 1.0, "delta": 1.0},
        reversible=True,
    )
    assert len(red_box) == 1
    assert branch_verdict(red_box[0]) == "repelling"
