"""Census, classification, relevance filtering, and closed-form verification
of every asymptotic configuration of the Michaelis-Menten schemes, plus the
packaged Kim-Forger scenario.

Each of the 3^3 = 27 irreversible and 3^4 = 81 reversible category
assignments is expanded, tested for singular-perturbation structure,
factorised, classified by fast-fiber orientation and manifold shape, and
sampled for branch stability. Published case labels are attached where the
configuration appears in the printed tables, and each printed reduction is
re-verified numerically against the parametrization engine.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass, field
from itertools import product
from typing import Callable, Optional, Sequence

import numpy as np

from . import dynamics
from .crn import builtin_reduction
from .errors import ModelError, NumericalError
from .geometry import branch_verdict, classify_geometry, default_split
from .reduction import parametrize, reduced_field_fn
from .scaling import (
    LARGE,
    ONE,
    SMALL,
    EpsilonSystem,
    Factorization,
    ScalingAssignment,
    detect_singular,
    expand,
    factorize,
)

__all__ = [
    "CatalogueEntry",
    "Census",
    "ValidityScalars",
    "OracleRow",
    "OracleResult",
    "enumerate_mm",
    "census",
    "relevance_filter",
    "validity_scalars",
    "verify_oracles",
    "oracle_rows",
    "kf_scenario",
    "KF_TABLE_PARAMS",
]

MM_PARAMS = {"irreversible": ("alpha", "beta", "gamma"),
             "reversible": ("alpha", "beta", "gamma", "delta")}

#: Fixed default tilde stand-ins for census sweeps. Singular/class/form
#: verdicts are draw-independent; the sampled in-box hyperbolicity of a few
#: borderline branch geometries is not (their branch crossings sit at
#: s = 1 - beta), so the defaults pin the enzyme-deficient regime beta < 1.
DEFAULT_TILDE = {"alpha": 1.3, "beta": 0.8, "gamma": 0.6, "delta": 1.7}

_CAT_RANK = {SMALL: 0, ONE: 1, LARGE: 2}


# ----------------------------------------------------------------------
# Published case labels (irreversible: all 23 singular cases; reversible:
# the cases printed in the main-text tables)
# ----------------------------------------------------------------------

_IRREV_LABELS = {
    (ONE, SMALL, ONE): "S.1.i",
    (SMALL, SMALL, ONE): "S.1.ii",
    (ONE, SMALL, SMALL): "S.1.iii",
    (SMALL, SMALL, SMALL): "S.2a.i",
    (LARGE, SMALL, ONE): "S.2b.i",
    (ONE, SMALL, LARGE): "S.2b.ii",
    (LARGE, SMALL, LARGE): "S.2b.iii",
    (LARGE, SMALL, SMALL): "S.2b.iv",
    (SMALL, SMALL, LARGE): "S.2b.v",
    (ONE, ONE, LARGE): "S.2b.vi",
    (SMALL, ONE, LARGE): "S.2b.vii",
    (ONE, ONE, SMALL): "T.1.i",
    (SMALL, ONE, SMALL): "T.2a.i",
    (LARGE, ONE, ONE): "T.2b.i",
    (LARGE, ONE, SMALL): "T.2b.ii",
    (LARGE, ONE, LARGE): "T.2b.iii",
    (ONE, LARGE, ONE): "R.1.i",
    (ONE, LARGE, SMALL): "R.1.ii",
    (SMALL, LARGE, ONE): "R.2a.i",
    (SMALL, LARGE, SMALL): "R.2a.ii",
    (LARGE, LARGE, ONE): "R.2b.i",
    (LARGE, LARGE, SMALL): "R.2b.ii",
    (LARGE, LARGE, LARGE): "R.2b.iii",
}

_REV_LABELS = {
    (ONE, SMALL, ONE, SMALL): "S.1.i",
    (SMALL, SMALL, ONE, SMALL): "S.1.ii",
    (ONE, SMALL, SMALL, SMALL): "S.1.iii",
    (SMALL, SMALL, SMALL, SMALL): "S.2a.i",
    (SMALL, SMALL, LARGE, SMALL): "S.2b.i",
    (SMALL, SMALL, LARGE, ONE): "S.2b.ii",
    (ONE, SMALL, LARGE, SMALL): "S.2b.iii",
    (ONE, SMALL, LARGE, ONE): "S.2b.iv",
    (LARGE, SMALL, ONE, SMALL): "S.2b.vii",
    (LARGE, SMALL, LARGE, SMALL): "S.2b.ix",
    (LARGE, SMALL, LARGE, ONE): "S.2b.x",
    (SMALL, ONE, LARGE, SMALL): "S.2b.xi",
    (SMALL, ONE, LARGE, ONE): "S.2b.xii",
    (ONE, ONE, LARGE, SMALL): "S.2b.xiii",
    (ONE, ONE, LARGE, ONE): "S.2b.xiv",
    (SMALL, ONE, LARGE, LARGE): "S.3.i",
    (ONE, ONE, LARGE, LARGE): "S.3.ii",
    (SMALL, SMALL, LARGE, LARGE): "S.4.i",
    (SMALL, SMALL, ONE, ONE): "S.4.ii",
    (ONE, SMALL, ONE, ONE): "S.4.iv",
    (ONE, SMALL, LARGE, LARGE): "S.4.v",
    (LARGE, SMALL, LARGE, LARGE): "S.4.viii",
    (ONE, ONE, SMALL, SMALL): "T.1.i",
    (SMALL, ONE, SMALL, SMALL): "T.2a.i",
    (LARGE, ONE, ONE, SMALL): "T.2b.iii",
    (LARGE, ONE, LARGE, SMALL): "T.2b.v",
    (LARGE, ONE, LARGE, ONE): "T.2b.vi",
    (SMALL, ONE, SMALL, ONE): "T.5c.i",
    (SMALL, LARGE, SMALL, ONE): "T.5c.ii",
    (SMALL, LARGE, ONE, ONE): "T.5c.iii",
    (ONE, LARGE, ONE, SMALL): "R.1.i",
    (ONE, LARGE, SMALL, SMALL): "R.1.ii",
    (SMALL, LARGE, ONE, SMALL): "R.2a.i",
    (SMALL, LARGE, SMALL, SMALL): "R.2a.ii",
    (LARGE, LARGE, ONE, SMALL): "R.2b.i",
    (LARGE, LARGE, SMALL, SMALL): "R.2b.ii",
    (LARGE, LARGE, LARGE, SMALL): "R.2b.iii",
}


#: Reversible configurations whose nonlinear fast fibers differ from the
#: linear bundle N0 (the classical total-substrate transformation does not
#: straighten them globally); everywhere else the two coincide.
CURVED_FIBER_CONFIGS = {
    (SMALL, ONE, SMALL, ONE),      # alpha, gamma small; beta, delta O(1)
    (LARGE, LARGE, LARGE, SMALL),  # alpha, beta, gamma large, any delta
    (LARGE, LARGE, LARGE, ONE),
    (LARGE, LARGE, LARGE, LARGE),
}


@dataclass(frozen=True)
class BranchInfo:
    branch_id: str
    verdict: str        # attracting | repelling | mixed | degenerate | outside-box
    degenerate: bool
    has_attracting: bool


@dataclass
class CatalogueEntry:
    """Census record of one asymptotic configuration.

    ``oracle`` names the printed-reduction rows covering the case (empty for
    cases without a published closed form) and ``published_order`` their
    leading slow-flow order; ``oracle_verified`` is filled by a verification
    sweep.
    """

    scheme: str
    config: dict[str, str]
    label: Optional[str]
    singular: bool
    fiber_class: str = "-"
    form: str = "-"
    branches: list[BranchInfo] = field(default_factory=list)
    normally_hyperbolic: bool = False
    relevant: bool = False
    reason: str = ""
    time_shift: int = 0
    oracle: str = ""
    published_order: Optional[int] = None
    oracle_verified: Optional[bool] = None
    metadata: dict = field(default_factory=dict)

    @property
    def config_tuple(self) -> tuple[str, ...]:
        return tuple(self.config[p] for p in MM_PARAMS[self.scheme])


def _mixed_branch_verdict(fact: Factorization, ngrid: int) -> BranchInfo:
    verdict = branch_verdict(fact, ngrid=ngrid)
    if verdict == "loses-nh":
        # distinguish: does it still have an attracting stretch?
        from .geometry import HYPERBOLICITY_THRESHOLD, compiled
        comp = compiled(fact, default_split(fact))
        has_attr = False
        for i in range(ngrid):
            r = i / (ngrid - 1)
            eta = comp.closed_form_eta([r])
            if eta is None or not -1e-9 <= eta <= 1 + 1e-9:
                continue
            if comp.lambda_at(comp.assemble([r], eta)) < -HYPERBOLICITY_THRESHOLD:
                has_attr = True
                break
        return BranchInfo(fact.branch_id, "mixed", False, has_attr)
    return BranchInfo(
        fact.branch_id,
        verdict,
        verdict == "degenerate",
        verdict == "attracting",
    )


def classify_configuration(
    scheme: str,
    categories: dict[str, str],
    tilde: Optional[dict[str, float]] = None,
    ngrid: int = 21,
) -> CatalogueEntry:
    """Full census pipeline for one category assignment."""
    params = MM_PARAMS[scheme]
    tilde = tilde or {p: DEFAULT_TILDE[p] for p in params}
    model_key = "mm-irreversible" if scheme == "irreversible" else "mm-reversible"
    reduced = builtin_reduction(model_key)
    assignment = ScalingAssignment(categories=dict(categories), tilde=dict(tilde))
    eps = expand(reduced, assignment)
    verdict = detect_singular(eps)
    label = (_IRREV_LABELS if scheme == "irreversible" else _REV_LABELS).get(
        tuple(categories[p] for p in params)
    )
    entry = CatalogueEntry(
        scheme=scheme,
        config=dict(categories),
        label=label,
        singular=bool(verdict),
        time_shift=eps.time_shift,
    )
    if not verdict:
        entry.reason = "not singular"
        return entry

    facts = factorize(eps)
    geo = classify_geometry(facts)
    entry.fiber_class = geo.fiber_class
    entry.form = geo.form
    entry.metadata = dict(geo.metadata)
    if scheme == "reversible":
        entry.metadata["curved_fibers"] = (
            tuple(categories[p] for p in params) in CURVED_FIBER_CONFIGS
        )

    seen = set()
    for f in facts:
        # quadratic branches share f0; sample each root branch separately
        key = f.branch_id
        if key in seen:
            continue
        seen.add(key)
        entry.branches.append(_mixed_branch_verdict(f, ngrid))

    entry.normally_hyperbolic = entry.singular and all(
        b.verdict in ("attracting", "repelling") for b in entry.branches
    )
    rows = _oracle_index().get((scheme, label), [])
    if rows:
        entry.oracle = ";".join(r.row_id for r in rows)
        entry.published_order = min(r.order for r in rows)
    relevance_filter(entry)
    return entry


def enumerate_mm(
    scheme: str,
    tilde: Optional[dict[str, float]] = None,
    ngrid: int = 21,
    threads: int = 1,
) -> list[CatalogueEntry]:
    """All 27 (irreversible) or 81 (reversible) configurations, classified."""
    if scheme not in MM_PARAMS:
        raise ModelError(f"unknown scheme {scheme!r}")
    params = MM_PARAMS[scheme]
    configs = [
        dict(zip(params, combo))
        for combo in product((SMALL, ONE, LARGE), repeat=len(params))
    ]
    if threads > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(
                pool.map(lambda c: classify_configuration(scheme, c, tilde, ngrid), configs)
            )
    return [classify_configuration(scheme, c, tilde, ngrid) for c in configs]


def relevance_filter(entry: CatalogueEntry) -> CatalogueEntry:
    """Biological relevance of a singular configuration.

    Discards: product-formation-negative category patterns (condition 1
    generally, condition 2 for shapes whose leading branch is c = 0),
    configurations whose only manifold is repelling, and the trivial
    rapid-equilibration cases (class R with shape 1 or 2a). Otherwise the
    entry must own at least one branch with an attracting stretch.
    """
    if not entry.singular:
        entry.relevant = False
        entry.reason = entry.reason or "not singular"
        return entry
    cats = entry.config
    beta = cats["beta"]
    if "delta" in cats:
        g, d = _CAT_RANK[cats["gamma"]], _CAT_RANK[cats["delta"]]
        if beta in (SMALL, ONE) and g < d:
            entry.relevant = False
            entry.reason = "negative product formation (condition 1)"
            return entry
        if entry.form in ("2b", "5b"):
            if beta in (SMALL, ONE) and g == d or beta == LARGE and g <= d:
                entry.relevant = False
                entry.reason = "negative product formation (condition 2)"
                return entry
    live = [b for b in entry.branches if not b.degenerate and b.verdict != "outside-box"]
    if live and all(b.verdict == "repelling" for b in live):
        entry.relevant = False
        entry.reason = "repelling manifold"
        return entry
    if entry.fiber_class == "R" and entry.form in ("1", "2a"):
        entry.relevant = False
        entry.reason = "trivial rapid equilibration"
        return entry
    if not any(b.has_attracting for b in entry.branches):
        entry.relevant = False
        entry.reason = "no attracting branch"
        return entry
    entry.relevant = True
    entry.reason = "attracting reduction available"
    return entry


@dataclass(frozen=True)
class Census:
    total: int
    singular: int
    normally_hyperbolic: int
    by_class: dict[str, int]
    relevant: int
    relevant_by_class: dict[str, int]


def census(entries: Sequence[CatalogueEntry]) -> Census:
    by_class: dict[str, int] = {}
    rel_by_class: dict[str, int] = {}
    for e in entries:
        if e.singular:
            by_class[e.fiber_class] = by_class.get(e.fiber_class, 0) + 1
        if e.relevant:
            rel_by_class[e.fiber_class] = rel_by_class.get(e.fiber_class, 0) + 1
    return Census(
        total=len(entries),
        singular=sum(e.singular for e in entries),
        normally_hyperbolic=sum(e.normally_hyperbolic for e in entries),
        by_class=by_class,
        relevant=sum(e.relevant for e in entries),
        relevant_by_class=rel_by_class,
    )


# ----------------------------------------------------------------------
# QSSA validity scalars
# ----------------------------------------------------------------------

@dataclass(frozen=True)
class ValidityScalars:
    eps_hta: float
    eps_ss: float
    eps_sssm: float
    eps_bdbs: float
    eps_t: Optional[float]  # None when the root condition fails


def validity_scalars(alpha: float, beta: float, gamma: float) -> ValidityScalars:
    """Classical QSSA validity parameters for one numeric configuration."""
    if alpha <= 0 or beta <= 0 or gamma <= 0:
        raise ModelError("validity scalars need positive parameters")
    eps_hta = beta
    eps_ss = beta / (1.0 + alpha + gamma)
    eps_sssm = gamma / beta
    eps_bdbs = beta * gamma / (alpha + gamma + beta + 1.0) ** 2
    root_arg = 1.0 - 4.0 * eps_bdbs / gamma
    if root_arg > 0:
        eps_t = 0.5 * gamma * (root_arg ** -0.5 - 1.0)
    else:
        eps_t = None
    return ValidityScalars(eps_hta, eps_ss, eps_sssm, eps_bdbs, eps_t)


# ----------------------------------------------------------------------
# Published reductions (oracle rows)
# ----------------------------------------------------------------------

@dataclass(frozen=True)
class OracleRow:
    """One printed model reduction.

    ``coeff(x, p)`` is the substrate-depletion coefficient (sign included,
    eps^order factor stripped) as a function of the chart coordinate and the
    tilde values; the parameter realising eps has tilde value pinned to 1.
    """

    table: str
    scheme: str
    label: str
    categories: tuple[str, ...]       # (alpha, beta, gamma[, delta]) categories
    eps_param: str
    order: int
    coeff: Callable[[float, dict], float]
    branch: Optional[str] = None      # None | "c=1" | "s=0" | "neg-root"
    note: str = ""

    @property
    def row_id(self) -> str:
        suffix = f"[{self.branch}]" if self.branch else ""
        return f"{self.table}:{self.label}{suffix}"


def _h2_form3(s, p):
    return (p["delta"] * (p["beta"] + s) - (1.0 + p["delta"])) ** 2 \
        + 4.0 * p["beta"] * p["delta"]


def oracle_rows() -> list[OracleRow]:
    R = OracleRow
    rows = [
        # ---- irreversible, single attracting manifold (14 cases) ----
        R("ST", "irreversible", "S.1.i", (ONE, SMALL, ONE), "beta", 1,
          lambda s, p: -p["gamma"] * s / (p["alpha"] + p["gamma"] + s)),
        R("ST", "irreversible", "S.1.ii", (SMALL, SMALL, ONE), "beta", 1,
          lambda s, p: -p["gamma"] * s / (p["gamma"] + s)),
        R("ST", "irreversible", "S.1.iii", (ONE, SMALL, SMALL), "beta", 2,
          lambda s, p: -p["gamma"] * s / (p["alpha"] + s)),
        R("ST", "irreversible", "S.2b.i", (LARGE, SMALL, ONE), "beta", 3,
          lambda s, p: -p["gamma"] * s / p["alpha"]),
        R("ST", "irreversible", "S.2b.iv", (LARGE, SMALL, SMALL), "beta", 4,
          lambda s, p: -p["gamma"] * s / p["alpha"]),
        R("ST", "irreversible", "S.2b.ii", (ONE, SMALL, LARGE), "beta", 2,
          lambda s, p: -s),
        R("ST", "irreversible", "S.2b.iii", (LARGE, SMALL, LARGE), "beta", 2,
          lambda s, p: -p["gamma"] * s / (p["alpha"] + p["gamma"])),
        R("ST", "irreversible", "S.2b.v", (SMALL, SMALL, LARGE), "beta", 2,
          lambda s, p: -s),
        R("ST", "irreversible", "S.2b.vi", (ONE, ONE, LARGE), "gamma", 1,
          lambda s, p: -p["beta"] * s),
        R("ST", "irreversible", "S.2b.vii", (SMALL, ONE, LARGE), "gamma", 1,
          lambda s, p: -p["beta"] * s),
        R("ST", "irreversible", "T.1.i", (ONE, ONE, SMALL), "gamma", 1,
          lambda s, p: -p["beta"] * s * (p["alpha"] + s)
          / (p["alpha"] * p["beta"] + (p["alpha"] + s) ** 2)),
        R("ST", "irreversible", "T.2b.i", (LARGE, ONE, ONE), "alpha", 2,
          lambda s, p: -p["beta"] * p["gamma"] * s),
        R("ST", "irreversible", "T.2b.ii", (LARGE, ONE, SMALL), "alpha", 3,
          lambda s, p: -p["beta"] * p["gamma"] * s),
        R("ST", "irreversible", "T.2b.iii", (LARGE, ONE, LARGE), "alpha", 1,
          lambda s, p: -p["beta"] * p["gamma"] * s / (1.0 + p["gamma"])),
        # ---- irreversible, loss of normal hyperbolicity (2 cases) ----
        R("ST3", "irreversible", "S.2a.i", (SMALL, SMALL, SMALL), "beta", 2,
          lambda s, p: -p["gamma"], branch="c=1",
          note="reduction on the upper branch"),
        R("ST3", "irreversible", "T.2a.i", (SMALL, ONE, SMALL), "gamma", 1,
          lambda c, p: -c, branch="s=0", note="c-chart reduction"),
        R("ST3", "irreversible", "T.2a.i", (SMALL, ONE, SMALL), "gamma", 1,
          lambda s, p: -p["beta"], branch="c=1"),
        # ---- reversible, S.1/S.2b (14 cases) ----
        R("ST_rev", "reversible", "S.1.i", (ONE, SMALL, ONE, SMALL), "beta", 1,
          lambda s, p: -p["gamma"] * s / (p["alpha"] + p["gamma"] + s)),
        R("ST_rev", "reversible", "S.1.ii", (SMALL, SMALL, ONE, SMALL), "beta", 1,
          lambda s, p: -p["gamma"] * s / (p["gamma"] + s)),
        R("ST_rev", "reversible", "S.1.iii", (ONE, SMALL, SMALL, SMALL), "beta", 2,
          lambda s, p: -(p["gamma"] * s + p["alpha"] * p["delta"] * (s - 1.0))
          / (p["alpha"] + s)),
        R("ST_rev", "reversible", "S.2b.i", (SMALL, SMALL, LARGE, SMALL), "beta", 2,
          lambda s, p: -s),
        R("ST_rev", "reversible", "S.2b.ii", (SMALL, SMALL, LARGE, ONE), "beta", 2,
          lambda s, p: -s),
        R("ST_rev", "reversible", "S.2b.iii", (ONE, SMALL, LARGE, SMALL), "beta", 2,
          lambda s, p: -s),
        R("ST_rev", "reversible", "S.2b.iv", (ONE, SMALL, LARGE, ONE), "beta", 2,
          lambda s, p: -s),
        R("ST_rev", "reversible", "S.2b.xi", (SMALL, ONE, LARGE, SMALL), "gamma", 1,
          lambda s, p: -p["beta"] * s),
        R("ST_rev", "reversible", "S.2b.xii", (SMALL, ONE, LARGE, ONE), "gamma", 1,
          lambda s, p: -p["beta"] * s),
        R("ST_rev", "reversible", "S.2b.xiii", (ONE, ONE, LARGE, SMALL), "gamma", 1,
          lambda s, p: -p["beta"] * s),
        R("ST_rev", "reversible", "S.2b.xiv", (ONE, ONE, LARGE, ONE), "gamma", 1,
          lambda s, p: -p["beta"] * s),
        R("ST_rev", "reversible", "S.2b.ix", (LARGE, SMALL, LARGE, SMALL), "beta", 2,
          lambda s, p: -p["gamma"] * s / (p["alpha"] + p["gamma"])),
        R("ST_rev", "reversible", "S.2b.x", (LARGE, SMALL, LARGE, ONE), "beta", 2,
          lambda s, p: -p["alpha"] * (-p["delta"] - s + p["delta"] * s)
          / (p["alpha"] + p["gamma"]) - s),
        R("ST_rev", "reversible", "S.2b.vii", (LARGE, SMALL, ONE, SMALL), "beta", 3,
          lambda s, p: -(p["delta"] * (s - 1.0) + p["gamma"] * s / p["alpha"])),
        # ---- reversible, S.3 (Form 3, attracting = negative root) ----
        R("ST2_rev1", "reversible", "S.3.i", (SMALL, ONE, LARGE, LARGE), "gamma", 1,
          lambda s, p: -(p["delta"] * s * (p["beta"] + s - 1.0)
                         - s * (1.0 - math.sqrt(_h2_form3(s, p))))
          / (2.0 * p["delta"]), branch="neg-root"),
        R("ST2_rev1", "reversible", "S.3.ii", (ONE, ONE, LARGE, LARGE), "gamma", 1,
          lambda s, p: -(-p["delta"] * (p["alpha"] + s + p["alpha"] * p["beta"]
                                        - p["alpha"] * s - p["beta"] * s - s * s)
                         - (p["alpha"] + s) * (1.0 - math.sqrt(_h2_form3(s, p))))
          / (2.0 * p["delta"]), branch="neg-root"),
        # ---- reversible, S.4 (Form 4, 5 cases) ----
        R("ST2_rev", "reversible", "S.4.i", (SMALL, SMALL, LARGE, LARGE), "beta", 2,
          lambda s, p: -p["gamma"] * s
          / (p["gamma"] + p["delta"] - p["delta"] * s)),
        R("ST2_rev", "reversible", "S.4.ii", (SMALL, SMALL, ONE, ONE), "beta", 1,
          lambda s, p: -p["gamma"] * s
          / (p["gamma"] + p["delta"] + s - p["delta"] * s)),
        R("ST2_rev", "reversible", "S.4.iv", (ONE, SMALL, ONE, ONE), "beta", 1,
          lambda s, p: -(p["gamma"] * s + p["alpha"] * p["delta"] * (s - 1.0))
          / (p["gamma"] + p["delta"] + p["alpha"] + s - p["delta"] * s)),
        R("ST2_rev", "reversible", "S.4.v", (ONE, SMALL, LARGE, LARGE), "beta", 2,
          lambda s, p: -(p["gamma"] * s + p["alpha"] * p["delta"] * (s - 1.0))
          / (p["gamma"] + p["delta"] - p["delta"] * s)),
        R("ST2_rev", "reversible", "S.4.viii", (LARGE, SMALL, LARGE, LARGE), "beta", 1,
          lambda s, p: -p["alpha"] * p["delta"] * (s - 1.0)
          / (p["alpha"] + p["gamma"] + p["delta"] - p["delta"] * s)),
        # ---- reversible, class T (4 cases) ----
        R("ST3_rev", "reversible", "T.1.i", (ONE, ONE, SMALL, SMALL), "gamma", 1,
          lambda s, p: -p["beta"] * ((1.0 + p["alpha"] * p["delta"]) * s * s
                                     + p["alpha"] * (1.0 - p["delta"]
                                     + p["alpha"] * p["delta"]
                                     + p["beta"] * p["delta"]) * s
                                     - p["alpha"] ** 2 * p["delta"])
          / ((p["alpha"] + s) ** 2 + p["alpha"] * p["beta"])),
        R("ST3_rev", "reversible", "T.2b.iii", (LARGE, ONE, ONE, SMALL), "alpha", 2,
          lambda s, p: -p["beta"] * (p["delta"] * (s - 1.0) + p["gamma"] * s)),
        R("ST3_rev", "reversible", "T.2b.v", (LARGE, ONE, LARGE, SMALL), "alpha", 1,
          lambda s, p: -p["beta"] * p["gamma"] * s / (1.0 + p["gamma"])),
        R("ST3_rev", "reversible", "T.2b.vi", (LARGE, ONE, LARGE, ONE), "alpha", 1,
          lambda s, p: -p["beta"] * (-p["delta"] + (p["delta"] - 1.0) * s)
          / (1.0 + p["gamma"]) - p["beta"] * s),
        # ---- reversible, loss of normal hyperbolicity (2 cases) ----
        R("loss_rev", "reversible", "S.2a.i", (SMALL, SMALL, SMALL, SMALL), "beta", 2,
          lambda s, p: -p["gamma"], branch="c=1"),
        R("loss_rev", "reversible", "T.2a.i", (SMALL, ONE, SMALL, SMALL), "gamma", 1,
          lambda c, p: -(c + p["delta"] * (1.0 - c) * (p["beta"] * c - 1.0)),
          branch="s=0", note="c-chart reduction"),
        R("loss_rev", "reversible", "T.2a.i", (SMALL, ONE, SMALL, SMALL), "gamma", 1,
          lambda s, p: -p["beta"], branch="c=1"),
    ]
    return rows


_oracle_index_cache: Optional[dict] = None


def _oracle_index() -> dict:
    global _oracle_index_cache
    if _oracle_index_cache is None:
        idx: dict = {}
        for row in oracle_rows():
            idx.setdefault((row.scheme, row.label), []).append(row)
        _oracle_index_cache = idx
    return _oracle_index_cache


def attach_verification(entries, results) -> None:
    """Mark each catalogued case with the outcome of its oracle rows."""
    by_row = {r.row_id: r.passed for r in results}
    for e in entries:
        if not e.oracle:
            continue
        verdicts = [by_row[rid] for rid in e.oracle.split(";") if rid in by_row]
        if verdicts:
            e.oracle_verified = all(verdicts)


@dataclass
class OracleResult:
    row_id: str
    table: str
    label: str
    n_points: int
    max_rel_err: float
    lower_orders_max: float
    passed: bool
    message: str = ""


def _select_branch(facts: list[Factorization], branch: Optional[str]) -> Factorization:
    import sympy as sp

    if branch is None:
        candidates = [f for f in facts if not f.degenerate]
        if len(candidates) == 1:
            return candidates[0]
        for f in candidates:
            if branch_verdict(f) in ("attracting", "mixed"):
                return f
        raise ModelError("ambiguous branch selection")
    if branch == "neg-root":
        for f in facts:
            if f.root_sign == -1:
                return f
        raise ModelError("no quadratic branch with negative root")
    s_sym, c_sym = facts[0].chart_syms()
    target = {"c=1": c_sym - 1, "s=0": s_sym}[branch]
    for f in facts:
        q = sp.expand(f.f0)
        if q == sp.expand(target) or q == sp.expand(-target):
            return f
    raise ModelError(f"branch {branch!r} not found")


def verify_row(
    row: OracleRow,
    n_points: int = 20,
    n_draws: int = 3,
    rtol: float = 1e-8,
    seed: int = 0,
) -> OracleResult:
    """Check the parametrization output against one printed reduction."""
    params = MM_PARAMS[row.scheme]
    model_key = "mm-irreversible" if row.scheme == "irreversible" else "mm-reversible"
    reduced = builtin_reduction(model_key)
    categories = dict(zip(params, row.categories))
    rng = random.Random(seed)

    max_rel = 0.0
    max_lower = 0.0
    checked = 0
    for _ in range(n_draws):
        tilde = {p: rng.uniform(0.3, 3.0) for p in params}
        tilde[row.eps_param] = 1.0
        assignment = ScalingAssignment(categories=categories, tilde=tilde)
        eps = expand(reduced, assignment)
        facts = factorize(eps)
        fact = _select_branch(facts, row.branch)
        split = default_split(fact)
        for _ in range(n_points):
            x = rng.uniform(0.05, 0.95)
            try:
                jet = parametrize(fact, split, eps, [x], order=row.order)
            except NumericalError:
                continue
            expected = row.coeff(x, tilde)
            got = float(jet.r_terms[row.order - 1][0])
            rel = abs(got - expected) / max(1e-14, abs(expected))
            max_rel = max(max_rel, rel)
            for lower in jet.r_terms[: row.order - 1]:
                max_lower = max(max_lower, float(np.max(np.abs(lower))))
            checked += 1
    passed = checked > 0 and max_rel <= rtol and max_lower <= 1e-10
    return OracleResult(
        row_id=row.row_id,
        table=row.table,
        label=row.label,
        n_points=checked,
        max_rel_err=max_rel,
        lower_orders_max=max_lower,
        passed=passed,
        message="" if passed else "mismatch beyond tolerance",
    )


def verify_oracles(
    scheme: Optional[str] = None,
    n_points: int = 20,
    n_draws: int = 3,
    rtol: float = 1e-8,
    seed: int = 0,
) -> list[OracleResult]:
    rows = oracle_rows()
    if scheme:
        rows = [r for r in rows if r.scheme == scheme]
    return [
        verify_row(r, n_points=n_points, n_draws=n_draws, rtol=rtol, seed=seed)
        for r in rows
    ]


# ----------------------------------------------------------------------
# Kim-Forger scenario
# ----------------------------------------------------------------------

#: Published simulation values (rates per dimensionless time).
KF_TABLE_PARAMS = {
    "alpha": 0.004,
    "beta": 1.0,
    "rho1": 5e-6,
    "rho2": 1e-6,
    "rho3": 1e-5,
    "rho4": 1e-6,
    "rho5": 1e-6,
    "rho6": 1e-6,
}


@dataclass
class KFScenario:
    """Bundled Kim-Forger reduction at the published parameter point."""

    epsilon: float
    params: dict[str, float]
    eps_system: EpsilonSystem
    fact: Factorization
    split: object
    full_field: Callable        # 4-D chart field (x, y, z, s), original time
    full_jac: Callable
    reduced_field: Callable     # 3-D slow field (x, y, z), original time
    base_state: tuple[float, ...]
    oracle: Callable            # closed-form reduced field

    def reduced_initial(self) -> tuple[float, float, float]:
        return self.base_state[:3]


def kf_scenario(gamma_over_rho6: float = 1.0,
                params: Optional[dict[str, float]] = None) -> KFScenario:
    """Kim-Forger configuration eps := rho1, gamma & rho_i small, alpha & beta O(1)."""
    p = dict(KF_TABLE_PARAMS)
    if params:
        p.update(params)
    p["gamma"] = gamma_over_rho6 * p["rho6"]
    epsilon = p["rho1"]
    categories = {
        "alpha": ONE, "beta": ONE, "gamma": SMALL,
        "rho1": SMALL, "rho2": SMALL, "rho3": SMALL,
        "rho4": SMALL, "rho5": SMALL, "rho6": SMALL,
    }
    tilde = {k: (v if categories[k] == ONE else v / epsilon) for k, v in p.items()}
    reduced = builtin_reduction("kim-forger")
    assignment = ScalingAssignment(categories=categories, tilde=tilde, epsilon=epsilon)
    eps_sys = expand(reduced, assignment)
    fact = factorize(eps_sys)[0]
    split = default_split(fact)

    full_f, full_j = dynamics.chart_field(reduced, p)
    slow = reduced_field_fn(fact, split, eps_sys, epsilon, order=1)
    reduced_field = lambda t, y: slow(y)

    al, be = p["alpha"], p["beta"]
    r5t, r6t, gat = tilde["rho5"], tilde["rho6"], tilde["gamma"]
    r2t, r3t, r4t = tilde["rho2"], tilde["rho3"], tilde["rho4"]

    def oracle(y):
        x, yy, z = y
        azb = al + be * z
        K = azb / (azb * azb + al)
        return epsilon * np.array([
            al / azb - r2t * x,
            r3t * x - r4t * yy,
            K * (azb * (r5t * yy - r6t * z) - gat * z),
        ])

    ics = reduced.model.ic_vector()
    idx = {s: i for i, s in enumerate(reduced.model.species)}
    state0 = [float(ics[idx[s]]) for s in reduced.chart]
    return KFScenario(
        epsilon=epsilon,
        params=p,
        eps_system=eps_sys,
        fact=fact,
        split=split,
        full_field=full_f,
        full_jac=full_j,
        reduced_field=reduced_field,
        base_state=tuple(state0),
        oracle=oracle,
    )
