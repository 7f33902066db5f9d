"""Mass-action reaction networks and their exact conservation-law reduction.

A network is a list of species and reactions with symbolic rate parameters.
The governing ODEs are assembled as dx/dt = S·V(x) with integer kinetic
orders; stoichiometric columns may carry a per-species scale factor (a
rational multiple of one designated parameter), which is how the shipped
dimensionless models represent rows rescaled by the enzyme/substrate ratio.

Conservation laws are left nullvectors of S, computed exactly over the
rationals (extended by the scale parameter) and canonicalised to reduced
row-echelon form. Fixing their values from the initial condition restricts
the dynamics to an invariant affine subspace and yields an exact
lower-dimensional model over a caller-chosen coordinate chart.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional, Sequence

import sympy as sp

from .errors import ChartError, ModelError

__all__ = [
    "Reaction",
    "CrnModel",
    "ConservationBasis",
    "ReducedSystem",
    "build_rhs",
    "conservation_laws",
    "reduce_to_class",
    "totals_from_ics",
    "load_model",
    "load_crn_json",
    "mm_irreversible",
    "mm_reversible",
    "kim_forger",
    "BUILTIN_MODELS",
]


def species_symbol(name: str) -> sp.Symbol:
    return sp.Symbol(name, real=True)


def param_symbol(name: str) -> sp.Symbol:
    return sp.Symbol(name, positive=True)


@dataclass(frozen=True)
class Reaction:
    """One reaction: integer reactant/product stoichiometries over the
    species list, plus the name of its rate parameter (None = unit rate)."""

    reactants: tuple[int, ...]
    products: tuple[int, ...]
    rate: Optional[str]

    def monomial(self, species_syms: Sequence[sp.Symbol]) -> sp.Expr:
        """Mass-action rate monomial: product of reactant concentrations
        raised to their stoichiometries."""
        m = sp.Integer(1)
        for x, e in zip(species_syms, self.reactants):
            if e:
                m *= x ** e
        return m


@dataclass(frozen=True)
class CrnModel:
    """Immutable mass-action network.

    ``species_scale`` holds the optional per-species row scale of the
    stoichiometry matrix (1 or a rational multiple of a single parameter
    symbol); plain integer networks leave it empty.
    """

    species: tuple[str, ...]
    reactions: tuple[Reaction, ...]
    params: tuple[str, ...]
    param_values: dict[str, Optional[Fraction]] = field(default_factory=dict)
    ics: dict[str, Fraction] = field(default_factory=dict)
    species_scale: dict[str, str] = field(default_factory=dict)
    name: str = ""

    def __post_init__(self):
        if len(set(self.species)) != len(self.species):
            raise ModelError(f"duplicate species names in {list(self.species)}")
        if len(set(self.params)) != len(self.params):
            raise ModelError(f"duplicate parameter names in {list(self.params)}")
        if set(self.species) & set(self.params):
            raise ModelError("species and parameter names must be disjoint")
        n = len(self.species)
        for rx in self.reactions:
            if len(rx.reactants) != n or len(rx.products) != n:
                raise ModelError("reaction stoichiometry length does not match species")
            if any(e < 0 for e in rx.reactants) or any(e < 0 for e in rx.products):
                raise ModelError("negative stoichiometry")
            if rx.rate is not None and rx.rate not in self.params:
                raise ModelError(f"rate parameter {rx.rate!r} not declared")
        for name in self.species_scale:
            if name not in self.species:
                raise ModelError(f"scale given for unknown species {name!r}")

    @property
    def n_species(self) -> int:
        return len(self.species)

    @property
    def n_reactions(self) -> int:
        return len(self.reactions)

    def species_syms(self) -> list[sp.Symbol]:
        return [species_symbol(s) for s in self.species]

    def param_syms(self) -> dict[str, sp.Symbol]:
        return {p: param_symbol(p) for p in self.params}

    def scale_expr(self, name: str) -> sp.Expr:
        raw = self.species_scale.get(name)
        if raw is None:
            return sp.Integer(1)
        return sp.sympify(raw, locals={p: param_symbol(p) for p in self.params})

    def stoichiometry(self) -> sp.Matrix:
        """n x m stoichiometry matrix, scale factors applied row-wise."""
        cols = []
        for rx in self.reactions:
            col = [
                self.scale_expr(name) * (p - r)
                for name, r, p in zip(self.species, rx.reactants, rx.products)
            ]
            cols.append(col)
        return sp.Matrix(cols).T if cols else sp.zeros(self.n_species, 0)

    def reaction_vector(self) -> sp.Matrix:
        """Mass-action reaction rate vector V(x)."""
        syms = self.species_syms()
        entries = []
        for rx in self.reactions:
            rate = sp.Integer(1) if rx.rate is None else param_symbol(rx.rate)
            entries.append(rate * rx.monomial(syms))
        return sp.Matrix(entries) if entries else sp.zeros(0, 1)

    def ic_vector(self) -> list[Fraction]:
        return [Fraction(self.ics.get(s, 0)) for s in self.species]


def build_rhs(model: CrnModel) -> sp.Matrix:
    """Governing ODE right-hand side S·V(x), exact coefficients."""
    if model.n_reactions == 0:
        return sp.zeros(model.n_species, 1)
    return sp.expand(model.stoichiometry() * model.reaction_vector())


@dataclass(frozen=True)
class ConservationBasis:
    """Canonical (RREF) rational basis of the left nullspace of S."""

    vectors: tuple[tuple[sp.Expr, ...], ...]
    rank: int

    @property
    def n_laws(self) -> int:
        return len(self.vectors)

    def matrix(self) -> sp.Matrix:
        if not self.vectors:
            return sp.zeros(0, 0)
        return sp.Matrix([list(v) for v in self.vectors])


def conservation_laws(model: CrnModel) -> ConservationBasis:
    """Exact basis of {v : v·S = 0} via Gaussian elimination over the
    rationals (scale parameters treated as positive indeterminates)."""
    S = model.stoichiometry()
    rank = S.rank()
    null = S.T.nullspace()
    if not null:
        return ConservationBasis(vectors=(), rank=rank)
    rows = sp.Matrix([list(v.T) for v in null])
    rref, _ = rows.rref()
    vectors = tuple(
        tuple(sp.nsimplify(sp.cancel(x)) for x in rref.row(i))
        for i in range(len(null))
    )
    return ConservationBasis(vectors=vectors, rank=rank)


def totals_from_ics(model: CrnModel, basis: ConservationBasis) -> tuple[sp.Expr, ...]:
    """Conserved-quantity values v·x(0) fixed by the model's initial condition."""
    x0 = [sp.Rational(v) for v in model.ic_vector()]
    return tuple(
        sp.expand(sum(c * x for c, x in zip(vec, x0))) for vec in basis.vectors
    )


@dataclass(frozen=True)
class ReducedSystem:
    """Exact restriction of a network to its invariant affine subspace.

    ``eliminated`` maps each removed species to an affine expression in the
    chart coordinates and the conserved totals; ``rhs`` is the polynomial
    vector field in the chart coordinates (dimension = rank of S).
    """

    model: CrnModel
    chart: tuple[str, ...]
    eliminated: dict[str, sp.Expr]
    rhs: sp.Matrix
    totals: tuple[sp.Expr, ...]

    @property
    def dim(self) -> int:
        return len(self.chart)

    def chart_syms(self) -> list[sp.Symbol]:
        return [species_symbol(s) for s in self.chart]

    def param_names(self) -> tuple[str, ...]:
        return self.model.params

    def lift(self, chart_values: dict[sp.Symbol, sp.Expr]) -> dict[str, sp.Expr]:
        """Full species assignment from chart values via the eliminations."""
        out = {s: chart_values[species_symbol(s)] for s in self.chart}
        for name, expr in self.eliminated.items():
            out[name] = expr.subs(chart_values)
        return out


def reduce_to_class(
    model: CrnModel,
    basis: ConservationBasis,
    chart: Sequence[str],
    totals: Sequence,
) -> ReducedSystem:
    """Eliminate one species per conservation law, solving the laws as a
    global affine graph over the requested chart."""
    chart = tuple(chart)
    for s in chart:
        if s not in model.species:
            raise ModelError(f"chart species {s!r} not in model")
    eliminated_names = [s for s in model.species if s not in chart]
    if len(chart) != basis.rank or len(eliminated_names) != basis.n_laws:
        raise ChartError(
            f"chart must have {basis.rank} coordinates "
            f"(got {len(chart)}; {basis.n_laws} conservation laws)"
        )
    if len(totals) != basis.n_laws:
        raise ModelError("one total per conservation law required")

    rhs_full = build_rhs(model)
    idx = {s: i for i, s in enumerate(model.species)}
    if not eliminated_names:
        return ReducedSystem(model, chart, {}, rhs_full, tuple())

    B = basis.matrix()
    elim_idx = [idx[s] for s in eliminated_names]
    chart_idx = [idx[s] for s in chart]
    A = B[:, elim_idx]
    if A.det() == 0:
        raise ChartError(
            f"conservation laws are not solvable over chart {chart}: "
            "singular elimination block"
        )
    chart_vec = sp.Matrix([species_symbol(s) for s in chart])
    rhs_lin = sp.Matrix([sp.Rational(t) if not isinstance(t, sp.Expr) else t for t in totals]) \
        - B[:, chart_idx] * chart_vec
    sol = A.solve(rhs_lin)
    eliminated = {
        name: sp.expand(sol[i]) for i, name in enumerate(eliminated_names)
    }
    subs = {species_symbol(n): e for n, e in eliminated.items()}
    rhs = sp.Matrix([sp.expand(rhs_full[i].subs(subs)) for i in chart_idx])
    return ReducedSystem(model, chart, eliminated, rhs, tuple(sp.sympify(t) for t in totals))


# ----------------------------------------------------------------------
# Built-in dimensionless models
# ----------------------------------------------------------------------

def _mm_reactions(reversible: bool) -> tuple[Reaction, ...]:
    # species order (s, e, c, p)
    rxs = [
        Reaction((1, 1, 0, 0), (0, 0, 1, 0), None),      # s + e -> c (unit rate)
        Reaction((0, 0, 1, 0), (1, 1, 0, 0), "alpha"),   # c -> s + e
        Reaction((0, 0, 1, 0), (0, 1, 0, 1), "gamma"),   # c -> p + e
    ]
    if reversible:
        rxs.append(Reaction((0, 1, 0, 1), (0, 0, 1, 0), "delta"))  # p + e -> c
    return tuple(rxs)


def mm_reversible() -> CrnModel:
    """Dimensionless reversible Michaelis-Menten scheme, chart-ready."""
    return CrnModel(
        species=("s", "e", "c", "p"),
        reactions=_mm_reactions(reversible=True),
        params=("alpha", "beta", "gamma", "delta"),
        param_values={p: None for p in ("alpha", "beta", "gamma", "delta")},
        ics={"s": Fraction(1), "e": Fraction(1), "c": Fraction(0), "p": Fraction(0)},
        species_scale={"s": "beta", "p": "beta"},
        name="mm-reversible",
    )


def mm_irreversible() -> CrnModel:
    """Dimensionless irreversible Michaelis-Menten scheme (its own
    3-parameter model, not the delta->0 limit of the reversible one)."""
    return CrnModel(
        species=("s", "e", "c", "p"),
        reactions=_mm_reactions(reversible=False),
        params=("alpha", "beta", "gamma"),
        param_values={p: None for p in ("alpha", "beta", "gamma")},
        ics={"s": Fraction(1), "e": Fraction(1), "c": Fraction(0), "p": Fraction(0)},
        species_scale={"s": "beta", "p": "beta"},
        name="mm-irreversible",
    )


def kim_forger() -> CrnModel:
    """Dimensionless Kim-Forger negative-feedback oscillator (5 species,
    9 reactions, sequestration of the activator by the repressor)."""
    def rx(reactants, products, rate):
        spec = ("x", "y", "z", "s", "c")
        r = tuple(reactants.get(k, 0) for k in spec)
        p = tuple(products.get(k, 0) for k in spec)
        return Reaction(r, p, rate)

    reactions = (
        rx({"s": 1}, {"x": 1, "s": 1}, "rho1"),
        rx({"x": 1}, {}, "rho2"),
        rx({"x": 1}, {"x": 1, "y": 1}, "rho3"),
        rx({"y": 1}, {}, "rho4"),
        rx({"y": 1}, {"y": 1, "z": 1}, "rho5"),
        rx({"z": 1}, {}, "rho6"),
        rx({"s": 1, "z": 1}, {"c": 1}, None),            # sequestration, unit rate
        rx({"c": 1}, {"s": 1, "z": 1}, "alpha"),
        rx({"c": 1}, {"s": 1}, "gamma"),
    )
    z0 = Fraction("0.06128")
    return CrnModel(
        species=("x", "y", "z", "s", "c"),
        reactions=reactions,
        params=("alpha", "beta", "gamma", "rho1", "rho2", "rho3", "rho4", "rho5", "rho6"),
        param_values={p: None for p in (
            "alpha", "beta", "gamma", "rho1", "rho2", "rho3", "rho4", "rho5", "rho6")},
        # z(0) = s(0) per the published simulation table; c(0) closes s + beta*c = 1
        # for beta = 1.
        ics={"x": Fraction(1), "y": Fraction(1), "z": z0, "s": z0, "c": 1 - z0},
        species_scale={"s": "beta"},
        name="kim-forger",
    )


BUILTIN_MODELS = {
    "mm-irreversible": mm_irreversible,
    "mm-reversible": mm_reversible,
    "kim-forger": kim_forger,
}

#: Default chart and elimination order of the built-ins.
BUILTIN_CHARTS = {
    "mm-irreversible": ("s", "c"),
    "mm-reversible": ("s", "c"),
    "kim-forger": ("x", "y", "z", "s"),
}


def load_crn_json(path: str) -> CrnModel:
    """Load a network from the JSON interchange format.

    Schema: {"species": [...], "params": {name: value|null},
             "reactions": [{"reactants": {sp: int}, "products": {sp: int},
                            "rate": name}],
             "ics": {species: number}}
    """
    try:
        with open(path) as fh:
            data = json.load(fh)
    except OSError as exc:
        raise ModelError(f"cannot read CRN file {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ModelError(f"CRN file {path} is not valid JSON: {exc}") from exc
    try:
        species = tuple(data["species"])
        params_raw = data["params"]
        reactions = []
        for rx in data["reactions"]:
            r = tuple(int(rx.get("reactants", {}).get(s, 0)) for s in species)
            p = tuple(int(rx.get("products", {}).get(s, 0)) for s in species)
            reactions.append(Reaction(r, p, rx.get("rate")))
        ics = {k: Fraction(str(v)) for k, v in data.get("ics", {}).items()}
    except (KeyError, TypeError, ValueError) as exc:
        raise ModelError(f"malformed CRN file {path}: {exc}") from exc
    param_values = {
        k: None if v is None else Fraction(str(v)) for k, v in params_raw.items()
    }
    return CrnModel(
        species=species,
        reactions=tuple(reactions),
        params=tuple(params_raw),
        param_values=param_values,
        ics=ics,
        name=data.get("name", path),
    )


def load_model(name_or_path: str) -> CrnModel:
    """Resolve a built-in identifier or load a CRN JSON file."""
    if name_or_path in BUILTIN_MODELS:
        return BUILTIN_MODELS[name_or_path]()
    return load_crn_json(name_or_path)


def builtin_reduction(name: str) -> ReducedSystem:
    """Built-in model reduced over its standard chart.

    The conserved totals of the dimensionless built-ins are exactly 1 by
    construction of the reference scales (the numeric initial conditions
    realise them for beta = 1).
    """
    model = load_model(name)
    basis = conservation_laws(model)
    chart = BUILTIN_CHARTS[name]
    totals = (1,) * basis.n_laws
    return reduce_to_class(model, basis, chart, totals)
