"""Command-line interface.

Subcommands: reduce, classify, simulate, catalogue, kf. Outputs are CSV/JSON
files (deterministic for a fixed seed) plus rendered figures unless
--no-plot is given. Exit codes: 0 success, 2 invalid input, 3 numerical
failure; stderr messages name the failing stage.
"""

from __future__ import annotations

import argparse
import os
import sys

import numpy as np

from . import catalogue as cat
from . import dynamics, report
from .crn import BUILTIN_CHARTS, conservation_laws, load_model, reduce_to_class
from .errors import ModelError, NumericalError, SlowfastError
from .geometry import branch_verdict, classify_geometry, default_split
from .integrators import integrate
from .reduction import conjugacy_residual, parametrize, reduced_field_fn
from .scaling import detect_singular, expand, factorize, load_scaling_json

_PUBLISHED = {
    "irreversible": {"total": 27, "singular": 23, "nh": 16,
                     "classes": {"S": 11, "T": 5, "R": 7}},
    "reversible": {"total": 81, "singular": 67, "nh": 47,
                   "relevant": {"S": 22, "T": 5}},
}


class _Stage:
    """Context manager that tags errors with the pipeline stage name."""

    def __init__(self, name):
        self.name = name

    def __enter__(self):
        return self

    def __exit__(self, exc_type, exc, tb):
        if exc is not None and isinstance(exc, SlowfastError):
            exc.stage = self.name
        return False


def _load(args):
    with _Stage("load-model"):
        model = load_model(args.model)
    with _Stage("load-scaling"):
        assignment, epsilon = load_scaling_json(args.scaling, model.params)
    if args.epsilon is not None:
        epsilon = args.epsilon
    if epsilon <= 0:
        raise ModelError("epsilon must be positive")
    return model, assignment, epsilon


def _reduce_chain(model, assignment, chart=None):
    with _Stage("conservation"):
        basis = conservation_laws(model)
        chart = chart or BUILTIN_CHARTS.get(model.name)
        if chart is None:
            chart = tuple(model.species[: basis.rank])
        totals = (1,) * basis.n_laws if model.name in BUILTIN_CHARTS else None
        if totals is None:
            from .crn import totals_from_ics
            totals = totals_from_ics(model, basis)
        reduced = reduce_to_class(model, basis, chart, totals)
    with _Stage("expand"):
        eps_sys = expand(reduced, assignment)
    return reduced, eps_sys


def _pick_branch(facts):
    live = [f for f in facts if not f.degenerate]
    if len(live) == 1:
        return live[0]
    for f in live:
        if branch_verdict(f) in ("attracting", "mixed"):
            return f
    if live:
        return live[0]
    raise NumericalError("no non-degenerate branch available")


def _grid_rho(eps_sys, fact, split, npoints):
    """Sample line through the chart: vary the last rho coordinate."""
    model = eps_sys.reduced.model
    ics = dict(zip(model.species, model.ic_vector()))
    base = [float(ics[eps_sys.chart[i]]) for i in split.rho]
    grid = np.linspace(0.02, 0.98, npoints)
    rhos = []
    for g in grid:
        point = list(base)
        point[-1] = float(g)
        rhos.append(point)
    return grid, rhos


def cmd_reduce(args) -> int:
    model, assignment, epsilon = _load(args)
    reduced, eps_sys = _reduce_chain(model, assignment, args.chart)
    with _Stage("factorize"):
        verdict = detect_singular(eps_sys)
        if not verdict:
            raise ModelError("configuration is not singularly perturbed")
        facts = factorize(eps_sys)
        fact = _pick_branch(facts)
        split = default_split(fact)
    os.makedirs(args.out, exist_ok=True)

    grid, rhos = _grid_rho(eps_sys, fact, split, args.npoints)
    rho_names = [eps_sys.chart[i] for i in split.rho]
    rows = []
    psi0 = np.empty(len(grid))
    rvals = np.full((len(grid), args.order), np.nan)
    eigs = np.empty(len(grid))
    with _Stage("parametrize"):
        for i, rho in enumerate(rhos):
            jet = parametrize(fact, split, eps_sys, rho, order=args.order)
            res = conjugacy_residual(jet, eps_sys, epsilon)
            psi0[i] = jet.psi[0]
            eigs[i] = jet.eigenvalues[0].real
            rvals[i] = [rv[-1] for rv in jet.r_terms]
            rows.append(
                [f"{v:.12g}" for v in rho]
                + [f"{p:.12g}" for p in jet.psi]
                + [f"{comp:.12g}" for rv in jet.r_terms for comp in rv]
                + [f"{jet.eigenvalues[0].real:.12g}", f"{res:.6e}"]
            )
    r_cols = [
        f"R{j}_{name}" if split.k > 1 else f"R{j}"
        for j in range(1, args.order + 1)
        for name in rho_names
    ]
    header = (
        rho_names
        + [f"psi{j}" for j in range(args.order + 1)]
        + r_cols
        + ["eigenvalue", f"residual_eps_{epsilon:g}"]
    )
    ext = args.format
    report.write_csv(os.path.join(args.out, f"reduce_grid.{ext}"), header, rows) \
        if ext == "csv" else report.write_json(
            os.path.join(args.out, f"reduce_grid.{ext}"),
            [dict(zip(header, r)) for r in rows])
    geo = classify_geometry(facts)
    report.write_json(os.path.join(args.out, "reduce_summary.json"), {
        "model": args.model,
        "branch": fact.branch_id,
        "fiber_class": geo.fiber_class,
        "form": geo.form,
        "epsilon": epsilon,
        "order": args.order,
        "time_shift": eps_sys.time_shift,
        "n_branches": len(facts),
    })
    if not args.no_plot:
        report.plot_reduction_profile(
            os.path.join(args.out, "reduce_profile.png"),
            grid, psi0, rvals, eigs, rho_names[-1],
            title=f"{args.model}: slow reduction (order {args.order})",
        )
    print(f"reduce: wrote {args.out} (branch {fact.branch_id}, "
          f"class {geo.fiber_class}, form {geo.form})")
    return 0


def cmd_classify(args) -> int:
    model, assignment, _ = _load(args)
    _, eps_sys = _reduce_chain(model, assignment, args.chart)
    with _Stage("classify"):
        verdict = detect_singular(eps_sys)
        payload = {
            "model": args.model,
            "singular": bool(verdict),
            "time_shift": eps_sys.time_shift,
        }
        if verdict:
            facts = factorize(eps_sys)
            geo = classify_geometry(facts)

            def _verdict(f):
                if len(f.chart) != 2:
                    return "unsampled (non-planar chart)"
                return branch_verdict(f)

            payload.update({
                "k": verdict.k,
                "fiber_class": geo.fiber_class,
                "form": geo.form,
                "branches": [
                    {"id": f.branch_id, "degenerate": f.degenerate,
                     "verdict": _verdict(f)}
                    for f in facts
                ],
            })
    os.makedirs(args.out, exist_ok=True)
    path = report.write_json(os.path.join(args.out, "classify.json"), payload)
    print(f"classify: wrote {path}")
    return 0


def cmd_simulate(args) -> int:
    model, assignment, epsilon = _load(args)
    reduced, eps_sys = _reduce_chain(model, assignment, args.chart)
    with _Stage("factorize"):
        facts = factorize(eps_sys)
        fact = _pick_branch(facts)
        split = default_split(fact)
    params = assignment.numeric_params(epsilon)
    with _Stage("base-point"):
        ics = dict(zip(model.species, (float(v) for v in model.ic_vector())))
        y0 = [ics[s] for s in reduced.chart]
        bp = dynamics.base_point(fact, split, y0)
    order = args.order
    t_final = args.t_final if args.t_final else 5.0 / epsilon ** order

    f_full, j_full = dynamics.chart_field(reduced, params)
    lam = abs(parametrize(fact, split, eps_sys, list(bp.rho),
                          order=1).eigenvalues[0].real)
    engine = args.engine
    if engine == "auto":
        engine = dynamics.select_engine(epsilon, lam / epsilon ** eps_sys.time_shift)
    with _Stage("integrate-full"):
        full = integrate(f_full, list(bp.yb), (0.0, t_final),
                         rtol=args.rtol, atol=args.atol, engine=engine,
                         jac=j_full)
    with _Stage("integrate-reduced"):
        # reduced flow in the rescaled time frame; map back to original time
        slow = reduced_field_fn(fact, split, eps_sys, epsilon, order=order)
        scale = epsilon ** -eps_sys.time_shift
        f_red = lambda t, y: scale * slow(y)
        red = integrate(f_red, list(bp.rho), (0.0, t_final),
                        rtol=args.rtol, atol=args.atol, engine="explicit")

    os.makedirs(args.out, exist_ok=True)
    names = list(reduced.chart)
    report.write_trajectory_csv(os.path.join(args.out, "full.csv"), full, names)
    # lift the reduced flow back to the full chart: the solved coordinate is
    # reconstructed from the corrected graph
    with _Stage("reconstruct"):
        ts = np.linspace(red.times[0], red.times[-1], 400)
        lifted_states = dynamics.reconstruct_chart_states(
            fact, split, red.sample(ts), epsilon, order=order)
        from slowfast.integrators import Trajectory

        lifted = Trajectory(
            times=ts, states=lifted_states,
            derivs=np.gradient(lifted_states, ts, axis=0),
        )
    report.write_trajectory_csv(os.path.join(args.out, "reduced.csv"), lifted, names)
    comparison = dynamics.tracking_report(
        full, lifted, split.rho[-1], split.rho[-1], epsilon, order)
    comparison["eta_sup_error"] = dynamics.tracking_report(
        full, lifted, split.eta[0], split.eta[0], epsilon, order)["sup_error"]
    report.write_json(os.path.join(args.out, "comparison.json"), comparison)
    if not args.no_plot:
        report.plot_trajectories(
            os.path.join(args.out, "simulate.png"),
            [("full", full, names), ("reduced", lifted, names)],
            components=names if split.dim <= 2 else
            [names[i] for i in (split.rho[-1], split.eta[0])],
            title=f"{args.model}: full vs reduced (eps={epsilon:g})",
        )
    print(f"simulate: wrote {args.out} (engine {engine}, "
          f"sup error {comparison['sup_error']:.3e})")
    return 0


def cmd_catalogue(args) -> int:
    threads = int(os.environ.get("SLOWFAST_THREADS", "1"))
    schemes = [args.scheme] if args.scheme else ["irreversible", "reversible"]
    os.makedirs(args.out, exist_ok=True)
    status = 0
    oracle_results = []
    if args.verify_oracles:
        with _Stage("verify-oracles"):
            oracle_results = cat.verify_oracles(scheme=args.scheme,
                                                seed=args.seed)
    for scheme in schemes:
        with _Stage("enumerate"):
            entries = cat.enumerate_mm(scheme, threads=threads)
            if oracle_results:
                cat.attach_verification(entries, oracle_results)
            summary = cat.census(entries)
        path = os.path.join(args.out, f"catalogue_{scheme}.{args.format}")
        report.write_catalogue(path, entries, fmt=args.format)
        expected = _PUBLISHED[scheme]
        ok = (summary.total == expected["total"]
              and summary.singular == expected["singular"]
              and summary.normally_hyperbolic == expected["nh"])
        if "classes" in expected:
            ok = ok and summary.by_class == expected["classes"]
        if "relevant" in expected:
            ok = ok and summary.relevant_by_class == expected["relevant"]
        line = (f"{scheme}: {summary.total} configurations, "
                f"{summary.singular} singular, "
                f"{summary.normally_hyperbolic} normally hyperbolic, "
                f"classes {summary.by_class}, relevant {summary.relevant_by_class}"
                f" [{'ok' if ok else 'MISMATCH'}]")
        print(line)
        if not ok:
            status = 1
        if not args.no_plot:
            report.plot_census(
                os.path.join(args.out, f"catalogue_{scheme}.png"),
                entries, title=f"{scheme} census")
    if args.verify_oracles:
        report.write_oracle_report(
            os.path.join(args.out, f"oracles.{args.format}"), oracle_results,
            fmt=args.format)
        for r in oracle_results:
            print(f"  {'PASS' if r.passed else 'FAIL'} {r.row_id} "
                  f"(max rel err {r.max_rel_err:.2e})")
        if not all(r.passed for r in oracle_results):
            status = 1
    return status


def cmd_kf(args) -> int:
    with _Stage("kf-scenario"):
        scenario = cat.kf_scenario(args.gamma_factor)
    t_final = args.t_final if args.t_final else 2.4e8
    with _Stage("integrate-full"):
        full = integrate(scenario.full_field, scenario.base_state,
                         (0.0, t_final), engine="implicit",
                         jac=scenario.full_jac, rtol=args.rtol, atol=args.atol,
                         max_step=t_final / 120.0)
    with _Stage("integrate-reduced"):
        red = integrate(scenario.reduced_field, scenario.reduced_initial(),
                        (0.0, t_final), engine="explicit",
                        rtol=args.rtol, atol=args.atol,
                        max_step=t_final / 120.0)
    os.makedirs(args.out, exist_ok=True)
    names4 = ["x", "y", "z", "s"]
    report.write_trajectory_csv(os.path.join(args.out, "kf_full.csv"), full, names4)
    report.write_trajectory_csv(
        os.path.join(args.out, "kf_reduced.csv"), red, names4[:3])
    comparison = dynamics.tracking_report(full, red, 2, 2, scenario.epsilon, 1)
    comparison["gamma_over_rho6"] = args.gamma_factor
    report.write_json(os.path.join(args.out, "kf_comparison.json"), comparison)
    if not args.no_plot:
        report.plot_trajectories(
            os.path.join(args.out, "kf.png"),
            [("full 4-D", full, names4), ("reduced 3-D", red, names4[:3])],
            components=["z"],
            title=f"Kim-Forger, gamma = {args.gamma_factor:g} rho6",
        )
    print(f"kf: wrote {args.out} (z sup error {comparison['sup_error']:.3e})")
    return 0


def _add_common(p, scaling_required=True):
    p.add_argument("--out", default="slowfast-out", help="output directory")
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--no-plot", action="store_true",
                   help="skip figure rendering")


def _add_model(p):
    p.add_argument("--model", required=True,
                   help="built-in id (mm-irreversible, mm-reversible, "
                        "kim-forger) or CRN JSON path")
    p.add_argument("--scaling", required=True, help="scaling assignment JSON")
    p.add_argument("--epsilon", type=float, default=None,
                   help="override the scaling file's epsilon")
    p.add_argument("--chart", type=lambda s: tuple(s.split(",")), default=None,
                   help="comma-separated chart species")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="slowfast",
        description="Slow-manifold reductions of mass-action networks",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("reduce", help="manifold, projectors, slow-field grid")
    _add_model(p)
    p.add_argument("--order", type=int, choices=(1, 2, 3), default=1)
    p.add_argument("--npoints", type=int, default=49)
    _add_common(p)
    p.set_defaults(func=cmd_reduce)

    p = sub.add_parser("classify", help="singularity/class/form verdict")
    _add_model(p)
    _add_common(p)
    p.set_defaults(func=cmd_classify)

    p = sub.add_parser("simulate", help="full vs reduced trajectories")
    _add_model(p)
    p.add_argument("--order", type=int, choices=(1, 2, 3), default=1)
    p.add_argument("--engine", choices=("auto", "explicit", "implicit"),
                   default="auto")
    p.add_argument("--t-final", type=float, default=None)
    p.add_argument("--rtol", type=float, default=1e-8)
    p.add_argument("--atol", type=float, default=1e-10)
    _add_common(p)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("catalogue", help="census and oracle verification")
    p.add_argument("--scheme", choices=("irreversible", "reversible"),
                   default=None)
    p.add_argument("--verify-oracles", action="store_true")
    _add_common(p)
    p.set_defaults(func=cmd_catalogue)

    p = sub.add_parser("kf", help="Kim-Forger full vs reduced run")
    p.add_argument("--gamma-factor", type=float, default=1.0,
                   help="gamma as a multiple of rho6")
    p.add_argument("--t-final", type=float, default=None)
    p.add_argument("--rtol", type=float, default=1e-6)
    p.add_argument("--atol", type=float, default=1e-10)
    _add_common(p)
    p.set_defaults(func=cmd_kf)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ModelError as exc:
        stage = getattr(exc, "stage", "validation")
        print(f"slowfast: [{stage}] {exc}", file=sys.stderr)
        return 2
    except NumericalError as exc:
        stage = getattr(exc, "stage", "numerics")
        print(f"slowfast: [{stage}] {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
