import hashlib
import json
import os

import pytest

from slowfast.cli import main

TQSSA_SCALING = {
    "epsilon": 0.005,
    "categories": {"alpha": "one", "beta": "one", "gamma": "small"},
    "tilde": {"alpha": 0.75, "beta": 1.0, "gamma": 1.0},
}


@pytest.fixture
def tqssa_json(tmp_path):
    path = tmp_path / "tqssa.json"
    path.write_text(json.dumps(TQSSA_SCALING))
    return str(path)


def _digest(path):
    return hashlib.sha256(open(path, "rb").read()).hexdigest()


def test_reduce_command(tqssa_json, tmp_path):
    out = str(tmp_path / "red")
    rc = main(["reduce", "--model", "mm-irreversible", "--scaling", tqssa_json,
               "--order", "1", "--out", out])
    assert rc == 0
    assert os.path.exists(os.path.join(out, "reduce_grid.csv"))
    assert os.path.exists(os.path.join(out, "reduce_summary.json"))
    assert os.path.exists(os.path.join(out, "reduce_profile.png"))
    summary = json.load(open(os.path.join(out, "reduce_summary.json")))
    assert summary["fiber_class"] == "T"
    assert summary["form"] == "1"
    with open(os.path.join(out, "reduce_grid.csv")) as fh:
        lines = fh.read().strip().splitlines()
    assert lines[0].startswith("s,psi0,psi1,R1,eigenvalue")
    assert len(lines) == 50


def test_reduce_missing_tilde_exits_2(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({
        "epsilon": 0.005,
        "categories": {"alpha": "one", "beta": "one", "gamma": "small"},
        "tilde": {"alpha": 0.75, "beta": 1.0},
    }))
    rc = main(["reduce", "--model", "mm-irreversible", "--scaling", str(bad),
               "--out", str(tmp_path / "o")])
    assert rc == 2
    err = capsys.readouterr().err
    assert "gamma" in err
    assert "[" in err  # stage tag


def test_reduce_unknown_model_exits_2(tqssa_json, tmp_path, capsys):
    rc = main(["reduce", "--model", "nope.json", "--scaling", tqssa_json,
               "--out", str(tmp_path / "o")])
    assert rc == 2
    assert "load-model" in capsys.readouterr().err


def test_classify_command(tqssa_json, tmp_path):
    out = str(tmp_path / "cls")
    rc = main(["classify", "--model", "mm-irreversible", "--scaling", tqssa_json,
               "--out", out, "--no-plot"])
    assert rc == 0
    payload = json.load(open(os.path.join(out, "classify.json")))
    assert payload["singular"] is True
    assert payload["fiber_class"] == "T"
    assert payload["branches"][0]["verdict"] == "attracting"


def test_simulate_command_deterministic(tqssa_json, tmp_path):
    out1, out2 = str(tmp_path / "s1"), str(tmp_path / "s2")
    for out in (out1, out2):
        rc = main(["simulate", "--model", "mm-irreversible", "--scaling",
                   tqssa_json, "--order", "1", "--t-final", "200",
                   "--out", out, "--seed", "11"])
        assert rc == 0
    for name in ("full.csv", "reduced.csv", "comparison.json"):
        assert _digest(os.path.join(out1, name)) == _digest(os.path.join(out2, name))
    comparison = json.load(open(os.path.join(out1, "comparison.json")))
    assert comparison["sup_error"] < 5e-3
    assert os.path.exists(os.path.join(out1, "simulate.png"))


def test_simulate_engine_flag(tqssa_json, tmp_path):
    out = str(tmp_path / "si")
    rc = main(["simulate", "--model", "mm-irreversible", "--scaling", tqssa_json,
               "--engine", "implicit", "--t-final", "50", "--out", out,
               "--no-plot"])
    assert rc == 0


def test_catalogue_command(tmp_path, capsys):
    out = str(tmp_path / "cat")
    rc = main(["catalogue", "--scheme", "irreversible", "--out", out,
               "--no-plot"])
    assert rc == 0
    text = capsys.readouterr().out
    assert "23 singular" in text
    assert "16 normally hyperbolic" in text
    with open(os.path.join(out, "catalogue_irreversible.csv")) as fh:
        lines = fh.read().strip().splitlines()
    assert len(lines) == 28  # header + 27 configurations


def test_catalogue_verify_subset(tmp_path, capsys, monkeypatch):
    # trim the row set for runtime: patch verify_oracles via env-free seam
    from slowfast import catalogue as cat

    orig = cat.verify_oracles

    def quick(scheme=None, **kw):
        kw.update(n_points=4, n_draws=1)
        return orig(scheme=scheme, **kw)

    monkeypatch.setattr(cat, "verify_oracles", quick)
    out = str(tmp_path / "cat2")
    rc = main(["catalogue", "--scheme", "irreversible", "--verify-oracles",
               "--out", out, "--no-plot"])
    assert rc == 0
    assert os.path.exists(os.path.join(out, "oracles.csv"))
    assert "PASS" in capsys.readouterr().out


def test_simulate_reconstructs_solved_coordinate(tqssa_json, tmp_path):
    out = str(tmp_path / "rec")
    rc = main(["simulate", "--model", "mm-irreversible", "--scaling",
               tqssa_json, "--t-final", "100", "--out", out, "--no-plot"])
    assert rc == 0
    with open(os.path.join(out, "reduced.csv")) as fh:
        header = fh.readline().strip()
    assert header == "t,s,c"
    comparison = json.load(open(os.path.join(out, "comparison.json")))
    assert comparison["eta_sup_error"] < 5e-3


def test_catalogue_deterministic(tmp_path):
    outs = []
    for tag in ("a", "b"):
        out = str(tmp_path / tag)
        rc = main(["catalogue", "--scheme", "irreversible", "--out", out,
                   "--no-plot", "--seed", "3"])
        assert rc == 0
        outs.append(os.path.join(out, "catalogue_irreversible.csv"))
    assert _digest(outs[0]) == _digest(outs[1])


def test_catalogue_json_format(tmp_path):
    out = str(tmp_path / "catj")
    rc = main(["catalogue", "--scheme", "irreversible", "--out", out,
               "--format", "json", "--no-plot"])
    assert rc == 0
    payload = json.load(open(os.path.join(out, "catalogue_irreversible.json")))
    assert len(payload) == 27


def test_kf_invalid_gamma_exits_2(tmp_path, capsys):
    rc = main(["kf", "--gamma-factor", "-2.0", "--t-final", "1e5",
               "--out", str(tmp_path / "k")])
    assert rc == 2
    assert "kf-scenario" in capsys.readouterr().err


def test_shipped_config_files(tmp_path):
    root = os.path.join(os.path.dirname(__file__), "..", "configs")
    rc = main(["reduce", "--model", "mm-irreversible",
               "--scaling", os.path.join(root, "mm-tqssa.json"),
               "--out", str(tmp_path / "a"), "--no-plot"])
    assert rc == 0
    rc = main(["classify", "--model", "kim-forger",
               "--scaling", os.path.join(root, "kim-forger.json"),
               "--out", str(tmp_path / "b"), "--no-plot"])
    assert rc == 0
    from slowfast.crn import load_model

    model = load_model(os.path.join(root, "dimerization.json"))
    assert model.species == ("m", "d")
    assert model.reactions[0].reactants == (2, 0)


def test_kf_command(tmp_path):
    out = str(tmp_path / "kf")
    rc = main(["kf", "--gamma-factor", "1.5", "--t-final", "2e6",
               "--out", out])
    assert rc == 0
    for name in ("kf_full.csv", "kf_reduced.csv", "kf_comparison.json", "kf.png"):
        assert os.path.exists(os.path.join(out, name))
    comparison = json.load(open(os.path.join(out, "kf_comparison.json")))
    assert comparison["gamma_over_rho6"] == 1.5
    assert comparison["sup_error"] < 1e-3
