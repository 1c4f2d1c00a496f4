import json
from dataclasses import replace

import numpy as np
import pytest

from pfp import CountLaw, ProblemSpec, mk_discrete
from pfp.cli import RunConfig, main, parse_config, run, serialize
from pfp.errors import InvalidLaw, MissingField, ParseError, UnknownEquationKind
from pfp.transforms import parse_csv

EXPONENTIAL = {
    "equation": {"kind": "homogeneous", "mu": 1.0},
    "N": {"family": "geometric1", "p": 0.5},
    "T": {"atoms": [[0.5, 1.0]]},
}
IDENTITY = {
    "equation": {"kind": "homogeneous", "mu": 1.0},
    "N": {"family": "degenerate", "k": 1},
    "T": {"atoms": [[1.0, 1.0]]},
}


def write(tmp_path, doc, name="cfg.json"):
    path = tmp_path / name
    path.write_text(json.dumps(doc, indent=2))
    return str(path)


def test_run_defaults():
    cfg = parse_config(json.dumps(EXPONENTIAL))
    assert (cfg.command, cfg.tol, cfg.samples, cfg.depth, cfg.seed, cfg.backend, cfg.tol_eq) == (
        "check", 1e-8, 100_000, 40, 0, "auto", 1e-9)
    assert cfg.max_iter is None and cfg.alpha is None and cfg.output_path is None


@pytest.mark.parametrize("problem", [
    ProblemSpec("homogeneous", CountLaw.geometric1(0.5), mk_discrete([(0.5, 1.0)]), 1.0),
    ProblemSpec("floored", CountLaw.explicit({1: 0.5, 2: 0.5}), mk_discrete([(0.2, 0.5), (0.6, 0.5)]), 1.0, m=1),
    ProblemSpec("common_t", CountLaw.poisson(2.0), mk_discrete([(0.3, 0.5), (0.7, 0.5)]), 2.5),
    ProblemSpec("nonhomogeneous", CountLaw.geometric0(0.4), mk_discrete([(0.0, 0.3), (0.5, 0.7)]), None,
                b=mk_discrete([(0.0, 0.5), (2.0, 0.5)])),
])
def test_serialize_round_trip(problem):
    cfg = RunConfig(problem, command="simulate", tol=1e-6, samples=500, depth=7, seed=3, backend="grid")
    back = parse_config(serialize(cfg))
    assert back == cfg
    assert serialize(back) == serialize(cfg)


def test_parse_errors():
    doc = {**EXPONENTIAL, "equation": {"kind": "nonhomogeneous"}}
    with pytest.raises(MissingField, match="B"):
        parse_config(json.dumps(doc))
    with pytest.raises(InvalidLaw):
        parse_config(json.dumps({**EXPONENTIAL, "T": {"atoms": [[-0.5, 1.0]]}}))
    with pytest.raises(UnknownEquationKind):
        parse_config(json.dumps({**EXPONENTIAL, "equation": {"kind": "cubic", "mu": 1.0}}))
    with pytest.raises(ParseError, match="line 1"):
        parse_config('{"equation": }')
    with pytest.raises(ParseError, match="bogus"):
        parse_config(json.dumps({**EXPONENTIAL, "run": {"bogus": 1}}))
    with pytest.raises(MissingField):
        parse_config(json.dumps({k: v for k, v in EXPONENTIAL.items() if k != "N"}))


def test_check_exponential(tmp_path, capsys):
    assert main(["check", write(tmp_path, EXPONENTIAL)]) == 0
    report = json.loads(capsys.readouterr().out)
    assert report["conditions"]["scalars"]["rho"] == 0.5
    assert report["meta"]["command"] == "check"


def test_check_identity_fails(tmp_path, capsys):
    assert main(["check", write(tmp_path, IDENTITY)]) == 2
    assert "E[T]<1" in json.loads(capsys.readouterr().out)["conditions"]["failures"]


def test_report_agrees():
    cfg = replace(parse_config(json.dumps(EXPONENTIAL)), command="report", samples=50_000)
    code, report, csv = run(cfg)
    assert code == 0
    assert report["comparison"]["discrepancy"] is False
    assert report["closed_form"]["variance"] == pytest.approx(1.0)
    s, v = parse_csv(csv)
    assert np.max(np.abs(v - 1 / (1 + s))) < 1e-6


def test_stable_map_csv(tmp_path, capsys):
    assert main(["stable-map", write(tmp_path, EXPONENTIAL), "--alpha", "0.5"]) == 0
    s, v = parse_csv(capsys.readouterr().out)
    assert s.size == 513
    # exponential with unit mean under the alpha map is 1/(1 + s**alpha)
    assert np.max(np.abs(v - 1 / (1 + np.sqrt(s)))) < 1e-6


def test_stable_map_needs_alpha(tmp_path, capsys):
    assert main(["stable-map", write(tmp_path, EXPONENTIAL)]) == 1
    assert json.loads(capsys.readouterr().out)["error"]["code"] == MissingField.code


def test_output_files(tmp_path):
    out = tmp_path / "result.json"
    assert main(["solve", write(tmp_path, EXPONENTIAL), "--output", str(out), "--tol", "1e-7"]) == 0
    report = json.loads(out.read_text())
    assert report["solve"]["converged"]
    s, v = parse_csv((tmp_path / "result.csv").read_text())
    assert v[0] <= 1.0 and np.all(np.diff(v) <= 0)


def test_simulate_is_seeded(tmp_path, capsys):
    path = write(tmp_path, EXPONENTIAL)
    main(["simulate", path, "--samples", "2000", "--seed", "4"])
    a = json.loads(capsys.readouterr().out)["mc"]
    main(["simulate", path, "--samples", "2000", "--seed", "4"])
    b = json.loads(capsys.readouterr().out)["mc"]
    assert a == b and a["n_samples"] == 2000


def test_error_report_for_bad_config(tmp_path, capsys):
    path = write(tmp_path, {**EXPONENTIAL, "T": {"atoms": [[0.5, 0.7]]}})
    assert main(["check", path]) == 1
    err = json.loads(capsys.readouterr().out)["error"]
    assert err["code"] == InvalidLaw.code and "T.atoms" in err["message"]
    assert main(["check", str(tmp_path / "missing.json")]) == 1
