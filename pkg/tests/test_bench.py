"""Benchmark driver: config merging, problem builders, references, outputs."""

import json
import os

import numpy as np
import pytest

from netcubic.bench import (
    DEFAULTS,
    METHODS,
    apply_overrides,
    build_parser,
    build_problem,
    load_config,
    main,
    problem_fingerprint,
    reference_value,
    run_benchmark,
    selftest,
)
from netcubic.objectives import QuadraticLocal, StackedObjective


def _quadratic_config(tmp_path, **run_overrides):
    cp = load_config(None)
    cp["problem"]["kind"] = "quadratic"
    cp["problem"]["m"] = "3"
    cp["problem"]["n"] = "2"
    cp["problem"]["seed"] = "3"
    cp["topology"]["kind"] = "complete"
    cp["output"]["dir"] = str(tmp_path / "out")
    cp["output"]["timing"] = "off"
    cp["output"]["plots"] = "off"
    cp["run"]["max_inner"] = "400"
    for key, val in run_overrides.items():
        cp["run"][key] = val
    return cp


def _pooled_optimum(objective):
    A = sum(loc.A for loc in objective.locals)
    b = sum(loc.b for loc in objective.locals)
    x = np.linalg.solve(A, b)
    return sum(0.5 * x @ loc.A @ x - loc.b @ x for loc in objective.locals)


def test_load_config_defaults_match_builtins():
    cp = load_config(None)
    for section, entries in DEFAULTS.items():
        for key, val in entries.items():
            assert cp[section][key] == val


def test_config_file_merges_over_defaults(tmp_path):
    ini = tmp_path / "bench.ini"
    ini.write_text("[problem]\nm = 7\n\n[run]\nepsilon = 1e-3\n", encoding="utf-8")
    cp = load_config(str(ini))
    assert cp["problem"]["m"] == "7"
    assert cp["run"]["epsilon"] == "1e-3"
    # untouched keys keep their defaults
    assert cp["problem"]["kind"] == "synth"
    assert cp["run"]["cubic_coeff"] == "six"


def test_load_config_missing_file_errors(tmp_path):
    with pytest.raises(FileNotFoundError, match="config file"):
        load_config(str(tmp_path / "absent.ini"))


def test_cli_flags_override_config():
    args = build_parser().parse_args(
        [
            "run",
            "--m", "4",
            "--epsilon", "1e-3",
            "--seed", "9",
            "--topology", "cycle",
            "--method", "dec_cubic",
            "--method", "cen_gm",
            "--max-outer", "11",
            "--max-inner", "500",
            "--cubic-coeff", "five",
            "--delta-schedule", "lemma2",
            "--timing", "off",
            "--out", "elsewhere",
        ]
    )
    cp = load_config(None)
    apply_overrides(cp, args)
    assert cp["problem"]["m"] == "4"
    assert cp["run"].getfloat("epsilon") == 1e-3
    assert cp["problem"]["seed"] == "9"
    assert cp["topology"]["seed"] == "9"
    assert cp["topology"]["kind"] == "cycle"
    assert cp["run"]["methods"] == "dec_cubic,cen_gm"
    assert cp["run"]["max_outer"] == "11"
    assert cp["run"]["max_inner"] == "500"
    assert cp["run"]["cubic_coeff"] == "five"
    assert cp["run"]["delta_schedule"] == "lemma2"
    assert cp["output"]["timing"] == "off"
    assert cp["output"]["dir"] == "elsewhere"


def test_build_problem_kinds(tmp_path):
    cp = _quadratic_config(tmp_path)
    obj = build_problem(cp)
    assert isinstance(obj, StackedObjective)
    assert obj.m == 3
    for loc in obj.locals:
        assert isinstance(loc, QuadraticLocal)
        assert np.all(np.linalg.eigvalsh(loc.A) > 0.0)

    cp["problem"]["kind"] = "synth"
    cp["problem"]["d_per_agent"] = "4"
    synth = build_problem(cp)
    assert synth.m == 3
    assert all(hasattr(loc, "features") for loc in synth.locals)

    cp["problem"]["kind"] = "libsvm"
    with pytest.raises(ValueError, match="problem.path"):
        build_problem(cp)

    cp["problem"]["kind"] = "nope"
    with pytest.raises(ValueError, match="unknown problem kind"):
        build_problem(cp)


def test_problem_fingerprint_stable_and_seed_sensitive(tmp_path):
    cp = _quadratic_config(tmp_path)
    obj = build_problem(cp)
    assert problem_fingerprint(cp, obj) == problem_fingerprint(cp, obj)
    cp2 = _quadratic_config(tmp_path)
    cp2["problem"]["seed"] = "4"
    obj2 = build_problem(cp2)
    assert problem_fingerprint(cp, obj) != problem_fingerprint(cp2, obj2)


def test_reference_value_matches_closed_form(tmp_path):
    cp = _quadratic_config(tmp_path)
    obj = build_problem(cp)
    outdir = cp["output"]["dir"]
    os.makedirs(outdir, exist_ok=True)
    entry = reference_value(cp, obj, outdir)
    assert entry["converged"]
    assert abs(entry["fstar"] - _pooled_optimum(obj)) <= 1e-10


def test_reference_value_cache_hit(tmp_path):
    cp = _quadratic_config(tmp_path)
    obj = build_problem(cp)
    outdir = cp["output"]["dir"]
    os.makedirs(outdir, exist_ok=True)
    reference_value(cp, obj, outdir)
    cache_path = os.path.join(outdir, "fstar_cache.json")
    with open(cache_path, encoding="utf-8") as fh:
        cache = json.load(fh)
    key = problem_fingerprint(cp, obj)
    assert key in cache
    # tamper with the cached value; a hit must return it without recomputing
    cache[key]["fstar"] = 123.0
    with open(cache_path, "w", encoding="utf-8") as fh:
        json.dump(cache, fh)
    assert reference_value(cp, obj, outdir)["fstar"] == 123.0


def test_run_benchmark_outputs_and_row_counts(tmp_path):
    cp = _quadratic_config(tmp_path, methods="dec_cubic,cen_gm", max_outer="2")
    cp["output"]["plots"] = "on"
    summary = run_benchmark(cp)
    outdir = cp["output"]["dir"]

    lines = (tmp_path / "out" / "dec_cubic.csv").read_text().splitlines()
    assert lines[0] == "# netcubic method trace v1"
    assert lines[1] == "k,F,gap,oracle_calls,inner_rounds"
    assert len(lines) - 2 == summary["methods"]["dec_cubic"]["iterations"] + 1

    ref_lines = (tmp_path / "out" / "cen_gm.csv").read_text().splitlines()
    assert ref_lines[0] == "# netcubic reference trace v1"

    with open(os.path.join(outdir, "summary.json"), encoding="utf-8") as fh:
        on_disk = json.load(fh)
    assert on_disk["fstar"]["fstar"] == summary["fstar"]["fstar"]
    assert set(on_disk["methods"]) == {"dec_cubic", "cen_gm"}
    assert os.path.exists(os.path.join(outdir, "convergence.plt"))
    assert os.path.exists(os.path.join(outdir, "dec_cubic.dat"))


def test_run_benchmark_is_deterministic(tmp_path):
    texts = []
    for tag in ("a", "b"):
        cp = _quadratic_config(tmp_path, methods="dec_newton,dec_acc_cubic", max_outer="2")
        cp["output"]["dir"] = str(tmp_path / tag)
        run_benchmark(cp)
        blob = {}
        for name in ("dec_newton.csv", "dec_acc_cubic.csv", "summary.json"):
            blob[name] = (tmp_path / tag / name).read_bytes()
        texts.append(blob)
    assert texts[0] == texts[1]


def test_run_benchmark_rejects_unknown_method(tmp_path):
    cp = _quadratic_config(tmp_path, methods="nope")
    with pytest.raises(ValueError, match="unknown method"):
        run_benchmark(cp)
    assert "nope" not in METHODS


def test_main_run_smoke(tmp_path, capsys):
    ini = tmp_path / "bench.ini"
    ini.write_text(
        "[problem]\nkind = quadratic\nm = 3\nn = 2\nseed = 3\n\n"
        "[run]\nmethods = dec_acc_cubic\nmax_outer = 2\nmax_inner = 400\n\n"
        "[output]\ntiming = off\nplots = off\n",
        encoding="utf-8",
    )
    out = tmp_path / "cli_out"
    code = main(["run", "--config", str(ini), "--out", str(out)])
    assert code == 0
    printed = capsys.readouterr().out
    assert "wrote" in printed and "dec_acc_cubic" in printed
    head = (out / "dec_acc_cubic.csv").read_text().splitlines()[0]
    assert head == "# netcubic outer trace v1"
    assert (out / "summary.json").exists()


def test_selftest_passes(capsys):
    assert selftest() == 0
    printed = capsys.readouterr().out
    assert "7/7 checks passed" in printed
