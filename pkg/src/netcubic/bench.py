"""Benchmark driver: build a problem, run methods, write comparable traces.

Usage:
    netcubic run --config bench.ini [--out DIR] [--method NAME ...] ...
    netcubic selftest

Settings merge in order: built-in defaults, then the INI file, then flags.
All output files are deterministic for a fixed configuration when timing is
off; floats print with 17 significant digits.
"""

from __future__ import annotations

import argparse
import configparser
import hashlib
import json
import os
import sys
import warnings

import numpy as np

from .baselines import BaselineConfig, cen_gm, dec_acc_gm, dec_cubic, dec_newton
from .graphs import build_laplacian, generate_graph
from .harness import AccessRecorder, CommLedger
from .inner import InnerSettings
from .objectives import (
    LogisticLocal,
    QuadraticLocal,
    StackedObjective,
    load_libsvm,
    split_shards,
    synth_classification,
)
from .outer import OuterConfig, run_outer

__all__ = ["main", "run_benchmark", "selftest", "DEFAULTS"]

METHODS = ("dec_acc_cubic", "dec_cubic", "dec_newton", "dec_acc_gm", "cen_gm")

DEFAULTS = {
    "problem": {
        "kind": "synth",
        "m": "5",
        "n": "6",
        "d_per_agent": "20",
        "seed": "0",
        "scale": "1.0",
        "path": "",
        "shard": "uniform",
    },
    "topology": {"kind": "complete", "p": "0.5", "seed": "0"},
    "run": {
        "methods": "dec_acc_cubic,dec_cubic,dec_newton,dec_acc_gm,cen_gm",
        "epsilon": "1e-4",
        "gamma": "0",
        "max_outer": "0",
        "max_inner": "0",
        "cubic_coeff": "six",
        "delta_schedule": "theorem1",
        "fstar_tol": "1e-12",
        "fstar_iters": "200000",
    },
    "output": {"dir": "bench_out", "timing": "on", "plots": "on"},
}


def load_config(path: str | None) -> configparser.ConfigParser:
    cp = configparser.ConfigParser()
    cp.read_dict(DEFAULTS)
    if path:
        if not os.path.exists(path):
            raise FileNotFoundError(f"config file not found: {path}")
        cp.read(path)
    return cp


def apply_overrides(cp: configparser.ConfigParser, args: argparse.Namespace) -> None:
    if args.out is not None:
        cp["output"]["dir"] = args.out
    if args.method:
        cp["run"]["methods"] = ",".join(args.method)
    if args.topology is not None:
        cp["topology"]["kind"] = args.topology
    if args.m is not None:
        cp["problem"]["m"] = str(args.m)
    if args.epsilon is not None:
        cp["run"]["epsilon"] = repr(args.epsilon)
    if args.seed is not None:
        cp["problem"]["seed"] = str(args.seed)
        cp["topology"]["seed"] = str(args.seed)
    if args.max_outer is not None:
        cp["run"]["max_outer"] = str(args.max_outer)
    if args.max_inner is not None:
        cp["run"]["max_inner"] = str(args.max_inner)
    if args.cubic_coeff is not None:
        cp["run"]["cubic_coeff"] = args.cubic_coeff
    if args.delta_schedule is not None:
        cp["run"]["delta_schedule"] = args.delta_schedule
    if args.timing is not None:
        cp["output"]["timing"] = args.timing


def build_problem(cp: configparser.ConfigParser) -> StackedObjective:
    sec = cp["problem"]
    m = sec.getint("m")
    if sec["kind"] == "synth":
        return synth_classification(
            m,
            sec.getint("n"),
            sec.getint("d_per_agent"),
            seed=sec.getint("seed"),
            scale=sec.getfloat("scale"),
        )
    if sec["kind"] == "libsvm":
        if not sec["path"]:
            raise ValueError("problem.kind=libsvm needs problem.path")
        with open(sec["path"], "r", encoding="utf-8") as fh:
            features, labels = load_libsvm(fh.read())
        shards = split_shards(
            features, labels, m, policy=sec["shard"], seed=sec.getint("seed")
        )
        return StackedObjective(
            [LogisticLocal(f, y, features.shape[0]) for f, y in shards]
        )
    if sec["kind"] == "quadratic":
        rng = np.random.default_rng(sec.getint("seed"))
        n = sec.getint("n")
        locs = []
        for _ in range(m):
            R = rng.standard_normal((n, n))
            locs.append(QuadraticLocal(R @ R.T / n + 0.1 * np.eye(n), rng.standard_normal(n)))
        return StackedObjective(locs)
    raise ValueError(f"unknown problem kind {sec['kind']!r}")


def problem_fingerprint(cp: configparser.ConfigParser, objective: StackedObjective) -> str:
    h = hashlib.sha256()
    for key, val in sorted(cp["problem"].items()):
        h.update(f"{key}={val};".encode())
    for f in objective.locals:
        if hasattr(f, "features"):
            h.update(np.ascontiguousarray(f.features).tobytes())
            h.update(np.ascontiguousarray(f.labels).tobytes())
        else:
            h.update(np.ascontiguousarray(f.A).tobytes())
            h.update(np.ascontiguousarray(f.b).tobytes())
    return h.hexdigest()[:16]


def reference_value(
    cp: configparser.ConfigParser, objective: StackedObjective, outdir: str
) -> dict:
    """Minimum of the aggregate loss via centralized descent, disk-cached."""
    key = problem_fingerprint(cp, objective)
    cache_path = os.path.join(outdir, "fstar_cache.json")
    cache = {}
    if os.path.exists(cache_path):
        with open(cache_path, "r", encoding="utf-8") as fh:
            cache = json.load(fh)
    if key in cache:
        return cache[key]
    x, tr = cen_gm(
        objective,
        max_iters=cp["run"].getint("fstar_iters"),
        grad_tol=cp["run"].getfloat("fstar_tol"),
    )
    entry = {
        "fstar": tr.values[-1],
        "grad_norm": tr.grad_norms[-1],
        "converged": tr.converged,
        "iterations": tr.iterations,
    }
    if not tr.converged:
        warnings.warn(
            f"reference descent stopped at gradient norm {tr.grad_norms[-1]:.3e}; "
            "the reported optimum is an upper estimate",
            stacklevel=2,
        )
    cache[key] = entry
    with open(cache_path, "w", encoding="utf-8") as fh:
        json.dump(cache, fh, sort_keys=True, indent=1)
    return entry


def _method_csv(trace) -> str:
    lines = ["# netcubic method trace v1", "k,F,gap,oracle_calls,inner_rounds"]
    for i in range(len(trace.values)):
        lines.append(
            f"{i},{trace.values[i]:.17g},{trace.gaps[i]:.17g},"
            f"{trace.oracle_calls[i]},{trace.inner_rounds[i]}"
        )
    return "\n".join(lines) + "\n"


def _reference_csv(trace) -> str:
    lines = ["# netcubic reference trace v1", "k,F,grad_norm"]
    total = len(trace.values)
    for i in range(total):
        if i <= 100 or i % 100 == 0 or i == total - 1:
            lines.append(f"{i},{trace.values[i]:.17g},{trace.grad_norms[i]:.17g}")
    return "\n".join(lines) + "\n"


def run_one_method(
    name: str,
    objective: StackedObjective,
    lap,
    cp: configparser.ConfigParser,
    f_target: float | None,
) -> dict:
    """Run one method, return its summary entry plus the trace CSV text."""
    run = cp["run"]
    epsilon = run.getfloat("epsilon")
    max_outer = run.getint("max_outer")
    max_inner = run.getint("max_inner")
    inner = InnerSettings(stop_when_stable=True)
    if max_inner > 0:
        inner.round_cap = max_inner
    ledger = CommLedger()
    recorder = AccessRecorder(lap.graph) if lap is not None else None

    if name == "cen_gm":
        gamma = run.getfloat("gamma")
        x, tr = cen_gm(
            objective,
            step=gamma if gamma > 0.0 else None,
            max_iters=max_outer if max_outer > 0 else 100_000,
        )
        return {
            "csv": _reference_csv(tr),
            "series": {
                "k": list(range(len(tr.values))),
                "F": tr.values,
                "calls": list(range(len(tr.values))),
            },
            "summary": {
                "final_F": tr.values[-1],
                "grad_norm": tr.grad_norms[-1],
                "iterations": tr.iterations,
                "oracle_calls": tr.iterations,
                "converged": tr.converged,
                "comm_rounds": 0,
                "scalars_sent": 0,
            },
        }

    if name == "dec_acc_cubic":
        cfg = OuterConfig(
            epsilon=epsilon,
            schedule_variant=run["delta_schedule"],
            acc_relax=1e-10,
            acc_relax_phi=1e-4,
            acc_progress=1e-2,
            adaptive_radius=True,
            warm_dual=True,
            stall_window=8,
            f_target=f_target,
            inner=inner,
        )
        if objective.hess_lip == 0.0:
            cfg.hess_lip_override = 1.0
        if run["cubic_coeff"] == "five":
            # weight/6 * ||h||^3 with weight = 6/5 * (5 M2) realizes a /5 term
            cfg.cubic_weight = 1.2 * 5.0 * (cfg.hess_lip_override or objective.hess_lip)
        elif run["cubic_coeff"] != "six":
            raise ValueError(f"bad cubic_coeff {run['cubic_coeff']!r}")
        if max_outer > 0:
            cfg.k_override = max_outer
        X, tr = run_outer(objective, lap, cfg, ledger, recorder)
        csv_text = tr.to_csv(timing=cp["output"].getboolean("timing"))
        series = {"k": tr.k, "F": tr.F, "calls": tr.oracle_calls}
        summary = {
            "final_F": tr.F[-1],
            "final_gap": tr.gap[-1],
            "iterations": tr.k[-1],
            "outer_bound": tr.outer_bound,
            "oracle_calls": tr.oracle_calls[-1],
            "floor_events": tr.floor_events,
            "stop_reason": tr.stop_reason,
            "reached_at": tr.reached_at,
            "comm_rounds": ledger.rounds,
            "scalars_sent": ledger.scalars_sent,
            "violations": len(recorder.violations) if recorder else 0,
        }
        return {"csv": csv_text, "series": series, "summary": summary}

    cfg = BaselineConfig(
        max_outer=max_outer if max_outer > 0 else 200,
        # Matched inner accuracy: two decades below the run target so the
        # comparison measures outer models, not inner-solve generosity.
        inner_acc=max(1e-12, min(1e-6, 1e-3 * epsilon)),
        f_target=f_target,
        cubic_coeff=run["cubic_coeff"],
        hess_lip_override=1.0 if objective.hess_lip == 0.0 else None,
        acc_progress=1e-2,
        adaptive_radius=True,
        warm_dual=True,
        inner=inner,
    )
    runner = {"dec_newton": dec_newton, "dec_cubic": dec_cubic, "dec_acc_gm": dec_acc_gm}[
        name
    ]
    X, tr = runner(objective, lap, cfg, ledger, recorder)
    summary = {
        "final_F": tr.values[-1],
        "final_gap": tr.gaps[-1],
        "iterations": len(tr.values) - 1,
        "oracle_calls": tr.oracle_calls[-1],
        "stop_reason": tr.stop_reason,
        "reached_at": tr.reached_at,
        "comm_rounds": ledger.rounds,
        "scalars_sent": ledger.scalars_sent,
        "violations": len(recorder.violations) if recorder else 0,
    }
    series = {
        "k": list(range(len(tr.values))),
        "F": tr.values,
        "calls": tr.oracle_calls,
    }
    return {"csv": _method_csv(tr), "series": series, "summary": summary}


def _write_plots(outdir: str, methods: list) -> None:
    """Emit gnuplot data and script for value gap vs iterations and calls."""
    plt = [
        "set logscale y",
        "set xlabel 'iteration'",
        "set ylabel 'value gap'",
        "set key outside",
        "set terminal png size 900,600",
        "set output 'gap_vs_iter.png'",
    ]
    parts = []
    for name in methods:
        parts.append(f"'{name}.dat' using 1:2 with linespoints title '{name}'")
    plt.append("plot " + ", \\\n     ".join(parts))
    plt += [
        "set xlabel 'oracle calls'",
        "set output 'gap_vs_calls.png'",
        "plot " + ", \\\n     ".join(p.replace("1:2", "3:2") for p in parts),
    ]
    with open(os.path.join(outdir, "convergence.plt"), "w", encoding="utf-8") as fh:
        fh.write("\n".join(plt) + "\n")


def _write_dat(outdir: str, name: str, series: dict, fstar: float) -> None:
    out = ["# iter value_gap oracle_calls"]
    for k, F, calls in zip(series["k"], series["F"], series["calls"]):
        gap = max(F - fstar, 1e-18)
        out.append(f"{k} {gap:.17g} {calls}")
    with open(os.path.join(outdir, f"{name}.dat"), "w", encoding="utf-8") as fh:
        fh.write("\n".join(out) + "\n")


def run_benchmark(cp: configparser.ConfigParser) -> dict:
    outdir = cp["output"]["dir"]
    os.makedirs(outdir, exist_ok=True)
    objective = build_problem(cp)
    m = objective.m
    if m > 1:
        graph = generate_graph(
            cp["topology"]["kind"],
            m,
            p=cp["topology"].getfloat("p"),
            seed=cp["topology"].getint("seed"),
        )
        lap = build_laplacian(graph)
    else:
        lap = None
    ref = reference_value(cp, objective, outdir)
    epsilon = cp["run"].getfloat("epsilon")
    f_target = ref["fstar"] + epsilon if ref["converged"] else None

    methods = [s.strip() for s in cp["run"]["methods"].split(",") if s.strip()]
    for name in methods:
        if name not in METHODS:
            raise ValueError(f"unknown method {name!r}, expected one of {METHODS}")

    summary = {
        "problem": dict(cp["problem"]),
        "topology": dict(cp["topology"]) if lap is not None else {"kind": "single"},
        "run": dict(cp["run"]),
        "fstar": ref,
        "methods": {},
    }
    for name in methods:
        objective.value_evals = 0
        objective.grad_evals = 0
        objective.hess_evals = 0
        result = run_one_method(name, objective, lap, cp, f_target)
        with open(os.path.join(outdir, f"{name}.csv"), "w", encoding="utf-8") as fh:
            fh.write(result["csv"])
        if cp["output"].getboolean("plots"):
            _write_dat(outdir, name, result["series"], ref["fstar"])
        summary["methods"][name] = result["summary"]
    if cp["output"].getboolean("plots"):
        _write_plots(outdir, methods)
    with open(os.path.join(outdir, "summary.json"), "w", encoding="utf-8") as fh:
        json.dump(summary, fh, sort_keys=True, indent=1)
        fh.write("\n")
    return summary


def selftest() -> int:
    """Fast built-in sanity battery; returns a shell exit code."""
    from .cubic import CubicModel, cubic_dual_max, solve_secular
    from .graphs import consensus_gap
    from .inner import run_inner
    from .linalg import sym_eigendecompose

    checks = []

    def check(name, fn):
        try:
            ok, detail = fn()
        except Exception as exc:  # a crash is a failure, not an abort
            ok, detail = False, f"{type(exc).__name__}: {exc}"
        checks.append((name, ok, detail))

    rng = np.random.default_rng(7)

    def eig_reconstructs():
        A = rng.standard_normal((8, 8))
        A = 0.5 * (A + A.T)
        err = np.abs(sym_eigendecompose(A).reconstruct() - A).max()
        return err < 1e-9, f"max error {err:.2e}"

    def cycle_spectrum():
        lap = build_laplacian(generate_graph("cycle", 6))
        want = np.sort(2.0 - 2.0 * np.cos(2.0 * np.pi * np.arange(6) / 6.0))
        err = np.abs(lap.eig.values - want).max()
        return err < 1e-9, f"max error {err:.2e}"

    def secular_residual():
        eigvals = np.sort(rng.random(5))
        gamma = rng.standard_normal(5)
        tau = solve_secular(gamma, eigvals, cubic_weight=2.0, ridge=1e-6, n_agents=4)
        den = eigvals + 2.0 * tau + 1e-6
        res = abs((4.0 / 4.0) * np.sum(gamma**2 / den**2) - tau * tau)
        return res < 1e-10 * max(1.0, tau * tau), f"residual {res:.2e}"

    def dual_identity():
        X = rng.standard_normal((4, 3))
        val, _ = cubic_dual_max(X)
        want = float(np.linalg.norm(X) ** 3 / 3.0)
        err = abs(val - want) / want
        return err < 1e-12, f"rel error {err:.2e}"

    def inner_consensus():
        obj = synth_classification(3, 2, 8, seed=1)
        lap = build_laplacian(generate_graph("complete", 3))
        X0 = np.zeros((3, 2))
        model = CubicModel(
            center=X0,
            grads=obj.stacked_gradient(X0),
            hess_blocks=obj.hessian_blocks(X0),
            cubic_weight=5.0 * obj.hess_lip,
        )
        X, rep = run_inner(model, lap, 1e-4, InnerSettings())
        gap = consensus_gap(lap, X - X0)
        return gap <= 1e-4 / rep.radius + 1e-12, f"gap {gap:.2e}, rounds {rep.rounds}"

    def outer_decreases():
        obj = synth_classification(3, 2, 10, seed=2)
        lap = build_laplacian(generate_graph("complete", 3))
        cfg = OuterConfig(
            epsilon=1e-3,
            k_override=4,
            acc_relax=1e-8,
            inner=InnerSettings(stop_when_stable=True, round_cap=500),
        )
        _, tr = run_outer(obj, lap, cfg)
        return tr.F[-1] < tr.F[0], f"F {tr.F[0]:.6f} -> {tr.F[-1]:.6f}"

    def csv_deterministic():
        cp = load_config(None)
        cp["problem"]["m"] = "3"
        cp["problem"]["n"] = "2"
        cp["problem"]["d_per_agent"] = "6"
        cp["run"]["methods"] = "dec_cubic"
        cp["run"]["max_outer"] = "3"
        cp["run"]["max_inner"] = "300"
        cp["run"]["fstar_tol"] = "1e-9"
        cp["output"]["timing"] = "off"
        cp["output"]["plots"] = "off"
        import tempfile

        texts = []
        for _ in range(2):
            with tempfile.TemporaryDirectory() as tmp:
                cp["output"]["dir"] = tmp
                run_benchmark(cp)
                with open(os.path.join(tmp, "dec_cubic.csv"), encoding="utf-8") as fh:
                    texts.append(fh.read())
        return texts[0] == texts[1], f"{len(texts[0])} bytes"

    check("eigensolver reconstructs", eig_reconstructs)
    check("cycle laplacian spectrum", cycle_spectrum)
    check("scale equation residual", secular_residual)
    check("dual value identity", dual_identity)
    check("inner solve reaches consensus", inner_consensus)
    check("outer loop decreases value", outer_decreases)
    check("trace csv deterministic", csv_deterministic)

    width = max(len(name) for name, _, _ in checks)
    failures = 0
    for name, ok, detail in checks:
        mark = "pass" if ok else "FAIL"
        failures += 0 if ok else 1
        print(f"{name:<{width}}  {mark}  {detail}")
    print(f"{len(checks) - failures}/{len(checks)} checks passed")
    return 0 if failures == 0 else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="netcubic",
        description="benchmark decentralized second-order methods on one host",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    runp = sub.add_parser("run", help="run a benchmark configuration")
    runp.add_argument("--config", default=None, help="INI file with the setup")
    runp.add_argument("--out", default=None, help="output directory")
    runp.add_argument(
        "--method", action="append", choices=METHODS, help="restrict to this method"
    )
    runp.add_argument(
        "--topology",
        default=None,
        choices=("complete", "cycle", "path", "star", "erdos_renyi"),
    )
    runp.add_argument("--m", type=int, default=None, help="number of agents")
    runp.add_argument("--epsilon", type=float, default=None)
    runp.add_argument("--seed", type=int, default=None)
    runp.add_argument("--max-outer", type=int, default=None)
    runp.add_argument("--max-inner", type=int, default=None)
    runp.add_argument("--cubic-coeff", default=None, choices=("six", "five"))
    runp.add_argument("--delta-schedule", default=None, choices=("theorem1", "lemma2"))
    runp.add_argument("--timing", default=None, choices=("on", "off"))
    sub.add_parser("selftest", help="run the built-in sanity checks")
    return parser


def main(argv: list | None = None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "selftest":
        return selftest()
    cp = load_config(args.config)
    apply_overrides(cp, args)
    summary = run_benchmark(cp)
    outdir = cp["output"]["dir"]
    print(f"wrote {outdir}/summary.json")
    for name, entry in summary["methods"].items():
        print(
            f"  {name}: F={entry['final_F']:.12g}"
            f" calls={entry.get('oracle_calls', 0)}"
            f" rounds={entry.get('comm_rounds', 0)}"
        )
    return 0


if __name__ == "__main__":
    sys.exit(main())
