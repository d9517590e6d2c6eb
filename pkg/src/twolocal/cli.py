"""Command-line harness for ensemble sweeps.

Every sweep writes one JSON file per realization under ``<out>/results`` and a
``summary.csv`` at ``<out>``.  Each file echoes the tool version, the full
configuration, the base seed and the per-realization stream id, which is
enough to reproduce a row bit for bit.  Realizations are independent and run
in a process pool; streams are derived from the realization index, so serial
and parallel runs give identical rows.

Exit codes: 0 success, 1 invalid configuration or inputs, 2 some
realizations failed (their rows carry the error).
"""
from __future__ import annotations

import argparse
import csv
import json
import os
import sys
import traceback
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__
from .localizer import (
    CouplingMatrixJ,
    LocalizationProblem,
    LocalizationResult,
    localize_diagonal,
    localize_restarts,
)
from .pauli import FLAVORS, PauliString, enumerate_basis, materialize
from .sff import plateau, sff, sff_compare
from .spectra import GENERATORS, Spectrum, sample_goe_dense, sample_spectrum
from .stability import (
    eigen_operators,
    estimate_lambda_k,
    lambda2_bruteforce,
    lambda2_closed_form,
    metric_at_minimum,
    polynomial_fit_residual,
    rank_lower_bound,
    save_eigenoperator_csv,
    save_metric_csv,
)
from .sw import sw_localize

EXIT_OK, EXIT_INVALID, EXIT_PARTIAL = 0, 1, 2


class ConfigError(ValueError):
    pass


def parse_n_range(text) -> list[int]:
    """``"7"``, ``"4,5,6"`` or ``"6-10"`` (inclusive) to a list of ints."""
    if isinstance(text, int):
        return [text]
    if isinstance(text, list):
        return [int(v) for v in text]
    out = []
    for part in str(text).split(","):
        part = part.strip()
        if "-" in part:
            lo, hi = part.split("-", 1)
            out.extend(range(int(lo), int(hi) + 1))
        elif part:
            out.append(int(part))
    if not out:
        raise ConfigError(f"empty qubit range {text!r}")
    return out


GENERATOR_ALIASES = {"dense": "goe_dense", "tridiag": "hermite_tridiagonal"}


def _generator_name(text: str) -> str:
    name = GENERATOR_ALIASES.get(text, text)
    if name not in GENERATORS:
        raise argparse.ArgumentTypeError(f"unknown generator {text!r}")
    return name


def _header(config: dict, seed: int, stream_id=None, **extra) -> dict:
    d = {"tool": "twolocal", "version": __version__, "config": config, "seed": seed}
    if stream_id is not None:
        d["stream_id"] = stream_id
    d.update(extra)
    return d


def _write_json(path: Path, obj) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(obj, indent=1))


def _write_summary(out: Path, rows: list[dict], config: dict) -> None:
    out.mkdir(parents=True, exist_ok=True)
    keys = []
    for r in rows:
        keys.extend(k for k in r if k not in keys)
    with open(out / "summary.csv", "w", newline="") as fh:
        fh.write(f"# twolocal {__version__} config={json.dumps(config, sort_keys=True)}\n")
        w = csv.DictWriter(fh, fieldnames=keys)
        w.writeheader()
        for r in rows:
            w.writerow(r)


def read_summary(path) -> list[dict]:
    with open(path) as fh:
        lines = [ln for ln in fh if not ln.startswith("#")]
    return list(csv.DictReader(lines))


def _run_tasks(fn, tasks: list[dict], jobs: int) -> list[dict]:
    if jobs <= 1 or len(tasks) <= 1:
        return [fn(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, tasks))


class _Guarded:
    """Picklable wrapper that turns a failed realization into an error row."""

    def __init__(self, fn):
        self.fn = fn

    def __call__(self, task):
        try:
            return self.fn(task)
        except Exception as exc:  # one bad realization must not stop the sweep
            row = {k: task[k] for k in ("n", "realization", "stream_id") if k in task}
            if "path" in task and "n" not in task:
                row["source"] = Path(task["path"]).name
            row["error"] = f"{type(exc).__name__}: {exc}"
            row["traceback"] = traceback.format_exc(limit=3)
            return row


# --- gen-spectrum -----------------------------------------------------------

def _gen_task(task):
    spectrum = sample_spectrum(task["n"], task["seed"], task["realization"], task["generator"], task["scale"])
    head = _header(task["config"], task["seed"], task["stream_id"], realization=task["realization"])
    _write_json(Path(task["path"]), {**head, **spectrum.to_dict()})
    return {"n": task["n"], "realization": task["realization"], "stream_id": task["stream_id"],
            "mean_square": spectrum.mean_square(), "file": Path(task["path"]).name}


def cmd_gen_spectrum(cfg: dict) -> int:
    if cfg["generator"] not in GENERATORS:
        raise ConfigError(f"unknown generator {cfg['generator']!r}")
    out = Path(cfg["out"])
    tasks = [
        {"n": n, "realization": r, "seed": cfg["seed"], "stream_id": cfg["seed"] ^ r,
         "generator": cfg["generator"], "scale": cfg["scale"], "config": cfg,
         "path": str(out / "results" / f"spectrum_N{n}_r{r:04d}.json")}
        for n in cfg["n"] for r in range(cfg["realizations"])
    ]
    rows = _run_tasks(_guard_gen, tasks, cfg["jobs"])
    _write_summary(out, rows, cfg)
    return _exit(rows)


_guard_gen = _Guarded(_gen_task)


# --- localize ---------------------------------------------------------------

def _problem(task, target):
    basis = enumerate_basis(target.n_qubits, task["flavor"])
    return LocalizationProblem(
        target, basis, variant=task["variant"], rank=task["rank"], lam=task["lambda"],
        epsilon=task["epsilon"], max_iterations=task["max_iterations"],
        gradient_tolerance=task["gradient_tolerance"],
    )


def _localize_task(task):
    target = sample_spectrum(task["n"], task["seed"], task["realization"], task["generator"], task["scale"])
    problem = _problem(task, target)
    best, attempts = localize_restarts(problem, task["restarts"], seed=task["stream_id"],
                                       stop_below=task["stop_below"])
    head = _header(task["config"], task["seed"], task["stream_id"], realization=task["realization"])
    body = {**head, "target": target.to_dict(), "result": best.to_dict(),
            "attempt_costs": [a.final_cost for a in attempts]}
    _write_json(Path(task["path"]), body)
    row = {"n": task["n"], "realization": task["realization"], "stream_id": task["stream_id"],
           "flavor": task["flavor"], "variant": task["variant"], "final_cost": best.final_cost,
           "mean_square_target": target.traceless().mean_square(), "iterations": best.iterations,
           "converged": best.converged, "message": best.message, "restarts_used": len(attempts),
           "seconds": round(sum(a.elapsed_seconds for a in attempts), 3),
           "file": Path(task["path"]).name}
    if task["variant"] == "sparse":
        row["sparsity"] = best.sparsity
    return row


_guard_localize = _Guarded(_localize_task)


def cmd_localize(cfg: dict) -> int:
    if cfg["flavor"] not in SWEEP_FLAVORS:
        raise ConfigError(f"unknown flavor {cfg['flavor']!r}")
    if cfg["variant"] == "low_rank" and cfg["rank"] is None:
        raise ConfigError("--variant low_rank needs --rank")
    if cfg["variant"] == "low_rank" and cfg["flavor"] != "z_only_2local":
        raise ConfigError("low_rank works on the z_only_2local flavor")
    if cfg["lambda"] < 0:
        raise ConfigError("--lambda must be >= 0")
    out = Path(cfg["out"])
    tasks = []
    for n in cfg["n"]:
        enumerate_basis(n, cfg["flavor"])  # validates n against the flavor cap
        for r in range(cfg["realizations"]):
            tasks.append({
                **{k: cfg[k] for k in ("seed", "generator", "scale", "flavor", "variant", "rank",
                                       "lambda", "epsilon", "max_iterations", "gradient_tolerance",
                                       "restarts", "stop_below")},
                "n": n, "realization": r, "stream_id": cfg["seed"] ^ r, "config": cfg,
                "path": str(out / "results" / f"localize_N{n}_r{r:04d}.json"),
            })
    rows = _run_tasks(_guard_localize, tasks, cfg["jobs"])
    _write_summary(out, rows, cfg)
    _write_aggregate(out, rows, cfg)
    return _exit(rows)


def _write_aggregate(out: Path, rows: list[dict], config: dict) -> None:
    """Mean and spread of the final cost per (N, flavor, variant)."""
    groups: dict[tuple, list[float]] = {}
    for r in rows:
        if "final_cost" in r:
            groups.setdefault((r["n"], r["flavor"], r["variant"]), []).append(r["final_cost"])
    agg = [{"n": n, "flavor": f, "variant": v, "mean_final_cost": float(np.mean(c)),
            "std_final_cost": float(np.std(c)), "count": len(c)}
           for (n, f, v), c in sorted(groups.items())]
    with open(out / "aggregate.csv", "w", newline="") as fh:
        fh.write(f"# twolocal {__version__} config={json.dumps(config, sort_keys=True)}\n")
        w = csv.DictWriter(fh, fieldnames=["n", "flavor", "variant", "mean_final_cost",
                                           "std_final_cost", "count"])
        w.writeheader()
        w.writerows(agg)


def load_localization(path) -> tuple[Spectrum, LocalizationResult, dict]:
    try:
        d = json.loads(Path(path).read_text())
        return Spectrum.from_dict(d["target"]), LocalizationResult.from_dict(d["result"]), d
    except (OSError, ValueError, KeyError, TypeError) as exc:
        raise ConfigError(f"cannot read localization result {path}: {exc}") from exc


def _result_files(directory) -> list[Path]:
    d = Path(directory)
    files = sorted((d / "results").glob("localize_*.json")) if (d / "results").is_dir() else []
    if not files:
        files = sorted(d.glob("localize_*.json"))
    if not files:
        raise ConfigError(f"no localization results under {directory}")
    return files


def fitted_spectrum(result: LocalizationResult) -> np.ndarray:
    h = result.hamiltonian()
    return np.linalg.eigvalsh(materialize(h)) + result.energy_shift


# --- stability --------------------------------------------------------------

def _stability_task(task):
    target, res, head = load_localization(task["path"])
    if not res.converged and res.gradient_norm > task["gradient_tolerance"]:
        raise ConfigError(f"{Path(task['path']).name} is not converged "
                          f"(gradient {res.gradient_norm:.2e})")
    h0 = res.hamiltonian()
    metric = metric_at_minimum(h0)
    stem = Path(task["path"]).stem.replace("localize_", "stability_")
    out = Path(task["out"]) / "results"
    out.mkdir(parents=True, exist_ok=True)
    save_metric_csv(metric, out / f"{stem}_metric.csv")
    k_ops = min(task["operators"], len(h0.basis))
    ops = eigen_operators(metric, h0, k_ops)
    save_eigenoperator_csv(ops, out / f"{stem}_operators.csv")
    ks = range(1, min(task["max_k"], len(h0.basis)) + 1)
    estimates = {}
    for k in ks:
        try:
            estimates[k] = estimate_lambda_k(h0, k)
        except np.linalg.LinAlgError:
            estimates[k] = None
    fit = {op.k: polynomial_fit_residual(op.energies, op.expectations, 6)
           for op in ops if op.energies.size > 6}
    body = {**_header(task["config"], head.get("seed"), head.get("stream_id"), source=Path(task["path"]).name),
            "metric": metric.to_dict(),
            "lambda_estimates": {str(k): v for k, v in estimates.items()},
            "fit_residuals": {str(k): v for k, v in fit.items()}}
    _write_json(out / f"{stem}.json", body)
    row = {"source": Path(task["path"]).name, "n": h0.basis.n_qubits, "flavor": h0.basis.flavor,
           "identity_metric": metric.is_identity, "lambda_max": float(metric.eigenvalues[0]),
           "lambda_min": float(metric.eigenvalues[-1])}
    for k in ks:
        row[f"lambda{k}_exact"] = float(metric.eigenvalues[k - 1])
        row[f"lambda{k}_estimate"] = estimates[k]
    if 2 in fit:
        row["fit_residual_2"] = fit[2]
    return row


_guard_stability = _Guarded(_stability_task)


def cmd_stability(cfg: dict) -> int:
    files = _result_files(cfg["results"])
    tasks = [{"path": str(f), "out": cfg["out"], "config": cfg, "operators": cfg["operators"],
              "max_k": cfg["max_k"], "gradient_tolerance": cfg["gradient_tolerance"]} for f in files]
    rows = _run_tasks(_guard_stability, tasks, cfg["jobs"])
    _write_summary(Path(cfg["out"]), rows, cfg)
    return _exit(rows)


# --- sff --------------------------------------------------------------------

def cmd_sff(cfg: dict) -> int:
    files = _result_files(cfg["results"])
    loaded = [load_localization(f) for f in files]
    dims = {t.dim for t, _, _ in loaded}
    if len(dims) != 1:
        raise ConfigError("results mix different qubit counts; pass one N per directory")
    # t = 0 anchors the curve at 4^N ahead of the log grid
    times = np.concatenate([[0.0], np.geomspace(cfg["t_min"], cfg["t_max"], cfg["n_times"])])
    reference = sff([t for t, _, _ in loaded], times)
    localized = sff([fitted_spectrum(r) for _, r, _ in loaded], times)
    report = sff_compare(reference, localized)
    out = Path(cfg["out"])
    out.mkdir(parents=True, exist_ok=True)
    reference.save_csv(out / "sff_reference.csv")
    localized.save_csv(out / "sff_localized.csv")
    body = {**_header(cfg, cfg["seed"]), "sources": [f.name for f in files],
            "stream_ids": [d.get("stream_id") for _, _, d in loaded],
            "n_realizations": len(files), "max_log_ratio": report.max_log_ratio,
            "reference_ramp_onset": report.reference_onset, "localized_ramp_onset": report.test_onset,
            "reference_plateau": plateau([t for t, _, _ in loaded], seed=cfg["seed"]),
            "dim": loaded[0][0].dim}
    _write_json(out / "sff_report.json", body)
    reference.save_metadata(out / "sff_reference.json", **_header(cfg, cfg["seed"]))
    localized.save_metadata(out / "sff_localized.json", **_header(cfg, cfg["seed"]))
    return EXIT_OK


# --- sw ---------------------------------------------------------------------

def _sw_target(cfg):
    if cfg["target"] == "xxx":
        n = cfg["n"][0] if cfg["n"] else 3
        if n < 3:
            raise ConfigError("the XXX target needs n >= 3")
        label = "*".join(f"X{i}" for i in range(1, 4))
        return PauliString.from_label(label, n).matrix()
    if cfg["target"] == "goe":
        return sample_goe_dense(cfg["n"][0], cfg["seed"], 0)
    raise ConfigError(f"unknown SW target {cfg['target']!r}")


def cmd_sw(cfg: dict) -> int:
    H = _sw_target(cfg)
    n = int(round(np.log2(H.shape[0])))
    basis = enumerate_basis(n, cfg["flavor"])
    res = sw_localize(H, basis, alpha=cfg["alpha"], max_iters=cfg["max_iters"],
                      residual_tol=cfg["residual_tol"], seed=cfg["seed"], track_drift=cfg["trace"])
    out = Path(cfg["out"])
    out.mkdir(parents=True, exist_ok=True)
    body = {**_header(cfg, cfg["seed"], cfg["seed"]), "n_qubits": n, "converged": res.converged,
            "message": res.message, "iterations": res.state.iteration,
            "residual_norm": res.state.residual_norm, "final_cost": res.final_cost,
            "couplings": res.hamiltonian.couplings.tolist(), "basis": basis.to_dict()}
    _write_json(out / "sw_result.json", body)
    if cfg["trace"]:
        with open(out / "sw_trace.csv", "w", newline="") as fh:
            fh.write(f"# twolocal {__version__} config={json.dumps(cfg, sort_keys=True)}\n")
            w = csv.writer(fh)
            w.writerow(["iteration", "residual_norm", "spectral_drift"])
            w.writerows(res.trace)
    return EXIT_OK if res.converged else EXIT_PARTIAL


# --- lambda2 ----------------------------------------------------------------

def _lambda2_task(task):
    n = task["n"]
    target = sample_spectrum(n, task["seed"], task["realization"], task["generator"], task["scale"])
    diag = localize_diagonal(target, seed=task["stream_id"])
    J = CouplingMatrixJ.from_couplings(diag.basis, diag.couplings)
    closed = lambda2_closed_form(J)
    row = {"N": n, "seed": task["seed"], "realization": task["realization"],
           "stream_id": task["stream_id"], "lambda2_closed": closed.value,
           "lambda2_bruteforce": lambda2_bruteforce(J), "lambda2_asymptote": closed.asymptote,
           "lambda2_bound": closed.bound, "lambda2_exact_metric": None}
    if n <= task["exact_max_n"]:
        problem = LocalizationProblem(target, enumerate_basis(n, task["flavor"]))
        best, _ = localize_restarts(problem, 1, seed=task["stream_id"])
        row["lambda2_exact_metric"] = float(metric_at_minimum(best.hamiltonian()).eigenvalues[1])
    head = _header(task["config"], task["seed"], task["stream_id"], realization=task["realization"])
    _write_json(Path(task["path"]), {**head, **row})
    return row


_guard_lambda2 = _Guarded(_lambda2_task)


def cmd_lambda2(cfg: dict) -> int:
    out = Path(cfg["out"])
    tasks = [
        {"n": n, "realization": r, "seed": cfg["seed"], "stream_id": cfg["seed"] ^ r, "config": cfg,
         "generator": cfg["generator"], "scale": cfg["scale"], "flavor": cfg["flavor"],
         "exact_max_n": cfg["exact_max_n"], "path": str(out / "results" / f"lambda2_N{n}_r{r:04d}.json")}
        for n in cfg["n"] for r in range(cfg["realizations"])
    ]
    rows = _run_tasks(_guard_lambda2, tasks, cfg["jobs"])
    _write_summary(out, rows, cfg)
    return _exit(rows)


# --- rank-bound -------------------------------------------------------------

def cmd_rank_bound(cfg: dict) -> int:
    rows = []
    for n in cfg["n"]:
        b = rank_lower_bound(n, enumerate_basis(n, cfg["flavor"]))
        row = {"n": n, "flavor": cfg["flavor"], "generic_bound": b.generic, "tighter_bound": b.tighter}
        if cfg["check_projector"]:
            d = 1 << n
            values = np.zeros(d)
            values[-1] = 1.0
            target = Spectrum.from_values(values - values.mean())
            problem = LocalizationProblem(target, enumerate_basis(n, cfg["flavor"]))
            best, attempts = localize_restarts(problem, cfg["restarts"], seed=cfg["seed"], stop_below=1e-6)
            row["projector_best_cost"] = best.final_cost
            row["projector_restarts"] = len(attempts)
        rows.append(row)
    out = Path(cfg["out"])
    _write_json(out / "rank_bound.json", {**_header(cfg, cfg["seed"]), "rows": rows})
    _write_summary(out, rows, cfg)
    return EXIT_OK


def _exit(rows) -> int:
    return EXIT_PARTIAL if any("error" in r for r in rows) else EXIT_OK


# --- argument parsing -------------------------------------------------------

COMMANDS = {
    "gen-spectrum": cmd_gen_spectrum,
    "localize": cmd_localize,
    "sw": cmd_sw,
    "stability": cmd_stability,
    "sff": cmd_sff,
    "lambda2": cmd_lambda2,
    "rank-bound": cmd_rank_bound,
}


class _Parser(argparse.ArgumentParser):
    """Usage errors are validation errors: exit 1, not argparse's 2."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_INVALID, f"{self.prog}: error: {message}\n")


SWEEP_FLAVORS = tuple(f for f in FLAVORS if f != "custom")


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--seed", type=int, default=argparse.SUPPRESS, help="base seed (default 0)")
    common.add_argument("--out", default=argparse.SUPPRESS, help="output directory (default ./out)")
    common.add_argument("--jobs", type=int, default=argparse.SUPPRESS,
                        help="worker processes (default: available cores)")
    common.add_argument("--config", default=None, help="JSON file of defaults; flags override it")

    p = _Parser(prog="twolocal", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)
    S = argparse.SUPPRESS

    def add(name, help_):
        return sub.add_parser(name, parents=[common], help=help_, argument_default=S)

    def ensemble(q):
        q.add_argument("--n", help="qubit counts, e.g. 7, 4,5,6 or 6-10")
        q.add_argument("--realizations", "--count", dest="realizations", type=int)
        q.add_argument("--generator", type=_generator_name, help="goe_dense (dense) or "
                       "hermite_tridiagonal (tridiag)")
        q.add_argument("--scale", type=float)

    q = add("gen-spectrum", "sample GOE target spectra")
    ensemble(q)

    q = add("localize", "fit local Hamiltonians to sampled spectra")
    ensemble(q)
    q.add_argument("--flavor", choices=SWEEP_FLAVORS)
    q.add_argument("--variant", choices=("plain", "low_rank", "sparse"))
    q.add_argument("--rank", type=int)
    q.add_argument("--lambda", dest="lambda", type=float)
    q.add_argument("--epsilon", type=float)
    q.add_argument("--restarts", type=int)
    q.add_argument("--stop-below", dest="stop_below", type=float)
    q.add_argument("--max-iterations", dest="max_iterations", type=int)
    q.add_argument("--gradient-tolerance", dest="gradient_tolerance", type=float)

    q = add("sw", "Schrieffer-Wolff localization of a dense target")
    q.add_argument("--target", choices=("xxx", "goe"))
    q.add_argument("--n")
    q.add_argument("--flavor", choices=SWEEP_FLAVORS)
    q.add_argument("--alpha", type=float)
    q.add_argument("--max-iters", dest="max_iters", type=int)
    q.add_argument("--residual-tol", dest="residual_tol", type=float)
    q.add_argument("--trace", action="store_true", help="write a per-iteration trace CSV")

    q = add("stability", "metric spectra and eigenoperators of stored minima")
    q.add_argument("--results", help="directory written by the localize command")
    q.add_argument("--operators", type=int)
    q.add_argument("--max-k", dest="max_k", type=int)
    q.add_argument("--gradient-tolerance", dest="gradient_tolerance", type=float)

    q = add("sff", "spectral form factor of stored targets and fits")
    q.add_argument("--results")
    q.add_argument("--t-min", dest="t_min", type=float)
    q.add_argument("--t-max", dest="t_max", type=float)
    q.add_argument("--n-times", dest="n_times", type=int)

    q = add("lambda2", "closed-form vs brute-force second metric eigenvalue")
    ensemble(q)
    q.add_argument("--flavor", choices=SWEEP_FLAVORS)
    q.add_argument("--exact-max-n", dest="exact_max_n", type=int)

    q = add("rank-bound", "rank lower bound for localizable projectors")
    q.add_argument("--n")
    q.add_argument("--flavor", choices=SWEEP_FLAVORS)
    q.add_argument("--check-projector", dest="check_projector", action="store_true")
    q.add_argument("--restarts", type=int)
    return p


DEFAULTS = {
    "_all": {"seed": 0, "out": "out", "jobs": None},
    "gen-spectrum": {"n": "8", "realizations": 1, "generator": "goe_dense", "scale": 1.0},
    "localize": {"n": "6", "realizations": 1, "generator": "goe_dense", "scale": 1.0,
                 "flavor": "real_2local", "variant": "plain", "rank": None, "lambda": 0.0,
                 "epsilon": 1e-8, "restarts": 1, "stop_below": None, "max_iterations": None,
                 "gradient_tolerance": 1e-10},
    "sw": {"target": "xxx", "n": "3", "flavor": "complex_2local", "alpha": 0.1, "max_iters": 5000,
           "residual_tol": 1e-8, "trace": False},
    "stability": {"results": None, "operators": 4, "max_k": 4, "gradient_tolerance": 1e-6},
    "sff": {"results": None, "t_min": 1e-2, "t_max": 1e4, "n_times": 200},
    "lambda2": {"n": "5-8", "realizations": 1, "generator": "goe_dense", "scale": 1.0,
                "flavor": "real_2local", "exact_max_n": 8},
    "rank-bound": {"n": "3", "flavor": "complex_2local", "check_projector": False, "restarts": 20},
}


def resolve_config(args: argparse.Namespace) -> dict:
    """Defaults, then the JSON config file, then explicit flags."""
    cmd = args.command
    cfg = {**DEFAULTS["_all"], **DEFAULTS[cmd]}
    if args.config:
        try:
            file_cfg = json.loads(Path(args.config).read_text())
        except (OSError, ValueError) as exc:
            raise ConfigError(f"cannot read config {args.config}: {exc}") from exc
        if not isinstance(file_cfg, dict):
            raise ConfigError("config file must hold a JSON object")
        unknown = set(file_cfg) - set(cfg)
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        cfg.update(file_cfg)
    cfg.update({k: v for k, v in vars(args).items() if k not in ("command", "config")})
    cfg["command"] = cmd
    if "n" in cfg:
        cfg["n"] = parse_n_range(cfg["n"])
    if cfg["jobs"] is None:
        cfg["jobs"] = len(os.sched_getaffinity(0)) if hasattr(os, "sched_getaffinity") else os.cpu_count() or 1
    if cfg["jobs"] < 1:
        raise ConfigError("--jobs must be >= 1")
    for key in ("realizations", "restarts"):
        if key in cfg and int(cfg[key]) < 1:
            raise ConfigError(f"--{key} must be >= 1")
    if cmd in ("stability", "sff") and not cfg["results"]:
        raise ConfigError(f"{cmd} needs --results")
    return cfg


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = resolve_config(args)
        return COMMANDS[args.command](cfg)
    except (ConfigError, ValueError) as exc:
        print(f"twolocal: error: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
