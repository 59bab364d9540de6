"""Run orchestration: single slab runs, epsilon sweeps with optional worker
pools, rate fitting, and persistence (norms.csv, sweep.csv/json, manifests,
monitor ledgers).

All output files are written atomically (temp file + rename) and floats are
serialized with 17 significant digits so CSV round-trips are exact. Sweeps
are deterministic regardless of worker count: each epsilon run is an
independent pure computation and rows are assembled in epsilon order.
"""

from __future__ import annotations

import concurrent.futures
import json
import math
import os
import subprocess
import tempfile
import time
from dataclasses import dataclass, field

import numpy as np

from . import __version__
from . import expansion as ex
from . import norms as nrm
from .collision import CollisionOperator
from .config import RunConfig
from .errors import ConfigurationError, RayslabError
from .rayleigh import RayleighProfile
from .solver import SlabConfig, SlabSolver
from .velocity import build_grid

__all__ = [
    "SweepResult", "fit_rate", "run_single", "cmd_sweep",
    "write_csv_atomic", "write_json_atomic", "worker_count",
]

ENV_WORKERS = "RAYSLAB_WORKERS"

# runtime_s lives in sweep.json only: CSV outputs are bit-reproducible
SWEEP_CSV_COLUMNS = ["epsilon", "E_eps", "M_norm", "N_norm"]
SWEEP_COLUMNS = SWEEP_CSV_COLUMNS + ["runtime_s"]


def _fmt(x) -> str:
    if isinstance(x, float):
        return format(x, ".17g")
    return str(x)


def write_csv_atomic(path: str, header: list, rows: list) -> None:
    d = os.path.dirname(os.path.abspath(path))
    os.makedirs(d, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=d, suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(",".join(header) + "\n")
            for row in rows:
                fh.write(",".join(_fmt(x) for x in row) + "\n")
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_json_atomic(path: str, obj) -> None:
    d = os.path.dirname(os.path.abspath(path))
    os.makedirs(d, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=d, suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            json.dump(obj, fh, indent=2, sort_keys=True, default=_json_default)
            fh.write("\n")
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _json_default(obj):
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"not JSON serializable: {type(obj)}")


def worker_count(explicit: int | None = None) -> int:
    if explicit is not None:
        return max(1, int(explicit))
    raw = os.environ.get(ENV_WORKERS, "")
    try:
        return max(1, int(raw)) if raw else 1
    except ValueError:
        raise ConfigurationError(f"{ENV_WORKERS} must be an integer, got {raw!r}")


def _code_version() -> str:
    try:
        out = subprocess.run(
            ["git", "describe", "--always", "--dirty"],
            cwd=os.path.dirname(os.path.abspath(__file__)),
            capture_output=True, text=True, timeout=10,
        )
        if out.returncode == 0:
            return out.stdout.strip()
    except OSError:
        pass
    return f"rayslab-{__version__}"


@dataclass
class _Environment:
    """Heavy per-config objects shared by the runs of one process."""

    grid: object
    op: CollisionOperator
    burnett: ex.BurnettFields
    profile: RayleighProfile
    pairs: np.ndarray | None = None
    gdict: object = None


def build_environment(cfg: RunConfig, need_gamma: bool | None = None) -> _Environment:
    grid = build_grid(cfg.n_v, cfg.v_max)
    op = CollisionOperator(
        grid, cfg.backend, nu0=cfg.nu0 if cfg.backend == "bgk" else None,
        angular_order=cfg.angular_order, byte_budget=int(cfg.matrix_byte_budget),
    )
    burnett = ex.build_burnett(op)
    kappa = cfg.kappa if cfg.kappa_mode == "fixed" else burnett.kappa
    profile = RayleighProfile(u_b=cfg.u_b, kappa=kappa, delta=cfg.delta)
    env = _Environment(grid, op, burnett, profile)
    if need_gamma is None:
        need_gamma = cfg.mode == "remainder" and (cfg.include_Ltilde or cfg.include_GammaRR)
    if need_gamma:
        env.pairs = ex.build_gamma_pairs(op, burnett)
        env.gdict = op.build_gamma_dictionary(ex.dictionary_basis(burnett))
    return env


def _slab_config(cfg: RunConfig, eps: float) -> SlabConfig:
    return SlabConfig(
        eps=eps, n_x=cfg.n_x, x_max=cfg.x_max, t_final=cfg.t_final, cfl=cfg.cfl,
        mode=cfg.mode, include_Ltilde=cfg.include_Ltilde,
        include_GammaRR=cfg.include_GammaRR, limiter=cfg.limiter,
        output_every=cfg.output_every,
    )


def run_single(cfg: RunConfig, eps: float, out_dir: str | None = None,
               env: _Environment | None = None) -> dict:
    """One slab run at a given epsilon; optionally persists norms.csv,
    run_manifest.json and monitor.json under out_dir."""
    if env is None:
        env = build_environment(cfg)
    t0 = time.perf_counter()
    scfg = _slab_config(cfg, eps)
    solver = SlabSolver(scfg, env.profile, env.op, env.burnett,
                        pairs=env.pairs, gdict=env.gdict)
    state, acc = solver.run()
    runtime = time.perf_counter() - t0
    M, N = acc.current_energy_norms()
    wd = ex.build_wall_data(
        env.profile, env.grid, eps,
        ex.build_f2(env.profile, env.burnett, 0.0, np.zeros(1))[0],
    )
    result = {
        "epsilon": eps,
        "E_eps": acc.sup_conv,
        "M_norm": M,
        "N_norm": N,
        "runtime_s": runtime,
        "steps": state.steps,
        "wall_flux_defect_max": state.wall_flux_defect_max,
        "min_value": state.min_value,
        "rows": [r.as_list() for r in acc.rows],
        "monitor": nrm.estimate_monitor(
            acc.rows, wd.taylor_gap_1, wd.taylor_gap_2, eps),
    }
    if out_dir is not None:
        os.makedirs(out_dir, exist_ok=True)
        write_csv_atomic(os.path.join(out_dir, "norms.csv"),
                         nrm.CSV_COLUMNS, result["rows"])
        write_json_atomic(os.path.join(out_dir, "monitor.json"), result["monitor"])
        manifest = {
            "config": cfg.as_sections(),
            "epsilon": eps,
            "backend": cfg.backend,
            "kappa_used": env.profile.kappa,
            "toggles": {"include_Ltilde": cfg.include_Ltilde,
                        "include_GammaRR": cfg.include_GammaRR,
                        "limiter": cfg.limiter},
            "code_version": _code_version(),
            "runtime_s": runtime,
            "steps": state.steps,
        }
        write_json_atomic(os.path.join(out_dir, "run_manifest.json"), manifest)
    return result


def fit_rate(pairs) -> dict:
    """Least-squares slope of log E against log eps, plus pairwise local
    rates log2(E(2 eps)/E(eps)) for adjacent entries."""
    pairs = sorted(pairs, key=lambda p: -p[0])
    if len(pairs) < 3:
        raise ConfigurationError("rate fit needs at least 3 (eps, E) pairs")
    if any(E == 0.0 for _, E in pairs):
        return {"p": None, "degenerate": True, "pairwise": []}
    x = np.log([e for e, _ in pairs])
    y = np.log([E for _, E in pairs])
    slope = float(np.polyfit(x, y, 1)[0])
    pairwise = [
        float(math.log(E0 / E1) / math.log(e0 / e1))
        for (e0, E0), (e1, E1) in zip(pairs, pairs[1:])
    ]
    return {"p": slope, "degenerate": False, "pairwise": pairwise}


@dataclass
class SweepResult:
    rows: list
    fitted_rate: float | None
    pairwise: list
    degenerate: bool
    failures: list = field(default_factory=list)


def _sweep_worker(cfg: RunConfig, eps: float, out_dir: str) -> dict:
    return run_single(cfg, eps, out_dir=out_dir)


def cmd_sweep(cfg: RunConfig, workers: int | None = None,
              out_dir: str | None = None) -> SweepResult:
    """Runs the solver once per sweep epsilon, fits the convergence rate and
    writes sweep.csv / sweep.json. Individual epsilon failures are recorded
    and skipped; the fit needs at least 3 successes."""
    if len(cfg.epsilons) < 3:
        raise ConfigurationError("sweep needs at least 3 epsilon values")
    nw = worker_count(workers)
    out_dir = out_dir if out_dir is not None else cfg.directory
    results: dict = {}
    failures: list = []
    run_dirs = {e: os.path.join(out_dir, f"eps_{_fmt(e)}") for e in cfg.epsilons}
    if nw == 1:
        env = build_environment(cfg)
        for e in cfg.epsilons:
            try:
                results[e] = run_single(cfg, e, out_dir=run_dirs[e], env=env)
            except RayslabError as exc:
                failures.append({"epsilon": e, "error": str(exc)})
    else:
        with concurrent.futures.ProcessPoolExecutor(max_workers=nw) as pool:
            futs = {pool.submit(_sweep_worker, cfg, e, run_dirs[e]): e
                    for e in cfg.epsilons}
            for fut in concurrent.futures.as_completed(futs):
                e = futs[fut]
                try:
                    results[e] = fut.result()
                except RayslabError as exc:
                    failures.append({"epsilon": e, "error": str(exc)})
    ok = [results[e] for e in cfg.epsilons if e in results]
    rows = [[r["epsilon"], r["E_eps"], r["M_norm"], r["N_norm"], r["runtime_s"]]
            for r in ok]
    fit = {"p": None, "degenerate": False, "pairwise": []}
    if len(ok) >= 3:
        fit = fit_rate([(r["epsilon"], r["E_eps"]) for r in ok])
    res = SweepResult(rows=rows, fitted_rate=fit["p"], pairwise=fit["pairwise"],
                      degenerate=fit["degenerate"],
                      failures=sorted(failures, key=lambda f: -f["epsilon"]))
    write_csv_atomic(os.path.join(out_dir, "sweep.csv"), SWEEP_CSV_COLUMNS,
                     [row[:4] for row in rows])
    write_json_atomic(os.path.join(out_dir, "sweep.json"), {
        "rows": [dict(zip(SWEEP_COLUMNS, row)) for row in rows],
        "fitted_rate": "degenerate" if res.degenerate else res.fitted_rate,
        "pairwise_rates": res.pairwise,
        "failures": res.failures,
        "config": cfg.as_sections(),
        "code_version": _code_version(),
    })
    return res
