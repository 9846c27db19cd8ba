"""Config-driven command line: solve one problem, sweep lambda, dump thresholds.

Configs are flat key-value text with dotted sections (`mesh.nx = 32`), chosen
over nested formats so fixture diffs stay line-local. Every output file
carries the sha256 of the config file in a header comment (or a JSON key)
for provenance, and identical (config, seed) inputs reproduce outputs
byte for byte.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
from dataclasses import dataclass, replace
from multiprocessing import Pool

import numpy as np

from .energy import estimate_c_star, phi
from .fields import (
    CaseClass,
    FieldError,
    ProblemConfig,
    Tolerances,
    build_problem,
    classify_case,
)
from .mesh import build_rectangle_mesh, save_field
from .solvers import (
    SolveReport,
    SweepRecord,
    _sphere_samples,
    _try_phi,
    constrained_global_minimize,
    eigen_sweep,
    minimize_descent,
    minimize_in_ball,
    mountain_pass,
    mountain_zeta,
    nehari_minimize,
    sigma_threshold,
    solve_sublinear_family,
    _sigma_minimize,
    _homogeneous_q,
)
from .spaces import DiscreteFunction

__all__ = ["main", "RunConfig", "load_run_config", "ConfigError"]


class ConfigError(ValueError):
    def __init__(self, message: str, path: str = "", line: int | None = None):
        loc = f"{path}:{line}: " if line is not None else (f"{path}: " if path else "")
        super().__init__(f"{loc}{message}")


_KEYS = {
    "mesh.lx": float, "mesh.ly": float, "mesh.nx": int, "mesh.ny": int,
    "exponents.p": str, "exponents.q": str, "exponents.r": str,
    "weights.alpha": str, "weights.beta1": str, "weights.beta2": str,
    "problem.lambda": float, "problem.epsilon_reg": float,
    "sweep.lambda_min": float, "sweep.lambda_max": float, "sweep.steps": int,
    "solver.seed": int, "solver.grad_tol": float, "solver.max_iter": int,
    "solver.restarts": int, "solver.seeds": int, "solver.path_points": int,
    "solver.probes": int,
    "case.override": str,
    "output.dir": str,
}

_CASE_OVERRIDES = {
    "descent", "sublinear", "ball", "mountain", "nehari", "constrained",
}


@dataclass
class RunConfig:
    """Parsed and type-checked config file plus the raw bytes hash."""

    path: str
    values: dict
    config_hash: str

    def get(self, key, default=None):
        return self.values.get(key, default)

    def require(self, key):
        if key not in self.values:
            raise ConfigError(f"missing required key {key!r}", self.path)
        return self.values[key]


def load_run_config(path: str) -> RunConfig:
    try:
        raw = open(path, "rb").read()
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}", path)
    digest = hashlib.sha256(raw).hexdigest()
    values = {}
    for lineno, line in enumerate(raw.decode("utf-8", errors="replace").splitlines(), start=1):
        text = line.split("#", 1)[0].strip()
        if not text:
            continue
        if "=" not in text:
            raise ConfigError("expected `key = value`", path, lineno)
        key, _, val = text.partition("=")
        key, val = key.strip(), val.strip().strip("\"'")
        if key not in _KEYS:
            raise ConfigError(f"unknown key {key!r}", path, lineno)
        try:
            values[key] = _KEYS[key](val)
        except ValueError:
            raise ConfigError(f"cannot parse value {val!r} for {key!r}", path, lineno) from None
    if "case.override" in values and values["case.override"] not in _CASE_OVERRIDES:
        raise ConfigError(
            f"case.override must be one of {sorted(_CASE_OVERRIDES)}", path)
    return RunConfig(path=path, values=values, config_hash=digest)


def build_from_config(rc: RunConfig, seed: int | None = None, tol: float | None = None) -> ProblemConfig:
    mesh = build_rectangle_mesh(
        rc.require("mesh.lx"), rc.require("mesh.ly"),
        rc.require("mesh.nx"), rc.require("mesh.ny"),
    )
    tols = Tolerances(
        grad_tol=tol if tol is not None else rc.get("solver.grad_tol", Tolerances.grad_tol),
        max_iter=rc.get("solver.max_iter", Tolerances.max_iter),
    )
    try:
        return build_problem(
            mesh,
            p=rc.get("exponents.p", "2"), q=rc.get("exponents.q", "2"),
            r=rc.get("exponents.r", "2"),
            alpha=rc.get("weights.alpha", "1"),
            beta1=rc.get("weights.beta1", "1"), beta2=rc.get("weights.beta2", None),
            lam=rc.get("problem.lambda", 1.0),
            epsilon_reg=rc.get("problem.epsilon_reg", 1e-8),
            tolerances=tols,
        )
    except FieldError as exc:
        raise ConfigError(str(exc), rc.path) from exc


def _resolve_out_dir(rc: RunConfig, out: str | None) -> str:
    return out or rc.get("output.dir") or os.environ.get("PQSPECTRA_OUT") or "."


def _fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    return str(x)


def _write_report(out_dir: str, rep: SolveReport, cfg: ProblemConfig, rc: RunConfig) -> None:
    os.makedirs(out_dir, exist_ok=True)
    payload = {"config_hash": rc.config_hash, "lambda": cfg.lam}
    payload.update(rep.scalars())
    with open(os.path.join(out_dir, "report.json"), "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")
    save_field(os.path.join(out_dir, "solution.field"), cfg.mesh, rep.u.values,
               config_hash=rc.config_hash)
    with open(os.path.join(out_dir, "trace.csv"), "w", encoding="utf-8") as fh:
        fh.write(f"# config={rc.config_hash}\n")
        fh.write("iter,energy,residual\n")
        for i, (e, res) in enumerate(rep.trace):
            fh.write(f"{i},{_fmt(float(e))},{_fmt(float(res))}\n")


def _dispatch_solve(cfg: ProblemConfig, rc: RunConfig, seed: int) -> SolveReport:
    override = rc.get("case.override")
    case = classify_case(cfg)
    restarts = rc.get("solver.restarts", 4)
    if override == "descent":
        rng = np.random.default_rng([seed, 5])
        u0 = DiscreteFunction(cfg.mesh, 0.1 * rng.standard_normal(cfg.mesh.n_nodes))
        return minimize_descent(cfg, u0)
    if override == "sublinear" or (override is None and case is CaseClass.SUBLINEAR_A):
        reports = solve_sublinear_family(cfg, rc.get("solver.seeds", 3))
        if not reports:
            rep = minimize_descent(cfg, DiscreteFunction.zero(cfg.mesh), max_iter=0)
            rep.converged = False
            rep.message = "no nontrivial solution found from the seed family"
            return rep
        return min(reports, key=lambda r: r.energy)
    if override == "ball" or (override is None and case is CaseClass.SMALL_LAMBDA_B):
        thresholds = estimate_c_star(cfg, probes=rc.get("solver.probes", 64), seed=seed)
        return minimize_in_ball(cfg, thresholds, seed=seed)
    if override == "mountain" or (override is None and case is CaseClass.SUPERLINEAR_C):
        zeta = mountain_zeta(cfg)
        return mountain_pass(cfg, zeta, path_points=rc.get("solver.path_points", 21))
    if override == "nehari" or (override is None and case is CaseClass.HOMOGENEOUS_P_PLUS_LT_Q):
        return nehari_minimize(cfg, restarts=restarts, seed=seed)
    if override == "constrained" or (override is None and case is CaseClass.HOMOGENEOUS_Q_LT_P_MINUS):
        return constrained_global_minimize(cfg, seed=seed)
    raise ConfigError(
        f"configuration is {case.value}; set case.override to pick a solver", rc.path)


def cmd_solve(config_path: str, out: str | None = None, seed: int | None = None,
              tol: float | None = None, jobs: int | None = None) -> int:
    try:
        rc = load_run_config(config_path)
        cfg = build_from_config(rc, seed=seed, tol=tol)
        run_seed = seed if seed is not None else rc.get("solver.seed", 0)
        rep = _dispatch_solve(cfg, rc, run_seed)
    except (ConfigError, FieldError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    out_dir = _resolve_out_dir(rc, out)
    try:
        _write_report(out_dir, rep, cfg, rc)
    except OSError as exc:
        print(f"error: cannot write outputs to {out_dir}: {exc}", file=sys.stderr)
        return 1
    status = "converged" if rep.converged else f"unconverged ({rep.message})"
    print(f"{status}: energy={rep.energy:.6g} residual={rep.residual:.3g} "
          f"norm={rep.norm:.6g} case={rep.case.value}")
    return 0 if rep.converged else 2


def _sweep_task(args):
    cfg, lam, seed, restarts, case, sigma_hint = args
    sub = cfg.with_lambda(lam)
    if case is CaseClass.HOMOGENEOUS_P_PLUS_LT_Q:
        rep = nehari_minimize(sub, restarts=restarts, seed=seed, sigma_hint=sigma_hint)
    else:
        rep = constrained_global_minimize(sub, seed=seed, sigma_hint=sigma_hint)
    return SweepRecord(
        lam=lam, found=bool(rep.converged and rep.nontrivial), energy=rep.energy,
        residual=rep.residual, u_norm=rep.norm, sigma_ref=0.0,
    )


def cmd_sweep(config_path: str, out: str | None = None, seed: int | None = None,
              tol: float | None = None, jobs: int | None = None) -> int:
    try:
        rc = load_run_config(config_path)
        cfg = build_from_config(rc, seed=seed, tol=tol)
        run_seed = seed if seed is not None else rc.get("solver.seed", 0)
        case = classify_case(cfg)
        if case not in (CaseClass.HOMOGENEOUS_P_PLUS_LT_Q, CaseClass.HOMOGENEOUS_Q_LT_P_MINUS):
            raise ConfigError(f"sweep needs a homogeneous configuration, got {case.value}", rc.path)
        lo = rc.require("sweep.lambda_min")
        hi = rc.require("sweep.lambda_max")
        steps = rc.require("sweep.steps")
        if steps < 1:
            raise ConfigError("sweep.steps must be at least 1", rc.path)
        lambdas = [lo] if steps == 1 else list(np.linspace(lo, hi, steps))
        restarts = rc.get("solver.restarts", 4)
        q0 = _homogeneous_q(cfg)
        sigma_val, sigma_u, _ = _sigma_minimize(cfg, q0, max(4, restarts), [run_seed, 101])
        tasks = [(cfg, float(lam), run_seed, restarts, case, (sigma_val, sigma_u))
                 for lam in lambdas]
        n_jobs = jobs or os.cpu_count() or 1
        if n_jobs > 1 and len(tasks) > 1:
            with Pool(min(n_jobs, len(tasks))) as pool:
                records = pool.map(_sweep_task, tasks)
        else:
            records = [_sweep_task(t) for t in tasks]
        for rec in records:
            rec.sigma_ref = sigma_val
        records.sort(key=lambda r: r.lam)
    except (ConfigError, FieldError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    out_dir = _resolve_out_dir(rc, out)
    try:
        os.makedirs(out_dir, exist_ok=True)
        with open(os.path.join(out_dir, "sweep.csv"), "w", encoding="utf-8") as fh:
            fh.write(f"# config={rc.config_hash}\n")
            fh.write("lambda,found,energy,residual,u_norm,sigma_ref\n")
            for rec in records:
                fh.write(",".join(_fmt(v) for v in (
                    rec.lam, rec.found, rec.energy, rec.residual, rec.u_norm, rec.sigma_ref,
                )) + "\n")
    except OSError as exc:
        print(f"error: cannot write outputs to {out_dir}: {exc}", file=sys.stderr)
        return 1
    found = sum(r.found for r in records)
    print(f"sweep complete: {found}/{len(records)} lambda points carry a solution "
          f"(threshold estimate {records[0].sigma_ref:.6g})")
    return 0


def cmd_thresholds(config_path: str, out: str | None = None, seed: int | None = None,
                   tol: float | None = None, jobs: int | None = None) -> int:
    try:
        rc = load_run_config(config_path)
        cfg = build_from_config(rc, seed=seed, tol=tol)
        run_seed = seed if seed is not None else rc.get("solver.seed", 0)
        case = classify_case(cfg)
        payload: dict = {
            "config_hash": rc.config_hash,
            "case": case.value,
            "subcritical_margin": cfg.subcritical_margin
            if np.isfinite(cfg.subcritical_margin) else "inf",
        }
        if case in (CaseClass.HOMOGENEOUS_P_PLUS_LT_Q, CaseClass.HOMOGENEOUS_Q_LT_P_MINUS):
            space = "C_q" if case is CaseClass.HOMOGENEOUS_P_PLUS_LT_Q else "C"
            payload["sigma"] = sigma_threshold(
                cfg, space, restarts=rc.get("solver.restarts", 8), seed=run_seed)
            payload["constraint_space"] = space
        else:
            tr = estimate_c_star(cfg, probes=rc.get("solver.probes", 64), seed=run_seed)
            payload["c_star_lower"] = tr.c_star_lower
            payload["rho"] = tr.rho
            if case is CaseClass.SMALL_LAMBDA_B:
                payload["lambda_cap"] = tr.lambda_cap
            if case is CaseClass.SUPERLINEAR_C:
                eta = tr.rho
                samples = _sphere_samples(cfg, eta, 32, run_seed)
                payload["eta"] = eta
                payload["b_sampled"] = min(_try_phi(s, cfg) for s in samples)
    except (ConfigError, FieldError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    out_dir = _resolve_out_dir(rc, out)
    try:
        os.makedirs(out_dir, exist_ok=True)
        with open(os.path.join(out_dir, "thresholds.json"), "w", encoding="utf-8") as fh:
            json.dump(payload, fh, indent=2, sort_keys=True)
            fh.write("\n")
    except OSError as exc:
        print(f"error: cannot write outputs to {out_dir}: {exc}", file=sys.stderr)
        return 1
    print(json.dumps(payload, indent=2, sort_keys=True))
    return 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="pqspectra",
        description="Variational solver for double-phase Robin/Neumann eigenproblems",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, fn in (("solve", cmd_solve), ("sweep", cmd_sweep), ("thresholds", cmd_thresholds)):
        sp = sub.add_parser(name)
        sp.add_argument("--config", required=True)
        sp.add_argument("--out", default=None)
        sp.add_argument("--jobs", type=int, default=None)
        sp.add_argument("--seed", type=int, default=None)
        sp.add_argument("--tol", type=float, default=None)
        sp.set_defaults(fn=fn)
    args = parser.parse_args(argv)
    return args.fn(args.config, out=args.out, seed=args.seed, tol=args.tol, jobs=args.jobs)


if __name__ == "__main__":
    sys.exit(main())
