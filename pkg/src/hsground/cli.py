"""Command line entry point: ``hsground {solve,sweep-eps,sweep-lambda,verify,baseline}``.

Exit status is 0 when every requested certificate passes, 2 when one fails
(including numerical failures of a stage) and 1 on configuration errors.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import sys
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import yaml

from .core import ProblemSpec, critical_level, instanton, make_grid, sobolev_constant
from .oracles import _json_safe, certificates_to_json, verification_suite
from .solver import (
    SolveOptions,
    SolverError,
    default_lambda_schedule,
    epsilon_continuation,
    lambda_continuation,
    solve_ground_state,
)

log = logging.getLogger("hsground")

COMMANDS = ("solve", "sweep-eps", "sweep-lambda", "verify", "baseline")

_DEFAULT_PROBLEMS = {
    "solve": {"N": 3, "terms": [[1.0, 1.0]], "k": 1},
    "sweep-eps": {"N": 3, "terms": [[1.0, 1.0]], "k": 1},
    "sweep-lambda": {"N": 3, "terms": [[0.5, 1.0], [1.5, -0.1]], "k": 1},
    "verify": {"N": 3, "terms": [[1.0, 1.0]], "k": 1},
    "baseline": {"N": 3},
}
_DEFAULT_EPS = [0.4, 0.2, 0.1, 0.05, 0.02]
_CONFIG_KEYS = {"command", "problem", "grid", "solver", "schedules", "output", "seed", "eps"}


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class RunConfig:
    command: str
    problem: ProblemSpec
    solver: SolveOptions
    output: Path
    seed: int = 0
    eps: float = 0.0
    eps_schedule: tuple = ()
    lambda_schedule: tuple = ()
    raw: dict = field(default_factory=dict, compare=False)

    def digest(self) -> str:
        return hashlib.sha256(json.dumps(self.canonical(), sort_keys=True).encode()).hexdigest()

    def canonical(self) -> dict:
        return {
            "command": self.command,
            "problem": self.problem.to_dict(),
            "grid": {"r_max": self.solver.r_max, "n_nodes": self.solver.n_nodes},
            "solver": self.solver.to_dict(),
            "eps": self.eps,
            "schedules": {"eps": list(self.eps_schedule), "lambda": list(self.lambda_schedule)},
            "seed": self.seed,
        }


def _floats(text: str, key: str) -> list[float]:
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError as exc:
        raise ConfigError(f"{key}: expected comma-separated numbers, got {text!r}") from exc


def build_config(args: argparse.Namespace) -> RunConfig:
    doc: dict = {}
    if args.config:
        try:
            doc = yaml.safe_load(Path(args.config).read_text()) or {}
        except OSError as exc:
            raise ConfigError(f"config: cannot read {args.config}: {exc}") from exc
        except yaml.YAMLError as exc:
            raise ConfigError(f"config: not a valid document: {exc}") from exc
        if not isinstance(doc, dict):
            raise ConfigError("config: top level must be a mapping")
    unknown = set(doc) - _CONFIG_KEYS
    if unknown:
        raise ConfigError(f"config: unknown key(s) {sorted(unknown)}")
    command = args.command
    if doc.get("command", command) != command:
        raise ConfigError(f"command: config says {doc['command']!r}, invoked as {command!r}")

    try:
        problem = ProblemSpec.from_dict(doc.get("problem") or _DEFAULT_PROBLEMS[command])
    except (ValueError, TypeError) as exc:
        raise ConfigError(f"problem.{exc}") from exc

    solver = dict(doc.get("solver") or {})
    grid = doc.get("grid") or {}
    if not isinstance(grid, dict) or set(grid) - {"r_max", "n_nodes"}:
        raise ConfigError("grid: expected a mapping with keys r_max, n_nodes")
    solver.update(grid)
    if args.nodes is not None:
        solver["n_nodes"] = args.nodes
    if args.rmax is not None:
        solver["r_max"] = args.rmax
    try:
        opts = SolveOptions.from_dict(solver)
        make_grid(problem.dimension, opts.r_max, opts.n_nodes)
    except (ValueError, TypeError) as exc:
        raise ConfigError(f"solver: {exc}") from exc

    sched = doc.get("schedules") or {}
    if not isinstance(sched, dict) or set(sched) - {"eps", "lambda"}:
        raise ConfigError("schedules: expected a mapping with keys eps, lambda")
    eps_s = sched.get("eps")
    lam_s = sched.get("lambda")
    if args.eps_schedule is not None:
        eps_s = _floats(args.eps_schedule, "eps-schedule")
    if args.lambda_schedule is not None:
        lam_s = _floats(args.lambda_schedule, "lambda-schedule")
    if command == "sweep-eps":
        eps_s = list(eps_s) if eps_s is not None else list(_DEFAULT_EPS)
        if not eps_s:
            raise ConfigError("schedules.eps: sweep-eps needs a nonempty schedule")
    elif command == "sweep-lambda":
        if lam_s is None:
            lam_s = default_lambda_schedule(1.0)
        if not lam_s:
            raise ConfigError("schedules.lambda: sweep-lambda needs a nonempty schedule")
    else:
        if eps_s or lam_s:
            raise ConfigError(f"schedules: not used by {command}")
        eps_s, lam_s = [], []
    eps_s = eps_s or []
    lam_s = lam_s or []

    eps = doc.get("eps", 0.25 if command == "solve" and problem.terms else 0.0)
    if args.eps is not None:
        eps = args.eps
    try:
        eps = float(eps)
        problem.check_eps(eps)
    except (ValueError, TypeError) as exc:
        raise ConfigError(f"eps: {exc}") from exc

    out = Path(args.out or doc.get("output") or f"hsground-{command}")
    seed = args.seed if args.seed is not None else int(doc.get("seed", 0))
    return RunConfig(
        command=command,
        problem=problem,
        solver=opts,
        output=out,
        seed=seed,
        eps=eps,
        eps_schedule=tuple(float(x) for x in eps_s),
        lambda_schedule=tuple(float(x) for x in lam_s),
        raw=doc,
    )


def _dump(obj) -> str:
    return json.dumps(_json_safe(obj), sort_keys=True, indent=2) + "\n"


def _stage_line(rep) -> str:
    return json.dumps(_json_safe(rep.to_dict()), sort_keys=True) + "\n"


def _provenance(cfg: RunConfig) -> dict:
    return {"config_hash": cfg.digest(), "config": cfg.canonical()}


def _write_stages(cfg: RunConfig, reports) -> None:
    with open(cfg.output / "stages.jsonl", "w") as fh:
        for i, rep in enumerate(reports):
            d = json.loads(_stage_line(rep))
            d["stage"] = i
            d["config_hash"] = cfg.digest()
            fh.write(json.dumps(d, sort_keys=True) + "\n")
            rep.profile.to_csv(cfg.output / f"profile_stage{i}.csv")
            rep.write_trace(cfg.output / f"trace_stage{i}.csv")


def _fail_summary(cfg: RunConfig, exc: SolverError) -> int:
    summary = {**_provenance(cfg), "passed": False, "error": str(exc)}
    stage = getattr(exc, "stage", None)
    if stage is not None:
        summary["failed_stage"] = stage
        summary["failed_value"] = exc.value
        if exc.reports:
            _write_stages(cfg, exc.reports)
    if exc.report is not None:
        summary["last_report"] = exc.report.to_dict()
    (cfg.output / "summary.json").write_text(_dump(summary))
    print(f"FAIL: {exc}", file=sys.stderr)
    return 2


def _run_solve(cfg: RunConfig) -> int:
    grid = cfg.solver.make_grid(cfg.problem.dimension)
    try:
        rep = solve_ground_state(cfg.problem, cfg.eps, instanton(grid), cfg.solver)
    except SolverError as exc:
        return _fail_summary(cfg, exc)
    rep.profile.to_csv(cfg.output / "profile.csv")
    rep.write_trace(cfg.output / "trace.csv")
    summary = {**_provenance(cfg), "passed": rep.passed, "report": rep.to_dict()}
    (cfg.output / "summary.json").write_text(_dump(summary))
    _print_certs(rep.certificates)
    return 0 if rep.passed else 2


def _print_certs(certs: dict) -> None:
    for name, ok in certs.items():
        status = "n/a " if ok is None else ("PASS" if ok else "FAIL")
        print(f"{status}  {name}")


def _run_sweep(cfg: RunConfig) -> int:
    try:
        if cfg.command == "sweep-eps":
            reports = epsilon_continuation(cfg.problem, cfg.eps_schedule, cfg.solver)
        else:
            reports = lambda_continuation(
                cfg.problem, cfg.lambda_schedule, cfg.eps, cfg.solver
            )
    except SolverError as exc:
        return _fail_summary(cfg, exc)
    _write_stages(cfg, reports)
    final = reports[-1]
    passed = all(r.passed for r in reports)
    summary = {
        **_provenance(cfg),
        "passed": passed,
        "levels": [r.c_level for r in reports],
        "final": final.to_dict(),
    }
    (cfg.output / "summary.json").write_text(_dump(summary))
    for i, r in enumerate(reports):
        status = "PASS" if r.passed else "FAIL"
        print(f"{status}  stage {i}: c = {r.c_level:.10g}, residual {r.residual:.2e}")
    return 0 if passed else 2


def _run_verify(cfg: RunConfig) -> int:
    certs = verification_suite(cfg.problem.dimension, cfg.solver, cfg.seed)
    (cfg.output / "certificates.json").write_text(certificates_to_json(certs) + "\n")
    passed = all(c.passed for c in certs)
    summary = {**_provenance(cfg), "passed": passed, "n_certificates": len(certs),
               "failed": [c.name for c in certs if not c.passed]}
    (cfg.output / "summary.json").write_text(_dump(summary))
    for c in certs:
        print(c.line())
    return 0 if passed else 2


def _run_baseline(cfg: RunConfig) -> int:
    from .oracles import best_sobolev_constant

    rows = []
    ok = True
    for N in (3, 4, 5):
        grid = make_grid(N, cfg.solver.r_max, cfg.solver.n_nodes)
        est = best_sobolev_constant(N, grid)
        instanton(grid).to_csv(cfg.output / f"instanton_N{N}.csv")
        rows.append(
            {
                "N": N,
                "S": est.S,
                "S_closed_form": sobolev_constant(N),
                "S_power": est.s_power,
                "dirichlet_U": est.dirichlet,
                "level": est.s_power / N,
                "level_closed_form": critical_level(N),
                "two_way_gap": est.two_way_gap,
            }
        )
        ok &= est.two_way_gap <= 1e-6
        print(f"N={N}: S = {est.S:.12g}, S^(N/2)/N = {est.s_power / N:.12g}")
    (cfg.output / "baseline.json").write_text(_dump({**_provenance(cfg), "baseline": rows}))
    return 0 if ok else 2


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="hsground", description=__doc__.splitlines()[0])
    p.add_argument("command", choices=COMMANDS)
    p.add_argument("--config", help="YAML run configuration")
    p.add_argument("--out", help="output directory")
    p.add_argument("--nodes", type=int, help="grid size (odd)")
    p.add_argument("--rmax", type=float, help="outer radius of the grid")
    p.add_argument("--seed", type=int, help="seed for randomized batteries")
    p.add_argument("--eps", type=float, help="regularization for solve / sweep-lambda")
    p.add_argument("--eps-schedule", help="comma-separated decreasing eps values")
    p.add_argument("--lambda-schedule", help="comma-separated decreasing homotopy values")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def run(cfg: RunConfig) -> int:
    try:
        cfg.output.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        print(f"config error: output: {exc}", file=sys.stderr)
        return 1
    handlers = {
        "solve": _run_solve,
        "sweep-eps": _run_sweep,
        "sweep-lambda": _run_sweep,
        "verify": _run_verify,
        "baseline": _run_baseline,
    }
    try:
        return handlers[cfg.command](cfg)
    except ValueError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1


def main(argv: Sequence[str] | None = None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    warnings.simplefilter("default")
    try:
        cfg = build_config(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    return run(cfg)


if __name__ == "__main__":
    sys.exit(main())
