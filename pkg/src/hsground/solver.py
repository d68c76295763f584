"""Ground states by Nehari-projected Sobolev gradient descent.

Each iterate lives on the Nehari manifold.  The search direction is the
Riesz representative of ``Phi'`` in the discrete Dirichlet inner product,
which is tangent to the manifold there, so ``phi`` is the merit function
for an Armijo line search along the projected path.  Continuation in
``eps`` and in the homotopy multiplier reuse the previous profile.
"""

from __future__ import annotations

import csv
import json
import logging
import math
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .core import (
    ProblemSpec,
    RadialFunction,
    RadialGrid,
    critical_level,
    instanton,
    make_grid,
)
from .functionals import (
    EnergyBreakdown,
    _solve_dirichlet,
    _terms,
    energy,
    energy_gradient,
    quick_energy,
)
from .nehari import UniquenessFailure, nehari_scaling, scaling_for

log = logging.getLogger(__name__)

__all__ = [
    "SolveOptions",
    "SolveReport",
    "SolverError",
    "NotConverged",
    "CollapseToZero",
    "ConcentrationDetected",
    "StageError",
    "solve_ground_state",
    "epsilon_continuation",
    "lambda_continuation",
    "mountain_pass_level",
    "mountain_pass_scan",
    "default_lambda_schedule",
]

_ROUND = 64 * np.finfo(float).eps


class SolverError(RuntimeError):
    """Base class; ``report`` holds the last iterate when one exists."""

    def __init__(self, message: str, report: "SolveReport | None" = None):
        super().__init__(message)
        self.report = report


class NotConverged(SolverError):
    pass


class CollapseToZero(SolverError):
    pass


class ConcentrationDetected(SolverError):
    pass


class StageError(SolverError):
    """A continuation stage failed; ``stage`` and ``value`` locate it."""

    def __init__(self, stage: int, value: float, cause: Exception, reports=()):
        super().__init__(f"stage {stage} (parameter {value:g}) failed: {cause}",
                         getattr(cause, "report", None))
        self.stage = stage
        self.value = value
        self.cause = cause
        self.reports = list(reports)


@dataclass(frozen=True)
class SolveOptions:
    max_iters: int = 4000
    grad_tol: float = 1e-9
    step: float = 1.0
    backtrack: float = 0.5
    r_max: float = 1e4
    n_nodes: int = 2049
    max_step: float = 64.0
    min_step: float = 1e-14
    collapse_tol: float = 1e-8
    concentration_delta: float = 1e-3
    concentration_radius: float = 1e3
    concentration_threshold: float = 0.99
    check_every: int = 25
    small_lambda_bound: float = 0.1

    def __post_init__(self):
        if self.max_iters < 1:
            raise ValueError(f"max_iters must be >= 1, got {self.max_iters}")
        if not 0.0 < self.backtrack < 1.0:
            raise ValueError(f"backtrack must lie in (0, 1), got {self.backtrack}")
        if not self.grad_tol > 0:
            raise ValueError(f"grad_tol must be positive, got {self.grad_tol}")
        if not self.step > 0:
            raise ValueError(f"step must be positive, got {self.step}")

    def make_grid(self, N: int) -> RadialGrid:
        return make_grid(N, self.r_max, self.n_nodes)

    def to_dict(self) -> dict:
        return {k: getattr(self, k) for k in self.__dataclass_fields__}

    @classmethod
    def from_dict(cls, data: dict) -> "SolveOptions":
        unknown = set(data) - set(cls.__dataclass_fields__)
        if unknown:
            raise ValueError(f"unknown solver option(s): {sorted(unknown)}")
        return cls(**data)


@dataclass(frozen=True)
class Concentration:
    inner_fraction: float
    outer_fraction: float
    delta: float
    radius: float

    def to_dict(self) -> dict:
        return {
            "inner_fraction": self.inner_fraction,
            "outer_fraction": self.outer_fraction,
            "delta": self.delta,
            "radius": self.radius,
        }


@dataclass(frozen=True)
class SolveReport:
    spec: ProblemSpec
    eps: float
    profile: RadialFunction
    breakdown: EnergyBreakdown
    c_level: float
    iterations: int
    converged: bool
    residual: float
    concentration: Concentration
    decay_slope: float
    gradient_slope: float
    decay_window_gap: float
    certificates: dict
    flags: tuple = ()
    scan_level: float = float("nan")
    level_margin: float = float("nan")
    trace: tuple = field(default=(), repr=False)

    @property
    def passed(self) -> bool:
        """All applicable certificates hold (``None`` marks not applicable)."""
        return all(v for v in self.certificates.values() if v is not None)

    def to_dict(self) -> dict:
        g = self.profile.grid
        return {
            "problem": self.spec.to_dict(),
            "eps": self.eps,
            "grid": {"N": g.dimension, "r_max": g.r_max, "n_nodes": g.n_nodes},
            "c_level": self.c_level,
            "scan_level": self.scan_level,
            "level_margin": self.level_margin,
            "iterations": self.iterations,
            "converged": self.converged,
            "residual": self.residual,
            "breakdown": self.breakdown.to_dict(),
            "concentration": self.concentration.to_dict(),
            "decay_slope": self.decay_slope,
            "gradient_slope": self.gradient_slope,
            "decay_window_gap": self.decay_window_gap,
            "certificates": dict(self.certificates),
            "flags": list(self.flags),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    def write_trace(self, path: str | Path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["iter", "phi", "grad_norm", "t_star"])
            for row in self.trace:
                w.writerow([row[0]] + [repr(float(x)) for x in row[1:]])


def _clip(values: np.ndarray) -> np.ndarray:
    return np.maximum(values, 0.0)


def _concentration(T, u: RadialFunction, delta: float, radius: float) -> Concentration:
    g = u.grid
    dens = T.W0 * np.abs(u.values) ** T.p0
    total = float(dens.sum())
    if total <= 0:
        return Concentration(0.0, 0.0, delta, radius)
    inner = float(dens[g.nodes <= delta].sum()) / total
    outer = float(dens[g.nodes >= radius].sum()) / total
    return Concentration(inner, outer, delta, radius)


def _check_degenerate(spec: ProblemSpec, opts: SolveOptions) -> None:
    """Small-negative-block requirement for N = 3, 1 <= s_1 < 2, k != l."""
    if spec.dimension != 3 or spec.k == spec.n_terms or spec.k == 0:
        return
    s1 = spec.terms[0][0]
    if not 1.0 <= s1 < 2.0:
        return
    worst = max(abs(lam) for lam in spec.effective_lambdas[spec.k :])
    warnings.warn(
        "N=3 with 1 <= s_1 < 2 and k != l: existence needs a small negative block and "
        f"no explicit bound is known; using |lambda_i| <= {opts.small_lambda_bound}",
        stacklevel=3,
    )
    if worst > opts.small_lambda_bound:
        raise ValueError(
            f"negative block max |lambda_i| = {worst:g} exceeds small_lambda_bound "
            f"{opts.small_lambda_bound:g} in the N=3, s_1 >= 1 regime"
        )


def _certify(spec, eps, u, bd, rn, opts, monotone_ok, T):
    from .oracles import tail_slopes

    N = spec.dimension
    D = bd.dirichlet
    norm = math.sqrt(max(D, 0.0))
    certs = {}
    certs["nehari"] = abs(bd.nehari_residual) <= 1e-8 * D
    certs["residual"] = rn / (1.0 + norm) <= opts.grad_tol
    certs["positivity"] = bool(np.all(u.values > 0))
    certs["monotone_decrease"] = u.is_nonincreasing(1e-10)
    certs["pohozaev"] = abs(bd.pohozaev_residual) <= 1e-4 * D
    if eps > 0:
        gap = abs(bd.ball_inner - bd.ball_outer)
        scale = abs(bd.ball_inner) + abs(bd.ball_outer) + abs(bd.phi)
        certs["ball_balance"] = gap <= 1e-4 * scale
    else:
        certs["ball_balance"] = None
    level = critical_level(N)
    margin = level - bd.phi
    if any(lam > 0 for lam in spec.effective_lambdas):
        certs["energy_below_SN2"] = bool(margin > 1e-8 * level)
    else:
        certs["energy_below_SN2"] = None
    certs["descent_monotone"] = monotone_ok

    slopes = tail_slopes(u)
    if slopes is None:
        certs["decay"] = None
        slope = grad_slope = gap = float("nan")
    else:
        slope, grad_slope, gap = slopes
        certs["decay"] = bool(
            abs(slope + (N - 2)) <= 0.05 and grad_slope <= -(N - 1) + 0.1 and gap <= 0.05
        )

    flags = []
    for i, (bi, lam) in enumerate(zip(bd.b_terms, spec.effective_lambdas)):
        if lam != 0.0 and abs(bi) <= 0.01 * D:
            flags.append(f"VANISHING_SUSPECT:term{i}")
    return certs, margin, slope, grad_slope, gap, flags


def _not_steepest(d, z) -> bool:
    """True when ``d`` is not already the steepest-descent direction."""
    return not np.array_equal(d, -z)


def solve_ground_state(
    spec: ProblemSpec,
    eps: float,
    init: RadialFunction,
    opts: SolveOptions | None = None,
    raise_on_failure: bool = True,
) -> SolveReport:
    """Minimize ``phi`` over the discrete Nehari manifold starting from ``init``.

    Raises :class:`NotConverged`, :class:`CollapseToZero` or
    :class:`ConcentrationDetected` unless ``raise_on_failure`` is false, in
    which case the last iterate is reported with ``converged = False``.
    """
    opts = opts or SolveOptions()
    spec.check_eps(eps)
    _check_degenerate(spec, opts)
    grid = init.grid
    if grid.dimension != spec.dimension:
        raise ValueError(f"init lives on an N={grid.dimension} grid, spec has N={spec.dimension}")
    T = _terms(spec, eps, grid)
    v0 = _clip(np.asarray(init.values, dtype=float))
    if not np.any(v0):
        raise ValueError("init must be nonzero after clipping its negative part")

    def project(values):
        u = RadialFunction(grid, values)
        sc = scaling_for(spec, eps, u)
        if not sc.uniqueness_certificate:
            raise UniquenessFailure(f"Nehari scaling t* = {sc.t_star:.6g} not certified unique")
        return u * sc.t_star, sc

    def evaluate(values):
        """Projected point, its scaling, level and gradient; ``None`` if clipped to zero."""
        values = _clip(values)
        if not np.any(values):
            return None
        v, s = project(values)
        return v, s, quick_energy(spec, eps, v)[0], energy_gradient(spec, eps, v)

    def line_search(state, d, slope0, tau0):
        """Secant search for a zero of the projected directional derivative.

        Uses ``d/dtau phi(P(u + tau d)) = t* grad(P(u + tau d)) . d``, which
        stays accurate when differences of ``phi`` are lost to rounding.
        """
        u0, _, phi0, _ = state
        slack = _ROUND * abs(phi0)

        def trial(tau):
            out = evaluate(u0.values + tau * d)
            if out is None:
                return None, None
            return out, out[1].t_star * float(np.dot(out[3], d))

        def armijo(out, tau):
            return out[2] <= phi0 + 1e-4 * tau * slope0 + slack

        lo, s_lo, best = 0.0, slope0, None
        hi, s_hi = tau0, None
        for _ in range(40):
            out, s = trial(hi)
            if out is not None and armijo(out, hi):
                best = (hi, out)
                if s < 0:
                    lo, s_lo = hi, s
                    hi *= 2.0
                    continue
                s_hi = s
                break
            hi *= opts.backtrack
            if hi < opts.min_step:
                return None
        if s_hi is None:
            return best
        for _ in range(8):
            tau = lo - s_lo * (hi - lo) / (s_hi - s_lo)
            if not lo < tau < hi:
                tau = 0.5 * (lo + hi)
            out, s = trial(tau)
            if out is None or not armijo(out, tau):
                hi, s_hi = tau, abs(s_lo) if s is None else max(s, abs(s_lo))
                continue
            if best is None or out[2] <= best[1][2]:
                best = (tau, out)
            if abs(s) <= 0.1 * abs(slope0):
                break
            if s < 0:
                lo, s_lo = tau, s
            else:
                hi, s_hi = tau, s
        return best

    state = evaluate(v0)
    if state is None:
        raise ValueError("init must be nonzero after clipping its negative part")
    u, sc, phi, grad = state
    trace = []
    tau = opts.step
    converged = False
    monotone_ok = True
    failure: SolverError | None = None
    it = 0
    rn = float("nan")
    d = z_old = r_old = None
    while True:
        z = _solve_dirichlet(grid, grad)
        rn2 = max(float(np.dot(grad, z)), 0.0)
        rn = math.sqrt(rn2)
        norm = math.sqrt(max(quick_energy(spec, eps, u)[1], 0.0))
        trace.append((it, phi, rn, sc.t_star))
        if norm < opts.collapse_tol:
            failure = CollapseToZero(f"||u|| = {norm:.3g} fell below {opts.collapse_tol:g}")
            break
        if rn / (1.0 + norm) <= opts.grad_tol:
            converged = True
            break
        if it % opts.check_every == 0:
            conc = _concentration(T, u, opts.concentration_delta, opts.concentration_radius)
            frac = conc.inner_fraction + conc.outer_fraction
            if frac > opts.concentration_threshold:
                failure = ConcentrationDetected(
                    f"{100 * frac:.2f}% of the critical mass lies in r <= "
                    f"{conc.delta:g} or r >= {conc.radius:g} at iteration {it}"
                )
                break
        if it >= opts.max_iters:
            failure = NotConverged(
                f"no convergence in {opts.max_iters} iterations "
                f"(residual {rn:.3e}, target {opts.grad_tol:.1e})"
            )
            break
        # Polak-Ribiere (clipped at zero) in the Dirichlet metric
        if d is None:
            d = -z
        else:
            beta = max(0.0, float(np.dot(z, grad - r_old)) / float(np.dot(z_old, r_old)))
            d = -z + beta * d
        slope0 = float(np.dot(grad, d))
        if slope0 >= 0:
            d = -z
            slope0 = -rn2
        found = line_search(state, d, slope0, tau)
        if found is None and _not_steepest(d, z):
            d = -z
            slope0 = -rn2
            found = line_search(state, d, slope0, opts.step)
        if found is None:
            failure = NotConverged(f"line search stalled at iteration {it} (residual {rn:.3e})")
            break
        tau, new = found
        if new[2] > phi + _ROUND * abs(phi):
            monotone_ok = False
        z_old, r_old = z, grad
        state = new
        u, sc, phi, grad = new
        it += 1

    bd = energy(spec, eps, u)
    certs, margin, slope, grad_slope, gap, flags = _certify(
        spec, eps, u, bd, rn, opts, monotone_ok, T
    )
    if not converged:
        certs["residual"] = False
    conc = _concentration(T, u, opts.concentration_delta, opts.concentration_radius)
    scan = mountain_pass_scan(spec, eps, u)
    if abs(scan - bd.phi) > 1e-8 * max(abs(bd.phi), 1e-300):
        flags.append("LEVEL_DISAGREEMENT")
    report = SolveReport(
        spec=spec,
        eps=float(eps),
        profile=u,
        breakdown=bd,
        c_level=bd.phi,
        iterations=it,
        converged=converged,
        residual=rn,
        concentration=conc,
        decay_slope=slope,
        gradient_slope=grad_slope,
        decay_window_gap=gap,
        certificates=certs,
        flags=tuple(flags),
        scan_level=scan,
        level_margin=margin,
        trace=tuple(trace),
    )
    if failure is not None:
        failure.report = report
        if raise_on_failure:
            raise failure
        log.warning("%s", failure)
    return report


def _ray_level(D, b, exps, C, p0, t):
    return 0.5 * D * t**2 - sum(bi * t**p / p for bi, p in zip(b, exps)) - C * t**p0 / p0


def mountain_pass_scan(spec: ProblemSpec, eps: float, u: RadialFunction) -> float:
    """``max_t phi(t u)`` from a dense log-spaced scan refined by golden section."""
    _, D, b, C = quick_energy(spec, eps, u)
    exps = spec.exponents
    p0 = spec.critical
    sc = nehari_scaling(D, [(bi, p - 2.0) for bi, p in zip(b, exps)], C, p0 - 2.0)
    t = sc.t_star * np.geomspace(1e-2, 1e2, 4001)
    vals = _ray_level(D, b, exps, C, p0, t)
    j = int(np.argmax(vals))
    lo, hi = t[max(j - 1, 0)], t[min(j + 1, t.size - 1)]
    invphi = (math.sqrt(5.0) - 1.0) / 2.0
    for _ in range(200):
        if hi - lo <= 1e-14 * hi:
            break
        x1 = hi - invphi * (hi - lo)
        x2 = lo + invphi * (hi - lo)
        if _ray_level(D, b, exps, C, p0, x1) < _ray_level(D, b, exps, C, p0, x2):
            lo = x1
        else:
            hi = x2
    return float(max(vals[j], _ray_level(D, b, exps, C, p0, 0.5 * (lo + hi))))


def mountain_pass_level(spec: ProblemSpec, eps: float, u: RadialFunction) -> float:
    """``phi`` at the Nehari point of the ray through ``u``.

    Cross-checked against :func:`mountain_pass_scan`; a relative mismatch
    above ``1e-8`` is logged.
    """
    if not np.any(u.values):
        raise ValueError("u must be nonzero")
    _, D, b, C = quick_energy(spec, eps, u)
    exps = spec.exponents
    p0 = spec.critical
    sc = nehari_scaling(D, [(bi, p - 2.0) for bi, p in zip(b, exps)], C, p0 - 2.0)
    level = float(_ray_level(D, b, exps, C, p0, sc.t_star))
    scan = mountain_pass_scan(spec, eps, u)
    if abs(scan - level) > 1e-8 * abs(level):
        log.warning("Nehari level %.12g and t-scan level %.12g disagree", level, scan)
    return level


def _write_stages(reports, stream_path):
    if stream_path is None:
        return
    with open(stream_path, "w") as fh:
        for rep in reports:
            fh.write(rep.to_json() + "\n")


def epsilon_continuation(
    spec: ProblemSpec,
    eps_schedule: Sequence[float],
    opts: SolveOptions | None = None,
    init: RadialFunction | None = None,
    limit_stage: bool = True,
    stream_path: str | Path | None = None,
) -> list[SolveReport]:
    """Solve along a decreasing ``eps`` schedule, warm-starting each stage.

    With ``limit_stage`` a final ``eps = 0`` solve is appended, started from
    the last regularized profile.
    """
    opts = opts or SolveOptions()
    sched = [float(e) for e in eps_schedule]
    if not sched:
        raise ValueError("eps_schedule is empty")
    if any(b >= a for a, b in zip(sched, sched[1:])):
        raise ValueError(f"eps_schedule must be strictly decreasing, got {sched}")
    for e in sched:
        if not 0.0 < e < spec.s_min:
            raise ValueError(f"eps_schedule entries must lie in (0, {spec.s_min}), got {e}")
    if limit_stage:
        sched.append(0.0)
    u = init if init is not None else instanton(opts.make_grid(spec.dimension))
    reports: list[SolveReport] = []
    for i, e in enumerate(sched):
        try:
            rep = solve_ground_state(spec, e, u, opts)
        except (SolverError, ValueError, ArithmeticError) as exc:
            _write_stages(reports, stream_path)
            raise StageError(i, e, exc, reports) from exc
        reports.append(rep)
        u = rep.profile
    _write_stages(reports, stream_path)
    return reports


def default_lambda_schedule(start: float, step: float = 0.25) -> list[float]:
    """Uniform steps from ``max(0, start)`` down to ``-1``."""
    lam0 = max(0.0, float(start))
    n = int(math.ceil(round((lam0 + 1.0) / step, 9)))
    return [lam0 - (lam0 + 1.0) * i / n for i in range(n + 1)]


def lambda_continuation(
    spec: ProblemSpec,
    lambda_schedule: Sequence[float] | None = None,
    eps: float = 0.0,
    opts: SolveOptions | None = None,
    init: RadialFunction | None = None,
    stream_path: str | Path | None = None,
) -> list[SolveReport]:
    """Follow the homotopy multiplier of the negative block down to ``-1``.

    A failed stage is retried once through the midpoint of its step.
    """
    opts = opts or SolveOptions()
    if spec.k >= spec.n_terms:
        raise ValueError("lambda continuation needs at least one negative-lambda term")
    sched = (
        default_lambda_schedule(1.0)
        if lambda_schedule is None
        else [float(x) for x in lambda_schedule]
    )
    if not sched or sched[0] < 0:
        raise ValueError(f"lambda schedule must start at a value >= 0, got {sched[:1]}")
    if any(b >= a for a, b in zip(sched, sched[1:])):
        raise ValueError(f"lambda schedule must be strictly decreasing, got {sched}")
    u = init if init is not None else instanton(opts.make_grid(spec.dimension))
    reports: list[SolveReport] = []
    prev = None
    for i, lam in enumerate(sched):
        stage_spec = spec.with_homotopy(lam)
        try:
            rep = solve_ground_state(stage_spec, eps, u, opts)
        except (SolverError, ValueError, ArithmeticError) as exc:
            if prev is None:
                _write_stages(reports, stream_path)
                raise StageError(i, lam, exc, reports) from exc
            mid = 0.5 * (prev + lam)
            log.info("stage %d at lambda=%g failed, retrying through %g", i, lam, mid)
            try:
                half = solve_ground_state(spec.with_homotopy(mid), eps, u, opts)
                rep = solve_ground_state(stage_spec, eps, half.profile, opts)
            except (SolverError, ValueError, ArithmeticError) as exc2:
                _write_stages(reports, stream_path)
                raise StageError(i, lam, exc2, reports) from exc2
        reports.append(rep)
        u = rep.profile
        prev = lam
    _write_stages(reports, stream_path)
    return reports
