"""Independent checks of the quantitative claims.

Each check compares a computed quantity with a closed form, a brute-force
scan or a direct quadrature, and returns a :class:`CertificateReport`.
"""

from __future__ import annotations

import json
import math
import time
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy import integrate
from scipy.special import gamma, hyp2f1

from .core import (
    ProblemSpec,
    RadialFunction,
    RadialGrid,
    critical_exponent,
    critical_level,
    dilate,
    dirichlet_norm_sq,
    instanton,
    instanton_values,
    kelvin_transform,
    make_grid,
    power_weights,
    sobolev_constant,
    weighted_integral,
)
from .nehari import dense_scan_roots, nehari_scaling

__all__ = [
    "CertificateReport",
    "DegenerateWindow",
    "SobolevEstimate",
    "best_sobolev_constant",
    "rayleigh_quotient",
    "interpolation_exponents",
    "interpolation_ratio",
    "check_interpolation",
    "decay_slope",
    "gradient_slope",
    "gradient_bound_check",
    "kelvin_ball_identity",
    "nonexistence_diagnostic",
    "c_eps_monotonicity",
    "energy_bound_threshold",
    "nehari_root_oracle",
    "sphere_mean_weight",
    "verification_suite",
    "certificates_to_json",
]


def _json_safe(x):
    if isinstance(x, dict):
        return {str(k): _json_safe(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_json_safe(v) for v in x]
    if isinstance(x, (np.floating, np.integer)):
        return x.item()
    if isinstance(x, np.bool_):
        return bool(x)
    if isinstance(x, float) and not math.isfinite(x):
        return repr(x)
    return x


@dataclass(frozen=True)
class CertificateReport:
    name: str
    passed: bool
    measured: float
    bound_or_target: float
    tolerance: float
    context: str = ""
    details: dict = field(default_factory=dict, compare=False)

    def to_dict(self) -> dict:
        return _json_safe(
            {
                "name": self.name,
                "passed": bool(self.passed),
                "measured": float(self.measured),
                "bound_or_target": float(self.bound_or_target),
                "tolerance": float(self.tolerance),
                "context": self.context,
                "details": self.details,
            }
        )

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return (
            f"{status}  {self.name}: measured {self.measured:.6g}, "
            f"target {self.bound_or_target:.6g}, tol {self.tolerance:.1e}"
        )


def certificates_to_json(reports: Sequence[CertificateReport]) -> str:
    return json.dumps([r.to_dict() for r in reports], sort_keys=True, indent=2)


class DegenerateWindow(ValueError):
    """The fit window is empty, outside the grid, or ``u`` is not positive there."""


# Sobolev constant --------------------------------------------------------


@dataclass(frozen=True)
class SobolevEstimate:
    """``S`` as the Rayleigh quotient of the instanton, plus the raw integrals."""

    N: int
    S: float
    dirichlet: float
    critical: float

    @property
    def s_power(self) -> float:
        return self.S ** (self.N / 2)

    @property
    def two_way_gap(self) -> float:
        """Relative gap between ``||U||^2`` and ``S^(N/2)``."""
        return abs(self.dirichlet - self.s_power) / self.dirichlet

    def __float__(self) -> float:
        return self.S


def rayleigh_quotient(u: RadialFunction) -> float:
    """``||u||^2 / |u|_{2*}^2``."""
    N = u.grid.dimension
    p = critical_exponent(N, 0.0)
    C = weighted_integral(u.grid, u, p, 0.0)
    if not C > 0:
        raise ValueError("u must be nonzero")
    return dirichlet_norm_sq(u.grid, u) / C ** (2.0 / p)


def best_sobolev_constant(N: int, grid: RadialGrid | None = None) -> SobolevEstimate:
    if int(N) != N or N < 3:
        raise ValueError(f"N must be an integer >= 3, got {N}")
    grid = grid or make_grid(N, 1e4, 2049)
    U = instanton(grid)
    D = dirichlet_norm_sq(grid, U)
    C = weighted_integral(grid, U, critical_exponent(N, 0.0), 0.0)
    return SobolevEstimate(N, D / C ** ((N - 2) / N), D, C)


def _sobolev_certificates(N: int, n_nodes: int = 2049, seed: int = 0) -> list[CertificateReport]:
    out = []
    t0 = time.perf_counter()
    g = make_grid(N, 1e4, n_nodes)
    est = best_sobolev_constant(N, g)
    elapsed = time.perf_counter() - t0
    out.append(
        CertificateReport(
            f"sobolev_two_ways_N{N}",
            est.two_way_gap <= 1e-6 and elapsed < 5.0,
            est.two_way_gap,
            0.0,
            1e-6,
            "||U||^2 against (D/|U|_{2*}^2)^(N/2)",
            {"S": est.S, "S_closed_form": sobolev_constant(N)},
        )
    )
    exact = abs(est.S / sobolev_constant(N) - 1.0)
    out.append(
        CertificateReport(
            f"sobolev_closed_form_N{N}", exact <= 1e-6, exact, 0.0, 1e-6,
            "computed S against N(N-2)/4 |S^N|^(2/N)",
        )
    )
    fine = best_sobolev_constant(N, make_grid(N, 1e4, 2 * n_nodes - 1))
    ref = abs(fine.S / est.S - 1.0)
    out.append(
        CertificateReport(
            f"sobolev_refinement_N{N}", ref <= 1e-6, ref, 0.0, 1e-6,
            "S on n and 2n-1 nodes",
        )
    )
    worst = 0.0
    for sigma in (0.5, 2.0):
        u = RadialFunction(g, instanton_values(g.nodes, N, sigma))
        worst = max(worst, abs(rayleigh_quotient(u) / est.S - 1.0))
    out.append(
        CertificateReport(
            f"sobolev_dilation_N{N}", worst <= 1e-6, worst, 0.0, 1e-6,
            "Rayleigh quotient of U_sigma, sigma in {0.5, 2}",
        )
    )
    rng = np.random.default_rng(seed)
    U = instanton(g)
    lowest = math.inf
    for _ in range(20):
        c = rng.normal(size=3)
        w = rng.uniform(0.3, 3.0)
        h = (c[0] + c[1] * g.nodes / w) * np.exp(-((g.nodes / w) ** 2)) + c[2] * instanton_values(
            g.nodes, N, w
        )
        delta = 0.05 * rng.uniform(0.2, 1.0)
        v = RadialFunction(g, U.values + delta * h / np.max(np.abs(h)) * U.values[0])
        lowest = min(lowest, rayleigh_quotient(v) - est.S)
    out.append(
        CertificateReport(
            f"sobolev_minimality_N{N}", lowest >= -1e-10 * est.S, lowest, 0.0, 1e-10 * est.S,
            "Rayleigh quotient of 20 random perturbations minus S (must be >= 0)",
        )
    )
    return out


# interpolation -----------------------------------------------------------


def interpolation_exponents(N: int, s1: float, s2: float) -> tuple[float, float]:
    """``(theta_min, sigma_max)`` for the weighted interpolation inequalities."""
    if not 0.0 <= s1 <= s2 <= 2.0:
        raise ValueError(f"need 0 <= s1 <= s2 <= 2, got s1={s1}, s2={s2}")
    if int(N) != N or N < 3:
        raise ValueError(f"N must be an integer >= 3, got {N}")
    if s1 == s2:
        return 0.0, 1.0
    theta = N * (s2 - s1) / (s2 * (N - s1))
    sigma = (N - s1) * (2.0 - s2) / ((N - s2) * (2.0 - s1))
    return theta, sigma


def _hs_norm(u: RadialFunction, s: float) -> float:
    p = critical_exponent(u.grid.dimension, s)
    return weighted_integral(u.grid, u, p, s) ** (1.0 / p)


def interpolation_ratio(u: RadialFunction, s1: float, s2: float, theta: float) -> float:
    """``|u|_{2*(s1),s1} / (||u||^theta |u|_{2*(s2),s2}^(1-theta))``."""
    lhs = _hs_norm(u, s1)
    rhs = _hs_norm(u, s2)
    norm = math.sqrt(dirichlet_norm_sq(u.grid, u))
    return lhs / (norm**theta * rhs ** (1.0 - theta))


def _bubble(q: float):
    def f(r, N, sigma):
        a = (N - 2) / 2.0
        x = np.asarray(r) / sigma
        return sigma ** (-a) * (1.0 + x**q) ** (-2.0 * a / q)

    return f


def _battery():
    return {
        "instanton": lambda r, N, sigma: instanton_values(r, N, sigma),
        "bubble_q3": _bubble(3.0),
        "bubble_q4": _bubble(4.0),
        "two_bubbles": lambda r, N, sigma: 0.7 * instanton_values(r, N, sigma)
        + 0.3 * instanton_values(r, N, 5.0 * sigma),
    }


def interpolation_spread(
    members: dict, grid: RadialGrid, s1: float, s2: float, theta: float, sigmas
) -> dict:
    """Per member: ratios at each dilation and their relative spread."""
    out = {}
    N = grid.dimension
    for name, f in members.items():
        ratios = []
        for sigma in sigmas:
            if isinstance(f, RadialFunction):
                u = f if sigma == 1 else dilate(f, sigma)
            else:
                u = RadialFunction(grid, f(grid.nodes, N, sigma))
            ratios.append(interpolation_ratio(u, s1, s2, theta))
        ratios = np.array(ratios)
        out[name] = {
            "ratios": ratios.tolist(),
            "spread": float((ratios.max() - ratios.min()) / np.mean(ratios)),
        }
    return out


def check_interpolation(
    u: RadialFunction | Callable | None,
    N: int,
    s1: float,
    s2: float,
    theta: float,
    sigmas: Sequence[float] = (0.1, 1.0, 10.0),
    grid: RadialGrid | None = None,
    tol: float = 1e-8,
) -> CertificateReport:
    """Ratio of the interpolation inequality over ``u`` and a fixed battery.

    ``u`` may be a profile (dilated by interpolation) or a callable
    ``f(r, N, sigma)`` giving the dilated profile in closed form.  Passes when
    the supremum is finite and every member's ratio is dilation-stable to
    ``tol``.  The supremum is a lower bound on the best constant.
    """
    theta_min, _ = interpolation_exponents(N, s1, s2)
    if theta < theta_min - 1e-14 or theta > 1.0:
        raise ValueError(f"theta must lie in [{theta_min:.6g}, 1], got {theta}")
    if grid is None:
        grid = u.grid if isinstance(u, RadialFunction) else make_grid(N, 1e4, 2049)
    members = _battery()
    if isinstance(u, RadialFunction):
        if not np.any(u.values):
            raise ValueError("u must be nonzero")
        members = {"input": u, **members}
    elif u is not None:
        members = {"input": u, **members}
    data = interpolation_spread(members, grid, s1, s2, theta, sigmas)
    sup = max(max(d["ratios"]) for d in data.values())
    spread = max(d["spread"] for d in data.values())
    return CertificateReport(
        f"interpolation_N{N}_s{s1:g}_{s2:g}",
        bool(math.isfinite(sup) and spread <= tol),
        spread,
        0.0,
        tol,
        f"theta={theta:.6g} (theta_min={theta_min:.6g}); battery sup {sup:.6g}",
        {"sup_ratio": sup, "members": data},
    )


# decay -------------------------------------------------------------------


def _window_fit(r, y, lo, hi):
    sel = (r >= lo) & (r <= hi)
    if np.count_nonzero(sel) < 3:
        raise DegenerateWindow(f"fewer than three nodes in window ({lo:g}, {hi:g})")
    if np.any(y[sel] <= 0):
        raise DegenerateWindow(f"profile is not positive on ({lo:g}, {hi:g})")
    return float(np.polyfit(np.log(r[sel]), np.log(y[sel]), 1)[0])


def _check_window(u: RadialFunction, window):
    lo, hi = window
    if lo < 10 or hi <= lo or hi > u.grid.r_max * (1 + 1e-12):
        raise DegenerateWindow(f"window ({lo:g}, {hi:g}) must satisfy 10 <= lo < hi <= r_max")


def decay_slope(u: RadialFunction, fit_window=(10.0, 100.0)) -> float:
    """Least-squares slope of ``log u`` against ``log r`` over ``fit_window``."""
    _check_window(u, fit_window)
    return _window_fit(u.grid.nodes, u.values, *fit_window)


def gradient_slope(u: RadialFunction, fit_window=(10.0, 100.0)) -> float:
    """Least-squares slope of ``log |u'|`` against ``log r``."""
    _check_window(u, fit_window)
    return _window_fit(u.grid.nodes, np.abs(u.derivative()), *fit_window)


def tail_slopes(u: RadialFunction, windows=((10.0, 100.0), (100.0, 1000.0))):
    """``(decay slope, worst gradient slope, two-window gap)`` or ``None`` for short grids."""
    if u.grid.r_max < windows[-1][1]:
        return None
    s = [decay_slope(u, w) for w in windows]
    gs = [gradient_slope(u, w) for w in windows]
    gap = max(max(s) - min(s), max(gs) - min(gs))
    return s[-1], max(gs), gap


def gradient_bound_check(
    u: RadialFunction, window=(10.0, 100.0), second_window=(100.0, 1000.0)
) -> CertificateReport:
    N = u.grid.dimension
    slope = gradient_slope(u, window)
    target = -(N - 1) + 0.1
    gap = 0.0
    if second_window is not None and u.grid.r_max >= second_window[1]:
        gap = abs(gradient_slope(u, second_window) - slope)
    return CertificateReport(
        "gradient_bound",
        bool(slope <= target and gap <= 0.05),
        slope,
        target,
        0.05,
        f"log|u'| slope on {window}; two-window gap {gap:.3g}",
        {"window_gap": gap},
    )


def decay_check(u: RadialFunction, windows=((10.0, 100.0), (100.0, 1000.0))) -> CertificateReport:
    N = u.grid.dimension
    s = [decay_slope(u, w) for w in windows]
    gap = max(s) - min(s)
    worst = max(abs(x + (N - 2)) for x in s)
    return CertificateReport(
        "decay_slope",
        bool(worst <= 0.05 and gap <= 0.05),
        s[0],
        -(N - 2.0),
        0.05,
        f"log u slope on {windows}; two-window gap {gap:.3g}",
        {"slopes": s, "window_gap": gap},
    )


# Kelvin ------------------------------------------------------------------


def _ball_integrals(u: RadialFunction, s: float) -> tuple[float, float]:
    g = u.grid
    p = critical_exponent(g.dimension, s)
    W = power_weights(g, p, s, 0.0)
    up = np.abs(u.values) ** p
    m = g.mid
    half = 0.5 * W[m] * up[m]
    inner = float(np.dot(W[:m], up[:m])) + half
    outer = float(np.dot(W[m + 1 :], up[m + 1 :])) + half
    return inner, outer


def kelvin_ball_identity(u: RadialFunction, s: float, tol: float = 1e-8) -> CertificateReport:
    """``int_{B_1} |u|^{2*(s)} / |x|^s`` against the same integral of ``kelvin(u)`` over ``B_1^c``."""
    if not 0.0 <= s <= 2.0:
        raise ValueError(f"s must lie in [0, 2], got {s}")
    v = kelvin_transform(u)
    lhs, _ = _ball_integrals(u, s)
    _, rhs = _ball_integrals(v, s)
    scale = max(abs(lhs), abs(rhs))
    rel = abs(lhs - rhs) / scale if scale > 0 else 0.0
    return CertificateReport(
        f"kelvin_ball_identity_s{s:g}", rel <= tol, rel, 0.0, tol,
        "inner integral of u against outer integral of its Kelvin image",
        {"inner_u": lhs, "outer_kelvin": rhs},
    )


def kelvin_suite(u: RadialFunction, s_values=(0.0, 0.5, 1.0, 1.5, 2.0)) -> list[CertificateReport]:
    g = u.grid
    v = kelvin_transform(u)
    back = kelvin_transform(v)
    scale = float(np.max(np.abs(u.values)))
    inv = float(np.max(np.abs(back.values - u.values))) / scale
    out = [
        CertificateReport(
            "kelvin_involution", inv <= 1e-13, inv, 0.0, 1e-13, "max |K(K(u)) - u| / max |u|"
        )
    ]
    du = dirichlet_norm_sq(g, u)
    iso = abs(dirichlet_norm_sq(g, v) - du) / du
    out.append(CertificateReport("kelvin_isometry", iso <= 1e-8, iso, 0.0, 1e-8, "Dirichlet integral"))
    out += [kelvin_ball_identity(u, s) for s in s_values]
    return out


# nonexistence ------------------------------------------------------------


def sphere_mean_weight(N: int, s: float, r):
    """Mean of ``|x_0 + r w|^(-s)`` over unit vectors ``w``, for ``|x_0| = 1`` and ``r < 1``."""
    r = np.asarray(r, dtype=float)
    if np.any(r >= 1.0):
        raise ValueError("sphere mean needs r < |x_0| = 1")
    return hyp2f1(s / 2.0, s / 2.0 - (N - 2) / 2.0, N / 2.0, r * r)


def _smoothstep(x):
    x = np.clip(x, 0.0, 1.0)
    return x**3 * (10.0 - 15.0 * x + 6.0 * x * x)


def _smoothstep_d(x):
    inside = (x > 0) & (x < 1)
    return np.where(inside, 30.0 * x * x * (1.0 - x) ** 2, 0.0)


def offcenter_integrals(N: int, spec: ProblemSpec, sigma: float, rho: float = 0.5, outer: float = 0.75):
    """``(D, [weighted B_i], C, mass fraction in B(x_0, sqrt(sigma)))`` for ``psi * U_sigma``.

    ``psi`` equals 1 on ``B(x_0, rho)`` and vanishes outside ``B(x_0, outer)``;
    ``x_0`` is a unit vector.  All integrals are radial about ``x_0``; the
    Hardy-Sobolev weights enter through their spherical means.
    """
    if not 0 < rho < outer < 1.0:
        raise ValueError("need 0 < rho < outer < |x_0| = 1")
    a = (N - 2) / 2.0
    c = (N * (N - 2.0)) ** (a / 2.0)
    omega = 2.0 * math.pi ** (N / 2.0) / float(gamma(N / 2.0))
    width = outer - rho

    def psi(r):
        return 1.0 - _smoothstep((r - rho) / width)

    def dpsi(r):
        return -_smoothstep_d((r - rho) / width) / width

    def U(r):
        x = r / sigma
        return sigma ** (-a) * c * (1.0 + x * x) ** (-a)

    def dU(r):
        x = r / sigma
        return -2.0 * a * sigma ** (-a - 1.0) * c * x * (1.0 + x * x) ** (-a - 1.0)

    def u(r):
        return psi(r) * U(r)

    def du(r):
        return dpsi(r) * U(r) + psi(r) * dU(r)

    cuts = sorted({0.0, *(x for x in (sigma, 10 * sigma, 100 * sigma, math.sqrt(sigma)) if x < rho), rho, outer})

    def quad(f, hi=outer):
        total = 0.0
        pts = [x for x in cuts if x < hi] + [hi]
        for lo_, hi_ in zip(pts[:-1], pts[1:]):
            val, _ = integrate.quad(f, lo_, hi_, epsabs=0.0, epsrel=1e-13, limit=400)
            total += val
        return omega * total

    p0 = critical_exponent(N, 0.0)
    D = quad(lambda r: du(r) ** 2 * r ** (N - 1))
    C = quad(lambda r: u(r) ** p0 * r ** (N - 1))
    B = []
    for s, _ in spec.terms:
        p = critical_exponent(N, s)
        B.append(quad(lambda r, p=p, s=s: u(r) ** p * sphere_mean_weight(N, s, r) * r ** (N - 1)))
    ball = min(math.sqrt(sigma), outer)
    mass = quad(lambda r: u(r) ** p0 * r ** (N - 1), ball) / C
    return D, B, C, mass


def _ray_max(spec: ProblemSpec, D, B, C):
    exps = spec.exponents
    b = [lam * x for lam, x in zip(spec.effective_lambdas, B)]
    p0 = spec.critical
    sc = nehari_scaling(D, [(bi, p - 2.0) for bi, p in zip(b, exps)], C, p0 - 2.0)
    t = sc.t_star
    return 0.5 * D * t * t - sum(bi * t**p / p for bi, p in zip(b, exps)) - C * t**p0 / p0


def nonexistence_diagnostic(
    spec: ProblemSpec,
    opts=None,
    sigmas: Sequence[float] = (1.0, 0.3, 0.1, 0.03, 0.01, 0.003, 0.001, 0.0003),
    rho: float = 0.5,
    outer: float = 0.75,
    radial_iters: int = 500,
) -> CertificateReport:
    """Levels of off-center concentrating test functions when every lambda is negative.

    (a) ``max_t Phi(t u_sigma)`` for ``u_sigma = psi(x - x_0) U_sigma(x - x_0)``
    must lie strictly above ``S^(N/2)/N``, decrease, and come within 2%;
    (b) the critical mass must concentrate in ``B(x_0, sqrt(sigma))``;
    (c) a capped radial Nehari descent is run from dilated instantons and
    must not produce a converged state at or below the off-center levels.
    """
    from .solver import SolveOptions, solve_ground_state

    if spec.k != 0 or spec.homotopy_lambda > 0:
        raise ValueError("nonexistence diagnostic needs every effective lambda <= 0")
    N = spec.dimension
    level = critical_level(N)
    levels, masses = [], []
    for sigma in sigmas:
        D, B, C, mass = offcenter_integrals(N, spec, sigma, rho, outer)
        levels.append(_ray_max(spec, D, B, C))
        masses.append(mass)
    levels = np.array(levels)
    excess = levels / level - 1.0
    above = bool(np.all(levels > level))
    decreasing = bool(np.all(np.diff(levels) < 0))
    close = bool(excess[-1] <= 0.02)
    concentrated = bool(masses[-1] >= 0.9)

    opts = opts or SolveOptions()
    opts = SolveOptions(**{**opts.to_dict(), "max_iters": min(opts.max_iters, radial_iters)})
    grid = opts.make_grid(N)
    radial = []
    for sigma in (1.0, 0.1):
        rep = solve_ground_state(
            spec, 0.0, RadialFunction(grid, instanton_values(grid.nodes, N, sigma)), opts,
            raise_on_failure=False,
        )
        radial.append(
            {
                "start_sigma": sigma,
                "converged": rep.converged,
                "c_level": rep.c_level,
                "iterations": rep.iterations,
                "concentration": rep.concentration.to_dict(),
            }
        )
    found = any(r["converged"] and r["c_level"] <= levels.min() * (1 + 1e-9) for r in radial)
    passed = above and decreasing and close and concentrated and not found
    return CertificateReport(
        "nonexistence_diagnostic",
        passed,
        float(excess.min()),
        0.0,
        0.02,
        "relative excess of off-center levels over S^(N/2)/N (must be > 0 and <= 0.02 at the "
        f"last dilation); |x_0| = 1, psi = 1 on B(x_0, {rho:g}), support B(x_0, {outer:g})",
        {
            "sigmas": list(sigmas),
            "levels": levels.tolist(),
            "relative_excess": excess.tolist(),
            "target_level": level,
            "mass_fraction_in_sqrt_sigma_ball": masses,
            "strictly_above": above,
            "decreasing": decreasing,
            "within_2_percent": close,
            "concentrated": concentrated,
            "radial_runs": radial,
            "interior_minimizer_found": found,
        },
    )


# energy monotonicity / Nehari roots ----------------------------------------


def c_eps_monotonicity(spec: ProblemSpec, eps_list: Sequence[float], opts=None) -> CertificateReport:
    """Ground-state levels must increase strictly with ``eps`` when every lambda is positive."""
    from .core import instanton as _inst
    from .solver import SolveOptions, solve_ground_state

    if spec.k != spec.n_terms:
        raise ValueError("c_eps monotonicity is asserted only when every lambda is positive")
    eps = [float(e) for e in eps_list]
    if len(set(eps)) != len(eps):
        raise ValueError(f"duplicated eps entries in {eps}")
    if any(b <= a for a, b in zip(eps, eps[1:])):
        raise ValueError(f"eps_list must be strictly increasing, got {eps}")
    for e in eps:
        if not 0.0 < e < spec.s_min:
            raise ValueError(f"eps must lie in (0, {spec.s_min}), got {e}")
    opts = opts or SolveOptions()
    grid = opts.make_grid(spec.dimension)
    levels, certified = [], []
    for e in eps:
        rep = solve_ground_state(spec, e, _inst(grid), opts)
        levels.append(rep.c_level)
        certified.append(rep.passed)
    gaps = np.diff(levels) if len(levels) > 1 else np.array([math.inf])
    margin = float(gaps.min())
    return CertificateReport(
        "c_eps_monotonicity",
        bool(margin > 1e-6 and all(certified)),
        margin,
        1e-6,
        1e-6,
        "smallest increase of c_eps between consecutive eps",
        {"eps": eps, "levels": levels, "certified": certified},
    )


def energy_bound_threshold(
    spec: ProblemSpec,
    eps: float = 0.0,
    opts=None,
    mu_grid: Sequence[float] = (0.01, 0.03, 0.1, 0.3, 1.0, 3.0, 10.0, 30.0, 100.0),
    bisections: int = 12,
) -> CertificateReport:
    """Smallest size ``mu`` of the negative block at which ``c < S^(N/2)/N`` is lost.

    The negative coefficients are scaled to ``-mu |lambda_i|`` and ground
    states are followed upward in ``mu`` from warm starts; the first failure
    (level at or above the threshold, or no converged state) is refined by
    bisection.  Passes when the problem's own block (``mu = |homotopy_lambda|``)
    lies below the measured threshold.
    """
    import warnings

    from .solver import SolveOptions, SolverError, solve_ground_state

    if spec.k >= spec.n_terms or spec.k == 0:
        raise ValueError("energy_bound_threshold needs both a positive and a negative block")
    opts = opts or SolveOptions()
    opts = SolveOptions(**{**opts.to_dict(), "small_lambda_bound": math.inf})
    level = critical_level(spec.dimension)
    mus = sorted(float(m) for m in mu_grid)
    if not mus or mus[0] <= 0:
        raise ValueError("mu_grid must hold positive values")

    def below(mu, init):
        try:
            with warnings.catch_warnings():
                warnings.simplefilter("ignore")
                rep = solve_ground_state(spec.with_homotopy(-mu), eps, init, opts)
        except SolverError:
            return False, init, math.nan
        return rep.c_level < level, rep.profile, rep.c_level

    u = instanton(opts.make_grid(spec.dimension))
    scanned = []
    good, bad, good_u = 0.0, math.inf, u
    for mu in mus:
        ok, prof, c = below(mu, good_u)
        scanned.append({"mu": mu, "c_level": c, "below": ok})
        if not ok:
            bad = mu
            break
        good, good_u = mu, prof
    if math.isfinite(bad):
        for _ in range(bisections):
            mid = 0.5 * (good + bad)
            ok, prof, c = below(mid, good_u)
            if ok:
                good, good_u = mid, prof
            else:
                bad = mid
    threshold = 0.5 * (good + bad) if math.isfinite(bad) else math.inf
    own = abs(spec.homotopy_lambda)
    return CertificateReport(
        "energy_bound_threshold",
        bool(own < threshold),
        threshold,
        own,
        0.0 if not math.isfinite(bad) else bad - good,
        f"negative block scaled by mu; bound c < S^(N/2)/N held up to mu = {good:.6g}",
        {"scan": scanned, "last_below": good, "first_above": bad, "target_level": level},
    )


def _random_instance(rng, mixed: bool):
    while True:
        N = int(rng.integers(3, 6))
        n = int(rng.integers(1, 4))
        s = np.sort(rng.uniform(0.05, 1.95, size=n))
        if np.any(np.diff(s) < 1e-3):
            continue
        k = int(rng.integers(0, n)) if mixed else n
        if mixed and k == n:
            k = n - 1
        exps = [critical_exponent(N, si) - 2.0 for si in s]
        mags = rng.uniform(0.05, 1.0, size=n)
        b = [m if i < k else -m for i, m in enumerate(mags)]
        D = float(rng.uniform(0.5, 2.0))
        C = float(rng.uniform(0.2, 1.0))
        root = nehari_scaling(D, list(zip(b, exps)), C, critical_exponent(N, 0.0) - 2.0)
        if root.t_star < 50.0:
            return D, list(zip(b, exps)), C, critical_exponent(N, 0.0) - 2.0, root


def nehari_root_oracle(
    seed: int = 0, per_pattern: int = 50, t_max: float = 100.0, step: float = 1e-5
) -> CertificateReport:
    """Bisection roots against a dense sign-change scan on random coefficient sets."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    single = True
    records = []
    for mixed in (False, True):
        for _ in range(per_pattern):
            D, bt, C, ce, root = _random_instance(rng, mixed)
            roots = dense_scan_roots(D, bt, C, ce, t_max=t_max, step=step)
            ok = len(roots) == 1 and root.uniqueness_certificate
            single &= ok
            err = abs(roots[0] - root.t_star) / root.t_star if roots else math.inf
            worst = max(worst, err)
            records.append({"mixed": mixed, "t_star": root.t_star, "n_roots": len(roots), "rel_err": err})
    return CertificateReport(
        "nehari_root_oracle",
        bool(single and worst <= 1e-8),
        worst,
        0.0,
        1e-8,
        f"{2 * per_pattern} random instances, dense scan step {step:g} on (0, {t_max:g}]",
        {"all_single_root": single, "instances": records},
    )


# suite -------------------------------------------------------------------


def verification_suite(N: int = 3, opts=None, seed: int = 0, fast: bool = False) -> list[CertificateReport]:
    """All desk-scale checks for dimension ``N``."""
    from .functionals import residual_norm
    from .solver import SolveOptions, solve_ground_state

    opts = opts or SolveOptions()
    grid = opts.make_grid(N)
    out: list[CertificateReport] = []
    out += _sobolev_certificates(N, opts.n_nodes, seed)

    U = instanton(grid)
    pure = ProblemSpec(N)
    rn = residual_norm(pure, 0.0, U)
    out.append(
        CertificateReport(
            "instanton_residual", rn <= 1e-6, rn, 0.0, 1e-6, "dual norm of the residual of U"
        )
    )
    rep = solve_ground_state(pure, 0.0, U * 1.1, opts)
    from .core import profiles_close

    err = profiles_close(rep.profile, U)
    lvl = abs(rep.c_level / critical_level(N) - 1.0)
    out.append(
        CertificateReport(
            "pure_critical_solve", err < 1e-3 and lvl <= 1e-4, lvl, 0.0, 1e-4,
            "level of the solve from 1.1 U against S^(N/2)/N", {"profile_error": err},
        )
    )

    out.append(nehari_root_oracle(seed, per_pattern=10 if fast else 50))

    theta, _ = interpolation_exponents(N, 1.0, 2.0)
    out.append(check_interpolation(None, N, 1.0, 2.0, theta, grid=grid))
    hs = check_interpolation(None, N, 1.0, 1.0, 1.0, grid=grid)
    out.append(
        CertificateReport(
            "hardy_sobolev_battery", hs.passed, hs.measured, 0.0, hs.tolerance,
            "theta = 1, s1 = s2 = 1: Hardy-Sobolev ratio over the battery",
            hs.details,
        )
    )

    out.append(decay_check(U))
    out.append(gradient_bound_check(U))
    rng = np.random.default_rng(seed)
    coeffs = rng.uniform(0.2, 1.0, size=3)
    rand = RadialFunction(
        grid,
        sum(c * instanton_values(grid.nodes, N, w) for c, w in zip(coeffs, rng.uniform(0.1, 10, 3))),
    )
    out += kelvin_suite(rand)

    spec = ProblemSpec(N, ((1.0, 1.0),), 1)
    eps_list = (0.1, 0.25, 0.4)
    mono = c_eps_monotonicity(spec, eps_list, opts)
    out.append(mono)
    levels = mono.details["levels"]
    margin = critical_level(N) - max(levels)
    out.append(
        CertificateReport(
            "energy_below_critical_level", margin > 0, margin, 0.0, 0.0,
            "S^(N/2)/N minus the largest regularized level",
        )
    )
    if N == 3 and not fast:
        out.append(nonexistence_diagnostic(ProblemSpec(3, ((1.0, -0.5),), 0), opts))
    return out
