"""Nehari scaling: the unique ``t > 0`` with ``t u`` on the Nehari manifold.

Along the ray ``t -> t u`` the Nehari functional divided by ``t^2`` is

    f(t) = ||u||^2 - sum_i b_i t^(2*(s_i) - 2) - |u|_{2*}^{2*} t^(2* - 2),

with ``f(0+) = ||u||^2 > 0`` and ``f -> -inf``.  The first sign change is
the only one, also when some ``b_i`` are negative; we still certify it.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .core import ProblemSpec, RadialFunction
from .functionals import quick_energy

__all__ = [
    "NehariScaling",
    "NoRoot",
    "BracketFailure",
    "UniquenessFailure",
    "nehari_scaling",
    "project_nehari",
    "scaling_for",
]


class NoRoot(ValueError):
    """``f`` stays positive over the whole scan."""


class BracketFailure(ValueError):
    """``f(0+) <= 0``: no positive bracket start."""


class UniquenessFailure(RuntimeError):
    """A second sign change of ``f`` was seen beyond the first root."""


@dataclass(frozen=True)
class NehariScaling:
    t_star: float
    f_value_at_t: float
    bracket: tuple[float, float]
    uniqueness_certificate: bool


def _f(t, dirichlet, coeffs, exps):
    t = np.asarray(t, dtype=float)
    out = dirichlet - sum(c * t**e for c, e in zip(coeffs, exps))
    return out


def _fprime(t, coeffs, exps):
    t = np.asarray(t, dtype=float)
    return -sum(c * e * t ** (e - 1.0) for c, e in zip(coeffs, exps))


def nehari_scaling(
    dirichlet: float,
    b_terms: Sequence[tuple[float, float]],
    critical: float,
    critical_exp: float,
    rtol: float = 1e-12,
) -> NehariScaling:
    """Minimal positive root of ``f``.

    ``b_terms`` holds ``(b_i, 2*(s_i) - 2)`` pairs with signed ``b_i``;
    ``critical_exp`` is ``2* - 2``.  Geometric bracketing from ``t = 0+``,
    then bisection to relative width ``rtol``.
    """
    if not dirichlet > 0:
        raise BracketFailure(f"f(0+) = ||u||^2 = {dirichlet} is not positive")
    if not critical > 0:
        raise NoRoot(f"critical integral {critical} must be positive")
    coeffs = [float(b) for b, _ in b_terms] + [float(critical)]
    exps = [float(e) for _, e in b_terms] + [float(critical_exp)]
    if any(not 0.0 < e <= critical_exp for e in exps):
        raise ValueError(f"exponents must lie in (0, {critical_exp}], got {exps}")

    # start where every term is below D / (2 * n_terms): there f > 0
    n = len(coeffs)
    t_lo = 1.0
    for c, e in zip(coeffs, exps):
        if c != 0.0:
            t_lo = min(t_lo, (dirichlet / (2.0 * n * abs(c))) ** (1.0 / e))
    if _f(t_lo, dirichlet, coeffs, exps) <= 0:
        raise BracketFailure("could not find t > 0 with f(t) > 0")
    t_hi = t_lo
    for _ in range(400):
        t_hi = 2.0 * t_lo
        if _f(t_hi, dirichlet, coeffs, exps) <= 0:
            break
        t_lo = t_hi
    else:
        raise NoRoot("f stayed positive over the whole geometric scan")
    bracket = (t_lo, t_hi)

    lo, hi = t_lo, t_hi
    while hi - lo > rtol * hi:
        mid = 0.5 * (lo + hi)
        if _f(mid, dirichlet, coeffs, exps) > 0:
            lo = mid
        else:
            hi = mid
    t_star = 0.5 * (lo + hi)
    fval = float(_f(t_star, dirichlet, coeffs, exps))

    # certificate: f < 0 and f' < 0 on a geometric sample in (t*, 1e3 t*]
    sample = t_star * np.geomspace(1.0 + 1e-6, 1e3, 400)
    fs = _f(sample, dirichlet, coeffs, exps)
    fp = _fprime(sample, coeffs, exps)
    cert = bool(np.all(fs < 0) and np.all(fp < 0))
    return NehariScaling(t_star, fval, bracket, cert)


def scaling_for(spec: ProblemSpec, eps: float, u: RadialFunction) -> NehariScaling:
    if not np.any(u.values):
        raise BracketFailure("u = 0 has no Nehari scaling")
    _, D, b, C = quick_energy(spec, eps, u)
    exps = [p - 2.0 for p in spec.exponents]
    return nehari_scaling(D, list(zip(b, exps)), C, spec.critical - 2.0)


def project_nehari(
    spec: ProblemSpec, eps: float, u: RadialFunction, require_certificate: bool = True
) -> RadialFunction:
    """``t* u`` with ``t*`` from :func:`nehari_scaling`."""
    sc = scaling_for(spec, eps, u)
    if require_certificate and not sc.uniqueness_certificate:
        raise UniquenessFailure(
            f"Nehari scaling t* = {sc.t_star:.6g} is not certified unique"
        )
    return u * sc.t_star


def dense_scan_roots(
    dirichlet: float,
    b_terms: Sequence[tuple[float, float]],
    critical: float,
    critical_exp: float,
    t_max: float = 100.0,
    step: float = 1e-5,
) -> list[float]:
    """Brute-force sign changes of ``f`` on ``(0, t_max]``, refined by linear interpolation."""
    coeffs = [b for b, _ in b_terms] + [critical]
    exps = [e for _, e in b_terms] + [critical_exp]
    roots = []
    chunk = 1_000_000
    n = int(round(t_max / step))
    prev_t = None
    prev_f = None
    for start in range(1, n + 1, chunk):
        idx = np.arange(start, min(start + chunk, n + 1), dtype=float)
        t = idx * step
        f = _f(t, dirichlet, coeffs, exps)
        if prev_f is not None:
            t = np.concatenate(([prev_t], t))
            f = np.concatenate(([prev_f], f))
        sign = np.signbit(f)
        flips = np.nonzero(sign[1:] != sign[:-1])[0]
        for i in flips:
            f0, f1 = f[i], f[i + 1]
            roots.append(float(t[i] - f0 * (t[i + 1] - t[i]) / (f1 - f0)))
        prev_t, prev_f = t[-1], f[-1]
    return roots
