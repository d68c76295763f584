"""Energy, Nehari and Pohozaev functionals of the regularized problem.

For ``eps > 0`` every Hardy-Sobolev weight ``|x|^-s_i`` is replaced by the
two-branch weight ``a_{i,eps}`` (``|x|^-(s_i - eps)`` inside the unit ball,
``|x|^-(s_i + eps)`` outside).  All quantities are assembled from one
discrete energy so that the Euler-Lagrange residual is its exact gradient.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import asdict, dataclass
from typing import Sequence

import numpy as np
from scipy.linalg import solveh_banded

from .core import (
    ProblemSpec,
    RadialFunction,
    RadialGrid,
    _dirichlet_energy,
    _dirichlet_parts,
    power_weights,
)

log = logging.getLogger(__name__)

__all__ = [
    "EnergyBreakdown",
    "weight_a",
    "energy",
    "el_residual",
    "energy_gradient",
    "sobolev_gradient",
    "apply_laplacian",
    "residual_norm",
    "ball_balance",
    "pohozaev_residual",
    "inner_tail_fraction",
]


def weight_a(s: float, eps: float, r: float) -> float:
    """Two-branch weight ``a_{s,eps}(r)``; continuous with value 1 at ``r = 1``."""
    if not 0.0 < s < 2.0:
        raise ValueError(f"s must lie in (0, 2), got {s}")
    if not 0.0 <= eps < s:
        raise ValueError(f"eps must lie in [0, s), got {eps}")
    if not r > 0:
        raise ValueError(f"r must be positive, got {r}")
    return r ** (-(s - eps)) if r < 1.0 else r ** (-(s + eps))


@dataclass(frozen=True)
class EnergyBreakdown:
    dirichlet: float
    b_terms: tuple[float, ...]
    critical: float
    phi: float
    nehari_residual: float
    pohozaev_residual: float
    ball_inner: float
    ball_outer: float

    def to_dict(self) -> dict:
        d = asdict(self)
        d["b_terms"] = list(self.b_terms)
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=False)

    @classmethod
    def from_json(cls, text: str) -> "EnergyBreakdown":
        d = json.loads(text)
        d["b_terms"] = tuple(d["b_terms"])
        return cls(**d)


class _Terms:
    """Per-grid cache of the power weights for one (spec, eps) pair."""

    def __init__(self, spec: ProblemSpec, eps: float, grid: RadialGrid):
        if spec.dimension != grid.dimension:
            raise ValueError(f"spec is for N={spec.dimension}, grid for N={grid.dimension}")
        spec.check_eps(eps)
        self.spec = spec
        self.eps = eps
        self.grid = grid
        self.exps = spec.exponents
        self.s = [s for s, _ in spec.terms]
        self.lams = spec.effective_lambdas
        self.W = [power_weights(grid, p, s, eps) for p, s in zip(self.exps, self.s)]
        self.p0 = spec.critical
        self.W0 = power_weights(grid, self.p0, 0.0, 0.0)
        self._ball = None

    def ball_weights(self):
        """Split of each term's weights into ``B_1`` and its complement (``r = 1`` shared)."""
        if self._ball is None:
            m = self.grid.mid
            out = []
            for W in self.W:
                win = np.zeros_like(W)
                wout = np.zeros_like(W)
                win[:m] = W[:m]
                wout[m + 1 :] = W[m + 1 :]
                win[m] = wout[m] = 0.5 * W[m]
                out.append((win, wout))
            self._ball = out
        return self._ball


_TERMS_CACHE: dict = {}


def _terms(spec: ProblemSpec, eps: float, grid: RadialGrid) -> _Terms:
    key = (spec, float(eps), id(grid))
    hit = _TERMS_CACHE.get(key)
    if hit is not None and hit.grid is grid:
        return hit
    if len(_TERMS_CACHE) > 64:
        _TERMS_CACHE.clear()
    t = _Terms(spec, eps, grid)
    _TERMS_CACHE[key] = t
    return t


def _dirichlet(grid: RadialGrid, values: np.ndarray) -> float:
    return _dirichlet_energy(grid, grid.emden_factor * values)


def _integrals(T: _Terms, values: np.ndarray):
    absu = np.abs(values)
    B = [float(np.dot(W, absu**p)) for W, p in zip(T.W, T.exps)]
    C = float(np.dot(T.W0, absu**T.p0))
    return B, C


def energy(spec: ProblemSpec, eps: float, u: RadialFunction) -> EnergyBreakdown:
    """Full breakdown of ``Phi_eps`` at ``u``."""
    T = _terms(spec, eps, u.grid)
    values = u.values
    if not np.any(values):
        return EnergyBreakdown(0.0, tuple(0.0 for _ in T.exps), 0.0, 0.0, 0.0, 0.0, 0.0, 0.0)
    D = _dirichlet(u.grid, values)
    B, C = _integrals(T, values)
    b = [lam * x for lam, x in zip(T.lams, B)]
    phi = 0.5 * D - sum(bi / p for bi, p in zip(b, T.exps)) - C / T.p0
    J = D - sum(b) - C
    inner, outer = _ball(T, values)
    N = spec.dimension
    poh = _pohozaev(N, T, b, C, D, inner, outer)
    return EnergyBreakdown(
        dirichlet=D,
        b_terms=tuple(b),
        critical=C,
        phi=phi,
        nehari_residual=J,
        pohozaev_residual=poh,
        ball_inner=inner,
        ball_outer=outer,
    )


def quick_energy(spec: ProblemSpec, eps: float, u: RadialFunction):
    """``(phi, D, b_terms, C)`` without the ball / Pohozaev bookkeeping."""
    T = _terms(spec, eps, u.grid)
    D = _dirichlet(u.grid, u.values)
    B, C = _integrals(T, u.values)
    b = [lam * x for lam, x in zip(T.lams, B)]
    phi = 0.5 * D - sum(bi / p for bi, p in zip(b, T.exps)) - C / T.p0
    return phi, D, b, C


def _ball(T: _Terms, values: np.ndarray) -> tuple[float, float]:
    absu = np.abs(values)
    inner = outer = 0.0
    for (win, wout), lam, p in zip(T.ball_weights(), T.lams, T.exps):
        up = absu**p
        inner += lam / p * float(np.dot(win, up))
        outer += lam / p * float(np.dot(wout, up))
    return inner, outer


def _pohozaev(N, T: _Terms, b, C, D, inner, outer) -> float:
    lhs = 2 * N * sum(bi / p for bi, p in zip(b, T.exps))
    lhs -= sum(2 * s * bi / p for bi, p, s in zip(b, T.exps, T.s))
    lhs += 2 * T.eps * (inner - outer)
    lhs += 2 * N * C / T.p0
    return lhs - (N - 2) * D


def energy_gradient(spec: ProblemSpec, eps: float, u: RadialFunction) -> np.ndarray:
    """Exact gradient of the discrete ``Phi_eps`` with respect to the nodal values."""
    T = _terms(spec, eps, u.grid)
    g = u.grid
    K, _ = _dirichlet_parts(g)
    R = g.emden_factor
    v = u.values
    grad = R * (K @ (R * v))
    absu = np.abs(v)
    for W, lam, p in zip(T.W, T.lams, T.exps):
        grad -= lam * W * absu ** (p - 2) * v
    grad -= T.W0 * absu ** (T.p0 - 2) * v
    return grad


def el_residual(spec: ProblemSpec, eps: float, u: RadialFunction) -> RadialFunction:
    """Nodal ``-Delta u - sum lambda_i a_{i,eps} u^(2*(s_i)-1) - u^(2*-1)``.

    Defined as the energy gradient divided by the L^2 nodal masses, so that
    ``sum(mass * residual * h)`` is the directional derivative of ``phi``.
    """
    return RadialFunction(u.grid, energy_gradient(spec, eps, u) / u.grid.mass)


def _solve_dirichlet(grid: RadialGrid, rhs_u: np.ndarray) -> np.ndarray:
    """Solve ``K_u x = rhs_u`` where ``K_u = R K R``."""
    _, banded = _dirichlet_parts(grid)
    R = grid.emden_factor
    y = solveh_banded(banded, rhs_u / R, lower=True, check_finite=False)
    return y / R


def sobolev_gradient(spec: ProblemSpec, eps: float, u: RadialFunction) -> RadialFunction:
    """``g`` with ``-Delta g = el_residual(u)`` and the decay / regularity end conditions.

    The discrete ``-Delta`` is the operator whose quadratic form is the
    discrete Dirichlet integral (banded, bandwidth 3, solved by Cholesky).
    """
    grad = energy_gradient(spec, eps, u)
    if not np.any(grad):
        return RadialFunction(u.grid, np.zeros_like(grad))
    try:
        x = _solve_dirichlet(u.grid, grad)
    except np.linalg.LinAlgError as exc:
        raise np.linalg.LinAlgError(f"discrete Laplacian is singular: {exc}") from exc
    return RadialFunction(u.grid, x)


def apply_laplacian(g: RadialFunction) -> RadialFunction:
    """Discrete ``-Delta g`` (nodal, in the same convention as :func:`el_residual`)."""
    grid = g.grid
    K, _ = _dirichlet_parts(grid)
    R = grid.emden_factor
    return RadialFunction(grid, R * (K @ (R * g.values)) / grid.mass)


def residual_norm(spec: ProblemSpec, eps: float, u: RadialFunction) -> float:
    """Dual D^{1,2} norm of ``Phi'_eps(u)``, i.e. ``||sobolev_gradient(u)||``."""
    grad = energy_gradient(spec, eps, u)
    if not np.any(grad):
        return 0.0
    x = _solve_dirichlet(u.grid, grad)
    return math.sqrt(max(float(np.dot(grad, x)), 0.0))


def ball_balance(spec: ProblemSpec, eps: float, u: RadialFunction) -> tuple[float, float]:
    """``(int_{B_1}, int_{B_1^c})`` of ``sum lambda_i a_{i,eps} |u|^(2*(s_i)) / 2*(s_i)``."""
    if eps <= 0:
        raise ValueError("ball balance is an identity of the eps > 0 problem; eps must be positive")
    T = _terms(spec, eps, u.grid)
    return _ball(T, u.values)


def kelvin_ball_terms(spec: ProblemSpec, eps: float, u: RadialFunction) -> list[tuple[float, float]]:
    """Per-term ``(inner, outer)`` ball integrals (used for Kelvin pairing checks)."""
    T = _terms(spec, eps, u.grid)
    absu = np.abs(u.values)
    out = []
    for (win, wout), lam, p in zip(T.ball_weights(), T.lams, T.exps):
        up = absu**p
        out.append((lam / p * float(np.dot(win, up)), lam / p * float(np.dot(wout, up))))
    return out


def pohozaev_residual(spec: ProblemSpec, eps: float, u: RadialFunction) -> float:
    """Whole-space Pohozaev defect, assembled with the two-branch weight corrections."""
    return energy(spec, eps, u).pohozaev_residual


def inner_tail_fraction(spec: ProblemSpec, eps: float, u: RadialFunction) -> float:
    """Largest share of any weighted integral carried by ``r <= r_min`` plus the first node.

    A share above 1% means the origin is under-resolved for that term.
    """
    T = _terms(spec, eps, u.grid)
    absu = np.abs(u.values)
    worst = 0.0
    for W, p in zip(T.W, T.exps):
        contrib = W * absu**p
        total = float(np.sum(contrib))
        if total > 0:
            worst = max(worst, float(contrib[0]) / total)
    if worst > 0.01:
        log.warning("inner quadrature carries %.2f%% of a weighted integral", 100 * worst)
    return worst


def breakdown_fields() -> Sequence[str]:
    return (
        "dirichlet",
        "b_terms",
        "critical",
        "phi",
        "nehari_residual",
        "pohozaev_residual",
        "ball_inner",
        "ball_outer",
    )
