"""Problem description, radial discretization and the elementary transforms.

Radial profiles live on a log-uniform grid ``t_j = log r_j`` that is
symmetric about ``t = 0``.  Internally most operators work with the
Emden-Fowler variable ``phi(t) = r^a u(r)``, ``a = (N-2)/2``, in which the
Kelvin transform is a reflection ``t -> -t`` and dilations are translations.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
import yaml
from scipy.special import gamma

__all__ = [
    "ProblemSpec",
    "RadialGrid",
    "RadialFunction",
    "critical_exponent",
    "make_grid",
    "weighted_integral",
    "power_weights",
    "dirichlet_norm_sq",
    "dirichlet_matrix",
    "instanton",
    "kelvin_transform",
    "dilate",
    "read_profile_csv",
    "sobolev_constant",
    "critical_level",
    "profiles_close",
    "instanton_values",
]


def critical_exponent(N: int, s: float) -> float:
    """Hardy-Sobolev critical exponent ``2*(s) = 2(N - s)/(N - 2)``."""
    if int(N) != N or N < 3:
        raise ValueError(f"dimension must be an integer >= 3, got {N}")
    if not 0.0 <= s <= 2.0:
        raise ValueError(f"s must lie in [0, 2], got {s}")
    return 2.0 * (N - s) / (N - 2)


@dataclass(frozen=True)
class ProblemSpec:
    """Dimension and the list of Hardy-Sobolev terms ``(s_i, lambda_i)``.

    The first ``k`` coefficients are positive and the remaining ones
    negative.  ``homotopy_lambda`` multiplies ``|lambda_i|`` for ``i > k``;
    the default ``-1`` reproduces the original coefficients.  ``k = 0`` with
    all coefficients negative describes the nonexistence regime, and an
    empty term list the pure critical problem.
    """

    dimension: int
    terms: tuple[tuple[float, float], ...] = ()
    k: int = 0
    homotopy_lambda: float = -1.0

    def __post_init__(self):
        terms = tuple((float(s), float(lam)) for s, lam in self.terms)
        object.__setattr__(self, "terms", terms)
        N = self.dimension
        if int(N) != N or N < 3:
            raise ValueError(f"N: dimension must be an integer >= 3, got {N}")
        svals = [s for s, _ in terms]
        if any(not 0.0 < s < 2.0 for s in svals):
            raise ValueError(f"terms: every s must lie in (0, 2), got {svals}")
        if any(b <= a for a, b in zip(svals, svals[1:])):
            raise ValueError(f"terms: s values must be strictly increasing, got {svals}")
        if not 0 <= self.k <= len(terms):
            raise ValueError(f"k: split index must lie in [0, {len(terms)}], got {self.k}")
        for i, (s, lam) in enumerate(terms):
            if i < self.k and not lam > 0:
                raise ValueError(
                    f"terms: lambda_{i + 1} = {lam} must be positive (i <= k = {self.k})"
                )
            if i >= self.k and not lam < 0:
                raise ValueError(
                    f"terms: lambda_{i + 1} = {lam} must be negative (i > k = {self.k})"
                )
        if not math.isfinite(self.homotopy_lambda):
            raise ValueError("homotopy_lambda: must be finite")

    @classmethod
    def pure_critical(cls, N: int) -> "ProblemSpec":
        return cls(dimension=N)

    @property
    def n_terms(self) -> int:
        return len(self.terms)

    @property
    def exponents(self) -> list[float]:
        return [critical_exponent(self.dimension, s) for s, _ in self.terms]

    @property
    def critical(self) -> float:
        return critical_exponent(self.dimension, 0.0)

    @property
    def effective_lambdas(self) -> list[float]:
        """Coefficients actually multiplying each term (homotopy folded in)."""
        out = []
        for i, (_, lam) in enumerate(self.terms):
            out.append(lam if i < self.k else self.homotopy_lambda * abs(lam))
        return out

    @property
    def s_min(self) -> float:
        return self.terms[0][0] if self.terms else 2.0

    def with_homotopy(self, value: float) -> "ProblemSpec":
        return ProblemSpec(self.dimension, self.terms, self.k, float(value))

    def check_eps(self, eps: float) -> None:
        if eps < 0 or (self.terms and eps >= self.s_min):
            raise ValueError(f"eps must lie in [0, s_1) = [0, {self.s_min}), got {eps}")

    def to_dict(self) -> dict:
        return {
            "N": self.dimension,
            "terms": [[s, lam] for s, lam in self.terms],
            "k": self.k,
            "homotopy_lambda": self.homotopy_lambda,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "ProblemSpec":
        unknown = set(data) - {"N", "terms", "k", "homotopy_lambda"}
        if unknown:
            raise ValueError(f"unknown problem keys: {sorted(unknown)}")
        if "N" not in data:
            raise ValueError("N: missing")
        terms = data.get("terms") or []
        for pair in terms:
            if len(pair) != 2:
                raise ValueError(f"terms: expected [s, lambda] pairs, got {pair}")
        k = data.get("k")
        if k is None:
            k = sum(1 for _, lam in terms if lam > 0)
        return cls(
            dimension=int(data["N"]),
            terms=tuple((s, lam) for s, lam in terms),
            k=int(k),
            homotopy_lambda=float(data.get("homotopy_lambda", -1.0)),
        )

    def dumps(self) -> str:
        return yaml.safe_dump(self.to_dict(), sort_keys=False)

    @classmethod
    def loads(cls, text: str) -> "ProblemSpec":
        data = yaml.safe_load(text)
        if not isinstance(data, dict):
            raise ValueError("problem document must be a mapping")
        return cls.from_dict(data)


def _gregory_weights(m: int) -> np.ndarray:
    """Unit-spacing weights for ``m`` intervals, fourth order when ``m >= 6``."""
    w = np.ones(m + 1)
    if m >= 6:
        w[[0, -1]] = 3.0 / 8.0
        w[[1, -2]] = 7.0 / 6.0
        w[[2, -3]] = 23.0 / 24.0
    else:
        w[[0, -1]] = 0.5
    return w


@dataclass(frozen=True, eq=False)
class RadialGrid:
    """Log-uniform radial nodes on ``[1/r_max, r_max]``.

    ``quad_weights`` integrate in ``r`` (``sum(w * f) ~ int f dr``); the
    ``log_weights`` are the same rule expressed in ``t = log r``.  The rule is
    a composite one over ``[r_min, 1]`` and ``[1, r_max]`` so integrands with
    a kink at ``r = 1`` keep their order.
    """

    dimension: int
    nodes: np.ndarray
    log_nodes: np.ndarray
    step: float
    log_weights: np.ndarray
    inner_log_weights: np.ndarray
    outer_log_weights: np.ndarray
    quad_weights: np.ndarray
    surface_factor: float
    r_min: float
    r_max: float

    @property
    def n_nodes(self) -> int:
        return self.nodes.size

    @property
    def mid(self) -> int:
        return (self.nodes.size - 1) // 2

    @property
    def a(self) -> float:
        return 0.5 * (self.dimension - 2)

    @cached_property
    def mass(self) -> np.ndarray:
        """L^2(R^N) nodal masses ``omega * h * r_j^N`` of the uniform energy rule."""
        return self.surface_factor * self.step * self.nodes**self.dimension

    @cached_property
    def emden_factor(self) -> np.ndarray:
        """``r^a`` so that ``phi = emden_factor * u``."""
        return self.nodes**self.a

    def is_inversion_symmetric(self, rtol: float = 1e-13) -> bool:
        prod = self.nodes * self.nodes[::-1]
        return bool(np.allclose(prod, 1.0, rtol=rtol, atol=0.0))

    def compatible(self, other: "RadialGrid") -> bool:
        return self is other or (
            self.dimension == other.dimension
            and self.nodes.size == other.nodes.size
            and np.array_equal(self.nodes, other.nodes)
        )

    def integrate(self, f: np.ndarray, a: float | None = None, b: float | None = None) -> float:
        """``int_a^b f(r) dr`` using the nodes inside ``[a, b]``.

        Endpoints other than the grid ends and ``r = 1`` are rounded to the
        nearest node; the rule is re-built for the selected sub-range.
        """
        t = self.log_nodes
        i0 = 0 if a is None else int(np.argmin(np.abs(t - math.log(a))))
        i1 = self.nodes.size - 1 if b is None else int(np.argmin(np.abs(t - math.log(b))))
        if i1 <= i0:
            return 0.0
        mid = self.mid
        pieces = []
        if i0 < mid < i1:
            pieces = [(i0, mid), (mid, i1)]
        else:
            pieces = [(i0, i1)]
        total = 0.0
        for lo, hi in pieces:
            w = _gregory_weights(hi - lo) * self.step
            seg = slice(lo, hi + 1)
            total += float(np.sum(w * f[seg] * self.nodes[seg]))
        return total


def make_grid(N: int, r_max: float, n_nodes: int) -> RadialGrid:
    """Inversion-symmetric log grid with ``n_nodes`` nodes (odd, so ``r = 1`` is one)."""
    if int(N) != N or N < 3:
        raise ValueError(f"dimension must be an integer >= 3, got {N}")
    if not r_max > 1.0:
        raise ValueError(f"r_max must exceed 1, got {r_max}")
    if n_nodes < 3 or n_nodes % 2 == 0:
        raise ValueError(f"n_nodes must be odd and >= 3 so that r = 1 is a node, got {n_nodes}")
    m = (n_nodes - 1) // 2
    L = math.log(r_max)
    h = L / m
    t = (np.arange(n_nodes) - m) * h
    t[m] = 0.0
    r = np.empty(n_nodes)
    r[m:] = np.exp(t[m:])
    r[m] = 1.0
    r[:m] = 1.0 / r[m + 1 :][::-1]
    t[:m] = -t[m + 1 :][::-1]
    half = _gregory_weights(m)
    inner = np.zeros(n_nodes)
    outer = np.zeros(n_nodes)
    inner[: m + 1] = half * h
    outer[m:] = half * h
    logw = inner + outer
    for arr in (r, t, logw, inner, outer):
        arr.setflags(write=False)
    qw = logw * r
    qw.setflags(write=False)
    omega = 2.0 * math.pi ** (N / 2) / float(gamma(N / 2))
    return RadialGrid(
        dimension=int(N),
        nodes=r,
        log_nodes=t,
        step=h,
        log_weights=logw,
        inner_log_weights=inner,
        outer_log_weights=outer,
        quad_weights=qw,
        surface_factor=omega,
        r_min=float(r[0]),
        r_max=float(r[-1]),
    )


@dataclass(frozen=True, eq=False)
class RadialFunction:
    """Nodal values of a radial profile on a :class:`RadialGrid`."""

    grid: RadialGrid
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        if v.shape != self.grid.nodes.shape:
            raise ValueError(
                f"values have shape {v.shape}, grid has {self.grid.nodes.shape}"
            )
        if not np.all(np.isfinite(v)):
            raise ValueError("profile values must be finite")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    def __mul__(self, c: float) -> "RadialFunction":
        return RadialFunction(self.grid, self.values * float(c))

    __rmul__ = __mul__

    def __add__(self, other: "RadialFunction") -> "RadialFunction":
        _check_same_grid(self, other)
        return RadialFunction(self.grid, self.values + other.values)

    def __sub__(self, other: "RadialFunction") -> "RadialFunction":
        _check_same_grid(self, other)
        return RadialFunction(self.grid, self.values - other.values)

    def with_values(self, values: np.ndarray) -> "RadialFunction":
        return RadialFunction(self.grid, values)

    @property
    def phi(self) -> np.ndarray:
        return self.grid.emden_factor * self.values

    def derivative(self) -> np.ndarray:
        """``du/dr`` from centered differences in ``log r``."""
        return np.gradient(self.values, self.grid.log_nodes) / self.grid.nodes

    def is_nonincreasing(self, slack: float = 1e-10) -> bool:
        scale = max(float(np.max(np.abs(self.values))), 1.0)
        return bool(np.all(np.diff(self.values) <= slack * scale))

    def to_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["r", "u"])
            for r, u in zip(self.grid.nodes, self.values):
                w.writerow([repr(float(r)), repr(float(u))])


def read_profile_csv(path: str | Path, N: int) -> RadialFunction:
    """Read an ``(r, u)`` CSV written by :meth:`RadialFunction.to_csv`."""
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    r = np.array([float(row["r"]) for row in rows])
    u = np.array([float(row["u"]) for row in rows])
    grid = make_grid(N, r[-1], r.size)
    if not np.allclose(grid.nodes, r, rtol=1e-12, atol=0.0):
        raise ValueError(f"{path}: nodes are not a symmetric log grid")
    return RadialFunction(grid, u)


def _check_same_grid(u: RadialFunction, v: RadialFunction):
    if not u.grid.compatible(v.grid):
        raise ValueError("profiles live on different grids")


def _branch_weight(grid: RadialGrid, s: float, eps: float) -> np.ndarray:
    # a_{s,eps}(r) * r^s, i.e. exp(-eps |t|)
    return np.exp(-eps * np.abs(grid.log_nodes))


def _check_weight_args(s: float, eps: float):
    if not 0.0 <= s <= 2.0:
        raise ValueError(f"s must lie in [0, 2], got {s}")
    if s == 0.0 and eps != 0.0:
        raise ValueError("the pure critical term (s = 0) is never regularized; eps must be 0")
    if s > 0.0 and not 0.0 <= eps < s:
        raise ValueError(f"eps must lie in [0, s) = [0, {s}), got {eps}")


def power_weights(grid: RadialGrid, p: float, s: float, eps: float) -> np.ndarray:
    """Vector ``W`` with ``int a_{s,eps} |u|^p dx ~ sum(W * |u|^p)``.

    Uniform weights in ``log r`` on the bi-infinite grid; the nodes beyond
    the ends carry the tails ``u = u(r_min)`` below ``r_min`` and
    ``u ~ r^(2-N)`` above ``r_max``, summed in closed form into the end
    weights.
    """
    _check_weight_args(s, eps)
    N = grid.dimension
    h = grid.step
    r = grid.nodes
    omega = grid.surface_factor
    W = omega * h * r ** (N - s) * _branch_weight(grid, s, eps)
    inner_rate = (N - s + eps) * h
    outer_rate = ((N - 2) * p - (N - s - eps)) * h
    if outer_rate <= 0:
        raise ValueError(f"|u|^{p} |x|^-{s} is not integrable against the r^(2-N) tail")
    W[0] *= 1.0 + 1.0 / math.expm1(inner_rate)
    W[-1] *= 1.0 + 1.0 / math.expm1(outer_rate)
    # Euler-Maclaurin correction for the kink of exp(-eps |t|) at the middle node
    W[grid.mid] *= 1.0 - eps * h / 6.0
    W.setflags(write=False)
    return W


def weighted_integral(
    grid: RadialGrid, u: RadialFunction, p: float, s: float, eps: float = 0.0
) -> float:
    """``omega_{N-1} int a_{s,eps}(r) |u|^p r^(N-1) dr`` (pure ``|x|^-s`` when eps = 0)."""
    if not p > 0:
        raise ValueError(f"p must be positive, got {p}")
    if not grid.compatible(u.grid):
        raise ValueError("profile is not defined on this grid")
    W = power_weights(grid, p, s, eps)
    return float(np.dot(W, np.abs(u.values) ** p))


_STENCIL = np.array([1.0, -27.0, 27.0, -1.0]) / 24.0


def _derivative_operator(grid: RadialGrid):
    """Staggered fourth-order ``d/dt`` on the intervals touching real nodes.

    Rows cover the intervals ``(j, j+1)`` for ``j = -1 .. n-1``; stencil
    entries falling on ghost nodes are folded onto the end nodes with the
    tail ratio ``g = exp(-a h)``.
    """
    from scipy import sparse

    n = grid.n_nodes
    h = grid.step
    g = math.exp(-grid.a * h)
    rows, cols, vals = [], [], []
    for row, i in enumerate(range(-1, n)):
        for c, j in zip(_STENCIL, range(i - 1, i + 3)):
            if j < 0:
                col, c = 0, c * g ** (-j)
            elif j > n - 1:
                col, c = n - 1, c * g ** (j - n + 1)
            else:
                col = j
            rows.append(row)
            cols.append(col)
            vals.append(c / h)
    return sparse.csr_matrix((vals, (rows, cols)), shape=(n + 1, n))


def _ghost_tail(grid: RadialGrid) -> float:
    """Energy of one exponential tail beyond the intervals in the operator, per ``phi_end^2``."""
    h = grid.step
    a = grid.a
    g = math.exp(-a * h)
    # interval -2 is entirely ghosts: delta = phi_0 kappa, then ratio g per interval
    kappa = float(np.dot(_STENCIL, [g**3, g**2, g, 1.0])) / h
    g2 = g * g
    return h * kappa**2 / (1.0 - g2) + a * a * h * g2 / (1.0 - g2)


def dirichlet_matrix(grid: RadialGrid):
    """Symmetric matrix ``K`` with ``int |grad u|^2 dx ~ phi^T K phi``; returned sparse.

    ``phi = r^a u`` and ``int |grad u|^2 dx = omega int (phi'^2 + a^2 phi^2) dt``
    over the whole line, discretized on a uniform grid extended by the
    exponential tails.
    """
    return _dirichlet_parts(grid)[0]


def _dirichlet_parts(grid: RadialGrid):
    cache = grid.__dict__.setdefault("_cache", {})
    if "dirichlet" not in cache:
        from scipy import sparse

        a = grid.a
        h = grid.step
        n = grid.n_nodes
        D = _derivative_operator(grid)
        diag = np.full(n, a * a * h)
        tail = _ghost_tail(grid)
        diag[0] += tail
        diag[-1] += tail
        K = grid.surface_factor * (h * (D.T @ D) + sparse.diags(diag))
        K = sparse.csr_matrix(K)
        bw = 3
        banded = np.zeros((bw + 1, n))
        Kd = K.todia()
        for off, data in zip(Kd.offsets, Kd.data):
            if -bw <= off <= 0:
                # dia data is aligned with columns
                banded[-off, : n + off] = data[: n + off]
        cache["dirichlet"] = (K, banded)
        cache["derivative"] = (D, diag)
    return cache["dirichlet"]


def _dirichlet_energy(grid: RadialGrid, phi: np.ndarray) -> float:
    """``phi^T K phi`` summed as squares; the matrix form loses ~1e-12 to cancellation."""
    _dirichlet_parts(grid)
    D, diag = grid.__dict__["_cache"]["derivative"]
    d = D @ phi
    return grid.surface_factor * float(grid.step * np.dot(d, d) + np.dot(diag, phi * phi))


def dirichlet_norm_sq(grid: RadialGrid, u: RadialFunction) -> float:
    """Discrete ``omega_{N-1} int u'(r)^2 r^(N-1) dr`` over all of ``(0, inf)``."""
    if not grid.compatible(u.grid):
        raise ValueError("profile is not defined on this grid")
    return _dirichlet_energy(grid, u.phi)


def instanton_values(r: np.ndarray | float, N: int, scale: float = 1.0):
    """Closed-form ``U_sigma(r) = sigma^(-(N-2)/2) U(r/sigma)``."""
    c = (N * (N - 2.0)) ** ((N - 2.0) / 4.0)
    x = np.asarray(r, dtype=float) / scale
    return scale ** (-(N - 2.0) / 2.0) * c / (1.0 + x * x) ** ((N - 2.0) / 2.0)


def instanton(grid: RadialGrid, N: int | None = None, scale: float = 1.0) -> RadialFunction:
    """Aubin-Talenti bubble ``[N(N-2)]^((N-2)/4) (1 + r^2)^(-(N-2)/2)`` on ``grid``."""
    N = grid.dimension if N is None else N
    if N != grid.dimension:
        raise ValueError(f"grid is for N={grid.dimension}, asked for N={N}")
    if N < 3:
        raise ValueError("N must be >= 3")
    return RadialFunction(grid, instanton_values(grid.nodes, N, scale))


def kelvin_transform(u: RadialFunction) -> RadialFunction:
    """``v(r) = r^(2-N) u(1/r)``: index reversal plus pointwise scaling."""
    grid = u.grid
    if not grid.is_inversion_symmetric():
        raise ValueError("Kelvin transform needs a grid closed under r -> 1/r")
    factor = grid.nodes ** (2.0 - grid.dimension)
    return RadialFunction(grid, factor * u.values[::-1])


def dilate(u: RadialFunction, sigma: float) -> RadialFunction:
    """``sigma^(-(N-2)/2) u(r/sigma)`` by spline interpolation of ``phi`` (a shift in log r).

    Values outside the grid follow the constant / ``r^(2-N)`` tails.
    """
    from scipy.interpolate import CubicSpline

    grid = u.grid
    a = grid.a
    t = grid.log_nodes
    phi = u.phi
    ts = t - math.log(sigma)
    out = CubicSpline(t, phi)(ts)
    lo = ts < t[0]
    hi = ts > t[-1]
    out[lo] = phi[0] * np.exp(a * (ts[lo] - t[0]))
    out[hi] = phi[-1] * np.exp(-a * (ts[hi] - t[-1]))
    return RadialFunction(grid, out / grid.emden_factor)


def profiles_close(u: RadialFunction, v: RadialFunction) -> float:
    """Relative D^{1,2} distance ``||u - v|| / ||v||``."""
    d = dirichlet_norm_sq(u.grid, u - v)
    return math.sqrt(d / dirichlet_norm_sq(v.grid, v))


def as_terms(pairs: Iterable[Sequence[float]]) -> tuple[tuple[float, float], ...]:
    return tuple((float(s), float(lam)) for s, lam in pairs)


def sobolev_constant(N: int) -> float:
    """Closed-form best Sobolev constant ``N(N-2)/4 * |S^N|^(2/N)``."""
    sphere = 2.0 * math.pi ** ((N + 1) / 2) / float(gamma((N + 1) / 2))
    return N * (N - 2) / 4.0 * sphere ** (2.0 / N)


def critical_level(N: int) -> float:
    """``S^(N/2) / N``, the energy of the instanton."""
    return sobolev_constant(N) ** (N / 2) / N
