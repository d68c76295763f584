import numpy as np
import pytest

from hsground.core import ProblemSpec, RadialFunction, instanton_values
from hsground.functionals import energy
from hsground.nehari import (
    BracketFailure,
    NoRoot,
    dense_scan_roots,
    nehari_scaling,
    project_nehari,
    scaling_for,
)
from hsground.oracles import _random_instance
from hsground.solver import mountain_pass_scan

# mpmath oracle: Nehari scaling of U for lambda_1 = 1, s_1 = 1 (N = 3)
T_STAR_U = {0.1: 0.725423906693294674632193611987, 0.2: 0.738501950334944277376603593643}


def profile(grid):
    r = grid.nodes
    return RadialFunction(grid, 0.8 * instanton_values(r, 3, 2.0) + 0.3 * instanton_values(r, 3, 0.5))


class TestScaling:
    def test_pure_quadratic(self):
        sc = nehari_scaling(1.0, [], 1.0, 2.0)
        assert sc.t_star == pytest.approx(1.0, rel=1e-12)
        assert sc.uniqueness_certificate
        lo, hi = sc.bracket
        assert lo <= sc.t_star <= hi

    def test_instanton_on_manifold(self, U3):
        assert scaling_for(ProblemSpec(3), 0.0, U3).t_star == pytest.approx(1.0, abs=1e-9)

    def test_instanton_with_term(self, U3, single_positive):
        for eps, ref in T_STAR_U.items():
            assert scaling_for(single_positive, eps, U3).t_star == pytest.approx(ref, rel=1e-9)

    def test_mixed_synthetic_against_scan(self):
        bt = [(0.5, 2.0), (-0.3, 1.0)]
        sc = nehari_scaling(1.0, bt, 0.4, 4.0)
        roots = dense_scan_roots(1.0, bt, 0.4, 4.0)
        assert len(roots) == 1
        assert sc.t_star == pytest.approx(roots[0], rel=1e-8)
        assert abs(sc.f_value_at_t) < 1e-10

    def test_errors(self):
        with pytest.raises(NoRoot):
            nehari_scaling(1.0, [(0.1, 1.0)], 0.0, 4.0)
        with pytest.raises(BracketFailure):
            nehari_scaling(0.0, [], 1.0, 4.0)
        with pytest.raises(ValueError):
            nehari_scaling(1.0, [(0.1, 5.0)], 1.0, 4.0)

    def test_second_sign_change_is_flagged(self):
        # coefficients outside the admissible sign pattern: f dips below zero and recovers
        bt = [(4.2, 1.0), (-4.0, 2.0)]
        sc = nehari_scaling(1.0, bt, 1e-3, 4.0)
        assert len(dense_scan_roots(1.0, bt, 1e-3, 4.0)) == 3
        assert not sc.uniqueness_certificate

    @pytest.mark.parametrize("mixed", [False, True])
    def test_random_instances_single_root(self, mixed):
        rng = np.random.default_rng(11 + mixed)
        for _ in range(10):
            D, bt, C, ce, root = _random_instance(rng, mixed)
            roots = dense_scan_roots(D, bt, C, ce, t_max=2 * root.t_star, step=1e-5)
            assert len(roots) == 1
            assert root.uniqueness_certificate
            assert root.t_star == pytest.approx(roots[0], rel=1e-8)


class TestProjection:
    def test_idempotent(self, grid3, mixed_spec):
        v = project_nehari(mixed_spec, 0.1, profile(grid3))
        w = project_nehari(mixed_spec, 0.1, v)
        np.testing.assert_allclose(w.values, v.values, rtol=1e-10)
        bd = energy(mixed_spec, 0.1, v)
        assert abs(bd.nehari_residual) <= 1e-10 * bd.dirichlet

    def test_level_is_ray_maximum(self, grid3, mixed_spec):
        u = profile(grid3)
        v = project_nehari(mixed_spec, 0.1, u)
        level = energy(mixed_spec, 0.1, v).phi
        ts = np.linspace(0.2, 3.0, 2801) * scaling_for(mixed_spec, 0.1, u).t_star
        scan = max(energy(mixed_spec, 0.1, u * t).phi for t in ts[::20])
        assert level >= scan - 1e-12
        assert mountain_pass_scan(mixed_spec, 0.1, u) == pytest.approx(level, rel=1e-10)

    def test_t_star_increases_with_eps(self, grid3, single_positive):
        u = profile(grid3)
        assert scaling_for(single_positive, 0.2, u).t_star > scaling_for(single_positive, 0.1, u).t_star

    def test_zero_rejected(self, grid3, mixed_spec):
        with pytest.raises(BracketFailure):
            project_nehari(mixed_spec, 0.1, RadialFunction(grid3, np.zeros(grid3.n_nodes)))

    def test_mixed_sign_eps_dependence_is_finite(self, grid3, mixed_spec):
        # monotonicity in eps is not asserted when some lambda is negative; only recorded
        ts = [scaling_for(mixed_spec, e, profile(grid3)).t_star for e in (0.05, 0.2, 0.4)]
        assert all(np.isfinite(ts)) and min(ts) > 0
