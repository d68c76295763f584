import math

import numpy as np
import pytest

from hsground.core import (
    ProblemSpec,
    RadialFunction,
    critical_exponent,
    critical_level,
    dilate,
    dirichlet_norm_sq,
    instanton,
    instanton_values,
    kelvin_transform,
    make_grid,
    read_profile_csv,
    sobolev_constant,
    weighted_integral,
)

# independent mpmath quadrature of the closed forms (N = 3)
S32 = 12.8209922049691268360572296386  # ||U||^2 = |U|_6^6
B_S1_EPS05 = 13.8345556931155765913710429516  # int a_{1,0.5} U^4 dx


class TestCriticalExponent:
    def test_examples(self):
        assert critical_exponent(3, 1.0) == 4.0
        assert critical_exponent(4, 0.0) == 4.0
        assert critical_exponent(5, 2.0) == 2.0

    def test_endpoints(self):
        for N in (3, 4, 7):
            assert critical_exponent(N, 0.0) == pytest.approx(2 * N / (N - 2))
            assert critical_exponent(N, 2.0) == pytest.approx(2.0)

    @pytest.mark.parametrize("N,s", [(2, 1.0), (3, -0.1), (3, 2.5), (3.5, 1.0)])
    def test_rejects(self, N, s):
        with pytest.raises(ValueError):
            critical_exponent(N, s)


class TestProblemSpec:
    def test_sign_pattern(self):
        with pytest.raises(ValueError, match="must be positive"):
            ProblemSpec(3, ((0.5, -1.0), (1.0, 1.0)), 1)
        with pytest.raises(ValueError, match="must be negative"):
            ProblemSpec(3, ((0.5, 1.0), (1.0, 1.0)), 1)

    def test_increasing_s(self):
        with pytest.raises(ValueError, match="strictly increasing"):
            ProblemSpec(3, ((1.0, 1.0), (0.5, 1.0)), 2)

    def test_dimension_and_range(self):
        with pytest.raises(ValueError, match="N:"):
            ProblemSpec(2, ((1.0, 1.0),), 1)
        with pytest.raises(ValueError, match="s must lie"):
            ProblemSpec(3, ((2.0, 1.0),), 1)

    def test_homotopy_multiplier(self):
        spec = ProblemSpec(3, ((0.5, 1.0), (1.5, -0.1)), 1)
        assert spec.effective_lambdas == pytest.approx([1.0, -0.1])
        assert spec.with_homotopy(0.5).effective_lambdas == pytest.approx([1.0, 0.05])
        assert spec.with_homotopy(0.0).effective_lambdas[1] == 0.0

    def test_roundtrip(self):
        spec = ProblemSpec(4, ((0.5, 2.0), (1.2, -0.3)), 1, -0.75)
        assert ProblemSpec.loads(spec.dumps()) == spec
        with pytest.raises(ValueError, match="unknown"):
            ProblemSpec.from_dict({"N": 3, "lambda": 1})


class TestGrid:
    def test_three_node_example(self):
        g = make_grid(3, math.e, 3)
        np.testing.assert_allclose(g.nodes, [math.exp(-1), 1.0, math.e], rtol=1e-15)

    def test_middle_node(self):
        g = make_grid(3, 100.0, 513)
        assert g.nodes[256] == 1.0
        assert g.mid == 256

    def test_inversion_symmetry(self):
        g = make_grid(5, 37.0, 301)
        np.testing.assert_allclose(1.0 / g.nodes[::-1], g.nodes, rtol=1e-14)
        assert g.r_min * g.r_max == pytest.approx(1.0)
        assert np.all(np.diff(g.nodes) > 0)
        assert np.all(g.quad_weights > 0)

    def test_rejects(self):
        with pytest.raises(ValueError, match="odd"):
            make_grid(3, 10.0, 64)
        with pytest.raises(ValueError):
            make_grid(3, 1.0, 65)

    def test_surface_factor(self):
        assert make_grid(3, 10.0, 65).surface_factor == pytest.approx(4 * math.pi)
        assert make_grid(4, 10.0, 65).surface_factor == pytest.approx(2 * math.pi**2)

    @pytest.mark.parametrize("N", [3, 4, 5])
    def test_volume_quadrature(self, N):
        g = make_grid(N, 300.0, 1025)
        r = g.nodes
        for lo, hi in [(g.r_min, g.r_max), (r[100], 1.0), (1.0, r[900]), (r[300], r[700])]:
            exact = (hi**N - lo**N) / N
            got = g.integrate(g.nodes ** (N - 1), lo, hi)
            assert abs(got / exact - 1) < 1e-6


class TestInstanton:
    def test_values(self):
        assert instanton_values(0.0, 3) == pytest.approx(3**0.25, rel=1e-12)
        assert instanton_values(0.0, 4) == pytest.approx(math.sqrt(8), rel=1e-12)
        assert instanton_values(1.0, 4) == pytest.approx(math.sqrt(8) / 2, rel=1e-12)

    def test_positive_decreasing(self, U3):
        assert np.all(U3.values > 0)
        assert U3.is_nonincreasing(0.0)

    def test_norm_identities(self, grid3, U3):
        D = dirichlet_norm_sq(grid3, U3)
        C = weighted_integral(grid3, U3, 6.0, 0.0)
        assert D == pytest.approx(S32, rel=1e-9)
        assert C == pytest.approx(S32, rel=1e-9)
        assert D == pytest.approx(sobolev_constant(3) ** 1.5, rel=1e-9)
        assert critical_level(3) == pytest.approx(S32 / 3, rel=1e-12)

    def test_n4_dirichlet_equals_critical(self):
        g = make_grid(4, 1e4, 2049)
        U = instanton(g)
        assert dirichlet_norm_sq(g, U) == pytest.approx(weighted_integral(g, U, 4.0, 0.0), rel=1e-8)


class TestWeightedIntegral:
    def test_zero(self, grid3):
        assert weighted_integral(grid3, RadialFunction(grid3, np.zeros(grid3.n_nodes)), 4, 1, 0.5) == 0

    def test_against_quadrature(self, grid3, U3):
        got = weighted_integral(grid3, U3, 4.0, 1.0, 0.5)
        assert got == pytest.approx(B_S1_EPS05, rel=1e-9)
        assert weighted_integral(grid3, U3, 4.0, 1.0, 0.0) == pytest.approx(6 * math.pi, rel=1e-9)

    def test_monotone_in_eps(self, grid3, U3):
        vals = [weighted_integral(grid3, U3, 4.0, 1.0, e) for e in (0.0, 0.1, 0.2, 0.5, 0.9)]
        assert np.all(np.diff(vals) < 0)

    def test_rejects(self, grid3, U3):
        with pytest.raises(ValueError):
            weighted_integral(grid3, U3, 4.0, 1.0, 1.0)
        with pytest.raises(ValueError):
            weighted_integral(grid3, U3, 6.0, 0.0, 0.1)
        with pytest.raises(ValueError):
            weighted_integral(grid3, U3, -1.0, 1.0, 0.0)


class TestDirichlet:
    def test_zero_and_constant_free(self, grid3):
        assert dirichlet_norm_sq(grid3, RadialFunction(grid3, np.zeros(grid3.n_nodes))) == 0.0

    @pytest.mark.parametrize("sigma", [0.2, 3.0])
    def test_dilation_invariance(self, grid3, U3, sigma):
        v = RadialFunction(grid3, instanton_values(grid3.nodes, 3, sigma))
        assert dirichlet_norm_sq(grid3, v) == pytest.approx(dirichlet_norm_sq(grid3, U3), rel=1e-9)

    def test_dilate_matches_closed_form(self, grid3, U3):
        v = dilate(U3, 2.0)
        exact = instanton_values(grid3.nodes, 3, 2.0)
        assert np.max(np.abs(v.values - exact)) / exact.max() < 1e-8


class TestKelvin:
    def test_instanton_invariant(self):
        for N in (3, 4, 5):
            g = make_grid(N, 1e3, 1025)
            U = instanton(g)
            np.testing.assert_allclose(kelvin_transform(U).values, U.values, rtol=1e-12)

    def test_involution(self, grid3):
        rng = np.random.default_rng(1)
        u = RadialFunction(grid3, rng.uniform(0, 1, grid3.n_nodes))
        np.testing.assert_allclose(kelvin_transform(kelvin_transform(u)).values, u.values, rtol=1e-13)

    def test_isometry(self, grid3):
        u = RadialFunction(grid3, instanton_values(grid3.nodes, 3, 0.3) + 0.2 * instanton_values(grid3.nodes, 3, 4.0))
        d0 = dirichlet_norm_sq(grid3, u)
        assert dirichlet_norm_sq(grid3, kelvin_transform(u)) == pytest.approx(d0, rel=1e-8)

    def test_rejects_asymmetric_grid(self, grid3):
        from dataclasses import replace

        g = replace(grid3, nodes=grid3.nodes * 1.01)
        with pytest.raises(ValueError, match="r -> 1/r"):
            kelvin_transform(RadialFunction(g, np.ones(g.n_nodes)))


def test_csv_roundtrip(tmp_path, U3):
    path = tmp_path / "u.csv"
    U3.to_csv(path)
    back = read_profile_csv(path, 3)
    np.testing.assert_array_equal(back.values, U3.values)
    np.testing.assert_array_equal(back.grid.nodes, U3.grid.nodes)
