import json
import math

import numpy as np
import pytest
from scipy import integrate

from hsground.core import (
    ProblemSpec,
    RadialFunction,
    critical_level,
    instanton,
    instanton_values,
    kelvin_transform,
    make_grid,
    sobolev_constant,
)
from hsground.oracles import (
    CertificateReport,
    DegenerateWindow,
    _bubble,
    _sobolev_certificates,
    best_sobolev_constant,
    c_eps_monotonicity,
    certificates_to_json,
    check_interpolation,
    decay_check,
    decay_slope,
    energy_bound_threshold,
    gradient_bound_check,
    gradient_slope,
    interpolation_exponents,
    interpolation_ratio,
    kelvin_ball_identity,
    kelvin_suite,
    nehari_root_oracle,
    nonexistence_diagnostic,
    offcenter_integrals,
    rayleigh_quotient,
    sphere_mean_weight,
)

# mpmath quadrature of |U|_{2*}^{2*} for N = 3 (equals S^{3/2})
S32 = 12.8209922049691268360572296386


class TestSobolev:
    @pytest.mark.parametrize("N", [3, 4, 5])
    def test_two_ways_and_closed_form(self, N):
        est = best_sobolev_constant(N)
        assert est.two_way_gap < 1e-6
        assert est.S == pytest.approx(sobolev_constant(N), rel=1e-6)

    def test_n3_against_quadrature_reference(self):
        est = best_sobolev_constant(3)
        assert est.dirichlet == pytest.approx(S32, rel=1e-8)
        assert est.critical == pytest.approx(S32, rel=1e-8)
        fine = best_sobolev_constant(3, make_grid(3, 1e4, 4 * 2049 - 3))
        assert fine.S == pytest.approx(est.S, rel=1e-6)

    def test_n4_perturbations_do_not_lower(self):
        reps = {r.name: r for r in _sobolev_certificates(4)}
        assert reps["sobolev_minimality_N4"].passed

    def test_n5_refinement(self):
        a = best_sobolev_constant(5, make_grid(5, 1e4, 1025)).S
        b = best_sobolev_constant(5, make_grid(5, 1e4, 2049)).S
        c = sobolev_constant(5)
        # fourth-order scheme: the coarse error is at most a modest multiple of the fine one
        assert abs(b - c) <= abs(a - c) + 1e-12
        assert abs(a - b) / c < 1e-6

    @pytest.mark.parametrize("sigma", [0.5, 2.0])
    def test_dilation_invariance(self, grid3, sigma):
        u = RadialFunction(grid3, instanton_values(grid3.nodes, 3, sigma))
        assert rayleigh_quotient(u) == pytest.approx(best_sobolev_constant(3).S, rel=1e-6)

    def test_rejects_bad_dimension(self):
        with pytest.raises(ValueError):
            best_sobolev_constant(2)


class TestInterpolation:
    def test_exponents(self):
        assert interpolation_exponents(3, 1.0, 2.0) == pytest.approx((0.75, 0.0))
        assert interpolation_exponents(3, 0.7, 0.7) == (0.0, 1.0)
        with pytest.raises(ValueError):
            interpolation_exponents(3, 1.5, 1.0)
        with pytest.raises(ValueError):
            interpolation_exponents(3, 0.5, 2.5)

    def test_dilation_invariant_at_theta_min(self, U3):
        theta, _ = interpolation_exponents(3, 1.0, 2.0)
        rep = check_interpolation(U3, 3, 1.0, 2.0, theta)
        assert rep.passed, rep.details
        assert math.isfinite(rep.details["sup_ratio"])

    def test_theta_below_min_rejected(self, U3):
        with pytest.raises(ValueError):
            check_interpolation(U3, 3, 1.0, 2.0, 0.7)

    def test_zero_rejected(self, grid3):
        with pytest.raises(ValueError):
            check_interpolation(RadialFunction(grid3, np.zeros(grid3.n_nodes)), 3, 1.0, 2.0, 0.75)

    def test_hardy_sobolev_reduction(self, grid3):
        # the extremal profile (1 + r^(2-s))^(-(N-2)/(2-s)) attains the battery bound
        rep = check_interpolation(None, 3, 1.0, 1.0, 1.0, grid=grid3)
        extremal = RadialFunction(grid3, _bubble(1.0)(grid3.nodes, 3, 1.0))
        best = interpolation_ratio(extremal, 1.0, 1.0, 1.0)
        assert best**-2 == pytest.approx(2 * math.sqrt(2 * math.pi / 3), rel=1e-9)
        assert rep.details["sup_ratio"] <= best * (1 + 1e-12)


class TestSlopes:
    def test_instanton(self, U3):
        assert decay_slope(U3) == pytest.approx(-1.0, abs=0.05)
        assert gradient_slope(U3) == pytest.approx(-2.0, abs=0.05)
        assert decay_check(U3).passed
        assert gradient_bound_check(U3).passed

    @pytest.mark.parametrize("N", [3, 4, 5])
    def test_pure_power(self, N):
        g = make_grid(N, 1e4, 1025)
        u = RadialFunction(g, g.nodes ** (2.0 - N))
        assert decay_slope(u) == pytest.approx(2.0 - N, abs=1e-10)
        assert gradient_slope(u) == pytest.approx(1.0 - N, abs=1e-6)

    def test_degenerate_windows(self, U3, grid3):
        with pytest.raises(DegenerateWindow):
            decay_slope(U3, (1.0, 100.0))
        with pytest.raises(DegenerateWindow):
            decay_slope(U3, (100.0, 1e5))
        v = RadialFunction(grid3, np.where(grid3.nodes > 50, 0.0, U3.values))
        with pytest.raises(DegenerateWindow):
            decay_slope(v)

    def test_converged_state(self, eps_reports):
        for rep in eps_reports:
            assert -1.05 <= rep.decay_slope <= -0.95
            assert abs(rep.gradient_slope + 2.0) <= 0.1
            assert rep.decay_window_gap <= 0.05


class TestKelvin:
    def test_instanton_halves(self, U3):
        rep = kelvin_ball_identity(U3, 0.0)
        assert rep.passed
        assert rep.details["inner_u"] == pytest.approx(S32 / 2, rel=1e-8)

    def test_inner_support(self, grid3):
        r = grid3.nodes
        u = RadialFunction(grid3, np.where(r < 0.8, np.cos(np.pi * r / 1.6) ** 4, 0.0))
        rep = kelvin_ball_identity(u, 1.0)
        assert rep.passed
        assert np.all(kelvin_transform(u).values[r < 1.25] == 0)

    def test_random_profiles(self, grid3):
        rng = np.random.default_rng(5)
        for _ in range(5):
            c = rng.uniform(0.1, 1.0, 3)
            w = rng.uniform(0.05, 20.0, 3)
            u = RadialFunction(grid3, sum(ci * instanton_values(grid3.nodes, 3, wi) for ci, wi in zip(c, w)))
            assert all(r.passed for r in kelvin_suite(u)), [r.line() for r in kelvin_suite(u)]

    def test_bad_s(self, U3):
        with pytest.raises(ValueError):
            kelvin_ball_identity(U3, 2.5)


class TestNonexistence:
    def test_sphere_mean_closed_form(self):
        r = np.linspace(0.01, 0.9, 7)
        for s in (0.5, 1.0, 1.5):
            ref = ((1 + r) ** (2 - s) - (1 - r) ** (2 - s)) / (2 * r * (2 - s))
            np.testing.assert_allclose(sphere_mean_weight(3, s, r), ref, rtol=1e-12)
        # N = 4 against direct angular quadrature
        s, rr = 1.0, 0.6
        num, _ = integrate.quad(
            lambda t: (1 + rr * rr + 2 * rr * math.cos(t)) ** (-s / 2) * math.sin(t) ** 2, 0, math.pi
        )
        assert sphere_mean_weight(4, s, rr) == pytest.approx(num / (math.pi / 2), rel=1e-10)

    def test_offcenter_pure_critical_approaches_level(self):
        spec = ProblemSpec(3, ((1.0, -0.5),), 0, homotopy_lambda=0.0)
        excess = []
        for sigma in (1e-2, 1e-3):
            D, B, C, mass = offcenter_integrals(3, spec, sigma)
            excess.append(D / C ** (1 / 3) / sobolev_constant(3) - 1.0)
            assert mass > 0.95
        # the cutoff costs O(sigma) in the quotient
        assert 0 < excess[1] < 0.2 * excess[0]

    def test_all_negative(self, opts):
        rep = nonexistence_diagnostic(ProblemSpec(3, ((1.0, -0.5),), 0), opts)
        d = rep.details
        assert d["strictly_above"] and d["decreasing"]
        assert all(lv > critical_level(3) for lv in d["levels"][:4])
        assert d["mass_fraction_in_sqrt_sigma_ball"][-1] >= 0.9
        assert not d["interior_minimizer_found"]
        assert rep.passed, rep.line()

    def test_zero_lambda_limit(self, opts):
        rep = nonexistence_diagnostic(
            ProblemSpec(3, ((1.0, -0.5),), 0, homotopy_lambda=0.0), opts, sigmas=(0.1, 0.01))
        levels = [r["c_level"] for r in rep.details["radial_runs"]]
        assert levels == pytest.approx([critical_level(3)] * 2, rel=1e-8)

    def test_rejects_positive(self, opts):
        with pytest.raises(ValueError):
            nonexistence_diagnostic(ProblemSpec(3, ((1.0, 0.5),), 1), opts)


class TestMonotonicity:
    def test_three_eps(self, single_positive, opts):
        rep = c_eps_monotonicity(single_positive, [0.1, 0.25, 0.4], opts)
        assert rep.passed and rep.measured > 1e-6

    def test_single_eps_vacuous(self, single_positive, opts):
        assert c_eps_monotonicity(single_positive, [0.25], opts).passed

    def test_rejections(self, single_positive, mixed_spec, opts):
        with pytest.raises(ValueError):
            c_eps_monotonicity(single_positive, [0.1, 0.1], opts)
        with pytest.raises(ValueError):
            c_eps_monotonicity(single_positive, [0.3, 0.1], opts)
        with pytest.raises(ValueError):
            c_eps_monotonicity(mixed_spec, [0.1, 0.2], opts)


def test_energy_bound_threshold(opts):
    spec = ProblemSpec(3, ((1.2, 1.0), (1.5, -0.1)), 1)
    rep = energy_bound_threshold(spec, 0.0, opts)
    d = rep.details
    assert rep.passed and math.isfinite(rep.measured)
    assert d["last_below"] < rep.measured < d["first_above"]
    levels = [x["c_level"] for x in d["scan"]]
    assert all(b > a for a, b in zip(levels, levels[1:]))
    with pytest.raises(ValueError):
        energy_bound_threshold(ProblemSpec(3, ((1.0, 1.0),), 1), 0.0, opts)


def test_nehari_root_oracle_small():
    rep = nehari_root_oracle(seed=3, per_pattern=5)
    assert rep.passed
    assert len(rep.details["instances"]) == 10


def test_certificate_serialization():
    reps = [
        CertificateReport("a", True, 1e-9, 0.0, 1e-8, "x", {"v": np.float64(2.0), "w": [np.inf]}),
        CertificateReport("b", False, 3.0, 1.0, 0.1),
    ]
    data = json.loads(certificates_to_json(reps))
    assert [d["name"] for d in data] == ["a", "b"]
    assert data[0]["details"]["v"] == 2.0
    assert reps[0].line().startswith("PASS") and reps[1].line().startswith("FAIL")


def test_refined_grid_reproduces_certificates():
    coarse = _sobolev_certificates(3, 2049)
    fine = _sobolev_certificates(3, 4097)
    assert [r.passed for r in coarse] == [r.passed for r in fine]
    g = make_grid(3, 1e4, 4097)
    assert gradient_bound_check(instanton(g)).passed
    assert kelvin_ball_identity(instanton(g), 1.0).passed
