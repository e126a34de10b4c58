import math

import numpy as np
import pytest

from conevortex.cone import WeightedCircleAction
from conevortex.errors import (
    BelowThreshold,
    ConnectionMismatch,
    NonReebAction,
    NotCertified,
    NotHolomorphic,
    Unstable,
    ZeroSection,
)
from conevortex.sections import (
    ComplexSection,
    background_connection,
    dbar_residual,
    degree,
    divisor_extract,
    section_from_coeffs,
    theta_basis,
    torus_distance,
)
from conevortex.torus import RealField, TorusGrid, integrate, laplacian, random_smooth_field
from conevortex.vortex import (
    Configuration,
    apply_complex_gauge,
    correspondence_check,
    fiber_sample,
    hk_gauge_fix,
    mu_of,
    pi_map,
    sv_residual,
    tau_vortex_solve,
    threshold,
)

TWO_PI = 2 * math.pi


@pytest.fixture(scope="module")
def vortex64():
    return tau_vortex_solve([1.0], 1, 10.0, TorusGrid.square(64))


@pytest.fixture(scope="module")
def vortex_d2():
    return tau_vortex_solve([0.7 - 0.2j, 1.1 + 0.4j], 2, 20.0, TorusGrid.square(64))


def _pair(grid, coeffs, d=None):
    d = d or len(coeffs)
    s = section_from_coeffs(coeffs, d, grid)
    return s, background_connection(s.bundle)


class TestMu:
    def test_vanishes_at_divisor(self, grid64):
        s = theta_basis(1, grid64)[0]
        mu = mu_of((s,))
        assert mu.min() >= 0
        zero = divisor_extract(s).points[0]
        X, Y = grid64.coords()
        iy, ix = np.unravel_index(np.argmin(mu.values), mu.values.shape)
        assert torus_distance((X[iy, ix], Y[iy, ix]), zero, grid64) <= 1.5 * grid64.hx
        assert mu.min() <= 1e-3 * mu.max()

    def test_quadratic_scaling(self, grid64):
        s = theta_basis(2, grid64)[1]
        assert np.allclose(mu_of((s.scale(3.0),)).values, 9 * mu_of((s,)).values, rtol=1e-14, atol=0)

    def test_unitary_combination(self, grid64):
        s = theta_basis(1, grid64)[0]
        mu2 = mu_of((s, s.scale(np.exp(1j * math.pi / 3))))
        assert np.allclose(mu2.values, s.pointwise_norm2().values, rtol=1e-14, atol=1e-300)

    def test_weighted_action_rejected(self, grid64):
        s = theta_basis(1, grid64)[0]
        with pytest.raises(NonReebAction):
            mu_of((s, s), WeightedCircleAction((1, 2)))
        mu_of((s, s), WeightedCircleAction((1, 1)))


class TestResidual:
    def test_solution_certified(self, vortex64):
        res = sv_residual(vortex64.cfg)
        assert res.within(1e-8)
        assert res.f02_sup == 0.0

    def test_tau_shift(self, vortex64):
        cfg = vortex64.cfg
        shifted = Configuration(cfg.u, cfg.A, cfg.tau + 1.0)
        assert sv_residual(shifted).moment_sup == pytest.approx(1.0, abs=1e-8)


class TestComplexGauge:
    def test_zero_is_identity(self, grid64):
        s, A = _pair(grid64, [1.0])
        cfg = Configuration((s,), A, 10.0)
        out = apply_complex_gauge(RealField.constant(grid64, 0.0), cfg)
        assert np.array_equal(out.u[0].values, s.values)
        assert np.array_equal(out.A.curvature.values, A.curvature.values)

    def test_constant(self, grid64):
        s, A = _pair(grid64, [1.0])
        cfg = Configuration((s,), A, 10.0)
        out = apply_complex_gauge(RealField.constant(grid64, 0.4), cfg)
        assert np.abs(out.A.a_x.values).max() == 0 and np.abs(out.A.a_y.values).max() == 0
        assert np.allclose(mu_of(out.u).values, math.exp(0.8) * mu_of(cfg.u).values, rtol=1e-14)

    def test_curvature_shift_is_laplacian(self, grid64, rng):
        s, A = _pair(grid64, [1.0])
        f = random_smooth_field(grid64, rng, modes=5, amplitude=1.0)
        out = apply_complex_gauge(f, Configuration((s,), A, 10.0))
        assert (out.A.curvature_scalar() - A.curvature - laplacian(f)).sup() <= 1e-10
        # The stored curvature agrees with the curl of the stored potential.
        curl = out.A.curvature_scalar("stencil")
        assert (curl - out.A.curvature).sup() <= 0.05 * laplacian(f).sup()

    def test_preserves_holomorphy(self, grid128, rng):
        s, A = _pair(grid128, [0.3, 1j])
        f = random_smooth_field(grid128, rng, amplitude=1.0)
        out = apply_complex_gauge(f, Configuration((s,), A, 20.0))
        assert dbar_residual(out.u[0], out.A) <= 1e-8


class TestGaugeFix:
    def test_integral_identity(self, vortex64):
        ident = vortex64.integral_identity()
        assert ident["predicted"] == pytest.approx(7.433629385640827, rel=1e-12)
        assert ident["rel_err"] <= 1e-4

    def test_certificate(self, vortex64):
        cert = vortex64.gauge_fix.certificate()
        assert cert["certified"]
        assert cert["moment_sup"] <= 1e-8 and cert["dbar_sup"] <= 1e-8
        assert cert["threshold_margin"] == pytest.approx(10 - TWO_PI)
        for key in ("f02_sup", "kw_iterations"):
            assert key in cert

    def test_exact_threshold(self, grid64):
        s, A = _pair(grid64, [1.0])
        assert threshold(A) == pytest.approx(TWO_PI)
        with pytest.raises(BelowThreshold):
            hk_gauge_fix((s,), A, TWO_PI)
        with pytest.raises(BelowThreshold):
            hk_gauge_fix((s,), A, 6.0)

    def test_unstable(self, grid64):
        _, A = _pair(grid64, [1.0])
        zero = ComplexSection(A.bundle, np.zeros(grid64.shape))
        with pytest.raises(Unstable):
            hk_gauge_fix((zero,), A, 10.0)

    def test_not_holomorphic(self, grid64):
        s, A = _pair(grid64, [1.0])
        _, Y = grid64.coords()
        bad = s.scale(np.exp(np.sin(TWO_PI * Y)))
        with pytest.raises(NotHolomorphic):
            hk_gauge_fix((bad,), A, 10.0)

    @pytest.mark.parametrize("c", [0.1, 10.0])
    def test_rescaling_invariance(self, c, grid64):
        s, A = _pair(grid64, [0.4, 1 - 0.5j])
        ref = hk_gauge_fix((s,), A, 20.0).cfg
        out = hk_gauge_fix((s.scale(c),), A, 20.0).cfg
        assert np.abs(out.u[0].unitary() - ref.u[0].unitary()).max() <= 1e-8
        assert (out.A.curvature - ref.A.curvature).sup() <= 1e-8
        assert (mu_of(out.u) - mu_of(ref.u)).sup() <= 1e-8

    def test_holomorphy_budget(self, vortex_d2):
        gf = vortex_d2.gauge_fix
        assert gf.residual.dbar_sup <= max(10 * gf.input_dbar_sup, 1e-12)

    def test_n_components(self, grid64):
        s0, A = _pair(grid64, [1.0, 0.0])
        s1 = section_from_coeffs([0.0, 1.0], 2, grid64)
        res = hk_gauge_fix((s0, s1), A, 20.0)
        assert res.certified
        assert res.residual.moment_sup <= 1e-8


class TestTauVortex:
    def test_below_threshold(self, grid64):
        with pytest.raises(BelowThreshold):
            tau_vortex_solve([1.0], 1, 6.0, grid64)

    def test_zero_section(self, grid64):
        with pytest.raises(ZeroSection):
            tau_vortex_solve([0.0, 0.0], 2, 20.0, grid64)

    def test_divisor_unchanged(self, vortex_d2):
        # exp(f) > 0 leaves every plaquette winding unchanged; the sub-pixel
        # refinement sees exp(f) vary across the cell and may move slightly.
        a = divisor_extract(vortex_d2.phi0, refine=False)
        b = divisor_extract(vortex_d2.phi, refine=False)
        assert a == b
        g = vortex_d2.phi.grid
        ra = divisor_extract(vortex_d2.phi0)
        rb = divisor_extract(vortex_d2.phi)
        assert all(torus_distance(p, q, g) <= 0.1 * g.hx for p, q in zip(ra.points, rb.points))

    @pytest.mark.parametrize("tau", [TWO_PI + 0.5, 8.0, 10.0, 12.0])
    def test_threshold_law(self, tau, grid64):
        v = tau_vortex_solve([1.0], 1, tau, grid64)
        integral_mu2 = integrate(mu_of(v.cfg.u)) * 2
        predicted = 2 * grid64.vol * (tau - TWO_PI / grid64.vol)
        assert abs(integral_mu2 - predicted) / predicted <= 1e-4

    def test_rectangular_torus(self):
        g = TorusGrid(64, 32, 2.0, 0.75)
        v = tau_vortex_solve([1.0, 0.5j], 2, 12.0, g)
        assert v.integral_identity()["rel_err"] <= 1e-4
        assert sv_residual(v.cfg).within(1e-8)


class TestCorrespondence:
    def test_self(self, vortex64):
        rep = correspondence_check(vortex64.cfg, vortex64.phi)
        assert all(v <= 1e-8 for v in rep.values()), rep

    def test_pointwise_determination(self, vortex64):
        # Two different symplectic vortices over the same A share their mu-field.
        cfg = vortex64.cfg
        other = fiber_sample(vortex64.phi, cfg.A, cfg.tau, 3, 1, seed=5)[0].cfg
        assert (mu_of(other.u) - mu_of(cfg.u)).sup() <= 1e-8
        rep = correspondence_check(other, vortex64.phi)
        assert rep["mu_vs_half_phi2"] <= 1e-8

    def test_independent_runs_agree(self, grid64):
        a = tau_vortex_solve([1.0], 1, 10.0, grid64)
        b = tau_vortex_solve([1j], 1, 10.0, grid64)
        assert (mu_of(a.cfg.u) - mu_of(b.cfg.u)).sup() <= 1e-8

    def test_connection_mismatch(self, vortex64, vortex_d2):
        with pytest.raises(ConnectionMismatch):
            correspondence_check(vortex64.cfg, vortex64.phi, background_connection(1, vortex64.phi.grid))
        with pytest.raises(ConnectionMismatch):
            correspondence_check(vortex64.cfg, vortex_d2.phi)


class TestPi:
    def test_degree_one(self, vortex64):
        out = pi_map(vortex64.cfg)
        assert out.has_divisor and out.divisor.degree == 1
        zero = divisor_extract(vortex64.phi0).points[0]
        assert torus_distance(out.divisor.points[0], zero, vortex64.phi.grid) <= 0.1 * vortex64.phi.grid.hx
        assert np.allclose(out.modulus_sq.values, vortex64.phi.pointwise_norm2().values, rtol=0, atol=1e-8)

    def test_degree_two(self, vortex_d2):
        out = pi_map(vortex_d2.cfg)
        assert out.divisor.degree == 2 == degree(vortex_d2.A)

    def test_no_common_zero(self, grid64):
        s0, A = _pair(grid64, [1.0, 0.0])
        s1 = section_from_coeffs([0.0, 1.0], 2, grid64)
        cfg = hk_gauge_fix((s0, s1), A, 20.0).cfg
        out = pi_map(cfg)
        assert not out.has_divisor
        assert out.min_mu > 0
        assert out.to_dict()["kind"] == "NoDivisor"

    def test_common_zero_gives_divisor(self, vortex64):
        cfg = fiber_sample(vortex64.phi, vortex64.A, 10.0, 2, 1, seed=3)[0].cfg
        out = pi_map(cfg)
        assert out.has_divisor and out.divisor.degree == 1

    @pytest.mark.parametrize("phase", [1j, -1.0, -1j])
    def test_unitary_gauge_bit_identical(self, phase, vortex_d2):
        a = pi_map(vortex_d2.cfg)
        b = pi_map(vortex_d2.cfg.unitary_gauge(phase))
        assert np.array_equal(a.modulus_sq.values, b.modulus_sq.values)
        assert a.divisor == b.divisor

    def test_general_phase_close(self, vortex_d2):
        a = pi_map(vortex_d2.cfg)
        b = pi_map(vortex_d2.cfg.unitary_gauge(np.exp(0.37j)))
        assert np.abs(a.modulus_sq.values - b.modulus_sq.values).max() <= 1e-13 * a.modulus_sq.sup()
        assert a.divisor.multiplicities == b.divisor.multiplicities

    def test_uncertified_rejected(self, grid64):
        s, A = _pair(grid64, [1.0])
        with pytest.raises(NotCertified):
            pi_map(Configuration((s,), A, 10.0))


class TestFiber:
    def test_embedding(self, vortex64):
        out = fiber_sample(vortex64.phi, vortex64.A, 10.0, 3, 1, coeffs=[[1, 0, 0]])[0]
        assert np.array_equal(out.cfg.u[0].values, vortex64.phi.values)
        assert not out.cfg.u[1].values.any() and not out.cfg.u[2].values.any()
        assert out.residual == sv_residual(vortex64.cfg)

    def test_moment_identity(self, vortex64):
        half = 0.5 * vortex64.phi.pointwise_norm2().values
        for smp in fiber_sample(vortex64.phi, vortex64.A, 10.0, 3, 5, seed=11):
            assert np.abs(mu_of(smp.cfg.u).values - half).max() <= 1e-12
            assert smp.residual.within(1e-8)

    def test_positive_dimensional_fiber(self, vortex64):
        a, b = fiber_sample(vortex64.phi, vortex64.A, 10.0, 2, 2, seed=1)
        # Real gauge multiplies all components by one phase field, so component
        # ratios u_0/u_1 are gauge invariant; they differ here.
        assert abs(a.coeffs[0] / a.coeffs[1] - b.coeffs[0] / b.coeffs[1]) > 1e-3
        mask = np.abs(vortex64.phi.unitary()) > 1e-3
        ra = a.cfg.u[0].values[mask] / a.cfg.u[1].values[mask]
        rb = b.cfg.u[0].values[mask] / b.cfg.u[1].values[mask]
        assert np.abs(ra - rb).max() > 1e-3

    def test_deterministic(self, vortex64):
        a = fiber_sample(vortex64.phi, vortex64.A, 10.0, 2, 3, seed=9)
        b = fiber_sample(vortex64.phi, vortex64.A, 10.0, 2, 3, seed=9)
        assert all(np.array_equal(x.coeffs, y.coeffs) for x, y in zip(a, b))
