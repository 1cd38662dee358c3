import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from lorentzqm import (
    BandTrackingError,
    ConeCrossingError,
    ParameterPath,
    SpectrumError,
    adiabatic_element,
    adiabatic_sweep,
    berry_phase_loop,
    curvature_map,
    eigensolve,
    flux_density_profile,
    from_mdecomp,
    total_flux,
)
from lorentzqm.generator import eig2_batch
from lorentzqm.geometry import (
    _overlap_phases,
    _wrap,
    cap_flux,
    closed_form_flux_density,
    curvature,
    curvature_kubo,
    extrapolated_geometric_phase,
    gradH_mdecomp,
    measured_flux_density,
    overlap_product_phase,
    refine_loop_phase,
)


def loop_phase_exact(theta, band=0):
    """Band-0 phase of a counter-clockwise theta-circle, from integrating the connection analytically."""
    t2 = np.tan(theta) ** 2
    val = -np.pi * (1 / np.sqrt(1 - t2) - 1)
    return val if band == 0 else -val


def derived_flux_density(theta, band=0):
    t2 = np.tan(theta) ** 2
    val = -(1 + t2) ** 1.5 / (2 * (1 - t2) ** 1.5)
    return val if band == 0 else -val


def circle(center, radius, n, normal="m3"):
    phi = np.linspace(0, 2 * np.pi, n + 1)
    c = np.asarray(center, float)
    if normal == "m3":
        pts = c + radius * np.stack([np.cos(phi), np.sin(phi), 0 * phi], axis=1)
    else:  # loop in the m1-m3 plane
        pts = c + radius * np.stack([np.cos(phi), 0 * phi, np.sin(phi)], axis=1)
    pts[-1] = pts[0]
    return ParameterPath(pts)


def band_vector(R, band):
    E, V, s = eig2_batch(np.asarray(R, float))
    return V[..., :, band]


class TestPath:
    def test_closed_needs_repeat(self):
        with pytest.raises(ValueError):
            ParameterPath(np.array([[0, 0, 1.0], [0.1, 0, 1.0]]), closed=True)

    def test_polyline_closes(self):
        p = ParameterPath.polyline([[0, 0, 1], [0.1, 0, 1], [0.1, 0.1, 1]])
        assert p.closed and p.resolution == 3
        np.testing.assert_array_equal(p.samples[0], p.samples[-1])

    def test_cone_rejected_unless_exploratory(self):
        pts = [[0, 0, 1], [1, 0, 1], [0, 0, 1]]
        with pytest.raises(ConeCrossingError):
            ParameterPath(np.array(pts, float))
        p = ParameterPath(np.array(pts, float), exploratory=True)
        assert p.exploratory

    def test_shape(self):
        with pytest.raises(ValueError):
            ParameterPath(np.zeros((4, 2)))

    def test_at_interpolates_by_arclength(self):
        p = ParameterPath.polyline([[0, 0, 1], [0, 0, 3]], close=False)
        np.testing.assert_allclose(p.at(0.25), [0, 0, 1.5])
        np.testing.assert_allclose(p.at(np.array([0.0, 1.0])), [[0, 0, 1], [0, 0, 3]])

    def test_zero_length(self):
        p = ParameterPath(np.array([[0, 0, 1.0], [0, 0, 1.0]]))
        np.testing.assert_allclose(p.at(np.array([0.2, 0.7])), [[0, 0, 1], [0, 0, 1]])


class TestAdiabaticElement:
    def test_zero_gradient(self):
        e = eigensolve(from_mdecomp(0.2, 0.1, 1))
        np.testing.assert_array_equal(adiabatic_element(e, [np.zeros((2, 2))] * 3), np.zeros(3))

    @pytest.mark.parametrize("R", [(0.0, 0.0, 1.0), (0.3, -0.2, 1.1), (0.5, 0.4, -0.9)])
    def test_finite_difference_oracle(self, R):
        e = eigensolve(from_mdecomp(*R))
        el = adiabatic_element(e, gradH_mdecomp())
        R = np.array(R)
        v2 = e.vectors[:, 1]
        fd = np.empty(3, complex)
        for i in range(3):
            step = np.eye(3)[i]

            def d(h):
                return (band_vector(R + h * step, 0) - band_vector(R - h * step, 0)) / (2 * h)

            dj = (4 * d(5e-4) - d(1e-3)) / 3
            fd[i] = np.vdot(v2, np.array([1, -1]) * dj)
        assert np.max(np.abs(el - fd)) <= 1e-6

    def test_gap_scaling(self):
        # both sigma-normalised eigenvectors blow up like gap^-1/2 at the cone,
        # so the element grows as gap^-2 rather than gap^-1
        gaps, mags, mats = [], [], []
        for eps in [1e-1, 3e-2, 1e-2, 3e-3, 1e-3]:
            e = eigensolve(from_mdecomp(0.6, 0.8, 1 + eps))
            el = adiabatic_element(e, gradH_mdecomp())
            gap = e.eigenvalues[0].real - e.eigenvalues[1].real
            v1, v2 = e.vectors[:, 0], e.vectors[:, 1]
            mats.append(np.max(np.abs(el * gap - [np.vdot(v2, G @ v1) for G in gradH_mdecomp()])))
            gaps.append(gap)
            mags.append(np.linalg.norm(el))
        assert max(mats) <= 1e-9 * max(mags)
        slope = np.polyfit(np.log(gaps), np.log(mags), 1)[0]
        assert slope == pytest.approx(-2, abs=0.1)

    def test_degenerate(self):
        with pytest.raises(SpectrumError):
            adiabatic_element(eigensolve(from_mdecomp(2, 0, 1)), gradH_mdecomp())


class TestBerryPhase:
    def test_real_plane_loop_zero(self):
        res = berry_phase_loop(circle([0, 0, 2], 0.5, 256, normal="m2"))
        assert abs(res.phase) <= 1e-8
        assert abs(res.phase_quadrature) <= 1e-8

    def test_shrinking_loop(self):
        phases = [abs(berry_phase_loop(circle([0.2, 0.1, 1], 0.2 * s, 256)).phase) for s in (1, 0.1, 0.01)]
        assert phases[0] > 1e-3
        assert phases[1] < phases[0] / 50 and phases[2] < phases[1] / 50

    def test_radial_path_zero(self):
        res = berry_phase_loop(ParameterPath.radial([0.2, -0.3, 1], 0.5, 3.0, 40))
        assert abs(res.phase) <= 1e-12
        assert abs(res.phase_quadrature) <= 1e-8

    @pytest.mark.parametrize("theta", [0.1, 0.3, 0.6])
    def test_theta_circle_closed_form(self, theta):
        exact = loop_phase_exact(theta)
        n = 4096
        coarse = berry_phase_loop(ParameterPath.theta_circle(theta, n)).phase_unreduced
        fine = berry_phase_loop(ParameterPath.theta_circle(theta, 2 * n)).phase_unreduced
        assert abs((4 * fine - coarse) / 3 - exact) <= 1e-5

    @pytest.mark.parametrize("theta", [0.1, 0.3, 0.6])
    def test_dense_oracle(self, theta):
        # independent dense overlap product at 2e4 points, Richardson in resolution
        def dense(n):
            V = band_vector(ParameterPath.theta_circle(theta, n).samples, 0)
            return overlap_product_phase(V, signs=[1, -1])

        oracle = (4 * dense(20000) - dense(10000)) / 3
        res = berry_phase_loop(ParameterPath.theta_circle(theta, 2048))
        assert abs(res.phase_unreduced - oracle) <= 1e-5
        assert abs(oracle - loop_phase_exact(theta)) <= 1e-8

    # the O(1/n^2) constant grows toward the cone (about 29 at theta = 0.7),
    # so the near-cone case needs n large enough for the 1e-6 floor
    @pytest.mark.parametrize("theta,n", [(0.1, 64), (0.3, 256), (0.6, 1024), (0.7, 8192)])
    def test_estimators_agree(self, theta, n):
        res = berry_phase_loop(ParameterPath.theta_circle(theta, n))
        assert res.discretization_error <= max(1e-6, 10 / n**2)

    def test_gauge_invariance(self, rng):
        path = ParameterPath.theta_circle(0.4, 300)
        a = berry_phase_loop(path)
        for _ in range(5):
            b = berry_phase_loop(path, phase_noise=rng)
            assert abs(_wrap(b.phase - a.phase)) <= 1e-9

    def test_reality(self):
        res = berry_phase_loop(ParameterPath.theta_circle(0.65, 512))
        scale = np.max(np.abs(res.connection_samples))
        assert res.reality_residual <= 1e-10 * scale
        assert res.connection_samples.dtype == float

    @pytest.mark.parametrize("theta", [0.2, 0.5, 0.7])
    def test_band_antisymmetry(self, theta):
        path = ParameterPath.theta_circle(theta, 1024)
        a, b = berry_phase_loop(path, 0), berry_phase_loop(path, 1)
        assert abs(a.phase_unreduced + b.phase_unreduced) <= 1e-6
        assert a.signature == 1 and b.signature == -1

    def test_lower_cap_signature_swap(self):
        a = berry_phase_loop(ParameterPath.theta_circle(0.3, 256, cap=-1), 0)
        assert a.signature == -1

    @given(st.floats(0.05, 20))
    def test_radial_scaling(self, s):
        path = circle([0.2, 0.1, 1], 0.3, 200)
        a = berry_phase_loop(path).phase
        b = berry_phase_loop(path.scaled(s)).phase
        assert abs(b - a) <= 1e-8

    def test_quadratic_convergence(self):
        exact = loop_phase_exact(0.3)
        ns = np.array([32, 64, 128, 256, 512])
        errs = [abs(berry_phase_loop(ParameterPath.theta_circle(0.3, n)).phase_unreduced - exact) for n in ns]
        slope = -np.polyfit(np.log(ns), np.log(errs), 1)[0]
        assert slope >= 1.8

    def test_hermitian_regression(self):
        # spin-1/2 aligned with a field on a cone of half-angle theta: phase = -solid angle / 2
        theta, n = 0.7, 2000
        phi = np.linspace(0, 2 * np.pi, n + 1)
        V = np.stack([np.cos(theta / 2) * np.ones_like(phi), np.sin(theta / 2) * np.exp(1j * phi)], axis=1)
        V[-1] = V[0]
        got = overlap_product_phase(V)
        assert got == pytest.approx(-np.pi * (1 - np.cos(theta)), abs=1e-5)

    def test_resolution_and_closed_checks(self):
        with pytest.raises(ValueError):
            berry_phase_loop(ParameterPath.theta_circle(0.3, 8))
        with pytest.raises(ValueError):
            berry_phase_loop(ParameterPath.polyline([[0, 0, 1]] * 20, close=False))

    def test_exploratory_loop_touching_cone(self):
        pts = ParameterPath.theta_circle(0.3, 32).samples.copy()
        pts[5] = [1.0, 0.0, 1.0]
        with pytest.raises(ConeCrossingError):
            berry_phase_loop(ParameterPath(pts, exploratory=True))

    def test_signature_jump(self):
        up = ParameterPath.theta_circle(0.2, 16).samples
        pts = up.copy()
        pts[8:12, 2] *= -1  # hop to the lower sheet without touching the cone
        with pytest.raises(BandTrackingError):
            berry_phase_loop(ParameterPath(pts))

    def test_overlap_threshold(self):
        V = np.array([[1, 0], [0.3, 0.0], [1, 0]], dtype=complex)
        with pytest.raises(BandTrackingError):
            _overlap_phases(V, np.ones(3))

    def test_refinement_ladder(self):
        res, ladder = refine_loop_phase(lambda n: ParameterPath.theta_circle(0.5, n), n0=256, tol=1e-6)
        assert abs(ladder[-1][1] - ladder[-2][1]) < 1e-6
        assert abs(res.phase_unreduced - loop_phase_exact(0.5)) <= 1e-5

    def test_refinement_cap_warns(self):
        with pytest.warns(RuntimeWarning):
            refine_loop_phase(lambda n: ParameterPath.theta_circle(0.7, n), n0=64, tol=1e-12, n_max=512)


class TestCurvature:
    def test_kubo_agrees_with_curl(self, rng):
        for _ in range(20):
            R = rng.normal(size=3)
            R[2] = np.sign(R[2]) * (np.hypot(R[0], R[1]) * 1.5 + 0.2)
            for band in (0, 1):
                B = curvature(R, band)
                Bk = curvature_kubo(R, band)
                assert np.linalg.norm(B - Bk) <= 1e-5 * np.linalg.norm(Bk)

    def test_divergence_free(self):
        c = np.array([0.3, 0.2, 2.0])
        axes = [c[k] + 0.01 * np.arange(-3, 4) for k in range(3)]
        g = curvature_map(axes)
        assert g.relative_divergence() <= 1e-4
        assert np.max(g.direction_misalignment()) <= 1e-3
        assert g.reliable.all()

    def test_axial_symmetry(self):
        R0 = np.array([0.4, 0.0, 1.3])
        mags = []
        for phi in np.linspace(0, 2 * np.pi, 7):
            c, s = np.cos(phi), np.sin(phi)
            R = np.array([c * R0[0] - s * R0[1], s * R0[0] + c * R0[1], R0[2]])
            mags.append(np.linalg.norm(curvature(R, 0)))
        assert np.ptp(mags) <= 1e-6 * np.mean(mags)

    def test_far_region_flux_density(self):
        g = curvature_map([[0.0], [0.0], [1.0, 2.0, 5.0]], band=0)
        np.testing.assert_allclose(np.abs(g.flux_density), 0.5, rtol=1e-6)
        B = np.linalg.norm(g.B, axis=-1).ravel()
        np.testing.assert_allclose(B, 0.5 / np.array([1.0, 2.0, 5.0]) ** 2, rtol=1e-6)
        g1 = curvature_map([[0.0], [0.0], [1.0]], band=1)
        assert np.sign(g1.flux_density.item()) == -np.sign(g.flux_density[0, 0, 0])

    def test_quality_flag_near_cone(self):
        axes = [np.linspace(0, 0.95, 191), np.array([0.0]), np.array([1.0])]
        g = curvature_map(axes)
        assert g.reliable[0, 0, 0] and not g.reliable[-1, 0, 0]

    def test_grid_on_cone_rejected(self):
        with pytest.raises(ConeCrossingError):
            curvature_map([[1.0], [0.0], [1.0]])


class TestFluxDensity:
    def test_closed_form_values(self):
        assert closed_form_flux_density(0.0) == pytest.approx(0.5)
        assert closed_form_flux_density(np.pi / 6) == pytest.approx((4 / 3) ** 1.5 / (2 * np.sqrt(2 / 3)))
        assert closed_form_flux_density(np.pi / 6) == pytest.approx(0.9428, abs=1e-4)
        assert closed_form_flux_density(np.pi / 6, band=1) == pytest.approx(-0.9428, abs=1e-4)

    def test_closed_form_diverges(self):
        vals = closed_form_flux_density(np.pi / 4 - np.array([1e-2, 1e-4, 1e-6]))
        assert np.all(np.diff(vals) > 0) and vals[-1] > 100

    @pytest.mark.parametrize("theta", [0.0, 0.2, 0.4, 0.6, 0.7])
    def test_measured_matches_derived(self, theta):
        d, _ = measured_flux_density(theta, 0)
        assert d == pytest.approx(derived_flux_density(theta), rel=1e-8)

    def test_measured_matches_curvature_map(self):
        R = np.array([np.sin(0.4), 0, np.cos(0.4)])
        g = curvature_map([[R[0]], [R[1]], [R[2]]])
        # curl stencil error is O(delta^2) with delta = 1e-3
        assert g.flux_density.item() == pytest.approx(measured_flux_density(0.4)[0], rel=1e-5)

    def test_profile_both_columns(self):
        prof = flux_density_profile([0.0, np.pi / 6, 0.6], n0=256, tol=1e-6)
        np.testing.assert_allclose(prof.closed_form[:, 0], closed_form_flux_density(prof.theta))
        np.testing.assert_allclose(prof.closed_form[:, 1], -prof.closed_form[:, 0])
        np.testing.assert_allclose(prof.measured[:, 0], derived_flux_density(prof.theta), rtol=1e-6)
        np.testing.assert_allclose(prof.measured[:, 1], -prof.measured[:, 0], rtol=1e-6)
        assert prof.converged.all()
        # the two columns disagree in sign and in their near-cone exponent
        assert np.all(prof.ratio[:, 0] < 0)
        assert abs(prof.ratio[0, 0]) == pytest.approx(1, rel=1e-6)

    def test_profile_rejects_cone(self):
        with pytest.raises(ValueError):
            flux_density_profile([np.pi / 4])
        with pytest.raises(ValueError):
            measured_flux_density(0.8)


class TestTotalFlux:
    def test_zero_cap(self):
        assert total_flux(theta_max=0.0).measured_quadrature == 0
        assert cap_flux(0.0) == 0

    def test_small_cap_vanishes(self):
        tf = total_flux(theta_max=1e-3, resolution=256, nodes=4, ladder_rungs=4)
        assert abs(tf.measured_quadrature) < 1e-5

    def test_measured_at_default_theta_max(self):
        tm = 0.75 * np.pi / 4
        tf0 = total_flux(0, tm, resolution=1024, ladder_rungs=5)
        tf1 = total_flux(1, tm, resolution=1024, ladder_rungs=5)
        exact = 2 * loop_phase_exact(tm)
        assert tf0.measured_stokes == pytest.approx(exact, abs=1e-6)
        assert tf0.measured_quadrature == pytest.approx(exact, abs=1e-5)
        assert tf0.upper == pytest.approx(tf0.lower, abs=1e-6)
        assert tf1.measured_quadrature == pytest.approx(-tf0.measured_quadrature, abs=1e-6)
        assert tf0.closed_form == pytest.approx(-tf1.closed_form)
        assert tf0.closed_form == pytest.approx(1.608, abs=1e-3)

    def test_extrapolations(self):
        tf = total_flux(0, resolution=1024, nodes=4, ladder_rungs=8)
        cf = tf.closed_form_extrapolation
        assert cf["converged"] and cf["value"] == pytest.approx(2 * np.pi, abs=1e-3)
        m = tf.measured_extrapolation
        assert not m["converged"]
        assert m["divergence_exponent"] == pytest.approx(0.5, abs=0.02)

    def test_rejects_cone(self):
        with pytest.raises(ValueError):
            total_flux(theta_max=np.pi / 4)


class TestAdiabaticSweep:
    def test_static_path(self):
        p = ParameterPath(np.array([[0.2, 0.1, 1.0], [0.2, 0.1, 1.0]]))
        r = adiabatic_sweep(p, 10.0)
        np.testing.assert_allclose(r.fidelity, 1, atol=1e-12)
        assert r.final_infidelity <= 1e-12
        assert abs(r.geometric_phase) <= 1e-9

    def test_slow_circle(self):
        path = ParameterPath.theta_circle(0.3, 256)
        r = adiabatic_sweep(path, 200)
        assert r.final_infidelity <= 1e-2
        assert r.gap_min >= 1
        assert np.min(r.fidelity) >= 1 - 1e-12  # space-like band: |c_0|^2 - |c_1|^2 = 1

    def test_geometric_phase(self):
        path = ParameterPath.theta_circle(0.3, 256)
        beta, r1, r2 = extrapolated_geometric_phase(path, 200, 400)
        ref = berry_phase_loop(path).phase
        assert abs(_wrap(beta - ref)) <= 5e-2
        assert abs(_wrap(r2.geometric_phase - ref)) <= 5e-2

    def test_fast_sweep_breaks_adiabaticity(self):
        r = adiabatic_sweep(ParameterPath.theta_circle(0.3, 256), 1.0)
        assert r.peak_infidelity() > 0.1

    def test_doubling_ratio(self):
        path = ParameterPath.theta_circle(0.3, 256)
        inf = [adiabatic_sweep(path, T).final_infidelity for T in (100, 200, 400)]
        ratios = np.array(inf[:-1]) / np.array(inf[1:])
        assert np.all((ratios >= 1.5) & (ratios <= 3))

    def test_lower_band(self):
        path = ParameterPath.theta_circle(0.3, 256)
        r = adiabatic_sweep(path, 200, band=1)
        assert r.final_infidelity <= 1e-2

    def test_bad_inputs(self):
        with pytest.raises(ValueError):
            adiabatic_sweep(ParameterPath.theta_circle(0.3, 32), 0)
