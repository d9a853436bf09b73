import numpy as np
import pytest

from optibind import (
    GaussianState,
    build_drift_diffusion,
    classify_regime,
    couplings,
    dynamical_matrix,
    eigenfrequencies,
    evolve_gaussian,
    exceptional_points,
    mode_spectrum,
    standard_system,
    stationary_occupation_damped_mode,
)
from optibind.modes import (
    PT_EXCEPTIONAL,
    RWAValidityWarning,
    pt_symmetry_map_spectrum,
)

from test_gaussian import synthetic_couplings, synthetic_system


class TestDynamicalMatrix:
    def test_uncoupled_is_detuning_diagonal(self):
        cs = synthetic_couplings(d11=1.0)
        sp = synthetic_system(omega=1e4, detuning=0.5)
        h = dynamical_matrix(cs, sp)
        np.testing.assert_allclose(h, np.diag([-0.25, 0.25]), atol=1e-15)

    def test_matched_detuning_gives_imaginary_pair(self):
        # g_r = 0, detuning = 2 g_a: eigenvalues +/- i g_a
        ga = 0.3
        cs = synthetic_couplings(g_a=ga, d11=1.0)
        spec = mode_spectrum(cs, detuning=2 * ga)
        got = sorted(spec.frequencies, key=lambda z: z.imag)
        assert got[1] == pytest.approx(1j * ga, abs=1e-12)
        assert got[0] == pytest.approx(-1j * ga, abs=1e-12)

    def test_reciprocal_only_is_hermitian(self):
        cs = synthetic_couplings(g_r=0.4, d11=1.0)
        h = dynamical_matrix(cs, synthetic_system(omega=1e4, detuning=0.1))
        np.testing.assert_allclose(h, h.conj().T)

    def test_traceless(self):
        cs = synthetic_couplings(g_r=0.2, g_a=0.7, d11=1.0)
        h = dynamical_matrix(cs, synthetic_system(omega=1e4, detuning=0.9))
        assert abs(np.trace(h)) < 1e-15

    def test_rwa_warning(self):
        cs = synthetic_couplings(g_r=0.5, d11=1.0)
        with pytest.warns(RWAValidityWarning):
            dynamical_matrix(cs, synthetic_system(omega=1.0))


class TestEigenfrequencies:
    def test_reciprocal_real_pair(self):
        cs = synthetic_couplings(g_r=0.3, d11=1.0)
        wp, wm = eigenfrequencies(cs, detuning=0.0)
        assert wp == pytest.approx(0.3) and wm == pytest.approx(-0.3)

    def test_broken_phase_conjugate_pair(self):
        ga, gr = 0.5, 0.2
        cs = synthetic_couplings(g_r=gr, g_a=ga, d11=1.0)
        wp, wm = eigenfrequencies(cs, detuning=2 * ga)
        expect = np.sqrt(ga**2 - gr**2)
        assert wp == pytest.approx(1j * expect, abs=1e-12)
        assert wm == pytest.approx(-1j * expect, abs=1e-12)

    def test_large_detuning_asymptotics(self):
        cs = synthetic_couplings(g_r=0.1, g_a=0.05, d11=1.0)
        for dw in (1e3, -1e3):
            wp, _ = eigenfrequencies(cs, detuning=dw)
            assert wp.real == pytest.approx(abs(dw) / 2, rel=1e-3)

    def test_closed_form_matches_numerics(self):
        rng = np.random.default_rng(6)
        for _ in range(50):
            cs = synthetic_couplings(g_r=rng.normal(), g_a=rng.normal(),
                                     d11=5.0)
            dw = rng.normal() * 2
            analytic = eigenfrequencies(cs, detuning=dw)
            numeric = mode_spectrum(cs, detuning=dw).frequencies
            scale = max(1.0, max(abs(z) for z in analytic))
            for a in analytic:
                assert min(abs(a - b) for b in numeric) < 1e-12 * scale

    def test_opposite_pair_always(self):
        rng = np.random.default_rng(13)
        for _ in range(30):
            cs = synthetic_couplings(g_r=rng.normal(), g_a=rng.normal(),
                                     d11=3.0)
            wp, wm = mode_spectrum(cs, detuning=rng.normal()).frequencies
            assert wp == pytest.approx(-wm, abs=1e-12 * max(1.0, abs(wp)))


class TestExceptionalPoints:
    def test_unbroken_has_none(self):
        cs = synthetic_couplings(g_r=0.5, g_a=0.2, d11=1.0)
        assert exceptional_points(cs) == []

    def test_pure_antireciprocal_roots(self):
        ga = 0.4
        cs = synthetic_couplings(g_a=ga, d11=1.0)
        pts = exceptional_points(cs)
        np.testing.assert_allclose(pts, [0.0, 4 * ga], atol=1e-12)

    def test_degenerate_single_root(self):
        cs = synthetic_couplings(g_r=0.3, g_a=0.3, d11=1.0)
        pts = exceptional_points(cs)
        np.testing.assert_allclose(pts, [0.6], atol=1e-12)

    def test_coalescence_verified_numerically(self):
        rng = np.random.default_rng(21)
        for _ in range(10):
            gr = rng.uniform(-0.5, 0.5)
            ga = np.sign(rng.normal()) * (abs(gr) + rng.uniform(0.05, 1.0))
            cs = synthetic_couplings(g_r=gr, g_a=ga, d11=2.0)
            for dw in exceptional_points(cs):
                spec = mode_spectrum(cs, detuning=dw)
                assert spec.classification == PT_EXCEPTIONAL
                assert np.linalg.cond(spec.right_vectors) > 1e6


class TestPhaseClassification:
    def test_unbroken_region_real_everywhere(self):
        rng = np.random.default_rng(17)
        for _ in range(20):
            gr = rng.uniform(0.2, 1.0)
            ga = rng.uniform(-1, 1) * gr  # |g_a| <= |g_r|
            cs = synthetic_couplings(g_r=gr, g_a=ga, d11=2.0)
            for dw in rng.normal(size=8) * 4:
                wp, wm = eigenfrequencies(cs, detuning=dw)
                assert wp.imag == 0 and wm.imag == 0

    def test_broken_window_degenerate_real_parts(self):
        gr, ga = 0.2, 0.6
        cs = synthetic_couplings(g_r=gr, g_a=ga, d11=1.0)
        lo, hi = exceptional_points(cs)
        for dw in np.linspace(lo + 1e-6, hi - 1e-6, 9):
            wp, wm = eigenfrequencies(cs, detuning=dw)
            assert wp.real == pytest.approx(wm.real, abs=1e-12)
            assert wp.imag > 0
        for dw in (lo - 0.1, hi + 0.1):
            wp, wm = eigenfrequencies(cs, detuning=dw)
            assert wp.imag == 0

    def test_generalized_symmetry_spectrum_invariant(self):
        rng = np.random.default_rng(3)
        for _ in range(20):
            cs = synthetic_couplings(g_r=rng.normal(), g_a=rng.normal(),
                                     d11=3.0, re_d12=0.1)
            dw = rng.normal()
            direct = mode_spectrum(cs, detuning=dw).frequencies
            image = pt_symmetry_map_spectrum(cs, dw).frequencies
            for a in direct:
                assert min(abs(a - b) for b in image) < 1e-12


class TestRegimeLabels:
    def test_point_reciprocal(self):
        sp = standard_system(kd=60 * np.pi, phi=0.0)
        label = classify_regime(couplings(sp))
        assert label.flags == {"reciprocal": True, "directional": False,
                               "antireciprocal": False,
                               "recoil-correlated": False}
        assert label.dominant == "reciprocal"

    def test_point_directional(self):
        sp = standard_system(kd=60 * np.pi + 3 * np.pi / 4, phi=3 * np.pi / 4)
        cs = couplings(sp)
        assert cs.g_r == pytest.approx(cs.g_a, rel=1e-9)
        label = classify_regime(cs)
        assert label.directional and not label.reciprocal
        assert not label.antireciprocal and not label.recoil_correlated
        assert label.dominant == "directional"

    def test_point_antireciprocal(self):
        sp = standard_system(kd=60 * np.pi + np.pi / 2, phi=np.pi / 2)
        label = classify_regime(couplings(sp))
        assert label.antireciprocal and label.dominant == "antireciprocal"
        assert not (label.reciprocal or label.directional
                    or label.recoil_correlated)

    def test_point_recoil_correlated(self):
        sp = standard_system(kd=60 * np.pi + np.pi / 2, phi=0.0)
        label = classify_regime(couplings(sp))
        assert label.recoil_correlated
        assert label.dominant == "recoil-correlated"
        assert not (label.reciprocal or label.directional
                    or label.antireciprocal)

    def test_mixed_when_nothing_dominates(self):
        cs = synthetic_couplings(g_r=1.0, g_a=0.2, d11=3.0, re_d12=1.0)
        label = classify_regime(cs)
        assert label.dominant == "mixed"
        assert not any(label.flags.values())

    def test_directional_precedence(self):
        cs = synthetic_couplings(g_r=1.0, g_a=0.8, d11=3.0, re_d12=0.0)
        label = classify_regime(cs)
        # reciprocal and directional both hold; directional wins
        assert label.reciprocal and label.directional
        assert label.dominant == "directional"


class TestDampedModeOccupation:
    def test_boundary_value(self):
        cs = synthetic_couplings(g_a=0.01, d11=0.01, G=1.0)
        assert stationary_occupation_damped_mode(cs, D11=0.01, kd=100.0) == 0.0

    def test_formula_value(self):
        cs = synthetic_couplings(g_a=0.01, d11=0.1, G=1.0)
        assert stationary_occupation_damped_mode(cs, D11=0.1, kd=100.0) == \
            pytest.approx(4.5)

    def test_requires_vanishing_reciprocal_rate(self):
        cs = synthetic_couplings(g_r=0.02, g_a=0.01, d11=0.1, G=1.0)
        with pytest.raises(ValueError):
            stationary_occupation_damped_mode(cs, D11=0.1, kd=100.0)

    def test_dynamical_saturation(self):
        # Gaussian propagation of the damped collective mode converges to the
        # formula within 1%
        kd = 100.0
        ga = 1.0
        omega = 2e4
        for ratio in (3.0, 10.0):
            d11 = ratio * ga  # D11 = ratio * G/kd with g_a = G/kd
            cs = synthetic_couplings(g_a=ga, d11=d11, G=ga * kd)
            target = stationary_occupation_damped_mode(cs, D11=d11, kd=kd)
            sp = synthetic_system(omega=omega, detuning=2 * ga)
            dd = build_drift_diffusion(cs, sp)
            t = 4.0 / ga
            out = evolve_gaussian(GaussianState.vacuum(2), dd, t)
            occ = _damped_mode_occupation(out, omega, t)
            assert occ == pytest.approx(target, rel=0.01)


def _damped_mode_occupation(state, omega, t):
    """Occupation of (a1 - i a2)/sqrt2 from the lab-frame covariance."""
    c, s = np.cos(omega * t), np.sin(omega * t)
    rot = np.array([[c, -s], [s, c]])
    R = np.kron(np.eye(2), rot)
    cov = R @ state.cov @ R.T
    xm = np.array([1.0, 0.0, 0.0, 1.0]) / np.sqrt(2)   # (X1 + P2)/sqrt2
    pm = np.array([0.0, 1.0, -1.0, 0.0]) / np.sqrt(2)  # (P1 - X2)/sqrt2
    return 0.5 * (xm @ cov @ xm + pm @ cov @ pm) - 0.5
