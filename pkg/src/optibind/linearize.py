"""Linearized description of two deeply trapped, optically bound particles.

Derives the rate constants that govern the quadratic (Gaussian) dynamics from
the microscopic layer: the overall coupling scale G, the reciprocal and
antireciprocal coupling rates g_r and g_a, the 2x2 Hermitian recoil diffusion
matrix D, the trap-frequency shifts, and the detection/squeezed-vacuum
reductions of the local recoil rates.  All rates are angular (rad/s resp. 1/s);
conversion to Hz happens only at the CLI boundary.
"""

import warnings
from dataclasses import dataclass, field

import numpy as np

from .constants import CONSTANTS
from .fields import Particle, TweezerPair, integrate_sphere, make_tweezer_pair


class FarFieldValidityWarning(UserWarning):
    """Raised when kd is too small for the 1/kd far-field rate formulas."""


FAR_FIELD_KD = 10.0


@dataclass(frozen=True)
class SystemParams:
    """Physical configuration of the two-tweezer system.

    Trap frequencies follow from m*omega_j^2 = alpha*|E_j|^2 / (2 z_R^2); when
    mean_frequency_omega / detuning_delta_omega are supplied explicitly they
    are validated against that relation.  eta_det, squeeze_r and overlap_zeta
    configure the recoil-reduction strategies (homodyne detection efficiency
    and squeezed-vacuum injection with mode overlap zeta).
    """

    tw: TweezerPair
    p: Particle
    mean_frequency_omega: float
    detuning_delta_omega: float
    relative_phase_phi: float
    eta_det: float = 0.0
    squeeze_r: float = 0.0
    overlap_zeta: complex = 1.0 + 0j

    def __post_init__(self):
        if self.mean_frequency_omega <= 0:
            raise ValueError("mean frequency must be positive")
        if abs(self.detuning_delta_omega) >= self.mean_frequency_omega:
            raise ValueError("|detuning| must stay below the mean frequency")
        if not -np.pi < self.relative_phase_phi <= np.pi + 1e-12:
            raise ValueError("relative phase must lie in (-pi, pi]")
        if not 0.0 <= self.eta_det <= 1.0:
            raise ValueError("detection efficiency must lie in [0, 1]")
        if self.squeeze_r < 0:
            raise ValueError("squeezing parameter must be non-negative")
        if abs(self.overlap_zeta) > 1.0 + 1e-12:
            raise ValueError("|mode overlap| cannot exceed 1")

    @property
    def kd(self):
        return self.tw.kd

    @property
    def trap_frequencies(self):
        """(omega_1, omega_2) with omega_1 = omega - d_omega/2."""
        w, dw = self.mean_frequency_omega, self.detuning_delta_omega
        return w - dw / 2, w + dw / 2

    def field_magnitudes(self):
        return (float(np.linalg.norm(self.tw.E1)),
                float(np.linalg.norm(self.tw.E2)))


def trap_frequency(field_magnitude, tw: TweezerPair, p: Particle):
    """Axial trap frequency from the harmonic expansion of the local tweezer:
    m omega^2 = alpha |E|^2 / (2 z_R^2)."""
    return np.sqrt(p.alpha * field_magnitude**2
                   / (2 * p.mass * tw.rayleigh_zR**2))


def system_from_tweezers(tw: TweezerPair, p: Particle, *, eta_det=0.0,
                         squeeze_r=0.0, overlap_zeta=1.0 + 0j,
                         mean_frequency_omega=None,
                         detuning_delta_omega=None, frequency_rtol=1e-6):
    """Assemble SystemParams, deriving frequencies and relative phase from the
    tweezer amplitudes (particle 1 at frequency omega - d_omega/2)."""
    e1 = float(np.linalg.norm(tw.E1))
    e2 = float(np.linalg.norm(tw.E2))
    w1 = trap_frequency(e1, tw, p)
    w2 = trap_frequency(e2, tw, p)
    omega, domega = 0.5 * (w1 + w2), w2 - w1
    if mean_frequency_omega is not None:
        if abs(mean_frequency_omega - omega) > frequency_rtol * omega:
            raise ValueError(
                f"supplied mean frequency {mean_frequency_omega:g} is "
                f"inconsistent with the trap relation ({omega:g})")
        omega = mean_frequency_omega
    if detuning_delta_omega is not None:
        if abs(detuning_delta_omega - domega) > frequency_rtol * omega:
            raise ValueError("supplied detuning is inconsistent with the "
                             "trap relation")
        domega = detuning_delta_omega
    return SystemParams(
        tw=tw, p=p, mean_frequency_omega=omega,
        detuning_delta_omega=domega,
        relative_phase_phi=tw.relative_phase(),
        eta_det=eta_det, squeeze_r=squeeze_r, overlap_zeta=overlap_zeta)


def standard_system(kd=60 * np.pi, phi=0.0, *, wavelength=1.55e-6,
                    waist_w=1.0e-6, field_amp1=2.0e6, field_amp2=None,
                    pol_angle_theta=0.0, radius=50e-9, density=2200.0,
                    rel_permittivity=2.1, eta_det=0.0, squeeze_r=0.0,
                    overlap_zeta=1.0 + 0j):
    """Silica-nanoparticle reference configuration at a given (kd, phi)."""
    if field_amp2 is None:
        field_amp2 = field_amp1
    k = 2 * np.pi / wavelength
    alpha = 4 * np.pi * CONSTANTS.epsilon0 * radius**3 \
        * (rel_permittivity - 1) / (rel_permittivity + 2)
    mass = density * 4 / 3 * np.pi * radius**3
    tw = make_tweezer_pair(wavelength, waist_w, kd / k, field_amp1,
                           field_amp2, phi1=phi, phi2=0.0,
                           pol_angle_theta=pol_angle_theta)
    return system_from_tweezers(tw, Particle(alpha=alpha, mass=mass),
                                eta_det=eta_det, squeeze_r=squeeze_r,
                                overlap_zeta=overlap_zeta)


@dataclass(frozen=True)
class CouplingSet:
    """Linearized rates: coupling scale G, reciprocal/antireciprocal rates,
    Hermitian recoil diffusion matrix D and the trap-frequency shifts."""

    G: float
    g_r: float
    g_a: float
    D: np.ndarray

    def __post_init__(self):
        D = np.asarray(self.D, dtype=complex)
        if D.shape != (2, 2):
            raise ValueError("D must be 2x2")
        if not np.allclose(D, D.conj().T, rtol=0, atol=1e-12 * _scale(D)):
            raise ValueError("D must be Hermitian")
        if D[0, 0].real < 0 or D[1, 1].real < 0:
            raise ValueError("diagonal recoil rates must be non-negative")
        object.__setattr__(self, "D", D)

    @property
    def freq_shift_1(self):
        return self.g_r + self.g_a

    @property
    def freq_shift_2(self):
        return self.g_r - self.g_a

    @property
    def positivity_margin(self):
        """D11*D22 - |D12|^2; positive for a completely positive evolution."""
        return float((self.D[0, 0] * self.D[1, 1]).real
                     - abs(self.D[0, 1]) ** 2)


def _scale(m):
    s = np.max(np.abs(m))
    return s if s > 0 else 1.0


def coupling_constant_G(sp: SystemParams):
    """Overall optical binding rate scale (rad/s)."""
    e1, e2 = sp.field_magnitudes()
    k = sp.tw.wavenumber_k
    return (sp.p.alpha**2 * k**5 * e1 * e2
            * np.cos(sp.tw.pol_angle_theta) ** 2
            / (16 * np.pi * sp.p.mass * CONSTANTS.epsilon0
               * sp.mean_frequency_omega))


def coupling_rates(sp: SystemParams):
    """Reciprocal and antireciprocal coupling rates (g_r, g_a) in rad/s."""
    _check_far_field(sp.kd)
    g = coupling_constant_G(sp) / sp.kd
    phi = sp.relative_phase_phi
    return (g * np.cos(sp.kd) * np.cos(phi),
            g * np.sin(sp.kd) * np.sin(phi))


def _check_far_field(kd):
    if kd < FAR_FIELD_KD:
        warnings.warn(
            f"kd = {kd:.3g} < {FAR_FIELD_KD:g}: far-field 1/kd rate formulas "
            "are of limited validity", FarFieldValidityWarning, stacklevel=3)


def _local_recoil_rate(field_mag, sp: SystemParams, keep_rayleigh_term):
    """Diagonal recoil diffusion rate from the angular quadrature of the
    squared linear scattering coefficient (k - 1/z_R - k n_z), with the 1/z_R
    Gouy reduction optionally retained."""
    tw, p = sp.tw, sp.p
    k = tw.wavenumber_k
    gouy = 1.0 / tw.rayleigh_zR if keep_rayleigh_term else 0.0
    pol = tw.polarization()
    pref = (k**3 / (2 * CONSTANTS.epsilon0 * CONSTANTS.hbar)) \
        * (p.alpha / (4 * np.pi)) ** 2 \
        * (CONSTANTS.hbar / (p.mass * sp.mean_frequency_omega))

    def integrand(nodes):
        transverse = 1.0 - (nodes @ pol) ** 2
        return transverse * (k - gouy - k * nodes[:, 2]) ** 2

    return 0.5 * pref * field_mag**2 * float(integrate_sphere(integrand))


def diffusion_matrix(sp: SystemParams, *, keep_rayleigh_term=False):
    """2x2 Hermitian recoil diffusion matrix (1/s).

    Off-diagonal from the closed far-field form (shot-noise correlations in
    the real part, antireciprocal coupling rate in the imaginary part);
    diagonals from the angular quadrature of the local linearized scattering
    amplitudes, one per tweezer amplitude.
    """
    _check_far_field(sp.kd)
    g = coupling_constant_G(sp) / sp.kd
    phi = sp.relative_phase_phi
    d12 = g * np.sin(sp.kd) * (np.cos(phi) + 1j * np.sin(phi))
    e1, e2 = sp.field_magnitudes()
    d11 = _local_recoil_rate(e1, sp, keep_rayleigh_term)
    d22 = _local_recoil_rate(e2, sp, keep_rayleigh_term)
    return np.array([[d11, d12], [np.conj(d12), d22]])


def diffusion_offdiagonal_quadrature(sp: SystemParams, *,
                                     keep_rayleigh_term=False):
    """Cross recoil rate D12 from the full angular integral (including the
    e^{i k d n_x} interference phase); far-field cross-check of the closed
    form used by diffusion_matrix."""
    tw, p = sp.tw, sp.p
    k = tw.wavenumber_k
    gouy = 1.0 / tw.rayleigh_zR if keep_rayleigh_term else 0.0
    pol = tw.polarization()
    a1 = complex(tw.E1 @ pol)
    a2 = complex(tw.E2 @ pol)
    pref = (k**3 / (2 * CONSTANTS.epsilon0 * CONSTANTS.hbar)) \
        * (p.alpha / (4 * np.pi)) ** 2 \
        * (CONSTANTS.hbar / (p.mass * sp.mean_frequency_omega))
    kd = sp.kd

    def integrand(nodes):
        transverse = 1.0 - (nodes @ pol) ** 2
        return (transverse * (k - gouy - k * nodes[:, 2]) ** 2
                * np.exp(1j * kd * nodes[:, 0]))

    from .fields import EX
    val = integrate_sphere(integrand, axis=EX, k_delta=kd)
    return 0.5 * pref * a1 * np.conj(a2) * complex(val)


def effective_recoil(D11, sp: SystemParams):
    """Reduced local recoil rate with the enabled strategies composed
    multiplicatively: homodyne detection (1 - eta_det) and squeezed-vacuum
    injection 1 - |zeta|^2 (1 - e^{-r})."""
    factor = (1.0 - sp.eta_det) \
        * (1.0 - abs(sp.overlap_zeta) ** 2 * (1.0 - np.exp(-sp.squeeze_r)))
    return D11 * factor


def couplings(sp: SystemParams, *, keep_rayleigh_term=False):
    """Full linearized CouplingSet for a system configuration."""
    g_r, g_a = coupling_rates(sp)
    return CouplingSet(G=coupling_constant_G(sp), g_r=g_r, g_a=g_a,
                       D=diffusion_matrix(sp,
                                          keep_rayleigh_term=keep_rayleigh_term))
