"""Non-Hermitian analysis of the collective mechanical modes.

The co-rotating mode amplitudes obey d/dt (a1, a2) = -i H_nh (a1, a2) + noise
with a traceless 2x2 dynamical matrix built from the mechanical detuning and
the reciprocal/antireciprocal coupling rates.  This module provides the
matrix, its eigenfrequencies and exceptional points, the broken/unbroken
symmetry classification, the coupling-regime flags of the (phi, kd) map, and
the stationary occupation of the damped collective mode.
"""

import warnings
from dataclasses import dataclass

import numpy as np

from .linearize import CouplingSet, SystemParams

PT_UNBROKEN = "PT-unbroken"
PT_BROKEN = "PT-broken"
PT_EXCEPTIONAL = "exceptional"

EP_GAP_RTOL = 1e-8          # eigenvalue gap below this (times the rate scale)
EP_CONDITION_MIN = 1e6      # eigenvector condition number above this


class RWAValidityWarning(UserWarning):
    """Coupling rates or detuning are not small against the trap frequency."""


@dataclass(frozen=True)
class ModeSpectrum:
    """Dynamical matrix with its eigen-decomposition and phase label."""

    H_nh: np.ndarray
    frequencies: tuple
    right_vectors: np.ndarray
    classification: str


@dataclass(frozen=True)
class RegimeLabel:
    """Coupling-regime flags of one point of the (phi, kd) map."""

    reciprocal: bool
    directional: bool
    antireciprocal: bool
    recoil_correlated: bool
    dominant: str

    @property
    def flags(self):
        return {
            "reciprocal": self.reciprocal,
            "directional": self.directional,
            "antireciprocal": self.antireciprocal,
            "recoil-correlated": self.recoil_correlated,
        }


def dynamical_matrix(cs: CouplingSet, sp: SystemParams | None = None):
    """Traceless non-Hermitian matrix generating the co-rotating mode pair.

    Warns when the rotating-wave approximation is strained (rates or detuning
    not small against the mean trap frequency).
    """
    if sp is not None:
        domega = sp.detuning_delta_omega
        scale = max(abs(cs.g_r), abs(cs.g_a), abs(domega))
        if scale > 0.1 * sp.mean_frequency_omega:
            warnings.warn(
                "coupling rates/detuning are not small against the trap "
                "frequency; rotating-wave description is strained",
                RWAValidityWarning, stacklevel=2)
    else:
        domega = 0.0
    gr, ga = cs.g_r, cs.g_a
    return np.array([
        [-domega / 2 + ga, -gr - ga],
        [-gr + ga, domega / 2 - ga],
    ], dtype=complex)


def eigenfrequencies(cs: CouplingSet, sp: SystemParams | None = None,
                     detuning=None):
    """Closed-form eigenfrequency pair (omega_plus, omega_minus).

    omega_plus carries Re >= 0 (and Im >= 0 on the imaginary axis); the pair
    is exactly opposite because the dynamical matrix is traceless, so the
    branch is continuous through the exceptional points where both vanish.
    """
    domega = _pick_detuning(sp, detuning)
    disc = domega**2 + 4 * cs.g_r**2 - 4 * cs.g_a * domega
    root = 0.5 * np.sqrt(complex(disc))
    return root, -root


def _pick_detuning(sp, detuning):
    if detuning is not None:
        return float(detuning)
    if sp is not None:
        return sp.detuning_delta_omega
    return 0.0


def mode_spectrum(cs: CouplingSet, sp: SystemParams | None = None,
                  detuning=None):
    """Numerical eigen-decomposition with broken/unbroken classification."""
    domega = _pick_detuning(sp, detuning)
    h = np.array([
        [-domega / 2 + cs.g_a, -cs.g_r - cs.g_a],
        [-cs.g_r + cs.g_a, domega / 2 - cs.g_a],
    ], dtype=complex)
    vals, vecs = np.linalg.eig(h)
    order = np.lexsort((vals.imag, vals.real))[::-1]  # omega_plus first
    vals, vecs = vals[order], vecs[:, order]
    scale = max(abs(cs.g_r), abs(cs.g_a), abs(domega), abs(cs.G), 1e-300)
    gap = abs(vals[0] - vals[1])
    cond = np.linalg.cond(vecs)
    if gap < EP_GAP_RTOL * scale and cond > EP_CONDITION_MIN:
        label = PT_EXCEPTIONAL
    elif np.max(np.abs(vals.imag)) > EP_GAP_RTOL * scale:
        label = PT_BROKEN
    else:
        label = PT_UNBROKEN
    return ModeSpectrum(H_nh=h, frequencies=(complex(vals[0]), complex(vals[1])),
                        right_vectors=vecs, classification=label)


def exceptional_points(cs: CouplingSet):
    """Detunings where the eigenvalues (and eigenvectors) coalesce:
    d_omega = 2 g_a +/- 2 sqrt(g_a^2 - g_r^2); empty for |g_a| < |g_r|.

    Each returned root is verified by numerical coalescence of the dynamical
    matrix (eigenvalue gap and eigenvector condition number).
    """
    ga, gr = cs.g_a, cs.g_r
    discr = ga**2 - gr**2
    if discr < 0:
        return []
    root = np.sqrt(discr)
    candidates = [2 * ga] if root == 0 else [2 * ga - 2 * root, 2 * ga + 2 * root]
    points = []
    for domega in candidates:
        spec = mode_spectrum(cs, detuning=domega)
        if spec.classification != PT_EXCEPTIONAL:
            raise RuntimeError(
                f"analytic exceptional point {domega:g} failed numerical "
                f"coalescence verification")
        points.append(float(domega))
    return points


def classify_regime(cs: CouplingSet, rtol=1e-9):
    """Coupling-regime flags from the rate inequalities of the (phi, kd) map.

    The strict inequalities are evaluated with a relative margin rtol so that
    exact ties (the pure points, where two rates coincide) resolve to False as
    they do in exact arithmetic.  Dominant-label precedence when several flags
    hold: directional > antireciprocal > reciprocal > recoil-correlated, with
    "mixed" when no inequality holds (documented convention; the inequalities
    themselves do not resolve overlaps).
    """
    gr, ga = cs.g_r, cs.g_a
    re_d12 = cs.D[0, 1].real
    gp, gm = abs(gr + ga), abs(gr - ga)
    margin = rtol * max(abs(gr), abs(ga), abs(re_d12), 1e-300)
    reciprocal = abs(gr) > abs(ga) + margin and abs(gr) > abs(re_d12) + margin
    directional = gp > 2 * gm + margin or gm > 2 * gp + margin
    antireciprocal = abs(ga) > abs(gr) + margin \
        and abs(ga) > abs(re_d12) + margin
    recoil = abs(re_d12) > 2 * max(gp, gm) + margin
    for name, flag in (("directional", directional),
                       ("antireciprocal", antireciprocal),
                       ("reciprocal", reciprocal),
                       ("recoil-correlated", recoil)):
        if flag:
            dominant = name
            break
    else:
        dominant = "mixed"
    return RegimeLabel(reciprocal=reciprocal, directional=directional,
                       antireciprocal=antireciprocal, recoil_correlated=recoil,
                       dominant=dominant)


def pt_symmetry_map_spectrum(cs: CouplingSet, detuning):
    """Spectrum at the generalized-symmetry image point (mode swap combined
    with detuning and phase reversal: d_omega -> -d_omega, g_a -> -g_a)."""
    image = CouplingSet(G=cs.G, g_r=cs.g_r, g_a=-cs.g_a, D=cs.D.conj())
    return mode_spectrum(image, detuning=-detuning)


def stationary_occupation_damped_mode(cs: CouplingSet, D11, kd):
    """Saturation occupation of the decaying collective mode (a1 - i a2)/sqrt2
    in the maximally damped configuration g_r = 0, d_omega = 2 g_a:
    D11 kd / 2G - 1/2 (>= 0 whenever recoil exceeds the coupling rate)."""
    scale = max(abs(cs.g_a), abs(cs.G) / kd, 1e-300)
    if abs(cs.g_r) > 1e-6 * scale:
        raise ValueError("damped-mode saturation formula requires g_r = 0")
    if cs.G <= 0:
        raise ValueError("requires a nonzero coupling scale G")
    occupation = D11 * kd / (2 * cs.G) - 0.5
    if occupation < 0:
        raise ValueError("recoil below coupling rate: the damped mode would "
                         "settle under the formula's validity floor")
    return float(occupation)
