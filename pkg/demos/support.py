"""Shared helpers for the demo scripts: rate-level synthetic configurations."""

import numpy as np

from optibind import CouplingSet, standard_system


def synthetic_couplings(g_r=0.0, g_a=0.0, d11=0.0, d22=None, re_d12=0.0,
                        G=None):
    """CouplingSet from bare rates with the consistency Im D12 = g_a."""
    if d22 is None:
        d22 = d11
    if G is None:
        G = 100 * max(abs(g_r), abs(g_a), d11, 1e-6)
    D = np.array([[d11, re_d12 + 1j * g_a], [re_d12 - 1j * g_a, d22]])
    return CouplingSet(G=G, g_r=g_r, g_a=g_a, D=D)


def synthetic_system(omega=1.0, detuning=0.0):
    """SystemParams stand-in carrying only the trap frequencies."""
    sp = standard_system(kd=60 * np.pi, phi=0.0)
    object.__setattr__(sp, "mean_frequency_omega", omega)
    object.__setattr__(sp, "detuning_delta_omega", detuning)
    return sp
