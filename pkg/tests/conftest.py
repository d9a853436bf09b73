import numpy as np
import pytest

from optibind import Particle, make_tweezer_pair, standard_system


@pytest.fixture(scope="session")
def particle():
    # 100 nm silica sphere
    return Particle(alpha=6.3e-33, mass=1.15e-18)


@pytest.fixture(scope="session")
def far_field_pair():
    # kd ~ 188.5, waist well below the separation, both tweezers equal
    return make_tweezer_pair(wavelength=1.55e-6, waist_w=1.0e-6,
                             separation_d=60 * np.pi / (2 * np.pi / 1.55e-6),
                             field_amp1=2.0e6, field_amp2=2.0e6)


@pytest.fixture(scope="session")
def reference_system():
    return standard_system(kd=60 * np.pi, phi=0.3)


def pair_at(kd, phi, *, theta=0.0, amp1=2.0e6, amp2=None,
            wavelength=1.55e-6, waist=1.0e-6):
    k = 2 * np.pi / wavelength
    return make_tweezer_pair(wavelength, waist, kd / k, amp1,
                             amp2 if amp2 is not None else amp1,
                             phi1=phi, phi2=0.0, pol_angle_theta=theta)
