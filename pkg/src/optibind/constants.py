"""Physical constants used throughout the package (strict SI)."""

from dataclasses import dataclass

import scipy.constants as _sc


@dataclass(frozen=True)
class Constants:
    """Vacuum permittivity, reduced Planck constant and speed of light.

    Fixed at the CODATA values shipped with scipy; all three are strictly
    positive by construction.
    """

    epsilon0: float = _sc.epsilon_0
    hbar: float = _sc.hbar
    c: float = _sc.c

    def __post_init__(self):
        if not (self.epsilon0 > 0 and self.hbar > 0 and self.c > 0):
            raise ValueError("physical constants must be strictly positive")


CONSTANTS = Constants()
