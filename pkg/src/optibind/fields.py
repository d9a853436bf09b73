"""Microscopic optics layer for two tweezer-trapped dipolar nanoparticles.

Everything in this module is strict SI and operates on classical positions:
Gaussian tweezer fields, the free-space dipole Green tensor, the induced-dipole
trap and binding potentials, the photon-scattering amplitudes into each
direction/polarization channel, and the mean (Ehrenfest) forces assembled from
those pieces.  All functions are pure; there is no shared mutable state.
"""

from dataclasses import dataclass, field

import numpy as np

from .constants import CONSTANTS

EX = np.array([1.0, 0.0, 0.0])
EY = np.array([0.0, 1.0, 0.0])
EZ = np.array([0.0, 0.0, 1.0])


class QuadratureError(RuntimeError):
    """Angular quadrature failed to converge to the requested tolerance."""

    def __init__(self, message, achieved=None):
        super().__init__(message)
        self.achieved = achieved


@dataclass(frozen=True)
class Particle:
    """Subwavelength sphere in the dipole approximation.

    alpha is the scalar polarizability (C·m²/V), mass in kg; both positive.
    """

    alpha: float
    mass: float

    def __post_init__(self):
        if self.alpha <= 0 or self.mass <= 0:
            raise ValueError("polarizability and mass must be positive")


@dataclass(frozen=True)
class TweezerPair:
    """Two identical-envelope Gaussian tweezers with foci separated along e_x.

    The complex amplitudes E1, E2 (V/m, 3-vectors) carry the tweezer phases;
    both beams propagate along e_z.  pol_angle_theta is the angle such that the
    (shared, linear) polarization makes an angle pi/2 - theta with the
    connecting axis e_x.
    """

    wavenumber_k: float
    waist_w: float
    rayleigh_zR: float
    separation_d: float
    E1: np.ndarray = field(default_factory=lambda: np.zeros(3, complex))
    E2: np.ndarray = field(default_factory=lambda: np.zeros(3, complex))
    pol_angle_theta: float = 0.0

    def __post_init__(self):
        if min(self.wavenumber_k, self.waist_w, self.rayleigh_zR,
               self.separation_d) <= 0:
            raise ValueError("k, w, z_R and d must all be positive")
        object.__setattr__(self, "E1", np.asarray(self.E1, dtype=complex))
        object.__setattr__(self, "E2", np.asarray(self.E2, dtype=complex))

    @property
    def kd(self):
        return self.wavenumber_k * self.separation_d

    @property
    def focus1(self):
        return np.zeros(3)

    @property
    def focus2(self):
        return self.separation_d * EX

    def polarization(self):
        """Unit polarization vector at angle pi/2 - theta to e_x."""
        th = self.pol_angle_theta
        return np.sin(th) * EX + np.cos(th) * EY

    def relative_phase(self):
        """phi = arg(E1·e) - arg(E2·e), mapped to (-pi, pi]."""
        e = self.polarization()
        a1 = complex(self.E1 @ e)
        a2 = complex(self.E2 @ e)
        if a1 == 0 or a2 == 0:
            raise ValueError("relative phase undefined for a zero amplitude")
        phi = np.angle(a1) - np.angle(a2)
        return float(np.angle(np.exp(1j * phi)))


def make_tweezer_pair(wavelength, waist_w, separation_d, field_amp1,
                      field_amp2, phi1=0.0, phi2=0.0, pol_angle_theta=0.0):
    """Convenience constructor: scalar amplitudes and phases on a shared
    linear polarization; Rayleigh range from the paraxial relation."""
    k = 2 * np.pi / wavelength
    zR = 0.5 * k * waist_w**2
    th = pol_angle_theta
    pol = np.sin(th) * EX + np.cos(th) * EY
    return TweezerPair(
        wavenumber_k=k, waist_w=waist_w, rayleigh_zR=zR,
        separation_d=separation_d,
        E1=field_amp1 * np.exp(1j * phi1) * pol,
        E2=field_amp2 * np.exp(1j * phi2) * pol,
        pol_angle_theta=pol_angle_theta,
    )


@dataclass(frozen=True)
class ScatterDirection:
    """Unit propagation direction with one of its two transverse polarizations."""

    n: np.ndarray
    s: int
    t_ns: np.ndarray

    def __post_init__(self):
        n = np.asarray(self.n, float)
        t = np.asarray(self.t_ns, complex)
        if abs(n @ n - 1.0) > 1e-10 or abs(np.vdot(t, t).real - 1.0) > 1e-10:
            raise ValueError("n and t_ns must be unit vectors")
        if abs(t @ n) > 1e-10:
            raise ValueError("t_ns must be orthogonal to n")
        if self.s not in (1, 2):
            raise ValueError("polarization index s must be 1 or 2")
        object.__setattr__(self, "n", n)
        object.__setattr__(self, "t_ns", t)


def polarization_basis(n):
    """Deterministic transverse basis (t_1, t_2) for direction n.

    Spherical unit vectors (theta-hat, phi-hat) of n; at the poles
    (|sin theta| ~ 0) the convention t_1 = e_x, t_2 = e_y * sign(n_z) keeps the
    triad right-handed and reproducible.
    """
    n = np.asarray(n, float)
    rho = np.hypot(n[0], n[1])
    if rho < 1e-12:
        sz = 1.0 if n[2] >= 0 else -1.0
        return sz * EX, sz * EY
    cph, sph = n[0] / rho, n[1] / rho
    ct = n[2]
    t_theta = np.array([ct * cph, ct * sph, -rho])
    t_phi = np.array([-sph, cph, 0.0])
    return t_theta, t_phi


def scatter_direction(n, s):
    """ScatterDirection with the fixed polarization-basis convention."""
    t1, t2 = polarization_basis(n)
    return ScatterDirection(n=np.asarray(n, float), s=s,
                            t_ns=(t1 if s == 1 else t2).astype(complex))


# ---------------------------------------------------------------------------
# Fields and Green tensor
# ---------------------------------------------------------------------------

def tweezer_envelope(r, tw: TweezerPair):
    """Complex Gaussian-beam envelope (1 at the focus), including the Gouy /
    wavefront-curvature prefactor 1/(1 + i z/z_R)."""
    r = np.asarray(r, float)
    q = 1.0 + 1j * r[2] / tw.rayleigh_zR
    return np.exp(-(r[0] ** 2 + r[1] ** 2) / (tw.waist_w**2 * q)) / q


def tweezer_field(r, tw: TweezerPair):
    """Total laser field of the two superposed tweezers at position r (V/m)."""
    r = np.asarray(r, float)
    plane = np.exp(1j * tw.wavenumber_k * r[2])
    return plane * (tw.E1 * tweezer_envelope(r, tw)
                    + tw.E2 * tweezer_envelope(r - tw.focus2, tw))


def green_tensor(r, k):
    """Free-space dipole Green tensor G(r) for r != 0 (units 1/m³).

    Closed form with 1/r³ (near), 1/r² (intermediate) and 1/r (far) terms;
    singular at the origin, which raises a ValueError.
    """
    r = np.asarray(r, float)
    rn = np.linalg.norm(r)
    if rn == 0.0:
        raise ValueError("Green tensor is singular at r = 0")
    outer = np.outer(r, r)
    eye = np.eye(3)
    near = (1.0 - 1j * k * rn) * (3.0 * outer - rn**2 * eye) / rn**5
    far = k**2 * (rn**2 * eye - outer) / rn**3
    return np.exp(1j * k * rn) / (4 * np.pi) * (near + far)


# ---------------------------------------------------------------------------
# Potentials and amplitudes
# ---------------------------------------------------------------------------

def dipole_potential(r1, r2, tw: TweezerPair, p: Particle):
    """Time-averaged dipole trapping potential of both particles (J)."""
    return -p.alpha / 4 * sum(
        float(np.vdot(tweezer_field(r, tw), tweezer_field(r, tw)).real)
        for r in (r1, r2))


def binding_potential(r1, r2, tw: TweezerPair, p: Particle):
    """Conservative optical binding potential (J): induced-dipole interaction
    through the real part of the Green tensor."""
    r1 = np.asarray(r1, float)
    r2 = np.asarray(r2, float)
    if np.array_equal(r1, r2):
        raise ValueError("binding potential undefined at coincident positions")
    e1 = tweezer_field(r1, tw)
    e2 = tweezer_field(r2, tw)
    gre = green_tensor(r1 - r2, tw.wavenumber_k).real
    # j=1,j'=2 and j=2,j'=1 terms are complex conjugates; their sum is real.
    cross = np.conj(e2) @ gre @ e1
    return float(-p.alpha**2 / (4 * CONSTANTS.epsilon0) * 2 * cross.real)


def lindblad_amplitude(direction: ScatterDirection, r1, r2, tw: TweezerPair,
                       p: Particle):
    """Coherent two-particle photon scattering amplitude into (n, s).

    Units sqrt(1/s) per unit solid angle^(1/2); the squared modulus integrated
    over directions and summed over s gives the total scattering rate.
    """
    k = tw.wavenumber_k
    pref = np.sqrt(k**3 / (2 * CONSTANTS.epsilon0 * CONSTANTS.hbar)) \
        * p.alpha / (4 * np.pi)
    total = 0j
    for r in (np.asarray(r1, float), np.asarray(r2, float)):
        total += (np.conj(direction.t_ns) @ tweezer_field(r, tw)) \
            * np.exp(-1j * k * direction.n @ r)
    return pref * total


# ---------------------------------------------------------------------------
# Angular quadrature over the unit sphere
# ---------------------------------------------------------------------------

def sphere_grid(axis=EZ, k_delta=0.0, n_polar=None, n_azimuth=24):
    """Quadrature nodes/weights on the unit sphere.

    Gauss-Legendre in cos(polar angle) measured from `axis` (so oscillations
    e^{i k n·Delta} are one-dimensional in the polar variable) times a uniform
    trapezoid in azimuth, exact for trigonometric polynomials of the
    polarization factors.  Node count grows linearly with k_delta = k|Delta|.
    """
    if n_polar is None:
        n_polar = int(0.62 * abs(k_delta)) + 40
    x, wx = np.polynomial.legendre.leggauss(n_polar)
    phi = np.arange(n_azimuth) * (2 * np.pi / n_azimuth)
    wphi = 2 * np.pi / n_azimuth

    axis = np.asarray(axis, float)
    axis = axis / np.linalg.norm(axis)
    # orthonormal frame (u, v, axis)
    ref = EY if abs(axis @ EX) > 0.9 else EX
    u = np.cross(axis, ref)
    u /= np.linalg.norm(u)
    v = np.cross(axis, u)

    st = np.sqrt(np.clip(1.0 - x**2, 0.0, None))
    nodes = (st[:, None, None] * (np.cos(phi)[None, :, None] * u
                                  + np.sin(phi)[None, :, None] * v)
             + x[:, None, None] * axis)
    weights = np.broadcast_to((wx * wphi)[:, None], (n_polar, n_azimuth))
    return nodes.reshape(-1, 3), weights.reshape(-1).copy()


def integrate_sphere(f, axis=EZ, k_delta=0.0, rtol=1e-9, n_azimuth=24):
    """Integrate f(nodes) (vectorized over an (N,3) direction array) over the
    unit sphere with a two-resolution convergence check.

    Convergence is judged against the result magnitude or, for integrals that
    cancel to the double-precision floor of the integrand's L1 mass, against
    that floor.
    """
    n1 = int(0.62 * abs(k_delta)) + 40
    vals, l1 = [], 1e-300
    for n_polar in (n1, n1 + 16):
        nodes, w = sphere_grid(axis, k_delta, n_polar, n_azimuth)
        raw = f(nodes)
        vals.append(np.tensordot(raw, w, axes=([0], [0])))
        l1 = max(l1, float(np.max(np.tensordot(np.abs(raw), w,
                                               axes=([0], [0])))))
    err = np.max(np.abs(vals[1] - vals[0]))
    tol = max(rtol * np.max(np.abs(vals[1])), 1e-12 * l1)
    if err > tol:
        raise QuadratureError(
            f"angular quadrature not converged: change {err:.2e} exceeds "
            f"{tol:.2e}", achieved=err)
    return vals[1]


# ---------------------------------------------------------------------------
# Forces
# ---------------------------------------------------------------------------

def _fd_step(k, r1, r2):
    # resolves optical-wavelength oscillations without cancellation
    return max(1e-6 / k, 1e-9 * np.linalg.norm(np.asarray(r1) - np.asarray(r2)))


def binding_force(r1, r2, tw: TweezerPair, p: Particle):
    """Optical binding force on particle 1 due to particle 2 (N).

    Central finite-difference gradient (in r1) of the interference scalar
    Re[E*(r1)·G(r1-r2)E(r2)].
    """
    r1 = np.asarray(r1, float)
    r2 = np.asarray(r2, float)
    if np.array_equal(r1, r2):
        raise ValueError("binding force undefined at coincident positions")
    k = tw.wavenumber_k

    def scalar(r):
        g = green_tensor(r - r2, k)
        return float((np.conj(tweezer_field(r, tw)) @ g
                      @ tweezer_field(r2, tw)).real)

    h = _fd_step(k, r1, r2)
    grad = np.zeros(3)
    for i in range(3):
        dr = np.zeros(3)
        dr[i] = h
        grad[i] = (scalar(r1 + dr) - scalar(r1 - dr)) / (2 * h)
    return p.alpha**2 / (2 * CONSTANTS.epsilon0) * grad


def trap_gradient_force(r1, r2, tw: TweezerPair, p: Particle):
    """-d(dipole_potential)/dr1 by central differences (N)."""
    r1 = np.asarray(r1, float)
    h = _fd_step(tw.wavenumber_k, r1, r2)
    grad = np.zeros(3)
    for i in range(3):
        dr = np.zeros(3)
        dr[i] = h
        grad[i] = (dipole_potential(r1 + dr, r2, tw, p)
                   - dipole_potential(r1 - dr, r2, tw, p)) / (2 * h)
    return -grad


def _binding_potential_gradient(r1, r2, tw, p):
    h = _fd_step(tw.wavenumber_k, r1, r2)
    grad = np.zeros(3)
    for i in range(3):
        dr = np.zeros(3)
        dr[i] = h
        grad[i] = (binding_potential(r1 + dr, r2, tw, p)
                   - binding_potential(r1 - dr, r2, tw, p)) / (2 * h)
    return grad


def scattering_force(r1, r2, tw: TweezerPair, p: Particle, *,
                     part="total", rtol=1e-9):
    """Mean force on particle 1 from the scattering dissipator (N).

    hbar * Integral d²n Sum_s Im[L* dL/dr1] with the two-particle amplitude
    L = a1 + a2 (only a1 depends on r1).  part selects which piece of
    Im[(a1+a2)* da1] is integrated: "total", "self" (Im[a1* da1], the
    single-particle radiation pressure) or "interference" (Im[a2* da1], the
    nonconservative binding contribution).
    """
    if part not in ("total", "self", "interference"):
        raise ValueError(f"unknown part {part!r}")
    r1 = np.asarray(r1, float)
    r2 = np.asarray(r2, float)
    k = tw.wavenumber_k
    pref = np.sqrt(k**3 / (2 * CONSTANTS.epsilon0 * CONSTANTS.hbar)) \
        * p.alpha / (4 * np.pi)
    e1 = tweezer_field(r1, tw)
    e2 = tweezer_field(r2, tw)
    h = _fd_step(k, r1, r2)
    de1 = np.zeros((3, 3), complex)  # de1[i] = dE/dr1_i at r1
    for i in range(3):
        dr = np.zeros(3)
        dr[i] = h
        de1[i] = (tweezer_field(r1 + dr, tw)
                  - tweezer_field(r1 - dr, tw)) / (2 * h)

    delta = r1 - r2
    kdel = 0.0 if part == "self" else k * np.linalg.norm(delta)
    axis = delta / np.linalg.norm(delta) if kdel > 0 else EZ

    def integrand(nodes):
        # amplitudes (per prefactor) and their r1-gradients on all nodes
        ph1 = np.exp(-1j * k * nodes @ r1)
        ph2 = np.exp(-1j * k * nodes @ r2)
        out = np.zeros((nodes.shape[0], 3))
        for tvec in _transverse_pair(nodes):
            a1 = (tvec.conj() * e1).sum(axis=1) * ph1
            a2 = (tvec.conj() * e2).sum(axis=1) * ph2
            if part == "total":
                amp = a1 + a2
            elif part == "self":
                amp = a1
            else:
                amp = a2
            grad = (tvec.conj() @ de1.T) * ph1[:, None] \
                - 1j * k * nodes * a1[:, None]
            out += np.imag(np.conj(amp)[:, None] * grad)
        return out

    force = integrate_sphere(integrand, axis=axis, k_delta=kdel, rtol=rtol)
    return CONSTANTS.hbar * pref**2 * force


def _transverse_pair(nodes):
    """Vectorized polarization basis for an (N,3) array of directions."""
    n = nodes
    rho = np.hypot(n[:, 0], n[:, 1])
    safe = rho > 1e-12
    cph = np.where(safe, n[:, 0] / np.where(safe, rho, 1.0), 1.0)
    sph = np.where(safe, n[:, 1] / np.where(safe, rho, 1.0), 0.0)
    ct = n[:, 2]
    t1 = np.stack([ct * cph, ct * sph, -rho], axis=1)
    t2 = np.stack([-sph, cph, np.zeros_like(sph)], axis=1)
    sz = np.where(safe, 1.0, np.sign(ct) + (ct == 0))
    return t1.astype(complex), (t2 * sz[:, None]).astype(complex)


def ehrenfest_force(r1, r2, tw: TweezerPair, p: Particle, rtol=1e-9):
    """Total mean force on particle 1 from the master-equation structure (N):
    trap gradient + binding-potential gradient + dissipator force."""
    r1 = np.asarray(r1, float)
    r2 = np.asarray(r2, float)
    if np.array_equal(r1, r2):
        raise ValueError("coincident positions")
    return (trap_gradient_force(r1, r2, tw, p)
            - _binding_potential_gradient(r1, r2, tw, p)
            + scattering_force(r1, r2, tw, p, rtol=rtol))


def ehrenfest_interaction_force(r1, r2, tw: TweezerPair, p: Particle,
                                rtol=1e-9):
    """Interaction part of the Ehrenfest force on particle 1: binding-potential
    gradient plus the interference piece of the dissipator force, i.e. the
    total mean force with the trap gradient and the single-particle scattering
    force removed.  Reproduces the closed-form binding force for separated
    particles."""
    return (-_binding_potential_gradient(r1, r2, tw, p)
            + scattering_force(r1, r2, tw, p, part="interference", rtol=rtol))
