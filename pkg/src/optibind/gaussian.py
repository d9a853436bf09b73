"""Gaussian two-mode dynamics of the linearized optical-binding master equation.

States are represented by the mean vector and symmetrized covariance matrix of
the dimensionless quadratures (z1, p1, z2, p2) with [z_j, p_j'] = i delta_jj'
(ground-state variance 1/2).  The module provides the drift/diffusion matrices
of the linearized master equation, exact moment propagation via the matrix
exponential (van Loan block trick), stationary solves with weak local damping,
the logarithmic-negativity entanglement witness, and an independent
truncated-Fock-space oracle that integrates the same master equation directly
on the density matrix.
"""

from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp_sparse
from scipy.integrate import solve_ivp
from scipy.special import gammaln

from .linearize import CouplingSet, SystemParams


def symplectic_form(n_modes=2):
    omega1 = np.array([[0.0, 1.0], [-1.0, 0.0]])
    return sla.block_diag(*([omega1] * n_modes))


@dataclass(frozen=True)
class GaussianState:
    """Mean vector and symmetrized covariance of (z1, p1, ..., zN, pN)."""

    mean: np.ndarray
    cov: np.ndarray

    def __post_init__(self):
        mean = np.asarray(self.mean, float)
        cov = np.asarray(self.cov, float)
        if mean.ndim != 1 or mean.size % 2 or cov.shape != (mean.size,) * 2:
            raise ValueError("mean must have even length and cov match it")
        if not np.allclose(cov, cov.T, atol=1e-10 * max(1.0, np.abs(cov).max())):
            raise ValueError("covariance must be symmetric")
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "cov", 0.5 * (cov + cov.T))

    @property
    def n_modes(self):
        return self.mean.size // 2

    def uncertainty_min_eig(self):
        """Smallest eigenvalue of cov + i*Omega/2 (>= 0 for physical states)."""
        omega = symplectic_form(self.n_modes)
        return float(np.linalg.eigvalsh(self.cov + 0.5j * omega)[0])

    def require_physical(self, tol=1e-10):
        if self.uncertainty_min_eig() < -tol:
            raise ValueError("covariance violates the uncertainty relation")
        return self

    @classmethod
    def vacuum(cls, n_modes=2):
        return cls(np.zeros(2 * n_modes), 0.5 * np.eye(2 * n_modes))


@dataclass(frozen=True)
class DriftDiffusion:
    """Drift matrix A and diffusion matrix Dmat of the moment equations
    d<x>/dt = A <x>,  dS/dt = A S + S A^T + Dmat."""

    A: np.ndarray
    Dmat: np.ndarray

    def __post_init__(self):
        A = np.asarray(self.A, float)
        Dmat = np.asarray(self.Dmat, float)
        if A.shape != Dmat.shape or A.shape[0] != A.shape[1]:
            raise ValueError("A and Dmat must be square and equal-shaped")
        if np.linalg.eigvalsh(0.5 * (Dmat + Dmat.T))[0] < -1e-12 * _norm(Dmat):
            raise ValueError("diffusion matrix must be positive semidefinite")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "Dmat", 0.5 * (Dmat + Dmat.T))


def _norm(m):
    s = np.abs(m).max()
    return s if s > 0 else 1.0


def build_drift_diffusion(cs: CouplingSet, sp: SystemParams):
    """Moment-equation matrices of the linearized master equation.

    Hamiltonian part: two oscillators at omega -/+ d_omega/2, the local trap
    stiffening (g_r +/- g_a) z_j^2, and the reciprocal coupling -2 g_r z1 z2.
    Dissipative part: momentum diffusion 2 D11, 2 D22 with cross-correlation
    2 Re D12, plus the antisymmetric drift from Im D12 that realizes the
    antireciprocal coupling; the force on particle 1 carries g_r + g_a and on
    particle 2 g_r - g_a.
    """
    w1, w2 = sp.trap_frequencies
    gp, gm = cs.freq_shift_1, cs.freq_shift_2
    A = np.array([
        [0.0, w1, 0.0, 0.0],
        [-(w1 + 2 * gp), 0.0, 2 * gp, 0.0],
        [0.0, 0.0, 0.0, w2],
        [2 * gm, 0.0, -(w2 + 2 * gm), 0.0],
    ])
    d11 = cs.D[0, 0].real
    d22 = cs.D[1, 1].real
    d12 = cs.D[0, 1].real
    Dmat = np.zeros((4, 4))
    Dmat[1, 1] = 2 * d11
    Dmat[3, 3] = 2 * d22
    Dmat[1, 3] = Dmat[3, 1] = 2 * d12
    return DriftDiffusion(A=A, Dmat=Dmat)


def local_damping(dd: DriftDiffusion, gamma):
    """Add weak local zero-temperature damping (a local channel): each
    quadrature decays at gamma/2 with matching vacuum diffusion, so the vacuum
    is a fixed point when the optical diffusion vanishes."""
    n = dd.A.shape[0]
    return DriftDiffusion(A=dd.A - 0.5 * gamma * np.eye(n),
                          Dmat=dd.Dmat + 0.5 * gamma * np.eye(n))


def _van_loan(A, Dmat, t):
    """Propagator F = e^{At} and accumulated diffusion
    Q = int_0^t e^{As} Dmat e^{A^T s} ds via one block matrix exponential."""
    n = A.shape[0]
    block = np.zeros((2 * n, 2 * n))
    block[:n, :n] = A
    block[:n, n:] = Dmat
    block[n:, n:] = -A.T
    eb = sla.expm(block * t)
    F = eb[:n, :n]
    Q = eb[:n, n:] @ F.T
    return F, 0.5 * (Q + Q.T)


def evolve_gaussian(state: GaussianState, dd: DriftDiffusion, t,
                    *, max_substeps=64, uncertainty_tol=1e-10):
    """Propagate moments for a time t >= 0 (exact matrix-exponential update).

    The uncertainty invariant is checked after every step; on violation the
    step is subdivided (adaptive rejection), and a failure to repair within
    max_substeps raises.
    """
    if t < 0:
        raise ValueError("propagation time must be non-negative")
    if t == 0:
        return state
    substeps = 1
    while substeps <= max_substeps:
        F, Q = _van_loan(dd.A, dd.Dmat, t / substeps)
        mean = state.mean.copy()
        cov = state.cov.copy()
        ok = True
        for _ in range(substeps):
            mean = F @ mean
            cov = F @ cov @ F.T + Q
            trial = GaussianState(mean, cov)
            if trial.uncertainty_min_eig() < -uncertainty_tol:
                ok = False
                break
        if ok:
            return GaussianState(mean, cov)
        substeps *= 2
    raise RuntimeError("step-size control failed to preserve the "
                       "uncertainty invariant")


def evolve_history(state: GaussianState, dd: DriftDiffusion, times,
                   **kwargs):
    """States at the requested (sorted, t>=0) times."""
    times = np.asarray(times, float)
    out = []
    current = state
    t_prev = 0.0
    for t in times:
        current = evolve_gaussian(current, dd, t - t_prev, **kwargs)
        t_prev = t
        out.append(current)
    return out


def stationary_gaussian(dd: DriftDiffusion, *, extra_damping=0.0):
    """Stationary state from the Lyapunov equation A S + S A^T + Dmat = 0.

    extra_damping adds the weak local zero-temperature channel first, which is
    what makes a stationary state exist for the undamped binding dynamics.
    Raises if the (damped) drift is not Hurwitz.
    """
    d = local_damping(dd, extra_damping) if extra_damping else dd
    if np.max(np.linalg.eigvals(d.A).real) >= -1e-300:
        raise ValueError("drift matrix is not Hurwitz; no stationary state "
                         "(add local damping)")
    cov = sla.solve_continuous_lyapunov(d.A, -d.Dmat)
    return GaussianState(np.zeros(d.A.shape[0]), cov).require_physical()


def symplectic_eigenvalues(cov):
    """Symplectic spectrum of a covariance matrix (one value per mode).

    The eigenvalues of i*Omega*cov come in +/-nu pairs; sorting the absolute
    values and taking every second entry yields each nu once.
    """
    cov = np.asarray(cov, float)
    n = cov.shape[0] // 2
    eigs = np.linalg.eigvals(1j * symplectic_form(n) @ cov)
    return np.sort(np.abs(eigs))[::2]


def log_negativity(state: GaussianState):
    """Logarithmic negativity E_N of a two-mode Gaussian state.

    Momentum-sign flip on mode 2 (partial transpose), then
    E_N = max(0, -ln(2 nu_min)) with nu_min the smallest symplectic eigenvalue
    of the transposed covariance.
    """
    if state.n_modes != 2:
        raise ValueError("log-negativity witness expects a two-mode state")
    state.require_physical(tol=1e-8)
    flip = np.diag([1.0, 1.0, 1.0, -1.0])
    cov_pt = flip @ state.cov @ flip
    nu_min = symplectic_eigenvalues(cov_pt)[0]
    return float(max(0.0, -np.log(2.0 * nu_min)))


# ---------------------------------------------------------------------------
# Truncated-Fock oracle
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class FockState:
    """Two-mode density matrix on a per-mode truncated Fock basis."""

    n_max: int
    rho: np.ndarray

    def __post_init__(self):
        dim = (self.n_max + 1) ** 2
        rho = np.asarray(self.rho, complex)
        if rho.shape != (dim, dim):
            raise ValueError("density matrix shape does not match n_max")
        object.__setattr__(self, "rho", rho)

    def require_valid(self, trace_tol=1e-8, pos_tol=1e-8):
        if abs(np.trace(self.rho).real - 1.0) > trace_tol:
            raise ValueError("trace deviates from 1")
        if np.abs(self.rho - self.rho.conj().T).max() > 1e-8:
            raise ValueError("density matrix is not Hermitian")
        if np.linalg.eigvalsh(0.5 * (self.rho + self.rho.conj().T))[0] < -pos_tol:
            raise ValueError("density matrix is not positive")
        return self

    def boundary_population(self):
        """Total population of the highest Fock level of either mode."""
        n = self.n_max + 1
        pops = np.diag(self.rho).real.reshape(n, n)
        return float(pops[-1, :].sum() + pops[:, -1].sum() - pops[-1, -1])


class TruncationLeakError(RuntimeError):
    """Population reached the Fock-space boundary during integration."""


def _mode_ops(n_max):
    n = n_max + 1
    a = sp_sparse.diags(np.sqrt(np.arange(1, n)), 1, format="csr")
    z = (a + a.T) / np.sqrt(2)
    p = -1j * (a - a.T) / np.sqrt(2)
    return a, z.tocsr(), p.tocsr()


def fock_operators(n_max):
    """Sparse two-mode quadrature operators (z1, p1, z2, p2)."""
    _, z, p = _mode_ops(n_max)
    eye = sp_sparse.identity(n_max + 1, format="csr")
    kron = sp_sparse.kron
    return (kron(z, eye, "csr"), kron(p, eye, "csr"),
            kron(eye, z, "csr"), kron(eye, p, "csr"))


def fock_coherent_state(alpha1, alpha2, n_max):
    """Product of truncated coherent states; alpha = (z + i p)/sqrt(2)."""
    n = np.arange(n_max + 1)

    def coh(alpha):
        if alpha == 0:
            return np.eye(n_max + 1)[0].astype(complex)
        return np.exp(n * np.log(complex(alpha)) - 0.5 * gammaln(n + 1)
                      - 0.5 * abs(alpha) ** 2)

    psi = np.kron(coh(alpha1), coh(alpha2))
    psi = psi / np.linalg.norm(psi)
    return FockState(n_max=n_max, rho=np.outer(psi, psi.conj()))


def fock_hamiltonian(cs: CouplingSet, sp: SystemParams, n_max):
    """Sparse linearized Hamiltonian (in units of hbar)."""
    z1, p1, z2, p2 = fock_operators(n_max)
    w1, w2 = sp.trap_frequencies
    h = (w1 / 2) * (z1 @ z1 + p1 @ p1) + (w2 / 2) * (z2 @ z2 + p2 @ p2)
    h = h + cs.freq_shift_1 * (z1 @ z1) + cs.freq_shift_2 * (z2 @ z2)
    h = h - 2 * cs.g_r * (z1 @ z2)
    return h.tocsr()


def fock_oracle_evolve(st0: FockState, cs: CouplingSet, sp: SystemParams, t,
                       *, rtol=1e-9, atol=1e-12, leak_threshold=1e-6,
                       n_checks=8):
    """Integrate the linearized master equation directly in the truncated
    two-mode Fock basis (brute-force oracle for the Gaussian propagator).

    Raises TruncationLeakError if the boundary population exceeds
    leak_threshold at any of n_checks intermediate checks.
    """
    n_max = st0.n_max
    dim = (n_max + 1) ** 2
    zs = fock_operators(n_max)[::2]  # (z1, z2)
    h = fock_hamiltonian(cs, sp, n_max)
    dmat = np.asarray(cs.D, complex)
    # K = sum_jj' D_jj' z_j' z_j (Hermitian since the z's commute)
    K = sum(dmat[j, jp] * (zs[jp] @ zs[j]) for j in range(2) for jp in range(2))
    K = K.tocsr()

    def rhs(_, y):
        rho = y.reshape(dim, dim)
        out = -1j * (h @ rho - rho @ h)
        out -= K @ rho + rho @ K
        for j in range(2):
            zr = zs[j] @ rho
            for jp in range(2):
                out += 2 * dmat[j, jp] * (zr @ zs[jp])
        return out.ravel()

    times = np.linspace(0.0, t, n_checks + 1)
    sol = solve_ivp(rhs, (0.0, t), st0.rho.ravel(), t_eval=times,
                    method="DOP853", rtol=rtol, atol=atol)
    if not sol.success:
        raise RuntimeError(f"Fock integration failed: {sol.message}")
    final = None
    for idx in range(len(times)):
        st = FockState(n_max=n_max,
                       rho=sol.y[:, idx].reshape(dim, dim))
        leak = st.boundary_population()
        if leak > leak_threshold:
            raise TruncationLeakError(
                f"boundary population {leak:.2e} at t = {times[idx]:.3g} "
                f"exceeds {leak_threshold:.1e}; increase n_max")
        final = st
    return final


def fock_moments(st: FockState):
    """Mean vector and symmetrized covariance of (z1, p1, z2, p2)."""
    ops = fock_operators(st.n_max)
    mean = np.array([np.trace(op @ st.rho).real for op in ops])
    cov = np.zeros((4, 4))
    for i in range(4):
        for j in range(i, 4):
            sym = 0.5 * (ops[i] @ ops[j] + ops[j] @ ops[i])
            cov[i, j] = cov[j, i] = np.trace(sym @ st.rho).real \
                - mean[i] * mean[j]
    return mean, cov
