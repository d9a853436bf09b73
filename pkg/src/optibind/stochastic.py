"""Trajectory-level stochastic dynamics: correlated-noise Langevin ensembles,
conditional homodyne filtering, the Kraus-operator form of a single detection
step, the measurement-plus-feed-forward (LOCC) unraveling, and the
modulated-phase squeezing drive with its variance flow.

Conventions.  Mode amplitudes a_j = (z_j + i p_j) e^{i(omega + g_r) t}/sqrt(2)
live in the co-rotating frame; classical trajectories sample the symmetrized
(Wigner) phase-space distribution, so ensemble moments of the simulations
reproduce the symmetrized moments of the Gaussian propagator.  The quantum
recoil correlator fixes the classical noise calibration <dxi_j dxi*_j'> =
Re(D_jj') dt: the imaginary part of D_12 is a drift (it already appears in the
dynamical matrix) and must not be re-injected as noise.  The generic increment
builder `correlated_noise_increments` reproduces whatever Hermitian
correlation matrix it is given (the NoiseModel stores 2D).
"""

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla
from scipy.integrate import solve_ivp

from .gaussian import DriftDiffusion, GaussianState, build_drift_diffusion
from .linearize import CouplingSet, SystemParams
from .modes import dynamical_matrix
from .provenance import config_digest


class InfeasibleMeasurementError(ValueError):
    """No measurement accuracy keeps the feed-forward diffusion positive."""

    def __init__(self, message, interval=None):
        super().__init__(message)
        self.interval = interval


@dataclass(frozen=True)
class NoiseModel:
    """Correlated complex white noise for the mode-amplitude Langevin equation.

    correlation holds the Hermitian rate matrix 2D (the quantum recoil
    correlator); seed and dt fix the discretization.
    """

    correlation: np.ndarray
    seed: int
    dt: float

    def __post_init__(self):
        corr = np.asarray(self.correlation, complex)
        if corr.shape != (2, 2) or np.abs(corr - corr.conj().T).max() > \
                1e-12 * max(1.0, np.abs(corr).max()):
            raise ValueError("correlation must be 2x2 Hermitian")
        if np.linalg.eigvalsh(corr)[0] < -1e-12 * max(1.0, np.abs(corr).max()):
            raise ValueError("correlation matrix must be PSD")
        if self.dt <= 0:
            raise ValueError("dt must be positive")
        object.__setattr__(self, "correlation", corr)

    @classmethod
    def from_couplings(cls, cs: CouplingSet, seed, dt=None):
        if dt is None:
            scale = max(np.abs(cs.D).max(), abs(cs.g_r), abs(cs.g_a), 1e-300)
            dt = 1e-3 / scale
        return cls(correlation=2 * np.asarray(cs.D, complex), seed=seed, dt=dt)


def _psd_factor(corr):
    """Factor L with L L^dagger = corr for Hermitian PSD corr (eigh-based,
    tolerant of singular matrices)."""
    vals, vecs = np.linalg.eigh(corr)
    vals = np.clip(vals, 0.0, None)
    return vecs * np.sqrt(vals)


def correlated_noise_increments(correlation, rng, n_steps, dt):
    """Complex increments (n_steps, m) with E[dxi_j dxi_j'^*] = C_jj' dt."""
    corr = np.asarray(correlation, complex)
    m = corr.shape[0]
    L = _psd_factor(corr)
    w = (rng.standard_normal((n_steps, m))
         + 1j * rng.standard_normal((n_steps, m))) * np.sqrt(dt / 2)
    return w @ L.T


@dataclass(frozen=True)
class MeasurementConfig:
    """Continuous-measurement settings.

    Gamma is the position-measurement accuracy rate of the feed-forward
    scheme; eta_det and lo_phase_phi_det configure homodyne detection (the
    local-oscillator phase is deliberately not called phi, which names the
    relative tweezer phase elsewhere).  mode_overlap mixes which particle
    combination each detection channel sees (identity = independent detection;
    no particular value is claimed for overlapping scattered fields).  seed
    derives the per-particle Wiener streams.
    """

    Gamma: float | None = None
    eta_det: float = 1.0
    lo_phase_phi_det: float = 0.0
    mode_overlap: np.ndarray = field(default_factory=lambda: np.eye(2))
    seed: int = 0

    def __post_init__(self):
        if not 0.0 <= self.eta_det <= 1.0:
            raise ValueError("eta_det must lie in [0, 1]")
        object.__setattr__(self, "mode_overlap",
                           np.asarray(self.mode_overlap, float))

    def wiener_streams(self, n=2):
        """Independent per-channel Generators derived from the seed."""
        seqs = np.random.SeedSequence(self.seed).spawn(n)
        return [np.random.default_rng(s) for s in seqs]


@dataclass
class TrajectoryRecord:
    """Time-stamped trajectory output; bit-exact given (seed, config)."""

    times: np.ndarray
    means: np.ndarray
    covariances: np.ndarray | None
    records: np.ndarray | None
    seed: int
    config_hash: str
    aborted: bool = False
    abort_index: int | None = None


# ---------------------------------------------------------------------------
# Langevin trajectories (co-rotating mode amplitudes)
# ---------------------------------------------------------------------------

def langevin_trajectories(cs: CouplingSet, sp: SystemParams, n_traj, T,
                          nm: NoiseModel, *, scheme="euler",
                          record_stride=None, vacuum_input=True,
                          initial_modes=(0j, 0j), abort_bound=1e6,
                          chunk=512):
    """Integrate d(a1,a2)/dt = -i H_nh (a1,a2) + noise for an ensemble.

    The classical noise is calibrated to Re(correlation)/2 = Re(D) (see the
    module docstring); with vacuum_input the initial amplitudes additionally
    sample the vacuum Wigner distribution so ensemble moments match the
    symmetrized quantum moments.  Trajectories whose amplitude exceeds
    abort_bound (quanta) are frozen and flagged.  Each trajectory draws from
    its own stream derived from (nm.seed, trajectory index).
    """
    if scheme not in ("euler", "exponential"):
        raise ValueError(f"unknown scheme {scheme!r}")
    h_nh = dynamical_matrix(cs, sp)
    c_sim = 0.5 * np.real(np.asarray(nm.correlation))
    if np.linalg.eigvalsh(c_sim)[0] < -1e-12 * max(1.0, np.abs(c_sim).max()):
        raise ValueError("simulation noise correlation is not PSD")
    dt = nm.dt
    n_steps = max(1, int(round(T / dt)))
    stride = record_stride or max(1, n_steps // 200)
    sample_idx = np.arange(0, n_steps + 1, stride)
    if sample_idx[-1] != n_steps:
        sample_idx = np.append(sample_idx, n_steps)
    times = sample_idx * dt

    step_mat = sla.expm(-1j * h_nh * dt) if scheme == "exponential" \
        else np.eye(2) - 1j * h_nh * dt
    L = _psd_factor(c_sim)
    digest = config_digest({
        "g_r": cs.g_r, "g_a": cs.g_a, "G": cs.G, "D": cs.D,
        "correlation": nm.correlation, "dt": dt, "T": T, "scheme": scheme,
        "n_traj": n_traj, "vacuum_input": vacuum_input,
        "initial_modes": list(initial_modes), "abort_bound": abort_bound,
    })

    records = []
    root = np.random.SeedSequence(nm.seed)
    for start in range(0, n_traj, chunk):
        size = min(chunk, n_traj - start)
        noise = np.empty((n_steps, size, 2), complex)
        a0 = np.tile(np.asarray(initial_modes, complex), (size, 1))
        for i in range(size):
            rng = np.random.default_rng(
                np.random.SeedSequence(entropy=root.entropy,
                                       spawn_key=(start + i,)))
            w = (rng.standard_normal((n_steps, 2))
                 + 1j * rng.standard_normal((n_steps, 2))) * np.sqrt(dt / 2)
            noise[:, i, :] = w @ L.T
            if vacuum_input:
                a0[i] += 0.5 * (rng.standard_normal(2)
                                + 1j * rng.standard_normal(2))
        a = a0
        live = np.ones(size, bool)
        abort_at = np.full(size, -1)
        samples = np.empty((len(sample_idx), size, 2), complex)
        samples[0] = a
        s_next = 1
        for n in range(n_steps):
            stepped = a @ step_mat.T + noise[n]
            a = np.where(live[:, None], stepped, a)
            blown = live & ((np.abs(a) ** 2).max(axis=1) > abort_bound)
            if blown.any():
                abort_at[blown] = n
                live &= ~blown
            if s_next < len(sample_idx) and n + 1 == sample_idx[s_next]:
                samples[s_next] = a
                s_next += 1
        for i in range(size):
            records.append(TrajectoryRecord(
                times=times.copy(), means=samples[:, i, :].copy(),
                covariances=None, records=None, seed=int(nm.seed),
                config_hash=digest, aborted=abort_at[i] >= 0,
                abort_index=int(abort_at[i]) if abort_at[i] >= 0 else None))
    return records


def ensemble_mode_moments(records):
    """Sample mean <a_j>, second moments <a_j a_k*> and <a_j a_k> over an
    ensemble of Langevin TrajectoryRecords, per sample time."""
    stack = np.stack([r.means for r in records])  # (N, n_t, 2)
    mean = stack.mean(axis=0)
    conj_mom = np.einsum("rtj,rtk->tjk", stack, stack.conj()) / len(records)
    plain_mom = np.einsum("rtj,rtk->tjk", stack, stack) / len(records)
    return mean, conj_mom, plain_mom


# ---------------------------------------------------------------------------
# Gaussian conditional filtering (homodyne detection)
# ---------------------------------------------------------------------------

def _channel_vectors(cov, d_diag, eta, phi, overlap):
    """Per-channel gain vectors and signal parameters for position homodyning.

    Channel j measures c_j = sum_l overlap[j,l] z_l at rate set by the local
    recoil rate d_diag[j]; returns (gains, noise_scales) where the mean update
    is mu += gain_j dW_j and dy_j = <c_j> cos(phi) dt + dW_j * noise_scale_j.
    """
    dim = cov.shape[0]
    n_modes = dim // 2
    gains, scales = [], []
    for j in range(len(d_diag)):
        c_vec = np.zeros(dim)
        kick = np.zeros(dim)
        for l in range(n_modes):
            c_vec[2 * l] = overlap[j, l]
            kick[2 * l + 1] = overlap[j, l]
        rate = 2.0 * d_diag[j] * eta
        gain = np.sqrt(4 * rate) * np.cos(phi) * (cov @ c_vec) \
            + np.sqrt(rate) * np.sin(phi) * kick
        gains.append(gain)
        scales.append(1.0 / np.sqrt(4 * rate) if rate > 0 else np.inf)
    return gains, scales


def homodyne_conditional_step(state: GaussianState, mc: MeasurementConfig,
                              cs: CouplingSet, sp: SystemParams, dt,
                              dW=None, rng=None):
    """One Ito step of the two-particle conditional homodyne dynamics.

    Deterministic Riccati update of the covariance plus a stochastic mean
    update; returns (state, dy) with dy the two measurement-record increments
    (NaN where eta_det = 0 carries no information).  The conditional momentum
    diffusion equals D(1 - eta_det) at lo_phase_phi_det = +/-pi/2, where the
    measurement-induced localization vanishes.
    """
    dd = build_drift_diffusion(cs, sp)
    d_diag = np.array([cs.D[0, 0].real, cs.D[1, 1].real])
    return _filter_step(state, dd, d_diag, mc, dt, dW, rng)


def _filter_step(state, dd, d_diag, mc, dt, dW=None, rng=None):
    phi, eta = mc.lo_phase_phi_det, mc.eta_det
    overlap = mc.mode_overlap
    mean, cov = state.mean, state.cov
    if dW is None:
        if rng is None:
            raise ValueError("provide dW or an rng")
        dW = rng.standard_normal(len(d_diag)) * np.sqrt(dt)
    gains, scales = _channel_vectors(cov, d_diag, eta, phi, overlap)

    new_mean = mean + dd.A @ mean * dt
    ricc = dd.A @ cov + cov @ dd.A.T + dd.Dmat
    dy = np.empty(len(d_diag))
    for j, (gain, scale) in enumerate(zip(gains, scales)):
        new_mean = new_mean + gain * dW[j]
        ricc = ricc - np.outer(gain, gain)
        c_mean = sum(overlap[j, l] * mean[2 * l]
                     for l in range(cov.shape[0] // 2))
        dy[j] = c_mean * np.cos(phi) * dt + dW[j] * scale \
            if np.isfinite(scale) else np.nan
    return GaussianState(new_mean, cov + ricc * dt), dy


def homodyne_single_particle_step(state: GaussianState,
                                  mc: MeasurementConfig, omega, recoil_D,
                                  dt, dW=None, rng=None):
    """Single-mode version of the conditional homodyne step (trap frequency
    omega, recoil diffusion rate recoil_D); oracle partner of kraus_step."""
    A = np.array([[0.0, omega], [-omega, 0.0]])
    Dmat = np.array([[0.0, 0.0], [0.0, 2 * recoil_D]])
    dd = DriftDiffusion(A=A, Dmat=Dmat)
    one_channel = MeasurementConfig(Gamma=mc.Gamma, eta_det=mc.eta_det,
                                    lo_phase_phi_det=mc.lo_phase_phi_det,
                                    mode_overlap=np.eye(1), seed=mc.seed)
    if dW is not None:
        dW = np.atleast_1d(dW)
    new_state, dy = _filter_step(state, dd, np.array([recoil_D]),
                                 one_channel, dt, dW, rng)
    return new_state, float(dy[0])


# ---------------------------------------------------------------------------
# Kraus-operator form of one detection step (single particle)
# ---------------------------------------------------------------------------

def kraus_step(state: GaussianState, u, mc: MeasurementConfig,
               sp: SystemParams | None, dt, *, omega=None, recoil_D=None,
               dW=0.0):
    """Apply the Gaussian detection operator at fixed recoil variable u.

    Composition (all pieces exact on Gaussian states): the quadratic/linear
    detection Hamiltonian (trap + measurement-induced shear + the known
    record-dependent force), the record-conditioned spatial localization, the
    measurement dephasing, and the residual momentum kick
    -u sqrt(2 D (1 - eta) dt) whose u-average restores recoil heating at the
    effective rate D(1 - eta).
    """
    if state.n_modes != 1:
        raise ValueError("kraus_step acts on a single-mode state")
    omega, recoil_D = _single_particle_params(sp, omega, recoil_D)
    mean, cov = _kraus_common(state, mc, omega, recoil_D, dt, dW)
    kick = np.sqrt(max(2 * recoil_D * (1 - mc.eta_det) * dt, 0.0))
    mean = mean - np.array([0.0, u * kick])
    return GaussianState(mean, cov)


def kraus_step_averaged(state: GaussianState, mc: MeasurementConfig,
                        sp: SystemParams | None, dt, *, omega=None,
                        recoil_D=None, dW=0.0):
    """Kraus step integrated over the Gaussian recoil variable u: the
    u-dependent momentum displacement becomes diffusion 2 D (1 - eta) dt."""
    if state.n_modes != 1:
        raise ValueError("kraus_step acts on a single-mode state")
    omega, recoil_D = _single_particle_params(sp, omega, recoil_D)
    eta = mc.eta_det
    mean, cov = _kraus_common(state, mc, omega, recoil_D, dt, dW)
    cov = cov + np.array([[0.0, 0.0],
                          [0.0, 2 * recoil_D * (1 - eta) * dt]])
    return GaussianState(mean, cov)


def _single_particle_params(sp, omega, recoil_D):
    if omega is None:
        if sp is None:
            raise ValueError("provide omega or SystemParams")
        omega = sp.trap_frequencies[0]
    if recoil_D is None:
        if sp is None:
            raise ValueError("provide recoil_D or SystemParams")
        from .linearize import diffusion_matrix
        recoil_D = diffusion_matrix(sp)[0, 0].real
    return omega, recoil_D


def _kraus_common(state, mc, omega, recoil_D, dt, dW):
    phi, eta = mc.lo_phase_phi_det, mc.eta_det
    mean, cov = state.mean.copy(), state.cov.copy()
    z_mean0 = mean[0]

    # detection Hamiltonian: trap + shear chi z^2 - f z with the known force
    chi = 2 * recoil_D * eta * np.cos(phi) * np.sin(phi)
    f = np.sqrt(2 * recoil_D * eta) * np.sin(phi) * (dW / dt) \
        + 4 * recoil_D * eta * np.cos(phi) * np.sin(phi) * z_mean0
    gen = np.array([[0.0, omega], [-(omega + 2 * chi), 0.0]])
    M = sla.expm(gen * dt)
    mean = M @ mean
    cov = M @ cov @ M.T
    mean = mean + np.array([0.0, f * dt])

    if eta > 0 and abs(np.cos(phi)) > 1e-15:
        # record-conditioned localization: Bayes update with variance R
        lam = 2 * recoil_D * eta * np.cos(phi) ** 2
        R = 1.0 / (4 * lam * dt)
        center = z_mean0 + dW / (np.sqrt(8 * recoil_D * eta)
                                 * np.cos(phi) * dt)
        s = cov[0, 0] + R
        gain = cov[:, 0] / s
        mean = mean + gain * (center - mean[0])
        cov = cov - np.outer(cov[:, 0], cov[0, :]) / s
        # measurement dephasing: momentum diffusion at rate 2 D eta cos^2
        cov = cov + np.array([[0.0, 0.0], [0.0, lam * dt]])
    return mean, cov


# ---------------------------------------------------------------------------
# LOCC feed-forward unraveling
# ---------------------------------------------------------------------------

def feasible_gamma_interval(cs: CouplingSet):
    """Interval [Gamma_lo, Gamma_hi] of measurement accuracies for which both
    diagonal feed-forward diffusion rates stay non-negative (roots of
    Gamma^2 - D_jj Gamma + (g_r +/- g_a)^2 / 4 = 0)."""
    lo, hi = 0.0, np.inf
    for d, g in ((cs.D[0, 0].real, cs.freq_shift_1),
                 (cs.D[1, 1].real, cs.freq_shift_2)):
        disc = d**2 - g**2
        if disc < 0:
            return None
        root = np.sqrt(disc)
        lo = max(lo, (d - root) / 2)
        hi = min(hi, (d + root) / 2)
    if lo > hi:
        return None
    return lo, hi


def _feedforward_diffusion(cs: CouplingSet, gamma):
    d11 = cs.D[0, 0].real - gamma - cs.freq_shift_1**2 / (4 * gamma)
    d22 = cs.D[1, 1].real - gamma - cs.freq_shift_2**2 / (4 * gamma)
    d12 = cs.D[0, 1].real
    return np.array([[d11, d12], [d12, d22]])


def resolve_gamma(cs: CouplingSet, gamma=None):
    """Measurement accuracy for the feed-forward scheme: the supplied value,
    or D11/2 projected into the feasible interval.  Raises
    InfeasibleMeasurementError when no accuracy keeps the full feed-forward
    diffusion matrix PSD."""
    interval = feasible_gamma_interval(cs)
    if interval is None:
        raise InfeasibleMeasurementError(
            "no measurement accuracy keeps the diagonal feed-forward "
            "diffusion rates non-negative", interval=None)
    lo, hi = interval
    lo = max(lo, 1e-12 * max(cs.D[0, 0].real, cs.D[1, 1].real))
    if gamma is None:
        gamma = float(np.clip(cs.D[0, 0].real / 2, lo, hi))
    elif not lo <= gamma <= hi:
        raise InfeasibleMeasurementError(
            f"measurement accuracy {gamma:g} outside the feasible interval "
            f"[{lo:g}, {hi:g}]", interval=(lo, hi))
    dff = _feedforward_diffusion(cs, gamma)
    if np.linalg.eigvalsh(dff)[0] < -1e-12 * max(1.0, np.abs(dff).max()):
        raise InfeasibleMeasurementError(
            f"feed-forward diffusion matrix not PSD at Gamma = {gamma:g} "
            f"(feasible diagonal interval [{lo:g}, {hi:g}])",
            interval=(lo, hi))
    return gamma


def _local_drift(cs: CouplingSet, sp: SystemParams):
    """Drift of the uncoupled oscillators with the local stiffness shifts:
    the feed-forward scheme has no coherent interaction term."""
    dd = build_drift_diffusion(cs, sp)
    a0 = dd.A.copy()
    a0[1, 2] = 0.0
    a0[3, 0] = 0.0
    return a0


def locc_feedforward_step(state: GaussianState, mc: MeasurementConfig,
                          cs: CouplingSet, sp: SystemParams, dt,
                          dW=None, rng=None, scheme="ito"):
    """One step of the measurement + feed-forward (LOCC) unraveling.

    Both particles are measured continuously (accuracy Gamma, unit efficiency)
    and driven by a common bath with the reduced feed-forward diffusion matrix;
    each measured signal feeds a displacement force on the *other* particle
    with gains 2(g_r + g_a) resp. 2(g_r - g_a).  No coherent interaction term
    appears; the ensemble average over the records reproduces the linearized
    optical-binding master equation.  scheme "stratonovich" evaluates the
    state-dependent coefficients at the Heun midpoint and agrees with "ito"
    to O(dt^2) per step.
    """
    if scheme not in ("ito", "stratonovich"):
        raise ValueError(f"unknown scheme {scheme!r}")
    gamma = resolve_gamma(cs, mc.Gamma)
    if dW is None:
        if rng is None:
            raise ValueError("provide dW or an rng")
        dW = rng.standard_normal(2) * np.sqrt(dt)
    a0 = _local_drift(cs, sp)
    dff = _feedforward_diffusion(cs, gamma)
    dmat = np.zeros((4, 4))
    dmat[1, 1] = 2 * dff[0, 0] + 2 * gamma
    dmat[3, 3] = 2 * dff[1, 1] + 2 * gamma
    dmat[1, 3] = dmat[3, 1] = 2 * dff[0, 1]
    scale = 1.0 / np.sqrt(8 * gamma)
    fb_gain = np.array([2 * cs.freq_shift_1, 2 * cs.freq_shift_2])

    def increments(mean, cov):
        g1 = np.sqrt(8 * gamma) * (cov @ _EZ1)
        g2 = np.sqrt(8 * gamma) * (cov @ _EZ2)
        dy = np.array([mean[0] * dt + dW[0] * scale,
                       mean[2] * dt + dW[1] * scale])
        dmean = a0 @ mean * dt + g1 * dW[0] + g2 * dW[1]
        dmean = dmean + fb_gain[0] * dy[1] * _EP1 + fb_gain[1] * dy[0] * _EP2
        dcov = (a0 @ cov + cov @ a0.T + dmat
                - np.outer(g1, g1) - np.outer(g2, g2)) * dt
        return dmean, dcov, dy

    dmean, dcov, dy = increments(state.mean, state.cov)
    if scheme == "stratonovich":
        mid_mean = state.mean + dmean
        mid_cov = state.cov + dcov
        dmean2, dcov2, dy2 = increments(mid_mean, mid_cov)
        dmean = 0.5 * (dmean + dmean2)
        dcov = 0.5 * (dcov + dcov2)
        dy = 0.5 * (dy + dy2)
    return GaussianState(state.mean + dmean, state.cov + dcov), dy[0], dy[1]


_EZ1 = np.array([1.0, 0.0, 0.0, 0.0])
_EP1 = np.array([0.0, 1.0, 0.0, 0.0])
_EZ2 = np.array([0.0, 0.0, 1.0, 0.0])
_EP2 = np.array([0.0, 0.0, 0.0, 1.0])


def locc_feedforward_trajectories(cs: CouplingSet, sp: SystemParams, n_traj,
                                  T, dt, mc: MeasurementConfig, *,
                                  record_stride=None,
                                  initial: GaussianState | None = None):
    """Vectorized ensemble of feed-forward trajectories.

    The conditional covariance flow is state-independent (one Riccati path
    shared by all trajectories); the conditional means and measurement
    records are per-trajectory.  Returns a list of TrajectoryRecords whose
    covariance entries reference the shared history.
    """
    gamma = resolve_gamma(cs, mc.Gamma)
    if initial is None:
        initial = GaussianState.vacuum(2)
    n_steps = max(1, int(round(T / dt)))
    stride = record_stride or max(1, n_steps // 100)
    sample_idx = np.arange(0, n_steps + 1, stride)
    if sample_idx[-1] != n_steps:
        sample_idx = np.append(sample_idx, n_steps)
    times = sample_idx * dt

    a0 = _local_drift(cs, sp)
    dff = _feedforward_diffusion(cs, gamma)
    dmat = np.zeros((4, 4))
    dmat[1, 1] = 2 * dff[0, 0] + 2 * gamma
    dmat[3, 3] = 2 * dff[1, 1] + 2 * gamma
    dmat[1, 3] = dmat[3, 1] = 2 * dff[0, 1]
    scale = 1.0 / np.sqrt(8 * gamma)
    fb1, fb2 = 2 * cs.freq_shift_1, 2 * cs.freq_shift_2
    digest = config_digest({
        "g_r": cs.g_r, "g_a": cs.g_a, "G": cs.G, "D": cs.D, "Gamma": gamma,
        "dt": dt, "T": T, "n_traj": n_traj, "seed": mc.seed,
    })

    # shared covariance path
    cov = initial.cov.copy()
    cov_samples = np.empty((len(sample_idx), 4, 4))
    cov_samples[0] = cov
    gains = np.empty((n_steps, 2, 4))
    for n in range(n_steps):
        g1 = np.sqrt(8 * gamma) * (cov @ _EZ1)
        g2 = np.sqrt(8 * gamma) * (cov @ _EZ2)
        gains[n, 0] = g1
        gains[n, 1] = g2
        cov = cov + (a0 @ cov + cov @ a0.T + dmat
                     - np.outer(g1, g1) - np.outer(g2, g2)) * dt
        where = np.searchsorted(sample_idx, n + 1)
        if where < len(sample_idx) and sample_idx[where] == n + 1:
            cov_samples[where] = cov

    # per-trajectory generators derived from (seed, trajectory index)
    root = np.random.SeedSequence(mc.seed)
    rngs = [np.random.default_rng(
        np.random.SeedSequence(entropy=root.entropy, spawn_key=(i,)))
        for i in range(n_traj)]
    means = np.tile(initial.mean, (n_traj, 1))
    mean_samples = np.empty((len(sample_idx), n_traj, 4))
    mean_samples[0] = means
    dy_samples = np.zeros((len(sample_idx), n_traj, 2))
    dy_accum = np.zeros((n_traj, 2))
    sqdt = np.sqrt(dt)
    chunk = 2048
    for start in range(0, n_steps, chunk):
        stop = min(start + chunk, n_steps)
        noise = np.empty((stop - start, n_traj, 2))
        for i, rng in enumerate(rngs):
            noise[:, i, :] = rng.standard_normal((stop - start, 2))
        noise *= sqdt
        for n in range(start, stop):
            dW = noise[n - start]
            dy1 = means[:, 0] * dt + dW[:, 0] * scale
            dy2 = means[:, 2] * dt + dW[:, 1] * scale
            means = means + means @ (a0.T * dt) \
                + dW[:, 0, None] * gains[n, 0] + dW[:, 1, None] * gains[n, 1]
            means[:, 1] += fb1 * dy2
            means[:, 3] += fb2 * dy1
            dy_accum[:, 0] += dy1
            dy_accum[:, 1] += dy2
            where = np.searchsorted(sample_idx, n + 1)
            if where < len(sample_idx) and sample_idx[where] == n + 1:
                mean_samples[where] = means
                dy_samples[where] = dy_accum
    return [TrajectoryRecord(times=times.copy(),
                             means=mean_samples[:, i, :].copy(),
                             covariances=cov_samples,
                             records=dy_samples[:, i, :].copy(),
                             seed=int(mc.seed), config_hash=digest)
            for i in range(n_traj)]


def ensemble_gaussian_moments(records):
    """Unconditional mean and covariance reconstructed from conditional
    trajectories: E[mu] and E[Sigma_c] + Cov(mu), per sample time."""
    stack = np.stack([r.means for r in records])  # (N, n_t, 4)
    mean = stack.mean(axis=0)
    centered = stack - mean[None]
    cov_means = np.einsum("rti,rtj->tij", centered, centered) / len(records)
    cov_cond = records[0].covariances
    return mean, cov_cond + cov_means


def homodyne_trajectories(cs: CouplingSet, sp: SystemParams, n_traj, T, dt,
                          mc: MeasurementConfig, *, record_stride=None,
                          initial: GaussianState | None = None):
    """Vectorized ensemble of two-particle conditional homodyne trajectories
    (shared Riccati covariance path, per-trajectory means and records)."""
    if initial is None:
        initial = GaussianState.vacuum(2)
    dd = build_drift_diffusion(cs, sp)
    d_diag = np.array([cs.D[0, 0].real, cs.D[1, 1].real])
    phi, eta = mc.lo_phase_phi_det, mc.eta_det
    n_steps = max(1, int(round(T / dt)))
    stride = record_stride or max(1, n_steps // 100)
    sample_idx = np.arange(0, n_steps + 1, stride)
    if sample_idx[-1] != n_steps:
        sample_idx = np.append(sample_idx, n_steps)
    times = sample_idx * dt
    digest = config_digest({
        "g_r": cs.g_r, "g_a": cs.g_a, "G": cs.G, "D": cs.D,
        "eta_det": eta, "lo_phase": phi, "dt": dt, "T": T,
        "n_traj": n_traj, "seed": mc.seed,
    })

    cov = initial.cov.copy()
    cov_samples = np.empty((len(sample_idx), 4, 4))
    cov_samples[0] = cov
    gains = np.empty((n_steps, 2, 4))
    scales = np.full(2, np.nan)
    for n in range(n_steps):
        gvecs, scl = _channel_vectors(cov, d_diag, eta, phi, mc.mode_overlap)
        # nan (not inf) marks information-free records: quiet propagation
        scales[:] = [s if np.isfinite(s) else np.nan for s in scl]
        gains[n] = np.stack(gvecs)
        ricc = dd.A @ cov + cov @ dd.A.T + dd.Dmat \
            - np.outer(gvecs[0], gvecs[0]) - np.outer(gvecs[1], gvecs[1])
        cov = cov + ricc * dt
        where = np.searchsorted(sample_idx, n + 1)
        if where < len(sample_idx) and sample_idx[where] == n + 1:
            cov_samples[where] = cov

    root = np.random.SeedSequence(mc.seed)
    rngs = [np.random.default_rng(
        np.random.SeedSequence(entropy=root.entropy, spawn_key=(i,)))
        for i in range(n_traj)]
    means = np.tile(initial.mean, (n_traj, 1))
    mean_samples = np.empty((len(sample_idx), n_traj, 4))
    mean_samples[0] = means
    dy_samples = np.zeros((len(sample_idx), n_traj, 2))
    dy_accum = np.zeros((n_traj, 2))
    cphi = np.cos(phi)
    sqdt = np.sqrt(dt)
    chunk = 2048
    for start in range(0, n_steps, chunk):
        stop = min(start + chunk, n_steps)
        noise = np.empty((stop - start, n_traj, 2))
        for i, rng in enumerate(rngs):
            noise[:, i, :] = rng.standard_normal((stop - start, 2))
        noise *= sqdt
        for n in range(start, stop):
            dW = noise[n - start]
            dy_accum[:, 0] += means[:, 0] * cphi * dt + dW[:, 0] * scales[0]
            dy_accum[:, 1] += means[:, 2] * cphi * dt + dW[:, 1] * scales[1]
            means = means + means @ (dd.A.T * dt) \
                + dW[:, 0, None] * gains[n, 0] + dW[:, 1, None] * gains[n, 1]
            where = np.searchsorted(sample_idx, n + 1)
            if where < len(sample_idx) and sample_idx[where] == n + 1:
                mean_samples[where] = means
                dy_samples[where] = dy_accum
    return [TrajectoryRecord(times=times.copy(),
                             means=mean_samples[:, i, :].copy(),
                             covariances=cov_samples,
                             records=dy_samples[:, i, :].copy(),
                             seed=int(mc.seed), config_hash=digest)
            for i in range(n_traj)]


# ---------------------------------------------------------------------------
# Modulated-phase squeezing drive
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SqueezeResult:
    times: np.ndarray
    var_plus: np.ndarray
    var_minus: np.ndarray
    stationary_var_plus: float


def squeezing_drive(sp: SystemParams, cs: CouplingSet, T, *, n_samples=200,
                    recoil_rate=None, method="ode", rtol=1e-10):
    """Variance histories of the relative-mode quadratures Z_+/- under the
    phase modulation phi(t) = 2 omega t.

    method "ode" integrates d var(Z_+/-)/dt = D11 -/+ 2 (G/kd) var(Z_+/-)
    (conservative configuration, cos kd = 1); method "lab" integrates the full
    time-dependent moment equations of the modulated master equation in the
    lab frame and reads the rotating-frame variances off the exact solution.
    The squashed quadrature saturates at D11 kd / 2G.
    """
    if abs(np.cos(sp.kd) - 1.0) > 1e-6:
        raise ValueError("squeezing drive requires cos(kd) = 1 "
                         "(conservative coupling)")
    if abs(sp.detuning_delta_omega) > 1e-9 * sp.mean_frequency_omega:
        raise ValueError("squeezing drive assumes equal trap frequencies")
    d11 = cs.D[0, 0].real if recoil_rate is None else float(recoil_rate)
    g_s = cs.G / sp.kd
    v_ss = d11 / (2 * g_s)
    times = np.linspace(0.0, T, n_samples)
    if method == "ode":
        v0 = 0.5
        var_plus = v_ss + (v0 - v_ss) * np.exp(-2 * g_s * times)
        if d11 == 0:
            var_minus = v0 * np.exp(2 * g_s * times)
        else:
            var_minus = -v_ss + (v0 + v_ss) * np.exp(2 * g_s * times)
        return SqueezeResult(times=times, var_plus=var_plus,
                             var_minus=var_minus, stationary_var_plus=v_ss)
    if method != "lab":
        raise ValueError(f"unknown method {method!r}")

    omega = sp.mean_frequency_omega
    g0 = cs.G / sp.kd  # cos(kd) = 1

    def a_of_t(t):
        gr = g0 * np.cos(2 * omega * t)
        gp = gm = gr  # g_a(t) = 0 at sin(kd) = 0
        return np.array([
            [0.0, omega, 0.0, 0.0],
            [-(omega + 2 * gp), 0.0, 2 * gp, 0.0],
            [0.0, 0.0, 0.0, omega],
            [2 * gm, 0.0, -(omega + 2 * gm), 0.0],
        ])

    dmat = np.zeros((4, 4))
    dmat[1, 1] = dmat[3, 3] = 2 * d11

    def rhs(t, y):
        cov = y.reshape(4, 4)
        a = a_of_t(t)
        return (a @ cov + cov @ a.T + dmat).ravel()

    cov0 = 0.5 * np.eye(4)
    sol = solve_ivp(rhs, (0.0, T), cov0.ravel(), t_eval=times,
                    method="DOP853", rtol=rtol, atol=1e-14)
    if not sol.success:
        raise RuntimeError(f"lab-frame integration failed: {sol.message}")
    var_plus = np.empty(n_samples)
    var_minus = np.empty(n_samples)
    for i, t in enumerate(times):
        cov = sol.y[:, i].reshape(4, 4)
        c, s = np.cos(omega * t), np.sin(omega * t)
        rot = np.array([[c, -s], [s, c]])
        R = sla.block_diag(rot, rot)
        cov_rot = R @ cov @ R.T
        # relative mode, then Z_+/- = (z_- +/- p_-)/sqrt(2)
        zm = (np.array([0, 0, 1, 0]) - np.array([1, 0, 0, 0])) / np.sqrt(2)
        pm = (np.array([0, 0, 0, 1]) - np.array([0, 1, 0, 0])) / np.sqrt(2)
        zp_vec = (zm + pm) / np.sqrt(2)
        zm_vec = (zm - pm) / np.sqrt(2)
        var_plus[i] = zp_vec @ cov_rot @ zp_vec
        var_minus[i] = zm_vec @ cov_rot @ zm_vec
    return SqueezeResult(times=times, var_plus=var_plus, var_minus=var_minus,
                         stationary_var_plus=v_ss)


def squeeze_drive_covariance_history(g_s, recoil_rate, times):
    """Two-mode covariance histories (particle basis z1,p1,z2,p2) under the
    modulated-phase squeezing drive in the co-rotating frame.

    g_s = G/kd is the drive rate (conservative configuration, cos kd = 1):
    the relative-mode quadrature Z_+ is squashed at rate 2 g_s while its
    conjugate is amplified and the common mode diffuses freely; recoil_rate
    is the (possibly detection- or squeezed-vacuum-reduced) local diffusion
    rate.  The rotating-frame transform is a local symplectic map, so the
    returned covariances witness the same logarithmic negativity as lab-frame
    states at matching times.
    """
    # ordering (z+, p+, z-, p-); drive acts on the relative mode only
    a = np.zeros((4, 4))
    a[2, 3] = a[3, 2] = -g_s
    dd = DriftDiffusion(A=a, Dmat=recoil_rate * np.eye(4))
    # particle basis: z1 = (z+ - z-)/sqrt2, z2 = (z+ + z-)/sqrt2 (same for p)
    s = 1 / np.sqrt(2)
    T = np.array([[s, 0, -s, 0],
                  [0, s, 0, -s],
                  [s, 0, s, 0],
                  [0, s, 0, s]])
    cov = 0.5 * np.eye(4)
    out = []
    t_prev = 0.0
    mean = np.zeros(4)
    for t in np.asarray(times, float):
        F, Q = _van_loan_blocks(dd.A, dd.Dmat, t - t_prev)
        cov = F @ cov @ F.T + Q
        t_prev = t
        out.append(GaussianState(mean, T @ cov @ T.T))
    return out


def _van_loan_blocks(A, Dmat, t):
    n = A.shape[0]
    block = np.zeros((2 * n, 2 * n))
    block[:n, :n] = A
    block[:n, n:] = Dmat
    block[n:, n:] = -A.T
    eb = sla.expm(block * t)
    F = eb[:n, :n]
    Q = eb[:n, n:] @ F.T
    return F, 0.5 * (Q + Q.T)
