"""Optical binding as a measurement-plus-feed-forward loop.

Runs the conditional unraveling in which each particle is only measured
locally and pushed by a force proportional to the *other* particle's
measurement record -- no coherent interaction anywhere -- and shows that the
ensemble average over the records reproduces the optical-binding master
equation moments, while every single conditional state stays unentangled.
This is the constructive content of the no-entanglement theorem.
"""

import numpy as np

from optibind import (
    GaussianState,
    MeasurementConfig,
    build_drift_diffusion,
    evolve_gaussian,
    locc_feedforward_trajectories,
    log_negativity,
)
from optibind.stochastic import ensemble_gaussian_moments, resolve_gamma
from support import synthetic_couplings, synthetic_system


def main():
    cs = synthetic_couplings(g_r=0.3, g_a=0.1, d11=1.0, d22=1.0, re_d12=0.2)
    sp = synthetic_system(omega=1.0)
    gamma = resolve_gamma(cs)
    print(f"rates: g_r = {cs.g_r}, g_a = {cs.g_a}, D11 = {cs.D[0, 0].real}, "
          f"Re D12 = {cs.D[0, 1].real}")
    print(f"measurement accuracy Gamma = {gamma} (projected default D11/2)")

    n_traj, T, dt = 4000, 2.0, 5e-4
    recs = locc_feedforward_trajectories(cs, sp, n_traj, T, dt,
                                         MeasurementConfig(seed=1))
    mean, cov_total = ensemble_gaussian_moments(recs)
    target = evolve_gaussian(GaussianState.vacuum(2),
                             build_drift_diffusion(cs, sp), T)
    dev = np.abs(cov_total[-1] - target.cov).max()
    se = np.abs(np.diag(target.cov)).max() * np.sqrt(2 / n_traj)
    print(f"\nensemble of {n_traj} trajectories at T = {T}:")
    print(f"  max |cov(feed-forward) - cov(master equation)| = {dev:.4f}")
    print(f"  Monte-Carlo scale (1 SE) = {se:.4f}")

    en = max(log_negativity(GaussianState(np.zeros(4), c))
             for c in recs[0].covariances)
    print(f"  max conditional log-negativity along a trajectory = {en:.2e}")
    print("local measurements + classical communication reproduce optical "
          "binding exactly, so the interaction cannot entangle")


if __name__ == "__main__":
    main()
