"""Command-line front end: config ingestion, one subcommand per analysis,
parameter-sweep engine for the phase diagrams, and persistence of results
(round-trip-precision CSV) plus JSON run manifests.

Exit codes: 0 success, 2 config error, 3 physical infeasibility, 4 numerical
tolerance failure.
"""

import argparse
import csv
import json
import os
import re
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np
import yaml

from . import __version__
from . import linearize, modes, stochastic
from .fields import make_tweezer_pair, Particle
from .gaussian import GaussianState, build_drift_diffusion, evolve_history, \
    log_negativity, stationary_gaussian
from .linearize import couplings, effective_recoil, system_from_tweezers
from .provenance import canonical_json, config_digest
from .stochastic import InfeasibleMeasurementError, NoiseModel, \
    ensemble_mode_moments, langevin_trajectories, squeezing_drive

SCHEMA_VERSION = 1  # bumped on any CSV column change

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_INFEASIBLE = 3
EXIT_NUMERICAL = 4


class ConfigError(ValueError):
    """Invalid run configuration (unknown key, wrong type, missing field)."""


# ---------------------------------------------------------------------------
# Configuration schema
# ---------------------------------------------------------------------------

_SYSTEM_KEYS = {
    "wavelength_m": float,
    "waist_w_m": float,
    "tweezer_distance_kd": float,
    "separation_d_m": float,
    "relative_phase_phi_rad": float,
    "field_amp1_V_per_m": float,
    "field_amp2_V_per_m": float,
    "pol_angle_theta_rad": float,
    "particle_radius_m": float,
    "particle_density_kg_per_m3": float,
    "rel_permittivity": float,
    "eta_det": float,
    "squeeze_r": float,
    "overlap_zeta_abs": float,
}

_RANGE_KEYS = {"min": float, "max": float, "n": int}

_GRID_KEYS = {
    "phi_rad": dict,
    "kd": dict,
    "detuning_rad_per_s": dict,
    "g_a_rad_per_s": dict,
}

_ANALYSIS_KEYS = {
    "axes": str,                 # phase-diagram: "phi_kd" | "detuning_ga"
    "g_r_rad_per_s": float,      # detuning_ga axes / ep-scan
    "g_a_rad_per_s": float,      # ep-scan
    "detuning_rad_per_s": float,
    "duration_s": float,
    "dt_s": float,
    "n_samples": int,
    "n_trajectories": int,
    "n_configs": int,
    "scheme": str,
    "method": str,
    "mode": str,                 # entanglement: "survey" | "circumvention"
    "kd_min": float,
    "kd_max": float,
    "fit_trajectories": bool,
    "extra_damping_rad_per_s": float,
}

_TOP_KEYS = {
    "system": dict,
    "analysis": dict,
    "grid": dict,
    "output": dict,
    "seed": int,
    "tolerances": dict,
}

_OUTPUT_KEYS = {"directory": str}
_TOLERANCE_KEYS = {"uncertainty_tol": float}

_SYSTEM_DEFAULTS = {
    "wavelength_m": 1.55e-6,
    "waist_w_m": 1.0e-6,
    "tweezer_distance_kd": 60 * np.pi,
    "relative_phase_phi_rad": 0.0,
    "field_amp1_V_per_m": 2.0e6,
    "field_amp2_V_per_m": 2.0e6,
    "pol_angle_theta_rad": 0.0,
    "particle_radius_m": 50e-9,
    "particle_density_kg_per_m3": 2200.0,
    "rel_permittivity": 2.1,
    "eta_det": 0.0,
    "squeeze_r": 0.0,
    "overlap_zeta_abs": 1.0,
}


def _check_keys(block, allowed, path):
    if not isinstance(block, dict):
        raise ConfigError(f"{path}: expected a mapping")
    for key, value in block.items():
        if key not in allowed:
            raise ConfigError(f"{path}.{key}: unknown key")
        want = allowed[key]
        if want in (float, int):
            if isinstance(value, bool) or not isinstance(value, (int, float)):
                raise ConfigError(f"{path}.{key}: expected a number, got "
                                  f"{type(value).__name__}")
        elif want is bool:
            if not isinstance(value, bool):
                raise ConfigError(f"{path}.{key}: expected a boolean")
        elif not isinstance(value, want):
            raise ConfigError(f"{path}.{key}: expected {want.__name__}, got "
                              f"{type(value).__name__}")


def validate_config(cfg):
    """Schema validation with key-path diagnostics; unknown keys rejected."""
    _check_keys(cfg, _TOP_KEYS, "config")
    if "system" in cfg:
        _check_keys(cfg["system"], _SYSTEM_KEYS, "config.system")
    if "analysis" in cfg:
        _check_keys(cfg["analysis"], _ANALYSIS_KEYS, "config.analysis")
    if "grid" in cfg:
        _check_keys(cfg["grid"], _GRID_KEYS, "config.grid")
        for axis, spec in cfg["grid"].items():
            _check_keys(spec, _RANGE_KEYS, f"config.grid.{axis}")
            for need in _RANGE_KEYS:
                if need not in spec:
                    raise ConfigError(f"config.grid.{axis}.{need}: missing")
            if spec["n"] < 1:
                raise ConfigError(f"config.grid.{axis}.n: must be >= 1")
    if "output" in cfg:
        _check_keys(cfg["output"], _OUTPUT_KEYS, "config.output")
    if "tolerances" in cfg:
        _check_keys(cfg["tolerances"], _TOLERANCE_KEYS, "config.tolerances")
    return cfg


class _ConfigLoader(yaml.SafeLoader):
    """SafeLoader that also accepts exponent floats without a signed
    exponent (2.0e6), which plain YAML 1.1 would read as a string."""


_ConfigLoader.add_implicit_resolver(
    "tag:yaml.org,2002:float",
    re.compile(
        r"""^(?:[-+]?(?:[0-9][0-9_]*)\.[0-9_]*(?:[eE][-+]?[0-9]+)?
        |[-+]?(?:[0-9][0-9_]*)(?:[eE][-+]?[0-9]+)
        |[-+]?\.(?:inf|Inf|INF)
        |\.(?:nan|NaN|NAN))$""", re.X),
    list("-+0123456789."))


def load_config(path):
    try:
        with open(path) as fh:
            cfg = yaml.load(fh, Loader=_ConfigLoader) or {}
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}")
    except yaml.YAMLError as exc:
        raise ConfigError(f"config parse error in {path}: {exc}")
    return validate_config(cfg)


_DOMINANT_VOCABULARY = {"reciprocal", "directional", "antireciprocal",
                        "recoil-correlated", "mixed"}
_PT_VOCABULARY = {modes.PT_UNBROKEN, modes.PT_BROKEN, modes.PT_EXCEPTIONAL}


@dataclass
class PhaseDiagramGrid:
    """Sweep result: axis definitions plus one labelled row per grid cell.

    The cell count must equal the product of the axis resolutions and every
    label must come from the closed regime/phase vocabulary.
    """

    axes: dict
    header: list
    rows: list
    label_column: str

    def __post_init__(self):
        expected = int(np.prod([len(v) for v in self.axes.values()]))
        if len(self.rows) != expected:
            raise ValueError(f"cell count {len(self.rows)} != product of "
                             f"resolutions {expected}")
        col = self.header.index(self.label_column)
        vocabulary = _DOMINANT_VOCABULARY | _PT_VOCABULARY
        for row in self.rows:
            if row[col] not in vocabulary:
                raise ValueError(f"label {row[col]!r} outside the closed "
                                 "vocabulary")


@dataclass
class RunConfig:
    """Validated run configuration plus CLI overrides."""

    data: dict
    seed: int = 0
    out_dir: str = "."
    threads: int = 1

    @property
    def system(self):
        merged = dict(_SYSTEM_DEFAULTS)
        merged.update(self.data.get("system", {}))
        return merged

    @property
    def analysis(self):
        return self.data.get("analysis", {})

    @property
    def grid(self):
        return self.data.get("grid", {})

    def digest(self):
        return config_digest({"config": self.data, "seed": self.seed})


def build_system(cfg: RunConfig):
    sysc = cfg.system
    wavelength = sysc["wavelength_m"]
    k = 2 * np.pi / wavelength
    if "separation_d_m" in sysc:
        sep = sysc["separation_d_m"]
    else:
        sep = sysc["tweezer_distance_kd"] / k
    eps0 = linearize.CONSTANTS.epsilon0
    radius = sysc["particle_radius_m"]
    alpha = 4 * np.pi * eps0 * radius**3 \
        * (sysc["rel_permittivity"] - 1) / (sysc["rel_permittivity"] + 2)
    mass = sysc["particle_density_kg_per_m3"] * 4 / 3 * np.pi * radius**3
    tw = make_tweezer_pair(
        wavelength, sysc["waist_w_m"], sep,
        sysc["field_amp1_V_per_m"], sysc["field_amp2_V_per_m"],
        phi1=sysc["relative_phase_phi_rad"], phi2=0.0,
        pol_angle_theta=sysc["pol_angle_theta_rad"])
    return system_from_tweezers(
        tw, Particle(alpha=alpha, mass=mass), eta_det=sysc["eta_det"],
        squeeze_r=sysc["squeeze_r"], overlap_zeta=sysc["overlap_zeta_abs"])


# ---------------------------------------------------------------------------
# Output helpers
# ---------------------------------------------------------------------------

def _fmt(value):
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (float, np.floating)):
        return repr(float(value))  # shortest round-trip representation
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return str(value)


def write_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(v) for v in row])


def write_manifest(path, command, cfg: RunConfig, outputs, wall_time,
                   extra=None):
    manifest = {
        "command": command,
        "schema_version": SCHEMA_VERSION,
        "code_version": __version__,
        "config": cfg.data,
        "config_hash": cfg.digest(),
        "seed": cfg.seed,
        "outputs": outputs,
        "extra": extra or {},
        # timestamps live only here so data files stay byte-identical
        "wall_time_s": wall_time,
    }
    with open(path, "w") as fh:
        json.dump(json.loads(canonical_json(manifest)), fh, indent=2,
                  sort_keys=True)
        fh.write("\n")
    return manifest


def _axis(spec):
    return np.linspace(spec["min"], spec["max"], spec["n"])


def _pmap(fn, items, threads):
    if threads <= 1 or len(items) < 4:
        return [fn(item) for item in items]
    with ProcessPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items, chunksize=max(1, len(items) // (4 * threads))))


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------

def _pure_point_notes(cs):
    notes = []
    re_d12 = cs.D[0, 1].real
    scale = max(abs(cs.g_r), abs(cs.g_a), abs(re_d12), 1e-300)
    tol = 1e-9 * scale
    if abs(cs.g_a) <= tol and abs(re_d12) <= tol and abs(cs.g_r) > tol:
        notes.append("purely reciprocal")
    if abs(cs.g_r - cs.g_a) <= tol and abs(cs.g_r) > tol:
        notes.append("maximally unidirectional")
    if abs(cs.g_r) <= tol and abs(re_d12) <= tol and abs(cs.g_a) > tol:
        notes.append("purely antireciprocal")
    if abs(cs.g_r) <= tol and abs(cs.g_a) <= tol and abs(re_d12) > tol:
        notes.append("maximal recoil correlations")
    return notes


def cmd_rates(cfg: RunConfig):
    t0 = time.perf_counter()
    sp = build_system(cfg)
    cs = couplings(sp)
    label = modes.classify_regime(cs)
    report = {
        "kd": sp.kd,
        "relative_phase_phi_rad": sp.relative_phase_phi,
        "mean_frequency_omega_rad_per_s": sp.mean_frequency_omega,
        "mean_frequency_Hz": sp.mean_frequency_omega / (2 * np.pi),
        "detuning_delta_omega_rad_per_s": sp.detuning_delta_omega,
        "G_rad_per_s": cs.G,
        "g_r_rad_per_s": cs.g_r,
        "g_a_rad_per_s": cs.g_a,
        "freq_shift_1_rad_per_s": cs.freq_shift_1,
        "freq_shift_2_rad_per_s": cs.freq_shift_2,
        "D11_per_s": cs.D[0, 0].real,
        "D22_per_s": cs.D[1, 1].real,
        "re_D12_per_s": cs.D[0, 1].real,
        "im_D12_per_s": cs.D[0, 1].imag,
        "positivity_margin": cs.positivity_margin,
        "effective_D11_per_s": effective_recoil(cs.D[0, 0].real, sp),
        "regime_flags": {k: bool(v) for k, v in label.flags.items()},
        "dominant_regime": label.dominant,
        "notes": _pure_point_notes(cs),
    }
    out = os.path.join(cfg.out_dir, "rates.json")
    with open(out, "w") as fh:
        json.dump(json.loads(canonical_json(report)), fh, indent=2,
                  sort_keys=True)
        fh.write("\n")
    for key, value in report.items():
        if isinstance(value, float):
            print(f"{key:36s} {value: .9e}")
        else:
            print(f"{key:36s} {value}")
    write_manifest(os.path.join(cfg.out_dir, "rates_manifest.json"), "rates",
                   cfg, ["rates.json"], time.perf_counter() - t0)
    return EXIT_OK


_PHASE_HEADER = ["phi_rad", "kd", "g_r_rad_per_s", "g_a_rad_per_s",
                 "re_D12_per_s", "reciprocal", "directional",
                 "antireciprocal", "recoil_correlated", "dominant",
                 "re_omega_plus", "im_omega_plus", "re_omega_minus",
                 "im_omega_minus"]


def _phase_cell(args):
    phi, kd, g_over_kd_base, kd_base, domega = args
    # far-field closed forms; G/kd scales as 1/kd from the base configuration
    g = g_over_kd_base * kd_base / kd
    g_r = g * np.cos(kd) * np.cos(phi)
    g_a = g * np.sin(kd) * np.sin(phi)
    re_d12 = g * np.sin(kd) * np.cos(phi)
    return phi, kd, g_r, g_a, re_d12, domega


def cmd_phase_diagram(cfg: RunConfig):
    t0 = time.perf_counter()
    axes = cfg.analysis.get("axes", "phi_kd")
    rows = []
    axis_arrays = {}
    if axes == "phi_kd":
        sp = build_system(cfg)
        cs0 = couplings(sp)
        d11 = cs0.D[0, 0].real
        d22 = cs0.D[1, 1].real
        grid = cfg.grid
        phi_axis = _axis(grid.get("phi_rad",
                                  {"min": -np.pi + 1e-9, "max": np.pi,
                                   "n": 61}))
        kd_axis = _axis(grid.get("kd", {"min": 10.0, "max": 300.0, "n": 61}))
        axis_arrays = {"phi_rad": phi_axis, "kd": kd_axis}
        domega = cfg.analysis.get("detuning_rad_per_s",
                                  sp.detuning_delta_omega)
        base = cs0.G / sp.kd
        cells = [(phi, kd, base, sp.kd, domega)
                 for phi in phi_axis for kd in kd_axis]
        for phi, kd, g_r, g_a, re_d12, dw in _pmap(_phase_cell, cells,
                                                   cfg.threads):
            d = np.array([[d11, re_d12 + 1j * g_a],
                          [re_d12 - 1j * g_a, d22]])
            cs = linearize.CouplingSet(G=cs0.G, g_r=g_r, g_a=g_a, D=d)
            label = modes.classify_regime(cs)
            wp, wm = modes.eigenfrequencies(cs, detuning=dw)
            rows.append([phi, kd, g_r, g_a, re_d12,
                         label.reciprocal, label.directional,
                         label.antireciprocal, label.recoil_correlated,
                         label.dominant, wp.real, wp.imag, wm.real, wm.imag])
        header = _PHASE_HEADER
    elif axes == "detuning_ga":
        g_r = cfg.analysis.get("g_r_rad_per_s", 1.0)
        grid = cfg.grid
        dw_axis = _axis(grid.get("detuning_rad_per_s",
                                 {"min": -4.0 * abs(g_r),
                                  "max": 4.0 * abs(g_r), "n": 61}))
        ga_axis = _axis(grid.get("g_a_rad_per_s",
                                 {"min": -2.0 * abs(g_r),
                                  "max": 2.0 * abs(g_r), "n": 61}))
        axis_arrays = {"detuning_rad_per_s": dw_axis,
                       "g_a_rad_per_s": ga_axis}
        header = ["detuning_rad_per_s", "g_a_rad_per_s", "classification",
                  "re_omega_plus", "im_omega_plus", "re_omega_minus",
                  "im_omega_minus"]
        for ga in ga_axis:
            cs = linearize.CouplingSet(
                G=max(abs(g_r), abs(ga), 1.0) * 100, g_r=g_r, g_a=ga,
                D=np.array([[1.0, 1j * ga], [-1j * ga, 1.0]])
                * max(abs(g_r), abs(ga), 1.0) * 100)
            for dw in dw_axis:
                spec = modes.mode_spectrum(cs, detuning=dw)
                wp, wm = spec.frequencies
                rows.append([dw, ga, spec.classification,
                             wp.real, wp.imag, wm.real, wm.imag])
    else:
        raise ConfigError(f"config.analysis.axes: unknown axes {axes!r}")

    label_col = "dominant" if axes == "phi_kd" else "classification"
    result = PhaseDiagramGrid(axes=axis_arrays, header=header, rows=rows,
                              label_column=label_col)
    out = os.path.join(cfg.out_dir, "phase_diagram.csv")
    write_csv(out, result.header, result.rows)
    write_manifest(os.path.join(cfg.out_dir, "phase_diagram_manifest.json"),
                   "phase-diagram", cfg, ["phase_diagram.csv"],
                   time.perf_counter() - t0,
                   extra={"n_cells": len(result.rows)})
    print(f"phase diagram: {len(result.rows)} cells -> {out}")
    return EXIT_OK


def cmd_evolve(cfg: RunConfig):
    t0 = time.perf_counter()
    sp = build_system(cfg)
    cs = couplings(sp)
    dd = build_drift_diffusion(cs, sp)
    duration = cfg.analysis.get("duration_s",
                                50 * 2 * np.pi / sp.mean_frequency_omega)
    n_samples = cfg.analysis.get("n_samples", 200)
    tol = cfg.data.get("tolerances", {}).get("uncertainty_tol", 1e-10)
    times = np.linspace(0.0, duration, n_samples)
    states = evolve_history(GaussianState.vacuum(2), dd, times,
                            uncertainty_tol=tol)
    header = ["t_s", "mean_z1", "mean_p1", "mean_z2", "mean_p2",
              "var_z1", "var_p1", "var_z2", "var_p2",
              "cov_z1z2", "cov_p1p2", "log_negativity"]
    rows = []
    for t, st in zip(times, states):
        rows.append([t, *st.mean,
                     st.cov[0, 0], st.cov[1, 1], st.cov[2, 2], st.cov[3, 3],
                     st.cov[0, 2], st.cov[1, 3], log_negativity(st)])
    out = os.path.join(cfg.out_dir, "evolve.csv")
    write_csv(out, header, rows)
    write_manifest(os.path.join(cfg.out_dir, "evolve_manifest.json"),
                   "evolve", cfg, ["evolve.csv"], time.perf_counter() - t0)
    print(f"evolution time series -> {out}")
    return EXIT_OK


def cmd_trajectories(cfg: RunConfig):
    t0 = time.perf_counter()
    sp = build_system(cfg)
    cs = couplings(sp)
    n_traj = cfg.analysis.get("n_trajectories", 1000)
    rate = max(abs(cs.g_r), abs(cs.g_a), cs.D[0, 0].real,
               abs(sp.detuning_delta_omega), 1e-300)
    duration = cfg.analysis.get("duration_s", 2.0 / rate)
    dt = cfg.analysis.get("dt_s", 1e-3 / rate)
    scheme = cfg.analysis.get("scheme", "euler")
    nm = NoiseModel.from_couplings(cs, seed=cfg.seed, dt=dt)
    records = langevin_trajectories(cs, sp, n_traj, duration, nm,
                                    scheme=scheme)
    mean, conj_mom, _ = ensemble_mode_moments(records)
    times = records[0].times
    header = ["t_s", "re_mean_a1", "im_mean_a1", "re_mean_a2", "im_mean_a2",
              "mean_abs2_a1", "mean_abs2_a2", "mean_abs2_a_plus",
              "mean_abs2_a_minus"]
    rows = []
    for i, t in enumerate(times):
        m = mean[i]
        c = conj_mom[i]
        plus = 0.5 * (c[0, 0] + c[1, 1] + c[0, 1] + c[1, 0]).real
        minus = 0.5 * (c[0, 0] + c[1, 1] - c[0, 1] - c[1, 0]).real
        rows.append([t, m[0].real, m[0].imag, m[1].real, m[1].imag,
                     c[0, 0].real, c[1, 1].real, plus, minus])
    out = os.path.join(cfg.out_dir, "trajectories.csv")
    write_csv(out, header, rows)
    aborted = sum(r.aborted for r in records)
    write_manifest(os.path.join(cfg.out_dir, "trajectories_manifest.json"),
                   "trajectories", cfg, ["trajectories.csv"],
                   time.perf_counter() - t0,
                   extra={"n_trajectories": n_traj, "n_aborted": aborted})
    print(f"trajectory ensemble ({n_traj} trajectories, {aborted} aborted) "
          f"-> {out}")
    return EXIT_OK


def cmd_squeeze(cfg: RunConfig):
    t0 = time.perf_counter()
    sp = build_system(cfg)
    cs = couplings(sp)
    d11_eff = effective_recoil(cs.D[0, 0].real, sp)
    g_s = cs.G / sp.kd
    duration = cfg.analysis.get("duration_s", 4.0 / (2 * g_s))
    n_samples = cfg.analysis.get("n_samples", 200)
    method = cfg.analysis.get("method", "ode")
    result = squeezing_drive(sp, cs, duration, n_samples=n_samples,
                             recoil_rate=d11_eff, method=method)
    out = os.path.join(cfg.out_dir, "squeeze.csv")
    write_csv(out, ["t_s", "var_Z_plus", "var_Z_minus"],
              [[t, vp, vm] for t, vp, vm in
               zip(result.times, result.var_plus, result.var_minus)])
    write_manifest(os.path.join(cfg.out_dir, "squeeze_manifest.json"),
                   "squeeze", cfg, ["squeeze.csv"],
                   time.perf_counter() - t0,
                   extra={"stationary_var_plus": result.stationary_var_plus,
                          "effective_D11_per_s": d11_eff,
                          "squeezes_below_vacuum":
                              bool(result.stationary_var_plus < 0.5)})
    print(f"squeezing drive ({method}): stationary var(Z+) = "
          f"{result.stationary_var_plus:.6g} -> {out}")
    return EXIT_OK


def cmd_entanglement(cfg: RunConfig):
    t0 = time.perf_counter()
    mode = cfg.analysis.get("mode", "survey")
    sp0 = build_system(cfg)
    if mode == "circumvention":
        cs = couplings(sp0)
        d11_eff = effective_recoil(cs.D[0, 0].real, sp0)
        g_s = cs.G / sp0.kd
        duration = cfg.analysis.get("duration_s", 3.0 / (2 * g_s))
        n_samples = cfg.analysis.get("n_samples", 120)
        times, en = _squeeze_drive_log_negativity(cs, sp0, d11_eff, duration,
                                                  n_samples)
        out = os.path.join(cfg.out_dir, "entanglement.csv")
        write_csv(out, ["t_s", "log_negativity"],
                  [[t, e] for t, e in zip(times, en)])
        extra = {"max_log_negativity": float(np.max(en)),
                 "effective_ratio": float(d11_eff * sp0.kd / (2 * cs.G))}
        print(f"circumvention scan: max E_N = {np.max(en):.6g} -> {out}")
    elif mode == "survey":
        n_configs = cfg.analysis.get("n_configs", 200)
        kd_min = cfg.analysis.get("kd_min", 20.0)
        kd_max = cfg.analysis.get("kd_max", 300.0)
        rng = np.random.default_rng(cfg.seed)
        damping = cfg.analysis.get("extra_damping_rad_per_s")
        rows = []
        for _ in range(n_configs):
            kd = rng.uniform(kd_min, kd_max)
            phi = rng.uniform(-np.pi, np.pi)
            cs, sp = _random_far_field(sp0, kd, phi)
            en = _longtime_log_negativity(cs, sp, gamma=damping)
            rows.append([kd, phi, en])
        out = os.path.join(cfg.out_dir, "entanglement.csv")
        write_csv(out, ["kd", "phi_rad", "log_negativity"], rows)
        extra = {"n_configs": n_configs,
                 "max_log_negativity": float(max(r[2] for r in rows))}
        print(f"survey over {n_configs} configs: max E_N = "
              f"{extra['max_log_negativity']:.3g} -> {out}")
    else:
        raise ConfigError(f"config.analysis.mode: unknown mode {mode!r}")
    write_manifest(os.path.join(cfg.out_dir, "entanglement_manifest.json"),
                   "entanglement", cfg, ["entanglement.csv"],
                   time.perf_counter() - t0, extra=extra)
    return EXIT_OK


def _random_far_field(sp0: linearize.SystemParams, kd, phi):
    """Far-field configuration at (kd, phi) sharing sp0's tweezer hardware."""
    k = sp0.tw.wavenumber_k
    tw = make_tweezer_pair(
        2 * np.pi / k, sp0.tw.waist_w, kd / k,
        float(np.linalg.norm(sp0.tw.E1)), float(np.linalg.norm(sp0.tw.E2)),
        phi1=phi, phi2=0.0, pol_angle_theta=sp0.tw.pol_angle_theta)
    sp = system_from_tweezers(tw, sp0.p, eta_det=sp0.eta_det,
                              squeeze_r=sp0.squeeze_r,
                              overlap_zeta=sp0.overlap_zeta)
    return couplings(sp), sp


def _longtime_log_negativity(cs, sp, gamma=None):
    dd = build_drift_diffusion(cs, sp)
    if gamma is None:
        gamma = 0.1 * cs.D[0, 0].real
    st = stationary_gaussian(dd, extra_damping=gamma)
    return log_negativity(st)


def _squeeze_drive_log_negativity(cs, sp, d11_eff, duration, n_samples):
    """Entanglement witness history under the squeezing drive with reduced
    recoil (rotating-frame covariance flow mapped to the particle basis)."""
    times = np.linspace(0.0, duration, n_samples)
    states = stochastic.squeeze_drive_covariance_history(
        cs.G / sp.kd, d11_eff, times)
    return times, np.array([log_negativity(st) for st in states])


def cmd_reheating(cfg: RunConfig):
    t0 = time.perf_counter()
    sp = build_system(cfg)
    cs = couplings(sp)
    d11 = cs.D[0, 0].real
    d22 = cs.D[1, 1].real
    re_d12 = cs.D[0, 1].real
    dbar = 0.5 * (d11 + d22)
    report = {
        "D11_per_s": d11,
        "D22_per_s": d22,
        "re_D12_per_s": re_d12,
        "heating_common_per_s": dbar + re_d12,
        "heating_differential_per_s": dbar - re_d12,
        "relative_split": 2 * abs(re_d12) / dbar if dbar else 0.0,
    }
    outputs = ["reheating.json"]
    extra = {}
    if cfg.analysis.get("fit_trajectories", False):
        n_traj = cfg.analysis.get("n_trajectories", 4000)
        rate = max(dbar, 1e-300)
        duration = cfg.analysis.get("duration_s", 2.0 / rate)
        dt = cfg.analysis.get("dt_s", 2e-3 / rate)
        nm = NoiseModel.from_couplings(cs, seed=cfg.seed, dt=dt)
        records = langevin_trajectories(cs, sp, n_traj, duration, nm)
        times = records[0].times
        _, conj_mom, _ = ensemble_mode_moments(records)
        plus = 0.5 * (conj_mom[:, 0, 0] + conj_mom[:, 1, 1]
                      + conj_mom[:, 0, 1] + conj_mom[:, 1, 0]).real
        minus = 0.5 * (conj_mom[:, 0, 0] + conj_mom[:, 1, 1]
                       - conj_mom[:, 0, 1] - conj_mom[:, 1, 0]).real
        fit_plus = np.polyfit(times, plus, 1)[0]
        fit_minus = np.polyfit(times, minus, 1)[0]
        report["fit_heating_common_per_s"] = float(fit_plus)
        report["fit_heating_differential_per_s"] = float(fit_minus)
        rows = [[t, p, m] for t, p, m in zip(times, plus, minus)]
        write_csv(os.path.join(cfg.out_dir, "reheating_fit.csv"),
                  ["t_s", "mean_abs2_a_plus", "mean_abs2_a_minus"], rows)
        outputs.append("reheating_fit.csv")
        extra["n_trajectories"] = n_traj
    with open(os.path.join(cfg.out_dir, "reheating.json"), "w") as fh:
        json.dump(json.loads(canonical_json(report)), fh, indent=2,
                  sort_keys=True)
        fh.write("\n")
    for key, value in report.items():
        print(f"{key:36s} {value: .9e}")
    write_manifest(os.path.join(cfg.out_dir, "reheating_manifest.json"),
                   "reheating", cfg, outputs, time.perf_counter() - t0,
                   extra=extra)
    return EXIT_OK


def cmd_ep_scan(cfg: RunConfig):
    t0 = time.perf_counter()
    g_r = cfg.analysis.get("g_r_rad_per_s")
    g_a = cfg.analysis.get("g_a_rad_per_s")
    if g_r is None or g_a is None:
        sp = build_system(cfg)
        cs = couplings(sp)
    else:
        scale = max(abs(g_r), abs(g_a), 1e-300) * 100
        cs = linearize.CouplingSet(
            G=scale, g_r=g_r, g_a=g_a,
            D=np.array([[scale, 1j * g_a], [-1j * g_a, scale]]))
    eps = modes.exceptional_points(cs)
    span = max(abs(cs.g_a), abs(cs.g_r), 1e-300)
    grid = cfg.grid.get("detuning_rad_per_s",
                        {"min": 2 * cs.g_a - 6 * span,
                         "max": 2 * cs.g_a + 6 * span, "n": 241})
    rows = []
    for dw in _axis(grid):
        spec = modes.mode_spectrum(cs, detuning=dw)
        wp, wm = spec.frequencies
        rows.append([dw, spec.classification, wp.real, wp.imag,
                     wm.real, wm.imag])
    out = os.path.join(cfg.out_dir, "ep_scan.csv")
    write_csv(out, ["detuning_rad_per_s", "classification", "re_omega_plus",
                    "im_omega_plus", "re_omega_minus", "im_omega_minus"],
              rows)
    write_manifest(os.path.join(cfg.out_dir, "ep_scan_manifest.json"),
                   "ep-scan", cfg, ["ep_scan.csv"],
                   time.perf_counter() - t0,
                   extra={"exceptional_points_rad_per_s": eps,
                          "g_r_rad_per_s": cs.g_r, "g_a_rad_per_s": cs.g_a})
    print(f"exceptional points at detunings {eps} -> {out}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# Entry point
# ---------------------------------------------------------------------------

_COMMANDS = {
    "rates": cmd_rates,
    "phase-diagram": cmd_phase_diagram,
    "evolve": cmd_evolve,
    "trajectories": cmd_trajectories,
    "squeeze": cmd_squeeze,
    "entanglement": cmd_entanglement,
    "reheating": cmd_reheating,
    "ep-scan": cmd_ep_scan,
}


def build_parser():
    parser = argparse.ArgumentParser(
        prog="optibind",
        description="Quantum optical binding analyses for two tweezer-trapped "
                    "nanoparticles")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in _COMMANDS:
        cmd = sub.add_parser(name)
        cmd.add_argument("--config", required=True, help="YAML run config")
        cmd.add_argument("--seed", type=int, default=None,
                         help="override the config seed")
        cmd.add_argument("--out", default=None, help="output directory")
        cmd.add_argument("--threads", type=int, default=None,
                         help="worker pool size (default: OPTIBIND_THREADS "
                              "or the CPU count)")
    return parser


def _resolve_threads(flag):
    if flag is not None:
        return max(1, flag)
    env = os.environ.get("OPTIBIND_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise ConfigError(f"OPTIBIND_THREADS is not an integer: {env!r}")
    return os.cpu_count() or 1


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        data = load_config(args.config)
        seed = args.seed if args.seed is not None else data.get("seed", 0)
        out_dir = args.out or data.get("output", {}).get("directory", ".")
        os.makedirs(out_dir, exist_ok=True)
        cfg = RunConfig(data=data, seed=seed, out_dir=out_dir,
                        threads=_resolve_threads(args.threads))
        return _COMMANDS[args.command](cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except InfeasibleMeasurementError as exc:
        hint = ""
        if exc.interval:
            hint = (f"; choose measurement_gamma_per_s inside "
                    f"[{exc.interval[0]:g}, {exc.interval[1]:g}]")
        print(f"infeasible: {exc}{hint}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except ValueError as exc:
        print(f"infeasible: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except (RuntimeError, ArithmeticError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
