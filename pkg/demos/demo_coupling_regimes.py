"""Linearized coupling rates and the (phi, kd) regime map.

Walks the four pure operating points of the coupling map -- purely reciprocal,
maximally unidirectional, purely antireciprocal, and maximally
recoil-correlated -- and prints the rates g_r, g_a, Re D12 together with the
regime flags at each.  Optionally renders the full map with matplotlib
(--plot writes regime_map.png).
"""

import sys

import numpy as np

from optibind import classify_regime, couplings, standard_system

POINTS = [
    ("I   purely reciprocal", 60 * np.pi, 0.0),
    ("II  maximally unidirectional", 60 * np.pi + 3 * np.pi / 4,
     3 * np.pi / 4),
    ("III purely antireciprocal", 60 * np.pi + np.pi / 2, np.pi / 2),
    ("IV  recoil correlations only", 60 * np.pi + np.pi / 2, 0.0),
]


def main(plot=False):
    for name, kd, phi in POINTS:
        sp = standard_system(kd=kd, phi=phi)
        cs = couplings(sp)
        label = classify_regime(cs)
        scale = cs.G / sp.kd
        print(f"{name}  (kd = {kd:.3f}, phi = {phi:.3f})")
        print(f"   g_r/(G/kd) = {cs.g_r / scale:+.3f}   "
              f"g_a/(G/kd) = {cs.g_a / scale:+.3f}   "
              f"ReD12/(G/kd) = {cs.D[0, 1].real / scale:+.3f}")
        print(f"   couplings on p1/p2: {cs.freq_shift_1 / scale:+.3f} / "
              f"{cs.freq_shift_2 / scale:+.3f}   dominant regime: "
              f"{label.dominant}")
    if plot:
        render_map()


def render_map():
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    sp0 = standard_system(kd=60 * np.pi, phi=0.0)
    cs0 = couplings(sp0)
    base = cs0.G / sp0.kd * sp0.kd
    colors = {"reciprocal": 0, "directional": 1, "antireciprocal": 2,
              "recoil-correlated": 3, "mixed": 4}
    kd_axis = np.linspace(55 * np.pi, 63 * np.pi, 220)
    phi_axis = np.linspace(-np.pi, np.pi, 160)
    img = np.zeros((len(phi_axis), len(kd_axis)))
    from optibind import CouplingSet
    for i, phi in enumerate(phi_axis):
        for j, kd in enumerate(kd_axis):
            g = base / kd
            d12 = g * np.sin(kd) * (np.cos(phi) + 1j * np.sin(phi))
            cs = CouplingSet(
                G=cs0.G, g_r=g * np.cos(kd) * np.cos(phi),
                g_a=g * np.sin(kd) * np.sin(phi),
                D=np.array([[cs0.D[0, 0], d12],
                            [np.conj(d12), cs0.D[1, 1]]]))
            img[i, j] = colors[classify_regime(cs).dominant]
    plt.figure(figsize=(7, 3.2))
    plt.pcolormesh(kd_axis, phi_axis, img, cmap="viridis", shading="auto")
    plt.xlabel("kd")
    plt.ylabel("relative tweezer phase phi")
    plt.title("dominant coupling regime")
    plt.tight_layout()
    plt.savefig("regime_map.png", dpi=150)
    print("wrote regime_map.png")


if __name__ == "__main__":
    main(plot="--plot" in sys.argv)
