"""Three physical generators: a one-dimensional Fermi gas, an antiferromagnet and a vortex phonon.

Prints the Fermi gas stability boundary along ``g4``, the antiferromagnetic
magnon dispersion with its Bogoliubov amplitudes, and the phonon Berry phase
for vortices of winding one to three.
"""

from __future__ import annotations

import numpy as np

from lorentzqm import FermiGasParams, VortexField, afm_dispersion, eigensolve, fermi_gas_generator, vortex_berry_phase


def fermi() -> None:
    print("Fermi gas, v_F = 1, q = 1, g2 = 4")
    for g4 in np.linspace(-6.0, 2.0, 9):
        p = FermiGasParams(v_F=1.0, g2=4.0, g4=g4, q=1.0)
        e = eigensolve(fermi_gas_generator(p))
        print(f"  g4 = {g4:+5.1f}  a = {p.diagonal:+.4f}  b = {p.offdiagonal:+.4f}  {e.stability.value}")


def afm() -> None:
    k = np.pi * np.array([0.05, 0.25, 0.5, 0.75, 0.95])
    d = afm_dispersion(k)
    print("\nantiferromagnet, J = 1, S = 1/2, Z = 2")
    for i in range(len(k)):
        print(f"  k/pi = {k[i] / np.pi:.2f}  E = {d.E[i]:.4f}  |u| = {abs(d.u[i]):.4f}  |v| = {abs(d.v[i]):.4f}")


def vortex() -> None:
    th = np.linspace(0, 2 * np.pi, 2049)
    loop = np.stack([2 * np.cos(th), 2 * np.sin(th)], axis=1)
    loop[-1] = loop[0]
    print("\nvortex phonon, q = (0.3, 0.1)")
    for w in (1, 2, 3):
        r = vortex_berry_phase(VortexField.uniform(1.0, w, mu=-1.0), loop, (0.3, 0.1))
        print(f"  winding {w}: phase {r.phase:+.6f}  -integral 2|v|^2 dalpha {r.reference:+.6f}")


if __name__ == "__main__":
    fermi()
    afm()
    vortex()
