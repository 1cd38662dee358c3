"""Spectrum of a 2x2 generator across the light cone, then a Lorentz evolution.

Sweeps ``m1`` at fixed ``m3 = 1`` so the generator passes from the stable
interior through the cone ``m1 = m3`` into the unstable region, and evolves a
state under one stable and one unstable generator to show that the Minkowski
interval is conserved in both cases while only the stable one stays bounded.
"""

from __future__ import annotations

import numpy as np

from lorentzqm import SpinorState, eigensolve, evolve, from_mdecomp


def sweep() -> None:
    print(f"{'m1':>6} {'cone distance':>14} {'stability':>10}  eigenvalues")
    for m1 in np.linspace(0.0, 1.5, 7):
        gen = from_mdecomp(m1, 0.0, 1.0)
        e = eigensolve(gen)
        E = ", ".join(f"{z.real:+.4f}{z.imag:+.4f}i" for z in e.eigenvalues)
        print(f"{m1:6.2f} {gen.cone_distance:14.4f} {e.stability.value:>10}  {E}")


def evolution() -> None:
    t = np.linspace(0.0, 5.0, 6)
    for m1, label in ((0.6, "stable"), (1.4, "unstable")):
        gen = from_mdecomp(m1, 0.0, 1.0)
        psi = SpinorState(np.array([1.0 + 0.2j, 0.3 - 0.1j]), gen.metric)
        tr = evolve(psi, gen, t)
        print(f"\n{label} generator (m1 = {m1}):")
        print(f"  growth      {np.array2string(tr.growth, precision=3)}")
        print(f"  max drift   {np.max(tr.interval_drift):.2e}")


if __name__ == "__main__":
    sweep()
    evolution()
