"""Slow transport of an eigenstate around a loop.

Runs the sweep for increasing total times ``T``.  The leakage into the other
band falls roughly like ``1/T``, and the geometric phase extracted from two
sweeps approaches the loop's Berry phase.
"""

from __future__ import annotations

import numpy as np

from lorentzqm import ParameterPath, adiabatic_sweep, berry_phase_loop


def main() -> None:
    path = ParameterPath.theta_circle(0.3, 4096)
    loop_phase = berry_phase_loop(path).phase
    runs = {T: adiabatic_sweep(path, T) for T in (50.0, 100.0, 200.0)}
    print(f"{'T':>6} {'infidelity':>12} {'geometric phase':>16}")
    for T, r in runs.items():
        print(f"{T:6.0f} {r.final_infidelity:12.3e} {r.geometric_phase:16.6f}")
    (T1, r1), (T2, r2) = list(runs.items())[-2:]
    b1 = r1.geometric_phase
    b2 = b1 + np.angle(np.exp(1j * (r2.geometric_phase - b1)))
    extracted = np.angle(np.exp(1j * (T2 * b2 - T1 * b1) / (T2 - T1)))
    print(f"\nextracted phase {extracted:.6f}, loop phase {loop_phase:.6f}")


if __name__ == "__main__":
    main()
