"""Berry phase on constant-angle loops and the flux density over the cone.

For loops at angle ``theta`` from the ``m3`` axis the measured phase is
compared with the exact loop phase ``-pi (1/sqrt(1 - tan^2 theta) - 1)``.
The per-angle flux density is then compared with the closed-form expression
the library also exposes.  The two differ in sign for this band, and their
magnitudes agree only near the axis.
"""

from __future__ import annotations

import numpy as np

from lorentzqm import ParameterPath, berry_phase_loop
from lorentzqm.geometry import closed_form_flux_density, measured_flux_density


def loops() -> None:
    print(f"{'theta':>6} {'measured':>12} {'exact':>12} {'estimator gap':>14}")
    for theta in (0.1, 0.3, 0.5, 0.7):
        res = berry_phase_loop(ParameterPath.theta_circle(theta, 4096))
        exact = -np.pi * (1 / np.sqrt(1 - np.tan(theta) ** 2) - 1)
        print(f"{theta:6.2f} {res.phase_unreduced:12.6f} {exact:12.6f} {res.discretization_error:14.2e}")


def flux() -> None:
    print(f"\n{'theta':>6} {'measured':>12} {'closed form':>12} {'ratio':>8}")
    for theta in (0.0, 0.2, 0.4, 0.6, 0.7):
        meas, _ = measured_flux_density(theta)
        closed = float(closed_form_flux_density(theta))
        print(f"{theta:6.2f} {meas:12.6f} {closed:12.6f} {meas / closed:8.3f}")


if __name__ == "__main__":
    loops()
    flux()
