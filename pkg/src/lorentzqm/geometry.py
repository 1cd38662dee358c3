"""Adiabatic transport and geometric phase for two-mode generators.

Parameter points are ``R = (m1, m2, m3)``.  Bands are indexed by energy:
band 0 is the upper eigenvalue ``E1`` and band 1 the lower ``E2``; the Krein
signature of the tracked vector is recorded alongside (band 0 is space-like
for ``m3 > 0`` and time-like for ``m3 < 0``).

The connection of band ``j`` is ``A = i s_j <j|sigma grad|j>`` with ``s_j`` the
signature, so that ``s_j <j(R)|sigma|j(R + dR)> = exp(-i A.dR)`` to first order.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate

from .errors import BandTrackingError, ConeCrossingError, SpectrumError
from .evolution import evolve_timedep
from .generator import BASIS_M, ONCONE_RTOL, EigenSystem, eig2_batch
from .minkowski import SIGMA_11, SpinorState

__all__ = [
    "ParameterPath",
    "BerryResult",
    "CurvatureGrid",
    "FluxProfile",
    "FluxTotal",
    "AdiabaticResult",
    "adiabatic_element",
    "overlap_product_phase",
    "gradH_mdecomp",
    "berry_phase_loop",
    "refine_loop_phase",
    "connection",
    "curvature",
    "curvature_kubo",
    "curvature_map",
    "cap_flux",
    "measured_flux_density",
    "closed_form_flux_density",
    "flux_density_profile",
    "total_flux",
    "adiabatic_sweep",
    "extrapolated_geometric_phase",
    "BAND_TRACKING_THRESHOLD",
]

BAND_TRACKING_THRESHOLD = 0.5
_SIGNS = SIGMA_11.signs


def _wrap(x):
    """Map to (-pi, pi]."""
    return -((-np.asarray(x) + np.pi) % (2 * np.pi) - np.pi)


def _cone_margin(R: np.ndarray) -> np.ndarray:
    R = np.asarray(R, dtype=float)
    D = R[..., 2] ** 2 - R[..., 0] ** 2 - R[..., 1] ** 2
    return D / np.maximum(np.sum(R**2, axis=-1), np.finfo(float).tiny)


def _band_vectors(R: np.ndarray, band: int):
    E, V, sig = eig2_batch(R)
    return E[..., band], V[..., :, band], sig[..., band]


def _sdot(a, b):
    """Batched ``a^dagger sigma b`` over the last axis."""
    return np.sum(np.conj(a) * _SIGNS * b, axis=-1)


@dataclass(frozen=True, eq=False)
class ParameterPath:
    """Polyline in ``(m1, m2, m3)`` space.

    Closed paths repeat the first sample at the end.  Unless ``exploratory``,
    every sample must lie strictly outside the degeneracy cone.
    """

    samples: np.ndarray
    closed: bool = True
    exploratory: bool = False

    def __post_init__(self):
        R = np.array(self.samples, dtype=float)
        if R.ndim != 2 or R.shape[1] != 3 or len(R) < 2:
            raise ValueError(f"samples must have shape (N, 3), got {R.shape}")
        if self.closed and not np.array_equal(R[0], R[-1]):
            raise ValueError("closed path must end at its first sample")
        if not self.exploratory:
            bad = np.flatnonzero(_cone_margin(R) <= ONCONE_RTOL)
            if len(bad):
                raise ConeCrossingError(
                    f"{len(bad)} path samples on or inside the cone (first at index {bad[0]})"
                )
        R.flags.writeable = False
        object.__setattr__(self, "samples", R)

    @property
    def resolution(self) -> int:
        return len(self.samples) - 1 if self.closed else len(self.samples)

    @classmethod
    def polyline(cls, points, close: bool = True, exploratory: bool = False) -> "ParameterPath":
        P = np.asarray(points, dtype=float)
        if close and not np.array_equal(P[0], P[-1]):
            P = np.vstack([P, P[:1]])
        return cls(P, closed=close, exploratory=exploratory)

    @classmethod
    def theta_circle(cls, theta: float, n: int, radius: float = 1.0, cap: int = 1,
                     phi0: float = 0.0, orientation: int = 1) -> "ParameterPath":
        """Circle at polar angle ``theta`` from the ``cap * m3`` axis.

        ``orientation=+1`` runs counter-clockwise seen from ``+m3``.
        """
        phi = phi0 + orientation * np.linspace(0.0, 2 * np.pi, n + 1)
        R = radius * np.stack(
            [np.sin(theta) * np.cos(phi), np.sin(theta) * np.sin(phi), cap * np.cos(theta) * np.ones_like(phi)],
            axis=1,
        )
        R[-1] = R[0]
        return cls(R, closed=True)

    @classmethod
    def radial(cls, direction, r0: float, r1: float, n: int) -> "ParameterPath":
        """Out-and-back path along a ray from the origin."""
        d = np.asarray(direction, dtype=float)
        d = d / np.linalg.norm(d)
        r = np.concatenate([np.linspace(r0, r1, n), np.linspace(r1, r0, n)[1:]])
        return cls(r[:, None] * d[None, :], closed=True)

    def scaled(self, s: float) -> "ParameterPath":
        return ParameterPath(s * self.samples, self.closed, self.exploratory)

    @property
    def arclength(self) -> np.ndarray:
        seg = np.linalg.norm(np.diff(self.samples, axis=0), axis=1)
        return np.concatenate([[0.0], np.cumsum(seg)])

    def at(self, s) -> np.ndarray:
        """Points at normalised arc length ``s`` in ``[0, 1]`` (linear interpolation)."""
        L = self.arclength
        if L[-1] == 0:
            return np.broadcast_to(self.samples[0], np.shape(s) + (3,)).copy()
        x = np.asarray(s, dtype=float) * L[-1]
        return np.stack([np.interp(x, L, self.samples[:, k]) for k in range(3)], axis=-1)


@dataclass(frozen=True, eq=False)
class BerryResult:
    """Geometric phase of one band around a closed loop.

    ``phase`` is the overlap-product phase in (-pi, pi]; ``phase_unreduced``
    is the sum of the per-step phases in the library's smooth gauge, which
    resolves windings.  ``phase_quadrature`` integrates the sampled
    connection.  ``discretization_error`` is the gap between the two estimators.
    """

    phase: float
    phase_unreduced: float
    phase_quadrature: float
    connection_samples: np.ndarray
    band: int
    signature: int
    resolution: int
    discretization_error: float
    reality_residual: float
    min_overlap: float


def overlap_product_phase(V, signs=None, signature: int = 1) -> float:
    """Unreduced ``-sum arg(s <v_i|S|v_{i+1}>)`` over consecutive rows of ``V``.

    ``signs`` is the diagonal of the metric ``S`` (identity when None, which
    gives the familiar unitary Berry phase).
    """
    V = np.asarray(V, dtype=complex)
    S = np.ones(V.shape[-1]) if signs is None else np.asarray(signs, float)
    ov = np.sum(np.conj(V[:-1]) * S * V[1:], axis=-1)
    return -math.fsum(np.angle(signature * ov))


def _overlap_phases(V: np.ndarray, sig: np.ndarray) -> tuple[np.ndarray, float]:
    ov = _sdot(V[:-1], V[1:])
    mod = np.abs(ov)
    if np.min(mod) < BAND_TRACKING_THRESHOLD:
        i = int(np.argmin(mod))
        raise BandTrackingError(f"sigma-overlap modulus {mod[i]:.3f} below threshold at step {i}")
    return np.angle(sig[:-1] * ov), float(np.min(mod))


def connection(R, band: int, delta: float = 1e-4, return_residual: bool = False):
    """Connection covector ``A(R)`` by five-point central differences of
    gauge-fixed eigenvectors (step ``delta * |R|``).

    With ``return_residual`` also returns the largest real part of
    ``s <j|sigma dj>`` times ``|R|`` (scale free), which vanishes for
    sigma-normalised vectors; it measures differencing error.
    """
    R = np.asarray(R, dtype=float)
    h = delta * np.linalg.norm(R, axis=-1)[..., None, None]
    steps = h * np.eye(3)
    _, j, sig = _band_vectors(R, band)

    def vec(k):
        return _band_vectors(R[..., None, :] + k * steps, band)[1]

    dj = (8 * (vec(1) - vec(-1)) - (vec(2) - vec(-2))) / (12 * h)
    g = sig[..., None] * _sdot(j[..., None, :], dj)
    A = -g.imag
    if return_residual:
        r = np.linalg.norm(R, axis=-1)[..., None]
        resid = float(np.max(np.abs(g.real) * r)) if g.size else 0.0
        return A, resid
    return A


def berry_phase_loop(path: ParameterPath, band: int = 0, *, delta: float = 1e-4,
                     phase_noise: np.random.Generator | None = None,
                     reality_tol: float = 1e-10) -> BerryResult:
    """Berry phase of ``band`` around a closed path, by two estimators.

    (a) trapezoid quadrature of the finite-difference connection along the
    polyline; (b) the product of normalised sigma-overlaps of neighbouring
    samples.  ``phase_noise`` multiplies every sampled eigenvector by an
    independent random phase (gauge-invariance check).
    """
    if not path.closed:
        raise ValueError("berry_phase_loop needs a closed path")
    if path.resolution < 16:
        raise ValueError("loop resolution must be at least 16")
    if path.exploratory:
        bad = _cone_margin(path.samples) <= ONCONE_RTOL
        if bad.any():
            raise ConeCrossingError("loop touches or crosses the cone")
    R = path.samples
    _, V, sig = _band_vectors(R, band)
    if len(set(sig.tolist())) != 1:
        raise BandTrackingError("band signature changes along the loop")
    if phase_noise is not None:
        noise = np.exp(2j * np.pi * phase_noise.random(len(V)))
        noise[-1] = noise[0]  # the closing sample is the same state as the first
        V = V * noise[:, None]
    steps, min_ov = _overlap_phases(V, sig)
    unreduced = -float(np.sum(steps))

    A, resid = connection(R, band, delta, return_residual=True)
    scale = max(1.0, float(np.max(np.abs(A)) * np.max(np.linalg.norm(R, axis=1))))
    if resid > reality_tol * scale:
        raise AssertionError(f"connection imaginary residue {resid:.3e} exceeds {reality_tol:g}")
    dR = np.diff(R, axis=0)
    quad = float(np.sum(0.5 * (A[:-1] + A[1:]) * dR))
    return BerryResult(
        phase=float(_wrap(unreduced)),
        phase_unreduced=unreduced,
        phase_quadrature=quad,
        connection_samples=A,
        band=band,
        signature=int(sig[0]),
        resolution=path.resolution,
        discretization_error=abs(quad - unreduced),
        reality_residual=resid,
        min_overlap=min_ov,
    )


def refine_loop_phase(make_path, band: int = 0, n0: int = 256, tol: float = 1e-6,
                      n_max: int = 10**6) -> tuple[BerryResult, list[tuple[int, float]]]:
    """Double the resolution of ``make_path(n)`` until the overlap phase changes by
    less than ``tol``; warns when ``n_max`` is hit first."""
    ladder = []
    n = n0
    res = berry_phase_loop(make_path(n), band)
    ladder.append((n, res.phase_unreduced))
    while True:
        if 2 * n > n_max:
            warnings.warn(f"loop phase not converged to {tol:g} at resolution {n}", RuntimeWarning)
            return res, ladder
        n *= 2
        new = berry_phase_loop(make_path(n), band)
        ladder.append((n, new.phase_unreduced))
        if abs(new.phase_unreduced - res.phase_unreduced) < tol:
            return new, ladder
        res = new


def adiabatic_element(eig: EigenSystem, gradH, j: int = 0, k: int = 1) -> np.ndarray:
    """``<k|grad H|j> / (E_j - E_k)`` per gradient component; equals ``<k|sigma grad|j>``."""
    if not eig.is_stable:
        raise SpectrumError("adiabatic element needs a stable spectrum")
    Ej, Ek = eig.eigenvalues[j].real, eig.eigenvalues[k].real
    gap = Ej - Ek
    if abs(gap) <= ONCONE_RTOL * max(1.0, abs(Ej), abs(Ek)):
        raise SpectrumError("degenerate energies")
    vj, vk = eig.vectors[:, j], eig.vectors[:, k]
    return np.array([np.vdot(vk, np.asarray(G) @ vj) for G in gradH]) / gap


def gradH_mdecomp() -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """``dH/dm_i`` for ``H = sigma K(m)``."""
    return tuple(SIGMA_11.apply(B) for B in BASIS_M)


def curvature(R, band: int, delta: float = 1e-3, conn_delta: float = 1e-4) -> np.ndarray:
    """``B = curl A`` by central differences (step ``delta * |R|``) of connection samples."""
    R = np.asarray(R, dtype=float)
    h = delta * np.linalg.norm(R, axis=-1)[..., None]
    dA = np.empty(R.shape[:-1] + (3, 3))
    for i in range(3):
        e = np.zeros(3)
        e[i] = 1.0
        dA[..., i, :] = (connection(R + h * e, band, conn_delta) - connection(R - h * e, band, conn_delta)) / (2 * h)
    # dA[..., i, k] = d A_k / d R_i
    return np.stack(
        [dA[..., 1, 2] - dA[..., 2, 1], dA[..., 2, 0] - dA[..., 0, 2], dA[..., 0, 1] - dA[..., 1, 0]],
        axis=-1,
    )


def curvature_kubo(R, band: int) -> np.ndarray:
    """Sum-over-states curvature ``B_n = -2 s_n sum_{m != n} s_m Re X_m x Im X_m`` with
    ``X_m = <m|grad H|n> / (E_n - E_m)``; independent of finite differences."""
    R = np.asarray(R, dtype=float)
    E, V, sig = eig2_batch(R)
    other = 1 - band
    vn, vm = V[..., :, band], V[..., :, other]
    gap = E[..., band] - E[..., other]
    X = np.stack([np.sum(np.conj(vm) * (vn @ G.T), axis=-1) for G in gradH_mdecomp()], axis=-1) / gap[..., None]
    return -2 * sig[..., band, None] * sig[..., other, None] * np.cross(X.real, X.imag)


@dataclass(frozen=True, eq=False)
class CurvatureGrid:
    """Curvature on a rectilinear grid ``axes[0] x axes[1] x axes[2]``."""

    axes: tuple[np.ndarray, np.ndarray, np.ndarray]
    positions: np.ndarray
    B: np.ndarray
    theta: np.ndarray
    flux_density: np.ndarray
    reliable: np.ndarray
    band: int

    def divergence(self) -> np.ndarray:
        """Central-difference divergence on interior points."""
        div = 0.0
        for k, ax in enumerate(self.axes):
            Bk = self.B[..., k]
            sl_p = [slice(1, -1)] * 3
            sl_m = [slice(1, -1)] * 3
            sl_p[k] = slice(2, None)
            sl_m[k] = slice(None, -2)
            h = (ax[2:] - ax[:-2]).reshape([-1 if i == k else 1 for i in range(3)])
            div = div + (Bk[tuple(sl_p)] - Bk[tuple(sl_m)]) / h
        return div

    def relative_divergence(self) -> float:
        return float(np.max(np.abs(self.divergence())) / np.max(np.linalg.norm(self.B, axis=-1)))

    def direction_misalignment(self) -> np.ndarray:
        """Angle (radians) between ``B`` and the line through the origin and ``R``."""
        Rn = self.positions / np.linalg.norm(self.positions, axis=-1, keepdims=True)
        Bn = self.B / np.linalg.norm(self.B, axis=-1, keepdims=True)
        c = np.clip(np.abs(np.sum(Rn * Bn, axis=-1)), 0.0, 1.0)
        s = np.linalg.norm(np.cross(Rn, Bn), axis=-1)
        return np.arctan2(s, c)


def _polar_angle(R):
    """Angle from the nearer half of the m3 axis."""
    R = np.asarray(R, dtype=float)
    return np.arctan2(np.hypot(R[..., 0], R[..., 1]), np.abs(R[..., 2]))


def curvature_map(axes, band: int = 0, delta: float = 1e-3) -> CurvatureGrid:
    """Curvature, flux density per solid angle and quality flags on a grid.

    A point is flagged unreliable when its angular distance to the cone is
    less than ten grid spacings or ten stencil widths (field gradients there
    exceed what the difference stencils resolve).
    """
    axes = tuple(np.asarray(a, dtype=float) for a in axes)
    P = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1)
    if np.any(_cone_margin(P) <= ONCONE_RTOL):
        raise ConeCrossingError("curvature grid reaches the cone")
    B = curvature(P, band, delta)
    r = np.linalg.norm(P, axis=-1)
    theta = _polar_angle(P)
    flux = np.sum(B * P, axis=-1) * r  # B . Rhat * r^2
    spacing = max(float(np.max(np.diff(a))) if len(a) > 1 else 0.0 for a in axes)
    ang_margin = (np.pi / 4 - theta) * r
    reliable = ang_margin > 10 * np.maximum(spacing, delta * r)
    return CurvatureGrid(axes, P, B, theta, flux, reliable, band)


# ---------------------------------------------------------------- flux density

def closed_form_flux_density(theta, band: int = 0) -> np.ndarray:
    """``+/- (1 + tan^2)^{3/2} / (2 sqrt(1 - tan^2))``, ``+`` for band 0."""
    t2 = np.tan(np.asarray(theta, dtype=float)) ** 2
    return (1 if band == 0 else -1) * (1 + t2) ** 1.5 / (2 * np.sqrt(1 - t2))


def cap_flux(theta: float, band: int = 0, cap: int = 1, n: int = 4096, radius: float = 1.0) -> float:
    """Outward flux through the cap of half-angle ``theta`` about ``cap * m3``.

    Equals the unreduced loop phase of the bounding circle, oriented with the
    outward normal, Richardson-extrapolated from resolutions ``n`` and ``2n``.
    """
    if theta == 0:
        return 0.0

    def phase(k):
        path = ParameterPath.theta_circle(theta, k, radius=radius, cap=cap, orientation=cap)
        R = path.samples
        _, V, sig = _band_vectors(R, band)
        steps, _ = _overlap_phases(V, sig)
        return -math.fsum(steps)

    return (4 * phase(2 * n) - phase(n)) / 3


def measured_flux_density(theta: float, band: int = 0, cap: int = 1, n: int = 4096,
                          delta: float | None = None, tol: float = 1e-8,
                          max_halvings: int = 10) -> tuple[float, float]:
    """Flux per solid angle at polar angle ``theta`` from loop phases.

    Uses the flux between circles at ``theta +/- delta`` (or the cap of
    half-angle ``delta`` at ``theta = 0``) divided by the enclosed solid angle,
    Richardson-extrapolated over ``delta`` and ``delta/2``.  ``delta`` is
    halved until successive extrapolants change by at most ``tol`` (relative).
    Returns ``(density, last_change)``.
    """
    if not 0 <= theta < np.pi / 4:
        raise ValueError("theta must lie in [0, pi/4)")
    if delta is None:
        room = np.pi / 4 - theta
        delta = min(0.02, room / 4) if theta == 0 else min(0.02, theta / 2, room / 4)
    flux = {}

    def F(t):
        if t not in flux:
            flux[t] = cap_flux(t, band, cap, n)
        return flux[t]

    def density(d):
        if theta == 0:
            return F(d) / (2 * np.pi * (1 - np.cos(d)))
        lo, hi = theta - d, theta + d
        return (F(hi) - F(lo)) / (2 * np.pi * (np.cos(lo) - np.cos(hi)))

    prev = None
    change = float("inf")
    for k in range(max_halvings):
        d = delta / 2**k
        R = (4 * density(d / 2) - density(d)) / 3
        if prev is not None:
            change = abs(R - prev)
            if change <= tol * max(1.0, abs(R)):
                return float(R), float(change)
        prev = R
    return float(R), float(change)


@dataclass(frozen=True, eq=False)
class FluxProfile:
    theta: np.ndarray
    closed_form: np.ndarray       # (n_theta, 2) bands 0, 1
    measured: np.ndarray          # (n_theta, 2)
    step_error: np.ndarray        # (n_theta, 2)
    ladder_change: np.ndarray     # (n_theta, 2) change over the last resolution doubling
    resolution: np.ndarray        # (n_theta, 2)
    converged: np.ndarray         # (n_theta, 2) bool

    @property
    def ratio(self) -> np.ndarray:
        return self.measured / self.closed_form


def _ladder_density(theta, band, cap, n0, tol, n_max):
    n = n0
    prev, err = measured_flux_density(theta, band, cap, n)
    while True:
        n *= 2
        cur, err = measured_flux_density(theta, band, cap, n)
        change = abs(cur - prev)
        if change <= tol or 2 * n > n_max:
            return cur, err, change, n, change <= tol
        prev = cur


def flux_density_profile(theta_grid, n0: int = 512, tol: float = 1e-6, n_max: int = 2**16,
                         cap: int = 1) -> FluxProfile:
    """Closed-form and measured flux density for both bands on ``theta_grid``.

    The measured value at each angle is refined by doubling the loop
    resolution until it changes by at most ``tol``.
    """
    th = np.asarray(theta_grid, dtype=float)
    if np.any(th < 0) or np.any(th >= np.pi / 4):
        raise ValueError("theta must lie in [0, pi/4)")
    shape = (len(th), 2)
    cf = np.stack([closed_form_flux_density(th, 0), closed_form_flux_density(th, 1)], axis=1)
    meas, err, chg, res = (np.empty(shape) for _ in range(4))
    conv = np.empty(shape, dtype=bool)
    for i, t in enumerate(th):
        for b in (0, 1):
            meas[i, b], err[i, b], chg[i, b], res[i, b], conv[i, b] = _ladder_density(t, b, cap, n0, tol, n_max)
    return FluxProfile(th, cf, meas, err, chg, res.astype(int), conv)


@dataclass(frozen=True, eq=False)
class FluxTotal:
    """Flux out of both exterior caps up to ``theta_max``.

    ``measured_quadrature`` integrates the measured density; ``measured_stokes``
    is the sum of outward cap loop phases (the same quantity by Stokes).
    ``ladder`` holds running totals toward the cone for the extrapolation.
    """

    band: int
    theta_max: float
    measured_quadrature: float
    measured_stokes: float
    upper: float
    lower: float
    closed_form: float
    ladder_theta: np.ndarray
    ladder_measured: np.ndarray
    ladder_closed_form: np.ndarray
    measured_extrapolation: dict = field(default_factory=dict)
    closed_form_extrapolation: dict = field(default_factory=dict)


def _aitken(x: np.ndarray) -> np.ndarray:
    d2 = x[2:] - 2 * x[1:-1] + x[:-2]
    return x[2:] - (x[2:] - x[1:-1]) ** 2 / d2 if np.all(d2 != 0) else x[2:]


def _extrapolate(values: np.ndarray) -> dict:
    """Iterated Aitken extrapolation of a running total, or divergence diagnostics."""
    values = np.asarray(values, dtype=float)
    d = np.diff(values)
    ratios = d[1:] / d[:-1]
    r = float(ratios[-1])
    info = {"increments": d.tolist(), "ratios": ratios.tolist()}
    if np.all(np.abs(ratios[-3:]) < 0.95):
        x = values
        passes = []
        while len(x) >= 3:
            x = _aitken(x)
            passes.append(float(x[-1]))
        info.update(converged=True, value=passes[-1], aitken_passes=passes,
                    uncertainty=abs(passes[-1] - passes[-2]) if len(passes) > 1 else abs(d[-1]))
    else:
        # running total ~ eps^-p with eps halved per rung -> ratio 2^p
        info.update(converged=False, value=float("nan"), divergence_exponent=float(np.log2(abs(r))))
    return info


def total_flux(band: int = 0, theta_max: float = 0.75 * np.pi / 4, resolution: int = 2048,
               nodes: int = 24, ladder_rungs: int = 8) -> FluxTotal:
    """Integrated outward flux over both caps and its extrapolation toward the cone."""
    if not 0 <= theta_max < np.pi / 4:
        raise ValueError("theta_max must lie in [0, pi/4)")
    if theta_max == 0:
        z = np.zeros(0)
        return FluxTotal(band, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, z, z, z)
    x, w = np.polynomial.legendre.leggauss(nodes)
    th = 0.5 * theta_max * (x + 1)
    wt = 0.5 * theta_max * w
    caps = {}
    for cap in (1, -1):
        dens = np.array([measured_flux_density(t, band, cap, resolution)[0] for t in th])
        caps[cap] = float(np.sum(wt * 2 * np.pi * np.sin(th) * dens))
    stokes = cap_flux(theta_max, band, 1, resolution) + cap_flux(theta_max, band, -1, resolution)

    def closed(tm):
        f = lambda t: 2 * np.pi * np.sin(t) * closed_form_flux_density(t, band)
        return 2 * integrate.quad(f, 0, tm, limit=200)[0]

    rungs = (np.pi / 4) * (1 - 2.0 ** -np.arange(2, 2 + ladder_rungs))
    lad_m = np.array([cap_flux(t, band, 1, resolution) + cap_flux(t, band, -1, resolution) for t in rungs])
    lad_c = np.array([closed(t) for t in rungs])
    return FluxTotal(
        band=band,
        theta_max=theta_max,
        measured_quadrature=caps[1] + caps[-1],
        measured_stokes=stokes,
        upper=caps[1],
        lower=caps[-1],
        closed_form=closed(theta_max),
        ladder_theta=rungs,
        ladder_measured=lad_m,
        ladder_closed_form=lad_c,
        measured_extrapolation=_extrapolate(lad_m),
        closed_form_extrapolation=_extrapolate(lad_c),
    )


# ---------------------------------------------------------------- adiabatic sweeps

@dataclass(frozen=True, eq=False)
class AdiabaticResult:
    """Sweep diagnostics sampled on ``times``.

    ``fidelity`` is ``|<j|sigma|psi>|`` (the tracked energy-representation
    coefficient, which is >= 1 for a space-like start since
    ``|c_j|^2 - |c_k|^2`` is conserved); ``leakage`` is the modulus of the other
    coefficient and serves as the infidelity.  The endpoint leakage oscillates
    as ``|sin(gap T / 2)| / T``, so :attr:`final_infidelity` is its envelope:
    the largest leakage over the last oscillation period ``2 pi / gap_min``.
    ``geometric_phase`` is ``arg c_j(T) + integral E_j dt`` wrapped to (-pi, pi].
    """

    times: np.ndarray
    fidelity: np.ndarray
    leakage: np.ndarray
    dynamical_phase: float
    geometric_phase: float
    band: int
    T: float
    gap_min: float
    steps: int
    error_estimate: float

    @property
    def endpoint_infidelity(self) -> float:
        return float(self.leakage[-1])

    @property
    def final_infidelity(self) -> float:
        return self.peak_infidelity(2 * np.pi / self.gap_min)

    def peak_infidelity(self, window: float | None = None) -> float:
        """Largest leakage over the trailing ``window`` of the sweep (whole sweep if None)."""
        if window is None:
            return float(np.max(self.leakage))
        sel = self.times >= self.T - window
        return float(np.max(self.leakage[sel]))


def _gauss_integral_on_path(path: ParameterPath, band: int, T: float) -> float:
    """``integral_0^T E_band(R(t)) dt`` with 8-point Gauss-Legendre per polyline segment."""
    L = path.arclength
    if L[-1] == 0:
        return float(_band_vectors(path.samples[0], band)[0]) * T
    x, w = np.polynomial.legendre.leggauss(8)
    a, b = L[:-1, None], L[1:, None]
    s = 0.5 * (b - a) * (x + 1) + a
    E, _, _ = _band_vectors(path.at(s / L[-1]), band)
    return float(np.sum(0.5 * (b - a) * w * E) * T / L[-1])


def adiabatic_sweep(path: ParameterPath, T: float, band: int = 0, *, tol: float = 1e-7,
                    n_samples: int | None = None, initial_steps: int | None = None) -> AdiabaticResult:
    """Evolve an eigenstate while ``R`` traverses ``path`` at constant speed over time ``T``.

    ``n_samples`` defaults to at least 16 samples per oscillation period of
    the smallest gap on the path.
    """
    if T <= 0:
        raise ValueError("T must be positive")
    if path.exploratory:
        raise ConeCrossingError("adiabatic sweeps need a path outside the cone")
    E_path, V_path, _ = eig2_batch(path.samples)
    gap_min = float(np.min(E_path[:, 0] - E_path[:, 1]))
    if n_samples is None:
        n_samples = max(400, math.ceil(16 * T * gap_min / (2 * np.pi)))
    V0 = V_path[0, :, band]

    def K_of_t(t):
        m = path.at(np.asarray(t) / T)
        return (m[..., 0, None, None] * BASIS_M[0] + m[..., 1, None, None] * BASIS_M[1]
                + m[..., 2, None, None] * BASIS_M[2])

    n0 = initial_steps or max(n_samples * 4, int(8 * T))
    trace = evolve_timedep(SpinorState(V0), K_of_t, (0.0, T), tol=tol, n_samples=n_samples,
                           initial_steps=n0, batch=True)
    Rt = path.at(trace.times / T)
    _, V, sig = eig2_batch(Rt)
    c = sig * np.einsum("tij,ti->tj", np.conj(V), _SIGNS * trace.amplitudes)
    fid = np.abs(c[:, band])
    leak = np.abs(c[:, 1 - band])
    dyn = _gauss_integral_on_path(path, band, T)
    geo = float(_wrap(np.angle(c[-1, band]) + dyn))
    return AdiabaticResult(trace.times, fid, leak, -dyn, geo, band, T, gap_min, trace.steps,
                           trace.error_estimate)


def extrapolated_geometric_phase(path: ParameterPath, T1: float, T2: float, band: int = 0,
                                 **kw) -> tuple[float, AdiabaticResult, AdiabaticResult]:
    """Cancel the O(1/T) correction using two sweep durations."""
    r1 = adiabatic_sweep(path, T1, band, **kw)
    r2 = adiabatic_sweep(path, T2, band, **kw)
    d = float(_wrap(r2.geometric_phase - r1.geometric_phase))
    b1 = r1.geometric_phase
    b2 = b1 + d
    beta = (T2 * b2 - T1 * b1) / (T2 - T1)
    return float(_wrap(beta)), r1, r2
