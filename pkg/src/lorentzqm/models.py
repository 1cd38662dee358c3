"""Two-mode generators for three bosonic quasiparticle systems.

* a 1D interacting Fermi gas in the bosonized (density-wave) description,
* phonons on a condensate carrying a vortex,
* spin waves of a 1D Heisenberg antiferromagnet.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.interpolate import RegularGridInterpolator

from .errors import SpectrumError
from .generator import BdgGenerator, EigenSystem, Stability, build_generator, eig2_batch, eigensolve
from .geometry import BerryResult, ParameterPath, berry_phase_loop

__all__ = [
    "FermiGasParams",
    "fermi_gas_generator",
    "fermi_gas_eigenvalues",
    "fermi_stability_map",
    "VortexField",
    "vortex_generator",
    "vortex_mdecomp",
    "VortexPhaseResult",
    "vortex_berry_phase",
    "AfmParams",
    "afm_generator",
    "AfmDispersion",
    "afm_dispersion",
]

TWO_PI = 2 * np.pi


# ---------------------------------------------------------------- Fermi gas

@dataclass(frozen=True)
class FermiGasParams:
    v_F: float
    g2: float
    g4: float
    q: float

    def __post_init__(self):
        if not self.q > 0:
            raise ValueError("q must be positive")

    @property
    def diagonal(self) -> float:
        return self.v_F + self.g4 / TWO_PI

    @property
    def offdiagonal(self) -> float:
        return self.g2 / TWO_PI

    @property
    def stable(self) -> bool:
        """Real spectrum iff ``v_F + g4/2pi >= |g2|/2pi`` (boundary is on-cone)."""
        return self.diagonal >= abs(self.offdiagonal)


def fermi_gas_generator(p: FermiGasParams) -> BdgGenerator:
    """``K = sigma q [[v_F + g4/2pi, g2/2pi], [g2/2pi, v_F + g4/2pi]]``."""
    a, b = p.diagonal, p.offdiagonal
    return build_generator(p.q * np.array([[a, b], [b, a]], dtype=complex))


def fermi_gas_eigenvalues(p: FermiGasParams) -> np.ndarray:
    """Closed-form spectrum of ``K``: ``+/- q sqrt(a^2 - b^2)`` (complex when unstable).

    Note ``q (a +/- b)`` are the eigenvalues of ``H``, not of ``K = sigma H``.
    """
    a, b = p.diagonal, p.offdiagonal
    r = p.q * np.sqrt(complex(a * a - b * b))
    return np.array([r, -r])


def fermi_stability_map(v_F: float, q: float, g2_grid, g4_grid) -> dict:
    """Stability classification on a ``(g2, g4)`` grid.

    Returns arrays ``g2``, ``g4`` (meshgrid, ``ij`` indexing), ``cone_distance``,
    ``stability`` (enum values) and ``predicate`` (the closed-form criterion).
    """
    G2, G4 = np.meshgrid(np.asarray(g2_grid, float), np.asarray(g4_grid, float), indexing="ij")
    cd = np.empty(G2.shape)
    st = np.empty(G2.shape, dtype=object)
    pred = np.empty(G2.shape, dtype=bool)
    for idx in np.ndindex(G2.shape):
        p = FermiGasParams(v_F, G2[idx], G4[idx], q)
        gen = fermi_gas_generator(p)
        eig = eigensolve(gen)
        cd[idx] = gen.cone_distance
        st[idx] = eig.stability.value
        pred[idx] = p.stable
    return {"g2": G2, "g4": G4, "cone_distance": cd, "stability": st, "predicate": pred}


# ---------------------------------------------------------------- vortex phonons

def _zero(x, y):
    return np.zeros(np.broadcast(np.asarray(x), np.asarray(y)).shape)


@dataclass(frozen=True, eq=False)
class VortexField:
    """Condensate background seen by a phonon wave packet at ``r_c``.

    ``density`` and ``phase`` (and optionally ``potential``) are callables of
    ``(x, y)`` accepting arrays.  Only the axial component of ``omega`` enters.
    """

    density: Callable
    phase: Callable
    g: float = 1.0
    potential: Callable = _zero
    mu: float = 0.0
    omega: tuple = (0.0, 0.0, 0.0)
    winding: int = 1

    def __post_init__(self):
        if not self.g > 0:
            raise ValueError("coupling g must be positive")

    @classmethod
    def synthetic(cls, n_inf: float = 1.0, xi: float = 1.0, winding: int = 1, center=(0.0, 0.0),
                  **kw) -> "VortexField":
        """``n = n_inf r^2 / (r^2 + xi^2)``, ``alpha = winding * polar angle``."""
        cx, cy = center

        def density(x, y):
            r2 = (np.asarray(x) - cx) ** 2 + (np.asarray(y) - cy) ** 2
            return n_inf * r2 / (r2 + xi * xi)

        def phase(x, y):
            return winding * np.arctan2(np.asarray(y) - cy, np.asarray(x) - cx)

        return cls(density, phase, winding=winding, **kw)

    @classmethod
    def uniform(cls, n: float = 1.0, winding: int = 1, center=(0.0, 0.0), **kw) -> "VortexField":
        """Constant density with a winding phase (no core depletion)."""
        cx, cy = center

        def density(x, y):
            return np.full(np.broadcast(np.asarray(x), np.asarray(y)).shape, float(n))

        def phase(x, y):
            return winding * np.arctan2(np.asarray(y) - cy, np.asarray(x) - cx)

        return cls(density, phase, winding=winding, **kw)

    @classmethod
    def from_grid(cls, x, y, density, phase, potential=None, **kw) -> "VortexField":
        """Bilinear interpolation of sampled fields on the grid ``x`` by ``y``.

        The phase is interpolated through ``exp(i alpha)`` so that branch cuts
        do not smear.
        """
        x = np.asarray(x, float)
        y = np.asarray(y, float)
        n_i = RegularGridInterpolator((x, y), np.asarray(density, float))
        e = np.exp(1j * np.asarray(phase, float))
        c_i = RegularGridInterpolator((x, y), e.real)
        s_i = RegularGridInterpolator((x, y), e.imag)

        def pts(px, py):
            px, py = np.broadcast_arrays(np.asarray(px, float), np.asarray(py, float))
            return np.stack([px, py], axis=-1)

        def dens(px, py):
            return n_i(pts(px, py))

        def ph(px, py):
            P = pts(px, py)
            return np.arctan2(s_i(P), c_i(P))

        if potential is not None:
            v_i = RegularGridInterpolator((x, y), np.asarray(potential, float))
            kw["potential"] = lambda px, py: v_i(pts(px, py))
        return cls(dens, ph, **kw)


def vortex_mdecomp(f: VortexField, points, q) -> tuple[np.ndarray, np.ndarray]:
    """``(m1, m2, m3)`` and the spectral offset at each ``r_c`` in ``points`` (shape (..., 2)).

    The offset is ``-Omega_z (x q_y - y q_x)``: the rotation term enters
    ``H_+`` and ``H_-`` with opposite signs, so ``sigma H`` gains a multiple of
    the identity and nothing else.
    """
    P = np.asarray(points, float)
    x, y = P[..., 0], P[..., 1]
    qv = np.asarray(q, float)
    n = np.asarray(f.density(x, y), float)
    if np.any(n <= 0):
        raise SpectrumError("density must be positive at every query point")
    alpha = np.asarray(f.phase(x, y), float)
    gn = f.g * n
    m3 = 0.5 * float(qv @ qv) + 2 * gn + np.asarray(f.potential(x, y), float) - f.mu
    m = np.stack([gn * np.cos(2 * alpha), gn * np.sin(2 * alpha), m3], axis=-1)
    offset = -f.omega[2] * (x * qv[1] - y * qv[0])
    return m, offset


def vortex_generator(f: VortexField, r_c, q) -> BdgGenerator:
    """Generator built from the Hermitian ``[[H+, H2 e^{2i alpha}], [H2 e^{-2i alpha}, H-]]``."""
    x, y = map(float, r_c)
    qv = np.asarray(q, float)
    n = float(np.asarray(f.density(x, y)))
    if n <= 0:
        raise SpectrumError(f"density {n!r} at r_c={tuple(r_c)} is not positive")
    alpha = float(np.asarray(f.phase(x, y)))
    base = 0.5 * float(qv @ qv) + 2 * f.g * n + float(np.asarray(f.potential(x, y))) - f.mu
    rot = f.omega[2] * (x * qv[1] - y * qv[0])
    H2 = f.g * n * np.exp(2j * alpha)
    H = np.array([[base - rot, H2], [np.conj(H2), base + rot]])
    return build_generator(H)


@dataclass(frozen=True, eq=False)
class VortexPhaseResult:
    """Berry phase of the space-like phonon branch around a loop of vortex positions.

    ``reference`` is ``-integral 2|v|^2 d alpha`` along the loop.  ``zeta`` is
    the implied complex-angle parameter ``u - |v|`` of the eigenstate
    ``((zeta + 1/zeta)/2, (zeta - 1/zeta) e^{-2i alpha}/2)``.
    """

    phase: float
    reference: float
    berry: BerryResult
    two_v2: np.ndarray
    connection_alpha: np.ndarray
    identification_residual: float
    structure_residual: float
    interval_residual: float
    zeta: np.ndarray
    winding: float


def vortex_berry_phase(f: VortexField, loop, q, n_points: int | None = None) -> VortexPhaseResult:
    """Berry phase via :func:`berry_phase_loop` on the induced ``(m1, m2, m3)`` path.

    ``loop`` is an ``(N, 2)`` array of vortex-centre positions (closed or
    not; it is closed here).  The per-point check compares the connection's
    ``alpha`` component, ``A . dR/dalpha`` at fixed density, with ``-2|v|^2``.
    """
    P = np.asarray(loop, float)
    if not np.array_equal(P[0], P[-1]):
        P = np.vstack([P, P[:1]])
    m, _ = vortex_mdecomp(f, P, q)
    path = ParameterPath(m, closed=True)
    res = berry_phase_loop(path, band=_spacelike_band(m[0]))
    E, V, sig = eig2_batch(m)
    b = res.band
    u, v = V[:, 0, b], V[:, 1, b]
    alpha = np.asarray(f.phase(P[:, 0], P[:, 1]), float)
    dR = np.stack([-2 * m[:, 1], 2 * m[:, 0], np.zeros(len(m))], axis=-1)
    A_alpha = np.sum(res.connection_samples * dR, axis=-1)
    two_v2 = 2 * np.abs(v) ** 2
    ident = float(np.max(np.abs(A_alpha + two_v2)))
    # structure: v = (zeta - 1/zeta)/2 * e^{-2i alpha} with real zeta
    v_struct = v * np.exp(2j * alpha)
    struct = float(np.max(np.abs(v_struct.imag)) + np.max(np.abs(u.imag)))
    interval_res = float(np.max(np.abs(np.abs(u) ** 2 - np.abs(v) ** 2 - 1)))
    zeta = u.real + v_struct.real
    dalpha = _wrap_diff(alpha)
    ref = -float(np.sum(0.5 * (two_v2[:-1] + two_v2[1:]) * dalpha))
    return VortexPhaseResult(
        phase=res.phase_unreduced,
        reference=ref,
        berry=res,
        two_v2=two_v2,
        connection_alpha=A_alpha,
        identification_residual=ident,
        structure_residual=struct,
        interval_residual=interval_res,
        zeta=zeta,
        winding=float(np.sum(dalpha) / TWO_PI),
    )


def _spacelike_band(m) -> int:
    return 0 if m[2] > 0 else 1


def _wrap_diff(alpha: np.ndarray) -> np.ndarray:
    d = np.diff(alpha)
    return (d + np.pi) % TWO_PI - np.pi


# ---------------------------------------------------------------- antiferromagnet

@dataclass(frozen=True)
class AfmParams:
    J: float = 1.0
    S: float = 0.5
    Z: int = 2
    k: float = np.pi / 2

    def __post_init__(self):
        if not self.J > 0:
            raise ValueError("J must be positive")
        if not self.S > 0 or not self.Z > 0:
            raise ValueError("S and Z must be positive")
        if not -np.pi < self.k <= np.pi:
            raise ValueError("k must lie in (-pi, pi]")

    @property
    def prefactor(self) -> float:
        return 2 * self.Z * self.S * self.J

    @property
    def gamma(self) -> float:
        return math.cos(self.k)


def afm_generator(p: AfmParams) -> BdgGenerator:
    """``K = 2ZSJ sigma [[1, cos k], [cos k, 1]]``; ``k = 0, pi`` are on the cone."""
    c = p.prefactor
    g = p.gamma
    return build_generator(c * np.array([[1.0, g], [g, 1.0]], dtype=complex))


@dataclass(frozen=True, eq=False)
class AfmDispersion:
    """Dispersion table over a k grid.

    ``u`` and ``v`` are the components of the space-like eigenvector in the
    library gauge (``u`` real positive).  ``v_sign`` is the computed sign of
    ``v/u``; ``v_sign_closed_form`` is ``sgn(cos k)`` as in the closed-form
    solution; ``sign_agrees`` compares them.  Gapless points carry NaN.
    """

    k: np.ndarray
    E: np.ndarray
    E_closed_form: np.ndarray
    u: np.ndarray
    v: np.ndarray
    u_closed_form: np.ndarray
    v_closed_form: np.ndarray
    v_sign: np.ndarray
    v_sign_closed_form: np.ndarray
    gapless: np.ndarray

    @property
    def sign_agrees(self) -> np.ndarray:
        return self.v_sign == self.v_sign_closed_form

    @property
    def interval_residual(self) -> float:
        ok = ~self.gapless
        return float(np.max(np.abs(np.abs(self.u[ok]) ** 2 - np.abs(self.v[ok]) ** 2 - 1)))


def afm_dispersion(k_grid, J: float = 1.0, S: float = 0.5, Z: int = 2) -> AfmDispersion:
    """Eigen-solve the spin-wave generator at every ``k``; closed forms alongside."""
    k = np.asarray(k_grid, float)
    n = len(k)
    E = np.full(n, np.nan)
    u = np.full(n, np.nan + 0j)
    v = np.full(n, np.nan + 0j)
    gapless = np.zeros(n, dtype=bool)
    for i, kk in enumerate(k):
        eig: EigenSystem = eigensolve(afm_generator(AfmParams(J, S, Z, float(kk))))
        if eig.stability is not Stability.STABLE:
            gapless[i] = True
            continue
        j = int(np.argmax(eig.signatures))
        E[i] = eig.eigenvalues[j].real
        u[i], v[i] = eig.vectors[:, j]
    pref = 2 * Z * S * J
    s = np.abs(np.sin(k))
    with np.errstate(divide="ignore", invalid="ignore"):
        u_cf = np.sqrt(0.5 * (1 / s + 1))
        v_cf = np.sqrt(0.5 * (1 / s - 1))
    u_cf[gapless] = np.nan
    v_cf[gapless] = np.nan
    vs = np.full(n, np.nan)
    vs[~gapless] = np.sign((v[~gapless] / u[~gapless]).real)
    return AfmDispersion(
        k=k,
        E=E,
        E_closed_form=pref * s,
        u=u,
        v=v,
        u_closed_form=u_cf,
        v_closed_form=v_cf,
        v_sign=vs,
        v_sign_closed_form=np.where(gapless, np.nan, np.sign(np.cos(k))),
        gapless=gapless,
    )
