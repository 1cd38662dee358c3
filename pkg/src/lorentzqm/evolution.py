"""Interval-preserving propagation ``psi(t) = exp(-i K t) psi(0)`` (hbar = 1)."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.linalg import expm

from .errors import DimensionMismatchError, PropagatorOverflowError, StepControlError
from .generator import BdgGenerator
from .minkowski import MinkowskiMetric, SpinorState, lorentz_defect

__all__ = [
    "Propagator",
    "EvolutionTrace",
    "propagator",
    "expm_2x2",
    "evolve",
    "evolve_timedep",
    "heisenberg_evolve",
    "heisenberg_residual",
    "MAX_GROWTH_EXPONENT",
]

# intervals square the amplitudes; exp(2 * 350) stays below the double maximum
MAX_GROWTH_EXPONENT = 350.0


@dataclass(frozen=True, eq=False)
class Propagator:
    U: np.ndarray
    t: float
    generator: BdgGenerator
    crosscheck_residual: float | None = None

    def lorentz_defect(self) -> float:
        return lorentz_defect(self.U, self.generator.metric)

    def apply(self, state: SpinorState) -> SpinorState:
        if state.metric != self.generator.metric:
            raise DimensionMismatchError("state and propagator metrics differ")
        return SpinorState(self.U @ state.amplitudes, state.metric)


@dataclass(frozen=True, eq=False)
class EvolutionTrace:
    """Amplitudes sampled on a time grid, with interval diagnostics.

    ``error_estimate`` and ``steps`` are filled by the adaptive integrator.
    """

    times: np.ndarray
    amplitudes: np.ndarray
    metric: MinkowskiMetric
    error_estimate: float | None = None
    steps: int | None = None
    meta: dict = field(default_factory=dict)

    @property
    def states(self) -> list[SpinorState]:
        return [SpinorState(a, self.metric) for a in self.amplitudes]

    @property
    def intervals(self) -> np.ndarray:
        return np.abs(self.amplitudes) ** 2 @ self.metric.signs

    @property
    def interval_drift(self) -> np.ndarray:
        s = self.intervals
        return np.abs(s - s[0])

    @property
    def growth(self) -> np.ndarray:
        return np.max(np.abs(self.amplitudes), axis=1)

    def __len__(self):
        return len(self.times)


def _growth_rate(gen: BdgGenerator) -> float:
    if gen.dim == 2:
        D = gen.cone_distance
        return math.sqrt(-D) if D < 0 else 0.0
    return float(np.max(np.abs(np.linalg.eigvals(gen.K).imag)))


def expm_2x2(K: np.ndarray, t) -> np.ndarray:
    """Cayley-Hamilton form of ``exp(-i K t)`` for (batches of) 2x2 ``K``.

    With ``K = c I + M``, ``M^2 = D I`` and
    ``exp(-i K t) = exp(-i c t) [cos(r t) I - i t sinc(r t) M]``, ``r = sqrt(D)``
    (cos/cosh branch selected by the sign of ``D`` through the complex root).
    """
    K = np.asarray(K, dtype=complex)
    t = np.asarray(t, dtype=float)
    c = (K[..., 0, 0] + K[..., 1, 1]) / 2
    M = K - c[..., None, None] * np.eye(2)
    D = -(M[..., 0, 0] * M[..., 1, 1] - M[..., 0, 1] * M[..., 1, 0])
    r = np.sqrt(D + 0j)
    rt = r * t
    cos = np.cos(rt)
    sinc = np.sinc(rt / np.pi)
    phase = np.exp(-1j * c * t)
    out = cos[..., None, None] * np.eye(2) - 1j * (t * sinc)[..., None, None] * M
    return phase[..., None, None] * out


def propagator(gen: BdgGenerator, t: float) -> Propagator:
    """``exp(-i K t)`` by scaling and squaring (Pade); two-mode results are
    cross-checked against :func:`expm_2x2`."""
    t = float(t)
    if not math.isfinite(t):
        raise ValueError("t must be finite")
    g = _growth_rate(gen) * abs(t)
    if g > MAX_GROWTH_EXPONENT:
        raise PropagatorOverflowError(
            f"unstable growth exp({g:.1f}) exceeds double range", growth_exponent=g
        )
    U = expm(-1j * t * gen.K)
    check = None
    if gen.dim == 2:
        U2 = expm_2x2(gen.K, t)
        check = float(np.linalg.norm(U - U2) / max(1.0, np.linalg.norm(U2)))
    return Propagator(U, t, gen, check)


def evolve(psi0: SpinorState, gen: BdgGenerator, t_grid) -> EvolutionTrace:
    """States ``U(t_k) psi0`` on ``t_grid``; interval drift is recorded, never corrected.

    On overflow the raised :class:`PropagatorOverflowError` carries the trace
    truncated at the last representable time.
    """
    if psi0.metric != gen.metric:
        raise DimensionMismatchError("initial state and generator metrics differ")
    times = np.asarray(t_grid, dtype=float)
    rate = _growth_rate(gen)
    ok = rate * np.abs(times) <= MAX_GROWTH_EXPONENT
    n_ok = int(np.argmin(ok)) if not ok.all() else len(times)
    U = expm(-1j * times[:n_ok, None, None] * gen.K[None]) if n_ok else np.zeros((0, gen.dim, gen.dim))
    amps = U @ psi0.amplitudes
    trace = EvolutionTrace(times[:n_ok], amps, gen.metric)
    if n_ok < len(times):
        g = rate * abs(times[n_ok])
        raise PropagatorOverflowError(
            f"unstable growth exp({g:.1f}) at t={float(times[n_ok])!r}", growth_exponent=g, trace=trace
        )
    return trace


def _batch_step_matrices(K_of_t, times: np.ndarray, h: float, batch: bool, dim: int) -> np.ndarray:
    if batch:
        K = np.asarray(K_of_t(times), dtype=complex)
    else:
        K = np.stack([np.asarray(getattr(k, "K", k)) for k in map(K_of_t, times)])
    if K.shape[1:] != (dim, dim):
        raise DimensionMismatchError(f"K_of_t returned shape {K.shape[1:]}, expected {(dim, dim)}")
    if dim == 2:
        return expm_2x2(K, h)
    return expm(-1j * h * K)


def _tree_product(U: np.ndarray) -> np.ndarray:
    """``U[-1] @ ... @ U[0]`` by pairwise reduction."""
    while len(U) > 1:
        if len(U) % 2:
            U = np.concatenate([U, np.eye(U.shape[-1])[None]])
        U = U[1::2] @ U[0::2]
    return U[0]


def _run_midpoint(psi0, K_of_t, t0, t1, n_steps, n_samples, batch, chunk=65536):
    d = len(psi0)
    h = (t1 - t0) / n_steps
    per = n_steps // n_samples
    out = np.empty((n_samples + 1, d), dtype=complex)
    out[0] = psi0
    psi = psi0.copy()
    for s in range(n_samples):
        k0 = s * per
        P = np.eye(d, dtype=complex)
        for c0 in range(0, per, chunk):
            ks = np.arange(k0 + c0, k0 + min(per, c0 + chunk))
            mids = t0 + (ks + 0.5) * h
            P = _tree_product(_batch_step_matrices(K_of_t, mids, h, batch, d)) @ P
        psi = P @ psi
        out[s + 1] = psi
    return out


def evolve_timedep(
    psi0: SpinorState,
    K_of_t: Callable,
    t_span: tuple[float, float],
    *,
    tol: float = 1e-8,
    n_samples: int = 100,
    initial_steps: int | None = None,
    max_steps: int = 2**23,
    batch: bool = False,
) -> EvolutionTrace:
    """Midpoint-exponential integration with step doubling.

    Each step applies ``exp(-i K(t + h/2) h)``, which is exactly Lorentz, so
    interval drift stays at round-off level.  The step count doubles until the
    Richardson estimate ``max_k |psi_2n(t_k) - psi_n(t_k)| / 3`` (relative to the
    state size) and the interval drift are both below ``tol``.

    ``K_of_t`` maps a time to a :class:`BdgGenerator` (or a raw ``K`` matrix);
    with ``batch=True`` it maps an array of times to an array of ``K`` matrices.
    """
    t0, t1 = map(float, t_span)
    if not t1 > t0:
        raise ValueError("t_span must be increasing")
    a0 = np.asarray(psi0.amplitudes)
    n = max(initial_steps or 16 * n_samples, n_samples)
    n = n_samples * math.ceil(n / n_samples)
    prev = _run_midpoint(a0, K_of_t, t0, t1, n, n_samples, batch)
    signs = psi0.metric.signs
    s0 = float(np.abs(a0) ** 2 @ signs)
    history = []
    while True:
        if 2 * n > max_steps:
            raise StepControlError(
                f"tolerance {tol:g} not reached with {n} steps (last estimate "
                f"{history[-1] if history else float('nan'):.3e})"
            )
        n *= 2
        cur = _run_midpoint(a0, K_of_t, t0, t1, n, n_samples, batch)
        size = max(1.0, float(np.max(np.linalg.norm(cur, axis=1))))
        err = float(np.max(np.linalg.norm(cur - prev, axis=1))) / 3 / size
        drift = float(np.max(np.abs(np.abs(cur) ** 2 @ signs - s0))) / size**2
        history.append(err)
        if err <= tol and drift <= tol:
            break
        prev = cur
    times = np.linspace(t0, t1, n_samples + 1)
    return EvolutionTrace(times, cur, psi0.metric, error_estimate=err, steps=n,
                          meta={"error_history": history})


def heisenberg_evolve(O, gen: BdgGenerator, t: float) -> np.ndarray:
    """``O_h(t) = exp(i K t) O exp(-i K t)``, a similarity (not unitary) transform."""
    O = np.asarray(O, dtype=complex)
    if O.shape != (gen.dim, gen.dim):
        raise DimensionMismatchError(f"operator of shape {O.shape} for dim {gen.dim}")
    U = propagator(gen, t).U
    Uinv = propagator(gen, -t).U
    return Uinv @ O @ U


def heisenberg_residual(O, gen: BdgGenerator, t: float, h: float = 1e-4, order: str = "O,K") -> float:
    """Relative residual of ``i dO_h/dt = [O_h, K]`` by central differences.

    ``order="K,O"`` tests the commutator the other way round instead.
    """
    O = np.asarray(O, dtype=complex)
    dO = (heisenberg_evolve(O, gen, t + h) - heisenberg_evolve(O, gen, t - h)) / (2 * h)
    Oh = heisenberg_evolve(O, gen, t)
    K = gen.K
    comm = Oh @ K - K @ Oh if order == "O,K" else K @ Oh - Oh @ K
    scale = max(np.linalg.norm(K) * np.linalg.norm(O), np.finfo(float).tiny)
    return float(np.linalg.norm(1j * dO - comm) / scale)
