"""Generators ``K = sigma H`` and their sigma-orthonormal eigenanalysis.

For the two-mode case, ``K`` is written as

    K = trace_part * I + m1 [[0, 1], [-1, 0]] + m2 [[0, i], [i, 0]] + m3 [[1, 0], [0, -1]]

with real ``(m1, m2, m3)``; the spectrum is ``trace_part +/- sqrt(m3^2 - m1^2 - m2^2)``.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .errors import DimensionMismatchError, NonHermitianError, SpectrumError
from .minkowski import SIGMA_11, MinkowskiMetric, SpinorState, _frozen

__all__ = [
    "BASIS_M",
    "Stability",
    "BdgGenerator",
    "EigenSystem",
    "build_generator",
    "from_mdecomp",
    "eigensolve",
    "eig2_batch",
    "to_energy_representation",
    "verify_completeness",
    "completeness_residuals",
    "tau_matrices",
    "tau_decompose",
    "ONCONE_RTOL",
    "interval_in_energy_rep",
    "random_stable_generator",
]

SQRT2 = np.sqrt(2.0)
ONCONE_RTOL = 1e-9

BASIS_M = (
    np.array([[0, 1], [-1, 0]], dtype=complex),
    np.array([[0, 1j], [1j, 0]], dtype=complex),
    np.array([[1, 0], [0, -1]], dtype=complex),
)


class Stability(enum.Enum):
    STABLE = "stable"
    ON_CONE = "on-cone"
    UNSTABLE = "unstable"


@dataclass(frozen=True, eq=False)
class BdgGenerator:
    """``K = sigma H`` with its Hermitian ``H`` and metric."""

    H: np.ndarray
    metric: MinkowskiMetric

    def __post_init__(self):
        object.__setattr__(self, "H", _frozen(self.H))

    @cached_property
    def K(self) -> np.ndarray:
        K = self.metric.apply(self.H)
        K.flags.writeable = False
        return K

    @property
    def dim(self) -> int:
        return self.metric.dim

    @cached_property
    def mdecomp(self) -> tuple[float, float, float] | None:
        if self.dim != 2:
            return None
        K = self.K
        return (float(K[0, 1].real), float(K[0, 1].imag), float((K[0, 0] - K[1, 1]).real / 2))

    @cached_property
    def trace_part(self) -> float | None:
        if self.dim != 2:
            return None
        return float((self.K[0, 0] + self.K[1, 1]).real / 2)

    @property
    def taudecomp(self) -> tuple[float, float, float] | None:
        if self.dim != 2:
            return None
        return tau_decompose(self)

    @property
    def cone_distance(self) -> float | None:
        """``m3^2 - m1^2 - m2^2`` (two-mode only)."""
        if self.dim != 2:
            return None
        m1, m2, m3 = self.mdecomp
        return m3 * m3 - m1 * m1 - m2 * m2

    def __repr__(self):
        if self.dim == 2:
            return f"BdgGenerator(mdecomp={self.mdecomp}, trace_part={self.trace_part})"
        return f"BdgGenerator(dim={self.dim}, metric={self.metric})"


def build_generator(H, metric: MinkowskiMetric | None = None, tol: float = 1e-12) -> BdgGenerator:
    """Validate Hermitian ``H`` and pair it with ``metric`` (default ``(1,1)``)."""
    H = np.asarray(H, dtype=complex)
    if H.ndim != 2 or H.shape[0] != H.shape[1]:
        raise DimensionMismatchError(f"H must be square, got shape {H.shape}")
    if metric is None:
        if H.shape[0] != 2:
            raise DimensionMismatchError("metric is required for dimension != 2")
        metric = SIGMA_11
    if H.shape[0] != metric.dim:
        raise DimensionMismatchError(f"H is {H.shape[0]}x{H.shape[0]}, metric {metric} has dim {metric.dim}")
    skew = float(np.linalg.norm(H - H.conj().T))
    if skew > tol * max(1.0, float(np.linalg.norm(H))):
        raise NonHermitianError(f"||H - H^dagger|| = {skew:.3e}")
    return BdgGenerator((H + H.conj().T) / 2, metric)


def from_mdecomp(m1: float, m2: float, m3: float, trace_part: float = 0.0) -> BdgGenerator:
    """Two-mode generator with the given decomposition."""
    K = trace_part * np.eye(2) + m1 * BASIS_M[0] + m2 * BASIS_M[1] + m3 * BASIS_M[2]
    return BdgGenerator(SIGMA_11.apply(K), SIGMA_11)


def tau_matrices() -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    tau1 = np.array([[SQRT2, 1], [-1, -SQRT2]], dtype=complex)
    tau2 = np.array([[SQRT2, 1j], [1j, -SQRT2]], dtype=complex)
    tau3 = np.array([[1, 0], [0, -1]], dtype=complex)
    return tau1, tau2, tau3


def tau_decompose(gen: BdgGenerator) -> tuple[float, float, float]:
    """Real ``(n1, n2, n3)`` with ``K = trace_part*I + sum n_i tau_i``."""
    if gen.dim != 2:
        raise DimensionMismatchError("tau decomposition is defined for two modes only")
    m1, m2, m3 = gen.mdecomp
    n = (m1, m2, m3 - SQRT2 * (m1 + m2))
    taus = tau_matrices()
    rebuilt = gen.trace_part * np.eye(2) + sum(c * t for c, t in zip(n, taus))
    resid = np.linalg.norm(rebuilt - gen.K)
    assert resid <= 1e-12 * max(1.0, np.linalg.norm(gen.K)), f"tau reconstruction residual {resid}"
    return n


@dataclass(frozen=True, eq=False)
class EigenSystem:
    """Eigenpairs of ``K`` sorted by descending real part.

    ``vectors[:, j]`` is the j-th eigenvector.  For stable systems it is
    normalised to ``<j|sigma|j> = signatures[j]``; otherwise it has unit
    Euclidean norm and ``signatures`` is ``None``.  ``vectors`` is ``None`` for
    on-cone (defective) systems.
    """

    eigenvalues: np.ndarray
    vectors: np.ndarray | None
    signatures: np.ndarray | None
    stability: Stability
    cone_distance: float
    metric: MinkowskiMetric

    @property
    def dim(self) -> int:
        return self.metric.dim

    @property
    def is_stable(self) -> bool:
        return self.stability is Stability.STABLE

    @property
    def eigenvectors(self) -> list[SpinorState]:
        if self.vectors is None:
            raise SpectrumError("eigenvectors withheld for an on-cone (defective) generator")
        return [SpinorState(self.vectors[:, j], self.metric) for j in range(self.dim)]

    def state(self, j: int) -> SpinorState:
        return self.eigenvectors[j]

    def gram(self) -> np.ndarray:
        """Matrix of sigma-overlaps ``<j|sigma|k>``."""
        V = self._need_vectors()
        return V.conj().T @ self.metric.apply(V)

    def normalization_residual(self) -> float:
        G = self.gram()
        return float(np.max(np.abs(np.diag(G).real - self.signatures)))

    def orthogonality_residual(self) -> float:
        G = self.gram()
        off = G - np.diag(np.diag(G))
        return float(np.max(np.abs(off))) if self.dim > 1 else 0.0

    def pairing_residual(self) -> float:
        """Two-mode check that the partner of ``(u, v)`` is ``(v*, u*)`` up to phase.

        Returns NaN for more than two modes, where no pairing is asserted.
        """
        if self.dim != 2 or not self.is_stable:
            return float("nan")
        V = self.vectors
        sp = int(np.argmax(self.signatures))
        u, v = V[:, sp]
        partner = np.array([v.conjugate(), u.conjugate()])
        w = V[:, 1 - sp]
        r2 = np.vdot(w, w).real + np.vdot(partner, partner).real - 2 * abs(np.vdot(partner, w))
        return float(np.sqrt(max(r2, 0.0)))

    def condition_number(self) -> float:
        return float(np.linalg.cond(self._need_vectors()))

    def _need_vectors(self) -> np.ndarray:
        if self.vectors is None:
            raise SpectrumError("eigenvectors withheld for an on-cone (defective) generator")
        return self.vectors


def _gauge_fix(V: np.ndarray) -> np.ndarray:
    """Make the largest-modulus entry of each column real positive."""
    idx = np.argmax(np.abs(V), axis=-2)
    piv = np.take_along_axis(V, idx[..., None, :], axis=-2)
    return V * (np.abs(piv) / np.where(piv == 0, 1, piv))


def eig2_batch(m, trace_part=0.0, rtol: float = ONCONE_RTOL):
    """Closed-form stable eigenpairs for a batch of two-mode decompositions.

    Parameters
    ----------
    m : array_like, shape (..., 3)
        ``(m1, m2, m3)`` triples, all of which must lie outside the cone.

    Returns
    -------
    energies : ndarray, shape (..., 2)
        Descending.
    vectors : ndarray, shape (..., 2, 2)
        Columns are the eigenvectors, sigma-normalised and gauge-fixed.
    signatures : ndarray, shape (..., 2)
    """
    m = np.asarray(m, dtype=float)
    m1, m2, m3 = m[..., 0], m[..., 1], m[..., 2]
    D = m3 * m3 - m1 * m1 - m2 * m2
    scale = m1 * m1 + m2 * m2 + m3 * m3
    if np.any(D <= rtol * scale) or np.any(scale == 0):
        raise SpectrumError("eig2_batch requires every point strictly outside the cone")
    E0 = np.sqrt(D)
    s3 = np.sign(m3)
    a = np.abs(m3) + E0
    N = np.sqrt(2 * E0 * a)
    w = m1 + 1j * m2
    space = np.stack([a / N + 0j, s3 * (-np.conj(w)) / N], axis=-1)
    time = np.stack([-s3 * w / N, a / N + 0j], axis=-1)
    # s3 > 0: space-like has the larger energy trace+E0
    up = (s3 > 0)[..., None]
    first = np.where(up, space, time)
    second = np.where(up, time, space)
    vectors = np.stack([first, second], axis=-1)
    tp = np.asarray(trace_part, dtype=float)
    energies = np.stack([tp + E0, tp - E0], axis=-1)
    sig_first = np.where(s3 > 0, 1, -1)
    signatures = np.stack([sig_first, -sig_first], axis=-1)
    return energies, vectors, signatures


def eigensolve(gen: BdgGenerator, rtol: float = ONCONE_RTOL) -> EigenSystem:
    """sigma-orthonormal eigensystem of ``K``.

    Two-mode generators use the closed form with an on-cone band
    ``|m3^2 - m1^2 - m2^2| <= rtol * (m1^2 + m2^2 + m3^2)``.  Larger systems use a
    dense eigensolver, then sigma-orthonormalise within real clusters.
    """
    if gen.dim == 2:
        return _eigensolve_2(gen, rtol)
    return _eigensolve_general(gen, rtol)


def _eigensolve_2(gen: BdgGenerator, rtol: float) -> EigenSystem:
    m1, m2, m3 = gen.mdecomp
    tp = gen.trace_part
    D = gen.cone_distance
    scale = m1 * m1 + m2 * m2 + m3 * m3
    if abs(D) <= rtol * scale:
        # defective (or scalar) on the cone: double eigenvalue trace_part
        ev = np.array([tp, tp], dtype=complex)
        return EigenSystem(ev, None, None, Stability.ON_CONE, D, gen.metric)
    if D > 0:
        E, V, sig = eig2_batch(np.array([m1, m2, m3]), tp, rtol)
        return EigenSystem(E.astype(complex), V, sig.astype(int), Stability.STABLE, D, gen.metric)
    g = np.sqrt(-D)
    lam = np.array([1j * g, -1j * g])
    vecs = np.array([m3 + lam, np.full(2, -m1 + 1j * m2)])
    vecs = vecs / np.linalg.norm(vecs, axis=0)
    return EigenSystem(tp + lam, _gauge_fix(vecs), None, Stability.UNSTABLE, D, gen.metric)


def _eigensolve_general(gen: BdgGenerator, rtol: float) -> EigenSystem:
    K = gen.K
    metric = gen.metric
    knorm = max(float(np.linalg.norm(K, 2)), np.finfo(float).tiny)
    w, V = np.linalg.eig(K)
    if np.any(np.abs(w.imag) > rtol * knorm):
        order = np.lexsort((-w.imag, -w.real))
        V = V[:, order] / np.linalg.norm(V[:, order], axis=0)
        return EigenSystem(w[order], _gauge_fix(V), None, Stability.UNSTABLE, float("nan"), metric)
    wr = w.real
    order = np.argsort(-wr, kind="stable")
    wr, V = wr[order], V[:, order]
    clusters = _clusters(wr, 1e-8 * knorm)
    out_vecs, out_sig, out_vals = [], [], []
    for idx in clusters:
        X = V[:, idx]
        X = X / np.linalg.norm(X, axis=0)
        G = X.conj().T @ metric.apply(X)
        G = (G + G.conj().T) / 2
        lam, W = np.linalg.eigh(G)
        if np.any(np.abs(lam) <= 1e-8) or (len(idx) > 1 and lam.min() < 0 < lam.max()):
            return EigenSystem(w[order].astype(complex), None, None, Stability.ON_CONE, float("nan"), metric)
        Y = (X @ W) / np.sqrt(np.abs(lam))
        out_vecs.append(Y)
        out_sig.extend(np.sign(lam).astype(int))
        out_vals.extend([wr[idx].mean()] * len(idx) if len(idx) > 1 else [wr[idx[0]]])
    Vn = _gauge_fix(np.hstack(out_vecs))
    sig = np.array(out_sig)
    vals = np.array(out_vals)
    # ties broken by signature, +1 first
    order = np.lexsort((-sig, -vals))
    Vn, sig, vals = Vn[:, order], sig[order], vals[order]
    assert (sig > 0).sum() == metric.m and (sig < 0).sum() == metric.n, "inertia mismatch"
    return EigenSystem(vals.astype(complex), Vn, sig, Stability.STABLE, float("nan"), metric)


def _clusters(sorted_desc: np.ndarray, tol: float) -> list[list[int]]:
    groups = [[0]]
    for i in range(1, len(sorted_desc)):
        if sorted_desc[groups[-1][-1]] - sorted_desc[i] <= tol:
            groups[-1].append(i)
        else:
            groups.append([i])
    return groups


def _require_stable(eig: EigenSystem):
    if not eig.is_stable:
        raise SpectrumError(f"operation requires a stable spectrum, got {eig.stability.value}")


def to_energy_representation(psi: SpinorState, eig: EigenSystem) -> np.ndarray:
    """Coefficients ``c_j = signature_j <j|sigma|psi>`` so that ``psi = sum c_j |j>``."""
    _require_stable(eig)
    if psi.metric != eig.metric:
        raise DimensionMismatchError(f"state on {psi.metric}, eigensystem on {eig.metric}")
    ev = eig.eigenvalues.real
    if len(ev) > 1 and np.min(np.abs(np.diff(ev))) <= ONCONE_RTOL * max(1.0, np.max(np.abs(ev))):
        raise SpectrumError("degenerate spectrum: energy representation is not unique")
    V = eig.vectors
    return eig.signatures * (V.conj().T @ psi.metric.apply(psi.amplitudes))


def completeness_residuals(eig: EigenSystem) -> tuple[float, float]:
    """Frobenius residuals of ``P sigma = I`` and ``sigma P = I`` where
    ``P = sum_j signature_j |j><j|``."""
    _require_stable(eig)
    V = eig.vectors
    P = (V * eig.signatures) @ V.conj().T
    eye = np.eye(eig.dim)
    right = float(np.linalg.norm(eig.metric.apply_right(P) - eye))
    left = float(np.linalg.norm(eig.metric.apply(P) - eye))
    return right, left


def verify_completeness(eig: EigenSystem) -> float:
    """Largest of the two completeness residuals."""
    return max(completeness_residuals(eig))


def interval_in_energy_rep(c: np.ndarray, eig: EigenSystem) -> float:
    """``sum_j signature_j |c_j|^2``, equal to the interval of the state."""
    return float(np.sum(eig.signatures * np.abs(c) ** 2))


def random_stable_generator(metric: MinkowskiMetric, rng: np.random.Generator, shift: bool = True) -> BdgGenerator:
    """``sigma H`` with ``H`` positive definite, optionally offset by ``c*sigma``
    (which shifts the spectrum by ``c`` and makes ``H`` indefinite)."""
    d = metric.dim
    A = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    H = A @ A.conj().T / d + 0.5 * np.eye(d)
    if shift:
        H = H + rng.uniform(-1, 1) * np.diag(metric.signs)
    return build_generator(H, metric)

