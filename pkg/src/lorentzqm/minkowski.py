"""Indefinite metric, spinor states and complex Lorentz maps.

The metric ``sigma_{m,n} = diag(+1 x m, -1 x n)`` is never materialised for
products; every sigma-product is a sign flip of the trailing ``n`` entries.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .errors import DimensionMismatchError, MetricMismatchError, NormalizationError

__all__ = [
    "MinkowskiMetric",
    "SpinorState",
    "Causality",
    "CausalClass",
    "LorentzMap",
    "interval",
    "classify",
    "sigma_inner",
    "make_boost",
    "apply_map",
    "conjugate_operator",
    "DEFAULT_CLASSIFY_TOL",
]

DEFAULT_CLASSIFY_TOL = 1e-9


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=complex, copy=True)
    a.flags.writeable = False
    return a


@dataclass(frozen=True)
class MinkowskiMetric:
    """Signature ``(m, n)`` of ``sigma_{m,n}``; both counts must be >= 1."""

    m: int
    n: int

    def __post_init__(self):
        if int(self.m) != self.m or int(self.n) != self.n:
            raise ValueError("signature counts must be integers")
        if self.m < 1 or self.n < 1:
            raise ValueError(
                f"signature ({self.m},{self.n}) is definite; need m >= 1 and n >= 1"
            )

    @property
    def dim(self) -> int:
        return self.m + self.n

    @cached_property
    def signs(self) -> np.ndarray:
        s = np.concatenate([np.ones(self.m), -np.ones(self.n)])
        s.flags.writeable = False
        return s

    @property
    def matrix(self) -> np.ndarray:
        """Dense ``sigma`` (for display and tests; kernels use :attr:`signs`)."""
        return np.diag(self.signs).astype(complex)

    def apply(self, x: np.ndarray) -> np.ndarray:
        """``sigma @ x`` for a vector or a matrix (row flip)."""
        x = np.asarray(x)
        if x.ndim == 1:
            return self.signs * x
        return self.signs[:, None] * x

    def apply_right(self, x: np.ndarray) -> np.ndarray:
        """``x @ sigma`` (column flip)."""
        return np.asarray(x) * self.signs[None, :]

    @classmethod
    def for_dim(cls, d: int) -> "MinkowskiMetric":
        """Balanced metric for even ``d`` (``m = n = d/2``)."""
        if d % 2:
            raise ValueError("for_dim needs an even dimension")
        return cls(d // 2, d // 2)


SIGMA_11 = MinkowskiMetric(1, 1)


@dataclass(frozen=True, eq=False)
class SpinorState:
    """Immutable amplitude vector living in complex Minkowski space."""

    amplitudes: np.ndarray
    metric: MinkowskiMetric = SIGMA_11

    def __post_init__(self):
        a = np.asarray(self.amplitudes)
        if a.ndim != 1 or a.shape[0] != self.metric.dim:
            raise DimensionMismatchError(
                f"amplitudes of shape {a.shape} do not match metric dimension {self.metric.dim}"
            )
        object.__setattr__(self, "amplitudes", _frozen(a))

    def __len__(self):
        return self.metric.dim

    def __getitem__(self, i):
        return self.amplitudes[i]

    def __repr__(self):
        return f"SpinorState({np.array2string(self.amplitudes, precision=6)}, {self.metric})"

    def scaled(self, c: complex) -> "SpinorState":
        return SpinorState(c * self.amplitudes, self.metric)

    def __add__(self, other: "SpinorState") -> "SpinorState":
        _check_same_metric(self, other)
        return SpinorState(self.amplitudes + other.amplitudes, self.metric)

    @property
    def norm2(self) -> float:
        """Euclidean squared norm (not conserved; used for tolerance scaling)."""
        return float(np.sum(np.abs(self.amplitudes) ** 2))

    @property
    def interval(self) -> float:
        return interval(self)


class Causality(enum.Enum):
    SPACE_LIKE = "space-like"
    TIME_LIKE = "time-like"
    LIGHT_LIKE = "light-like"


@dataclass(frozen=True)
class CausalClass:
    kind: Causality
    interval: float


def _check_same_metric(a: SpinorState, b: SpinorState):
    if a.metric != b.metric:
        raise MetricMismatchError(f"metric {a.metric} != {b.metric}")


def interval(state: SpinorState) -> float:
    """``<psi|sigma|psi> = sum_{j<=m} |a_j|^2 - sum_{j>m} |a_j|^2``."""
    a = state.amplitudes
    q = np.vdot(a, state.metric.apply(a))
    assert abs(q.imag) <= 1e-14 * max(1.0, state.norm2), "interval has imaginary residue"
    return float(q.real)


def classify(state: SpinorState, tol: float = DEFAULT_CLASSIFY_TOL) -> CausalClass:
    """Causal class with a tolerance relative to the squared amplitude norm."""
    if tol < 0:
        raise ValueError("tol must be non-negative")
    s = interval(state)
    scale = tol * state.norm2
    if s > scale:
        kind = Causality.SPACE_LIKE
    elif s < -scale:
        kind = Causality.TIME_LIKE
    else:
        kind = Causality.LIGHT_LIKE
    return CausalClass(kind, s)


def sigma_inner(bra: SpinorState, ket: SpinorState) -> complex:
    """``bra^dagger sigma ket``."""
    _check_same_metric(bra, ket)
    return complex(np.vdot(bra.amplitudes, bra.metric.apply(ket.amplitudes)))


@dataclass(frozen=True, eq=False)
class LorentzMap:
    """A matrix ``L`` with ``L^dagger sigma L = sigma``.

    Construct with :meth:`from_matrix` (validated) or :func:`make_boost`.
    """

    matrix: np.ndarray
    metric: MinkowskiMetric
    inverse: np.ndarray = field(repr=False)

    @classmethod
    def from_matrix(cls, matrix, metric: MinkowskiMetric, tol: float = 1e-10) -> "LorentzMap":
        L = np.asarray(matrix, dtype=complex)
        d = metric.dim
        if L.shape != (d, d):
            raise DimensionMismatchError(f"map of shape {L.shape} for metric dimension {d}")
        defect = lorentz_defect(L, metric)
        scale = max(1.0, float(np.linalg.norm(L)) ** 2)
        if defect > tol * scale:
            raise NormalizationError(
                f"L^dagger sigma L differs from sigma by {defect:.3e} (Frobenius)", defect
            )
        # exact for Lorentz maps: L^-1 = sigma L^dagger sigma
        inv = metric.apply_right(metric.apply(L.conj().T))
        return cls(_frozen(L), metric, _frozen(inv))

    @property
    def dim(self) -> int:
        return self.metric.dim

    def defect(self) -> float:
        return lorentz_defect(self.matrix, self.metric)

    def __matmul__(self, other):
        if isinstance(other, LorentzMap):
            if other.metric != self.metric:
                raise MetricMismatchError("cannot compose maps on different metrics")
            return LorentzMap(
                _frozen(self.matrix @ other.matrix),
                self.metric,
                _frozen(other.inverse @ self.inverse),
            )
        if isinstance(other, SpinorState):
            return apply_map(self, other)
        return NotImplemented


def lorentz_defect(L: np.ndarray, metric: MinkowskiMetric) -> float:
    """Frobenius norm of ``L^dagger sigma L - sigma``."""
    G = L.conj().T @ metric.apply(L)
    return float(np.linalg.norm(G - np.diag(metric.signs)))


def make_boost(x: complex, y: complex, tol: float = 1e-12) -> LorentzMap:
    """The (1,1) map ``[[x, y*], [y, x*]]`` with ``|x|^2 - |y|^2 = 1``.

    Raises :class:`NormalizationError` carrying the measured defect
    ``|x|^2 - |y|^2 - 1`` when the constraint is violated.
    """
    x, y = complex(x), complex(y)
    defect = abs(x) ** 2 - abs(y) ** 2 - 1.0
    if abs(defect) > tol:
        raise NormalizationError(
            f"|x|^2 - |y|^2 = {1.0 + defect!r}, expected 1 (defect {defect:.3e})", defect
        )
    L = np.array([[x, y.conjugate()], [y, x.conjugate()]])
    inv = np.array([[x.conjugate(), -y.conjugate()], [-y, x]])
    return LorentzMap(_frozen(L), SIGMA_11, _frozen(inv))


def apply_map(lmap: LorentzMap, state: SpinorState) -> SpinorState:
    if lmap.metric != state.metric:
        raise DimensionMismatchError(
            f"map on {lmap.metric} applied to state on {state.metric}"
        )
    return SpinorState(lmap.matrix @ state.amplitudes, state.metric)


def conjugate_operator(lmap: LorentzMap, K) -> np.ndarray:
    """``L K L^-1``; the spectrum of ``K`` is preserved."""
    K = np.asarray(K, dtype=complex)
    if K.shape != (lmap.dim, lmap.dim):
        raise DimensionMismatchError(f"operator of shape {K.shape} for map of dim {lmap.dim}")
    return lmap.matrix @ K @ lmap.inverse
