import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from lorentzqm import (
    Causality,
    DimensionMismatchError,
    LorentzMap,
    MetricMismatchError,
    MinkowskiMetric,
    NormalizationError,
    SpinorState,
    apply_map,
    classify,
    conjugate_operator,
    eigensolve,
    from_mdecomp,
    interval,
    make_boost,
    propagator,
    sigma_inner,
)
from lorentzqm.generator import random_stable_generator
from lorentzqm.minkowski import SIGMA_11, lorentz_defect

finite = st.floats(-5, 5, allow_nan=False, allow_infinity=False)
cplx = st.builds(complex, finite, finite)


def sorted_spectrum(A):
    w = np.linalg.eigvals(A)
    return np.array(sorted(w, key=lambda z: (round(z.real, 7), round(z.imag, 7))))


def random_boost(rng, scale=2.0):
    r = rng.uniform(0, scale)
    x = np.cosh(r) * np.exp(1j * rng.uniform(0, 2 * np.pi))
    y = np.sinh(r) * np.exp(1j * rng.uniform(0, 2 * np.pi))
    return make_boost(x, y)


def random_lorentz(rng, metric, t=1.0):
    gen = random_stable_generator(metric, rng)
    return LorentzMap.from_matrix(propagator(gen, t).U, metric)


class TestMetric:
    def test_signs_and_square(self):
        m = MinkowskiMetric(2, 3)
        assert m.dim == 5
        assert list(m.signs) == [1, 1, -1, -1, -1]
        np.testing.assert_array_equal(m.matrix @ m.matrix, np.eye(5))

    @pytest.mark.parametrize("m,n", [(0, 1), (1, 0), (0, 0), (-1, 2)])
    def test_definite_rejected(self, m, n):
        with pytest.raises(ValueError):
            MinkowskiMetric(m, n)

    def test_apply_is_sign_flip(self):
        m = MinkowskiMetric(1, 2)
        x = np.array([1 + 1j, 2, 3j])
        np.testing.assert_array_equal(m.apply(x), m.matrix @ x)
        A = np.arange(9).reshape(3, 3)
        np.testing.assert_array_equal(m.apply(A), m.matrix @ A)
        np.testing.assert_array_equal(m.apply_right(A), A @ m.matrix)

    def test_for_dim(self):
        assert MinkowskiMetric.for_dim(6) == MinkowskiMetric(3, 3)
        with pytest.raises(ValueError):
            MinkowskiMetric.for_dim(3)


class TestState:
    def test_length_checked(self):
        with pytest.raises(DimensionMismatchError):
            SpinorState([1, 0, 0])

    def test_immutable(self):
        s = SpinorState([1, 2])
        with pytest.raises(ValueError):
            s.amplitudes[0] = 3

    def test_source_array_not_aliased(self):
        a = np.array([1.0, 2.0 + 0j])
        s = SpinorState(a)
        a[0] = 99
        assert s[0] == 1


class TestInterval:
    def test_examples(self):
        assert interval(SpinorState([1, 0])) == 1
        assert interval(SpinorState([np.cosh(1), np.sinh(1)])) == pytest.approx(1, abs=1e-14)
        s = SpinorState([0.6, 0, 0.8j], MinkowskiMetric(2, 1))
        assert interval(s) == pytest.approx(-0.28, abs=1e-15)

    @given(st.lists(cplx, min_size=4, max_size=4))
    def test_real_and_matches_formula(self, amps):
        a = np.array(amps)
        s = SpinorState(a, MinkowskiMetric(1, 3))
        expected = abs(a[0]) ** 2 - np.sum(np.abs(a[1:]) ** 2)
        assert interval(s) == pytest.approx(expected, abs=1e-12 * max(1, s.norm2))


class TestClassify:
    def test_examples(self):
        assert classify(SpinorState([1, 0]), 1e-9).kind is Causality.SPACE_LIKE
        assert classify(SpinorState([1, 1]), 1e-9).kind is Causality.LIGHT_LIKE
        assert classify(SpinorState([0.7j, -0.7]), 1e-9).kind is Causality.LIGHT_LIKE
        c = classify(SpinorState([0.6, 0.8]), 1e-9)
        assert c.kind is Causality.TIME_LIKE
        assert c.interval == pytest.approx(-0.28)

    def test_negative_tol(self):
        with pytest.raises(ValueError):
            classify(SpinorState([1, 0]), -1)

    def test_relative_tolerance(self):
        # interval 2e-9 on a state of squared norm ~2e6 is light-like at 1e-9
        big = SpinorState([1000.0 + 1e-12, 1000.0])
        assert classify(big, 1e-9).kind is Causality.LIGHT_LIKE

    @given(st.lists(cplx, min_size=2, max_size=2), st.floats(0, 2 * np.pi))
    def test_phase_stable(self, amps, phi):
        s = SpinorState(amps)
        t = s.scaled(np.exp(1j * phi))
        assert classify(s).kind is classify(t).kind


class TestSigmaInner:
    def test_examples(self):
        assert sigma_inner(SpinorState([1, 0]), SpinorState([0, 1])) == 0
        assert sigma_inner(SpinorState([0, 1]), SpinorState([0, 1])) == -1
        r = 0.7
        u = SpinorState([np.cosh(r), np.sinh(r)])
        v = SpinorState([np.sinh(r), np.cosh(r)])
        assert abs(sigma_inner(u, v)) < 1e-15

    def test_metric_mismatch(self):
        with pytest.raises(MetricMismatchError):
            sigma_inner(SpinorState([1, 0]), SpinorState([1, 0, 0, 0], MinkowskiMetric(2, 2)))

    @given(st.lists(cplx, min_size=4, max_size=4), st.lists(cplx, min_size=4, max_size=4))
    def test_hermitian_symmetry_and_interval(self, a, b):
        m = MinkowskiMetric(2, 2)
        p, q = SpinorState(a, m), SpinorState(b, m)
        assert sigma_inner(p, q) == pytest.approx(np.conj(sigma_inner(q, p)), abs=1e-12)
        assert sigma_inner(p, p).real == pytest.approx(interval(p), abs=1e-12)


class TestBoost:
    def test_identity(self):
        L = make_boost(1, 0)
        np.testing.assert_array_equal(L.matrix, np.eye(2))

    def test_real_boost(self):
        L = make_boost(np.cosh(1), np.sinh(1))
        out = apply_map(L, SpinorState([1, 0]))
        np.testing.assert_allclose(out.amplitudes, [np.cosh(1), np.sinh(1)], atol=1e-15)
        assert interval(out) == pytest.approx(1, abs=1e-14)

    def test_rejects_unnormalised_with_defect(self):
        with pytest.raises(NormalizationError) as ei:
            make_boost(2, 0)
        assert ei.value.defect == pytest.approx(3)

    def test_boost_values_quoted_for_tau1_are_not_normalised(self):
        # |x|^2 - |y|^2 evaluates to sqrt(2) for these values
        x = (np.sqrt(2) + 1) / 2 * 1j
        y = -(np.sqrt(2) - 1) / 2 * 1j
        with pytest.raises(NormalizationError) as ei:
            make_boost(x, y)
        assert ei.value.defect == pytest.approx(np.sqrt(2) - 1, abs=1e-14)

    def test_exact_maps_defect_and_inverse(self, rng):
        for _ in range(200):
            L = random_boost(rng)
            assert L.defect() <= 1e-12 * max(1, np.linalg.norm(L.matrix) ** 2)
            np.testing.assert_allclose(L.matrix @ L.inverse, np.eye(2), atol=1e-12)

    def test_composition(self, rng):
        A, B = random_boost(rng), random_boost(rng)
        C = A @ B
        np.testing.assert_allclose(C.matrix @ C.inverse, np.eye(2), atol=1e-11)
        s = SpinorState([0.3 + 0.1j, 1.2])
        np.testing.assert_allclose((C @ s).amplitudes, A.matrix @ B.matrix @ s.amplitudes)


class TestLorentzMap:
    def test_from_matrix_validates(self):
        with pytest.raises(NormalizationError):
            LorentzMap.from_matrix(np.array([[1, 1], [0, 1]]), SIGMA_11)
        with pytest.raises(DimensionMismatchError):
            LorentzMap.from_matrix(np.eye(3), SIGMA_11)

    def test_general_metric_property(self, rng):
        for m, n in [(1, 2), (2, 2), (3, 1)]:
            met = MinkowskiMetric(m, n)
            L = random_lorentz(rng, met)
            assert lorentz_defect(L.matrix, met) <= 1e-10
            np.testing.assert_allclose(L.matrix @ L.inverse, np.eye(m + n), atol=1e-10)

    def test_interval_invariance_1000_pairs(self, rng):
        worst = 0.0
        for k in range(1000):
            if k % 2:
                L, met = random_boost(rng), SIGMA_11
            else:
                met = MinkowskiMetric(int(rng.integers(1, 4)), int(rng.integers(1, 4)))
                L = random_lorentz(rng, met, t=rng.uniform(0, 2))
            a = rng.normal(size=met.dim) + 1j * rng.normal(size=met.dim)
            s = SpinorState(a, met)
            out = apply_map(L, s)
            worst = max(worst, abs(interval(out) - interval(s)) / max(1.0, out.norm2))
        assert worst <= 1e-10

    def test_light_like_preserved(self, rng):
        s = SpinorState([1, 1j])
        for _ in range(20):
            out = apply_map(random_boost(rng), s)
            assert classify(out).kind is Causality.LIGHT_LIKE

    def test_apply_dimension_mismatch(self):
        with pytest.raises(DimensionMismatchError):
            apply_map(make_boost(1, 0), SpinorState([1, 0, 0, 0], MinkowskiMetric(2, 2)))


class TestConjugate:
    def test_identity(self):
        K = from_mdecomp(0.3, 0.2, 1.0).K
        np.testing.assert_array_equal(conjugate_operator(make_boost(1, 0), K), K)

    def test_spectrum_preserved(self, rng):
        for _ in range(50):
            K = from_mdecomp(*rng.normal(size=3)).K
            out = conjugate_operator(random_boost(rng), K)
            a = sorted_spectrum(K)
            b = sorted_spectrum(out)
            assert np.max(np.abs(a - b)) <= 1e-9 * max(1, np.max(np.abs(a)))

    def test_diagonalising_map(self):
        gen = from_mdecomp(0.4, -0.3, 1.2, trace_part=0.5)
        eig = eigensolve(gen)
        V = eig.vectors
        # V is Lorentz (space-like column first); its inverse diagonalises K
        L = LorentzMap.from_matrix(np.linalg.inv(V), SIGMA_11)
        D = conjugate_operator(L, gen.K)
        np.testing.assert_allclose(D, np.diag(eig.eigenvalues), atol=1e-12)

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionMismatchError):
            conjugate_operator(make_boost(1, 0), np.eye(3))
