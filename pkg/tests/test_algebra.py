import numpy as np
import pytest
from hypothesis import given
from hypothesis.strategies import floats, lists

from lzkit.algebra import (
    IDENTITY2,
    apply,
    as_operator,
    choi_matrix,
    commutator_superop,
    compose,
    dagger,
    devectorize,
    dual_superop,
    identity_superop,
    is_density,
    is_hermiticity_preserving,
    is_trace_annihilating,
    left_multiplication,
    operator_norm,
    right_multiplication,
    sandwich_superop,
    singular_values,
    trace_norm,
    vectorize,
)

entries = lists(floats(-10, 10), min_size=8, max_size=8)


def _matrix(values):
    re = np.array(values[:4]).reshape(2, 2)
    im = np.array(values[4:]).reshape(2, 2)
    return re + 1j * im


def _random(rng, count):
    return rng.normal(size=(count, 2, 2)) + 1j * rng.normal(size=(count, 2, 2))


@given(entries, entries)
def test_trace_norm_triangle_inequality(a, b):
    A, B = _matrix(a), _matrix(b)
    assert trace_norm(A + B) <= trace_norm(A) + trace_norm(B) + 1e-12 * (1 + trace_norm(A) + trace_norm(B))


@given(entries, floats(-5, 5), floats(-5, 5))
def test_trace_norm_homogeneous(a, re, im):
    A = _matrix(a)
    c = complex(re, im)
    assert trace_norm(c * A) == pytest.approx(abs(c) * trace_norm(A), rel=1e-12, abs=1e-12)


@given(entries, entries, floats(-3, 3))
def test_vectorize_linear(a, b, c):
    A, B = _matrix(a), _matrix(b)
    assert np.allclose(vectorize(A + c * B), vectorize(A) + c * vectorize(B), rtol=0, atol=1e-12)
    assert np.array_equal(devectorize(vectorize(A)), A)


def test_vectorize_row_major():
    rho = np.array([[1, 2], [3, 4]], dtype=complex)
    assert list(vectorize(rho)) == [1, 2, 3, 4]


def test_trace_norm_matches_svd():
    rng = np.random.default_rng(0)
    for M in _random(rng, 1000):
        reference = np.sum(np.linalg.svd(M, compute_uv=False))
        assert trace_norm(M) == pytest.approx(reference, rel=1e-12)
        s1, s2 = singular_values(M)
        assert s1 >= s2 >= 0
        assert operator_norm(M) == pytest.approx(np.linalg.norm(M, 2), rel=1e-12)


def test_holder_bound_on_random_pairs():
    rng = np.random.default_rng(1)
    ops = _random(rng, 2000)
    for A, B in zip(ops[::2], ops[1::2]):
        assert abs(np.trace(A @ B)) <= operator_norm(A) * trace_norm(B) + 1e-12


def test_trace_norm_of_hermitian_is_sum_of_abs_eigenvalues():
    H = np.array([[0.3, 1 - 2j], [1 + 2j, -1.7]])
    assert trace_norm(H) == pytest.approx(np.sum(np.abs(np.linalg.eigvalsh(H))), rel=1e-12)


def test_sandwich_and_multiplications():
    rng = np.random.default_rng(2)
    A, X, B = _random(rng, 3)
    assert np.allclose(apply(sandwich_superop(A, B), X), A @ X @ B, atol=1e-12)
    assert np.allclose(apply(left_multiplication(A), X), A @ X, atol=1e-12)
    assert np.allclose(apply(right_multiplication(B), X), X @ B, atol=1e-12)
    assert np.allclose(apply(commutator_superop(A), X), A @ X - X @ A, atol=1e-12)


def test_compose_applies_rightmost_first():
    rng = np.random.default_rng(3)
    A, B, X = _random(rng, 3)
    S = compose(left_multiplication(A), left_multiplication(B))
    assert np.allclose(apply(S, X), A @ B @ X, atol=1e-12)
    assert np.array_equal(compose(), identity_superop())


def test_dual_superop_pairing():
    rng = np.random.default_rng(4)
    for _ in range(100):
        S = rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4))
        A, rho = _random(rng, 2)
        lhs = np.trace(apply(dual_superop(S), A) @ rho)
        rhs = np.trace(A @ apply(S, rho))
        assert abs(lhs - rhs) <= 1e-12 * (1 + abs(rhs))
        assert np.allclose(dual_superop(dual_superop(S)), S, atol=0)


def test_dual_of_sandwich():
    rng = np.random.default_rng(5)
    A, B = _random(rng, 2)
    assert np.allclose(dual_superop(sandwich_superop(A, B)), sandwich_superop(B, A), atol=1e-12)


def test_choi_of_identity_is_maximally_entangled_projector():
    eigs = np.linalg.eigvalsh(choi_matrix(identity_superop()))
    assert np.allclose(eigs, [0, 0, 0, 2], atol=1e-12)


def test_choi_of_kraus_map_is_positive():
    rng = np.random.default_rng(6)
    for _ in range(100):
        K1, K2 = _random(rng, 2)
        S = sandwich_superop(K1, dagger(K1)) + sandwich_superop(K2, dagger(K2))
        assert np.linalg.eigvalsh(choi_matrix(S))[0] >= -1e-10


def test_choi_detects_transpose_map():
    # 転置写像は正だが完全正ではない
    transpose = np.eye(4)[[0, 2, 1, 3]]
    assert np.linalg.eigvalsh(choi_matrix(transpose))[0] == pytest.approx(-1.0)


def test_predicates():
    assert is_density(0.5 * IDENTITY2)
    assert not is_density(IDENTITY2)
    assert not is_density(np.diag([1.5, -0.5]))
    H = np.array([[1.0, 0.5j], [-0.5j, -1.0]])
    assert is_trace_annihilating(commutator_superop(H))
    assert not is_trace_annihilating(identity_superop())
    assert is_hermiticity_preserving(-1j * commutator_superop(H))
    assert not is_hermiticity_preserving(1j * identity_superop())


def test_as_operator_rejects_wrong_shape():
    with pytest.raises(ValueError):
        as_operator(np.eye(3))
    assert as_operator([[1, 0], [0, 1]]).dtype == complex
