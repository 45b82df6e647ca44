"""Matrix primitives: vectorization, spectral calculus, entropies, Choi."""

import numpy as np
import pytest
import scipy.linalg

from qmslab.errors import (DomainViolation, HermitianViolation, RankError,
                           ShapeError, SupportError)
from qmslab.operator_core import (FullRankState, Superoperator, apply_superop,
                                  check_density, check_hermitian, choi_matrix,
                                  dag, gamma_inverse, gamma_map, gamma_power,
                                  is_cp, is_tp, is_unital, kms_inner,
                                  lindblad_relative_entropy, logm_psd,
                                  matrix_function, partial_trace, powm_psd,
                                  relative_entropy, spectral_decompose,
                                  sqrtm_psd, superop_sandwich, tensor, unvec,
                                  vec)
from qmslab import sampling


def rng_for(i):
    return sampling.child_rng(11, i)


def test_vec_unvec_round_trip():
    X = sampling.random_complex(rng_for(0), (4, 4))
    np.testing.assert_array_equal(unvec(vec(X)), X)
    # column stacking: vec of E_{01} has the 1 at index d*col + row
    E = np.zeros((3, 3))
    E[0, 1] = 1.0
    assert vec(E)[3] == 1.0


def test_superop_sandwich_action():
    rng = rng_for(1)
    A = sampling.random_complex(rng, (3, 3))
    B = sampling.random_complex(rng, (3, 3))
    X = sampling.random_complex(rng, (3, 3))
    out = unvec(superop_sandwich(A, B) @ vec(X))
    np.testing.assert_allclose(out, A @ X @ B, atol=1e-13)


def test_tensor_and_partial_trace():
    rng = rng_for(2)
    a = sampling.random_density(rng, 2)
    b = sampling.random_density(rng, 3)
    X = tensor(a, b)
    np.testing.assert_allclose(partial_trace(X, (2, 3), "first"), a,
                               atol=1e-13)
    np.testing.assert_allclose(partial_trace(X, (2, 3), "second"), b,
                               atol=1e-13)
    # trace of either marginal is the full trace
    Y = sampling.random_complex(rng, (6, 6))
    np.testing.assert_allclose(np.trace(partial_trace(Y, (2, 3), "first")),
                               np.trace(Y), atol=1e-13)


def test_spectral_decompose_reconstructs():
    A = sampling.random_hermitian(rng_for(3), 4)
    dec = spectral_decompose(A)
    rebuilt = sum(w * P for w, P in zip(dec.eigenvalues, dec.projections))
    np.testing.assert_allclose(rebuilt, A, atol=1e-12)
    for i, P in enumerate(dec.projections):
        np.testing.assert_allclose(P @ P, P, atol=1e-12)
        for Q in dec.projections[i + 1:]:
            np.testing.assert_allclose(P @ Q, 0.0 * P, atol=1e-12)


def test_spectral_decompose_groups_near_degenerate():
    A = np.diag([1.0, 1.0 + 1e-13, 2.0])
    dec = spectral_decompose(A)
    assert len(dec.eigenvalues) == 2


def test_matrix_function_vs_scipy():
    A = sampling.random_hermitian(rng_for(4), 4)
    np.testing.assert_allclose(matrix_function(A, np.exp),
                               scipy.linalg.expm(A), atol=1e-11)
    P = sampling.random_positive_definite(rng_for(5), 3)
    np.testing.assert_allclose(sqrtm_psd(P) @ sqrtm_psd(P), P, atol=1e-11)
    np.testing.assert_allclose(scipy.linalg.expm(logm_psd(P)), P, atol=1e-11)
    np.testing.assert_allclose(powm_psd(P, 0.5), sqrtm_psd(P), atol=1e-12)


def test_relative_entropy_diagonal_oracle():
    # classical formula sum x(ln x - ln y) + sum y - sum x, frozen by hand
    X = np.diag([0.5, 0.3, 0.2]).astype(complex)
    Y = np.diag([0.25, 0.25, 0.5]).astype(complex)
    np.testing.assert_allclose(lindblad_relative_entropy(X, Y),
                               0.21801191094332806, rtol=1e-13)
    X2 = np.diag([1.2, 0.4]).astype(complex)
    Y2 = np.diag([0.8, 0.9]).astype(complex)
    np.testing.assert_allclose(lindblad_relative_entropy(X2, Y2),
                               0.26218604324326567, rtol=1e-13)


def test_relative_entropy_logm_oracle():
    # independent route through scipy logm on a non-commuting pair
    rng = rng_for(6)
    rho = sampling.random_full_rank_density(rng, 3)
    sig = sampling.random_full_rank_density(rng, 3)
    want = np.trace(rho @ (scipy.linalg.logm(rho) - scipy.linalg.logm(sig)))
    np.testing.assert_allclose(relative_entropy(rho, sig), want.real,
                               rtol=1e-10)
    assert relative_entropy(rho, sig) >= 0.0
    assert relative_entropy(rho, rho) == pytest.approx(0.0, abs=1e-12)


def test_relative_entropy_support():
    X = np.diag([1.0, 0.0]).astype(complex)
    Y = np.diag([0.0, 1.0]).astype(complex)
    with pytest.raises(SupportError):
        lindblad_relative_entropy(X, Y)
    assert lindblad_relative_entropy(X, Y, allow_infinite=True) == np.inf
    # support inside the reference support is fine
    Z = np.diag([0.5, 0.5]).astype(complex)
    assert np.isfinite(lindblad_relative_entropy(X, Z))


def test_gamma_maps():
    rng = rng_for(7)
    sig = sampling.random_full_rank_density(rng, 3)
    X = sampling.random_hermitian(rng, 3)
    sh = sqrtm_psd(sig)
    np.testing.assert_allclose(apply_superop(gamma_map(sig).matrix, X),
                               sh @ X @ sh, atol=1e-12)
    np.testing.assert_allclose(
        apply_superop(gamma_inverse(sig).matrix,
                      apply_superop(gamma_map(sig).matrix, X)),
        X, atol=1e-10)
    np.testing.assert_allclose(gamma_power(sig, 1.0).matrix,
                               gamma_map(sig).matrix, atol=1e-12)
    q = sqrtm_psd(sqrtm_psd(sig))
    np.testing.assert_allclose(apply_superop(gamma_power(sig, 0.5).matrix, X),
                               q @ X @ q, atol=1e-12)


def test_kms_inner_is_an_inner_product():
    rng = rng_for(8)
    sig = sampling.random_full_rank_density(rng, 3)
    A = sampling.random_complex(rng, (3, 3))
    B = sampling.random_complex(rng, (3, 3))
    assert kms_inner(sig, A, A).real > 0
    np.testing.assert_allclose(kms_inner(sig, A, B),
                               np.conj(kms_inner(sig, B, A)), atol=1e-12)


def test_choi_identity_and_transpose():
    d = 3
    eye_super = np.eye(d * d)
    C = choi_matrix(eye_super)
    # maximally entangled projector, rank one, trace d
    w = np.linalg.eigvalsh(C)
    np.testing.assert_allclose(w[-1], d, atol=1e-12)
    np.testing.assert_allclose(w[:-1], 0.0, atol=1e-12)
    assert is_cp(eye_super) and is_tp(eye_super) and is_unital(eye_super)
    # transpose map is positive but not completely positive
    from qmslab.operator_core import transpose_permutation
    T = transpose_permutation(d)
    assert not is_cp(T)
    assert is_tp(T)


def test_superoperator_wrapper():
    with pytest.raises(ShapeError):
        Superoperator(np.zeros((3, 4)))
    S = Superoperator(np.eye(4))
    assert S.dim == 2


def test_full_rank_state_validation():
    with pytest.raises(RankError):
        FullRankState(np.diag([1.0, 0.0]).astype(complex))
    with pytest.raises(DomainViolation):
        FullRankState(np.diag([0.7, 0.7]).astype(complex))
    with pytest.raises(HermitianViolation):
        check_hermitian(np.array([[0.0, 1.0], [0.0, 0.0]]))
    st = FullRankState(np.diag([0.75, 0.25]).astype(complex))
    np.testing.assert_allclose(st.power(2), np.diag([0.5625, 0.0625]),
                               atol=1e-14)
    np.testing.assert_allclose(st.log(), np.diag(np.log([0.75, 0.25])),
                               atol=1e-14)


def test_check_density():
    rng = rng_for(9)
    rho = sampling.random_density(rng, 3)
    check_density(rho)
    with pytest.raises(DomainViolation):
        check_density(2.0 * rho)
    with pytest.raises(DomainViolation):
        check_density(np.diag([1.5, -0.5]).astype(complex))
