import hypothesis as hyp
import hypothesis.strategies as st
import numpy as np
import pytest

from bilqctrl.exceptions import ValidationError
from bilqctrl.linalg import (
    SkewHermitianGenerator,
    adjoint,
    as_matrix,
    basis_vector,
    expm_cross_check,
    expm_skew,
    inner,
    is_skew_hermitian,
    is_unitary,
    matvec,
    unitarity_defect,
)


def random_skew(seed: int, dim: int = 5) -> np.ndarray:
    rng = np.random.default_rng(seed)
    h = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    return 0.5 * (h - h.conj().T)


def test_diagonal_expm_is_entrywise():
    m = np.diag([-1j, -4j, -9j])
    u = expm_skew(m, np.pi / 4)
    np.testing.assert_array_equal(np.diagonal(u), np.exp(np.array([-1j, -4j, -9j]) * np.pi / 4))
    assert not np.any(u - np.diag(np.diagonal(u)))


def test_zero_time_is_identity():
    m = random_skew(1)
    np.testing.assert_allclose(expm_skew(m, 0.0), np.eye(5), atol=1e-14)


def test_spectral_and_pade_agree():
    for seed in range(5):
        assert expm_cross_check(random_skew(seed), 3.7) < 1e-10


def test_pauli_rotation_closed_form():
    # exp(-i t sigma_x / 2)
    m = np.array([[0, -0.5j], [-0.5j, 0]])
    u = expm_skew(m, np.pi)
    np.testing.assert_allclose(np.abs(u), [[0, 1], [1, 0]], atol=1e-12)


@hyp.settings(max_examples=25, deadline=None)
@hyp.given(
    seed=st.integers(min_value=0, max_value=10_000),
    s=st.floats(min_value=-5, max_value=5, allow_nan=False),
    t=st.floats(min_value=-5, max_value=5, allow_nan=False),
)
def test_semigroup_and_unitarity(seed, s, t):
    gen = SkewHermitianGenerator(random_skew(seed))
    np.testing.assert_allclose(gen.expm(s) @ gen.expm(t), gen.expm(s + t), atol=1e-10)
    assert is_unitary(gen.expm(t))
    assert unitarity_defect(gen.expm(s)) < 1e-10


def test_apply_matches_matrix():
    gen = SkewHermitianGenerator(random_skew(7))
    psi = np.arange(5, dtype=np.complex128)
    np.testing.assert_allclose(gen.apply(1.3, psi), gen.expm(1.3) @ psi, atol=1e-12)


def test_rejects_non_skew_generator():
    with pytest.raises(ValidationError, match="skew-Hermitian"):
        expm_skew(np.eye(3), 1.0)
    with pytest.raises(ValidationError, match="skew-Hermitian"):
        expm_skew(np.eye(3), 1.0, method="pade")


def test_rejects_bad_inputs():
    with pytest.raises(ValidationError, match="unknown expm method"):
        expm_skew(random_skew(0), 1.0, method="taylor")
    with pytest.raises(ValidationError, match="finite"):
        expm_skew(random_skew(0), np.inf)
    with pytest.raises(ValidationError, match="square"):
        as_matrix(np.zeros((2, 3)))
    with pytest.raises(ValidationError, match="dimension mismatch"):
        matvec(np.eye(3), np.ones(2))
    with pytest.raises(ValidationError):
        basis_vector(3, 0)


def test_inner_is_conjugate_linear_in_first_argument():
    u = np.array([1j, 0])
    v = np.array([1, 0])
    assert inner(u, v) == -1j
    assert inner(v, u) == 1j


def test_skew_check_is_relative():
    m = random_skew(3) * 1e6
    assert is_skew_hermitian(m)
    np.testing.assert_array_equal(adjoint(m), -m)
