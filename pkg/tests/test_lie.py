import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from manifold_brownian import lie
from manifold_brownian.errors import NotASubalgebraError

vec3 = st.lists(st.floats(-3, 3), min_size=3, max_size=3).map(np.array)


def test_so3_structure_constants_are_levi_civita():
    c = lie.structure_constants(lie.so3_basis())
    eps = np.zeros((3, 3, 3))
    for i, j, k in [(0, 1, 2), (1, 2, 0), (2, 0, 1)]:
        eps[k, i, j], eps[k, j, i] = 1.0, -1.0
    assert np.allclose(c, eps, atol=1e-15)


def test_aff_bracket():
    # [e1, e2] = √2 e2 with e1 = √2 E11, e2 = √2 E12
    c = lie.structure_constants(lie.aff_basis())
    assert c[1, 0, 1] == pytest.approx(np.sqrt(2.0), abs=1e-15)
    assert c[1, 1, 0] == pytest.approx(-np.sqrt(2.0), abs=1e-15)
    assert np.count_nonzero(np.abs(c) > 1e-15) == 2


@pytest.mark.parametrize("basis", [lie.so3_basis(), lie.aff_basis(), lie.abelian_basis(2)])
def test_antisymmetry_and_jacobi(basis):
    c = lie.structure_constants(basis)
    assert np.allclose(c, -c.transpose(0, 2, 1), atol=1e-15)
    assert lie.jacobi_residual(c) < 1e-13


def test_canonical_drifts():
    assert np.max(np.abs(lie.canonical_drift(lie.structure_constants(lie.so3_basis())))) < 1e-14
    assert np.max(np.abs(lie.canonical_drift(lie.structure_constants(lie.abelian_basis(2))))) < 1e-14
    J = lie.canonical_drift(lie.structure_constants(lie.aff_basis()))
    assert np.allclose(J, [-np.sqrt(2.0), 0.0], atol=1e-12)


def test_drift_is_minus_trace_of_ad():
    for b in (lie.so3_basis(), lie.aff_basis()):
        c = lie.structure_constants(b)
        J = lie.canonical_drift(c)
        tr = np.array([np.trace(lie.ad_matrix(c, e)) for e in np.eye(b.dim)])
        assert np.allclose(J, -tr, atol=1e-12)


def test_unimodular():
    assert lie.is_unimodular(lie.structure_constants(lie.so3_basis()))
    assert not lie.is_unimodular(lie.structure_constants(lie.aff_basis()))


def test_not_a_subalgebra():
    # [E12, E21] = E11 − E22 leaves span{E12, E21}
    b = lie.LieAlgebraBasis(np.stack([np.array([[0, 1.0], [0, 0]]), np.array([[0, 0], [1.0, 0]])]), name="bad")
    with pytest.raises(NotASubalgebraError):
        lie.structure_constants(b)


def test_non_orthonormal_basis_rejected():
    with pytest.raises(ValueError):
        lie.LieAlgebraBasis(np.stack([np.eye(2), 2 * np.eye(2)]))


def test_ad_shape_check():
    c = lie.structure_constants(lie.so3_basis())
    with pytest.raises(ValueError):
        lie.ad_matrix(c, np.ones(2))


@settings(max_examples=40, deadline=None)
@given(vec3, vec3, vec3)
def test_coad_duality(eta, alpha, zeta):
    c = lie.structure_constants(lie.so3_basis())
    lhs = lie.coad_apply(c, eta, alpha) @ zeta
    rhs = alpha @ (lie.ad_matrix(c, eta) @ zeta)
    assert lhs == pytest.approx(rhs, abs=1e-10)


@settings(max_examples=40, deadline=None)
@given(vec3, vec3)
def test_so3_ad_is_cross_product(eta, zeta):
    c = lie.structure_constants(lie.so3_basis())
    assert np.allclose(lie.ad_matrix(c, eta) @ zeta, np.cross(eta, zeta), atol=1e-12)


def test_coefficients_round_trip():
    b = lie.so3_basis()
    w = np.array([0.3, -1.2, 2.0])
    assert np.allclose(b.to_coefficients(b.from_coefficients(w)), w, atol=1e-15)
    assert np.allclose(b.from_coefficients(w), lie.hat(w))


def test_left_invariant_covariant_self_sum_gives_drift():
    # Σ ∇_{e_i} e_i = −J for the Koszul connection; bi-invariant so(3) gives 0
    for b in (lie.so3_basis(), lie.aff_basis()):
        c = lie.structure_constants(b)
        s = sum(lie.left_invariant_covariant(c, e, e) for e in np.eye(b.dim))
        assert np.allclose(s, -lie.canonical_drift(c), atol=1e-14)
