"""Lie-algebra kernel: structure constants, ad / ad*, canonical drift J.

Algebra elements appear in two forms.  As matrices (the basis elements of a
matrix Lie algebra, used for group integration) and as coefficient vectors in
an orthonormal basis (used for all ad/ad* algebra).  ``LieAlgebraBasis``
converts between them.  Since the basis is orthonormal, ad* is the transpose of
the ad matrix.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .errors import NotASubalgebraError

ORTHONORMAL_TOL = 1e-12
CLOSURE_TOL = 1e-10


def commutator(a, b):
    return a @ b - b @ a


@dataclass(frozen=True)
class LieAlgebraBasis:
    """An orthonormal basis of a Lie algebra.

    ``elements`` has shape (n, ...) and the inner product is
    ``inner_weight * sum(a * b)``; for k×k matrices with weight ½ this is the
    ½-trace metric ½ tr(aᵀb).  ``bracket`` defaults to the matrix commutator.
    """

    elements: np.ndarray
    inner_weight: float = 1.0
    bracket: Optional[Callable] = None
    name: str = ""

    def __post_init__(self):
        els = np.array(self.elements, dtype=float)
        els.setflags(write=False)
        object.__setattr__(self, "elements", els)
        flat = els.reshape(len(els), -1)
        gram = self.inner_weight * flat @ flat.T
        if np.max(np.abs(gram - np.eye(len(els)))) > ORTHONORMAL_TOL:
            raise ValueError(f"basis {self.name!r} is not orthonormal under its inner product")

    @property
    def dim(self) -> int:
        return self.elements.shape[0]

    def inner(self, a, b) -> float:
        return float(self.inner_weight * np.sum(np.asarray(a) * np.asarray(b)))

    def lie_bracket(self, a, b):
        if self.bracket is not None:
            return np.asarray(self.bracket(a, b), dtype=float)
        return commutator(np.asarray(a), np.asarray(b))

    def to_coefficients(self, m, tol: float = CLOSURE_TOL) -> np.ndarray:
        """Coefficients of an algebra element; raises if it is outside the span."""
        m = np.asarray(m, dtype=float)
        c = self.inner_weight * self.elements.reshape(self.dim, -1) @ m.reshape(-1)
        resid = m - self.from_coefficients(c)
        if np.max(np.abs(resid), initial=0.0) > tol * max(1.0, float(np.max(np.abs(m), initial=0.0))):
            raise NotASubalgebraError(f"element is not in the span of {self.name or 'the basis'}")
        return c

    def from_coefficients(self, c) -> np.ndarray:
        return np.tensordot(np.asarray(c, dtype=float), self.elements, axes=(0, 0))


def structure_constants(basis: LieAlgebraBasis) -> np.ndarray:
    """c[k, i, j] = ⟨[e_i, e_j], e_k⟩, so [e_i, e_j] = Σ_k c^k_ij e_k."""
    n = basis.dim
    c = np.zeros((n, n, n))
    for i in range(n):
        for j in range(n):
            br = basis.lie_bracket(basis.elements[i], basis.elements[j])
            try:
                c[:, i, j] = basis.to_coefficients(br)
            except NotASubalgebraError:
                raise NotASubalgebraError(f"[e_{i}, e_{j}] leaves the span of the basis") from None
    return c


def jacobi_residual(c) -> float:
    """Max |Σ_cyc [[e_i, e_j], e_k]| over all index triples."""
    c = np.asarray(c)
    # [[e_i,e_j],e_k] = Σ_m c^m_ij [e_m, e_k] = Σ_m c^m_ij c^l_mk e_l
    t = np.einsum("mij,lmk->lijk", c, c)
    cyc = t + t.transpose(0, 2, 3, 1) + t.transpose(0, 3, 1, 2)
    return float(np.max(np.abs(cyc), initial=0.0))


def ad_matrix(c, eta) -> np.ndarray:
    """(ad_η)_kj = Σ_i η_i c^k_ij, the matrix of ζ ↦ [η, ζ]."""
    c = np.asarray(c)
    eta = np.asarray(eta, dtype=float)
    if eta.shape != (c.shape[1],):
        raise ValueError(f"expected {c.shape[1]} coefficients, got shape {eta.shape}")
    return np.einsum("i,kij->kj", eta, c)


def coad_apply(c, eta, alpha) -> np.ndarray:
    """ad*_η α, defined by ⟨ad*_η α, ζ⟩ = ⟨α, [η, ζ]⟩."""
    alpha = np.asarray(alpha, dtype=float)
    A = ad_matrix(c, eta)
    if alpha.shape != (A.shape[0],):
        raise ValueError(f"expected {A.shape[0]} coefficients, got shape {alpha.shape}")
    return A.T @ alpha


def canonical_drift(c) -> np.ndarray:
    """J = Σ_i ad*_{e_i} e_i (coefficients).

    Also computed as the contraction J_k = Σ_i c^i_ik; the two must agree.
    """
    c = np.asarray(c)
    n = c.shape[1]
    eye = np.eye(n)
    J = np.zeros(n)
    for i in range(n):
        J += coad_apply(c, eye[i], eye[i])
    J2 = np.einsum("iik->k", c)
    if np.max(np.abs(J - J2), initial=0.0) > 1e-12:
        raise ArithmeticError("canonical drift routes disagree")
    return J


def is_unimodular(c, tol: float = 1e-12) -> bool:
    """True iff tr(ad_{e_k}) vanishes for every basis element."""
    c = np.asarray(c)
    traces = np.einsum("kjk->j", c)  # tr ad_{e_j} = Σ_k c^k_jk = −J_j
    return bool(np.all(np.abs(traces) <= tol))


def left_invariant_covariant(c, eta, xi) -> np.ndarray:
    """Algebra value of ∇_X Y for left-invariant X = gη, Y = gξ.

    Koszul formula for a left-invariant metric: ½([η, ξ] − ad*_η ξ − ad*_ξ η).
    """
    eta = np.asarray(eta, dtype=float)
    xi = np.asarray(xi, dtype=float)
    return 0.5 * (ad_matrix(c, eta) @ xi - coad_apply(c, eta, xi) - coad_apply(c, xi, eta))


# ---------------------------------------------------------------- catalog algebras

def hat(w) -> np.ndarray:
    """Skew matrix with hat(w) @ v = w × v."""
    w = np.asarray(w, dtype=float)
    out = np.zeros(w.shape[:-1] + (3, 3))
    out[..., 0, 1] = -w[..., 2]
    out[..., 0, 2] = w[..., 1]
    out[..., 1, 0] = w[..., 2]
    out[..., 1, 2] = -w[..., 0]
    out[..., 2, 0] = -w[..., 1]
    out[..., 2, 1] = w[..., 0]
    return out


def so3_basis() -> LieAlgebraBasis:
    return LieAlgebraBasis(hat(np.eye(3)), inner_weight=0.5, name="so(3)")


def aff_basis() -> LieAlgebraBasis:
    s = np.sqrt(2.0)
    e1 = np.array([[s, 0.0], [0.0, 0.0]])
    e2 = np.array([[0.0, s], [0.0, 0.0]])
    return LieAlgebraBasis(np.stack([e1, e2]), inner_weight=0.5, name="aff(R)")


def abelian_basis(n: int = 2) -> LieAlgebraBasis:
    return LieAlgebraBasis(np.eye(n), bracket=lambda a, b: np.zeros_like(a), name=f"t^{n}")
