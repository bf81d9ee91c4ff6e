"""Differential-geometry kernel.

Pointwise operators on charts (metric, Christoffel symbols, covariant
derivatives, frame-based gradient/divergence/Laplacian/Hessian) and on
embedded manifolds (projection, pseudo-frame, second fundamental form,
mean curvature).

Conventions: Christoffel arrays are stored upper index first,
``gamma[k, i, j]`` = Γ^k_ij.  Frames are ``(n, n)`` arrays whose *columns* are
the frame vectors.  Derivatives use central differences with step ``fd_step``
unless an analytic callback is attached to the field.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .errors import DegenerateMetricError, DomainError

DEFAULT_FD_STEP = 1e-5
# second differences lose two orders of magnitude to rounding, so they use a
# coarser step
SECOND_FD_STEP = 1e-4


@dataclass(frozen=True)
class MetricTensor:
    """Metric components g_ij at a point, together with the inverse g^ij."""

    g: np.ndarray
    g_inv: np.ndarray

    @classmethod
    def from_matrix(cls, g, tol: float = 1e-10) -> "MetricTensor":
        g = np.array(g, dtype=float)
        if g.ndim != 2 or g.shape[0] != g.shape[1]:
            raise DegenerateMetricError(f"metric must be square, got shape {g.shape}")
        scale = max(1.0, float(np.max(np.abs(g))))
        if np.max(np.abs(g - g.T)) > tol * scale:
            raise DegenerateMetricError("metric is not symmetric")
        g = 0.5 * (g + g.T)
        if not np.all(np.isfinite(g)):
            raise DegenerateMetricError("metric has non-finite entries")
        if np.min(np.linalg.eigvalsh(g)) <= 0.0:
            raise DegenerateMetricError("metric is not positive definite")
        try:
            g_inv = np.linalg.inv(g)
        except np.linalg.LinAlgError as exc:
            raise DegenerateMetricError(str(exc)) from None
        if np.max(np.abs(g @ g_inv - np.eye(len(g)))) > tol * np.linalg.cond(g):
            raise DegenerateMetricError("metric inverse is inaccurate")
        return cls(g, g_inv)

    @property
    def dim(self) -> int:
        return self.g.shape[0]

    def inner(self, u, v) -> float:
        return float(np.asarray(u) @ self.g @ np.asarray(v))


@dataclass(frozen=True)
class ScalarField:
    """A real function of a point with optional analytic derivatives.

    ``gradient(p)`` returns the coordinate differential (∂_i f) and
    ``hessian(p)`` the matrix of second partials.  When present they are used
    instead of finite differences.
    """

    value: Callable[[np.ndarray], float]
    gradient: Optional[Callable[[np.ndarray], np.ndarray]] = None
    hessian: Optional[Callable[[np.ndarray], np.ndarray]] = None

    def __call__(self, p):
        return self.value(p)


@dataclass(frozen=True)
class VectorField:
    """A vector-valued function of a point.

    ``jacobian(p)[k, i]`` = ∂_i Y^k when supplied.
    """

    value: Callable[[np.ndarray], np.ndarray]
    jacobian: Optional[Callable[[np.ndarray], np.ndarray]] = None

    def __call__(self, p):
        return np.asarray(self.value(p), dtype=float)


def as_scalar_field(f) -> ScalarField:
    if isinstance(f, ScalarField):
        return f
    if hasattr(f, "as_scalar_field"):
        return f.as_scalar_field()
    return ScalarField(f)


def as_vector_field(Y) -> VectorField:
    if isinstance(Y, VectorField):
        return Y
    if callable(Y):
        return VectorField(Y)
    const = np.array(Y, dtype=float)
    return VectorField(lambda p: const, lambda p: np.zeros((const.size, np.size(p))))


@dataclass(frozen=True)
class ChartDomain:
    """Axis-aligned validity box of a chart.

    Points outside the box raise ``error`` (a DomainError subclass).
    """

    lower: tuple
    upper: tuple
    error: type = DomainError
    label: str = "chart"

    def contains(self, p) -> np.ndarray:
        p = np.asarray(p, dtype=float)
        lo = np.asarray(self.lower, dtype=float)
        hi = np.asarray(self.upper, dtype=float)
        return np.all((p >= lo) & (p <= hi) & np.isfinite(p), axis=-1)

    def check(self, p) -> None:
        if not self.contains(p):
            raise self.error(f"point {np.asarray(p).tolist()} is outside the {self.label} validity box")


def _check(domain, p):
    if domain is not None:
        domain.check(p)


# ---------------------------------------------------------------- derivatives

def _partials(fn, p, h):
    """Central-difference partials of an array-valued fn; last axis indexes i."""
    p = np.asarray(p, dtype=float)
    cols = []
    for i in range(p.size):
        dp = np.zeros_like(p)
        dp[i] = h
        cols.append((np.asarray(fn(p + dp)) - np.asarray(fn(p - dp))) / (2.0 * h))
    return np.stack(cols, axis=-1)


def scalar_gradient(f: ScalarField, p, fd_step: float = DEFAULT_FD_STEP) -> np.ndarray:
    """Coordinate differential ∂_i f at p."""
    f = as_scalar_field(f)
    if f.gradient is not None:
        return np.asarray(f.gradient(p), dtype=float)
    return _partials(lambda q: f.value(q), p, fd_step)


def scalar_hessian(f: ScalarField, p, fd_step: float = SECOND_FD_STEP) -> np.ndarray:
    """Matrix of coordinate second partials ∂_i∂_j f at p."""
    f = as_scalar_field(f)
    if f.hessian is not None:
        return np.asarray(f.hessian(p), dtype=float)
    p = np.asarray(p, dtype=float)
    n = p.size
    H = np.empty((n, n))
    f0 = f.value(p)
    for i in range(n):
        ei = np.zeros(n)
        ei[i] = fd_step
        H[i, i] = (f.value(p + ei) - 2.0 * f0 + f.value(p - ei)) / fd_step**2
        for j in range(i):
            ej = np.zeros(n)
            ej[j] = fd_step
            H[i, j] = H[j, i] = (
                f.value(p + ei + ej) - f.value(p + ei - ej) - f.value(p - ei + ej) + f.value(p - ei - ej)
            ) / (4.0 * fd_step**2)
    return H


def directional_derivative(Y: VectorField, p, X, fd_step: float = DEFAULT_FD_STEP) -> np.ndarray:
    """Flat derivative D_X Y at p (componentwise, no connection terms)."""
    Y = as_vector_field(Y)
    X = np.asarray(X, dtype=float)
    if Y.jacobian is not None:
        return np.asarray(Y.jacobian(p), dtype=float) @ X
    p = np.asarray(p, dtype=float)
    return (Y(p + fd_step * X) - Y(p - fd_step * X)) / (2.0 * fd_step)


def _second_along(f: ScalarField, p, v, fd_step=SECOND_FD_STEP):
    """d²/ds² f(p + s v) at s=0."""
    if f.hessian is not None:
        return float(v @ np.asarray(f.hessian(p)) @ v)
    p = np.asarray(p, dtype=float)
    return (f.value(p + fd_step * v) - 2.0 * f.value(p) + f.value(p - fd_step * v)) / fd_step**2


def _frame_matrix(frame, p) -> np.ndarray:
    F = np.asarray(frame(p) if callable(frame) else frame, dtype=float)
    if F.ndim != 2 or F.shape[0] != F.shape[1]:
        raise ValueError(f"frame must be a square matrix of column vectors, got {F.shape}")
    return F


def frame_column(frame, i: int) -> VectorField:
    """The i-th frame vector as a vector field."""
    return VectorField(lambda q: _frame_matrix(frame, q)[:, i])


def _gamma_at(gamma, p):
    return np.asarray(gamma(p) if callable(gamma) else gamma, dtype=float)


# ---------------------------------------------------------------- chart ops

def christoffel_from_metric(metric_field, p, fd_step: float = DEFAULT_FD_STEP,
                            domain: ChartDomain | None = None) -> np.ndarray:
    """Γ^k_ij = ½ g^km (∂_i g_jm + ∂_j g_im − ∂_m g_ij) by central differences.

    ``metric_field`` maps a point to an (n, n) array or a MetricTensor.
    """
    p = np.asarray(p, dtype=float)
    _check(domain, p)

    def g_of(q):
        m = metric_field(q)
        return m.g if isinstance(m, MetricTensor) else np.asarray(m, dtype=float)

    metric = MetricTensor.from_matrix(g_of(p))
    dg = _partials(g_of, p, fd_step)  # dg[a, b, c] = ∂_c g_ab
    # first-kind symbols: Γ_mij = ½(∂_i g_jm + ∂_j g_im − ∂_m g_ij)
    first = 0.5 * (np.einsum("jmi->mij", dg) + np.einsum("imj->mij", dg) - np.einsum("ijm->mij", dg))
    gamma = np.einsum("km,mij->kij", metric.g_inv, first)
    return 0.5 * (gamma + gamma.transpose(0, 2, 1))


def covariant_derivative_chart(gamma, Y, X, p, fd_step: float = DEFAULT_FD_STEP,
                               domain: ChartDomain | None = None) -> np.ndarray:
    """∇_X Y = X^i (∂_i Y^k + Γ^k_ij Y^j) e_k."""
    p = np.asarray(p, dtype=float)
    _check(domain, p)
    Y = as_vector_field(Y)
    X = np.asarray(X, dtype=float)
    G = _gamma_at(gamma, p)
    return directional_derivative(Y, p, X, fd_step) + np.einsum("kij,i,j->k", G, X, Y(p))


def frame_drift(frame, gamma, p, fd_step: float = DEFAULT_FD_STEP,
                domain: ChartDomain | None = None) -> np.ndarray:
    """Stratonovich drift −½ Σ_i ∇_{E_i} E_i of the intrinsic Brownian SDE."""
    p = np.asarray(p, dtype=float)
    F = _frame_matrix(frame, p)
    acc = np.zeros(F.shape[0])
    for i in range(F.shape[1]):
        acc += covariant_derivative_chart(gamma, frame_column(frame, i), F[:, i], p, fd_step, domain)
    return -0.5 * acc


def gradient_in_frame(f, frame, p, fd_step: float = DEFAULT_FD_STEP) -> np.ndarray:
    """grad f = Σ_i E_i[f] E_i."""
    F = _frame_matrix(frame, p)
    df = scalar_gradient(f, p, fd_step)
    return F @ (F.T @ df)


def divergence_in_frame(X, frame, gamma, p, fd_step: float = DEFAULT_FD_STEP) -> float:
    """div X = Σ_i ⟨∇_{E_i} X, E_i⟩.

    With an orthonormal frame F the pairing ⟨V, E_i⟩ is the i-th coefficient of
    V in the frame, so no metric evaluation is needed.
    """
    F = _frame_matrix(frame, p)
    Finv = np.linalg.inv(F)
    total = 0.0
    for i in range(F.shape[1]):
        total += (Finv @ covariant_derivative_chart(gamma, X, F[:, i], p, fd_step))[i]
    return float(total)


def laplace_beltrami(f, frame, gamma, p, fd_step: float = DEFAULT_FD_STEP) -> float:
    """Δf = Σ_i (E_i[E_i[f]] − (∇_{E_i}E_i)[f])."""
    f = as_scalar_field(f)
    p = np.asarray(p, dtype=float)
    F = _frame_matrix(frame, p)
    G = _gamma_at(gamma, p)
    df = scalar_gradient(f, p, fd_step)
    total = 0.0
    for i in range(F.shape[1]):
        E = F[:, i]
        # E[E[f]] = E^T Hess E + df·(D_E E) and ∇_E E = D_E E + Γ(E, E); the
        # D_E E terms cancel, so the frame is never differentiated
        total += _second_along(f, p, E) - df @ np.einsum("kij,i,j->k", G, E, E)
    return float(total)


def hessian(f, gamma, p, X, Y, fd_step: float = DEFAULT_FD_STEP) -> float:
    """Hess f(X, Y) = X[Y[f]] − (∇_X Y)[f] for tangent vectors X, Y at p."""
    f = as_scalar_field(f)
    p = np.asarray(p, dtype=float)
    X = np.asarray(X, dtype=float)
    Y = np.asarray(Y, dtype=float)
    H = scalar_hessian(f, p)
    G = _gamma_at(gamma, p)
    return float(X @ H @ Y - scalar_gradient(f, p, fd_step) @ np.einsum("kij,i,j->k", G, X, Y))


# ---------------------------------------------------------------- embedded ops

def _projection_of(manifold):
    return manifold.projection if hasattr(manifold, "projection") else manifold


def _weight_of(manifold) -> float:
    return float(getattr(manifold, "metric_weight", 1.0))


def pseudo_frame(P, x, metric_weight: float = 1.0) -> np.ndarray:
    """Rows are P(x)e_i / sqrt(w) for the ambient standard basis e_i.

    ``metric_weight`` w is the factor of the ambient inner product
    ⟨u, v⟩ = w u·v (½ for the trace metric on 3×3 matrices).  With it the
    rows satisfy Σ_i ⟨v, P e_i⟩ P e_i = P v in that inner product.
    """
    Px = np.asarray(P(x) if callable(P) else P, dtype=float)
    return Px.T / np.sqrt(metric_weight)


def projection_jvp(manifold, x, X, fd_step: float = DEFAULT_FD_STEP) -> np.ndarray:
    """Directional derivative DP(x)[X] of the projection field."""
    P = _projection_of(manifold)
    x = np.asarray(x, dtype=float)
    X = np.asarray(X, dtype=float)
    return (np.asarray(P(x + fd_step * X)) - np.asarray(P(x - fd_step * X))) / (2.0 * fd_step)


def second_fundamental_form(manifold, x, X, Y, fd_step: float = DEFAULT_FD_STEP) -> np.ndarray:
    """II(X, Y) = (I − P(x)) D_X[y ↦ P(y)Y](x), the normal part of D_X Y."""
    P = _projection_of(manifold)
    x = np.asarray(x, dtype=float)
    Px = np.asarray(P(x))
    normal = np.eye(x.size) - Px
    return normal @ (projection_jvp(manifold, x, X, fd_step) @ np.asarray(Y, dtype=float))


def covariant_derivative_embedded(manifold, Y, X, x, fd_step: float = DEFAULT_FD_STEP) -> np.ndarray:
    """∇_X Y = P(x) D_X Y for a tangent field Y given in ambient components."""
    P = _projection_of(manifold)
    return np.asarray(P(x)) @ directional_derivative(as_vector_field(Y), x, X, fd_step)


def mean_curvature_numeric(manifold, x, fd_step: float = DEFAULT_FD_STEP) -> np.ndarray:
    """H = Σ_i (I − P(x)) D_{v_i}[y ↦ P(y) e_i/√w](x) over the pseudo-frame v_i."""
    P = _projection_of(manifold)
    w = _weight_of(manifold)
    x = np.asarray(x, dtype=float)
    V = pseudo_frame(P, x, w)
    normal = np.eye(x.size) - np.asarray(P(x))
    H = np.zeros(x.size)
    for i, v in enumerate(V):
        H += projection_jvp(manifold, x, v, fd_step)[:, i] / np.sqrt(w)
    return normal @ H


def pseudo_frame_drift(manifold, x, fd_step: float = DEFAULT_FD_STEP) -> np.ndarray:
    """Stratonovich drift −½ Σ_i ∇_{v_i} v_i of the embedded Brownian SDE."""
    P = _projection_of(manifold)
    w = _weight_of(manifold)
    x = np.asarray(x, dtype=float)
    V = pseudo_frame(P, x, w)
    acc = np.zeros(x.size)
    for i, v in enumerate(V):
        acc += projection_jvp(manifold, x, v, fd_step)[:, i] / np.sqrt(w)
    return -0.5 * (np.asarray(P(x)) @ acc)


def laplace_beltrami_embedded(f, manifold, x, fd_step: float = DEFAULT_FD_STEP,
                              mean_curvature=None) -> float:
    """Δf = Σ_i Hess f̄(v_i, v_i) + H[f̄] for an ambient extension f̄ of f.

    ``mean_curvature`` may be a callable giving H analytically; otherwise it is
    computed numerically.
    """
    f = as_scalar_field(f)
    P = _projection_of(manifold)
    x = np.asarray(x, dtype=float)
    V = pseudo_frame(P, x, _weight_of(manifold))
    if mean_curvature is None:
        mean_curvature = getattr(manifold, "mean_curvature", None)
    H = mean_curvature(x) if mean_curvature is not None else mean_curvature_numeric(manifold, x, fd_step)
    total = sum(_second_along(f, x, v) for v in V)
    return float(total + scalar_gradient(f, x, fd_step) @ np.asarray(H))


# ---------------------------------------------------------------- group ops

def laplace_beltrami_group(f, g, basis, drift, exp=None,
                           fd_step: float = SECOND_FD_STEP) -> float:
    """Δf(g) = Σ_i d²/ds² f(g exp(s e_i)) + d/ds f(g exp(s J)) at s=0.

    ``basis`` is a sequence of k×k algebra matrices, ``drift`` the matrix of
    J = Σ ad*_{e_i} e_i and ``f`` acts on flattened k×k matrices.
    """
    if exp is None:
        from scipy.linalg import expm as exp
    f = as_scalar_field(f)
    g = np.asarray(g, dtype=float)
    k = g.shape[0]

    def along(A, s):
        return f.value((g @ exp(s * A)).reshape(k * k))

    f0 = f.value(g.reshape(k * k))
    h = fd_step
    total = 0.0
    for E in basis:
        total += (along(E, h) - 2.0 * f0 + along(E, -h)) / h**2
    J = np.asarray(drift, dtype=float)
    total += (along(J, h) - along(J, -h)) / (2.0 * h)
    return float(total)
