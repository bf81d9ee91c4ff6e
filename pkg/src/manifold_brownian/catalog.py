"""Built-in manifolds.

Each constructor returns an immutable ``ManifoldDescriptor`` whose component
functions accept a single point ``(d,)`` or a batch ``(N, d)``; leading axes
broadcast.  States are stored as flat vectors: chart coordinates, ambient
coordinates, or row-major flattened k×k matrices.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from types import MappingProxyType
from typing import Callable, Mapping, Optional

import numpy as np

from . import kernels
from .errors import ConfigError, DomainError, SingularityError
from .geometry import ChartDomain, ScalarField
from .lie import (LieAlgebraBasis, abelian_basis, aff_basis, canonical_drift, hat,
                  so3_basis, structure_constants)

CHART, EMBEDDED, GROUP = "chart", "embedded", "group"
SINGULAR_EPS = 1e-6
POINT_TOL = 1e-8


@dataclass(frozen=True)
class Observable:
    """A test function with analytic derivatives and, when known, E[f(x_t)].

    ``value`` accepts batches; ``gradient`` and ``hessian`` take one point and
    return coordinate (or ambient) derivatives.  ``expectation(t, x0)`` is the
    exact mean of f along Brownian motion started at x0.
    """

    name: str
    value: Callable
    gradient: Optional[Callable] = None
    hessian: Optional[Callable] = None
    expectation: Optional[Callable] = None
    provenance: str = ""

    def __call__(self, x):
        return self.value(x)

    def as_scalar_field(self) -> ScalarField:
        return ScalarField(self.value, self.gradient, self.hessian)


@dataclass(frozen=True)
class ManifoldDescriptor:
    name: str
    dim: int
    backend: str
    params: Mapping[str, float]
    state_dim: int
    start: np.ndarray
    backends: tuple = ()
    # chart components
    metric: Optional[Callable] = None
    christoffel: Optional[Callable] = None
    frame: Optional[Callable] = None
    strat_drift: Optional[Callable] = None
    domain: Optional[ChartDomain] = None
    to_ambient: Optional[Callable] = None
    # embedded components
    projection: Optional[Callable] = None
    mean_curvature: Optional[Callable] = None
    metric_weight: float = 1.0
    # group components
    algebra: Optional[LieAlgebraBasis] = None
    group_size: int = 0
    right_exp: Optional[Callable] = None
    left_frame: Optional[Callable] = None
    # simulation support
    retraction: Optional[Callable] = None
    residual: Callable = field(default=lambda x: np.zeros(np.shape(x)[:-1]))
    valid: Callable = field(default=lambda x: np.all(np.isfinite(x), axis=-1))
    invalid_error: type = DomainError
    invalid_message: str = "state left the valid region"
    halving_retries: int = 0
    observables: tuple = ()
    test_points: tuple = ()
    sampler: Optional[Callable] = None

    # -- helpers --------------------------------------------------------
    def check_point(self, x) -> np.ndarray:
        """Validate a single point, raising the manifold's domain error."""
        x = np.asarray(x, dtype=float)
        if x.shape != (self.state_dim,):
            raise DomainError(f"{self.name}: expected a point with {self.state_dim} entries, got shape {x.shape}")
        if self.domain is not None:
            self.domain.check(x)
        if not bool(self.valid(x)):
            raise self.invalid_error(f"{self.name}: {self.invalid_message} at {x.tolist()}")
        if float(self.residual(x)) > POINT_TOL:
            raise DomainError(f"{self.name}: point violates the manifold constraint (residual {float(self.residual(x)):.3g})")
        return x

    def observable(self, name: str) -> Observable:
        for ob in self.observables:
            if ob.name == name:
                return ob
        raise ConfigError(f"unknown observable {name!r} for {self.name}; valid: {[o.name for o in self.observables]}")

    def sample_points(self, rng, count: int) -> np.ndarray:
        return self.sampler(rng, count)

    @property
    def drift_matrix(self) -> Optional[np.ndarray]:
        """Matrix of the canonical drift J for matrix groups."""
        if self.algebra is None or self.group_size == 0:
            return None
        return self.algebra.from_coefficients(canonical_drift(structure_constants(self.algebra)))

    def as_matrix(self, x) -> np.ndarray:
        k = self.group_size or int(round(math.sqrt(self.state_dim)))
        return np.asarray(x, dtype=float).reshape(np.shape(x)[:-1] + (k, k))


def _zeros_like_pt(x, *tail):
    return np.zeros(np.shape(x)[:-1] + tail)


# ---------------------------------------------------------------- S^2 chart

def make_sphere2_chart() -> ManifoldDescriptor:
    """Unit 2-sphere in spherical coordinates (θ, φ)."""

    def metric(p):
        g = _zeros_like_pt(p, 2, 2)
        g[..., 0, 0] = 1.0
        g[..., 1, 1] = np.sin(p[..., 0]) ** 2
        return g

    def christoffel(p):
        s, c = np.sin(p[..., 0]), np.cos(p[..., 0])
        G = _zeros_like_pt(p, 2, 2, 2)
        G[..., 0, 1, 1] = -s * c
        G[..., 1, 0, 1] = G[..., 1, 1, 0] = c / s
        return G

    def frame(p):
        F = _zeros_like_pt(p, 2, 2)
        F[..., 0, 0] = 1.0
        F[..., 1, 1] = 1.0 / np.sin(p[..., 0])
        return F

    def drift(p):
        out = _zeros_like_pt(p, 2)
        out[..., 0] = 0.5 / np.tan(p[..., 0])
        return out

    def to_ambient(p):
        th, ph = p[..., 0], p[..., 1]
        return np.stack([np.sin(th) * np.cos(ph), np.sin(th) * np.sin(ph), np.cos(th)], axis=-1)

    def sampler(rng, count):
        return np.stack([rng.uniform(0.1, np.pi - 0.1, count), rng.uniform(-np.pi, np.pi, count)], axis=-1)

    observables = (
        Observable(
            "cos_theta",
            lambda p: np.cos(p[..., 0]),
            lambda p: np.array([-np.sin(p[0]), 0.0]),
            lambda p: np.array([[-np.cos(p[0]), 0.0], [0.0, 0.0]]),
            lambda t, p0: np.exp(-t) * np.cos(p0[0]),
            "first spherical harmonic, eigenvalue -2",
        ),
        Observable(
            "x_coord",
            lambda p: np.sin(p[..., 0]) * np.cos(p[..., 1]),
            lambda p: np.array([np.cos(p[0]) * np.cos(p[1]), -np.sin(p[0]) * np.sin(p[1])]),
            lambda p: np.array([
                [-np.sin(p[0]) * np.cos(p[1]), -np.cos(p[0]) * np.sin(p[1])],
                [-np.cos(p[0]) * np.sin(p[1]), -np.sin(p[0]) * np.cos(p[1])],
            ]),
            lambda t, p0: np.exp(-t) * np.sin(p0[0]) * np.cos(p0[1]),
            "first spherical harmonic, eigenvalue -2",
        ),
        Observable(
            "cos2_theta",
            lambda p: np.cos(p[..., 0]) ** 2,
            lambda p: np.array([-np.sin(2.0 * p[0]), 0.0]),
            lambda p: np.array([[-2.0 * np.cos(2.0 * p[0]), 0.0], [0.0, 0.0]]),
            lambda t, p0: 1.0 / 3.0 + np.exp(-3.0 * t) * (np.cos(p0[0]) ** 2 - 1.0 / 3.0),
            "second harmonic cos^2 - 1/3, eigenvalue -6",
        ),
    )
    return ManifoldDescriptor(
        name="sphere2-chart", dim=2, backend=CHART, params=MappingProxyType({}), state_dim=2,
        start=np.array([np.pi / 2, 0.0]), backends=(CHART,),
        metric=metric, christoffel=christoffel, frame=frame, strat_drift=drift,
        domain=ChartDomain((SINGULAR_EPS, -np.inf), (np.pi - SINGULAR_EPS, np.inf), SingularityError,
                           "sphere2 chart (sin theta >= 1e-6)"),
        to_ambient=to_ambient,
        valid=lambda p: np.all(np.isfinite(p), axis=-1) & (p[..., 0] >= SINGULAR_EPS) & (p[..., 0] <= np.pi - SINGULAR_EPS),
        invalid_error=SingularityError, invalid_message="entered a polar cap of the spherical chart",
        observables=observables,
        test_points=(np.array([np.pi / 3, 0.0]), np.array([np.pi / 2, 0.5]), np.array([2 * np.pi / 3, 1.0])),
        sampler=sampler,
    )


# ---------------------------------------------------------------- torus

def _torus_params(R, r):
    R, r = float(R), float(r)
    if not (R > r > 0):
        raise ConfigError(f"torus requires R > r > 0, got R={R}, r={r}")
    return R, r


def _torus_observables():
    """cos θ, cos φ and their product."""
    return (
        Observable(
            "cos_theta", lambda p: np.cos(p[..., 0]),
            lambda p: np.array([-np.sin(p[0]), 0.0]),
            lambda p: np.array([[-np.cos(p[0]), 0.0], [0.0, 0.0]]),
        ),
        Observable(
            "cos_phi", lambda p: np.cos(p[..., 1]),
            lambda p: np.array([0.0, -np.sin(p[1])]),
            lambda p: np.array([[0.0, 0.0], [0.0, -np.cos(p[1])]]),
        ),
        Observable(
            "cos_theta_cos_phi", lambda p: np.cos(p[..., 0]) * np.cos(p[..., 1]),
            lambda p: np.array([-np.sin(p[0]) * np.cos(p[1]), -np.cos(p[0]) * np.sin(p[1])]),
            lambda p: np.array([
                [-np.cos(p[0]) * np.cos(p[1]), np.sin(p[0]) * np.sin(p[1])],
                [np.sin(p[0]) * np.sin(p[1]), -np.cos(p[0]) * np.cos(p[1])],
            ]),
        ),
    )


def _torus_sampler(rng, count):
    return rng.uniform(-np.pi, np.pi, (count, 2))


_TORUS_POINTS = (np.array([0.0, 0.0]), np.array([np.pi / 2, 1.0]), np.array([2.5, -1.0]))


def make_torus2_chart(R: float = 2.0, r: float = 1.0) -> ManifoldDescriptor:
    """Torus of revolution with the induced metric, coordinates (θ, φ)."""
    R, r = _torus_params(R, r)

    def rho(th):
        return R + r * np.cos(th)

    def metric(p):
        g = _zeros_like_pt(p, 2, 2)
        g[..., 0, 0] = r * r
        g[..., 1, 1] = rho(p[..., 0]) ** 2
        return g

    def christoffel(p):
        th = p[..., 0]
        G = _zeros_like_pt(p, 2, 2, 2)
        G[..., 0, 1, 1] = rho(th) * np.sin(th) / r
        G[..., 1, 0, 1] = G[..., 1, 1, 0] = -r * np.sin(th) / rho(th)
        return G

    def frame(p):
        F = _zeros_like_pt(p, 2, 2)
        F[..., 0, 0] = 1.0 / r
        F[..., 1, 1] = 1.0 / rho(p[..., 0])
        return F

    def drift(p):
        th = p[..., 0]
        out = _zeros_like_pt(p, 2)
        out[..., 0] = -np.sin(th) / (2.0 * r * rho(th))
        return out

    def to_ambient(p):
        th, ph = p[..., 0], p[..., 1]
        return np.stack([rho(th) * np.cos(ph), rho(th) * np.sin(ph), r * np.sin(th)], axis=-1)

    return ManifoldDescriptor(
        name="torus2-chart", dim=2, backend=CHART, params=MappingProxyType({"R": R, "r": r}), state_dim=2,
        start=np.array([0.0, 0.0]), backends=(CHART,),
        metric=metric, christoffel=christoffel, frame=frame, strat_drift=drift,
        domain=ChartDomain((-np.inf, -np.inf), (np.inf, np.inf), DomainError, "torus chart"),
        to_ambient=to_ambient,
        observables=_torus_observables(), test_points=_TORUS_POINTS, sampler=_torus_sampler,
    )


def make_torus2_group(R: float = 2.0, r: float = 1.0) -> ManifoldDescriptor:
    """Torus as the abelian group S¹×S¹ with the left-invariant metric diag(r², (R+r)²)."""
    R, r = _torus_params(R, r)
    scale = np.array([1.0 / r, 1.0 / (R + r)])

    def metric(p):
        g = _zeros_like_pt(p, 2, 2)
        g[..., 0, 0] = r * r
        g[..., 1, 1] = (R + r) ** 2
        return g

    def frame(p):
        F = _zeros_like_pt(p, 2, 2)
        F[..., 0, 0], F[..., 1, 1] = scale
        return F

    def left_frame(x):
        E = _zeros_like_pt(x, 2, 2)
        E[..., 0, 0], E[..., 1, 1] = scale
        return E

    return ManifoldDescriptor(
        name="torus2-group", dim=2, backend=GROUP, params=MappingProxyType({"R": R, "r": r}), state_dim=2,
        start=np.array([0.0, 0.0]), backends=(GROUP, CHART),
        metric=metric, christoffel=lambda p: _zeros_like_pt(p, 2, 2, 2), frame=frame,
        strat_drift=lambda p: _zeros_like_pt(p, 2),
        domain=ChartDomain((-np.inf, -np.inf), (np.inf, np.inf), DomainError, "torus group chart"),
        algebra=abelian_basis(2), right_exp=lambda x, c: x + np.asarray(c) * scale, left_frame=left_frame,
        observables=_torus_observables(), test_points=_TORUS_POINTS, sampler=_torus_sampler,
    )


# ---------------------------------------------------------------- hyperbolic

def make_hyperbolic_upper_half(n: int = 2) -> ManifoldDescriptor:
    """Upper half-space model of ℍⁿ, metric I / x_n²."""
    if int(n) != n or n < 2:
        raise ConfigError(f"hyperbolic space needs an integer n >= 2, got {n}")
    n = int(n)
    last = n - 1

    def metric(p):
        return np.eye(n) / p[..., last, None, None] ** 2

    def christoffel(p):
        inv = 1.0 / p[..., last]
        G = _zeros_like_pt(p, n, n, n)
        for i in range(last):
            G[..., i, i, last] = G[..., i, last, i] = -inv
            G[..., last, i, i] = inv
        G[..., last, last, last] = -inv
        return G

    def frame(p):
        return np.eye(n) * p[..., last, None, None]

    def drift(p):
        out = _zeros_like_pt(p, n)
        out[..., last] = -0.5 * (n - 1) * p[..., last]
        return out

    def e(i):
        v = np.zeros(n)
        v[i] = 1.0
        return v

    def hess_log(p):
        H = np.zeros((n, n))
        H[last, last] = -1.0 / p[last] ** 2
        return H

    def hess_x1xn(p):
        H = np.zeros((n, n))
        H[0, last] = H[last, 0] = 1.0
        return H

    observables = (
        Observable("log_xn", lambda p: np.log(p[..., last]), lambda p: e(last) / p[last], hess_log,
                   lambda t, p0: np.log(p0[last]) - 0.5 * (n - 1) * t,
                   "Laplacian of log x_n is the constant -(n-1)"),
        Observable("x1", lambda p: p[..., 0], lambda p: e(0), lambda p: np.zeros((n, n)),
                   lambda t, p0: p0[0], "x_1 is harmonic"),
        Observable("x1_xn", lambda p: p[..., 0] * p[..., last],
                   lambda p: p[last] * e(0) + p[0] * e(last), hess_x1xn),
    )

    def pt(*vals):
        v = np.zeros(n)
        v[0] = vals[0]
        v[last] = vals[1]
        return v

    def sampler(rng, count):
        x = rng.uniform(-2.0, 2.0, (count, n))
        x[:, last] = rng.uniform(0.2, 3.0, count)
        return x

    tiny = np.nextafter(0.0, 1.0)
    return ManifoldDescriptor(
        name="hyperbolic-n", dim=n, backend=CHART, params=MappingProxyType({"n": n}), state_dim=n,
        start=pt(0.0, 1.0), backends=(CHART,),
        metric=metric, christoffel=christoffel, frame=frame, strat_drift=drift,
        domain=ChartDomain((-np.inf,) * last + (tiny,), (np.inf,) * n, DomainError, "upper half-space (x_n > 0)"),
        valid=lambda p: np.all(np.isfinite(p), axis=-1) & (p[..., last] > 0.0),
        invalid_message="x_n <= 0 left the upper half-space",
        halving_retries=20,
        observables=observables,
        test_points=(pt(0.0, 1.0), pt(0.5, 2.0), pt(-1.0, 0.5)),
        sampler=sampler,
    )


# ---------------------------------------------------------------- sphere S^n

def make_sphereN_embedded(n: int = 2) -> ManifoldDescriptor:
    """Unit sphere Sⁿ ⊂ ℝⁿ⁺¹ with projection I − xxᵀ."""
    if int(n) != n or n < 1:
        raise ConfigError(f"sphere dimension must be an integer >= 1, got {n}")
    n = int(n)
    nbar = n + 1
    if nbar < 3:
        raise ConfigError("sphere-n observables need n >= 2")

    def projection(x):
        x = np.asarray(x, dtype=float)
        return np.eye(nbar) - x[..., :, None] * x[..., None, :]

    def normalize(x):
        return x / np.linalg.norm(x, axis=-1, keepdims=True)

    def e(i):
        v = np.zeros(nbar)
        v[i] = 1.0
        return v

    def hess_pair(i, j):
        H = np.zeros((nbar, nbar))
        H[i, j] += 1.0
        H[j, i] += 1.0
        return H

    top = nbar - 1
    observables = (
        Observable("x_dot_x0", lambda x: x[..., top], lambda x: e(top), lambda x: np.zeros((nbar, nbar)),
                   lambda t, x0: np.exp(-0.5 * n * t) * x0[top],
                   "coordinate functions have eigenvalue -n; x0 is the north pole"),
        Observable("x1_x2", lambda x: x[..., 0] * x[..., 1], lambda x: x[1] * e(0) + x[0] * e(1),
                   lambda x: hess_pair(0, 1), lambda t, x0: np.exp(-(n + 1) * t) * x0[0] * x0[1],
                   "degree-2 harmonic, eigenvalue -2(n+1)"),
        Observable("x1_sq", lambda x: x[..., 0] ** 2, lambda x: 2.0 * x[0] * e(0),
                   lambda x: hess_pair(0, 0),
                   lambda t, x0: 1.0 / nbar + np.exp(-(n + 1) * t) * (x0[0] ** 2 - 1.0 / nbar),
                   "x_1^2 - 1/(n+1) is a degree-2 harmonic"),
    )

    pts = [e(top), normalize(np.ones(nbar)), normalize(np.resize(np.array([0.3, -0.5, 0.8]), nbar))]
    return ManifoldDescriptor(
        name="sphere-n", dim=n, backend=EMBEDDED, params=MappingProxyType({"n": n}), state_dim=nbar,
        start=e(top), backends=(EMBEDDED,),
        projection=projection, mean_curvature=lambda x: -n * np.asarray(x, dtype=float), metric_weight=1.0,
        strat_drift=lambda x: _zeros_like_pt(x, nbar),
        retraction=normalize,
        residual=lambda x: np.abs(np.sum(np.asarray(x) ** 2, axis=-1) - 1.0),
        valid=lambda x: np.all(np.isfinite(x), axis=-1) & (np.sum(np.asarray(x) ** 2, axis=-1) > 0.0),
        invalid_message="norm collapsed to zero",
        observables=observables, test_points=tuple(pts),
        sampler=lambda rng, count: normalize(rng.normal(size=(count, nbar))),
    )


# ---------------------------------------------------------------- SO(3)

def so3_projection(R):
    """P(R) as a 9×9 matrix acting on row-major flattened 3×3 matrices.

    P(R)A = ½(A − R Aᵀ R), so P[(i,j),(a,b)] = ½(δ_ia δ_jb − R_ib R_aj).
    """
    M = np.asarray(R, dtype=float).reshape(np.shape(R)[:-1] + (3, 3))
    P = 0.5 * np.eye(9) - 0.5 * np.einsum("...ib,...aj->...ijab", M, M).reshape(M.shape[:-2] + (9, 9))
    return P


def polar_factor(x):
    """Nearest rotation (orthogonal polar factor) of flattened 3×3 matrices."""
    return kernels.so3_polar(np.asarray(x, dtype=float).reshape(-1, 9)).reshape(np.shape(x))


def so3_residual(x):
    """‖RᵀR − I‖_F."""
    r = kernels.so3_residual(np.asarray(x, dtype=float).reshape(-1, 9))
    return r.reshape(np.shape(x)[:-1])


def so3_exp(w) -> np.ndarray:
    """exp(hat(w)) by the Rodrigues formula."""
    w = np.asarray(w, dtype=float)
    eye = np.broadcast_to(np.eye(3).reshape(9), w.shape[:-1] + (9,))
    return kernels.so3_right_exp(eye.reshape(-1, 9), w.reshape(-1, 3)).reshape(w.shape[:-1] + (3, 3))


def make_so3_embedded() -> ManifoldDescriptor:
    """SO(3) ⊂ ℝ³ˣ³ with the ½-trace metric; both embedded and group structure."""
    basis = so3_basis()
    E = basis.elements

    def right_exp(x, c):
        return kernels.so3_right_exp(np.asarray(x).reshape(-1, 9), np.asarray(c).reshape(-1, 3)).reshape(np.shape(x))

    def left_frame(x):
        M = np.asarray(x, dtype=float).reshape(np.shape(x)[:-1] + (3, 3))
        return np.stack([(M @ E[i]).reshape(np.shape(x)) for i in range(3)], axis=-2)

    def e9(i, j):
        v = np.zeros(9)
        v[3 * i + j] = 1.0
        return v

    def hess_sq(x):
        H = np.zeros((9, 9))
        H[0, 0] = 2.0
        return H

    observables = (
        Observable("R00", lambda x: x[..., 0], lambda x: e9(0, 0), lambda x: np.zeros((9, 9)),
                   lambda t, x0: np.exp(-t) * x0[0], "matrix entries satisfy (1/2) Lap R = -R"),
        Observable("R12", lambda x: x[..., 5], lambda x: e9(1, 2), lambda x: np.zeros((9, 9)),
                   lambda t, x0: np.exp(-t) * x0[5], "matrix entries satisfy (1/2) Lap R = -R"),
        Observable("R00_sq", lambda x: x[..., 0] ** 2, lambda x: 2.0 * x[0] * e9(0, 0), hess_sq),
    )
    pts = (np.eye(3).reshape(9), so3_exp(np.array([0.3, -0.2, 0.5])).reshape(9),
           so3_exp(np.array([1.0, 2.0, -0.5])).reshape(9))

    def valid(x):
        return np.all(np.isfinite(x), axis=-1)

    return ManifoldDescriptor(
        name="so3", dim=3, backend=GROUP, params=MappingProxyType({}), state_dim=9,
        start=np.eye(3).reshape(9), backends=(GROUP, EMBEDDED),
        projection=so3_projection, mean_curvature=lambda x: -2.0 * np.asarray(x, dtype=float), metric_weight=0.5,
        strat_drift=lambda x: _zeros_like_pt(x, 9),
        algebra=basis, group_size=3, right_exp=right_exp, left_frame=left_frame,
        retraction=polar_factor, residual=so3_residual, valid=valid,
        invalid_message="non-finite rotation",
        observables=observables, test_points=pts,
        sampler=lambda rng, count: so3_exp(rng.normal(size=(count, 3))).reshape(count, 9),
    )


# ---------------------------------------------------------------- Aff(R)

def aff_exp(c) -> np.ndarray:
    """exp of the algebra element c₁e₁ + c₂e₂ as a 2×2 matrix."""
    c = np.asarray(c, dtype=float)
    u = np.sqrt(2.0) * c[..., 0]
    v = np.sqrt(2.0) * c[..., 1]
    out = np.zeros(c.shape[:-1] + (2, 2))
    out[..., 0, 0] = np.exp(u)
    out[..., 0, 1] = v * _expm1_over(u)
    out[..., 1, 1] = 1.0
    return out


def _expm1_over(u):
    u = np.asarray(u, dtype=float)
    safe = np.where(u == 0.0, 1.0, u)
    return np.where(u == 0.0, 1.0, np.expm1(safe) / safe)


def make_affR_group() -> ManifoldDescriptor:
    """Affine group of the line, g = [[a, b], [0, 1]] with a > 0."""
    basis = aff_basis()
    s2 = np.sqrt(2.0)

    def right_exp(x, c):
        x = np.asarray(x, dtype=float)
        c = np.asarray(c, dtype=float)
        u = s2 * c[..., 0]
        v = s2 * c[..., 1]
        out = np.array(x, copy=True)
        a = x[..., 0]
        out[..., 0] = a * np.exp(u)
        out[..., 1] = x[..., 1] + a * v * _expm1_over(u)
        return out

    def left_frame(x):
        E = _zeros_like_pt(x, 2, 4)
        E[..., 0, 0] = s2 * x[..., 0]
        E[..., 1, 1] = s2 * x[..., 0]
        return E

    def retract(x):
        out = np.array(x, dtype=float, copy=True)
        out[..., 2] = 0.0
        out[..., 3] = 1.0
        return out

    def e4(i):
        v = np.zeros(4)
        v[i] = 1.0
        return v

    def hess_log(x):
        H = np.zeros((4, 4))
        H[0, 0] = -1.0 / x[0] ** 2
        return H

    def hess_sq(x):
        H = np.zeros((4, 4))
        H[0, 0] = 2.0
        return H

    observables = (
        Observable("log_a", lambda x: np.log(x[..., 0]), lambda x: e4(0) / x[0], hess_log,
                   lambda t, x0: np.log(x0[0]) - t, "d log a = -dt + sqrt(2) dW_1"),
        Observable("a_sq", lambda x: x[..., 0] ** 2, lambda x: 2.0 * x[0] * e4(0), hess_sq,
                   lambda t, x0: x0[0] ** 2 * np.exp(2.0 * t), "a is a martingale with d<a> = 2a^2 dt"),
        Observable("b", lambda x: x[..., 1], lambda x: e4(1), lambda x: np.zeros((4, 4)),
                   lambda t, x0: x0[1], "b is a martingale"),
    )

    def sampler(rng, count):
        x = np.zeros((count, 4))
        x[:, 0] = np.exp(rng.normal(size=count) * 0.7)
        x[:, 1] = rng.normal(size=count)
        x[:, 3] = 1.0
        return x

    return ManifoldDescriptor(
        name="aff-r", dim=2, backend=GROUP, params=MappingProxyType({}), state_dim=4,
        start=np.array([1.0, 0.0, 0.0, 1.0]), backends=(GROUP,),
        metric_weight=0.5, algebra=basis, group_size=2, right_exp=right_exp, left_frame=left_frame,
        retraction=retract,
        residual=lambda x: np.abs(np.asarray(x)[..., 2]) + np.abs(np.asarray(x)[..., 3] - 1.0),
        valid=lambda x: np.all(np.isfinite(x), axis=-1) & (np.asarray(x)[..., 0] > 0.0),
        invalid_message="a <= 0 left the affine group",
        observables=observables,
        test_points=(np.array([1.0, 0.0, 0.0, 1.0]), np.array([2.0, -1.0, 0.0, 1.0]), np.array([0.5, 0.3, 0.0, 1.0])),
        sampler=sampler,
    )


# ---------------------------------------------------------------- registry

CATALOG = {
    "sphere2-chart": (make_sphere2_chart, {}, "unit 2-sphere, spherical coordinates"),
    "torus2-chart": (make_torus2_chart, {"R": 2.0, "r": 1.0}, "torus of revolution, induced metric"),
    "torus2-group": (make_torus2_group, {"R": 2.0, "r": 1.0}, "torus as abelian Lie group"),
    "hyperbolic-n": (make_hyperbolic_upper_half, {"n": 2}, "hyperbolic upper half-space"),
    "sphere-n": (make_sphereN_embedded, {"n": 2}, "unit n-sphere embedded in R^(n+1)"),
    "so3": (make_so3_embedded, {}, "rotation group, embedded in R^(3x3)"),
    "aff-r": (make_affR_group, {}, "affine group of the real line"),
}


def make_manifold(name: str, **params) -> ManifoldDescriptor:
    """Construct a catalog manifold by name, with optional parameter overrides."""
    if name not in CATALOG:
        raise ConfigError(f"unknown manifold {name!r}; valid: {', '.join(CATALOG)}")
    ctor, defaults, _ = CATALOG[name]
    unknown = set(params) - set(defaults)
    if unknown:
        raise ConfigError(f"{name} has no parameter(s) {sorted(unknown)}; valid: {sorted(defaults) or 'none'}")
    merged = {**defaults, **params}
    if "n" in merged:
        n = merged["n"]
        if float(n) != int(float(n)):
            raise ConfigError(f"parameter n must be an integer, got {n}")
        merged["n"] = int(float(n))
    return ctor(**merged)


def catalog_entries():
    """(name, dim, backends, default params, description) for every catalog manifold."""
    rows = []
    for name, (_, defaults, desc) in CATALOG.items():
        m = make_manifold(name)
        rows.append((name, m.dim, m.backends, dict(defaults), desc))
    return rows
