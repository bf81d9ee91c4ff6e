"""SDE assembly and time stepping.

Problems are built from catalog descriptors in one of three backends:

* chart: state = chart coordinates, noise along the orthonormal frame E_i;
* embedded: state = ambient coordinates, noise along the pseudo-frame P(x)e_i;
* group: state = group element (flattened matrix, or chart coordinates for the
  torus), noise along left-invariant fields g e_i.

Itô problems on charts carry the *geometric* drift (zero for Brownian
motion).  Euler-Maruyama in coordinates then adds the Christoffel correction
−½ Σ_i Γ(σ_i, σ_i), which is what makes a covariant Itô equation a coordinate
Itô equation.  Ambient backends need no correction.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Callable, Optional

import numpy as np

from . import kernels
from .catalog import CHART, EMBEDDED, GROUP, ManifoldDescriptor
from .errors import ConfigError, ConstraintViolation, EnsembleError
from .lie import canonical_drift, structure_constants

ITO = "ito"
STRATONOVICH = "stratonovich"
FORMULATIONS = (ITO, STRATONOVICH)
SCHEMES = ("auto", "euler", "heun", "group-exp")
MAX_STORED = 1001
UINT64_MASK = (1 << 64) - 1


@dataclass(frozen=True)
class NoiseSource:
    """Counter-based standard normals keyed by (seed, path, step, sub, channel).

    The same key always produces the same number, whatever the evaluation
    order or thread layout.  ``sub`` = 0 is the main stream; sub-streams >= 1
    are used by step refinement.
    """

    seed: int

    def __post_init__(self):
        object.__setattr__(self, "seed", int(self.seed) & UINT64_MASK)

    def normals(self, path_ids, step: int, n_channels: int, sub: int = 0) -> np.ndarray:
        return kernels.normals(self.seed, np.asarray(path_ids, dtype=np.int64), int(step), int(sub), int(n_channels))

    def increments(self, path_ids, step: int, n_channels: int, dt: float, sub: int = 0) -> np.ndarray:
        return math.sqrt(dt) * self.normals(path_ids, step, n_channels, sub)


@dataclass(frozen=True)
class SdeProblem:
    """Drift and diffusion fields of a Brownian SDE on a manifold.

    ``drift(x)`` maps (N, d) states to (N, d); ``diffusion(x)`` returns
    (N, m, d) with row i the field σ_i.  ``algebra_drift`` is the coefficient
    vector of ½J used by exponential stepping on groups.
    """

    manifold: ManifoldDescriptor
    formulation: str
    backend: str
    drift: Callable
    diffusion: Callable
    n_noise: int
    algebra_drift: Optional[np.ndarray] = None
    mixing: Optional[np.ndarray] = None
    label: str = ""

    @property
    def state_dim(self) -> int:
        return self.manifold.state_dim

    def ito_correction(self, x) -> np.ndarray:
        """−½ Σ_i Γ(σ_i, σ_i) on chart backends, zero otherwise."""
        x = np.asarray(x, dtype=float)
        if self.backend != CHART:
            return np.zeros_like(x)
        G = self.manifold.christoffel(x)
        S = self.diffusion(x)
        return -0.5 * np.einsum("...kab,...ia,...ib->...k", G, S, S)

    def coordinate_drift(self, x) -> np.ndarray:
        """Drift of the equation in state coordinates (what Euler-Maruyama uses)."""
        if self.formulation != ITO:
            raise ConfigError("coordinate drift is defined for Itô problems")
        return self.drift(x) + self.ito_correction(x)


def _mix_rows(F, Q):
    """Rows σ_i = Σ_j Q_ij F_j for a stack of fields F (N, m, d)."""
    if Q is None:
        return F
    return np.einsum("ij,...jd->...id", Q, F)


def _check_mixing(Q, m):
    if Q is None:
        return None
    Q = np.array(Q, dtype=float)
    if Q.shape != (m, m) or np.max(np.abs(Q @ Q.T - np.eye(m))) > 1e-10:
        raise ConfigError(f"frame mixing must be an orthogonal {m}x{m} matrix")
    Q.setflags(write=False)
    return Q


def brownian_problem(manifold: ManifoldDescriptor, formulation: str = STRATONOVICH,
                     backend: Optional[str] = None, mixing=None) -> SdeProblem:
    """Brownian motion SDE on ``manifold``.

    ``mixing`` is an optional orthogonal matrix Q replacing the frame by
    F_i = Σ_j Q_ij E_j; the law of the process does not change.
    """
    if formulation not in FORMULATIONS:
        raise ConfigError(f"formulation must be one of {FORMULATIONS}, got {formulation!r}")
    backend = backend or manifold.backend
    if backend not in manifold.backends:
        raise ConfigError(f"{manifold.name} supports backends {manifold.backends}, not {backend!r}")
    ito = formulation == ITO
    m = manifold

    if backend == CHART:
        Q = _check_mixing(mixing, m.dim)

        def diffusion(x):
            return _mix_rows(np.swapaxes(m.frame(x), -1, -2), Q)

        if ito:
            def drift(x):
                return np.zeros(np.shape(x))
        else:
            drift = m.strat_drift
        return SdeProblem(m, formulation, backend, drift, diffusion, m.dim, mixing=Q,
                          label=f"{m.name}/{backend}/{formulation}")

    if backend == EMBEDDED:
        nbar = m.state_dim
        Q = _check_mixing(mixing, nbar)
        scale = 1.0 / math.sqrt(m.metric_weight)

        def diffusion(x):
            return _mix_rows(scale * m.projection(x), Q)

        if ito:
            def drift(x):
                return 0.5 * m.mean_curvature(x)
        else:
            drift = m.strat_drift
        return SdeProblem(m, formulation, backend, drift, diffusion, nbar, mixing=Q,
                          label=f"{m.name}/{backend}/{formulation}")

    # group backend
    Q = _check_mixing(mixing, m.dim)
    J = canonical_drift(structure_constants(m.algebra))
    half_J = 0.5 * J

    def diffusion(x):
        return _mix_rows(m.left_frame(x), Q)

    if m.group_size:
        k = m.group_size
        E = m.algebra.elements
        # ambient Itô drift g(½J + ½Σ e_i²); invariant under orthogonal mixing
        A_ito = m.algebra.from_coefficients(half_J) + 0.5 * sum(e @ e for e in E)
        A_strat = m.algebra.from_coefficients(half_J)
        A = A_ito if ito else A_strat

        def drift(x):
            g = np.asarray(x, dtype=float).reshape(np.shape(x)[:-1] + (k, k))
            return (g @ A).reshape(np.shape(x))
    else:
        # chart-coordinate group (torus): constant frame, no second-order term
        def drift(x):
            return np.einsum("i,...id->...d", half_J, m.left_frame(x))

    return SdeProblem(m, formulation, backend, drift, diffusion, m.dim, algebra_drift=half_J, mixing=Q,
                      label=f"{m.name}/{backend}/{formulation}")


def covariant_self_derivative(problem: SdeProblem, x, fd_step: float = 1e-5) -> np.ndarray:
    """Σ_i ∇_{σ_i} σ_i, batched, using the connection of the problem's backend.

    Charts use the Levi-Civita connection of the metric; ambient backends use
    the flat derivative of ℝ^n̄ in which the equation is posed.
    """
    x = np.asarray(x, dtype=float)
    S = problem.diffusion(x)
    acc = np.zeros_like(x)
    for i in range(problem.n_noise):
        v = S[..., i, :]
        plus = problem.diffusion(x + fd_step * v)[..., i, :]
        minus = problem.diffusion(x - fd_step * v)[..., i, :]
        acc += (plus - minus) / (2.0 * fd_step)
    if problem.backend == CHART:
        acc += np.einsum("...kab,...ia,...ib->...k", problem.manifold.christoffel(x), S, S)
    return acc


def ito_strat_convert(problem: SdeProblem, direction: str = "to_ito", fd_step: float = 1e-5) -> SdeProblem:
    """Shift the drift by ±½ Σ ∇_{σ_i} σ_i.

    ``direction`` is "to_ito" (Stratonovich → Itô, adds) or "to_stratonovich"
    (subtracts).  Converting back and forth reproduces the drift to rounding.
    """
    if direction == "to_ito":
        if problem.formulation != STRATONOVICH:
            raise ConfigError("to_ito needs a Stratonovich problem")
        sign, target = 0.5, ITO
    elif direction == "to_stratonovich":
        if problem.formulation != ITO:
            raise ConfigError("to_stratonovich needs an Itô problem")
        sign, target = -0.5, STRATONOVICH
    else:
        raise ConfigError(f"direction must be 'to_ito' or 'to_stratonovich', got {direction!r}")
    old = problem.drift

    def drift(x):
        return old(x) + sign * covariant_self_derivative(problem, x, fd_step)

    return replace(problem, formulation=target, drift=drift, label=f"{problem.label}->{target}")


# ---------------------------------------------------------------- stepping

def _apply_noise(S, dW):
    """Σ_i σ_i ΔW_i, accumulated channel by channel in a fixed order."""
    acc = S[:, 0, :] * dW[:, 0, None]
    for i in range(1, S.shape[1]):
        acc = acc + S[:, i, :] * dW[:, i, None]
    return acc


def _as_batch(x):
    x = np.asarray(x, dtype=float)
    return (x[None, :], True) if x.ndim == 1 else (x, False)


def _retract(problem, x, retract):
    if not retract:
        return x
    if problem.manifold.retraction is None:
        raise ConfigError(f"{problem.manifold.name} has no retraction")
    return problem.manifold.retraction(x)


def step_euler_maruyama(problem: SdeProblem, x, dt: float, dW, retract: bool = False) -> np.ndarray:
    """x + X̃ dt + Σ σ_i ΔW_i, optionally followed by the retraction."""
    if problem.formulation != ITO:
        raise ConfigError("Euler-Maruyama integrates Itô problems; convert first")
    xb, single = _as_batch(x)
    dWb = np.asarray(dW, dtype=float).reshape(xb.shape[0], problem.n_noise)
    out = xb + problem.coordinate_drift(xb) * dt + _apply_noise(problem.diffusion(xb), dWb)
    out = _retract(problem, out, retract)
    return out[0] if single else out


def step_heun_stratonovich(problem: SdeProblem, x, dt: float, dW, retract: bool = False) -> np.ndarray:
    """Trapezoidal predictor-corrector reusing the same ΔW."""
    if problem.formulation != STRATONOVICH:
        raise ConfigError("Heun integrates Stratonovich problems; convert first")
    xb, single = _as_batch(x)
    dWb = np.asarray(dW, dtype=float).reshape(xb.shape[0], problem.n_noise)
    a0 = problem.drift(xb)
    n0 = _apply_noise(problem.diffusion(xb), dWb)
    xp = xb + a0 * dt + n0
    a1 = problem.drift(xp)
    n1 = _apply_noise(problem.diffusion(xp), dWb)
    out = xb + 0.5 * (a0 + a1) * dt + 0.5 * (n0 + n1)
    out = _retract(problem, out, retract)
    return out[0] if single else out


def group_increment(problem: SdeProblem, dt: float, dW) -> np.ndarray:
    """Algebra coefficients ½J dt + Σ_i F_i ΔW_i of one exponential step."""
    dW = np.asarray(dW, dtype=float)
    if problem.mixing is not None:
        dW = dW @ problem.mixing
    return problem.algebra_drift * dt + dW


def step_group_exponential(problem: SdeProblem, g, dt: float, dW) -> np.ndarray:
    """g exp(½J dt + Σ e_i ΔW_i) with the closed-form exponential."""
    if problem.backend != GROUP or problem.algebra_drift is None:
        raise ConfigError("exponential stepping needs a group-backend problem")
    if problem.formulation != STRATONOVICH:
        raise ConfigError("exponential stepping realizes the Stratonovich group SDE")
    gb, single = _as_batch(g)
    dWb = np.asarray(dW, dtype=float).reshape(gb.shape[0], problem.n_noise)
    out = problem.manifold.right_exp(gb, group_increment(problem, dt, dWb))
    return out[0] if single else out


# ---------------------------------------------------------------- configuration

@dataclass(frozen=True)
class IntegratorConfig:
    dt: float = 1e-3
    t_final: float = 1.0
    scheme: str = "auto"
    thin: Optional[int] = None
    retraction: Optional[bool] = None
    chunk_size: int = 2048
    max_halvings: Optional[int] = None
    constraint_tol: Optional[float] = None

    def __post_init__(self):
        if not (math.isfinite(self.dt) and self.dt > 0):
            raise ConfigError(f"dt must be positive and finite, got {self.dt}")
        if not (math.isfinite(self.t_final) and self.t_final >= 0):
            raise ConfigError(f"t_final must be non-negative and finite, got {self.t_final}")
        if self.scheme not in SCHEMES:
            raise ConfigError(f"scheme must be one of {SCHEMES}, got {self.scheme!r}")
        if self.thin is not None and int(self.thin) < 1:
            raise ConfigError(f"thin must be >= 1, got {self.thin}")
        if int(self.chunk_size) < 1:
            raise ConfigError("chunk_size must be >= 1")
        n = self.t_final / self.dt
        if abs(n - round(n)) > 1e-6 * max(1.0, n):
            raise ConfigError(f"t_final={self.t_final} is not a whole number of steps of dt={self.dt}")

    @property
    def n_steps(self) -> int:
        return int(round(self.t_final / self.dt))

    @property
    def stride(self) -> int:
        if self.thin is not None:
            return int(self.thin)
        return max(1, math.ceil(self.n_steps / (MAX_STORED - 1)))

    def stored_steps(self) -> np.ndarray:
        steps = list(range(0, self.n_steps + 1, self.stride))
        if steps[-1] != self.n_steps:
            steps.append(self.n_steps)
        return np.array(steps, dtype=np.int64)


def resolve_scheme(problem: SdeProblem, config: IntegratorConfig) -> str:
    scheme = config.scheme
    if scheme == "auto":
        if problem.formulation == ITO:
            return "euler"
        if problem.backend == GROUP and problem.algebra_drift is not None:
            return "group-exp"
        return "heun"
    if scheme == "euler" and problem.formulation != ITO:
        raise ConfigError("scheme 'euler' needs the Itô formulation")
    if scheme == "heun" and problem.formulation != STRATONOVICH:
        raise ConfigError("scheme 'heun' needs the Stratonovich formulation")
    if scheme == "group-exp" and (problem.backend != GROUP or problem.formulation != STRATONOVICH
                                  or problem.algebra_drift is None):
        raise ConfigError("scheme 'group-exp' needs a Stratonovich group-backend problem")
    return scheme


def resolve_retraction(problem: SdeProblem, config: IntegratorConfig, scheme: str) -> bool:
    if config.retraction is not None:
        if config.retraction and problem.manifold.retraction is None:
            raise ConfigError(f"{problem.manifold.name} has no retraction")
        return bool(config.retraction)
    if scheme == "group-exp" or problem.manifold.retraction is None:
        return False
    return problem.backend in (EMBEDDED, GROUP)


# ---------------------------------------------------------------- results

@dataclass
class Trajectory:
    times: np.ndarray
    states: np.ndarray
    residuals: np.ndarray
    path_id: int = 0


@dataclass
class TrajectoryEnsemble:
    """Stored states (n_paths, n_times, d) of an ensemble on a shared time grid.

    Failed paths (see ``failures``) hold NaN from the failing step on.
    """

    times: np.ndarray
    steps: np.ndarray
    states: np.ndarray
    residuals: np.ndarray
    path_ids: np.ndarray
    seed: int
    scheme: str
    retraction: bool
    failures: dict = field(default_factory=dict)

    @property
    def n_paths(self) -> int:
        return self.states.shape[0]

    def trajectory(self, i: int) -> Trajectory:
        return Trajectory(self.times, self.states[i], self.residuals[i], int(self.path_ids[i]))

    @property
    def max_residual(self) -> float:
        r = self.residuals[np.isfinite(self.residuals)]
        return float(np.max(r)) if r.size else 0.0


@dataclass
class EnsembleStatistics:
    """Per stored time mean and (unbiased) variance of a reducer over paths."""

    times: np.ndarray
    steps: np.ndarray
    mean: np.ndarray
    var: np.ndarray
    count: int
    failures: dict = field(default_factory=dict)
    max_residual: float = 0.0

    @property
    def stderr(self) -> np.ndarray:
        return np.sqrt(self.var / max(self.count, 1))


# ---------------------------------------------------------------- engine

class _Runner:
    """Advances one chunk of paths and hands stored states to a sink."""

    def __init__(self, problem, config, seed, x0):
        self.problem = problem
        self.config = config
        self.noise = NoiseSource(seed)
        self.scheme = resolve_scheme(problem, config)
        self.retract = resolve_retraction(problem, config, self.scheme)
        m = problem.manifold
        self.max_halvings = m.halving_retries if config.max_halvings is None else int(config.max_halvings)
        x0 = np.asarray(m.start if x0 is None else x0, dtype=float)
        self.x0 = m.check_point(x0)
        self.fused_so3 = (self.scheme == "group-exp" and m.name == "so3" and problem.mixing is None)

    def step(self, x, dt, dW):
        if self.scheme == "euler":
            return step_euler_maruyama(self.problem, x, dt, dW, self.retract)
        if self.scheme == "heun":
            return step_heun_stratonovich(self.problem, x, dt, dW, self.retract)
        return step_group_exponential(self.problem, x, dt, dW)

    def refine(self, x, dW, dt, path, step, node, depth):
        """Redo a step as two half steps, splitting ΔW by a Brownian bridge."""
        m = self.problem.manifold
        if depth >= self.max_halvings:
            raise m.invalid_error(f"{m.invalid_message} after {depth} step halvings")
        z = self.noise.normals([path], step, self.problem.n_noise, sub=node)
        dW_a = 0.5 * dW + 0.5 * math.sqrt(dt) * z
        dW_b = dW - dW_a
        y = self.step(x, 0.5 * dt, dW_a)
        if not bool(m.valid(y)[0]):
            y = self.refine(x, dW_a, 0.5 * dt, path, step, 2 * node, depth + 1)
        y2 = self.step(y, 0.5 * dt, dW_b)
        if not bool(m.valid(y2)[0]):
            y2 = self.refine(y, dW_b, 0.5 * dt, path, step, 2 * node + 1, depth + 1)
        return y2

    def run(self, path_ids, sink):
        """Integrate ``path_ids``; ``sink(index, states, residuals, alive)`` per stored step."""
        cfg = self.config
        m = self.problem.manifold
        dt = cfg.dt
        path_ids = np.asarray(path_ids, dtype=np.int64)
        n = len(path_ids)
        x = np.tile(self.x0, (n, 1))
        alive = np.ones(n, dtype=bool)
        failures = {}
        stored = cfg.stored_steps()
        sink(0, x, m.residual(x), alive)
        done = 0
        for idx in range(1, len(stored)):
            target = int(stored[idx])
            if self.fused_so3 and not failures:
                kernels.so3_exp_walk(x, self.noise.seed, path_ids, done, target - done, dt, self.problem.algebra_drift)
                done = target
            while done < target:
                dW = self.noise.increments(path_ids, done, self.problem.n_noise, dt)
                new = self.step(x, dt, dW)
                bad = alive & ~m.valid(new)
                for r in np.flatnonzero(bad):
                    try:
                        if self.max_halvings <= 0:
                            raise m.invalid_error(f"{m.invalid_message} at step {done + 1}")
                        new[r] = self.refine(x[r:r + 1], dW[r:r + 1], dt, int(path_ids[r]), done, 1, 0)[0]
                    except Exception as exc:
                        failures[int(path_ids[r])] = f"{type(exc).__name__}: {exc}"
                        alive[r] = False
                x = np.where(alive[:, None], new, x)
                done += 1
            res = m.residual(x)
            if cfg.constraint_tol is not None:
                over = alive & (res > cfg.constraint_tol)
                for r in np.flatnonzero(over):
                    failures[int(path_ids[r])] = (f"ConstraintViolation: residual {res[r]:.3g} exceeds "
                                                  f"{cfg.constraint_tol:g} at step {done}")
                    alive[r] = False
            sink(idx, x, res, alive)
        return failures


def _chunks(path_ids, size):
    return [path_ids[i:i + size] for i in range(0, len(path_ids), size)]


def _map_chunks(fn, chunks, workers):
    if workers is None or workers <= 1 or len(chunks) <= 1:
        return [fn(c) for c in chunks]
    with ThreadPoolExecutor(max_workers=int(workers)) as pool:
        return list(pool.map(fn, chunks))


def _raise_or_attach(failures, result, on_error):
    if failures and on_error == "raise":
        raise EnsembleError(failures, partial=result)
    return result


def simulate_ensemble(problem: SdeProblem, config: IntegratorConfig, n_paths: int, seed: int,
                      x0=None, workers: int = 1, on_error: str = "raise",
                      path_ids=None) -> TrajectoryEnsemble:
    """Integrate ``n_paths`` independent paths (path ids 0..n_paths-1).

    The output depends only on (problem, config, seed, x0): chunks are fixed by
    ``config.chunk_size`` and merged by path index, so ``workers`` only changes
    the wall time.  Path failures raise ``EnsembleError`` (``on_error="raise"``)
    or are recorded in ``failures`` (``on_error="collect"``).
    """
    if on_error not in ("raise", "collect"):
        raise ConfigError("on_error must be 'raise' or 'collect'")
    if path_ids is None:
        if int(n_paths) < 1:
            raise ConfigError("n_paths must be >= 1")
        path_ids = np.arange(int(n_paths), dtype=np.int64)
    else:
        path_ids = np.asarray(path_ids, dtype=np.int64)
    runner = _Runner(problem, config, seed, x0)
    stored = config.stored_steps()
    K, d = len(stored), problem.state_dim

    def work(ids):
        states = np.empty((len(ids), K, d))
        resid = np.empty((len(ids), K))

        def sink(k, x, res, alive):
            states[:, k] = np.where(alive[:, None], x, np.nan)
            resid[:, k] = np.where(alive, res, np.nan)

        fails = runner.run(ids, sink)
        return states, resid, fails

    parts = _map_chunks(work, _chunks(path_ids, int(config.chunk_size)), workers)
    failures = {}
    for _, _, f in parts:
        failures.update(f)
    ens = TrajectoryEnsemble(
        times=stored * config.dt, steps=stored,
        states=np.concatenate([p[0] for p in parts]), residuals=np.concatenate([p[1] for p in parts]),
        path_ids=path_ids, seed=NoiseSource(seed).seed, scheme=runner.scheme, retraction=runner.retract,
        failures=dict(sorted(failures.items())),
    )
    return _raise_or_attach(failures, ens, on_error)


def simulate_path(problem: SdeProblem, x0, config: IntegratorConfig, seed: int, path_index: int = 0) -> Trajectory:
    """A single path; identical to path ``path_index`` of an ensemble with the same seed."""
    ens = simulate_ensemble(problem, config, 1, seed, x0=x0, on_error="collect", path_ids=[path_index])
    if ens.failures:
        raise EnsembleError(ens.failures, partial=ens)
    return ens.trajectory(0)


def _merge_moments(acc, n_b, mean_b, m2_b):
    """Chan et al. parallel update of (count, mean, M2)."""
    n_a, mean_a, m2_a = acc
    if n_b == 0:
        return acc
    if n_a == 0:
        return (n_b, mean_b, m2_b)
    n = n_a + n_b
    delta = mean_b - mean_a
    return (n, mean_a + delta * (n_b / n), m2_a + m2_b + delta * delta * (n_a * n_b / n))


def ensemble_statistics(problem: SdeProblem, config: IntegratorConfig, n_paths: int, seed: int,
                        reducer: Callable, x0=None, workers: int = 1, on_error: str = "raise",
                        path_ids=None) -> EnsembleStatistics:
    """Streaming mean/variance of ``reducer(states) -> (N, q)`` at every stored time.

    Nothing but the running moments is kept, so large ensembles fit in memory.
    Failed paths are excluded from all times: a chunk with failures is re-run
    without them (paths are independent, so survivors are unchanged).
    """
    if on_error not in ("raise", "collect"):
        raise ConfigError("on_error must be 'raise' or 'collect'")
    if path_ids is None:
        path_ids = np.arange(int(n_paths), dtype=np.int64)
    path_ids = np.asarray(path_ids, dtype=np.int64)
    runner = _Runner(problem, config, seed, x0)
    stored = config.stored_steps()
    K = len(stored)

    def one_pass(ids):
        sums = [None] * K
        max_res = [0.0]

        def sink(k, x, res, alive):
            vals = np.asarray(reducer(x), dtype=float).reshape(len(x), -1)
            mean = vals.mean(axis=0)
            sums[k] = (len(x), mean, ((vals - mean) ** 2).sum(axis=0))
            if np.any(np.isfinite(res)):
                max_res[0] = max(max_res[0], float(np.nanmax(res)))

        fails = runner.run(ids, sink)
        return sums, fails, max_res[0]

    def work(ids):
        sums, fails, mr = one_pass(ids)
        if fails:
            keep = np.array([i for i in ids if int(i) not in fails], dtype=np.int64)
            if len(keep) == 0:
                return [(0, 0.0, 0.0)] * K, fails, 0.0
            sums, more, mr = one_pass(keep)
            fails = {**fails, **more}
        return sums, fails, mr

    parts = _map_chunks(work, _chunks(path_ids, int(config.chunk_size)), workers)
    failures = {}
    max_res = 0.0
    acc = [(0, 0.0, 0.0)] * K
    for sums, fails, mr in parts:
        failures.update(fails)
        max_res = max(max_res, mr)
        acc = [_merge_moments(a, *s) for a, s in zip(acc, sums)]
    count = acc[0][0]
    mean = np.array([np.atleast_1d(a[1]) for a in acc])
    var = np.array([np.atleast_1d(a[2]) for a in acc]) / max(count - 1, 1)
    stats = EnsembleStatistics(stored * config.dt, stored, mean, var, count,
                               dict(sorted(failures.items())), max_res)
    return _raise_or_attach(failures, stats, on_error)


def constraint_violation(ensemble: TrajectoryEnsemble, tol: float):
    """Raise ConstraintViolation if any stored residual exceeds ``tol``."""
    worst = ensemble.max_residual
    if worst > tol:
        raise ConstraintViolation(f"max residual {worst:.3g} exceeds {tol:g}")
    return worst
