"""Statistical verification of the simulated processes.

Every check produces a ``VerificationReport`` holding the estimate series, the
theoretical series, standard errors and the tolerance actually applied.
Tolerances are always "k standard errors + explicit allowance"; both parts are
recorded in the report.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np

from . import geometry, kernels
from .catalog import CHART, EMBEDDED, GROUP, ManifoldDescriptor, Observable, make_manifold
from .errors import ConfigError, EnsembleError
from .sde import (ITO, STRATONOVICH, IntegratorConfig, SdeProblem, brownian_problem,
                  ensemble_statistics, resolve_scheme)

SCHEMA_VERSION = "1"

# per-manifold discretization allowance κ: |E_strat − E_ito| may exceed the
# statistical bound by κ·dt.  Both schemes are weak order 1, so κ is the size
# of the leading bias coefficient difference; 1 is ample for every entry.
ITO_STRAT_KAPPA = {
    "sphere2-chart": 1.0, "torus2-chart": 1.0, "torus2-group": 1.0, "hyperbolic-n": 1.0,
    "sphere-n": 1.0, "so3": 1.0, "aff-r": 1.0,
}


@dataclass
class VerificationReport:
    name: str
    params: dict
    times: list
    estimate: list
    target: list
    stderr: list
    tolerance: list
    verdict: bool = False
    max_deviation: float = float("nan")
    labels: list = field(default_factory=list)
    notes: list = field(default_factory=list)

    @classmethod
    def build(cls, name, params, times, estimate, target, stderr, tolerance, labels=None, notes=None):
        est = np.asarray(estimate, dtype=float).ravel()
        tgt = np.asarray(target, dtype=float).ravel()
        se = np.broadcast_to(np.asarray(stderr, dtype=float), est.shape).ravel()
        tol = np.broadcast_to(np.asarray(tolerance, dtype=float), est.shape).ravel()
        dev = np.abs(est - tgt)
        ok = bool(np.all(np.isfinite(dev)) and np.all(dev <= tol))
        return cls(name, dict(params), [float(t) for t in np.ravel(times)], est.tolist(), tgt.tolist(),
                   se.tolist(), tol.tolist(), ok, float(np.max(dev)) if dev.size else 0.0,
                   list(labels or []), list(notes or []))

    @property
    def passed(self) -> bool:
        return self.verdict

    def to_dict(self) -> dict:
        d = {"schema_version": SCHEMA_VERSION}
        d.update(asdict(self))
        d["verdict"] = "pass" if self.verdict else "fail"
        return d

    def summary_line(self) -> str:
        status = "PASS" if self.verdict else "FAIL"
        return f"{status} {self.name}: max deviation {self.max_deviation:.4g} (tolerance {min(self.tolerance, default=0):.4g}..{max(self.tolerance, default=0):.4g})"


@dataclass(frozen=True)
class GeneratorEstimate:
    value: float
    stderr: float
    n_paths: int


# ---------------------------------------------------------------- Laplacian routes

def half_laplacian(manifold: ManifoldDescriptor, f, p, route: Optional[str] = None) -> float:
    """½Δf(p) through the geometry of the manifold's primary structure.

    Routes: "chart" (frame formula with Christoffels), "embedded" (pseudo-frame
    Hessian plus mean curvature), "group" (second derivatives along
    exponential curves plus the J term).
    """
    f = geometry.as_scalar_field(f)
    if route is None:
        if manifold.projection is not None:
            route = EMBEDDED
        elif manifold.frame is not None:
            route = CHART
        else:
            route = GROUP
    p = np.asarray(p, dtype=float)
    if route == CHART:
        return 0.5 * geometry.laplace_beltrami(f, manifold.frame, manifold.christoffel, p)
    if route == EMBEDDED:
        return 0.5 * geometry.laplace_beltrami_embedded(f, manifold, p)
    if route == GROUP:
        if not manifold.group_size:
            raise ConfigError(f"{manifold.name} is not a matrix group")
        return 0.5 * geometry.laplace_beltrami_group(f, manifold.as_matrix(p), manifold.algebra.elements,
                                                     manifold.drift_matrix)
    raise ConfigError(f"unknown Laplacian route {route!r}")


# ---------------------------------------------------------------- generator

def generator_estimate(problem: SdeProblem, f: Observable, p, h: float = 1e-3, N: int = 200_000,
                       seed: int = 0, workers: int = 1, scheme: str = "auto") -> GeneratorEstimate:
    """(mean f(x_h) − f(p)) / h over N one-step paths started at p."""
    if N < 1000:
        raise ConfigError("generator_estimate needs N >= 1000")
    p = np.asarray(p, dtype=float)
    f0 = float(f(p))
    cfg = IntegratorConfig(dt=h, t_final=h, scheme=scheme, chunk_size=16384)
    stats = ensemble_statistics(problem, cfg, N, seed, lambda x: f(x) - f0, x0=p, workers=workers)
    return GeneratorEstimate(float(stats.mean[-1, 0]) / h, float(stats.stderr[-1, 0]) / h, stats.count)


def generator_check(manifold: ManifoldDescriptor, h: float = 1e-3, N: int = 200_000, seed: int = 11,
                    allowance: float = 0.02, k_se: float = 3.0, workers: int = 1,
                    formulation: str = STRATONOVICH) -> VerificationReport:
    """Generator estimate against ½Δf for every catalog observable and test point."""
    problem = brownian_problem(manifold, formulation)
    est, tgt, se, labels = [], [], [], []
    for j, p in enumerate(manifold.test_points):
        for ob in manifold.observables:
            g = generator_estimate(problem, ob, p, h, N, seed + 1000 * j, workers)
            est.append(g.value)
            se.append(g.stderr)
            tgt.append(half_laplacian(manifold, ob.as_scalar_field(), p))
            labels.append(f"{ob.name}@{np.round(p, 4).tolist()}")
    se = np.array(se)
    return VerificationReport.build(
        f"generator[{manifold.name}]",
        {"manifold": manifold.name, "params": dict(manifold.params), "h": h, "N": N, "seed": seed,
         "formulation": formulation, "scheme": resolve_scheme(problem, IntegratorConfig(dt=h, t_final=h)),
         "k_se": k_se, "allowance": allowance},
        np.zeros(len(est)), est, tgt, se, k_se * se + allowance, labels,
    )


# ---------------------------------------------------------------- SO(3) decay

def so3_mean_decay(N: int = 10_000, dt: float = 1e-3, T: float = 2.0, seed: int = 2024,
                   tol: float = 0.05, workers: int = 1) -> VerificationReport:
    """log‖E[R_t]‖_F against ½ log 3 − t for paths started at the identity."""
    m = make_manifold("so3")
    problem = brownian_problem(m, STRATONOVICH)
    cfg = IntegratorConfig(dt=dt, t_final=T)
    stats = ensemble_statistics(problem, cfg, N, seed, lambda x: x, workers=workers)
    M = stats.mean
    norm = np.sqrt(np.sum(M * M, axis=1))
    est = np.log(norm)
    target = 0.5 * math.log(3.0) - stats.times
    # delta method: δ log‖M‖ = (M : δM) / ‖M‖², entries treated as independent
    se = np.sqrt(np.sum(M * M * stats.var, axis=1) / max(stats.count, 1)) / norm**2
    return VerificationReport.build(
        "so3-decay", {"N": N, "dt": dt, "T": T, "seed": seed, "scheme": "group-exp", "tol": tol},
        stats.times, est, target, se, tol,
        notes=["M_t = sample mean of R_t; gate is max_t |log||M_t||_F - (log(3)/2 - t)|"],
    )


# ---------------------------------------------------------------- S^n decay

def _grid_config(dt, T, times):
    steps = [int(round(t / dt)) for t in times if t > 0]
    thin = math.gcd(*steps) if steps else 1
    return IntegratorConfig(dt=dt, t_final=T, thin=thin)


def sphere_eigen_decay(n: int = 2, N: int = 20_000, dt: float = 1e-3, T: float = 1.0, seed: int = 5,
                       times=(0.0, 0.25, 0.5, 1.0), allowance: float = 0.01, k_se: float = 3.0,
                       workers: int = 1) -> VerificationReport:
    """E[x_t · x₀] against e^{−nt/2} on Sⁿ from the north pole."""
    m = make_manifold("sphere-n", n=n)
    problem = brownian_problem(m, STRATONOVICH)
    times = [t for t in times if t <= T + 1e-12]
    cfg = _grid_config(dt, T, times)
    x0 = m.start
    stats = ensemble_statistics(problem, cfg, N, seed, lambda x: x @ x0, workers=workers)
    idx = [int(np.argmin(np.abs(stats.times - t))) for t in times]
    est = stats.mean[idx, 0]
    se = stats.stderr[idx, 0]
    target = np.exp(-0.5 * n * np.asarray(times))
    return VerificationReport.build(
        f"sphere-decay[n={n}]", {"n": n, "N": N, "dt": dt, "T": T, "seed": seed, "k_se": k_se,
                                 "allowance": allowance, "scheme": "heun", "retraction": True},
        times, est, target, se, k_se * se + allowance,
    )


# ---------------------------------------------------------------- hyperbolic

def hyperbolic_log_drift(n: int = 2, N: int = 20_000, dt: float = 1e-3, T: float = 1.0, seed: int = 3,
                         drift_rate: float = 0.5, k_se: float = 3.0, workers: int = 1,
                         formulation: str = ITO) -> VerificationReport:
    """Mean and variance of log x_n(T) from x(0) = (0, …, 0, 1).

    Targets: mean −drift_rate·T and variance T.  The default rate ½ is the
    d log x_n = dW_n − ½dt law; for Brownian motion on ℍⁿ the exact rate is
    (n−1)/2, which coincides with ½ only for n = 2.
    """
    m = make_manifold("hyperbolic-n", n=n)
    problem = brownian_problem(m, formulation)
    cfg = IntegratorConfig(dt=dt, t_final=T)
    stats = ensemble_statistics(problem, cfg, N, seed, lambda x: np.log(x[:, -1]), workers=workers)
    mean = float(stats.mean[-1, 0])
    var = float(stats.var[-1, 0])
    cnt = stats.count
    se_mean = math.sqrt(var / cnt)
    se_var = var * math.sqrt(2.0 / (cnt - 1))
    exact = -0.5 * (n - 1) * T
    return VerificationReport.build(
        f"hyperbolic-log-drift[n={n}]",
        {"n": n, "N": N, "dt": dt, "T": T, "seed": seed, "drift_rate": drift_rate, "k_se": k_se,
         "formulation": formulation},
        [T, T], [mean, var], [-drift_rate * T, T], [se_mean, se_var], [k_se * se_mean, k_se * se_var],
        labels=["mean log x_n", "var log x_n"],
        notes=[f"exact Brownian-motion mean is -(n-1)T/2 = {exact:g}"],
    )


# ---------------------------------------------------------------- torus stationary

def torus_bin_masses(R: float, r: float, bins: int) -> np.ndarray:
    """Exact bin probabilities of the density (R + r cos θ) / (2πR) on [0, 2π)."""
    edges = np.linspace(0.0, 2.0 * np.pi, bins + 1)
    F = R * edges + r * np.sin(edges)
    return np.diff(F) / (2.0 * np.pi * R)


def _theta_onehot(bins):
    def reduce(x):
        th = np.mod(x[:, 0], 2.0 * np.pi)
        b = np.minimum((th / (2.0 * np.pi) * bins).astype(np.int64), bins - 1)
        out = np.zeros((len(x), bins))
        out[np.arange(len(x)), b] = 1.0
        return out
    return reduce


def torus_stationary_test(R: float = 2.0, r: float = 1.0, N: int = 5000, T: float = 200.0, bins: int = 36,
                          seed: int = 17, dt: float = 1e-2, burn_in: float = 20.0, tol: float = 0.02,
                          drift: bool = True, workers: int = 1) -> VerificationReport:
    """Total-variation distance of the θ-histogram to the stationary law ∝ R + r cos θ.

    The histogram pools all stored states of all paths with t ≥ burn_in
    (ergodic averaging).  ``drift=False`` removes the Stratonovich drift, a
    negative control whose θ-law is uniform.
    """
    m = make_manifold("torus2-chart", R=R, r=r)
    problem = brownian_problem(m, STRATONOVICH)
    if not drift:
        from dataclasses import replace
        problem = replace(problem, drift=lambda x: np.zeros(np.shape(x)), label=problem.label + "/no-drift")
    cfg = IntegratorConfig(dt=dt, t_final=T)
    stats = ensemble_statistics(problem, cfg, N, seed, _theta_onehot(bins), workers=workers)
    use = stats.times >= burn_in
    hist = stats.mean[use].mean(axis=0)
    p = torus_bin_masses(R, r, bins)
    tv = 0.5 * float(np.sum(np.abs(hist - p)))
    centers = (np.arange(bins) + 0.5) * 2 * np.pi / bins
    return VerificationReport.build(
        "torus-stationary" + ("" if drift else "[no-drift]"),
        {"R": R, "r": r, "N": N, "T": T, "bins": bins, "seed": seed, "dt": dt, "burn_in": burn_in,
         "tol": tol, "drift": drift},
        [T], [tv], [0.0], [0.0], [tol], labels=["total variation"],
        notes=[f"pooled over {int(use.sum())} stored times x {stats.count} paths",
               "histogram: " + " ".join(f"{h:.4f}" for h in hist),
               "oracle:    " + " ".join(f"{q:.4f}" for q in p),
               "bin centers: " + " ".join(f"{c:.3f}" for c in centers)],
    )


def torus_single_chain_check(R: float = 2.0, r: float = 1.0, bins: int = 36, dt: float = 1e-2,
                             T: float = 1e5, burn_in: float = 100.0, seed: int = 23,
                             tol: float = 0.02) -> VerificationReport:
    """Independent check of the stationary oracle with one long fine-step chain."""
    n_steps = int(round(T / dt))
    counts = kernels.torus_chain_histogram(float(R), float(r), float(dt), n_steps, int(round(burn_in / dt)),
                                           int(seed), int(bins))
    hist = counts / counts.sum()
    tv = 0.5 * float(np.sum(np.abs(hist - torus_bin_masses(R, r, bins))))
    return VerificationReport.build(
        "torus-single-chain", {"R": R, "r": r, "bins": bins, "dt": dt, "T": T, "burn_in": burn_in,
                               "seed": seed, "kernel": kernels.BACKEND},
        [T], [tv], [0.0], [0.0], [tol], labels=["total variation"],
    )


# ---------------------------------------------------------------- Itô vs Stratonovich

def ito_strat_agreement(manifold: ManifoldDescriptor, f: Optional[Observable] = None, T: float = 0.5,
                        N: int = 20_000, seed: int = 9, dt: float = 1e-3, x0=None, backend=None,
                        k_se: float = 3.0, kappa: Optional[float] = None, workers: int = 1) -> VerificationReport:
    """|E_strat[f(x_T)] − E_ito[f(x_T)]| ≤ k·combined SE + κ·dt.

    Both runs share the seed (common random numbers).  Paths that fail in
    either run (chart singularities) are dropped from both, and the count is
    recorded.
    """
    f = f or manifold.observables[0]
    kappa = ITO_STRAT_KAPPA.get(manifold.name, 1.0) if kappa is None else kappa
    cfg = IntegratorConfig(dt=dt, t_final=T, thin=int(round(T / dt)) or 1)
    runs = {}
    for form in (STRATONOVICH, ITO):
        runs[form] = brownian_problem(manifold, form, backend)
    ids = np.arange(N, dtype=np.int64)
    excluded = {}
    for _ in range(3):
        stats = {}
        for form, prob in runs.items():
            stats[form] = ensemble_statistics(prob, cfg, N, seed, lambda x: f(x), x0=x0, workers=workers,
                                              on_error="collect", path_ids=ids)
        new = {**stats[STRATONOVICH].failures, **stats[ITO].failures}
        if not new:
            break
        excluded.update(new)
        ids = np.array([i for i in ids if int(i) not in excluded], dtype=np.int64)
    else:
        raise EnsembleError(excluded)
    s, i = stats[STRATONOVICH], stats[ITO]
    diff = float(s.mean[-1, 0] - i.mean[-1, 0])
    se = math.sqrt(float(s.stderr[-1, 0]) ** 2 + float(i.stderr[-1, 0]) ** 2)
    notes = []
    if excluded:
        notes.append(f"{len(excluded)} path(s) excluded after chart failures, e.g. "
                     + "; ".join(f"{k}: {v}" for k, v in list(excluded.items())[:3]))
    x0v = np.asarray(manifold.start if x0 is None else x0, dtype=float)
    if f.expectation is not None:
        notes.append(f"exact E[f(x_T)] = {float(f.expectation(T, x0v)):.6g}; strat {float(s.mean[-1, 0]):.6g}, "
                     f"ito {float(i.mean[-1, 0]):.6g}")
    return VerificationReport.build(
        f"ito-strat[{manifold.name}:{f.name}]",
        {"manifold": manifold.name, "params": dict(manifold.params), "observable": f.name, "T": T, "N": N,
         "seed": seed, "dt": dt, "k_se": k_se, "kappa": kappa, "excluded_paths": len(excluded),
         "backend": backend or manifold.backend},
        [T], [diff], [0.0], [se], [k_se * se + kappa * dt], labels=["E_strat - E_ito"], notes=notes,
    )


# ---------------------------------------------------------------- frame mixing

def random_orthogonal(n: int, seed: int = 0) -> np.ndarray:
    """Haar-distributed orthogonal matrix (QR of a Gaussian matrix with sign fix)."""
    A = np.random.default_rng(seed).normal(size=(n, n))
    Q, Rm = np.linalg.qr(A)
    return Q * np.sign(np.diag(Rm))


def frame_mixing_test(manifold: ManifoldDescriptor, f: Optional[Observable] = None, T: float = 0.5,
                      N: int = 20_000, seed: int = 31, dt: float = 1e-3, mixing=None, x0=None,
                      formulation: str = ITO, k_se: float = 3.0, workers: int = 1) -> VerificationReport:
    """E[f(x_T)] with frame F_i = Σ_j Q_ij E_j against the unmixed frame.

    The two runs use different seeds, so the combined standard error is the
    right scale for their difference.  Chart failures are dropped from each
    run and counted in the report.
    """
    f = f or manifold.observables[0]
    m_noise = brownian_problem(manifold, formulation).n_noise
    Q = random_orthogonal(m_noise, seed) if mixing is None else np.asarray(mixing, dtype=float)
    cfg = IntegratorConfig(dt=dt, t_final=T, thin=int(round(T / dt)) or 1)
    plain = ensemble_statistics(brownian_problem(manifold, formulation), cfg, N, seed, lambda x: f(x),
                                x0=x0, workers=workers, on_error="collect")
    mixed = ensemble_statistics(brownian_problem(manifold, formulation, mixing=Q), cfg, N, seed + 1,
                                lambda x: f(x), x0=x0, workers=workers, on_error="collect")
    diff = float(plain.mean[-1, 0] - mixed.mean[-1, 0])
    se = math.sqrt(float(plain.stderr[-1, 0]) ** 2 + float(mixed.stderr[-1, 0]) ** 2)
    return VerificationReport.build(
        f"frame-mixing[{manifold.name}:{f.name}]",
        {"manifold": manifold.name, "observable": f.name, "T": T, "N": N, "seed": seed, "dt": dt,
         "formulation": formulation, "k_se": k_se, "mixing": np.round(Q, 12).tolist()},
        [T], [diff], [0.0], [se], [k_se * se], labels=["E_plain - E_mixed"],
        notes=[f"failed paths: plain {len(plain.failures)}, mixed {len(mixed.failures)}"],
    )
