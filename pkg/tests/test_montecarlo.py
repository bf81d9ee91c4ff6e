import json

import numpy as np
import pytest

from manifold_brownian import montecarlo as mc
from manifold_brownian.catalog import Observable, make_manifold
from manifold_brownian.errors import ConfigError
from manifold_brownian.sde import brownian_problem


def test_report_verdict_rule():
    r = mc.VerificationReport.build("x", {}, [0, 1], [1.0, 2.0], [1.0, 2.5], [0.1, 0.1], 0.5)
    assert r.verdict and r.max_deviation == 0.5
    r = mc.VerificationReport.build("x", {}, [0], [np.nan], [1.0], [0.0], 1.0)
    assert not r.verdict
    d = r.to_dict()
    assert list(d)[0] == "schema_version" and d["verdict"] == "fail"
    json.dumps(d)


def test_generator_constant_function_is_zero():
    m = make_manifold("sphere-n")
    const = Observable("one", lambda x: np.ones(np.shape(x)[:-1]))
    g = mc.generator_estimate(brownian_problem(m), const, m.start, N=2000)
    assert g.value == 0.0 and g.stderr == 0.0


def test_generator_needs_enough_paths():
    m = make_manifold("sphere-n")
    with pytest.raises(ConfigError):
        mc.generator_estimate(brownian_problem(m), m.observables[0], m.start, N=10)


def test_generator_sphere_cos_theta():
    m = make_manifold("sphere2-chart")
    p = np.array([np.pi / 3, 0.0])
    g = mc.generator_estimate(brownian_problem(m), m.observable("cos_theta"), p, N=40_000, seed=1)
    assert abs(g.value + 0.5) <= 3 * g.stderr + 0.02


def test_generator_sphere_n_north_pole():
    # low-variance observable: the noise is tangent, so f(x_h) − f(x0) = O(h)
    m = make_manifold("sphere-n")
    g = mc.generator_estimate(brownian_problem(m), m.observable("x_dot_x0"), m.start, N=20_000, seed=2)
    assert abs(g.value + 1.0) <= 3 * g.stderr + 0.02 and g.stderr < 0.02


def test_half_laplacian_routes():
    m = make_manifold("aff-r")
    assert mc.half_laplacian(m, m.observable("log_a").as_scalar_field(), m.start) == pytest.approx(-1.0, abs=1e-6)
    with pytest.raises(ConfigError):
        mc.half_laplacian(m, m.observables[0], m.start, route="spectral")


def test_so3_decay_initial_value_and_negative_control():
    r = mc.so3_mean_decay(N=10, dt=0.5, T=2.0)
    assert r.estimate[0] == pytest.approx(0.5 * np.log(3.0), abs=1e-15)
    assert not r.verdict


def test_sphere_decay_small():
    r = mc.sphere_eigen_decay(2, N=4000, dt=1e-2, T=1.0, seed=3)
    assert r.estimate[0] == 1.0 and r.times == [0.0, 0.25, 0.5, 1.0]
    assert r.verdict


def test_hyperbolic_small_n2():
    r = mc.hyperbolic_log_drift(2, N=4000, dt=1e-2, T=1.0, seed=4)
    assert r.labels == ["mean log x_n", "var log x_n"]
    assert r.verdict


def test_hyperbolic_exact_rate_n3():
    # with the exact Brownian rate (n−1)/2 the n=3 mean is −1
    r = mc.hyperbolic_log_drift(3, N=4000, dt=1e-2, T=1.0, seed=4, drift_rate=1.0)
    assert r.verdict


def test_torus_bin_masses():
    p = mc.torus_bin_masses(2.0, 1.0, 36)
    assert p.sum() == pytest.approx(1.0, abs=1e-14)
    assert np.allclose(mc.torus_bin_masses(2.0, 1e-12, 8), 1 / 8)
    assert p[0] > p[17]


def test_torus_single_chain_small():
    r = mc.torus_single_chain_check(T=2e4, dt=1e-2, seed=5, tol=0.03)
    assert r.verdict


def test_ito_strat_constant_observable():
    m = make_manifold("torus2-chart")
    const = Observable("one", lambda x: np.ones(np.shape(x)[:-1]))
    r = mc.ito_strat_agreement(m, const, N=500, dt=1e-2)
    assert r.estimate == [0.0] and r.verdict


def test_ito_strat_sphere_excludes_failures():
    m = make_manifold("sphere2-chart")
    r = mc.ito_strat_agreement(m, m.observable("cos_theta"), x0=np.array([np.pi / 3, 0.0]), N=3000, dt=1e-2, seed=1)
    assert r.params["excluded_paths"] >= 0 and r.verdict


def test_frame_mixing_small():
    m = make_manifold("sphere-n", n=3)
    r = mc.frame_mixing_test(m, N=3000, dt=1e-2, seed=2)
    assert r.verdict
    Q = np.array(r.params["mixing"])
    assert np.allclose(Q @ Q.T, np.eye(4), atol=1e-10)
