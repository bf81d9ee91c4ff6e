import numpy as np
import pytest

from manifold_brownian.catalog import CATALOG, make_manifold
from manifold_brownian.errors import ConfigError, EnsembleError, SingularityError
from manifold_brownian.sde import (ITO, STRATONOVICH, IntegratorConfig, NoiseSource, brownian_problem,
                                   covariant_self_derivative, ensemble_statistics, ito_strat_convert,
                                   resolve_retraction, resolve_scheme, simulate_ensemble, simulate_path,
                                   step_euler_maruyama, step_group_exponential, step_heun_stratonovich)


def test_config_validation():
    with pytest.raises(ConfigError):
        IntegratorConfig(dt=0.0)
    with pytest.raises(ConfigError):
        IntegratorConfig(dt=0.3, t_final=1.0)
    with pytest.raises(ConfigError):
        IntegratorConfig(scheme="rk4")
    with pytest.raises(ConfigError):
        IntegratorConfig(thin=0)


def test_stored_grid():
    cfg = IntegratorConfig(dt=1e-3, t_final=2.0)
    s = cfg.stored_steps()
    assert s[0] == 0 and s[-1] == 2000 and len(s) <= 1001
    cfg = IntegratorConfig(dt=0.1, t_final=1.0, thin=3)
    assert cfg.stored_steps().tolist() == [0, 3, 6, 9, 10]


def test_scheme_resolution():
    so3 = make_manifold("so3")
    assert resolve_scheme(brownian_problem(so3), IntegratorConfig()) == "group-exp"
    assert resolve_scheme(brownian_problem(so3, backend="embedded"), IntegratorConfig()) == "heun"
    assert resolve_scheme(brownian_problem(so3, ITO), IntegratorConfig()) == "euler"
    with pytest.raises(ConfigError):
        resolve_scheme(brownian_problem(so3, ITO), IntegratorConfig(scheme="heun"))
    with pytest.raises(ConfigError):
        resolve_scheme(brownian_problem(make_manifold("sphere-n")), IntegratorConfig(scheme="group-exp"))
    sn = brownian_problem(make_manifold("sphere-n"), ITO)
    assert resolve_retraction(sn, IntegratorConfig(), "euler") is True
    assert resolve_retraction(sn, IntegratorConfig(retraction=False), "euler") is False
    with pytest.raises(ConfigError):
        resolve_retraction(brownian_problem(make_manifold("torus2-chart")), IntegratorConfig(retraction=True), "heun")


def test_backend_and_mixing_validation():
    with pytest.raises(ConfigError):
        brownian_problem(make_manifold("aff-r"), backend="chart")
    with pytest.raises(ConfigError):
        brownian_problem(make_manifold("sphere2-chart"), mixing=np.ones((2, 2)))
    with pytest.raises(ConfigError):
        brownian_problem(make_manifold("sphere2-chart"), formulation="klein")


@pytest.mark.parametrize("name", list(CATALOG))
def test_strat_to_ito_conversion_matches_ito_problem(name):
    m = make_manifold(name)
    strat = brownian_problem(m, STRATONOVICH)
    ito = brownian_problem(m, ITO)
    conv = ito_strat_convert(strat, "to_ito")
    X = np.stack(m.test_points)
    # chart Itô problems carry drift 0 in the geometric sense; the converted
    # drift adds ½ΣΓ(σ,σ), i.e. it equals the coordinate drift minus the correction
    assert np.allclose(conv.drift(X), ito.drift(X), atol=1e-7)
    back = ito_strat_convert(conv, "to_stratonovich")
    assert np.allclose(back.drift(X), strat.drift(X), atol=1e-12)


def test_conversion_direction_checks():
    p = brownian_problem(make_manifold("torus2-chart"), ITO)
    with pytest.raises(ConfigError):
        ito_strat_convert(p, "to_ito")
    with pytest.raises(ConfigError):
        ito_strat_convert(p, "sideways")


def test_sphere_self_derivative_is_mean_curvature():
    m = make_manifold("sphere-n", n=3)
    x = np.array([[0.5, 0.5, 0.5, 0.5]])
    assert np.allclose(covariant_self_derivative(brownian_problem(m), x), -3 * x, atol=1e-8)


def test_noise_source_increments():
    ns = NoiseSource(7)
    a = ns.increments([0, 1], 3, 2, 0.04)
    assert np.allclose(a, 0.2 * ns.normals([0, 1], 3, 2))
    assert NoiseSource(-1).seed == 2**64 - 1


def test_single_step_shapes_and_values():
    m = make_manifold("torus2-group")
    p = brownian_problem(m)
    x = np.array([0.1, 0.2])
    dW = np.array([0.3, -0.4])
    expect = x + np.array([0.3 / 1.0, -0.4 / 3.0])
    assert np.allclose(step_heun_stratonovich(p, x, 0.01, dW), expect, atol=1e-15)
    assert np.allclose(step_group_exponential(p, x, 0.01, dW), expect, atol=1e-15)
    assert np.allclose(step_euler_maruyama(brownian_problem(m, ITO), x, 0.01, dW), expect, atol=1e-15)
    with pytest.raises(ConfigError):
        step_euler_maruyama(p, x, 0.01, dW)


def test_torus_group_schemes_pathwise_identical():
    m = make_manifold("torus2-group")
    cfg = IntegratorConfig(dt=1e-2, t_final=1.0)
    a = simulate_ensemble(brownian_problem(m), cfg, 50, 3)
    b = simulate_ensemble(brownian_problem(m, ITO), cfg, 50, 3)
    c = simulate_ensemble(brownian_problem(m, backend="chart"), cfg, 50, 3)
    assert np.array_equal(a.states, b.states)
    assert np.allclose(a.states, c.states, atol=1e-12)


@pytest.mark.parametrize("name", ["sphere-n", "so3", "aff-r", "hyperbolic-n"])
def test_determinism_across_workers(name):
    m = make_manifold(name)
    cfg = IntegratorConfig(dt=1e-2, t_final=0.5, chunk_size=16)
    a = simulate_ensemble(brownian_problem(m), cfg, 100, 11, workers=1)
    b = simulate_ensemble(brownian_problem(m), cfg, 100, 11, workers=8)
    assert np.array_equal(a.states, b.states)
    sa = ensemble_statistics(brownian_problem(m), cfg, 100, 11, lambda x: x, workers=1)
    sb = ensemble_statistics(brownian_problem(m), cfg, 100, 11, lambda x: x, workers=8)
    assert np.array_equal(sa.mean, sb.mean) and np.array_equal(sa.var, sb.var)


def test_paths_independent_of_ensemble_layout():
    m = make_manifold("sphere-n")
    cfg = IntegratorConfig(dt=1e-2, t_final=0.3, chunk_size=7)
    full = simulate_ensemble(brownian_problem(m), cfg, 30, 5)
    sub = simulate_ensemble(brownian_problem(m), cfg, 0, 5, path_ids=[4, 17])
    assert np.array_equal(full.states[[4, 17]], sub.states)
    one = simulate_path(brownian_problem(m), None, cfg, 5, path_index=17)
    assert np.array_equal(one.states, full.states[17])


def test_statistics_match_stored_ensemble():
    m = make_manifold("aff-r")
    cfg = IntegratorConfig(dt=1e-2, t_final=0.5, chunk_size=64)
    ens = simulate_ensemble(brownian_problem(m), cfg, 300, 2)
    st = ensemble_statistics(brownian_problem(m), cfg, 300, 2, lambda x: x[:, :2])
    assert np.allclose(st.mean, ens.states[:, :, :2].mean(axis=0), atol=1e-13)
    assert np.allclose(st.var, ens.states[:, :, :2].var(axis=0, ddof=1), atol=1e-12)


def test_fused_so3_walk_matches_generic_stepper():
    m = make_manifold("so3")
    cfg = IntegratorConfig(dt=1e-2, t_final=1.0)
    fused = simulate_ensemble(brownian_problem(m), cfg, 20, 4)
    generic = simulate_ensemble(brownian_problem(m, mixing=np.eye(3)), cfg, 20, 4)
    assert np.allclose(fused.states, generic.states, atol=1e-13)


def test_chart_failures_raise_or_collect():
    m = make_manifold("sphere2-chart")
    cfg = IntegratorConfig(dt=1e-2, t_final=3.0)
    with pytest.raises(EnsembleError) as info:
        simulate_ensemble(brownian_problem(m), cfg, 200, 1, x0=[0.2, 0.0])
    assert all("SingularityError" in v for v in info.value.failures.values())
    ens = simulate_ensemble(brownian_problem(m), cfg, 200, 1, x0=[0.2, 0.0], on_error="collect")
    bad = sorted(ens.failures)
    assert bad and np.all(np.isnan(ens.states[bad, -1]))
    good = np.setdiff1d(np.arange(200), bad)
    assert np.all(np.isfinite(ens.states[good]))


def test_invalid_start_point():
    with pytest.raises(SingularityError):
        simulate_ensemble(brownian_problem(make_manifold("sphere2-chart")), IntegratorConfig(), 1, 0, x0=[0.0, 0.0])


def test_hyperbolic_halving_rescues_large_steps():
    m = make_manifold("hyperbolic-n")
    p = brownian_problem(m, ITO)
    cfg = IntegratorConfig(dt=0.25, t_final=5.0)
    ens = simulate_ensemble(p, cfg, 400, 8)
    assert not ens.failures and np.all(ens.states[:, :, -1] > 0)
    from dataclasses import replace
    with pytest.raises(EnsembleError):
        simulate_ensemble(p, replace(cfg, max_halvings=0), 400, 8)


def test_retraction_keeps_sphere_on_manifold():
    m = make_manifold("sphere-n", n=3)
    cfg = IntegratorConfig(dt=1e-2, t_final=1.0)
    ens = simulate_ensemble(brownian_problem(m, ITO), cfg, 50, 1)
    assert ens.max_residual < 1e-14
    raw = simulate_ensemble(brownian_problem(m, ITO), IntegratorConfig(dt=1e-2, t_final=1.0, retraction=False), 50, 1)
    assert raw.max_residual > 1e-4


def test_constraint_tolerance_marks_failures():
    m = make_manifold("sphere-n")
    cfg = IntegratorConfig(dt=1e-2, t_final=1.0, retraction=False, constraint_tol=1e-3)
    ens = simulate_ensemble(brownian_problem(m, ITO), cfg, 20, 1, on_error="collect")
    assert ens.failures and all("ConstraintViolation" in v for v in ens.failures.values())


def test_group_exp_stays_on_so3():
    m = make_manifold("so3")
    ens = simulate_ensemble(brownian_problem(m), IntegratorConfig(dt=1e-2, t_final=10.0), 10, 0)
    assert ens.max_residual < 1e-12
