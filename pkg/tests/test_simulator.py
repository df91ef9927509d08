import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from backstep.coefficients import FunctionDescriptor, ProblemSpec
from backstep.kernel import ControlGains, GoursatGrid, extract_gains, solve_kernel
from backstep.simulator import (BlowUpError, SimConfig, SimConfigError, SimState, Simulator, check_config,
                                compatibility_residuals, fit_decay, lp_norm, make_compatible_initial,
                                run_decay_experiment, run_dependence_experiment, step, w1p_norm)

from conftest import stv_spec

D = FunctionDescriptor
COS = D.of(("cosine", 1.0, math.pi))


@pytest.fixture(scope="module")
def bessel_gains():
    return extract_gains(solve_kernel(ProblemSpec(lambda0=1.0), GoursatGrid(200)))


def test_norm_examples():
    x = np.linspace(0, 1, 201)
    one = np.ones_like(x)
    assert lp_norm(one, math.inf) == 1.0
    assert lp_norm(one, 1) == pytest.approx(1.0, abs=1e-15)
    assert lp_norm(x, 2) == pytest.approx(1 / math.sqrt(3), abs=1e-4)
    assert w1p_norm(x, 2) == pytest.approx(math.sqrt(1 / 3 + 1), abs=1e-4)
    assert w1p_norm(x, math.inf) == pytest.approx(1.0, abs=1e-12)
    with pytest.raises(ValueError):
        lp_norm(x, 0.5)


def test_config_rejections():
    with pytest.raises(SimConfigError):
        SimConfig(dt=-1.0)
    with pytest.raises(SimConfigError):
        SimConfig(t_end=1.0, burn_in=2.0)
    with pytest.raises(SimConfigError):
        SimConfig(p_list=(0.5,))
    with pytest.raises(SimConfigError):
        SimConfig(scheme="implicit")
    with pytest.raises(SimConfigError):
        check_config(ProblemSpec(lambda0=20.0, c1=D.constant(10.0)), SimConfig(dt=0.1))
    assert SimConfig(t_end=4.0).fit_start == pytest.approx(0.4)


def test_zero_is_equilibrium(bessel_gains):
    sim = Simulator(stv_spec(), bessel_gains, SimConfig(nx=50, dt=1e-3, t_end=1.0))
    s = SimState(0.0, np.zeros(51))
    for _ in range(20):
        s = sim.step(s)
    assert np.all(s.w == 0.0)


@settings(max_examples=20, deadline=None)
@given(st.floats(-5, 5), st.floats(-5, 5), st.integers(0, 2**32 - 1))
def test_step_linear(a, b, seed):
    rng = np.random.default_rng(seed)
    gains = ControlGains(0.7, np.linspace(0, 1, 11), rng.normal(size=11))
    sim = Simulator(stv_spec(), gains, SimConfig(nx=40, dt=1e-3, t_end=1.0))
    w1, w2 = rng.normal(size=41), rng.normal(size=41)
    lhs = sim.step(SimState(0.3, a * w1 + b * w2)).w
    rhs = a * sim.step(SimState(0.3, w1)).w + b * sim.step(SimState(0.3, w2)).w
    assert np.max(np.abs(lhs - rhs)) <= 1e-12 * (1 + np.max(np.abs(lhs)))


def test_batched_columns_match(bessel_gains):
    sim = Simulator(stv_spec(), bessel_gains, SimConfig(nx=40, dt=1e-3, t_end=1.0))
    rng = np.random.default_rng(0)
    W = rng.normal(size=(41, 3))
    out = sim.step(SimState(0.0, W)).w
    for j in range(3):
        assert np.allclose(out[:, j], sim.step(SimState(0.0, W[:, j])).w, rtol=0, atol=1e-14)


def test_module_step_matches_class(bessel_gains):
    cfg = SimConfig(nx=40, dt=1e-3, t_end=1.0)
    s = SimState(0.0, np.cos(np.pi * np.linspace(0, 1, 41)))
    assert np.array_equal(step(ProblemSpec(lambda0=1.0), bessel_gains, cfg, s).w,
                          Simulator(ProblemSpec(lambda0=1.0), bessel_gains, cfg).step(s).w)


def test_blow_up_reports_time():
    gains = ControlGains(0.0, np.linspace(0, 1, 11), np.zeros(11))
    sim = Simulator(ProblemSpec(lambda0=1.0), gains, SimConfig(nx=20, dt=1e-3, t_end=1.0))
    with pytest.raises(BlowUpError) as info:
        sim.step(SimState(0.25, np.full(21, np.inf)))
    assert info.value.t == pytest.approx(0.251)
    assert "0.251" in str(info.value)


def test_pure_diffusion_rate():
    cfg = SimConfig(nx=200, dt=1e-5, t_end=0.2, p_list=(2.0,), w1p=False)
    w0 = np.cos(np.pi * np.linspace(0, 1, 201))
    rep = run_decay_experiment(ProblemSpec(lambda0=0.0), ControlGains.zero(), cfg, w0)
    assert abs(rep.fits["norm_p2"].sigma_hat - math.pi**2) <= 0.02 * math.pi**2


def test_step_halving():
    spec = stv_spec()
    gains = ControlGains(1.5, np.linspace(0, 1, 21), np.linspace(1.0, 2.0, 21))
    w0 = make_compatible_initial(COS, gains, 80)
    finals = []
    for dt in (4e-3, 2e-3, 1e-3, 5e-4):
        sim = Simulator(spec, gains, SimConfig(nx=80, dt=dt, t_end=0.2))
        s = SimState(0.0, w0.w.copy())
        for _ in range(int(round(0.2 / dt))):
            s = sim.step(s)
        finals.append(s.w)
    d = [np.max(np.abs(a - b)) for a, b in zip(finals, finals[1:])]
    assert d[1] < d[0] and d[2] < d[1]
    assert d[1] / d[2] >= 1.8


def test_grid_refinement_cauchy(bessel_gains):
    vals = []
    for nx, dt in ((25, 4e-3), (50, 2e-3), (100, 1e-3), (200, 5e-4)):
        cfg = SimConfig(nx=nx, dt=dt, t_end=0.5, p_list=(2.0,), w1p=False)
        w0 = make_compatible_initial(COS, bessel_gains, nx)
        rep = run_decay_experiment(ProblemSpec(lambda0=1.0), bessel_gains, cfg, w0)
        vals.append(rep.series["norm_p2"][-1])
    d = np.abs(np.diff(vals))
    assert d[1] < d[0] and d[2] < d[1]


def test_compatible_zero(bessel_gains):
    s = make_compatible_initial(D.zero(), bessel_gains, 100)
    assert np.all(s.w == 0.0)
    assert compatibility_residuals(s.w, bessel_gains) == (0.0, 0.0)


def test_compatible_cosine(bessel_gains):
    nx = 200
    base = COS(np.linspace(0, 1, nx + 1))
    r0, r1 = compatibility_residuals(base, bessel_gains)
    assert r0 < 1e-3 and r1 > 0.1
    s = make_compatible_initial(COS, bessel_gains, nx)
    assert max(compatibility_residuals(s.w, bessel_gains)) <= 1e-8


def test_compatible_constant(bessel_gains):
    s = make_compatible_initial(D.constant(1.0), bessel_gains, 200)
    r0, r1 = compatibility_residuals(s.w, bessel_gains)
    assert r0 <= 1e-8 and r1 <= 1e-8
    # direct evaluation of the relation at x=1
    dx = 1 / 200
    wx1 = (3 * s.w[-1] - 4 * s.w[-2] + s.w[-3]) / (2 * dx)
    kx = np.interp(np.linspace(0, 1, 201), bessel_gains.y_nodes, bessel_gains.kx1)
    U = -bessel_gains.k11 * s.w[-1] - np.trapezoid(kx * s.w, dx=dx)
    assert abs(wx1 - U) <= 1e-8


def test_compatible_accepts_samples(bessel_gains):
    x = np.linspace(0, 1, 51)
    s = make_compatible_initial(1 + x**3, bessel_gains, 50)
    assert max(compatibility_residuals(s.w, bessel_gains)) <= 1e-8
    with pytest.raises(ValueError):
        make_compatible_initial(np.ones(10), bessel_gains, 50)


def test_decay_bessel(bessel_gains):
    cfg = SimConfig(nx=100, dt=1e-3, t_end=5.0)
    rep = run_decay_experiment(ProblemSpec(lambda0=1.0), bessel_gains, cfg,
                               make_compatible_initial(COS, bessel_gains, 100))
    sig = {k: f.sigma_hat for k, f in rep.fits.items()}
    assert all(s > 0 for s in sig.values())
    assert all(f.monotone for f in rep.fits.values())
    lp = [sig["norm_p1"], sig["norm_p2"], sig["norm_pinf"]]
    assert max(lp) / min(lp) <= 1.2
    assert set(rep.series) == {"norm_p1", "norm_p2", "norm_pinf", "w1p_p1", "w1p_p2", "w1p_pinf"}


def test_uncontrolled_is_unstable():
    cfg = SimConfig(nx=100, dt=1e-3, t_end=3.0, p_list=(2.0,), w1p=False)
    rep = run_decay_experiment(stv_spec(), ControlGains.zero(), cfg, np.ones(101))
    assert rep.fits["norm_p2"].sigma_hat < 0


def test_decay_zero_data(bessel_gains):
    rep = run_decay_experiment(ProblemSpec(lambda0=1.0), bessel_gains, SimConfig(nx=50, t_end=1.0), np.zeros(51))
    assert rep.degenerate and not rep.fits
    assert all(np.all(v == 0) for v in rep.series.values())


def test_fit_decay_exact():
    t = np.linspace(0, 2, 41)
    fit = fit_decay(t, 3.0 * np.exp(-1.7 * t), 0.2)
    assert fit.sigma_hat == pytest.approx(1.7, rel=1e-12)
    assert fit.C_hat == pytest.approx(1.0, rel=1e-12)
    assert fit.monotone and fit.fit_residual < 1e-12


def test_dependence_linear(bessel_gains):
    cfg = SimConfig(nx=100, dt=1e-3, t_end=2.0)
    w1 = make_compatible_initial(COS, bessel_gains, 100)
    w2 = make_compatible_initial(D.of(("cosine", 1.0, math.pi), ("cosine", 0.1, 2 * math.pi)), bessel_gains, 100)
    rep = run_dependence_experiment(ProblemSpec(lambda0=1.0), bessel_gains, cfg, w1, w2)
    assert not rep.degenerate
    assert all(math.isfinite(v) for v in rep.ratios.values())
    assert max(rep.spread.values()) <= 0.01
    assert set(rep.scaled) == {1.0, 0.1, 0.01}


def test_dependence_identical(bessel_gains):
    w = np.ones(51)
    rep = run_dependence_experiment(ProblemSpec(lambda0=1.0), bessel_gains, SimConfig(nx=50, t_end=1.0), w, w)
    assert rep.degenerate


def test_dependence_contraction():
    cfg = SimConfig(nx=100, dt=1e-3, t_end=1.0, p_list=(2.0,), w1p=False)
    x = np.linspace(0, 1, 101)
    w1 = np.cos(2 * np.pi * x)
    w2 = w1 + 1e-3 * np.cos(np.pi * x)
    rep = run_dependence_experiment(ProblemSpec(lambda0=0.0), ControlGains.zero(), cfg, w1, w2)
    assert rep.ratios["norm_p2"] <= 1.02
