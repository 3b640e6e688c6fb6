import math

import numpy as np
import pytest

from hybridsp import (LyapunovSpec, SGPASProbe, SolverConfig,
                      check_flow_decrease, check_jump_decrease,
                      combined_lyapunov, estimate_attractivity,
                      lyapunov_along_arc, make_boundary_layer, make_reduced,
                      sample_bound_envelope, solve)
from hybridsp.analysis import ParamPoint
from hybridsp.core import HybridArc, Segment, Termination
from hybridsp.sets import box_set, singleton
from hybridsp.scenarios import (Example1Params, Example2Params,
                                build_example1, build_example2,
                                initial_sampler)


def reduced_ex1(gamma=0.0, tau=1.0, u0=2.0, horizon=2.5, step=1e-3):
    sc = build_example1(Example1Params(gamma=gamma, tau=tau, epsilon=1e-2))
    red = make_reduced(sc.system, sc.decomposition, sc.steady_state)
    arc = solve(red, np.array([u0, 0.0]),
                SolverConfig(step=step, max_t=horizon, max_j=50))
    return sc, red, arc


def slow_spec(sc, **kwargs):
    return LyapunovSpec(V=lambda x1: (2.0 - x1[1]) * x1[0] ** 2,
                        attractor=sc.slow_attractor, **kwargs)


def test_series_constant_at_attractor():
    sc = build_example2(Example2Params(gamma=0.0, tau=1.0, epsilon=1e-2,
                                       x0=(0.0, 0.2, 0.0)))
    arc = solve(sc.system, np.array([0.0, 0.2, 0.0]),
                SolverConfig(step=1e-3, max_t=0.5, max_j=5))
    spec = LyapunovSpec(V=lambda x: x[0] ** 2 + x[2] ** 2,
                        attractor=sc.attractor)
    series = lyapunov_along_arc(arc, spec)
    assert np.allclose(series.values(), 0.0)
    rates = series.flow_rates()
    assert np.allclose(rates[~np.isnan(rates)], 0.0)


def test_series_jump_drop_matches_hand_value():
    sc, _, arc = reduced_ex1(u0=2.0)
    series = lyapunov_along_arc(arc, slow_spec(sc))
    drops = series.jump_drops()
    assert len(drops) >= 1
    # V(1, 0) - V(2, 1) = 2 - 4 = -2, which equals -u^2/2 at u = 2; the
    # pre-jump timer sits within guard_tol of 1, shifting V by ~4e-9
    assert drops[0][1] == pytest.approx(-2.0, abs=1e-6)
    assert drops[0][1] == pytest.approx(-0.5 * 2.0 ** 2, abs=1e-6)


def test_series_flow_rate_on_boundary_layer():
    sc = build_example1(Example1Params(gamma=0.0, tau=1.0, epsilon=0.5))
    bl = make_boundary_layer(sc.system, sc.decomposition, None, None)
    arc = solve(bl, np.array([0.0, 0.5, 1.0]),
                SolverConfig(step=1e-3, max_t=0.2))
    spec = LyapunovSpec(V=lambda s: 0.5 * (s[2] - s[0]) ** 2,
                        attractor=sc.attractor)
    series = lyapunov_along_arc(arc, spec)
    # V' = -(x - u)^2 = -1 at x = 1
    assert series.samples[0].dV_flow == pytest.approx(-1.0, abs=1e-3)


def test_flow_rate_converges_linearly_in_step():
    sc = build_example1(Example1Params(gamma=0.0, tau=1.0, epsilon=0.5))
    bl = make_boundary_layer(sc.system, sc.decomposition, None, None)
    spec = LyapunovSpec(V=lambda s: 0.5 * (s[2] - s[0]) ** 2,
                        attractor=sc.attractor)
    errs = []
    for h in (2e-2, 1e-2, 5e-3):
        arc = solve(bl, np.array([0.0, 0.5, 1.0]),
                    SolverConfig(step=h, max_t=0.5))
        series = lyapunov_along_arc(arc, spec)
        errs.append(abs(series.samples[0].dV_flow + 1.0))
    assert errs[0] / errs[1] == pytest.approx(2.0, rel=0.2)
    assert errs[1] / errs[2] == pytest.approx(2.0, rel=0.2)


def test_jump_decrease_certified_on_reduced_arc():
    sc, _, arc = reduced_ex1(u0=7.0, horizon=4.5)
    spec = slow_spec(sc, jump_threshold=lambda d: 0.5 * d * d)
    assert check_jump_decrease(arc, spec) == []


def test_jump_decrease_flags_expanding_jump():
    seg = Segment(j=0, t=np.array([0.0, 1.0]),
                  x=np.array([[1.0, 0.0], [1.0, 1.0]]))
    seg2 = Segment(j=1, t=np.array([1.0, 2.0]),
                   x=np.array([[2.0, 0.0], [2.0, 1.0]]))
    from hybridsp.core import JumpRecord
    arc = HybridArc(
        segments=[seg, seg2],
        jumps=[JumpRecord(t=1.0, j=0, pre=np.array([1.0, 1.0]),
                          post=np.array([2.0, 0.0]))],
        termination=Termination.MAX_T)
    sc = build_example1(Example1Params(gamma=0.0, tau=1.0, epsilon=1e-2))
    spec = slow_spec(sc, jump_threshold=lambda d: 0.5 * d * d)
    bad = check_jump_decrease(arc, spec)
    assert len(bad) == 1 and bad[0].t == 1.0


def test_jump_decrease_zero_threshold_on_contracting_arc():
    sc, _, arc = reduced_ex1(u0=5.0, horizon=3.5)
    spec = slow_spec(sc, jump_threshold=None)
    assert check_jump_decrease(arc, spec) == []


def test_flow_decrease_certified_with_stated_threshold():
    gamma, tau = 0.01, 1.0
    sc, _, arc = reduced_ex1(gamma=gamma, tau=tau, u0=5.0, horizon=4.5)
    spec = slow_spec(
        sc, flow_threshold=lambda d: d * d / tau - 4.0 * gamma * 10.0)
    assert check_flow_decrease(arc, spec) == []


def test_flow_decrease_flags_divergence():
    sc = build_example2(Example2Params(gamma=1.0, tau=10.0, epsilon=1e-2))
    red = make_reduced(sc.system, sc.decomposition, sc.steady_state)
    arc = solve(red, np.array([1.0, 0.0]),
                SolverConfig(step=1e-3, max_t=2.0, max_j=5))
    spec = LyapunovSpec(V=lambda x1: sc.slow_attractor.distance(x1) ** 2,
                        attractor=sc.slow_attractor,
                        flow_threshold=lambda d: 0.0)
    assert len(check_flow_decrease(arc, spec)) > 0


def test_flow_decrease_zero_on_equilibrium_tracking():
    from hybridsp.scenarios import (UnicycleParams, build_unicycle_agent,
                                    equilibrium_state, tracking_lyapunov)
    from hybridsp.sets import product_set
    p = UnicycleParams.from_rates(0.002, 2.0 / 9.0)
    agent = build_unicycle_agent(p, (1.0, -2.0))
    q0 = equilibrium_state((1.0, -2.0), p)
    arc = solve(agent, q0, SolverConfig(step=1e-4, max_t=0.01, max_j=10))
    # attractor distance measured on (x, y, theta_e) of the 7-state vector
    target = product_set([((0, 1, 2), singleton([1.0, -2.0, 0.0]))])
    spec = LyapunovSpec(V=tracking_lyapunov(p, (1.0, -2.0)),
                        attractor=target,
                        flow_threshold=lambda d: 0.0)
    series = lyapunov_along_arc(arc, spec)
    rates = series.flow_rates()
    assert np.allclose(rates[~np.isnan(rates)], 0.0, atol=1e-9)
    assert check_flow_decrease(arc, spec, slack=1e-9) == []


def test_checks_are_pure():
    sc, _, arc = reduced_ex1(u0=5.0, horizon=3.5)
    spec = slow_spec(sc, jump_threshold=lambda d: 0.5 * d * d,
                     flow_threshold=lambda d: d * d)
    assert check_jump_decrease(arc, spec) == check_jump_decrease(arc, spec)
    a = check_flow_decrease(arc, spec)
    b = check_flow_decrease(arc, spec)
    assert a == b


def test_bound_envelope_sampling():
    sc = build_example2(Example2Params(gamma=0.1, tau=1.0, epsilon=1e-2))
    spec = LyapunovSpec(
        V=lambda x: x[0] ** 2 + x[2] ** 2,
        attractor=sc.attractor,
        lower=lambda d: 0.5 * d * d,
        upper=lambda d: 2.0 * d * d)
    rng = np.random.default_rng(0)
    states = [np.array([rng.uniform(-5, 5), rng.uniform(0, 1),
                        rng.uniform(-5, 5)]) for _ in range(10_000)]
    assert sample_bound_envelope(spec, states) == 0


def test_combined_monitor():
    v = combined_lyapunov(lambda x1: float(x1[0] ** 2),
                          lambda x: float(x[2] ** 2), epsilon=0.04, n1=2)
    assert v(np.array([2.0, 9.0, 3.0])) == pytest.approx(4.0 + 0.2 * 9.0)


# --- attractivity estimation ----------------------------------------------


def ex2_factory(params: ParamPoint):
    sc = build_example2(Example2Params(gamma=params.gamma, tau=params.tau,
                                       epsilon=params.epsilon))
    return sc.system, initial_sampler(sc), sc.attractor


def test_refinement_grid_tail_monotone():
    probe = SGPASProbe(
        Delta=5.0, delta=0.1,
        param_grid=SGPASProbe.normalize_grid(
            [[0.1, 1.0, 1e-2], [0.05, 2.0, 5e-3], [0.025, 4.0, 2.5e-3]]),
        n_initial=6, horizon_t=40.0, tail_fraction=0.2)
    cfg = SolverConfig(step=1e-3, max_t=40.0, max_j=10_000, record_stride=5)
    report = estimate_attractivity(ex2_factory, probe, cfg, seed=0)
    tails = [e.tail_radius for e in report.entries]
    assert all(math.isfinite(t) for t in tails)
    assert tails[1] <= tails[0] * 1.1
    assert tails[2] <= tails[1] * 1.1
    assert report.flags == []


def test_zero_drift_from_attractor_gives_zero_tail():
    def factory(params: ParamPoint):
        sc = build_example2(Example2Params(gamma=0.0, tau=params.tau,
                                           epsilon=params.epsilon))
        sampler = lambda rng, delta: np.array([0.0, rng.uniform(0, 1), 0.0])
        return sc.system, sampler, sc.attractor

    probe = SGPASProbe(Delta=1.0, delta=0.01,
                       param_grid=(ParamPoint(0.0, 1.0, 1e-2, 0.0),),
                       n_initial=4, horizon_t=5.0)
    cfg = SolverConfig(step=1e-3, max_t=5.0, max_j=100)
    report = estimate_attractivity(factory, probe, cfg)
    assert report.entries[0].tail_radius == 0.0
    assert report.entries[0].sup_distance == 0.0
    assert report.entries[0].T_hat == 0.0


def test_jump_excursion_recorded_in_sup_distance():
    # starting just below the timer threshold with the fast state at the far
    # edge, the first jump throws the slow state outward: boundedness is
    # tracked, not asserted away
    def factory(params: ParamPoint):
        sc = build_example1(Example1Params(
            gamma=params.gamma, tau=params.tau, epsilon=params.epsilon,
            R=10.0, x0=(0.0, 0.999, 10.0)))
        sampler = lambda rng, delta: np.array([0.0, 0.999, 10.0])
        return sc.system, sampler, sc.attractor

    probe = SGPASProbe(Delta=10.0, delta=0.5,
                       param_grid=(ParamPoint(0.01, 1.0, 1e-2, 0.0),),
                       n_initial=2, horizon_t=5.0)
    cfg = SolverConfig(step=1e-4, max_t=5.0, max_j=100)
    report = estimate_attractivity(factory, probe, cfg)
    # u jumps to x(t_1)/2 ~ 4.5 right away: it leaves any small ball even
    # though it started on the slow attractor
    assert report.entries[0].sup_distance >= 4.0
    assert report.entries[0].tail_radius < 1.0


def test_settle_time_nondecreasing_for_smaller_target():
    grid = (ParamPoint(0.0, 1.0, 1e-2, 0.0),)

    def factory(params: ParamPoint):
        sc = build_example2(Example2Params(gamma=0.0, tau=1.0, epsilon=1e-2))
        sampler = lambda rng, delta: np.array([2.0, 0.5, 2.0])
        return sc.system, sampler, sc.attractor

    cfg = SolverConfig(step=1e-3, max_t=30.0, max_j=1000)
    t_hats = []
    for delta in (1.0, 0.25):
        probe = SGPASProbe(Delta=5.0, delta=delta, param_grid=grid,
                           n_initial=1, horizon_t=30.0)
        rep = estimate_attractivity(factory, probe, cfg)
        t_hats.append(rep.entries[0].T_hat)
    assert t_hats[0] is not None and t_hats[1] is not None
    assert t_hats[1] >= t_hats[0]


def test_failures_counted_not_raised():
    # cubic blow-up reaches infinity in finite time: the sweep keeps going
    from hybridsp.core import HybridSystem
    from hybridsp.sets import SetDescriptor

    def factory(params: ParamPoint):
        sys = HybridSystem(
            n=1, flow_map=lambda s: np.array([s[0] ** 3]),
            jump_map=lambda s: s,
            flow_set=box_set([-np.inf], [np.inf]),
            jump_set=SetDescriptor(lambda s: False, lambda s: np.inf))
        sampler = lambda rng, delta: np.array([5.0])
        return sys, sampler, singleton([0.0])

    probe = SGPASProbe(Delta=6.0, delta=0.1,
                       param_grid=(ParamPoint(0.1, 1.0, 1.0, 0.0),),
                       n_initial=3, horizon_t=10.0)
    cfg = SolverConfig(step=0.05, max_t=10.0)
    with np.errstate(over="ignore", invalid="ignore"):
        report = estimate_attractivity(factory, probe, cfg)
    assert report.entries[0].n_failures == 3
    assert report.entries[0].sup_distance >= 5.0


def test_report_serialization(tmp_path):
    probe = SGPASProbe(Delta=5.0, delta=0.1,
                       param_grid=(ParamPoint(0.1, 1.0, 1e-2, 0.0),),
                       n_initial=2, horizon_t=5.0)
    cfg = SolverConfig(step=1e-3, max_t=5.0, max_j=1000)
    report = estimate_attractivity(ex2_factory, probe, cfg)
    report.write_json(tmp_path / "a.json")
    report.write_csv(tmp_path / "a.csv")
    import json
    data = json.loads((tmp_path / "a.json").read_text())
    assert {"gamma", "tau", "epsilon", "beta", "sup_distance", "T_hat",
            "tail_radius"} <= set(data["entries"][0])
    rows = (tmp_path / "a.csv").read_text().strip().splitlines()
    assert len(rows) == 2
