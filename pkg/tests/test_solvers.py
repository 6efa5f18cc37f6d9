import numpy as np
import pytest

import imlfista.solvers as solvers
from imlfista.sara import SaraDictionary
from imlfista.solvers import (
    NumericalAbort, Problem, SolverConfig, TRACE_COLUMNS, build_hierarchy, inertia_alpha, read_trace_csv,
    reweighted_solve, solve, solve_fb, solve_fista, solve_iml_fista,
)

PSI16 = SaraDictionary((16, 16))


@pytest.fixture(scope="module")
def problem():
    from imlfista.checks import small_operator
    from imlfista.coverage import PhantomSpec, generate_phantom

    op, cov = small_operator(16, 8, 40, seed=9)
    truth = generate_phantom(PhantomSpec.random(16, 2, 3, seed=2))
    rng = np.random.default_rng(0)
    y = op.forward(truth) + 0.05 * (rng.standard_normal(op.m) + 1j * rng.standard_normal(op.m))
    return Problem(op, y, PSI16, cov, truth, 0.05)


@pytest.fixture(scope="module")
def hierarchy(problem):
    return build_hierarchy(problem, depth=3)


def cfg(problem, **kw):
    base = dict(lam=1e-3 * problem.beta ** 0.5, max_iterations=40)
    base.update(kw)
    return SolverConfig(**base)


def test_inertia_examples():
    assert inertia_alpha(1, 4) == 0.0
    assert inertia_alpha(1, 7.5) == 0.0
    assert inertia_alpha(5, 4) == pytest.approx(4 / 9)
    a = [inertia_alpha(k) for k in range(1, 2000)]
    assert np.all(np.diff(a) > 0) and a[-1] < 1 and a[-1] > 0.99
    with pytest.raises(ValueError):
        inertia_alpha(3, 2.0)
    with pytest.raises(ValueError):
        inertia_alpha(0)


def test_config_validation(problem):
    with pytest.raises(ValueError):
        SolverConfig()
    with pytest.raises(ValueError):
        SolverConfig(max_iterations=1, inertia_a=2)
    with pytest.raises(ValueError):
        SolverConfig(max_iterations=1, ml_schedule="sometimes")
    c = SolverConfig(max_iterations=1, tau=2 / problem.beta)
    with pytest.raises(ValueError, match="1/beta"):
        c.step(problem.beta)
    assert SolverConfig(max_iterations=1).smoothing(4.0) == 0.25


def test_ml_schedules():
    first = SolverConfig(max_iterations=1, ml_r=3)
    assert [first.ml_due(k) for k in range(1, 6)] == [True, True, True, False, False]
    every = SolverConfig(max_iterations=1, ml_schedule="every-K", ml_every=4)
    assert [k for k in range(1, 13) if every.ml_due(k)] == [1, 5, 9]
    assert not SolverConfig(max_iterations=1, ml_schedule="none").ml_due(1)


def test_fixed_point_zero_problem(problem):
    p = Problem(problem.operator, np.zeros(problem.operator.m), PSI16)
    w = np.zeros(PSI16.coef_shape)
    for algo in ("fb", "fista"):
        x, trace = solve(algo, p, w, cfg(problem, max_iterations=5))
        assert not x.any() and np.all(trace.column("objective") == 0)


def test_fb_monotone_and_feasible(problem):
    c = cfg(problem, max_iterations=60, prox_max_iter=500, prox_tol=1e-9)
    seen = []
    x, trace = solve_fb(problem, problem.uniform_weights(c.lam), c, callback=lambda k, u, x: seen.append(x.min()))
    obj = trace.column("objective")
    assert np.all(np.diff(obj) <= 10 * c.prox_tol)
    assert min(seen) >= 0 and x.min() >= 0


def test_fista_with_zero_inertia_equals_fb(problem, monkeypatch):
    c = cfg(problem, max_iterations=25)
    w = problem.uniform_weights(c.lam)
    x_fb, t_fb = solve_fb(problem, w, c)
    monkeypatch.setattr(solvers, "inertia_alpha", lambda k, a=4.0: 0.0)
    x_f, t_f = solve_fista(problem, w, c)
    assert np.array_equal(x_fb, x_f)
    assert np.array_equal(t_fb.column("objective"), t_f.column("objective"))


def test_iml_without_schedule_equals_fista(problem, hierarchy):
    c = cfg(problem, max_iterations=25, ml_schedule="none")
    w = problem.uniform_weights(c.lam)
    x_f, t_f = solve_fista(problem, w, c)
    x_i, t_i = solve_iml_fista(problem, w, hierarchy, c)
    assert np.array_equal(x_f, x_i)
    assert np.array_equal(t_f.column("objective"), t_i.column("objective"))
    assert np.array_equal(t_f.column("cost_units"), t_i.column("cost_units"))


def test_iml_logs_coarse_decrease_and_cost(problem, hierarchy):
    c = cfg(problem, max_iterations=30, ml_schedule="every-K", ml_every=3)
    x, trace = solve_iml_fista(problem, problem.uniform_weights(c.lam), hierarchy, c)
    assert trace.column("ml_applied").sum() == 10
    assert len(trace.coarse_log) == 20 and all(r.decreased for r in trace.coarse_log)
    assert trace.meter.units == pytest.approx(trace.meter.ledger_units(), rel=1e-13)
    assert trace.last.cost_units == trace.meter.units
    ms = {lv.m for lv in hierarchy.levels}
    assert set(trace.meter.applies) == ms
    assert x.min() >= 0


def test_fine_cost_is_two_units_per_iteration(problem):
    c = cfg(problem, max_iterations=7)
    _, trace = solve_fista(problem, problem.uniform_weights(c.lam), c)
    assert trace.column("cost_units").tolist() == [2.0 * k for k in range(8)]


def test_cost_budget_stops(problem, hierarchy):
    c = SolverConfig(lam=1e-3 * problem.beta ** 0.5, max_cost=30)
    for algo in ("fb", "fista", "iml-fista"):
        _, trace = solve(algo, problem, problem.uniform_weights(c.lam), c, hierarchy)
        u = trace.column("cost_units")
        assert u[-1] >= 30 and u[-2] < 30


def test_zero_budget_gives_only_k0(problem):
    c = cfg(problem, max_iterations=0)
    x, trace = solve_fista(problem, problem.uniform_weights(c.lam), c)
    assert len(trace) == 1 and trace[0].k == 0 and not x.any()


def test_nan_aborts(problem):
    bad = Problem(problem.operator, np.full(problem.operator.m, np.nan + 0j), PSI16)
    with pytest.raises(NumericalAbort):
        solve_fb(bad, bad.uniform_weights(1.0), cfg(problem, max_iterations=3))


def test_unknown_algorithm(problem):
    with pytest.raises(ValueError):
        solve("admm", problem, 1.0, cfg(problem))
    with pytest.raises(ValueError):
        solve("iml-fista", problem, 1.0, cfg(problem))


def test_determinism(problem, hierarchy, tmp_path):
    c = cfg(problem, max_iterations=15)
    paths = []
    for i in range(2):
        _, trace = solve_iml_fista(problem, problem.uniform_weights(c.lam), hierarchy, c)
        paths.append(tmp_path / f"t{i}.csv")
        trace.to_csv(paths[-1], wall=False)
    assert paths[0].read_bytes() == paths[1].read_bytes()


def test_trace_csv(problem, tmp_path):
    c = cfg(problem, max_iterations=4)
    _, trace = solve_fb(problem, problem.uniform_weights(c.lam), c)
    trace.to_csv(tmp_path / "t.csv")
    header = (tmp_path / "t.csv").read_text().splitlines()[0]
    assert header == "k,cycle,wall_s,cost_units,objective,snr_db,log_snr_db,ml_applied,prox_iters,prox_gap"
    assert tuple(header.split(",")) == TRACE_COLUMNS
    rows = read_trace_csv(tmp_path / "t.csv")
    assert [r["k"] for r in rows] == [0, 1, 2, 3, 4]
    assert rows[-1]["objective"] == trace.last.objective


def test_trace_append_checks_order():
    t = solvers.IterationTrace()
    t.append(solvers.TraceRow(0, 0, 0.0, 0.0, 1.0, 0.0, 0.0, 0, 0, 0.0))
    with pytest.raises(RuntimeError):
        t.append(solvers.TraceRow(0, 0, 0.0, 1.0, 1.0, 0.0, 0.0, 0, 0, 0.0))
    with pytest.raises(RuntimeError):
        t.append(solvers.TraceRow(1, 0, 0.0, -1.0, 1.0, 0.0, 0.0, 0, 0, 0.0))


def test_reweighting_single_cycle_matches_plain_solve(problem):
    c = cfg(problem, max_iterations=10)
    x0, t0 = solve_fista(problem, problem.uniform_weights(c.lam), c)
    x1, t1, state = reweighted_solve(problem, c, 0, "fista")
    assert np.array_equal(x0, x1) and state.cycle == 0
    assert np.array_equal(state.weights, problem.uniform_weights(c.lam))


def test_reweighting_resets_inertia_and_bounds_weights(problem, hierarchy):
    c = cfg(problem, max_iterations=8, rho=1e-2)
    weights = []
    orig = solvers.update_weights

    def spy(*a, **k):
        w = orig(*a, **k)
        weights.append(w)
        return w

    solvers.update_weights = spy
    try:
        x, trace, state = reweighted_solve(problem, c, 3, "iml-fista", hierarchy)
    finally:
        solvers.update_weights = orig
    assert trace.cycle_starts == [0, 8, 16, 24]
    cyc = trace.column("cycle")
    inner = trace.column("inner_k")
    alpha = trace.column("alpha")
    for i in range(4):
        rows = np.flatnonzero((cyc == i) & (inner == 1))
        assert rows.size == 1 and alpha[rows[0]] == 0.0
        # ML schedule restarts with the inertia
        assert trace.column("ml_applied")[rows[0]] == 1
    assert len(weights) == 3 and state.cycle == 3
    for w in weights:
        assert w.min() > 0 and w.max() <= c.lam / c.rho
    assert np.all(np.diff(trace.column("k")) > 0)


def test_reweighting_same_image_same_weights(problem):
    from imlfista.prox import update_weights

    x = np.abs(np.random.default_rng(1).standard_normal((16, 16)))
    assert np.array_equal(update_weights(x, 1.0, 0.1, PSI16), update_weights(x.copy(), 1.0, 0.1, PSI16))


def test_default_rho():
    assert solvers.default_rho(0.5, 4.0, 2.0) == pytest.approx(0.5)
