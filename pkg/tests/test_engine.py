import numpy as np
import pytest

from mhdm import analysis, engine, linops, penalties
from mhdm.engine import Discrepancy, Explicit, FixedCount, Geometric
from mhdm.errors import SolverFailure, UnsupportedCombination
from mhdm.penalties import TV1D, L1, Entropy, Lp, Quadratic
from mhdm.solvers import SolveOptions
from oracles import iterated_tikhonov_identity, soft

TIGHT = SolveOptions(max_iter=20000, tol=1e-11)


def _check_invariants(d):
    ps_err, res_err = analysis.consistency_errors(d)
    assert ps_err <= 1e-12 and res_err <= 1e-12


# ---------------------------------------------------------------- schedules and stopping


def test_schedules():
    g = Geometric(0.5, 3.0)
    assert [g.value(n) for n in range(3)] == [0.5, 1.5, 4.5]
    assert g[2] == 4.5 and g.length is None
    assert list(g.first(2)) == [0.5, 1.5]
    e = Explicit([1.0, 2.0, 4.0])
    assert e.length == 3 and e.value(2) == 4.0
    with pytest.raises(IndexError):
        e.value(3)
    for bad in (lambda: Geometric(0.0), lambda: Geometric(1.0, 0.5), lambda: Explicit([]),
                lambda: Explicit([1.0, -1.0])):
        with pytest.raises(ValueError):
            bad()


def test_discrepancy_stop_index_examples():
    norms = np.sqrt([10.0, 5.0, 1.0, 0.5])
    assert engine.discrepancy_stop_index(norms, 1.0, 1.01) == 2
    assert engine.discrepancy_stop_index(norms, 0.1, 1.01) is None
    assert engine.discrepancy_stop_index(norms, 0.0, 1.01) is None
    assert engine.discrepancy_stop_index([3.0, 0.0], 0.0, 1.01) is None
    with pytest.raises(ValueError):
        engine.discrepancy_stop_index(norms, 1.0, 1.0)
    with pytest.raises(ValueError):
        Discrepancy(1.0, tau=0.9)


# ---------------------------------------------------------------- standard method


def test_l1_identity_is_soft_shrinkage_cascade(rng):
    f = rng.standard_normal(100) * 3
    d = engine.run_mhdm(L1(), linops.identity(100), f, Geometric(1.0, 2.0), FixedCount(21))
    for n, x in enumerate(d.partial_sums):
        np.testing.assert_allclose(x, soft(f, 2.0**-n), atol=1e-12)
    _check_invariants(d)
    assert analysis.decomposition_identity_residual(d) <= 1e-10


@pytest.mark.parametrize("J", [L1(), Lp(0.5), TV1D(), Quadratic()], ids=str)
def test_zero_data_gives_zero_components(J):
    T = linops.make_gaussian_conv(20, 0.05)
    d = engine.run_mhdm(J, T, np.zeros(20), Geometric(), FixedCount(4))
    assert all(not np.any(u) for u in d.components)
    assert analysis.decomposition_identity_residual(d) == 0.0


def test_tv_denoise_agrees_with_tikhonov():
    from mhdm import solvers

    t = linops.grid_nodes(100)
    f = ((t >= 0.3) & (t <= 0.5)) + 0.5 * ((t >= 0.68) & (t <= 0.72))
    sched = Geometric(1.0, 10.0)
    d = engine.run_mhdm(TV1D(), linops.identity(100), f, sched, FixedCount(12))
    for n in (1, 2, 3, 5, 7, 11):
        xt = solvers.solve_tv1d_denoise(f, sched.value(n)).minimizer
        assert np.linalg.norm(d.partial_sums[n] - xt) <= 1.1e-3
    assert analysis.decomposition_identity_residual(d) <= 1e-4


def test_residuals_monotone_and_rate_bound(rng):
    T = linops.make_gaussian_conv(60, 0.03)
    xd = np.zeros(60)
    xd[[10, 25, 40, 52]] = [1.0, -0.5, 0.8, 0.3]
    f = T.apply(xd)
    d = engine.run_mhdm(L1(), T, f, Geometric(1.0, 2.0), FixedCount(12), TIGHT)
    assert analysis.residual_increase(d) <= 1e-8
    jx = penalties.evaluate(L1(), xd)
    for n, r in enumerate(d.residual_norms):
        assert r <= analysis.rate_bound(n, 1.0, 1.0, jx) + 1e-6


def test_noisy_rate_and_post_stop_guarantee(rng):
    from mhdm.experiments.runner import make_noise

    T = linops.make_gaussian_conv(60, 0.03)
    xd = np.zeros(60)
    xd[[10, 30, 45]] = [1.0, 0.6, -0.7]
    f = T.apply(xd)
    delta = 0.05 * np.linalg.norm(f)
    fd = make_noise(f, delta, 7)
    d = engine.run_mhdm(L1(), T, fd, Geometric(1.0, 2.0), Discrepancy(delta, 1.01, 60))
    assert d.stop_index is not None and d.stop_index == len(d) - 1
    jx = penalties.evaluate(L1(), xd)
    for n, r in enumerate(d.residual_norms):
        assert r**2 <= 4 * jx / (n + 1) + delta**2 + 1e-6
    assert np.linalg.norm(T.apply(d.final) - f) <= (np.sqrt(1.01) + 1) * delta + 1e-6


def test_explicit_schedule_shorter_than_fixed_count():
    with pytest.raises(ValueError):
        engine.run_mhdm(L1(), linops.identity(3), np.ones(3), Explicit([1.0, 2.0]), FixedCount(3))
    d = engine.run_mhdm(L1(), linops.identity(3), np.ones(3), Explicit([1.0, 2.0]), Discrepancy(0.0, 1.01, 5))
    assert len(d) == 2


def test_decomposition_is_immutable():
    d = engine.run_mhdm(L1(), linops.identity(3), np.ones(3), Geometric(), FixedCount(2))
    with pytest.raises(ValueError):
        d.components[0][0] = 1.0
    with pytest.raises(AttributeError):
        d.variant = "x"
    assert d.all_converged and len(d) == 2
    np.testing.assert_allclose(d.residual, np.ones(3) - d.final)


def test_solver_failure_keeps_partial(monkeypatch):
    from mhdm import solvers

    calls = {"n": 0}
    real = solvers.solve_subproblem

    def flaky(*args, **kw):
        calls["n"] += 1
        if calls["n"] == 3:
            raise FloatingPointError("boom")
        return real(*args, **kw)

    monkeypatch.setattr(solvers, "solve_subproblem", flaky)
    with pytest.raises(SolverFailure) as info:
        engine.run_mhdm(L1(), linops.identity(4), np.arange(4.0), Geometric(), FixedCount(5))
    assert len(info.value.partial) == 2


# ---------------------------------------------------------------- flexible


def test_constant_schedule_reproduces_mhdm(rng):
    T = linops.make_gaussian_conv(30, 0.05)
    f = rng.standard_normal(30)
    sched = Geometric(0.5, 2.0)
    a = engine.run_mhdm(L1(), T, f, sched, FixedCount(6))
    b = engine.run_flexible(penalties.ConstantSchedule(L1(), sched), T, f, FixedCount(6))
    assert b.variant == "flexible"
    for u, v in zip(a.components, b.components):
        np.testing.assert_array_equal(u, v)


def test_quadratic_schedule_is_iterated_tikhonov(rng):
    T = linops.from_matrix(rng.standard_normal((15, 10)))
    f = rng.standard_normal(15)
    sched = Geometric(0.3, 2.0)
    a = engine.run_flexible(penalties.ConstantSchedule(Quadratic(), sched), T, f, FixedCount(8))
    b = engine.run_iterated_tikhonov(T, f, sched, FixedCount(8))
    for x, y in zip(a.partial_sums, b.partial_sums):
        np.testing.assert_allclose(x, y, atol=1e-10)


def test_varying_exponent_runs(rng):
    T = linops.make_gaussian_conv(40, 0.03)
    xd = np.zeros(40)
    xd[[8, 20, 31]] = [1.0, 0.5, 0.8]
    f = T.apply(xd)
    sched = penalties.VaryingExponentSchedule(penalties.increasing_exponents, Geometric(0.5, 2.0))
    d = engine.run_flexible(sched, T, f, FixedCount(8))
    assert d.penalty_labels[0] == "lp(p=0.05)"
    assert d.penalty_labels[3] == str(Lp(0.95 - 0.9 / 4))
    assert analysis.residual_increase(d) <= 1e-8
    assert analysis.decomposition_identity_residual(d) <= 1e-10


# ---------------------------------------------------------------- tight


def test_tight_zero_weights_reduce_to_mhdm(rng):
    T = linops.make_gaussian_conv(30, 0.05)
    f = rng.standard_normal(30)
    a = engine.run_mhdm(L1(), T, f, Geometric(), FixedCount(5))
    b = engine.run_tight(L1(), T, f, Geometric(), [0.0], FixedCount(5))
    for x, y in zip(a.partial_sums, b.partial_sums):
        np.testing.assert_allclose(x, y, atol=1e-12)
    f = rng.standard_normal(10)
    a = engine.run_mhdm(L1(), linops.identity(10), f, Geometric(), FixedCount(5))
    b = engine.run_tight(L1(), linops.identity(10), f, Geometric(), [0.0], FixedCount(5))
    for x, y in zip(a.partial_sums, b.partial_sums):
        np.testing.assert_array_equal(x, y)


def test_tight_first_step_shrinkage(rng):
    f = rng.standard_normal(50) * 2
    lam0, a0 = 2.0, 0.3
    d = engine.run_tight(L1(), linops.identity(50), f, Geometric(lam0), [a0], FixedCount(1))
    np.testing.assert_allclose(d.partial_sums[0], soft(f, a0 + 1 / lam0), atol=1e-14)
    # grid-search oracle on one coordinate
    y = 1.7
    grid = np.linspace(-3, 3, 600001)
    obj = lam0 / 2 * (grid - y) ** 2 + (lam0 * a0 + 1) * np.abs(grid)
    d1 = engine.run_tight(L1(), linops.identity(1), [y], Geometric(lam0), [a0], FixedCount(1))
    assert d1.final[0] == pytest.approx(grid[np.argmin(obj)], abs=1e-5)


def test_tight_variants():
    T = linops.make_gaussian_conv(20, 0.05)
    d = engine.run_tight(L1(), T, np.zeros(20), Geometric(), "inverse-lambda", FixedCount(3))
    assert all(not np.any(u) for u in d.components)
    f = T.apply(np.linspace(0, 1, 20))
    d = engine.run_tight(Quadratic(), T, f, Geometric(), "inverse-lambda", FixedCount(6))
    assert analysis.decomposition_identity_residual(d) <= 1e-10
    with pytest.raises(UnsupportedCombination):
        engine.run_tight(TV1D(), T, f, Geometric(), [0.1], FixedCount(2))
    with pytest.raises(ValueError):
        engine.run_tight(L1(), T, f, Geometric(), "sqrt", FixedCount(2))


# ---------------------------------------------------------------- Bregman and iterated Tikhonov


def test_bregman_quadratic_is_iterated_tikhonov(rng):
    T = linops.from_matrix(rng.standard_normal((12, 9)))
    f = rng.standard_normal(12)
    sched = Geometric(0.2, 2.0)
    a = engine.run_bregman(Quadratic(), T, f, sched, FixedCount(10))
    b = engine.run_iterated_tikhonov(T, f, sched, FixedCount(10))
    for x, y in zip(a.partial_sums, b.partial_sums):
        np.testing.assert_allclose(x, y, atol=1e-10)
    assert analysis.bregman_decomposition_residual(a) <= 1e-10


def test_bregman_l1_identity_constant_lambda(rng):
    f = rng.standard_normal(40)
    d = engine.run_bregman(L1(), linops.identity(40), f, Explicit([0.7] * 12), FixedCount(12))
    assert np.all(np.diff(d.residual_norms) <= 1e-12)
    assert analysis.bregman_decomposition_residual(d) <= 1e-8
    z = engine.run_bregman(L1(), linops.identity(5), np.zeros(5), Geometric(), FixedCount(3))
    assert all(not np.any(p) for p in z.bregman.subgradients)
    assert all(not np.any(u) for u in z.components)


def test_bregman_l1_deconvolution(rng):
    T = linops.make_gaussian_conv(30, 0.04)
    f = T.apply(np.sin(np.linspace(0, 3, 30)))
    d = engine.run_bregman(L1(), T, f, Explicit([5.0] * 8), FixedCount(8), TIGHT)
    assert analysis.bregman_decomposition_residual(d) <= 1e-6
    with pytest.raises(UnsupportedCombination):
        engine.run_bregman(Entropy(), linops.identity(3), np.ones(3), Geometric(), FixedCount(1))


def test_iterated_tikhonov_closed_form(rng):
    f = rng.standard_normal(10)
    lam = 0.8
    d = engine.run_iterated_tikhonov(linops.identity(10), f, Explicit([lam] * 6), FixedCount(6))
    ref = iterated_tikhonov_identity(f, lam, 6)
    for n, (x, y) in enumerate(zip(d.partial_sums, ref)):
        np.testing.assert_allclose(x, y, rtol=1e-13)
        np.testing.assert_allclose(x, f * (1 - (1 / (1 + lam)) ** (n + 1)), rtol=1e-13)


def test_iterated_tikhonov_residual_strictly_decreasing(rng):
    A = rng.standard_normal((10, 10)) + 3 * np.eye(10)
    T = linops.from_matrix(A)
    f = T.apply(rng.standard_normal(10))
    d = engine.run_iterated_tikhonov(T, f, Geometric(0.1, 1.5), FixedCount(15))
    assert np.all(np.diff(d.residual_norms) < 0)
    z = engine.run_iterated_tikhonov(T, np.zeros(10), Geometric(), FixedCount(3))
    assert all(not np.any(x) for x in z.partial_sums)


# ---------------------------------------------------------------- entropy


def test_entropy_escalation():
    n = 50
    xd = np.full(n, 0.2)
    # grid-weighted entropy: the ninth increment is ~1e-171, the tenth underflows
    d = engine.run_mhdm(Entropy(), linops.identity(n), xd, Geometric(1.0, 2.0), FixedCount(9))
    assert analysis.entropy_escalation_check(d, xd)
    assert all(np.linalg.norm(x - xd) >= 0.01 for x in d.partial_sums)
    d = engine.run_mhdm(Entropy(1.0), linops.identity(n), xd, Geometric(1.0, 2.0), FixedCount(10))
    assert analysis.entropy_escalation_check(d, xd)
    one = engine.run_mhdm(Entropy(), linops.identity(n), xd, Geometric(1.0, 2.0), FixedCount(1))
    assert analysis.entropy_escalation_check(one, xd)
    assert np.all(one.final > xd)
    with pytest.raises(ValueError):
        analysis.entropy_escalation_check(d, np.ones(n))


def test_entropy_escalation_detects_stagnation():
    n = 5
    xd = np.full(n, 0.2)
    d = engine.run_mhdm(Entropy(), linops.identity(n), xd, Geometric(1.0, 4.0), FixedCount(12))
    assert d.components[-1][0] == 0.0
    assert not analysis.entropy_escalation_check(d, xd)
