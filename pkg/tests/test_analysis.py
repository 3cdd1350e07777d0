import math
import warnings

import numpy as np
import pytest

from mhdm import analysis, engine, linops, penalties, solvers
from mhdm.analysis import CoarseGridWarning, Grid2D, SubgradientWarning
from mhdm.engine import Explicit, FixedCount, Geometric
from mhdm.penalties import TV1D, L1, Lp, Quadratic
from oracles import (cone_by_definition, counterexample_exact, cvx_l1, rounded_square_length_check,
                     rounded_square_limit)

# ---------------------------------------------------------------- identities


def test_identity_trace_and_forms(rng):
    f = rng.standard_normal(30)
    d = engine.run_mhdm(L1(), linops.identity(30), f, Geometric(), FixedCount(6))
    trace = analysis.identity_residual_trace(d)
    assert len(trace) == 6 and max(trace) <= 1e-12
    inner = analysis.identity_residual_trace(d, form="inner")
    assert max(inner) <= 1e-12
    with pytest.raises(ValueError):
        analysis.identity_residual_trace(d, form="bogus")


def test_identity_detects_tampering(rng):
    f = rng.standard_normal(20)
    d = engine.run_mhdm(L1(), linops.identity(20), f, Geometric(), FixedCount(4))
    assert analysis.decomposition_identity_residual(d, f=f + 0.1) > 1e-3


def test_consistency_and_monotonicity(rng):
    f = rng.standard_normal(20)
    d = engine.run_mhdm(Lp(0.5), linops.identity(20), f, Geometric(), FixedCount(8))
    assert max(analysis.consistency_errors(d)) <= 1e-12
    assert analysis.residual_increase(d) <= 1e-12


# ---------------------------------------------------------------- positive cone


@pytest.mark.parametrize("n", [5, 50, 200])
def test_substitution_operator_is_positive_cone(n):
    assert analysis.positive_cone_check(linops.substitution_operator(n)).is_positive_cone


def test_counterexample_cone():
    A = analysis.COUNTEREXAMPLE_T
    np.testing.assert_allclose(np.linalg.inv(A.T @ A), [[1, -2], [-2, 5]], atol=1e-12)
    rep = analysis.positive_cone_check(A)
    assert not rep.is_positive_cone
    cols, row, margin = rep.witness
    assert cols == (0, 1) and row == 0 and margin == pytest.approx(-1.0, abs=1e-12)
    assert rep.to_text().startswith("positive cone: NO\n")
    ex = analysis.positive_cone_check(A, exhaustive=True)
    assert not ex.is_positive_cone and ex.subsets_checked == 3 and ex.witness[2] < 0


def test_identity_cone_and_errors():
    rep = analysis.positive_cone_check(np.eye(4))
    assert rep.is_positive_cone and rep.witness is None and rep.min_margin == 1.0
    assert rep.to_csv().splitlines()[1].startswith("1,full-inverse,1,")
    with pytest.raises(ValueError):
        analysis.positive_cone_check(np.ones((3, 2)))
    with pytest.raises(ValueError):
        analysis.positive_cone_check(np.eye(21), exhaustive=True)
    with pytest.raises(ValueError):
        analysis.positive_cone_check(np.ones((2, 3)))


def test_exhaustive_matches_inverse_and_definition(rng):
    for _ in range(60):
        m = int(rng.integers(1, 6))
        A = rng.standard_normal((m + int(rng.integers(0, 3)), m))
        if rng.random() < 0.5:
            A = A + 3 * np.eye(*A.shape)
        a = analysis.positive_cone_check(A).is_positive_cone
        b = analysis.positive_cone_check(A, exhaustive=True).is_positive_cone
        assert a == b == cone_by_definition(A)


# ---------------------------------------------------------------- agreement


def test_condition2_examples():
    J = L1()
    # shrinkage pair f = 2 at lambda 1 and 2
    assert analysis.condition2_residual(J, [1.0], [1.5]) == 0.0
    x = np.array([0.3, -2.0])
    assert analysis.condition2_residual(J, x, x) == 0.0
    a = analysis.counterexample_minimizer(0.6)
    b = analysis.counterexample_minimizer(0.7)
    np.testing.assert_allclose(a, [1 / 0.6 - 1, 1.0], atol=1e-12)
    np.testing.assert_allclose(b, [1 / 0.7 - 1, 6 - 3 / 0.7], atol=1e-12)
    assert analysis.condition2_residual(J, a, b) == pytest.approx(10 / 21, abs=1e-12)
    with pytest.raises(ValueError):
        analysis.condition2_residual(Lp(0.5), x, x)


def test_counterexample_branches():
    for lam, want in [(0.1, (0, 0)), (1.0, (0, 3)), (4.0, (-0.25, 4.25))]:
        np.testing.assert_allclose(analysis.counterexample_minimizer(lam), want, atol=1e-14)
    for lam in (0.05, 1 / 7, 0.3, 0.5, 0.75, 1.0, 2.0, 3.0, 7.5):
        np.testing.assert_allclose(analysis.counterexample_minimizer(lam),
                                   [float(v) for v in counterexample_exact(lam)], atol=1e-12)
    with pytest.raises(ValueError):
        analysis.counterexample_minimizer(0.0)


@pytest.mark.parametrize("lam", [0.1, 0.3, 0.75, 2.0, 4.0])
def test_counterexample_against_cvx(lam):
    T = linops.from_matrix(analysis.COUNTEREXAMPLE_T)
    x = cvx_l1(T, analysis.COUNTEREXAMPLE_F, lam)
    np.testing.assert_allclose(analysis.counterexample_minimizer(lam), x, atol=1e-5)


def test_agreement_report_tv_denoise():
    t = linops.grid_nodes(60)
    f = ((t > 0.2) & (t < 0.5)).astype(float)
    xs = [solvers.solve_tv1d_denoise(f, lam).minimizer for lam in (1.0, 10.0, 100.0)]
    rep = analysis.agreement_report(TV1D(), xs)
    assert rep.holds and rep.max_violation <= 1e-6
    lams = (0.6, 0.7)
    bad = analysis.agreement_report(L1(), [analysis.counterexample_minimizer(l) for l in lams])
    assert not bad.holds and "VIOLATED" in bad.to_text()
    assert bad.to_csv().splitlines()[0] == "k,residual,holds"


def test_l1_cascade_condition_holds(rng):
    f = rng.standard_normal(30)
    xs = [np.sign(f) * np.maximum(np.abs(f) - 2.0**-k, 0) for k in range(6)]
    assert analysis.agreement_report(L1(), xs).holds


# ---------------------------------------------------------------- dual seminorms, certificates


def test_dual_seminorms():
    assert analysis.dual_seminorm_l1([1, -3, 2]) == 3
    assert analysis.dual_seminorm_l1(np.zeros(4)) == 0
    assert analysis.dual_seminorm_l1(np.sign([0.5, -2.0, 0.0])) == 1
    assert analysis.dual_seminorm_tv1d(np.full(5, 2.0), 1.0) == math.inf
    assert analysis.dual_seminorm_tv1d(np.zeros(5), 1.0) == 0.0
    xs = linops.diff_matrix(3).matrix.T @ np.array([1.0, 0.0])
    assert analysis.dual_seminorm_tv1d(xs, 1.0) == pytest.approx(1.0, abs=1e-14)
    assert analysis.dual_seminorm_tv1d(xs, 0.5) == pytest.approx(2.0, abs=1e-14)
    with pytest.raises(ValueError):
        analysis.dual_seminorm_tv1d(xs, 0.0)


def test_dual_tv_is_supremum(rng):
    # dual = sup <xs, x> / TV(x); check it bounds random ratios and is attained
    n = 12
    xs = rng.standard_normal(n)
    xs -= xs.mean()
    dual = analysis.dual_seminorm_tv1d(xs, 1.0)
    for _ in range(200):
        x = rng.standard_normal(n)
        assert xs @ x <= dual * np.abs(np.diff(x)).sum() + 1e-12
    z = linops.solve_ddt(np.diff(xs))
    i = int(np.argmax(np.abs(z)))
    step = np.zeros(n)
    step[i + 1:] = np.sign(z[i])
    assert abs(xs @ step) == pytest.approx(dual, rel=1e-10)


def test_optimality_certificates(rng):
    T = linops.make_gaussian_conv(40, 0.03)
    f = T.apply(rng.standard_normal(40))
    lam = 20.0
    x = solvers.solve_l1_general(T, f, lam, solvers.SolveOptions(20000, 1e-12)).minimizer
    dual, pairing, scaled = analysis.optimality_certificate(L1(), T, f, x, lam)
    assert dual == pytest.approx(1 / lam, abs=1e-6)
    assert pairing == pytest.approx(scaled, abs=1e-6)
    t = linops.grid_nodes(50)
    f = ((t > 0.3) & (t < 0.6)) + 0.1 * rng.standard_normal(50)
    J = TV1D(1.0)
    x = solvers.solve_tv1d_denoise(f, 2.0, 1.0, solvers.SolveOptions(20000, 1e-12)).minimizer
    dual, pairing, scaled = analysis.optimality_certificate(J, linops.identity(50), f, x, 2.0)
    # primal-dual TV converges sublinearly; 1e-3 is the certificate tolerance used for l1 as well
    assert dual == pytest.approx(0.5, abs=1e-3)
    assert pairing == pytest.approx(scaled, abs=1e-3)
    with pytest.raises(ValueError):
        analysis.optimality_certificate(Quadratic(), T, f, x, 1.0)


# ---------------------------------------------------------------- Bregman, rates


def test_bregman_distance_examples(rng):
    assert analysis.bregman_distance(L1(), [-2.0], [1.0], [1.0]) == 4.0
    x0 = rng.standard_normal(5)
    x1 = rng.standard_normal(5)
    assert analysis.bregman_distance(Quadratic(), x1, x0, x0) == pytest.approx(0.5 * np.sum((x1 - x0) ** 2))
    assert analysis.bregman_distance(L1(), x0, x0, np.sign(x0)) == 0.0
    with pytest.warns(SubgradientWarning):
        analysis.bregman_distance(L1(), [1.0], [1.0], [3.0])
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        analysis.bregman_distance(L1(), [1.0], [0.0], [0.5])
    with pytest.raises(ValueError):
        analysis.bregman_distance(Lp(0.5), [1.0], [0.0], [0.0])


def test_bregman_residual_denoise(rng):
    f = rng.standard_normal(50)
    d = engine.run_bregman(L1(), linops.identity(50), f, Geometric(0.5, 2.0), FixedCount(8))
    assert analysis.bregman_decomposition_residual(d) <= 1e-8
    plain = engine.run_mhdm(L1(), linops.identity(50), f, Geometric(), FixedCount(2))
    with pytest.raises(ValueError):
        analysis.bregman_decomposition_residual(plain)


def test_rate_bound():
    assert analysis.rate_bound(0, 1.0, 1, 1.0, 0.0) == 2.0
    assert analysis.rate_bound(5, 1.0, 1, 0.0, 0.3) == pytest.approx(0.3)
    vals = [analysis.rate_bound(n, 1.0, 1, 2.0, 0.1) for n in (0, 10, 10**6)]
    assert vals[0] > vals[1] > vals[2] > 0.1
    assert vals[2] == pytest.approx(0.1, abs=1e-3)
    with pytest.raises(ValueError):
        analysis.rate_bound(0, 1.0, 0.5, 1.0)


# ---------------------------------------------------------------- 2-D rounded square


def test_rounded_square_minimizer():
    g = Grid2D(4, extent=1.5)
    u = analysis.rounded_square_minimizer(3.0, Grid2D(2, extent=0.5))
    # the cell centres at +-0.25 are deep in the plateau
    plateau = 1 - (1 + math.sqrt(math.pi) / 2) / 3
    assert plateau == pytest.approx(0.3712576915157474, abs=1e-15)
    np.testing.assert_allclose(u, plateau, atol=1e-15)
    outside = analysis.rounded_square_minimizer(3.0, g)
    assert outside[0, 0] == 0.0
    big = analysis.rounded_square_minimizer(1e8, Grid2D(64))
    assert big.max() == pytest.approx(1.0, abs=1e-7)
    with pytest.raises(ValueError):
        analysis.rounded_square_minimizer(1.8, g)


def test_rounded_square_ramp_and_zero_region():
    lam = 2.5
    g = Grid2D(200)
    u = analysis.rounded_square_minimizer(lam, g)
    s, t = g.axes()
    r = analysis._rounded_r(s, t)
    assert np.all(u[r <= 1 / lam] == 0.0)
    ramp = (r > 1 / lam) & (r < analysis.RS_CUTOFF)
    np.testing.assert_allclose(u[ramp], 1 - 1 / (lam * r[ramp]), atol=1e-15)
    # the ramp meets the plateau continuously
    assert 1 - 1 / (lam * analysis.RS_CUTOFF) == pytest.approx(1 - (1 + math.sqrt(math.pi) / 2) / lam)


def test_condition2_2d():
    assert analysis.condition2_2d_violation(3.0, 3.0, Grid2D(64)) == pytest.approx(0.0, abs=1e-12)
    with pytest.warns(CoarseGridWarning):
        analysis.condition2_2d_violation(2.5, 4.0, Grid2D(32))
    with pytest.raises(ValueError):
        analysis.condition2_2d_violation(4.0, 2.5, Grid2D(64))
    # contrast: the 1-D TV shrinkage pair satisfies the condition
    t = linops.grid_nodes(80)
    f = ((t > 0.25) & (t < 0.6)).astype(float)
    a, b = (solvers.solve_tv1d_denoise(f, lam).minimizer for lam in (2.5, 4.0))
    assert abs(analysis.condition2_residual(TV1D(), a, b)) <= 1e-8


def test_coarea_oracle():
    assert rounded_square_length_check() == pytest.approx(math.pi / 2, rel=1e-7)
    assert rounded_square_limit(3.0, 3.0) == 0.0
    assert rounded_square_limit(2.5, 4.0) == pytest.approx(0.5310150506, abs=1e-9)


@pytest.mark.slow
def test_condition2_2d_approaches_coarea_limit():
    # forward-difference TV converges like h^(1/2) here (|grad r| blows up on the axes)
    vals = {n: analysis.condition2_2d_violation(2.5, 4.0, Grid2D(n)) for n in (128, 256, 512)}
    limit = rounded_square_limit(2.5, 4.0)
    assert vals[128] < vals[256] < vals[512] < limit
    gaps = [limit - vals[n] for n in (128, 256, 512)]
    for a, b in zip(gaps, gaps[1:]):
        assert 0.6 < b / a < 0.85
    rich = (math.sqrt(2) * vals[512] - vals[256]) / (math.sqrt(2) - 1)
    assert rich == pytest.approx(limit, rel=0.03)


# ---------------------------------------------------------------- positive cone monotonicity


def test_l1_monotonicity_under_positive_cone(rng):
    opts = solvers.SolveOptions(50000, 1e-13)
    checked = 0
    while checked < 15:
        m = int(rng.integers(2, 5))
        A = np.eye(m) + 0.25 * rng.standard_normal((m, m))
        if not analysis.positive_cone_check(A).is_positive_cone:
            continue
        T = linops.from_matrix(A)
        f = rng.standard_normal(m) * 3
        lam = float(rng.uniform(0.5, 4))
        mu = lam * float(rng.uniform(0.1, 0.9))
        xl = solvers.solve_l1_general(T, f, lam, opts).minimizer
        xm = solvers.solve_l1_general(T, f, mu, opts).minimizer
        support = np.abs(xl) > 1e-9
        assert np.all(np.abs(xm[support]) <= np.abs(xl[support]) + 1e-6)
        checked += 1
