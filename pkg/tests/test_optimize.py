import math

import numpy as np
import pytest

from mdcfronthaul import (FronthaulConfig, InfeasibleStartError, LinearizationPoint, MdcQuantizer,
                          ParameterError, PowerSplit, layer1_sum_rate, layer2_sum_rate,
                          pd_sum_rate, sample_channel, surrogate_objective)
from mdcfronthaul import optimize as opt

from conftest import random_channel, scalar_channel

# T_F = 5 keeps rate searches short (6 grid points)
SHORT = dict(C_F=30e6)


def pd_scalar_oracle(h2, P, cfg, n=200):
    """Best expected PD rate over the rate grid, 1-D grid over the noise level."""
    s = h2 * P + 1
    best = 0.0
    for R in opt.rate_grid(cfg):
        wmin = s / (2 ** R - 1)
        om = np.geomspace(wmin * (1 + 1e-9), wmin * 1e4, n)
        rate = np.log2((s + om) / (1 + om)).max()
        pmf = opt.description_pmf(R, cfg)
        best = max(best, (1 - pmf[0]) * rate)
    return best


def test_rate_grid():
    grid = opt.rate_grid(FronthaulConfig())
    assert len(grid) == 17
    np.testing.assert_allclose(grid, 1.2 * np.arange(1, 18))
    assert grid[-1] == pytest.approx(20.4)


def test_expected_rate_composition_example():
    # T_F = 2, N_F = 1, eps = 0.5: each route delivers with probability 0.75
    cfg = FronthaulConfig.symmetric(0.5, C_F=12e6)
    ch = scalar_channel(1.0, 2.0)
    split = PowerSplit([1.0], [1.0])
    q = MdcQuantizer(np.array([[1e-300]]), np.array([[1.0]]))
    f1, f2 = layer1_sum_rate(ch, split, q.Omega), layer2_sum_rate(ch, split, q.Omega0)
    assert f1 == pytest.approx(math.log2(1.5)) and f2 == pytest.approx(math.log2(1.5))
    assert opt.expected_sum_rate_mdc(1.2, split, q, ch, cfg) == pytest.approx(
        0.9375 * f1 + 0.5625 * f2, abs=1e-12)
    assert 0.9375 * 0.5850 + 0.5625 * 0.5850 == pytest.approx(0.8775, abs=1e-12)


def test_expected_rate_limits(rng):
    ch = random_channel(rng)
    split = PowerSplit.from_layer1([1.0, 2.0], ch.power_P)
    q = MdcQuantizer(np.eye(2), 0.5 * np.eye(2))
    f1, f2 = layer1_sum_rate(ch, split, q.Omega), layer2_sum_rate(ch, split, q.Omega0)
    ideal = FronthaulConfig.symmetric(0.0)
    assert opt.expected_sum_rate_mdc(2.4, split, q, ch, ideal) == pytest.approx(f1 + f2, abs=1e-12)
    jammed = FronthaulConfig.symmetric(1 - 1e-9)
    assert opt.expected_sum_rate_mdc(2.4, split, q, ch, jammed) < 1e-6
    pd_val = opt.expected_sum_rate_pd(2.4, q.Omega, ch, ideal)
    assert pd_val == pytest.approx(pd_sum_rate(ch, q.Omega))


def test_pd_delivery_probability_complement():
    sol = opt.PdSolution(R_F=1.2, Omega=np.eye(1), sum_rate=1.0, expected_sum_rate=0.75,
                         pmf=np.array([0.25, 0.5, 0.25]))
    assert sol.delivery_probability == pytest.approx(0.75)


@pytest.fixture(scope="module")
def mdc_solutions():
    rng = np.random.default_rng(2024)
    out = []
    for eps, R in [(0.3, 2.4), (0.6, 1.2), (0.1, 6.0)]:
        ch = random_channel(rng, P=float(rng.uniform(5, 100)))
        cfg = FronthaulConfig.symmetric(eps)
        out.append((ch, cfg, opt.cccp_fixed_rf(R, ch, cfg)))
    return out


def test_cccp_history_is_monotone(mdc_solutions):
    for _, _, sol in mdc_solutions:
        h = np.array(sol.history)
        assert len(h) >= 2
        assert np.all(np.diff(h) >= -1e-8)


def test_cccp_solution_is_feasible(mdc_solutions):
    for ch, _, sol in mdc_solutions:
        assert opt.constraint_violation(sol, ch) <= 1e-6
        assert np.allclose(sol.split.P_k1 + sol.split.P_k2, ch.power_P)


def test_cccp_objective_bookkeeping(mdc_solutions):
    for ch, cfg, sol in mdc_solutions:
        w1, w2 = sol.weights
        assert sol.expected_sum_rate == pytest.approx(w1 * sol.rate_layer1 + w2 * sol.rate_layer2,
                                                      abs=1e-9)
        q = MdcQuantizer(sol.Omega, sol.Omega0)
        assert sol.expected_sum_rate == pytest.approx(
            opt.expected_sum_rate_mdc(sol.R_F, sol.split, q, ch, cfg), abs=1e-9)
        assert sol.history[-1] == pytest.approx(sol.expected_sum_rate, abs=1e-9)


def test_cccp_rerun_is_fixed_point(mdc_solutions):
    for ch, cfg, sol in mdc_solutions:
        again = opt.cccp_fixed_rf(sol.R_F, ch, cfg, init=opt.linearization_point(sol))
        assert again.iterations <= 2
        assert abs(again.expected_sum_rate - sol.expected_sum_rate) <= \
            opt.DEFAULT_CONFIG.rel_tol * sol.expected_sum_rate + 1e-9


def test_cccp_deterministic(mdc_solutions):
    ch, cfg, sol = mdc_solutions[0]
    again = opt.cccp_fixed_rf(sol.R_F, ch, cfg)
    assert again.expected_sum_rate == sol.expected_sum_rate
    np.testing.assert_array_equal(again.Omega, sol.Omega)
    np.testing.assert_array_equal(again.split.P_k1, sol.split.P_k1)


def test_cccp_infeasible_init_rejected(rng):
    ch = random_channel(rng)
    at = LinearizationPoint(PowerSplit.from_layer1([1, 1], ch.power_P), 1e-6 * np.eye(2), 1e-6 * np.eye(2))
    with pytest.raises(InfeasibleStartError):
        opt.cccp_fixed_rf(1.2, ch, FronthaulConfig(), init=at)


def test_mdc_beats_pd_on_ideal_fronthaul():
    rng = np.random.default_rng(99)
    cfg = FronthaulConfig.symmetric(0.0)
    chs = [random_channel(rng, P=float(rng.uniform(5, 300))) for _ in range(3)]
    R = [1.2, 3.6, 6.0]
    mdc = opt.cccp_fixed_rf_batch(R, chs, cfg)
    pd = opt.pd_fixed_rf_batch(R, chs, cfg)
    for m, p in zip(mdc, pd):
        assert m.weights == (1.0, 1.0)
        assert m.expected_sum_rate >= p.expected_sum_rate - 1e-6


def test_large_rate_reaches_unquantized_limit():
    ch = scalar_channel(1.0, 10.0)
    cfg = FronthaulConfig.symmetric(0.5)
    sol = opt.cccp_fixed_rf(20.0, ch, cfg)
    w1, w2 = sol.weights
    # all power in the first layer with negligible quantization noise
    assert sol.expected_sum_rate == pytest.approx(w1 * math.log2(11.0), abs=1e-3)
    assert sol.Omega[0, 0].real < 1e-4


def test_solve_inner_convex_zero_weights(rng):
    ch = random_channel(rng)
    at = LinearizationPoint(PowerSplit.from_layer1([1.0, 1.0], ch.power_P), 64 * np.eye(2), 64 * np.eye(2))
    split, q, info = opt.solve_inner_convex(2.4, (0.0, 0.0), ch, at)
    assert surrogate_objective(split, q, at, (0.0, 0.0), ch) == 0.0
    assert info["surrogate_end"] == pytest.approx(0.0, abs=1e-12)


def test_solve_inner_convex_ascent_and_minorization():
    rng = np.random.default_rng(5)
    for _ in range(3):
        ch = random_channel(rng, P=float(rng.uniform(5, 50)))
        cfg = FronthaulConfig.symmetric(0.4)
        R = 2.4
        w = opt.layer_weights(opt.description_pmf(R, cfg))
        at = LinearizationPoint(PowerSplit.from_layer1(0.5 * ch.power_P * np.ones(2), ch.power_P),
                                256 * np.eye(2), 256 * np.eye(2))
        split, q, info = opt.solve_inner_convex(R, w, ch, at)
        assert info["kkt"] <= 1e-6
        assert info["surrogate_end"] >= info["surrogate_start"]
        exact = w[0] * layer1_sum_rate(ch, split, q.Omega) + w[1] * layer2_sum_rate(ch, split, q.Omega0)
        assert surrogate_objective(split, q, at, w, ch) <= exact + 1e-9
        sy = opt.received_covariance(ch)
        assert opt.g_individual(sy, q) <= R + 1e-6
        assert opt.g_sum(sy, q) <= 2 * R + 1e-6


def test_solve_inner_convex_rejects_infeasible_point(rng):
    ch = random_channel(rng)
    at = LinearizationPoint(PowerSplit.from_layer1([1.0, 1.0], ch.power_P), 1e-6 * np.eye(2), np.eye(2))
    with pytest.raises(InfeasibleStartError):
        opt.solve_inner_convex(1.2, (1.0, 0.5), ch, at)


def test_search_dominates_grid_and_breaks_ties_low():
    rng = np.random.default_rng(3)
    chs = [random_channel(rng, P=float(rng.uniform(10, 300))) for _ in range(2)]
    cfg = FronthaulConfig.symmetric(0.5, **SHORT)
    best, grid = opt.search_rf_batch(chs, [cfg] * 2, "mdc", return_grid=True)
    for b, sols in zip(best, grid):
        assert [s.R_F for s in sols] == pytest.approx(list(opt.rate_grid(cfg)))
        assert all(b.expected_sum_rate >= s.expected_sum_rate for s in sols)
        top = max(s.expected_sum_rate for s in sols)
        assert b.R_F == min(s.R_F for s in sols if s.expected_sum_rate == top)
        # N_F = T_F + 1 cannot be delivered
        assert sols[-1].expected_sum_rate == 0.0


def test_search_saturated_congestion_falls_back_to_zero():
    ch = scalar_channel(1.0, 100.0)
    cfg = FronthaulConfig.symmetric(1 - 1e-9, **SHORT)
    sol = opt.search_rf_mdc(ch, cfg)
    assert sol.expected_sum_rate < 1e-6
    pd = opt.optimize_pd(ch, cfg)
    assert pd.expected_sum_rate < 1e-6


def test_zero_fallback_when_nothing_fits():
    ch = scalar_channel(1.0, 100.0)
    cfg = FronthaulConfig.symmetric(0.999999999999, **SHORT)
    sol = opt.search_rf_mdc(ch, cfg)
    if sol.R_F == 0.0:
        assert sol.expected_sum_rate == 0.0 and "zero-rate fallback" in sol.diagnostics
        assert np.isnan(sol.Omega).all()


def test_zero_solution_and_best_of(rng):
    ch = random_channel(rng)
    z = opt.zero_solution(ch)
    assert z.R_F == 0.0 and z.expected_sum_rate == 0.0
    assert opt.zero_solution(ch, "pd").scheme == "pd"
    with pytest.raises(ParameterError):
        opt.zero_solution(ch, "xx")
    a = opt.replace(z, R_F=1.2, expected_sum_rate=1.0)
    b = opt.replace(z, R_F=2.4, expected_sum_rate=1.0)
    assert opt.best_of([a, b], z) is a
    assert opt.best_of([], z) is z


def test_rescore_matches_direct_pd_solution(rng):
    ch = random_channel(rng, P=30.0)
    lo, hi = FronthaulConfig.symmetric(0.1), FronthaulConfig.symmetric(0.7)
    base = opt.pd_fixed_rf(3.6, ch, lo)
    direct = opt.pd_fixed_rf(3.6, ch, hi)
    moved = opt.rescore(base, hi)
    assert moved.sum_rate == pytest.approx(direct.sum_rate, rel=1e-9)
    assert moved.expected_sum_rate == pytest.approx(direct.expected_sum_rate, rel=1e-9)
    assert base.expected_sum_rate > moved.expected_sum_rate


@pytest.mark.parametrize("seed", range(4))
def test_optimize_pd_matches_scalar_oracle(seed):
    rng = np.random.default_rng(seed)
    h = complex(rng.standard_normal(), rng.standard_normal())
    P = 10 ** rng.uniform(0, 2.5)
    cfg = FronthaulConfig.symmetric([0.1, 0.3, 0.5, 0.9][seed], **SHORT)
    sol = opt.optimize_pd(scalar_channel(h, P), cfg)
    ref = pd_scalar_oracle(abs(h) ** 2, P, cfg)
    assert abs(sol.expected_sum_rate - ref) <= 0.01 * ref
    assert opt.constraint_violation(sol, scalar_channel(h, P)) <= 1e-6


def test_pd_large_rate_unquantized_limit():
    ch = scalar_channel(2.0, 10.0)
    sol = opt.pd_fixed_rf(20.4, ch, FronthaulConfig.symmetric(0.0))
    assert sol.sum_rate == pytest.approx(math.log2(41.0), abs=1e-4)


def test_parameter_errors(rng):
    ch = random_channel(rng)
    with pytest.raises(ParameterError):
        opt.cccp_fixed_rf(0.0, ch, FronthaulConfig())
    with pytest.raises(ParameterError):
        opt.cccp_fixed_rf_batch([1.2, 2.4], [ch], [FronthaulConfig()] * 3)
    with pytest.raises(ParameterError):
        opt.search_rf_batch([ch], FronthaulConfig(), scheme="sdc")
    with pytest.raises(ParameterError):
        opt.search_rf_mdc(ch, FronthaulConfig(C_F=1e6))
    with pytest.raises(ParameterError):
        opt.cccp_fixed_rf_batch([1.2, 1.2], [ch, random_channel(rng, n_R=3)], FronthaulConfig())


def test_corner_candidate_without_slack_is_skipped():
    # at this rate the path-diversity noise leaves no room for an exact corner point
    ch = sample_channel([1, 1, 1], 3, 10.0, seed=10)
    cfg = FronthaulConfig.symmetric(0.4)
    sol = opt.cccp_fixed_rf(15.6, ch, cfg)
    assert np.isfinite(sol.expected_sum_rate) and sol.expected_sum_rate > 0
    assert opt.constraint_violation(sol, ch) <= 1e-6
