import math

import numpy as np
import pytest

from mdcfronthaul import (FronthaulConfig, MdcQuantizer, ParameterError, PowerSplit,
                          delivery_probability, description_pmf_2path, layer1_sum_rate,
                          layer2_sum_rate)
from mdcfronthaul import optimize as opt
from mdcfronthaul.sim import (BLOCK, geometric_delays, merge, simulate_delivery,
                              simulate_expected_rate)

from conftest import scalar_channel


def within(x, p, n, k=3.0):
    sigma = math.sqrt(max(p * (1 - p), 1e-300) / n)
    return abs(x - p) <= k * sigma or (p in (0.0, 1.0) and x == p)


def composition_solution():
    """Scalar MDC point with f1 = f2 = log2(1.5) and each route delivering w.p. 0.75."""
    cfg = FronthaulConfig.symmetric(0.5, C_F=12e6)
    ch = scalar_channel(1.0, 2.0)
    split = PowerSplit([1.0], [1.0])
    q = MdcQuantizer(np.array([[1e-300]]), np.array([[1.0]]))
    pmf = opt.description_pmf(1.2, cfg)
    f1, f2 = layer1_sum_rate(ch, split, q.Omega), layer2_sum_rate(ch, split, q.Omega0)
    sol = opt.MdcSolution(R_F=1.2, split=split, Omega=q.Omega, Omega0=q.Omega0, rate_layer1=f1,
                          rate_layer2=f2, expected_sum_rate=(pmf[1] + pmf[2]) * f1 + pmf[2] * f2,
                          pmf=pmf)
    return sol, ch, cfg


def test_geometric_delays():
    u = np.array([1.0, 0.6, 0.5, 0.26, 0.25, 0.1])
    np.testing.assert_array_equal(geometric_delays(u, 0.5), [1, 1, 1, 2, 2, 4])
    np.testing.assert_array_equal(geometric_delays(u, 0.0), np.ones(6))


def test_ideal_routes_always_deliver():
    out = simulate_delivery([0.0, 0.0], 3, 5, 1000, seed=1)
    np.testing.assert_array_equal(out.counts, [0, 0, 1000])
    np.testing.assert_array_equal(out.empirical_pmf, [0, 0, 1])


def test_route_frequency_example():
    n = 10 ** 6
    out = simulate_delivery([0.5, 0.5], 2, 2, n, seed=7)
    for f in out.route_frequency:
        assert within(f, 0.25, n)


def test_asymmetric_routes_match_pmf():
    n = 2 * 10 ** 5
    P = [delivery_probability(e, 2, 8) for e in (0.3, 0.7)]
    out = simulate_delivery([0.3, 0.7], 2, 8, n, seed=11)
    ref = description_pmf_2path(*P)
    for x, p in zip(out.empirical_pmf, ref):
        assert within(x, p, n)
    assert out.empirical_pmf.sum() == 1.0


@pytest.mark.parametrize("eps", [0.1, 0.3, 0.5, 0.7, 0.9])
def test_delivery_frequency_grid(eps):
    n = 10 ** 5
    for N_F in (1, 2, 4):
        for T_F in (2, 8, 16):
            out = simulate_delivery([eps], N_F, T_F, n, seed=[N_F, T_F])
            assert within(out.route_frequency[0], delivery_probability(eps, N_F, T_F), n)


def test_seed_determinism_and_sharding():
    a = simulate_delivery([0.4, 0.6], 2, 6, 3 * BLOCK + 123, seed=5)
    b = simulate_delivery([0.4, 0.6], 2, 6, 3 * BLOCK + 123, seed=5)
    np.testing.assert_array_equal(a.counts, b.counts)
    cuts = [0, 1000, BLOCK + 7, 2 * BLOCK, 3 * BLOCK + 123]
    parts = [simulate_delivery([0.4, 0.6], 2, 6, hi - lo, seed=5, start=lo)
             for lo, hi in zip(cuts, cuts[1:])]
    m = merge(*parts)
    assert m.trials == a.trials
    np.testing.assert_array_equal(m.counts, a.counts)
    np.testing.assert_array_equal(m.route_counts, a.route_counts)
    c = simulate_delivery([0.4, 0.6], 2, 6, 3 * BLOCK + 123, seed=6)
    assert not np.array_equal(a.counts, c.counts)


def test_composition_example():
    sol, ch, cfg = composition_solution()
    assert sol.expected_sum_rate == pytest.approx(0.8775, abs=1e-4)
    out = simulate_expected_rate(sol, ch, cfg, 10 ** 6, seed=3)
    assert abs(out.empirical_expected_rate - sol.expected_sum_rate) <= 3 * out.std_error_rate


def test_expected_rate_is_pmf_weighted():
    sol, ch, cfg = composition_solution()
    out = simulate_expected_rate(sol, ch, cfg, 5000, seed=9)
    pmf = out.empirical_pmf
    assert out.empirical_expected_rate == pytest.approx(
        (pmf[1] + pmf[2]) * sol.rate_layer1 + pmf[2] * sol.rate_layer2, abs=1e-15)


def test_ideal_fronthaul_credits_both_layers():
    sol, ch, _ = composition_solution()
    cfg = FronthaulConfig.symmetric(0.0, C_F=12e6)
    out = simulate_expected_rate(sol, ch, cfg, 1000, seed=1)
    assert out.empirical_expected_rate == pytest.approx(sol.rate_layer1 + sol.rate_layer2, abs=1e-15)
    assert out.std_error_rate == 0.0


def test_saturated_fronthaul_credits_nothing():
    sol, ch, _ = composition_solution()
    cfg = FronthaulConfig.symmetric(1 - 1e-9, C_F=12e6)
    assert simulate_expected_rate(sol, ch, cfg, 10 ** 4, seed=1).empirical_expected_rate == 0.0


def test_pd_and_zero_solutions():
    ch = scalar_channel(1.0, 10.0)
    cfg = FronthaulConfig.symmetric(0.5, C_F=12e6)
    pd = opt.pd_fixed_rf(1.2, ch, cfg)
    out = simulate_expected_rate(pd, ch, cfg, 10 ** 5, seed=2)
    assert abs(out.empirical_expected_rate - pd.expected_sum_rate) <= 3 * out.std_error_rate
    assert set(np.unique(out.values)) <= {0.0, pd.sum_rate}
    z = simulate_expected_rate(opt.zero_solution(ch), ch, cfg, 100)
    assert z.empirical_expected_rate == 0.0 and z.counts[0] == 100


def test_errors():
    with pytest.raises(ParameterError):
        simulate_delivery([0.5], 1, 2, 0)
    with pytest.raises(ParameterError):
        simulate_delivery([0.5], 0, 2, 10)
    sol, _, cfg = composition_solution()
    with pytest.raises(ParameterError):
        simulate_expected_rate(sol, opt.UplinkChannel((np.ones((2, 1)),), np.eye(2), 1.0), cfg, 10)
