import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from mdcfronthaul import (DomainError, LinearizationPoint, MdcQuantizer, PowerSplit, g_individual,
                          g_sum, layer1_sum_rate, layer2_sum_rate, log2det, phi,
                          received_covariance, surrogate_g1, surrogate_gsum, surrogate_objective)

from conftest import random_channel, random_pd

LN2 = math.log(2)


def q(w, w0=None):
    w = np.atleast_2d(np.asarray(w, dtype=float))
    return MdcQuantizer(w, w if w0 is None else np.atleast_2d(np.asarray(w0, dtype=float)))


def gsum_oracle(sy, om, om0):
    """I(y; yhat0, yhat1, yhat2) + I(yhat1; yhat2) from the joint covariance of
    (yhat0, yhat1, yhat2) built entry by entry."""
    n = sy.shape[0]
    noises = [om0, om, om]
    joint = np.zeros((3 * n, 3 * n), complex)
    for i in range(3):
        for j in range(3):
            joint[i * n:(i + 1) * n, j * n:(j + 1) * n] = sy + (noises[i] if i == j else 0)
    cond = np.zeros_like(joint)
    for i in range(3):
        cond[i * n:(i + 1) * n, i * n:(i + 1) * n] = noises[i]
    i_y = log2det(joint) - log2det(cond)
    pair = joint[n:, n:]
    i_12 = 2 * log2det(sy + om) - log2det(pair)
    return i_y + i_12


def scalar_gsum_closed_form(w, w0):
    return math.log2(1 + 1 / w0 + 2 / w) + 2 * math.log2(1 + w) - math.log2(w * (w + 2))


def test_g_individual_examples():
    assert g_individual(np.array([[3.0]]), q(1.0)) == pytest.approx(2.0)
    assert g_individual(np.zeros((1, 1)), q(1.0)) == 0.0
    assert g_individual(np.array([[1.0]]), q(1e6)) < 1e-5


def test_g_individual_singular_noise_is_infinite():
    assert g_individual(np.eye(2), q(np.diag([1.0, 0.0]))) == math.inf


@pytest.mark.parametrize("w,w0", [(1.0, 1.0), (0.3, 2.0), (5.0, 0.1), (2.0, 2.0)])
def test_g_sum_scalar_closed_form_against_matrix_construction(w, w0):
    sy = np.array([[1.0]])
    assert gsum_oracle(sy, np.array([[w]]), np.array([[w0]])) == pytest.approx(
        scalar_gsum_closed_form(w, w0), rel=1e-12)
    assert g_sum(sy, q(w, w0)) == pytest.approx(scalar_gsum_closed_form(w, w0), rel=1e-12)


def test_g_sum_example_value():
    assert g_sum(np.array([[1.0]]), q(1.0, 1.0)) == pytest.approx(4 - math.log2(3), abs=1e-12)
    assert 4 - math.log2(3) == pytest.approx(2.4150, abs=1e-4)


def test_g_sum_vanishes_for_coarse_quantization():
    assert g_sum(np.array([[1.0]]), q(1e6, 1e6)) < 1e-5


def test_g_sum_matches_joint_covariance_oracle(rng):
    for n in (1, 2, 3):
        for _ in range(20):
            sy = random_pd(rng, n, scale=5.0)
            om, om0 = random_pd(rng, n), random_pd(rng, n)
            assert g_sum(sy, MdcQuantizer(om, om0)) == pytest.approx(gsum_oracle(sy, om, om0), rel=1e-10)


def test_g_sum_nonincreasing_in_central_noise(rng):
    sy = random_pd(rng, 2, scale=3.0)
    om = random_pd(rng, 2)
    vals = [g_sum(sy, MdcQuantizer(om, c * np.eye(2))) for c in np.logspace(-3, 6, 30)]
    assert all(a >= b - 1e-12 for a, b in zip(vals, vals[1:]))
    # the coarse-central limit is twice the side rate (both descriptions stay useful)
    assert vals[-1] == pytest.approx(2 * g_individual(sy, MdcQuantizer(om, om)), abs=1e-5)


def test_g_sum_requires_positive_definite_source():
    with pytest.raises(DomainError):
        g_sum(np.diag([1.0, 0.0]), q(np.eye(2)))
    assert g_sum(np.eye(2), MdcQuantizer(np.eye(2), np.diag([1.0, 0.0]))) == math.inf


def test_phi_examples(rng):
    b = random_pd(rng, 3)
    assert phi(b, b) == pytest.approx(log2det(b), rel=1e-12)
    assert phi(np.array([[2.0]]), np.array([[1.0]])) == pytest.approx(1 / LN2)
    with pytest.raises(DomainError):
        phi(np.eye(2), np.diag([1.0, 0.0]))


@settings(max_examples=200, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), n=st.integers(1, 3))
def test_phi_majorizes_log2det(seed, n):
    r = np.random.default_rng(seed)
    a, b = random_pd(r, n, scale=r.uniform(0.1, 10)), random_pd(r, n, scale=r.uniform(0.1, 10))
    assert phi(a, b) >= log2det(a) - 1e-9


def test_surrogate_g1_scalar_example():
    sy = np.array([[1.0]])
    at = LinearizationPoint(PowerSplit([0.5], [0.5]), np.eye(1), np.eye(1))
    val = surrogate_g1(q(2.0), at, sy)
    assert val == pytest.approx(1 + 0.5 / LN2 - 1, abs=1e-12)
    assert val == pytest.approx(0.7213, abs=1e-4)
    assert g_individual(sy, q(2.0)) == pytest.approx(math.log2(3) - 1)


def test_surrogate_gsum_scalar_tangency():
    at = LinearizationPoint(PowerSplit([0.5], [0.5]), np.eye(1), np.eye(1))
    assert surrogate_gsum(q(1.0, 1.0), at, np.array([[1.0]])) == pytest.approx(4 - math.log2(3))


def test_surrogate_objective_zero_weights(rng):
    ch = random_channel(rng)
    split = PowerSplit.from_layer1([1.0, 2.0], ch.power_P)
    at = LinearizationPoint(split, np.eye(2), np.eye(2))
    assert surrogate_objective(split, q(np.eye(2)), at, (0.0, 0.0), ch) == 0.0


def test_surrogate_objective_tangency(rng):
    ch = random_channel(rng, P=5.0)
    split = PowerSplit.from_layer1([1.0, 3.0], ch.power_P)
    om, om0 = random_pd(rng, 2), random_pd(rng, 2)
    at = LinearizationPoint(split, om, om0)
    w = (0.9, 0.6)
    exact = w[0] * layer1_sum_rate(ch, split, om) + w[1] * layer2_sum_rate(ch, split, om0)
    assert surrogate_objective(split, MdcQuantizer(om, om0), at, w, ch) == pytest.approx(exact, rel=1e-9)


def test_rates_unitarily_invariant(rng):
    for n in (2, 3):
        sy = random_pd(rng, n, scale=4.0)
        om, om0 = random_pd(rng, n), random_pd(rng, n)
        u, _ = np.linalg.qr(rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n)))
        rot = lambda m: u @ m @ u.conj().T
        assert g_individual(rot(sy), MdcQuantizer(rot(om), rot(om0))) == pytest.approx(
            g_individual(sy, MdcQuantizer(om, om0)), rel=1e-10)
        assert g_sum(rot(sy), MdcQuantizer(rot(om), rot(om0))) == pytest.approx(
            g_sum(sy, MdcQuantizer(om, om0)), rel=1e-10)


def test_quantizer_validation():
    with pytest.raises(ValueError):
        MdcQuantizer(-np.eye(2), np.eye(2))
    with pytest.raises(ValueError):
        MdcQuantizer(np.eye(2), np.eye(3))
