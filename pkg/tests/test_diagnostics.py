import numpy as np
import pytest

from dsgdrer import diagnostics as dg
from dsgdrer.estimator import plan_buffers
from dsgdrer.lti import CoupledTrajectory, LtiSystem, RngStream, make_coupled, make_system, simulate, two_level_spectrum
from dsgdrer.matlib import singular_values


@pytest.fixture(scope="module")
def desk():
    return make_system(5, two_level_spectrum(5), np.eye(5), seed=0)


def test_error_metric_examples():
    a = np.random.default_rng(0).normal(size=(3, 3))
    assert dg.error_metric(a, a) == 0.0
    assert dg.error_metric(np.diag([3.0, 4.0]), np.zeros((2, 2))) == pytest.approx(4.0)
    assert dg.error_metric(np.diag([3.0, 4.0]), np.zeros((2, 2)), frobenius=True) == pytest.approx(5.0)
    with pytest.raises(ValueError, match="shape"):
        dg.error_metric(np.zeros((2, 2)), np.zeros((3, 3)))


def test_error_metric_against_svd_oracle():
    rng = np.random.default_rng(1)
    for _ in range(20):
        a, b = rng.normal(size=(2, 5, 5))
        assert dg.error_metric(a, b) == pytest.approx(singular_values(a - b)[0], rel=1e-9)


def test_h_product_empty_range_is_identity():
    f = dg.h_factors(np.ones((2, 4, 3)), 0.1)
    assert np.array_equal(dg.h_product(f, 3, 2), np.eye(3))


def test_h_product_order():
    rng = np.random.default_rng(2)
    x = rng.normal(size=(3, 4, 2))
    f = dg.h_factors(x, 0.05)
    assert np.allclose(f[1], np.eye(2) - (2 * 0.05 / 3) * sum(np.outer(x[k, 1], x[k, 1]) for k in range(3)))
    assert np.allclose(dg.h_product(f, 1, 3), f[1] @ f[2] @ f[3])
    assert not np.allclose(f[1] @ f[2] @ f[3], f[3] @ f[2] @ f[1])


def test_contraction_bounds_scalar_example():
    x = np.ones((1, 1, 1))
    gamma, B, R = 0.1, 1, 1.0
    h = dg.h_product(dg.h_factors(x, gamma), 0, B - 1)
    hth = float((h.T @ h)[0, 0])
    lower, upper = dg.contraction_bounds(x, gamma, B, R)
    assert hth == pytest.approx(0.64)
    assert upper[0, 0] == pytest.approx(11 / 15)
    assert lower[0, 0] == pytest.approx(7 / 15)
    assert lower[0, 0] <= hth <= upper[0, 0]


def test_contraction_check_zero_step(desk):
    layout = plan_buffers(40, 20, 20)
    rep = dg.contraction_check(desk, layout, 0.0, 100.0, seed=0, replicas=10, m=3)
    assert rep.passed
    assert rep.checks["lower"].margin == pytest.approx(0.0, abs=1e-12)
    assert rep.checks["upper"].margin == pytest.approx(0.0, abs=1e-12)
    assert np.allclose(rep.mean, np.eye(5))


def test_contraction_check_desk_setting(desk):
    B, u, m = 20, 20, 3
    layout = plan_buffers(B + u, B, u)
    R = 4.0 * float(np.trace(desk.g))
    rep = dg.contraction_check(desk, layout, 0.2 / (B * R), R, seed=1, replicas=200, m=m)
    assert rep.replicas == 200 and rep.passed
    assert min(c.margin for c in rep.checks.values()) >= -1e-9


def test_contraction_margins_survive_smaller_step(desk):
    B, u = 20, 20
    layout = plan_buffers(B + u, B, u)
    R = 4.0 * float(np.trace(desk.g))
    big = dg.contraction_check(desk, layout, 0.2 / (B * R), R, seed=2, replicas=50, m=3)
    small = dg.contraction_check(desk, layout, 0.02 / (B * R), R, seed=2, replicas=50, m=3)
    assert big.discarded == small.discarded
    assert big.passed and small.passed


def test_contraction_check_needs_small_step(desk):
    layout = plan_buffers(40, 20, 20)
    with pytest.raises(ValueError, match="1/4"):
        dg.contraction_check(desk, layout, 0.25 / (20 * 10.0), 10.0, seed=0, replicas=5)


def test_contraction_check_event_never_holds(desk):
    layout = plan_buffers(40, 20, 20)
    with pytest.raises(RuntimeError, match="raise R"):
        dg.contraction_check(desk, layout, 0.01, 1e-6, seed=0, replicas=5, max_attempts=5)


def test_noise_terms_match_explicit_sum():
    rng = np.random.default_rng(3)
    n, B, d, gamma = 2, 6, 2, 0.07
    w = rng.normal(size=(n, B, d))
    x = rng.normal(size=(n, B + 1, d))
    fwd, rev = dg.noise_terms(x, w, gamma)
    for r in range(n):
        eye = np.eye(d)
        f_ref = np.zeros((d, d))
        r_ref = np.zeros((d, d))
        for s in range(B):
            later = eye.copy()
            for l in range(s + 1, B):
                later = later @ (eye - 2 * gamma * np.outer(x[r, l], x[r, l]))
            f_ref += 2 * gamma * np.outer(w[r, s], x[r, s]) @ later
            earlier = eye.copy()
            for l in range(s - 1, -1, -1):
                earlier = earlier @ (eye - 2 * gamma * np.outer(x[r, l], x[r, l]))
            r_ref += 2 * gamma * np.outer(w[r, s], x[r, s]) @ earlier
        assert np.allclose(fwd[r], f_ref, atol=1e-13)
        assert np.allclose(rev[r], r_ref, atol=1e-13)


def test_unbiasedness_acceptance_setting():
    sys_ = LtiSystem.from_matrices([[0.9]], [[1.0]])
    rep = dg.unbiasedness_mc(sys_, 50, 0.01, 10_000, seed=0)
    assert rep.passed
    assert rep.extra["forward_z"] > 3  # the forward term is visibly biased here


def test_unbiasedness_without_dynamics():
    sys_ = LtiSystem.from_matrices(np.zeros((2, 2)), np.eye(2))
    rep = dg.unbiasedness_mc(sys_, 10, 0.05, 2000, seed=0)
    assert rep.passed
    assert np.all(np.abs(rep.extra["forward_mean"]) <= 4 * rep.extra["forward_stderr"])


def test_unbiasedness_zero_step():
    rep = dg.unbiasedness_mc(LtiSystem.from_matrices([[0.9]], [[1.0]]), 20, 0.0, 100, seed=0)
    assert np.array_equal(rep.mean, np.zeros((1, 1)))
    assert np.array_equal(rep.extra["forward_mean"], np.zeros((1, 1)))
    assert rep.passed


def test_unbiasedness_requires_replicas():
    with pytest.raises(ValueError):
        dg.unbiasedness_mc(LtiSystem.from_matrices([[0.9]], [[1.0]]), 20, 0.01, 50, seed=0)


def test_unbiasedness_pass_rate_across_seeds():
    sys_ = LtiSystem.from_matrices([[0.9]], [[1.0]])
    passes = sum(dg.unbiasedness_mc(sys_, 50, 0.01, 10_000, seed=s).passed for s in range(50))
    assert passes / 50 >= 0.99


def test_power_norms():
    a = np.diag([0.5, 0.2])
    assert np.allclose(dg.power_norms(a, 4), [1.0, 0.5, 0.25, 0.125])


def test_coupled_gap_identical_starts_is_zero(desk):
    layout = plan_buffers(100, 8, 2)
    traj = simulate(desk, 0, 100, np.zeros(5), RngStream(0))
    same = CoupledTrajectory(0, traj.states[: layout.N * layout.S].reshape(layout.N, layout.S, 5).copy())
    assert dg.coupled_gap(desk, traj, same, layout) == 0.0


def test_coupled_gap_scalar_decay():
    sys_ = LtiSystem.from_matrices([[0.5]], [[1.0]])
    layout = plan_buffers(10, 8, 2)
    traj = simulate(sys_, 0, 10, np.zeros(1), RngStream(0))
    shifted = np.empty((1, 10, 1))
    shifted[0, 0] = traj.states[0] - 1.0
    for i in range(9):
        shifted[0, i + 1] = 0.5 * shifted[0, i] + traj.noises[i]
    gaps = np.abs(traj.states[:10, 0] - shifted[0, :, 0])
    assert np.allclose(gaps, 0.5 ** np.arange(10), rtol=1e-12)
    ratio = dg.coupled_gap(sys_, traj, CoupledTrajectory(0, shifted), layout)
    assert ratio == pytest.approx(1.0, abs=1e-9)


def test_coupled_gap_bound_holds(desk):
    layout = plan_buffers(20 * 45, 40, 5)
    for seed in range(3):
        traj = simulate(desk, 0, layout.T, np.zeros(5), RngStream(seed))
        coupled = make_coupled(desk, traj, layout, RngStream(seed, 0, "coupled"))
        assert dg.coupled_gap(desk, traj, coupled, layout) <= 1 + 1e-9


def test_coupled_gap_vanishes_across_gap(desk):
    layout = plan_buffers(20 * 300, 200, 100)
    traj = simulate(desk, 0, layout.T, np.zeros(5), RngStream(4))
    coupled = make_coupled(desk, traj, layout, RngStream(4, 0, "coupled"))
    actual = traj.states[: layout.N * layout.S].reshape(layout.N, layout.S, 5)
    end_gap = np.linalg.norm(actual[:, -1] - coupled.buffers[:, -1], axis=1)
    start_gap = np.linalg.norm(actual[:, 0] - coupled.buffers[:, 0], axis=1)
    assert np.all(end_gap <= 0.9 ** (layout.S - 1) * start_gap * (1 + 1e-9) + 1e-12)
