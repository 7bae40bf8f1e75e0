import math

import numpy as np
import pytest

from camnet import metrics as M
from camnet import runner
from camnet.errors import NoBaselineError
from camnet.observer import Gains, Network, ObserverState, TargetView, Trajectory
from camnet.se3 import Pose, exp_so3, log_so3, phi
from camnet.verify import random_rotations


def star_state(base):
    """Every camera exactly at the average pose expressed in its own frame."""
    return ObserverState.from_poses(list(base.g_star_i))


@pytest.fixture(scope="module")
def net(golden):
    return golden.build_network()


@pytest.fixture(scope="module")
def base(net):
    return M.baseline(net)


def test_baseline_golden_values(net, base):
    assert np.allclose(base.g_star.p, [0.47, 0.95, -1.92], atol=0.005)
    assert np.allclose(log_so3(base.g_star.R), [0.27, 0.23, 0.24], atol=0.005)
    assert base.viewing == (0, 1, 2) and base.n == 5
    assert base.distinct_pair and base.targets_positive and base.beta_positive


def test_rho_by_hand(net, base):
    g_wo = [net.targets[i].g_wo for i in (0, 1, 2)]
    rho_p = sum(float(np.sum((g.p - base.g_star.p) ** 2)) for g in g_wo)
    rho_R = sum(float(np.trace(np.eye(3) - base.g_star.R.T @ g.R)) for g in g_wo)
    assert base.rho_p == pytest.approx(rho_p, rel=1e-12)
    assert base.rho_R == pytest.approx(rho_R, rel=1e-12)
    assert base.phi_m == pytest.approx(max(phi(base.g_star.R.T @ g.R) for g in g_wo), rel=1e-12)
    assert base.zeta == pytest.approx(1.1 * base.phi_m)
    assert base.beta == pytest.approx(1 - math.sqrt(2 * base.zeta))


def test_baseline_identical_targets(net):
    tv = TargetView(net.targets[0].g_wo)
    same = Network(net.cameras, net.graph, net.features, {i: tv for i in net.targets})
    b = M.baseline(same)
    assert b.rho_p == pytest.approx(0, abs=1e-24) and b.rho_R == pytest.approx(0, abs=1e-14)
    assert b.zeta == M.ZETA_FLOOR
    assert not b.distinct_pair


def test_baseline_requires_viewing_camera(net):
    blind = Network(tuple(c.__class__(c.id, c.g_wi, c.intrinsics) for c in net.cameras),
                    net.graph, net.features, {})
    with pytest.raises(NoBaselineError):
        M.baseline(blind)


def test_explicit_zeta_must_exceed_phi_m(net, base):
    with pytest.raises(ValueError):
        M.baseline(net, zeta=base.phi_m)
    assert M.baseline(net, zeta=0.05).zeta == 0.05


def test_energies_vanish_at_average(net, base):
    s = star_state(base)
    assert M.energy_p(s, base) == pytest.approx(0, abs=1e-28)
    assert M.energy_R(s, base) == pytest.approx(0, abs=1e-14)


def test_energy_by_hand(net, base):
    rng = np.random.default_rng(0)
    s = ObserverState.from_poses([Pose(exp_so3(rng.normal(scale=0.3, size=3)), rng.normal(size=3))
                                  for _ in range(5)])
    U_p = 0.5 * sum(float(np.sum((s.p[i] - base.g_star_i[i].p) ** 2)) for i in range(5))
    U_R = sum(phi(base.g_star_i[i].R.T @ s.R[i]) for i in range(5))
    assert M.energy_p(s, base) == pytest.approx(U_p, rel=1e-12)
    assert M.energy_R(s, base) == pytest.approx(U_R, rel=1e-12)
    # camera-frame and world-frame forms agree
    assert abs(M.energy_R(s, base) - M.energy_R_world(s.world_rotations(net), base)) < 1e-12


def test_energy_unit_offsets(base):
    s = star_state(base)
    p = s.p.copy()
    p[3] += [1.0, 0.0, 0.0]
    R = s.R.copy()
    R[2] = R[2] @ exp_so3([0, math.pi / 2, 0])
    st = ObserverState(0.0, R, p)
    assert M.energy_p(st, base) == pytest.approx(0.5, abs=1e-12)
    assert M.energy_R(st, base) == pytest.approx(2.0, abs=1e-12)


def test_energy_R_bounded_by_4n(base):
    rng = np.random.default_rng(1)
    for _ in range(20):
        st = ObserverState(0.0, random_rotations(rng, 5), np.zeros((5, 3)))
        assert 0 <= M.energy_R(st, base) <= 20


def test_omega_membership_and_attained_epsilon(base):
    s = star_state(base)
    assert M.omega_membership(s, base, 0.1) == (True, True)
    # strict inequality: zero error is not below a zero bound
    assert M.omega_membership(s, base, 0.0) == (False, False)

    shifted = ObserverState(0.0, s.R, s.p + np.array([0.01, 0, 0]))
    eps_p, _ = M.attained_epsilon(shifted, base)
    assert eps_p == pytest.approx(3 * (5 * 1e-4 / 5) / base.rho_p, rel=1e-9)
    assert M.omega_membership(shifted, base, eps_p * 1.001)[0]
    assert not M.omega_membership(shifted, base, eps_p * 0.999)[0]


def test_set_S_membership(golden, base):
    per, glob = M.set_S_membership(golden.initial_state(), base)
    assert glob and per.all()
    s = star_state(base)
    R = s.R.copy()
    R[2] = R[2] @ exp_so3([0, 0, math.pi])
    per, glob = M.set_S_membership(ObserverState(0.0, R, s.p), base)
    assert not glob and list(per) == [True, True, False, True, True]


def test_sigma_and_lambda(base):
    s = star_state(base)
    R = s.R.copy()
    R[1] = R[1] @ exp_so3([math.pi / 2, 0, 0])
    R[4] = R[4] @ exp_so3([0.3, -0.2, 0.5])
    st = ObserverState(0.0, R, s.p)
    assert M.sigma_i(st, base, 1) == pytest.approx(0, abs=1e-12)
    assert M.sigma_i(st, base, 0) == pytest.approx(1, abs=1e-12)
    # sym(R) of a rotation by theta has eigenvalues (1, cos theta, cos theta)
    theta = np.linalg.norm([0.3, -0.2, 0.5])
    assert M.sigma_i(st, base, 4) == pytest.approx(math.cos(theta), abs=1e-12)
    assert M.lambda_set(s, base) == frozenset()
    assert M.lambda_set(st, base) == frozenset({1, 4})
    assert M.lambda_set(st, base, zeta=1.5) == frozenset({1})
    assert M.max_phi(st, base) == pytest.approx(2.0, abs=1e-12)
    assert not M.s_zeta_membership(st, base) and M.s_zeta_membership(s, base)


def test_sigma_vs_characteristic_polynomial(base):
    rng = np.random.default_rng(2)
    Rs = random_rotations(rng, 50)
    for k in range(10):
        R = np.tile(base.R_star[0], (5, 1, 1))
        R[0] = Rs[k]
        st = ObserverState(0.0, R, np.zeros((5, 3)))
        A = base.R_star[0].T @ Rs[k]
        roots = np.roots(np.poly(0.5 * (A + A.T))).real
        # the double root cos(theta) is only resolved to about sqrt(machine eps)
        assert M.sigma_i(st, base, 0) == pytest.approx(roots.min(), abs=1e-6)


def test_lambda_all_at_maximum(base):
    R = base.R_star @ exp_so3([math.pi, 0, 0])
    st = ObserverState(0.0, R, np.zeros((5, 3)))
    assert M.lambda_set(st, base, zeta=1.0) == frozenset(range(5))


def _series(R, p, t):
    return Trajectory(np.asarray(t, float), np.asarray(R), np.asarray(p))


def test_epsilon_level_synthetic_series(base):
    s = star_state(base)
    K = 11
    exact = _series([s.R] * K, [s.p] * K, np.linspace(0, 10, K))
    assert M.epsilon_level_achieved(exact, base, 1e-9) == (True, True)
    drift = np.linspace(0, 10, K)[:, None, None] * np.array([1.0, 0, 0])
    R_div = [s.R @ exp_so3([0.15 * k, 0, 0]) for k in range(K)]
    diverging = _series(R_div, s.p + drift, np.linspace(0, 10, K))
    assert M.epsilon_level_achieved(diverging, base, 0.5) == (False, False)


def test_theory_constants(base):
    W, diam = 3, 2
    tc = M.theory_constants(base, Gains(1, 50), W, diam, 0.1)
    b = base.beta
    assert tc.k == pytest.approx(0.02)
    assert tc.epsilon_R == pytest.approx(1 - 0.9 * b)
    assert tc.epsilon_R_prime == pytest.approx(1 - 0.9 * (math.sqrt(b) - math.sqrt(0.06)) ** 2)
    assert tc.alpha_R == pytest.approx(0.02 * base.rho_R * 2 / (2 * b))
    assert tc.applicable
    # sqrt(k W) beyond sqrt(beta) leaves the refined bound undefined
    assert math.isnan(M.theory_constants(base, Gains(1, 1), W, diam, 0.1).epsilon_R_prime)
    assert not M.theory_constants(base, Gains(1, 1), W, diam, 0.0).applicable


def test_tail_helpers():
    t = np.linspace(0, 10, 11)
    v = np.arange(11.0)
    assert M.tail_mean(v, t, 0.2) == pytest.approx(9.0)
    assert M.tail_mean(v, t, 1.0) == pytest.approx(5.0)


def test_report_matches_pointwise(golden_runs):
    res = golden_runs[1.0][0]
    for k in (0, 100, len(res.trajectory) - 1):
        s = res.trajectory.state(k)
        assert res.report.U_p[k] == pytest.approx(M.energy_p(s, res.baseline), rel=1e-12)
        assert res.report.U_R[k] == pytest.approx(M.energy_R(s, res.baseline), rel=1e-12, abs=1e-15)
        assert res.report.lambda_size[k] == len(M.lambda_set(s, res.baseline))
    with pytest.raises(ValueError):
        M.tail_attained_epsilon(res.trajectory, res.baseline, 0.0)


def test_epsilon_verdicts_match_attained(golden_runs):
    for ks in (1.0, 50.0):
        res = golden_runs[ks][0]
        pos, rot = M.epsilon_level_achieved(res.trajectory, res.baseline, 0.1)
        assert pos == (res.report.attained_epsilon_p < 0.1)
        assert rot == (res.report.attained_epsilon_R < 0.1)


def test_estimates_stay_in_S(golden_runs):
    for res, _ in golden_runs.values():
        assert res.report.in_S.all()


def test_larger_consensus_gain_settles_closer(golden_runs):
    up1, uR1 = golden_runs[1.0][0].settled()
    up50, uR50 = golden_runs[50.0][0].settled()
    assert up50 < 0.01 * up1 and uR50 < 0.01 * uR1
    assert golden_runs[50.0][0].report.attained_epsilon_R < golden_runs[1.0][0].report.attained_epsilon_R


def test_energy_R_settles(golden_runs):
    rep = golden_runs[50.0][0].report
    _, settled = golden_runs[50.0][0].settled()
    tail = rep.t >= 0.8 * rep.t[-1]
    assert np.ptp(rep.U_R[tail]) < 0.01 * settled
    # decreasing until within 1% of the settled offset, then stays in that band
    k = int(np.argmax(rep.U_R < 1.01 * settled))
    assert np.all(np.diff(rep.U_R[:k + 1]) < 0)
    assert np.all(np.abs(rep.U_R[k:] / settled - 1) < 0.01)


def test_offset_exceeds_integration_error(golden, golden_runs):
    # a second-order run at a different step estimates the integration error
    ref = runner.execute(golden.with_overrides(k_s=50.0, scheme="midpoint", dt=2e-3, record_every=5))
    _, settled = golden_runs[50.0][0].settled()
    err = abs(settled - ref.settled()[1])
    assert settled > 10 * err and settled > 0


def test_recorded_rotations_stay_orthogonal(golden_runs):
    R = golden_runs[1.0][0].trajectory.R
    drift = np.abs(np.swapaxes(R, -1, -2) @ R - np.eye(3)).max()
    assert drift < 1e-9


@pytest.mark.slow
def test_gain_trend_extends_to_small_k(golden, golden_runs):
    # k = 0.002 needs a smaller step for explicit stability
    res = runner.execute(golden.with_overrides(k_s=500.0, dt=4e-4, record_every=25))
    settled_p = [golden_runs[ks][0].settled()[0] for ks in (1.0, 10.0, 50.0)] + [res.settled()[0]]
    assert all(b <= a for a, b in zip(settled_p, settled_p[1:]))
    assert res.report.attained_epsilon_p < golden_runs[50.0][0].report.attained_epsilon_p
    assert res.report.attained_epsilon_R < golden_runs[50.0][0].report.attained_epsilon_R
