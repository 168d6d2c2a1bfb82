import numpy as np
import pytest

from selfish_mmab.adversary import Jammer
from selfish_mmab.env import EnvModel
from selfish_mmab.metrics import (checkpoints, cumulative_rewards, fairness, per_round_regret,
                                  pseudo_regret, rsd_regret, rsd_welfare, rsd_welfare_exact,
                                  rsd_welfare_mc, serial_dictatorship, shared_arm_rounds)
from selfish_mmab.sim import Phase, simulate

MU = np.array([0.9, 0.8, 0.5, 0.4, 0.3])


def sitters(T, arms, mu=MU):
    return simulate(EnvModel(len(mu), len(arms), T, mu), [Jammer(arm=a) for a in arms], 0)


def test_no_regret_on_top_arms():
    traj = pseudo_regret(sitters(1000, [2, 0, 1]))
    assert np.all(traj.cum_regret == pytest.approx(0.0, abs=1e-9))


def test_everyone_colliding_loses_everything():
    res = sitters(1000, [0, 0, 0])
    traj = pseudo_regret(res)
    assert traj.cum_regret[-1] == pytest.approx(1000 * (0.9 + 0.8 + 0.5))
    assert per_round_regret(res) == pytest.approx(np.full(1000, 2.2))
    assert shared_arm_rounds(res, range(3), [Phase.DEVIATE]).size == 1000


def test_regret_of_suboptimal_arm():
    traj = pseudo_regret(sitters(100, [0, 1, 4]), schedule="end")
    assert traj.cum_regret.tolist() == pytest.approx([100 * 0.2])


def test_checkpoints():
    assert checkpoints(10).tolist() == [1, 2, 4, 8, 10]
    assert checkpoints(16).tolist() == [1, 2, 4, 8, 16]
    assert checkpoints(100, "linear:4").tolist() == [25, 50, 75, 100]
    assert checkpoints(100, [50, 7]).tolist() == [7, 50]
    with pytest.raises(ValueError):
        checkpoints(10, [11])
    with pytest.raises(ValueError):
        checkpoints(10, "cubic")


def test_fairness():
    assert fairness([1.0, 1.0, 1.0]) == 0.0
    assert fairness([2.0, 1.0, 0.0]) == 1.0
    assert fairness([0.0, 0.0]) == 0.0


def test_cumulative_rewards_are_expected_values():
    assert cumulative_rewards(sitters(10, [0, 4])).tolist() == pytest.approx([9.0, 3.0])


def test_single_player_benchmark_is_best_arm():
    b = rsd_welfare(np.array([[0.2, 0.7, 0.5]]))
    assert b.welfare == pytest.approx(0.7)


def test_disjoint_favourites_are_order_free():
    mu = np.array([[0.9, 0.1, 0.1, 0.0], [0.1, 0.9, 0.1, 0.0], [0.1, 0.1, 0.9, 0.0]])
    b = rsd_welfare_exact(mu)
    assert b.welfare == pytest.approx(2.7)
    assert b.utilities == pytest.approx([0.9, 0.9, 0.9])


def test_shared_favourite_exact_value():
    mu = np.array([[0.9, 0.5, 0.0], [0.8, 0.6, 0.0]])
    # each order is equally likely: 0.9 + 0.6 or 0.5 + 0.8
    assert rsd_welfare_exact(mu).welfare == pytest.approx((1.5 + 1.3) / 2)


def test_serial_dictatorship_restricted_choice():
    mu = np.array([[0.1, 0.2, 0.9], [0.3, 0.2, 0.8]])
    assert serial_dictatorship(mu, [0, 1]) == [2, 0]
    assert serial_dictatorship(mu, [0, 1], restrict=True) == [1, 0]


def test_monte_carlo_matches_exact():
    rng = np.random.default_rng(3)
    mu = rng.random((5, 7))
    exact = rsd_welfare_exact(mu)
    mc = rsd_welfare_mc(mu, 200_000, np.random.default_rng(4))
    assert abs(mc.welfare - exact.welfare) <= 4 * mc.stderr
    assert mc.utilities == pytest.approx(exact.utilities, abs=0.01)


def test_rsd_regret_zero_for_benchmark_play():
    mu = np.array([[0.9, 0.1, 0.0], [0.1, 0.9, 0.0]])
    model = EnvModel(3, 2, 200, mu, delta=0.95)
    res = simulate(model, [Jammer(arm=0), Jammer(arm=1)], 0)
    assert rsd_regret(res).cum_regret[-1] == pytest.approx(0.0, abs=1e-9)


def test_pseudo_regret_needs_homogeneous():
    mu = np.array([[0.9, 0.1, 0.0], [0.1, 0.9, 0.0]])
    res = simulate(EnvModel(3, 2, 10, mu, delta=0.95), [Jammer(arm=0), Jammer(arm=1)], 0)
    with pytest.raises(ValueError):
        pseudo_regret(res)
