import numpy as np
import pytest

from selfish_mmab.adversary import GreedyBestResponse
from selfish_mmab.algo_statistic import (SelfishRobustMMAB, estimate_m_finalize, explo_slot,
                                         phase_schedule)
from selfish_mmab.env import EnvModel, Sensing
from selfish_mmab.metrics import cumulative_rewards, pseudo_regret
from selfish_mmab.numerics import DomainError
from selfish_mmab.sim import Phase, simulate

MU = np.array([0.9, 0.8, 0.5, 0.4, 0.3])


def run(T, players, seed=0, fast=True, mu=MU, sensing=Sensing.STATISTIC):
    return simulate(EnvModel(len(mu), len(players), T, mu, sensing=sensing), players, seed,
                    fast=fast)


def test_finalize_example():
    K = 10
    N = np.full(K, 100)
    assert estimate_m_finalize(N, np.full(K, 19), K) == 3


def test_finalize_no_collisions_is_one():
    assert estimate_m_finalize(np.full(4, 50), np.zeros(4), 4) == 1


def test_finalize_saturates():
    assert estimate_m_finalize(np.full(4, 50), np.full(4, 50), 4) == 4


def test_finalize_needs_observations():
    with pytest.raises(DomainError):
        estimate_m_finalize([10, 0], [1, 0], 2)


def test_explo_slot():
    assert explo_slot(0, 1, 3) == 2
    assert sorted(explo_slot(5, j, 3) for j in range(3)) == [0, 1, 2]


def test_phase_schedule_ordered():
    end1, getrank, end2 = phase_schedule(10_000, 5, 100_000, 1.0)
    assert 10_000 < end1 and getrank > 0 and end2 >= end1 + getrank


@pytest.mark.parametrize("M", [2, 3])
def test_estimates_players_and_ranks(M):
    players = [SelfishRobustMMAB(beta=2) for _ in range(M)]
    run(20_000, players, seed=M)
    assert [p.m_hat for p in players] == [M] * M
    assert sorted(p.rank for p in players) == list(range(M))


def test_reaches_exploration_and_finds_top_arms():
    players = [SelfishRobustMMAB(beta=1) for _ in range(3)]
    res = run(100_000, players)
    assert res.phase[-1].tolist() == [Phase.EXPLORE] * 3
    assert all(p.top == [0, 1, 2] for p in players)
    late = res.arms[-3000:]
    assert np.mean(np.isin(late, [0, 1, 2])) > 0.95


def test_fast_and_step_modes_agree(trace_equal):
    a = run(20_000, [SelfishRobustMMAB(beta=1) for _ in range(3)], seed=2)
    b = run(20_000, [SelfishRobustMMAB(beta=1) for _ in range(3)], seed=2, fast=False)
    assert trace_equal(a, b)


def test_certified_horizon_zero_with_pending_exploration():
    p = SelfishRobustMMAB()
    p.m_hat = 2
    p.explore_set = [3]
    assert p.certified_horizon(1024) == 0


def test_full_sensing_also_runs():
    players = [SelfishRobustMMAB(beta=1) for _ in range(2)]
    run(30_000, players, sensing=Sensing.FULL)
    assert [p.m_hat for p in players] == [2, 2]


def test_greedy_best_response_skips_exploration():
    coop = [SelfishRobustMMAB(beta=1) for _ in range(2)]
    res = run(60_000, coop + [GreedyBestResponse(beta=1)])
    tail = res.arms[-5000:, 2]
    assert set(np.unique(tail)) <= {0, 1, 2}
    assert pseudo_regret(res).cum_regret[-1] > 0
    assert cumulative_rewards(res).shape == (3,)
