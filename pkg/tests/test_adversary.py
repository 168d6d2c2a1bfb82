import numpy as np
import pytest

from selfish_mmab.adversary import (ADVERSARIES, BestArmCommitter, Jammer, MessageCorruptor,
                                    RankRigger, StatLiar)
from selfish_mmab.algo_sicgt import SicGT
from selfish_mmab.env import EnvModel
from selfish_mmab.sim import Phase, simulate

MU = np.array([0.5, 0.9, 0.3])


def test_registry_names_match():
    for key, cls in ADVERSARIES.items():
        assert cls.name == key
        assert not cls.cooperative


def test_best_arm_committer_uses_true_means():
    res = simulate(EnvModel(3, 2, 500, MU), [BestArmCommitter(), Jammer(arm=0)], 0)
    assert np.all(res.arms[:, 0] == 1)
    assert np.all(res.phase[:, 0] == Phase.DEVIATE)


def test_jammer_waits_then_sits():
    res = simulate(EnvModel(3, 1, 100, MU), [Jammer(arm=2, start=40)], 0)
    assert np.all(res.arms[:40, 0] == 0)
    assert np.all(res.arms[40:, 0] == 2)


def test_stat_liar_snaps_to_grid():
    liar = StatLiar(arm=1, value=0.7, value_other=2.0)
    assert liar.outgoing_value(1, 0, 0.25, 2) == 0.5
    assert liar.outgoing_value(1, 1, 0.25, 2) == 1.0
    assert liar.outgoing_value(0, 0, 0.25, 2) == 0.25


def test_corruptor_target_matching():
    c = MessageCorruptor(p=2, leader=1)
    assert c.matches((2, 0, 1, 4))
    assert not c.matches((2, 0, 0, 4))
    assert not c.matches((1, 0, 1, 4))
    assert not c.matches((2, "check", 0, 1, 0, 0))


def test_corruptor_leg_validated():
    with pytest.raises(ValueError):
        MessageCorruptor(leg="sideways")


def test_corruptor_fires_once():
    players = [SicGT(), SicGT(), MessageCorruptor(bit=0)]
    res = simulate(EnvModel(5, 3, 40_000, np.array([0.9, 0.8, 0.5, 0.4, 0.3])), players, 0)
    fired = [k for _, j, k in res.events if j == 2 and k.startswith("corrupt:")]
    assert fired == ["corrupt:out:0"]


def test_rank_rigger_always_asks_for_arm_zero():
    assert RankRigger().choose_rank_arm(4) == 0


def test_omniscience_required():
    p = BestArmCommitter()

    class Ctx:
        truth = None
        index = 0
    p.ctx = Ctx()
    with pytest.raises(RuntimeError):
        next(p.program())
