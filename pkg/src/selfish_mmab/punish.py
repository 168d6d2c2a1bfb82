"""Punishment: estimate every arm to multiplicative precision, then sample.

Once the estimation round-robin has stopped on every arm, the player pulls
arms i.i.d. from the punishment distribution until the end of the run,
which caps what any single deviator can earn.
"""
from __future__ import annotations

import math

import numpy as np

from .numerics import first_stop, min_samples_to_stop, punishment_gamma, punishment_probs
from .sim import Phase, Plan


def estimation_precision(K: int, M: int, delta: float = 0.0) -> float:
    """delta' = (1 - g) / (1 + 3 g) with g the (heterogeneous) gamma factor."""
    g = punishment_gamma(K, M, delta)
    return (1.0 - g) / (1.0 + 3.0 * g)


def _lookahead(n, s, sq, dp: float, logT: float) -> int:
    # squared deviations, shaded down so rounding cannot overstate them
    ss = max(float(sq - s * s / n) - 1e-9 * float(sq), 0.0) if n > 0 else 0.0
    return min_samples_to_stop(int(n), float(s), dp, logT, ss)


def punishment(player, rank: int, M: int, delta: float = 0.0):
    """Generator run by a punishing player; never returns."""
    K, T = player.K, player.T
    logT = math.log(T)
    dp = estimation_precision(K, M, delta)
    player.set_phase(Phase.PUNISH_ESTIMATE)
    n = np.zeros(K, dtype=np.int64)
    s = np.zeros(K)
    sq = np.zeros(K)
    done = np.zeros(K, dtype=bool)
    est = np.zeros(K)
    if M < 2 or dp <= 0:
        done[:] = True
    while not done.all():
        t0 = player.t
        first = np.array([(k - rank - 1 - t0) % K for k in range(K)])
        # behaviour only changes once every arm has stopped, so the plan may
        # run until the latest of the earliest possible stopping rounds
        horizon = max(int(first[k]) + (_lookahead(n[k], s[k], sq[k], dp, logT) - 1) * K + 1
                      for k in range(K) if not done[k])
        arms = (t0 + np.arange(horizon) + rank + 1) % K
        blk = yield Plan(arms, False)
        for k in range(K):
            if done[k]:
                continue
            xs = blk.x[blk.arms == k]
            i = first_stop(xs, dp, logT, int(n[k]), float(s[k]), float(sq[k]))
            if i >= 0:
                xs = xs[:i + 1]
            if xs.size:
                # left-to-right cumsum keeps results independent of block sizes
                n[k] += xs.size
                s[k] = np.cumsum(np.concatenate(([s[k]], xs)))[-1]
                sq[k] = np.cumsum(np.concatenate(([sq[k]], xs * xs)))[-1]
            if i >= 0:
                done[k] = True
                est[k] = s[k] / n[k]
    player.estimates = est
    player.log("punish-sampling")
    probs = punishment_probs(est, max(M, 2), delta) if M >= 2 else np.full(K, 1.0 / K)
    player.punish_probs = probs
    cdf = np.cumsum(probs)
    player.set_phase(Phase.PUNISH_SAMPLE)
    while True:
        u = player.rng.peek(1 << 14)
        arms = np.minimum(np.searchsorted(cdf, u, side="right"), K - 1)
        blk = yield Plan(arms, False)
        player.rng.advance(blk.n)
