"""Regret, RSD benchmark and reward accounting over finished runs.

Everything is computed from true means and the collision trace
(pseudo-regret), never from realized rewards.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from .sim import RunResult


@dataclass
class RegretTrajectory:
    checkpoints: np.ndarray
    cum_regret: np.ndarray
    per_player: np.ndarray          # cumulative expected reward, (n_checkpoints, M)
    events: list = field(default_factory=list)


@dataclass
class RsdBenchmark:
    welfare: float
    utilities: np.ndarray
    method: str
    stderr: float = 0.0


def checkpoints(T: int, schedule="pow2") -> np.ndarray:
    """Rounds (1-based counts) at which trajectories are reported.

    "pow2" gives 1, 2, 4, ... and always T; "linear:n" gives n evenly
    spaced points ending at T; a list is taken as is.
    """
    if isinstance(schedule, str):
        if schedule == "pow2":
            pts = [1 << i for i in range(int(math.log2(T)) + 1) if (1 << i) <= T]
            if pts[-1] != T:
                pts.append(T)
            return np.array(pts, dtype=np.int64)
        if schedule.startswith("linear:"):
            n = int(schedule.split(":", 1)[1])
            return np.unique(np.linspace(T / n, T, n).round().astype(np.int64))
        if schedule == "end":
            return np.array([T], dtype=np.int64)
        raise ValueError(f"unknown checkpoint schedule {schedule!r}")
    pts = np.asarray(sorted(int(x) for x in schedule), dtype=np.int64)
    if pts.size and (pts[0] < 1 or pts[-1] > T):
        raise ValueError("checkpoints must lie in [1, T]")
    return pts


def mean_matrix(model) -> np.ndarray:
    """(M, K) matrix of per-player means."""
    mu = np.asarray(model.means, dtype=float)
    if mu.ndim == 1:
        return np.tile(mu, (model.M, 1))
    return mu


def expected_rewards(result: RunResult) -> np.ndarray:
    """(rounds, M) expected reward mu^j_{arm} (1 - collision)."""
    mu = mean_matrix(result.model)
    arms = result.arms.astype(np.int64)
    cols = np.arange(arms.shape[1])[None, :]
    return np.where(result.collided, 0.0, mu[cols, arms])


def top_m_baseline(model) -> float:
    mu = np.sort(np.asarray(model.means, dtype=float))[::-1]
    return float(mu[:model.M].sum())


def _trajectory(result: RunResult, baseline: float, schedule) -> RegretTrajectory:
    n = result.rounds
    pts = checkpoints(n, schedule) if n else np.zeros(0, dtype=np.int64)
    er = expected_rewards(result)
    cum = np.cumsum(er, axis=0)
    per = cum[pts - 1] if n else np.zeros((0, result.model.M))
    reg = pts * baseline - per.sum(axis=1)
    ev = [e for e in result.events if not e[2].startswith("phase:")]
    return RegretTrajectory(pts, reg, per, ev)


def pseudo_regret(result: RunResult, schedule="pow2") -> RegretTrajectory:
    """R_t = t * sum of the top-M means - expected collected reward."""
    if result.model.heterogeneous:
        raise ValueError("pseudo_regret needs homogeneous means; use rsd_regret")
    return _trajectory(result, top_m_baseline(result.model), schedule)


def per_round_regret(result: RunResult) -> np.ndarray:
    return top_m_baseline(result.model) - expected_rewards(result).sum(axis=1)


# ----------------------------------------------------------------------
# random serial dictatorship

def serial_dictatorship(mu: np.ndarray, order, restrict: bool = False) -> list[int]:
    """Arm of each player when dictators pick in `order`.

    Dictators choose among all K arms unless `restrict`, in which case the
    choice set is the first M arm indices.
    """
    M, K = mu.shape
    pool = list(range(M if restrict else K))
    out = [0] * M
    for i in order:
        best = max(pool, key=lambda a: (mu[i, a], -a))
        out[i] = best
        pool.remove(best)
    return out


def _welfare(mu: np.ndarray, arms) -> np.ndarray:
    return mu[np.arange(mu.shape[0]), arms]


def rsd_welfare_exact(mu, restrict: bool = False) -> RsdBenchmark:
    mu = np.atleast_2d(np.asarray(mu, dtype=float))
    M = mu.shape[0]
    if M > 8:
        raise ValueError("exact enumeration is limited to M <= 8")
    util = np.zeros(M)
    count = 0
    for order in itertools.permutations(range(M)):
        util += _welfare(mu, serial_dictatorship(mu, order, restrict))
        count += 1
    util /= count
    return RsdBenchmark(float(util.sum()), util, "exact")


def rsd_welfare_mc(mu, n: int, rng: np.random.Generator, restrict: bool = False) -> RsdBenchmark:
    """Monte Carlo over n uniform dictator orders.

    Each distinct sampled order is evaluated once and weighted by its count,
    which is exact for the sample and much cheaper than n dictatorships.
    """
    mu = np.atleast_2d(np.asarray(mu, dtype=float))
    M = mu.shape[0]
    perms = rng.permuted(np.tile(np.arange(M), (n, 1)), axis=1)
    codes, first, counts = np.unique(perms @ (M ** np.arange(M)), return_index=True,
                                     return_counts=True)
    util = np.zeros(M)
    tot = np.empty(len(codes))
    for r, i in enumerate(first):
        u = _welfare(mu, serial_dictatorship(mu, perms[i], restrict))
        util += counts[r] * u
        tot[r] = u.sum()
    util /= n
    mean = float(counts @ tot / n)
    var = float(counts @ (tot - mean) ** 2 / (n - 1)) if n > 1 else 0.0
    return RsdBenchmark(mean, util, f"mc:{n}", math.sqrt(var / n))


def rsd_welfare(mu, restrict: bool = False, mc_samples: int = 100_000,
                rng: np.random.Generator | None = None) -> RsdBenchmark:
    mu = np.atleast_2d(np.asarray(mu, dtype=float))
    if mu.shape[0] <= 8:
        return rsd_welfare_exact(mu, restrict)
    return rsd_welfare_mc(mu, mc_samples, rng or np.random.default_rng(0), restrict)


def rsd_regret(result: RunResult, benchmark: RsdBenchmark | None = None,
               schedule="pow2") -> RegretTrajectory:
    """R^RSD_t = t * expected RSD welfare - expected collected reward."""
    if benchmark is None:
        benchmark = rsd_welfare(mean_matrix(result.model))
    return _trajectory(result, benchmark.welfare, schedule)


# ----------------------------------------------------------------------
# accounting

def cumulative_rewards(result: RunResult) -> np.ndarray:
    return expected_rewards(result).sum(axis=0)


def fairness(rewards) -> float:
    """max_j |Rew_j - mean| / mean."""
    r = np.asarray(rewards, dtype=float)
    m = r.mean()
    return float(np.max(np.abs(r - m)) / m) if m > 0 else 0.0


def punish_round(result: RunResult, players=None) -> int:
    return result.first_event("punish:", players)


def phase_at(result: RunResult, t: int) -> list[int]:
    """Phase codes of every player in the round ending at count t."""
    return [int(p) for p in result.phase[t - 1]]


def rate_after(result: RunResult, player: int, start: int, end: int | None = None) -> float:
    """Mean expected reward of `player` over rounds [start, end)."""
    er = expected_rewards(result)[start:end, player]
    return float(er.mean()) if er.size else float("nan")


def shared_arm_rounds(result: RunResult, players, phases) -> np.ndarray:
    """Rounds where two of `players` that are both in one of `phases`
    share an arm. Returns the offending round indices."""
    arms = result.arms.astype(np.int64)
    ph = result.phase
    wanted = np.isin(ph, [int(p) for p in phases])
    bad = np.zeros(arms.shape[0], dtype=bool)
    players = list(players)
    for x in range(len(players)):
        for y in range(x + 1, len(players)):
            a, b = players[x], players[y]
            bad |= wanted[:, a] & wanted[:, b] & (arms[:, a] == arms[:, b])
    return np.flatnonzero(bad)
