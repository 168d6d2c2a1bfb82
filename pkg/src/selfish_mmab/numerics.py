"""Numerical kernels shared by the algorithms.

Bernoulli KL and the kl-UCB index, the exploration budget, randomized
dyadic quantization, trimmed aggregation, punishment sampling
probabilities and the multiplicative-precision stopping rule.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


class DomainError(ValueError):
    """Raised when a kernel receives arguments outside its domain."""


def _check_prob(name: str, v: float) -> None:
    if not (0.0 <= v <= 1.0) or v != v:
        raise DomainError(f"{name}={v!r} is not in [0, 1]")


def bernoulli_kl(p: float, q: float) -> float:
    """KL divergence between Bernoulli(p) and Bernoulli(q)."""
    _check_prob("p", p)
    _check_prob("q", q)
    if p == q:
        return 0.0
    if q == 0.0 or q == 1.0:
        return math.inf
    out = 0.0
    if p > 0.0:
        out += p * math.log(p / q)
    if p < 1.0:
        out += (1.0 - p) * math.log((1.0 - p) / (1.0 - q))
    return max(out, 0.0)


def kl_vec(p: np.ndarray, q: np.ndarray) -> np.ndarray:
    """Elementwise Bernoulli KL, same conventions as `bernoulli_kl`."""
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        a = np.where(p > 0, p * np.log(p / q), 0.0)
        b = np.where(p < 1, (1 - p) * np.log((1 - p) / (1 - q)), 0.0)
    out = a + b
    out = np.where(p == q, 0.0, out)
    out = np.where((p != q) & ((q == 0) | (q == 1)), np.inf, out)
    return np.maximum(out, 0.0)


def explo_budget(t: float) -> float:
    """log t + 4 log log t, held at its t=3 value below 3."""
    if t < 3:
        t = 3.0
    return math.log(t) + 4.0 * math.log(math.log(t))


def klucb_index(mean: float, pulls: int, budget: float, tol: float = 1e-9) -> float:
    """sup{q in [mean, 1] : pulls * kl(mean, q) <= budget} by bisection.

    Bisection runs down to float resolution, well past `tol`, and returns
    whichever end of the final bracket has the smaller residual
    |pulls*kl - budget|. Policies should use `klucb_at_least`, which
    compares against the exact root.
    """
    _check_prob("mean", mean)
    if pulls < 0 or budget < 0:
        raise DomainError("pulls and budget must be nonnegative")
    if pulls == 0:
        return 1.0
    if budget == 0:
        return mean
    level = budget / pulls
    if bernoulli_kl(mean, 1.0) <= level:
        return 1.0
    lo, hi = mean, 1.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        if bernoulli_kl(mean, mid) <= level:
            lo = mid
        else:
            hi = mid
    assert hi - lo <= tol
    if hi < 1.0 and bernoulli_kl(mean, hi) - level < level - bernoulli_kl(mean, lo):
        return hi
    return lo


def klucb_at_least(mean: float, pulls: int, budget: float, x: float) -> bool:
    """Exact test of whether the kl-UCB root sup{q : pulls*kl(mean, q) <= budget} is >= x."""
    if pulls == 0 or x <= mean:
        return True
    if x >= 1.0:
        return pulls * bernoulli_kl(mean, 1.0) <= budget
    return pulls * bernoulli_kl(mean, x) <= budget


def quantize(mean: float, p: int, rng) -> float:
    """Randomized rounding of `mean` to the 2^-p grid, unbiased."""
    _check_prob("mean", mean)
    scale = float(1 << p)
    low = math.floor(mean * scale)
    frac = mean * scale - low
    if frac > 0 and rng.random() < frac:
        low += 1
    return low / scale


def trimmed_mean(values) -> float:
    """Average after dropping one maximal and one minimal entry.

    Ties are broken toward the lowest index for both the max and the min.
    """
    v = [float(x) for x in values]
    if len(v) < 3:
        raise DomainError("trimmed_mean needs at least 3 values")
    imax = max(range(len(v)), key=lambda i: (v[i], -i))
    rest = [i for i in range(len(v)) if i != imax]
    imin = min(rest, key=lambda i: (v[i], i))
    kept = [v[i] for i in range(len(v)) if i != imax and i != imin]
    return math.fsum(kept) / len(kept)


def punishment_gamma(K: int, M: int, delta: float = 0.0) -> float:
    """gamma = (1-1/K)^(M-1), scaled by ((1+delta)/(1-delta))^2 when delta > 0."""
    g = (1.0 - 1.0 / K) ** (M - 1)
    if delta:
        g *= ((1.0 + delta) / (1.0 - delta)) ** 2
    return g


def raw_punishment_probs(est_means, M: int, delta: float = 0.0) -> np.ndarray:
    """p_k = max(1 - (gamma * mean_topM / mu_k)^(1/(M-1)), 0).

    Written as p_k = (1 - root) + root * (1 - ratio_k^(1/(M-1))) with
    root = gamma^(1/(M-1)) so that equal means give exactly 1/K.
    """
    mu = np.maximum(np.asarray(est_means, dtype=float), 1e-12)
    K = mu.size
    if M < 2:
        raise DomainError("punishment needs M >= 2")
    top = np.sort(mu)[::-1][:M]
    expo = 1.0 / (M - 1)
    if delta:
        c = ((1.0 + delta) / (1.0 - delta)) ** (2.0 * expo)
        root = (1.0 - 1.0 / K) * c
        one_minus_root = 1.0 / K - (1.0 - 1.0 / K) * (c - 1.0)
    else:
        root = 1.0 - 1.0 / K
        one_minus_root = 1.0 / K
    ratio = (top[:, None] / mu[None, :]).mean(axis=0)
    p = one_minus_root + root * (1.0 - ratio**expo)
    return np.maximum(p, 0.0)


def punishment_probs(est_means, M: int, delta: float = 0.0) -> np.ndarray:
    """Sampling distribution used during punishment.

    The raw vector sums to at most one; a deficient vector is rescaled to a
    full distribution, an all-zero vector becomes uniform.
    """
    p = raw_punishment_probs(est_means, M, delta)
    s = p.sum()
    if s <= 0:
        return np.full(p.size, 1.0 / p.size)
    if s < 1.0 - 1e-12:
        p = p / s
    return p


@dataclass
class MultPrecisionState:
    delta: float
    logT: float
    n: int = 0
    mean: float = 0.0
    sumsq: float = 0.0
    s: float = 0.0
    stopped: bool = False


def mult_precision_step(state: MultPrecisionState, x: float) -> tuple[MultPrecisionState, bool]:
    """Feed one sample; report whether the stopping rule fires at this sample."""
    state.n += 1
    n = state.n
    state.mean += (x - state.mean) / n
    state.sumsq += x * x
    if n < 2:
        state.s = 0.0
        return state, False
    state.s = math.sqrt(max(state.sumsq - n * state.mean**2, 0.0) / (n - 1))
    rhs = 2.0 * state.s * math.sqrt(state.logT / n) + 14.0 * state.logT / (3.0 * (n - 1))
    stop = state.delta * state.mean >= rhs
    state.stopped = state.stopped or stop
    return state, stop


def first_stop(samples, delta: float, logT: float, n0: int = 0, sum0: float = 0.0,
               sumsq0: float = 0.0) -> int:
    """Index of the first sample at which the stopping rule fires, or -1.

    `n0, sum0, sumsq0` are statistics of samples already absorbed. Sums are
    accumulated sequentially, so feeding a stream in pieces or at once gives
    the same answer.
    """
    x = np.asarray(samples, dtype=float)
    if x.size == 0:
        return -1
    n = n0 + np.arange(1, x.size + 1, dtype=float)
    sm = np.cumsum(np.concatenate(([sum0], x)))[1:]
    sq = np.cumsum(np.concatenate(([sumsq0], x * x)))[1:]
    with np.errstate(divide="ignore", invalid="ignore"):
        mean = sm / n
        var = np.maximum(sq - n * mean * mean, 0.0) / (n - 1)
        rhs = 2.0 * np.sqrt(var) * np.sqrt(logT / n) + 14.0 * logT / (3.0 * (n - 1))
    ok = (n >= 2) & (delta * mean >= rhs)
    hits = np.flatnonzero(ok)
    return int(hits[0]) if hits.size else -1


def min_samples_to_stop(n: int, s: float, delta: float, logT: float, ss: float = 0.0) -> int:
    """Smallest m >= 1 such that the rule could fire at the (n+m)-th sample.

    Optimistic bound: all future samples equal 1, which maximizes the mean,
    while the sum of squared deviations keeps at least its current value
    `ss` (adding points never lowers it). Used only to size look-ahead
    windows, never to decide stopping.
    """
    c = 14.0 * logT / 3.0
    ss = max(ss, 0.0)

    def possible(m: int) -> bool:
        t = n + m
        if t < 2:
            return False
        spread = 2.0 * math.sqrt(ss / (t - 1) * logT / t)
        return delta * (s + m) / t >= (spread + c / (t - 1)) * (1 - 1e-9)

    if possible(1):
        return 1
    hi = 2
    while not possible(hi):
        hi *= 2
        if hi > 1 << 40:
            return hi
    lo = hi // 2
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if possible(mid):
            hi = mid
        else:
            lo = mid
    return hi


def mult_precision_bound(delta: float, mu: float, T: float) -> int:
    """Sample-size bound n0 for the multiplicative-precision rule."""
    lt = math.log(T)
    inner = math.sqrt(9.0 / delta**2 + 96.0 / delta + 85.0) + 3.0 / delta + 1.0
    return math.ceil(2.0 / (3.0 * delta * mu) * lt * inner) + 2


def round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))
