"""Collision-bit communication.

A sender transmits bit 1 by pulling the receiver's arm (forcing a
collision) and bit 0 by pulling its own arm. A third party can only add
collisions, so corruption turns zeros into ones and never the reverse;
echoing the message back lets the sender detect any tampering.

The functions here come in two flavors: pure schedule/decoder helpers and
generator sub-machines that players drive round by round through
`yield from`. A sub-machine reads the current round from `clock.t`.
"""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

from .common import rr


class EncodingError(ValueError):
    pass


@dataclass(frozen=True)
class BitMessage:
    bits: tuple

    @property
    def value(self) -> float:
        return bits_value(self.bits)


@dataclass(frozen=True)
class CommOutcome:
    received: BitMessage
    echo: BitMessage
    corrupted: bool


def dyadic_bits(value: float, p: int) -> tuple:
    """Bits (m_0, ..., m_p) with value = sum m_n 2^-n. Accepts [0, 2)."""
    f = Fraction(value)
    scaled = f * (1 << p)
    if scaled.denominator != 1:
        raise EncodingError(f"{value!r} is not on the 2^-{p} grid")
    n = scaled.numerator
    if n < 0 or n >= 1 << (p + 1):
        raise EncodingError(f"{value!r} does not fit in {p + 1} bits")
    return tuple((n >> (p - i)) & 1 for i in range(p + 1))


def bits_value(bits) -> float:
    return sum(2.0 ** -i for i, b in enumerate(bits) if b)


def send_value_schedule(own_arm: int, receiver_arm: int, p: int, value: float) -> list:
    """Arms pulled by the sender, one per round."""
    return [receiver_arm if b else own_arm for b in dyadic_bits(value, p)]


def receive_value(collision_bits) -> float:
    return bits_value(collision_bits)


def corrupt(bits, flips) -> tuple:
    """What a receiver decodes when a third party collides at rounds `flips`."""
    flips = set(flips)
    return tuple(1 if (b or i in flips) else 0 for i, b in enumerate(bits))


def back_and_forth(p: int, value: float, flips_out=(), flips_back=()) -> CommOutcome:
    """Send, echo, compare; the channel corrupts at the given rounds."""
    sent = dyadic_bits(value, p)
    got = corrupt(sent, flips_out)
    echo = corrupt(got, flips_back)
    return CommOutcome(BitMessage(got), BitMessage(echo), echo != sent)


# ----------------------------------------------------------------------
# sub-machines

def send_bits(own_arm: int, receiver_arm: int, bits):
    for b in bits:
        yield receiver_arm if b else own_arm


def receive_bits(own_arm: int, nbits: int):
    """Sit on own arm for nbits rounds; return the decoded value."""
    v = 0.0
    for i in range(nbits):
        fb = yield own_arm
        if fb[1] == 1:
            v += 2.0 ** -i
    return v


def signal_set_leader(clock, rank: int, K: int, items):
    """Leader side: announce |S| by sitting on arm |S|-1, then each element."""
    items = sorted(items)
    for _ in range(K):
        yield len(items) - 1 if items else rr(clock.t, rank, K)
    for a in items:
        for _ in range(K):
            yield a
    return set(items), False


def signal_set_receiver(clock, rank: int, K: int):
    """Non-leader side: scan all arms to decode |S|, then each element.

    Returns (set, punish). Two different announced lengths or a decoded
    set whose size disagrees with the announced length both mean punish.
    """
    punish = False
    length = 0
    for _ in range(K):
        a = rr(clock.t, rank, K)
        fb = yield a
        if fb[1] == 1:
            if length:
                punish = True
            else:
                length = a + 1
    got = set()
    for _ in range(length):
        for _ in range(K):
            a = rr(clock.t, rank, K)
            fb = yield a
            if fb[1] == 1:
                got.add(a)
    if len(got) != length:
        punish = True
    return got, punish


class _Clock:
    def __init__(self):
        self.t = 0


def run_machines(machines, K: int, t0: int = 0, extra=None):
    """Drive sub-machines on an ideal channel; return their results.

    `extra` maps round offsets to arms pulled by an outside interferer.
    Machines are built by callables taking a clock.
    """
    clock = _Clock()
    clock.t = t0
    gens = [mk(clock) for mk in machines]
    out = [None] * len(gens)
    acts = []
    for i, g in enumerate(gens):
        try:
            acts.append(next(g))
        except StopIteration as e:
            acts.append(None)
            out[i] = e.value
    step = 0
    while any(a is not None for a in acts):
        pulled = [a for a in acts if a is not None]
        intr = (extra or {}).get(step)
        if intr is not None:
            pulled.append(intr)
        clock.t += 1
        for i, g in enumerate(gens):
            a = acts[i]
            if a is None:
                continue
            eta = 1 if pulled.count(a) > 1 else 0
            try:
                acts[i] = g.send((1.0, eta, 0.0 if eta else 1.0))
            except StopIteration as e:
                acts[i] = None
                out[i] = e.value
        step += 1
    return out


def signal_set(K: int, M: int, leader_sets, t0: int = 0, extra=None):
    """Broadcast from leaders 0 and 1 to ranks 2..M-1.

    Returns one (set, punish) pair per rank.
    """
    machines = []
    for r in range(M):
        if r < 2:
            machines.append(lambda c, r=r: signal_set_leader(c, r, K, leader_sets[r]))
        else:
            machines.append(lambda c, r=r: signal_set_receiver(c, r, K))
    return run_machines(machines, K, t0, extra)
