import pytest

from selfish_mmab.commproto import (EncodingError, back_and_forth, corrupt, dyadic_bits,
                                    receive_bits, receive_value, run_machines, send_bits,
                                    send_value_schedule, signal_set)


def collision_rounds(value, p):
    return [i for i, a in enumerate(send_value_schedule(0, 5, p, value)) if a == 5]


def test_zero_never_collides():
    assert collision_rounds(0.0, 4) == []


def test_one_collides_on_first_round_only():
    assert collision_rounds(1.0, 4) == [0]


def test_five_eighths():
    assert collision_rounds(0.625, 3) == [1, 3]
    assert receive_value(dyadic_bits(0.625, 3)) == 0.625


@pytest.mark.parametrize("value,p", [(0.3, 4), (2.0, 3), (-0.25, 2)])
def test_off_grid_rejected(value, p):
    with pytest.raises(EncodingError):
        dyadic_bits(value, p)


def test_corruption_only_adds_ones():
    assert corrupt((0, 0, 0, 0), [2]) == (0, 0, 1, 0)
    assert corrupt((1, 0, 1), [0, 1]) == (1, 1, 1)


def test_corrupted_zero_reads_quarter():
    out = back_and_forth(3, 0.0, flips_out=[2])
    assert out.received.value == 0.25
    assert out.corrupted


def test_clean_round_trip():
    out = back_and_forth(4, 0.6875)
    assert out.received.value == 0.6875 and out.echo.value == 0.6875
    assert not out.corrupted


def test_echo_leg_corruption_detected():
    assert back_and_forth(2, 0.5, flips_back=[0]).corrupted


def test_sub_machines_round_trip():
    bits = dyadic_bits(0.625, 3)
    got = run_machines([lambda c: send_bits(0, 1, bits), lambda c: receive_bits(1, 4)], K=3)
    assert got[1] == 0.625


def test_interferer_corrupts_sub_machines():
    bits = dyadic_bits(0.0, 3)
    got = run_machines([lambda c: send_bits(0, 1, bits), lambda c: receive_bits(1, 4)], K=3,
                       extra={2: 1})
    assert got[1] == 0.25


def test_signal_set_agreement():
    out = signal_set(6, 4, [{2, 5}, {2, 5}])
    assert out[0] == ({2, 5}, False) and out[1] == ({2, 5}, False)
    assert out[2] == ({2, 5}, False)
    assert out[3] == ({2, 5}, False)


def test_signal_set_empty():
    out = signal_set(5, 3, [set(), set()])
    assert out[2] == (set(), False)


def test_signal_set_length_mismatch_punishes():
    out = signal_set(6, 4, [{2, 5}, {2}])
    assert out[2][1] and out[3][1]


def test_signal_set_same_length_different_items_punishes():
    out = signal_set(6, 3, [{1, 2}, {1, 3}])
    assert out[2][1]


@pytest.mark.parametrize("t0", [0, 1, 7])
def test_signal_set_independent_of_start_round(t0):
    assert signal_set(5, 4, [{0, 4}, {0, 4}], t0=t0)[3] == ({0, 4}, False)
