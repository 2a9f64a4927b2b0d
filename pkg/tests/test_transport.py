import pytest
from hypothesis import given
from hypothesis import strategies as st

from specdec.transport import (
    CSV_COLUMNS,
    Channel,
    CostLedger,
    DetachedPartyError,
    NetworkModel,
    estimate_latency,
)


def test_transfer_bytes_counted():
    ch = Channel()
    out = ch.transfer(b"x" * 100, "c2s", "p")
    assert out == b"x" * 100
    assert ch.ledger.bytes_client_to_server == 100
    assert ch.inbox["server"][0].payload == out


def test_same_direction_is_one_round():
    ch = Channel()
    ch.transfer(b"a", "c2s", "p")
    ch.transfer(b"b", "c2s", "p")
    assert ch.ledger.rounds == 1


def test_ping_pong_rounds():
    ch = Channel()
    for d in ("c2s", "s2c", "c2s"):
        ch.transfer(b"a", d, "p")
    assert ch.ledger.rounds == 3


def test_barrier_starts_round():
    ch = Channel()
    ch.transfer(b"a", "c2s", "p")
    ch.barrier()
    ch.transfer(b"a", "c2s", "p")
    assert ch.ledger.rounds == 2


def test_detached_party():
    ch = Channel()
    ch.detach("server")
    with pytest.raises(DetachedPartyError):
        ch.transfer(b"a", "c2s", "p")


def test_latency_examples():
    led = CostLedger(rounds=10)
    assert estimate_latency(led, NetworkModel.from_mbps_ms(1000, 10)) == pytest.approx(0.1)
    led = CostLedger(bits_c2s=10**6)
    assert estimate_latency(led, NetworkModel.from_mbps_ms(1000, 10)) == pytest.approx(0.001)
    led = CostLedger(rounds=100, bits_c2s=50 * 10**6)
    assert estimate_latency(led, NetworkModel.from_mbps_ms(400, 40), 1.0) == pytest.approx(5.125)


@given(st.integers(0, 1000), st.integers(0, 10**9), st.floats(0, 100), st.integers(1, 100))
def test_latency_monotone(rounds, bits, compute, extra):
    net = NetworkModel.from_mbps_ms(400, 40)
    base = estimate_latency(CostLedger(rounds=rounds, bits_c2s=bits), net, compute)
    assert estimate_latency(CostLedger(rounds=rounds + extra, bits_c2s=bits), net, compute) > base
    assert estimate_latency(CostLedger(rounds=rounds, bits_c2s=bits + extra), net, compute) > base
    assert estimate_latency(CostLedger(rounds=rounds, bits_c2s=bits), net, compute + extra) > base


def test_network_validation():
    with pytest.raises(ValueError):
        NetworkModel(0, 0.01)
    with pytest.raises(ValueError):
        NetworkModel(1e9, -1)


def test_phase_totals_and_csv():
    ch = Channel()
    ch.transfer(b"abcd", "c2s", "one")
    ch.send("server", None, 3, "two")
    led = ch.ledger
    assert led.check_totals()
    lines = led.to_csv().splitlines()
    assert lines[0] == ",".join(CSV_COLUMNS)
    assert lines[1] == "one,1,4,0,0"
    assert lines[2] == "two,1,0,0.375,0"


def test_merge():
    a, b = Channel(), Channel()
    a.transfer(b"ab", "c2s", "x")
    b.transfer(b"abc", "s2c", "x")
    a.ledger.merge(b.ledger)
    assert a.ledger.total_bytes == 5 and a.ledger.rounds == 2 and a.ledger.check_totals()


def test_transcript_filter():
    ch = Channel()
    ch.send("client", None, 5, "ot", functionality=True)
    ch.send("client", b"x", 8, "msg")
    assert ch.transcript("server") == [("ot", 5, True), ("msg", 8, False)]
    assert ch.transcript("server", include_functionality=False) == [("msg", 8, False)]
