"""In-process two-party channel with bit-exact cost accounting.

Both parties run in one Python process. Protocol code keeps each party's
state in separately named variables and moves anything that crosses the
party boundary through ``Channel.send``; program order is the (lockstep)
schedule. Counters are kept in bits because OT costs are not byte aligned.
"""

from __future__ import annotations

import csv
import io
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Any, Literal

Direction = Literal["c2s", "s2c"]
PARTIES = ("client", "server")

CSV_COLUMNS = ("phase", "rounds", "bytes_c2s", "bytes_s2c", "ot_calls")


class DetachedPartyError(RuntimeError):
    pass


@dataclass
class PhaseCost:
    rounds: int = 0
    bits_c2s: int = 0
    bits_s2c: int = 0
    ot_calls: int = 0

    @property
    def bits(self) -> int:
        return self.bits_c2s + self.bits_s2c


@dataclass
class OtRecord:
    """Audit entry for a batch of ``count`` identical 1-out-of-k OTs."""

    k: int
    bitlen: int
    count: int
    bits: int
    rounds: int
    phase: str


@dataclass
class CostLedger:
    rounds: int = 0
    bits_c2s: int = 0
    bits_s2c: int = 0
    ot_invocations: int = 0
    compute_seconds: float = 0.0
    phases: dict[str, PhaseCost] = field(default_factory=lambda: defaultdict(PhaseCost))
    ot_log: list[OtRecord] = field(default_factory=list)

    @property
    def bytes_client_to_server(self) -> float:
        return self.bits_c2s / 8

    @property
    def bytes_server_to_client(self) -> float:
        return self.bits_s2c / 8

    @property
    def total_bits(self) -> int:
        return self.bits_c2s + self.bits_s2c

    @property
    def total_bytes(self) -> float:
        return self.total_bits / 8

    def charge_bits(self, direction: Direction, bits: int, phase: str) -> None:
        if bits < 0:
            raise ValueError("negative message size")
        entry = self.phases[phase]
        if direction == "c2s":
            self.bits_c2s += bits
            entry.bits_c2s += bits
        else:
            self.bits_s2c += bits
            entry.bits_s2c += bits

    def charge_round(self, phase: str, n: int = 1) -> None:
        self.rounds += n
        self.phases[phase].rounds += n

    def phase_bits(self, *names: str) -> int:
        return sum(self.phases[n].bits for n in names if n in self.phases)

    def snapshot(self) -> dict[str, Any]:
        return {
            "rounds": self.rounds,
            "bits_c2s": self.bits_c2s,
            "bits_s2c": self.bits_s2c,
            "ot_invocations": self.ot_invocations,
            "compute_seconds": self.compute_seconds,
        }

    def check_totals(self) -> bool:
        ph = self.phases.values()
        return (
            sum(p.rounds for p in ph) == self.rounds
            and sum(p.bits_c2s for p in ph) == self.bits_c2s
            and sum(p.bits_s2c for p in ph) == self.bits_s2c
            and sum(p.ot_calls for p in ph) == self.ot_invocations
        )

    def merge(self, other: CostLedger) -> None:
        self.rounds += other.rounds
        self.bits_c2s += other.bits_c2s
        self.bits_s2c += other.bits_s2c
        self.ot_invocations += other.ot_invocations
        self.compute_seconds += other.compute_seconds
        for name, p in other.phases.items():
            q = self.phases[name]
            q.rounds += p.rounds
            q.bits_c2s += p.bits_c2s
            q.bits_s2c += p.bits_s2c
            q.ot_calls += p.ot_calls
        self.ot_log.extend(other.ot_log)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        for name, p in self.phases.items():
            w.writerow([name, p.rounds, _fmt_bytes(p.bits_c2s), _fmt_bytes(p.bits_s2c), p.ot_calls])
        return buf.getvalue()


def _fmt_bytes(bits: int) -> str:
    # fractional bytes are exact in eighths; keep them rather than rounding
    return str(bits // 8) if bits % 8 == 0 else f"{bits / 8:.3f}"


@dataclass(frozen=True)
class NetworkModel:
    bandwidth: float  # bits per second
    one_way_delay: float  # seconds

    def __post_init__(self):
        if self.bandwidth <= 0:
            raise ValueError("bandwidth must be positive")
        if self.one_way_delay < 0:
            raise ValueError("one_way_delay must be nonnegative")

    @classmethod
    def from_mbps_ms(cls, mbps: float, delay_ms: float) -> NetworkModel:
        return cls(mbps * 1e6, delay_ms / 1e3)


LAN = NetworkModel.from_mbps_ms(1000, 10)
WAN = NetworkModel.from_mbps_ms(400, 40)


def estimate_latency(ledger: CostLedger, net: NetworkModel, compute_seconds: float = 0.0) -> float:
    return ledger.rounds * net.one_way_delay + ledger.total_bits / net.bandwidth + compute_seconds


@dataclass
class Message:
    src: str
    dst: str
    phase: str
    bits: int
    payload: Any = None
    functionality: bool = False


class Channel:
    """Message channel between ``client`` and ``server``.

    A new round starts whenever the direction flips or a barrier was set.
    Messages flagged ``functionality`` stand for traffic of an ideal
    sub-functionality (OT, comparison); they are charged like any other
    message but carry nothing derived from the other party's private input.
    """

    def __init__(self, ledger: CostLedger | None = None):
        self.ledger = ledger if ledger is not None else CostLedger()
        self.inbox: dict[str, list[Message]] = {p: [] for p in PARTIES}
        self._attached = set(PARTIES)
        self._last: Direction | None = None
        self._barrier = True

    def detach(self, party: str) -> None:
        self._attached.discard(party)

    def barrier(self) -> None:
        self._barrier = True

    def send(self, src: str, payload: Any, bits: int, phase: str, functionality: bool = False) -> Any:
        dst = "server" if src == "client" else "client"
        if src not in self._attached or dst not in self._attached:
            raise DetachedPartyError(f"{src} -> {dst}: party not attached")
        direction: Direction = "c2s" if src == "client" else "s2c"
        if self._barrier or direction != self._last:
            self.ledger.charge_round(phase)
            self._barrier = False
        self._last = direction
        self.ledger.charge_bits(direction, bits, phase)
        self.inbox[dst].append(Message(src, dst, phase, bits, payload, functionality))
        return payload

    def transfer(self, msg: bytes, direction: Direction, phase: str) -> bytes:
        src = "client" if direction == "c2s" else "server"
        return self.send(src, bytes(msg), 8 * len(msg), phase)

    def transcript(self, party: str, include_functionality: bool = True) -> list[tuple[str, int, bool]]:
        """Shape of everything ``party`` received: (phase, bits, functionality)."""
        return [
            (m.phase, m.bits, m.functionality)
            for m in self.inbox[party]
            if include_functionality or not m.functionality
        ]
