"""Trace records, their CSV form, and metrics folded from a trace.

Floats in the trace CSV use Python's shortest round-trip ``repr`` so a parsed
trace is bit-identical to the in-memory one; human-facing outputs (metrics,
tables) are rounded to 6 significant digits instead.
"""

from __future__ import annotations

import csv
import enum
import io
import json
import math
from collections.abc import Iterable, Sequence
from dataclasses import asdict, dataclass
from pathlib import Path

CSV_COLUMNS = ("time_s", "node", "event", "bundle_id", "tech", "energy_delta_j", "cap_voltage_v")

FAN = "FAN"
DM = "DM"


class EventKind(str, enum.Enum):
    BUNDLE_OFFERED = "BundleOffered"
    RIDE_START = "RideStart"
    RIDE_END = "RideEnd"
    CONTACT_START = "ContactStart"
    PHASE_COST = "PhaseCost"
    NEGOTIATION_DONE = "NegotiationDone"
    BUNDLE_SENT = "BundleSent"
    BUNDLE_RECEIVED = "BundleReceived"
    BUNDLE_LOST = "BundleLost"
    GPRS_FLUSH = "GprsFlush"
    FLUSH_FAILED = "FlushFailed"
    SERVER_DELIVERED = "ServerDelivered"
    ACK_DELIVERED = "AckDelivered"
    ACK_LOST = "AckLost"
    ACK_IGNORED = "AckIgnored"
    FAN_DELETE = "FanDelete"
    REQUEUE = "Requeue"
    CONTACT_END = "ContactEnd"

    def __str__(self) -> str:
        return self.value


class MalformedTrace(ValueError):
    pass


@dataclass(frozen=True)
class TraceRecord:
    time: float
    node: str
    event: EventKind
    bundle_id: int | None = None
    tech: str | None = None
    energy_delta: float = 0.0
    cap_voltage: float | None = None


def fmt6(x: float) -> str:
    """6-significant-digit formatting used by every human-facing output."""
    if x == 0:
        return "0"
    return f"{x:.6g}"


def _opt(x) -> str:
    return "" if x is None else (repr(x) if isinstance(x, float) else str(x))


def write_csv(records: Iterable[TraceRecord], path: str | Path | None = None) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for r in records:
        w.writerow(
            [
                repr(float(r.time)),
                r.node,
                r.event.value,
                _opt(r.bundle_id),
                _opt(r.tech),
                repr(float(r.energy_delta)),
                _opt(r.cap_voltage),
            ]
        )
    text = buf.getvalue()
    if path is not None:
        Path(path).write_text(text, encoding="utf-8", newline="")
    return text


def parse_csv(text: str) -> list[TraceRecord]:
    rows = list(csv.reader(io.StringIO(text)))
    if not rows or tuple(rows[0]) != CSV_COLUMNS:
        raise MalformedTrace(f"expected header {','.join(CSV_COLUMNS)}")
    out = []
    for lineno, row in enumerate(rows[1:], start=2):
        if len(row) != len(CSV_COLUMNS):
            raise MalformedTrace(f"line {lineno}: expected {len(CSV_COLUMNS)} fields")
        t, node, event, bid, tech, de, volt = row
        try:
            kind = EventKind(event)
        except ValueError:
            raise MalformedTrace(f"line {lineno}: unknown event {event!r}") from None
        try:
            out.append(
                TraceRecord(
                    float(t),
                    node,
                    kind,
                    int(bid) if bid else None,
                    tech or None,
                    float(de),
                    float(volt) if volt else None,
                )
            )
        except ValueError as exc:
            raise MalformedTrace(f"line {lineno}: {exc}") from None
    return out


def read_csv(path: str | Path) -> list[TraceRecord]:
    return parse_csv(Path(path).read_text(encoding="utf-8"))


@dataclass(frozen=True)
class Metrics:
    bundles_offered: int = 0
    bundles_delivered: int = 0
    server_duplicates: int = 0
    mean_latency_s: float = 0.0
    max_latency_s: float = 0.0
    dm_energy_j: float = 0.0
    fan_energy_j: float = 0.0
    harvested_j: float = 0.0
    energy_per_delivered_bundle_j: float = 0.0
    dm_active_time_s: float = 0.0
    rounds: int = 0
    contacts: int = 0

    def as_document(self, **extra) -> dict:
        doc = {k: (float(fmt6(v)) if isinstance(v, float) else v) for k, v in asdict(self).items()}
        doc.update(extra)
        return doc

    def to_json(self, **extra) -> str:
        return json.dumps(self.as_document(**extra), indent=2, sort_keys=True) + "\n"


def compute_metrics(trace: Sequence[TraceRecord]) -> Metrics:
    """Fold a trace into summary metrics.

    Latency of a delivered bundle runs from the send that reached the server
    to the first ServerDelivered record for it.
    """
    last_time = -math.inf
    offered = rounds = contacts = 0
    last_sent: dict[int, float] = {}
    latencies: dict[int, float] = {}
    server_hits = 0
    consumed = {DM: 0.0, FAN: 0.0}
    harvested = 0.0
    active = 0.0
    contact_open: float | None = None
    last_dm_time = 0.0

    def close_contact() -> None:
        nonlocal active, contact_open
        if contact_open is not None:
            active += last_dm_time - contact_open
            contact_open = None

    for r in trace:
        if r.time < last_time:
            raise MalformedTrace(f"time goes backwards at {r.time} ({r.event})")
        last_time = r.time
        if r.energy_delta < 0:
            consumed[r.node] = consumed.get(r.node, 0.0) - r.energy_delta
        elif r.energy_delta > 0:
            harvested += r.energy_delta
        kind = r.event
        if kind in (EventKind.CONTACT_START, EventKind.RIDE_START):
            close_contact()
        if kind is EventKind.CONTACT_START:
            contacts += 1
            contact_open = r.time
        if r.node == DM:
            last_dm_time = r.time
        if kind is EventKind.BUNDLE_OFFERED:
            offered += 1
        elif kind is EventKind.NEGOTIATION_DONE:
            rounds += 1
        elif kind is EventKind.BUNDLE_SENT:
            last_sent[r.bundle_id] = r.time
        elif kind is EventKind.SERVER_DELIVERED:
            server_hits += 1
            if r.bundle_id not in latencies:
                if r.bundle_id not in last_sent:
                    raise MalformedTrace(f"bundle {r.bundle_id} delivered before being sent")
                latencies[r.bundle_id] = r.time - last_sent[r.bundle_id]
    close_contact()

    delivered = len(latencies)
    lat = list(latencies.values())
    total = consumed[DM] + consumed[FAN]
    return Metrics(
        bundles_offered=offered,
        bundles_delivered=delivered,
        server_duplicates=server_hits - delivered,
        mean_latency_s=math.fsum(lat) / delivered if delivered else 0.0,
        max_latency_s=max(lat, default=0.0),
        dm_energy_j=consumed[DM],
        fan_energy_j=consumed[FAN],
        harvested_j=harvested,
        energy_per_delivered_bundle_j=total / delivered if delivered else 0.0,
        dm_active_time_s=active,
        rounds=rounds,
        contacts=contacts,
    )
