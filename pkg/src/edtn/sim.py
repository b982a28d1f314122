"""Deterministic discrete-event engine for one mule and one field node.

Events execute in ``(time, seq)`` order; ``seq`` is the insertion counter so
ties resolve the same way on every run. Protocol rounds are computed by
:func:`edtn.protocol.contact_round` and their trace records are replayed
through the queue, which keeps the trace time-ordered even when bundles are
created mid-contact.
"""

from __future__ import annotations

import heapq
import itertools
import random
from dataclasses import dataclass, field, replace
from typing import Any, Callable

from edtn.energy_store import EnergyStore
from edtn.link_models import AUTO_LOGIN, POWER_UP, SOM_SHUTDOWN
from edtn.protocol import (
    DmState,
    FanState,
    ProtocolConfig,
    contact_round,
    dm_can_negotiate,
    fan_end_contact,
)
from edtn.scenario import Contact, Scenario
from edtn.trace import DM, FAN, EventKind, Metrics, TraceRecord, compute_metrics

# Offsets the GPRS-failure stream from the message-loss stream.
_GPRS_STREAM = 0x9E3779B9


@dataclass(order=True)
class Event:
    time: float
    seq: int
    kind: str = field(compare=False)
    payload: Any = field(compare=False, default=None)


@dataclass
class SimResult:
    trace: list[TraceRecord]
    metrics: Metrics
    fan: FanState
    dm: DmState
    seed: int


class Simulator:
    def __init__(self, scenario: Scenario, seed: int | None = None) -> None:
        self.scenario = scenario
        self.seed = scenario.seed if seed is None else seed
        self.rng = random.Random(self.seed)
        self.gprs_rng = random.Random(self.seed + _GPRS_STREAM)
        self.cfg: ProtocolConfig = scenario.protocol
        self.fan = FanState(store=EnergyStore(scenario.fan_capacitor))
        self.dm = DmState(
            store=EnergyStore(scenario.capacitor),
            reserve=scenario.dm_reserve,
            round_budget=scenario.round_budget,
        )
        self.trace: list[TraceRecord] = []
        self._queue: list[Event] = []
        self._seq = itertools.count()
        self.now = 0.0
        self._handlers: dict[str, Callable[[Event], None]] = {
            "offer": self._on_offer,
            "ride_start": self._on_ride_start,
            "ride_end": self._on_ride_end,
            "contact_start": self._on_contact_start,
            "round": self._on_round,
            "contact_end": self._on_contact_end,
            "emit": self._on_emit,
        }

    def schedule(self, time: float, kind: str, payload: Any = None) -> None:
        if time < self.now:
            raise ValueError(f"cannot schedule {kind} in the past ({time} < {self.now})")
        heapq.heappush(self._queue, Event(time, next(self._seq), kind, payload))

    def emit(self, record: TraceRecord) -> None:
        self.schedule(record.time, "emit", record)

    def run(self) -> SimResult:
        for b in sorted(self.scenario.workload, key=lambda b: (b.created_at, b.id)):
            self.schedule(b.created_at, "offer", b)
        for start, end, leg in self.scenario.ride_intervals():
            if leg.speed_kmh > 0 and leg.duration_s > 0:
                self.schedule(start, "ride_start", leg)
                self.schedule(end, "ride_end", leg)
        for contact in sorted(self.scenario.contacts, key=lambda c: c.start_s):
            self.schedule(contact.start_s, "contact_start", contact)
        while self._queue:
            ev = heapq.heappop(self._queue)
            self.now = ev.time
            self._handlers[ev.kind](ev)
        return SimResult(self.trace, compute_metrics(self.trace), self.fan, self.dm, self.seed)

    # -- handlers ------------------------------------------------------------

    def _on_emit(self, ev: Event) -> None:
        self.trace.append(ev.payload)

    def _dm_record(self, kind: EventKind, delta: float = 0.0, bundle_id=None, tech=None, t=None) -> TraceRecord:
        return TraceRecord(self.now if t is None else t, DM, kind, bundle_id, tech, delta, self.dm.store.voltage)

    def _on_offer(self, ev: Event) -> None:
        b = ev.payload
        self.fan.queue.append(b)
        self.trace.append(TraceRecord(self.now, FAN, EventKind.BUNDLE_OFFERED, b.id, None, 0.0, self.fan.store.voltage))

    def _on_ride_start(self, ev: Event) -> None:
        self.trace.append(self._dm_record(EventKind.RIDE_START))

    def _on_ride_end(self, ev: Event) -> None:
        leg = ev.payload
        dyn = self.scenario.dynamo
        stored, _ = self.dm.store.harvest(dyn.power(leg.speed_kmh), leg.duration_s, dyn.efficiency)
        self.trace.append(self._dm_record(EventKind.RIDE_END, stored))

    def _on_contact_start(self, ev: Event) -> None:
        contact: Contact = ev.payload
        self.trace.append(self._dm_record(EventKind.CONTACT_START))
        power_up, login = self.cfg.phase(POWER_UP), self.cfg.phase(AUTO_LOGIN)
        boot_j = power_up.joules + login.joules
        ready = self.now + power_up.seconds + login.seconds
        affordable = self.dm.store.usable >= boot_j + self.dm.reserve + self.cfg.negotiation_energy
        if not affordable or ready + self.cfg.negotiation_latency > contact.end_s:
            # mule cannot boot and negotiate within this contact: stays dark
            self.schedule(self.now, "contact_end", (contact, False))
            return
        t = self.now
        for phase in (power_up, login):
            self.dm.store.draw(phase.joules, phase.label)
            t += phase.seconds
            self.emit(self._dm_record(EventKind.PHASE_COST, -phase.joules, t=t))
        self.schedule(ready, "round", contact)

    def _on_round(self, ev: Event) -> None:
        contact: Contact = ev.payload
        cfg = self._contact_config(contact)
        result = contact_round(self.fan, self.dm, cfg, self.now, contact.end_s, self.rng, self.gprs_rng)
        for rec in result.records:
            self.emit(rec)
        if result.another and dm_can_negotiate(self.dm, cfg):
            self.schedule(result.end_time, "round", contact)
        else:
            self.schedule(result.end_time, "contact_end", (contact, True))

    def _on_contact_end(self, ev: Event) -> None:
        contact, booted = ev.payload
        for b in fan_end_contact(self.fan):
            self.emit(TraceRecord(self.now, FAN, EventKind.REQUEUE, b.id, None, 0.0, self.fan.store.voltage))
        self.emit(self._dm_record(EventKind.CONTACT_END))
        if booted:
            shutdown = self.cfg.phase(SOM_SHUTDOWN)
            self.dm.store.draw(shutdown.joules, shutdown.label)
            self.emit(self._dm_record(EventKind.PHASE_COST, -shutdown.joules, t=self.now + shutdown.seconds))

    def _contact_config(self, contact: Contact) -> ProtocolConfig:
        if not contact.channel_quality:
            return self.cfg
        return replace(self.cfg, channel_quality={**self.cfg.channel_quality, **contact.channel_quality})


def run(scenario: Scenario, seed: int | None = None) -> SimResult:
    """Run ``scenario`` to quiescence. Same scenario and seed, same trace."""
    return Simulator(scenario, seed).run()
