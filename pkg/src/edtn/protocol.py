"""Energy-negotiated bundle transfer between the field node (FAN) and the mule (DM).

One contact runs rounds of: estimate energies, negotiate a bundle count and
link, send bundles, relay them over GPRS, ACK back, delete on ACK. Node state
is mutated only through the step functions here, in event order.
"""

from __future__ import annotations

import json
import math
import random
from collections import deque
from collections.abc import Callable, Mapping, Sequence
from dataclasses import dataclass, field

from edtn.energy_store import EnergyStore, Supercapacitor, usable_energy
from edtn.link_models import (
    DEFAULT_MODELS,
    LOCAL_TECHNOLOGIES,
    MODEM_STARTUP,
    SOM_SHUTDOWN,
    SOM_TO_GPRS,
    Bundle,
    LinkModels,
    Phase,
    Technology,
)
from edtn.trace import DM, FAN, EventKind, TraceRecord

__all__ = [
    "Ack",
    "BundleCost",
    "BundleMsg",
    "DmState",
    "EnergyEstimate",
    "FanState",
    "Flush",
    "NegReq",
    "NegResp",
    "NegotiationInputs",
    "NegotiationOutcome",
    "ProtocolConfig",
    "RoundResult",
    "SendBundle",
    "apply_loss",
    "contact_round",
    "dm_receive_bundle",
    "estimate_energy",
    "fan_begin_contact",
    "fan_end_contact",
    "fan_on_ack",
    "negotiate",
]

NEGOTIATION_LATENCY_S = 6.0


# -- wire messages -----------------------------------------------------------


@dataclass(frozen=True)
class NegReq:
    e_dm: float
    channel_qualities: dict[str, float]
    type = "NEG_REQ"


@dataclass(frozen=True)
class NegResp:
    n: int
    tech: str | None
    type = "NEG_RESP"


@dataclass(frozen=True)
class BundleMsg:
    id: int
    size: int
    type = "BUNDLE"


@dataclass(frozen=True)
class Ack:
    id: int
    type = "ACK"


_MESSAGES = {cls.type: cls for cls in (NegReq, NegResp, BundleMsg, Ack)}
_FIELDS = {
    "NEG_REQ": ("e_dm", "channel_qualities"),
    "NEG_RESP": ("n", "tech"),
    "BUNDLE": ("id", "size"),
    "ACK": ("id",),
}


def encode(msg) -> str:
    body = {"type": msg.type}
    for name in _FIELDS[msg.type]:
        value = getattr(msg, name)
        if isinstance(value, dict):
            value = {k: value[k] for k in sorted(value)}
        body[name] = value
    return json.dumps(body, separators=(",", ":"))


def decode(text: str):
    body = json.loads(text)
    kind = body.pop("type", None)
    if kind not in _MESSAGES:
        raise ValueError(f"unknown message type {kind!r}")
    if set(body) != set(_FIELDS[kind]):
        raise ValueError(f"{kind}: expected fields {_FIELDS[kind]}, got {tuple(body)}")
    return _MESSAGES[kind](**body)


# -- energy estimate & negotiation ------------------------------------------


@dataclass(frozen=True)
class EnergyEstimate:
    node: str
    available: float


def estimate_energy(store: EnergyStore | Supercapacitor, reserve: float, node: str = DM) -> EnergyEstimate:
    if reserve < 0:
        raise ValueError(f"reserve must be non-negative, got {reserve}")
    usable = store.usable if isinstance(store, EnergyStore) else usable_energy(store)
    return EnergyEstimate(node, max(0.0, usable - reserve))


@dataclass(frozen=True)
class NegotiationInputs:
    e_dm: float
    e_fan: float
    data_rate_hint: Mapping[Technology, float] = field(default_factory=dict)
    # carried for completeness; no default cost model consumes it
    transmit_power: float = 1.0
    channel_quality: Mapping[Technology, float] = field(
        default_factory=lambda: {t: 1.0 for t in LOCAL_TECHNOLOGIES}
    )

    def __post_init__(self) -> None:
        if self.e_dm < 0 or self.e_fan < 0:
            raise ValueError("energies must be non-negative")
        for tech, q in self.channel_quality.items():
            if not 0.0 <= q <= 1.0:
                raise ValueError(f"channel quality for {tech} must lie in [0, 1], got {q}")


@dataclass(frozen=True)
class BundleCost:
    dm: float
    fan: float
    seconds: float
    link_seconds: float = 0.0


CostFn = Callable[[Technology, Bundle], BundleCost]


@dataclass(frozen=True)
class NegotiationOutcome:
    n: int
    tech: Technology | None
    costs: tuple[BundleCost, ...] = ()
    total_time: float = 0.0

    @property
    def per_bundle_dm_cost(self) -> float:
        return math.fsum(c.dm for c in self.costs) / self.n if self.n else 0.0

    @property
    def per_bundle_fan_cost(self) -> float:
        return math.fsum(c.fan for c in self.costs) / self.n if self.n else 0.0


def link_cost_fn(
    models: LinkModels = DEFAULT_MODELS,
    channel_quality: Mapping[Technology, float] | None = None,
    dm_overhead: Phase | None = None,
) -> CostFn:
    """Per-bundle cost model built from the link models.

    Channel quality q divides the effective data rate, so link time (and
    with it link energy) scales by 1/q. The DM additionally pays the GPRS
    flushes and an optional fixed per-bundle overhead.
    """
    quality = dict(channel_quality or {})
    extra_j = dm_overhead.joules if dm_overhead else 0.0
    extra_s = dm_overhead.seconds if dm_overhead else 0.0

    def cost(tech: Technology, bundle: Bundle) -> BundleCost:
        q = quality.get(tech, 1.0)
        link_s = models.transfer_time(tech, bundle.size) / q if q > 0 else math.inf
        link_j = models.active_watts[tech] * link_s
        gprs_s, gprs_j = models.gprs.bundle_cost(bundle.packets)
        return BundleCost(
            dm=link_j + gprs_j + extra_j,
            fan=link_j,
            seconds=link_s + extra_s + gprs_s,
            link_seconds=link_s,
        )

    return cost


def _greedy_prefix(costs: Sequence[BundleCost], e_dm: float, e_fan: float, time_budget: float) -> int:
    rd, rf, rt = e_dm, e_fan, time_budget
    n = 0
    for c in costs:
        if c.dm > rd or c.fan > rf or c.seconds > rt:
            break
        rd -= c.dm
        rf -= c.fan
        rt -= c.seconds
        n += 1
    return n


def _headroom(e: float, total: float) -> float:
    if total == 0:
        return math.inf
    return e / total


def negotiate(
    inputs: NegotiationInputs,
    pending: Sequence[Bundle],
    models: LinkModels = DEFAULT_MODELS,
    *,
    costs: CostFn | None = None,
    eligibility: float = 0.2,
    time_budget: float = math.inf,
) -> NegotiationOutcome:
    """Pick how many queued bundles to move and over which local link.

    For every eligible link the committed count is the longest queue prefix
    whose summed DM and FAN costs stay within ``e_dm`` and ``e_fan`` (and the
    time budget). The link with the largest count wins; ties go to the link
    whose budgets cover the larger fraction of the whole queue, then to the
    shorter total transfer time, then Wi-Fi before Bluetooth.
    """
    if costs is None:
        costs = link_cost_fn(models, inputs.channel_quality)
    candidates = []
    for order, tech in enumerate(LOCAL_TECHNOLOGIES):
        if tech not in models.anchors:
            continue
        if inputs.channel_quality.get(tech, 0.0) < eligibility:
            continue
        per_bundle = [costs(tech, b) for b in pending]
        n = _greedy_prefix(per_bundle, inputs.e_dm, inputs.e_fan, time_budget)
        headroom = min(
            _headroom(inputs.e_dm, math.fsum(c.dm for c in per_bundle)),
            _headroom(inputs.e_fan, math.fsum(c.fan for c in per_bundle)),
        ) if per_bundle else 0.0
        committed = tuple(per_bundle[:n])
        total_time = math.fsum(c.link_seconds for c in committed)
        candidates.append(((n, headroom, -total_time, -order), tech, committed, total_time))
    if not candidates:
        return NegotiationOutcome(0, None)
    _, tech, committed, total_time = max(candidates, key=lambda c: c[0])
    return NegotiationOutcome(len(committed), tech, committed, total_time)


# -- node state machines -----------------------------------------------------


@dataclass
class FanState:
    store: EnergyStore = field(default_factory=EnergyStore)
    queue: deque[Bundle] = field(default_factory=deque)
    awaiting_ack: dict[int, Bundle] = field(default_factory=dict)
    deleted: set[int] = field(default_factory=set)
    reserve: float = 0.0


@dataclass
class DmState:
    store: EnergyStore
    reserve: float = 85.0
    # cap on the energy offered per request; None offers everything available
    round_budget: float | None = None
    inbox: list[Bundle] = field(default_factory=list)
    gprs_pending: int = 0
    # bundle id -> flushes still outstanding
    _flushes_left: dict[int, int] = field(default_factory=dict)


@dataclass(frozen=True)
class SendBundle:
    bundle: Bundle
    tech: Technology
    cost: BundleCost


@dataclass(frozen=True)
class Flush:
    bundle_id: int
    packets: int
    seconds: float
    joules: float
    last: bool


def fan_begin_contact(state: FanState, outcome: NegotiationOutcome) -> list[SendBundle]:
    """Move the first ``n`` queued bundles to awaiting-ACK and debit their send cost."""
    if outcome.n > len(state.queue):
        raise ValueError(f"outcome commits {outcome.n} bundles but only {len(state.queue)} queued")
    actions = []
    for cost in outcome.costs:
        bundle = state.queue[0]
        state.store.draw(cost.fan, f"send:{bundle.id}")
        state.queue.popleft()
        state.awaiting_ack[bundle.id] = bundle
        actions.append(SendBundle(bundle, outcome.tech, cost))
    return actions


def dm_receive_bundle(state: DmState, bundle: Bundle, models: LinkModels = DEFAULT_MODELS) -> list[Flush]:
    """Queue a received bundle for GPRS upload; returns its flushes in order.

    Buffers flush at the configured size, and a trailing partial buffer
    flushes at bundle end so every bundle gets its own ACK.
    """
    sizes = models.gprs.flushes(bundle.packets)
    state.inbox.append(bundle)
    state.gprs_pending += bundle.packets
    state._flushes_left[bundle.id] = len(sizes)
    out = []
    for i, b in enumerate(sizes):
        seconds, joules = models.gprs.buffer_cost(b)
        out.append(Flush(bundle.id, b, seconds, joules, last=i == len(sizes) - 1))
    return out


def dm_flush(state: DmState, flush: Flush, ok: bool) -> Ack | None:
    """Execute one flush; returns the ACK once the bundle's last flush lands."""
    state.store.draw(flush.joules, f"gprs:{flush.bundle_id}")
    state.gprs_pending -= flush.packets
    if not ok:
        state._flushes_left.pop(flush.bundle_id, None)
        return None
    left = state._flushes_left.get(flush.bundle_id)
    if left is None:
        return None
    left -= 1
    if left == 0:
        del state._flushes_left[flush.bundle_id]
        return Ack(flush.bundle_id)
    state._flushes_left[flush.bundle_id] = left
    return None


def dm_abandon(state: DmState, bundle_id: int, packets: int) -> None:
    """Drop the unflushed remainder of a bundle whose upload failed."""
    state.gprs_pending -= packets
    state._flushes_left.pop(bundle_id, None)


def fan_on_ack(state: FanState, bundle_id: int) -> str:
    """Delete an acknowledged bundle. Returns ``deleted``, ``duplicate`` or ``unknown``."""
    if bundle_id in state.awaiting_ack:
        del state.awaiting_ack[bundle_id]
        state.deleted.add(bundle_id)
        return "deleted"
    if bundle_id in state.deleted:
        return "duplicate"
    return "unknown"


def fan_end_contact(state: FanState) -> list[Bundle]:
    """Return unacknowledged bundles to the head of the queue, oldest first."""
    pending = list(state.awaiting_ack.values())
    state.awaiting_ack.clear()
    state.queue.extendleft(reversed(pending))
    return pending


def apply_loss(rng: random.Random, p: float) -> bool:
    """One Bernoulli draw; True when the message is delivered.

    Always consumes exactly one value from ``rng``.
    """
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"loss probability must lie in [0, 1], got {p}")
    return rng.random() >= p


# -- one negotiation round ---------------------------------------------------


@dataclass
class ProtocolConfig:
    models: LinkModels = DEFAULT_MODELS
    negotiation_latency: float = NEGOTIATION_LATENCY_S
    # control exchange runs at Wi-Fi active power
    negotiation_watts: float = 42.0 / 13.0
    eligibility: float = 0.2
    channel_quality: dict[Technology, float] = field(
        default_factory=lambda: {t: 1.0 for t in LOCAL_TECHNOLOGIES}
    )
    transmit_power: float = 1.0
    loss: float = 0.0
    gprs_failure: float = 0.0
    gprs_blackouts: tuple[tuple[float, float], ...] = ()

    @property
    def negotiation_energy(self) -> float:
        return self.negotiation_watts * self.negotiation_latency

    def phase(self, label: str) -> Phase:
        p = self.models.phase_table.get(label)
        return p if p is not None else Phase(label, 0.0, 0.0)

    def in_blackout(self, start: float, end: float) -> bool:
        return any(s < end and start < e for s, e in self.gprs_blackouts)


@dataclass
class RoundResult:
    records: list[TraceRecord]
    end_time: float
    outcome: NegotiationOutcome
    another: bool


def _rec(store: EnergyStore, t: float, node: str, kind: EventKind, bundle_id=None, tech=None, delta=0.0) -> TraceRecord:
    return TraceRecord(t, node, kind, bundle_id, None if tech is None else str(tech), delta, store.voltage)


def dm_can_negotiate(dm: DmState, cfg: ProtocolConfig) -> bool:
    return dm.store.usable >= dm.reserve + cfg.negotiation_energy


def contact_round(
    fan: FanState,
    dm: DmState,
    cfg: ProtocolConfig,
    now: float,
    window_end: float,
    rng: random.Random,
    gprs_rng: random.Random | None = None,
) -> RoundResult:
    """Run one negotiate/transfer/relay/ACK round starting at ``now``.

    The caller must have checked :func:`dm_can_negotiate`. ``another`` tells
    the caller whether a fresh request is worthwhile: bundles remain, this
    round made progress, the DM can afford the head bundle and the window
    still has room.
    """
    gprs_rng = gprs_rng or rng
    records: list[TraceRecord] = []
    handoff = cfg.phase(SOM_TO_GPRS)
    startup = cfg.phase(MODEM_STARTUP)

    dm.store.draw(cfg.negotiation_energy, "negotiation")
    t = now + cfg.negotiation_latency
    e_dm = estimate_energy(dm.store, dm.reserve, DM).available
    if dm.round_budget is not None:
        e_dm = min(e_dm, dm.round_budget)
    e_fan = estimate_energy(fan.store, fan.reserve, FAN).available
    inputs = NegotiationInputs(e_dm, e_fan, transmit_power=cfg.transmit_power, channel_quality=cfg.channel_quality)
    costs = link_cost_fn(cfg.models, cfg.channel_quality, dm_overhead=handoff)
    pending = list(fan.queue)
    outcome = negotiate(
        inputs,
        pending,
        cfg.models,
        costs=costs,
        eligibility=cfg.eligibility,
        time_budget=max(0.0, window_end - t - startup.seconds),
    )
    records.append(_rec(dm.store, t, DM, EventKind.NEGOTIATION_DONE, tech=outcome.tech, delta=-cfg.negotiation_energy))

    received: list[Bundle] = []
    for send in fan_begin_contact(fan, outcome):
        b, cost = send.bundle, send.cost
        t += cost.link_seconds
        records.append(_rec(fan.store, t, FAN, EventKind.BUNDLE_SENT, b.id, send.tech, -cost.fan))
        # DM radio is on for the whole transfer whether or not it decodes
        dm_link = cost.fan
        dm.store.draw(dm_link, f"receive:{b.id}")
        if apply_loss(rng, cfg.loss):
            records.append(_rec(dm.store, t, DM, EventKind.BUNDLE_RECEIVED, b.id, send.tech, -dm_link))
            dm.store.draw(handoff.joules, f"{SOM_TO_GPRS}:{b.id}")
            t += handoff.seconds
            records.append(_rec(dm.store, t, DM, EventKind.PHASE_COST, b.id, None, -handoff.joules))
            received.append(b)
        else:
            records.append(_rec(dm.store, t, DM, EventKind.BUNDLE_LOST, b.id, send.tech, -dm_link))

    if received:
        dm.store.draw(startup.joules, MODEM_STARTUP)
        t += startup.seconds
        records.append(_rec(dm.store, t, DM, EventKind.PHASE_COST, None, None, -startup.joules))
    for b in received:
        flushes = dm_receive_bundle(dm, b, cfg.models)
        ack = None
        for i, fl in enumerate(flushes):
            start = t
            t += fl.seconds
            ok = not cfg.in_blackout(start, t)
            if cfg.gprs_failure > 0:
                ok = apply_loss(gprs_rng, cfg.gprs_failure) and ok
            ack = dm_flush(dm, fl, ok)
            kind = EventKind.GPRS_FLUSH if ok else EventKind.FLUSH_FAILED
            records.append(_rec(dm.store, t, DM, kind, b.id, Technology.GPRS, -fl.joules))
            if not ok:
                dm_abandon(dm, b.id, sum(f.packets for f in flushes[i + 1:]))
                break
        dm.inbox.remove(b)
        if ack is None:
            continue
        records.append(_rec(dm.store, t, DM, EventKind.SERVER_DELIVERED, b.id))
        if apply_loss(rng, cfg.loss):
            records.append(_rec(fan.store, t, FAN, EventKind.ACK_DELIVERED, b.id))
            status = fan_on_ack(fan, ack.id)
            kind = EventKind.FAN_DELETE if status == "deleted" else EventKind.ACK_IGNORED
            records.append(_rec(fan.store, t, FAN, kind, b.id))
        else:
            records.append(_rec(dm.store, t, DM, EventKind.ACK_LOST, b.id))

    another = (
        outcome.n > 0
        and bool(fan.queue)
        and t + cfg.negotiation_latency < window_end
        and _dm_affords_head(fan, dm, cfg)
    )
    return RoundResult(records, t, outcome, another)


def _dm_affords_head(fan: FanState, dm: DmState, cfg: ProtocolConfig) -> bool:
    if not dm_can_negotiate(dm, cfg):
        return False
    budget = dm.store.usable - dm.reserve - cfg.negotiation_energy
    if dm.round_budget is not None:
        budget = min(budget, dm.round_budget)
    costs = link_cost_fn(cfg.models, cfg.channel_quality, dm_overhead=cfg.phase(SOM_TO_GPRS))
    head = fan.queue[0]
    return any(
        costs(tech, head).dm <= budget
        for tech in LOCAL_TECHNOLOGIES
        if tech in cfg.models.anchors and cfg.channel_quality.get(tech, 0.0) >= cfg.eligibility
    )


def default_dm_reserve(models: LinkModels = DEFAULT_MODELS) -> float:
    """Energy held back so the mule can always shut down and start its modem."""
    table = models.phase_table
    return sum(p.joules for p in (table.get(SOM_SHUTDOWN), table.get(MODEM_STARTUP)) if p is not None)
