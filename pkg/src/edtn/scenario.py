"""Scenario files: JSON documents describing one mule/FAN simulation.

Unknown keys are rejected and every error names the offending key path, so
the CLI can report ``capacitor.capacitance_f: must be > 0`` and exit 2.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Any

from edtn.energy_store import Dynamo, Supercapacitor
from edtn.link_models import (
    DEFAULT_ACTIVE_WATTS,
    DEFAULT_ANCHORS,
    DEFAULT_PHASE_TABLE,
    LOCAL_TECHNOLOGIES,
    Bundle,
    GprsModel,
    LinkModels,
    Phase,
    PhaseCostTable,
    Technology,
    validate_anchors,
)
from edtn.protocol import ProtocolConfig, default_dm_reserve


class ConfigError(ValueError):
    def __init__(self, key: str, message: str) -> None:
        super().__init__(f"{key}: {message}")
        self.key = key


@dataclass(frozen=True)
class RideLeg:
    speed_kmh: float
    duration_s: float


@dataclass(frozen=True)
class Contact:
    start_s: float
    max_duration_s: float
    channel_quality: dict[Technology, float] | None = None

    @property
    def end_s(self) -> float:
        return self.start_s + self.max_duration_s


@dataclass
class Scenario:
    name: str = "scenario"
    capacitor: Supercapacitor = field(default_factory=Supercapacitor)
    dynamo: Dynamo = field(default_factory=Dynamo)
    fan_capacitor: Supercapacitor | None = None
    models: LinkModels = field(default_factory=LinkModels)
    protocol: ProtocolConfig = field(default_factory=ProtocolConfig)
    dm_reserve: float | None = None
    round_budget: float | None = None
    rides: list[RideLeg] = field(default_factory=list)
    contacts: list[Contact] = field(default_factory=list)
    workload: list[Bundle] = field(default_factory=list)
    seed: int = 0

    def __post_init__(self) -> None:
        if self.dm_reserve is None:
            self.dm_reserve = default_dm_reserve(self.models)
        self.validate()

    @property
    def loss(self) -> float:
        return self.protocol.loss

    def ride_intervals(self) -> list[tuple[float, float, RideLeg]]:
        out, t = [], 0.0
        for leg in self.rides:
            out.append((t, t + leg.duration_s, leg))
            t += leg.duration_s
        return out

    def validate(self) -> None:
        ids = [b.id for b in self.workload]
        if len(set(ids)) != len(ids):
            raise ConfigError("workload", "bundle ids must be unique")
        for i, leg in enumerate(self.rides):
            if leg.speed_kmh < 0 or leg.duration_s < 0:
                raise ConfigError(f"rides[{i}]", "speed and duration must be non-negative")
        order = sorted(self.contacts, key=lambda c: c.start_s)
        for i, c in enumerate(order):
            if c.start_s < 0 or c.max_duration_s <= 0:
                raise ConfigError(f"contacts[{i}]", "need start_s >= 0 and max_duration_s > 0")
            if i and order[i - 1].end_s > c.start_s:
                raise ConfigError(f"contacts[{i}]", "contacts overlap")
        for i, c in enumerate(self.contacts):
            for start, end, leg in self.ride_intervals():
                if leg.speed_kmh > 0 and start < c.end_s and c.start_s < end:
                    raise ConfigError(f"contacts[{i}]", "contact overlaps a moving ride leg")
        for key, p in (("loss", self.protocol.loss), ("gprs.failure_prob", self.protocol.gprs_failure)):
            if not 0.0 <= p <= 1.0:
                raise ConfigError(key, "probability must lie in [0, 1]")


# -- JSON parsing ------------------------------------------------------------


class _Section:
    """Strict accessor over one JSON object: tracks consumed keys."""

    def __init__(self, data: Any, path: str) -> None:
        if not isinstance(data, dict):
            raise ConfigError(path or "<root>", "expected an object")
        self.data = data
        self.path = path
        self.seen: set[str] = set()

    def key(self, name: str) -> str:
        return f"{self.path}.{name}" if self.path else name

    def has(self, name: str) -> bool:
        return name in self.data and self.data[name] is not None

    def raw(self, name: str, default=None):
        self.seen.add(name)
        return self.data.get(name, default)

    def num(self, name: str, default: float | None = None, *, gt=None, ge=None, le=None) -> float:
        self.seen.add(name)
        if name not in self.data:
            if default is None:
                raise ConfigError(self.key(name), "required")
            return default
        v = self.data[name]
        if isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v):
            raise ConfigError(self.key(name), f"expected a finite number, got {v!r}")
        v = float(v)
        if gt is not None and not v > gt:
            raise ConfigError(self.key(name), f"must be > {gt}, got {v:g}")
        if ge is not None and not v >= ge:
            raise ConfigError(self.key(name), f"must be >= {ge}, got {v:g}")
        if le is not None and not v <= le:
            raise ConfigError(self.key(name), f"must be <= {le}, got {v:g}")
        return v

    def integer(self, name: str, default: int | None = None, *, ge=None) -> int:
        self.seen.add(name)
        if name not in self.data:
            if default is None:
                raise ConfigError(self.key(name), "required")
            return default
        v = self.data[name]
        if isinstance(v, bool) or not isinstance(v, int):
            raise ConfigError(self.key(name), f"expected an integer, got {v!r}")
        if ge is not None and v < ge:
            raise ConfigError(self.key(name), f"must be >= {ge}, got {v}")
        return v

    def sub(self, name: str) -> _Section | None:
        self.seen.add(name)
        if not self.has(name):
            return None
        return _Section(self.data[name], self.key(name))

    def done(self) -> None:
        extra = sorted(set(self.data) - self.seen)
        if extra:
            raise ConfigError(self.key(extra[0]), "unknown key")


def _tech(name: str, path: str) -> Technology:
    try:
        tech = Technology(name)
    except ValueError:
        raise ConfigError(path, f"unknown technology {name!r}") from None
    if tech not in LOCAL_TECHNOLOGIES:
        raise ConfigError(path, "only bluetooth and wifi are local links")
    return tech


def _quality(sec: _Section | None) -> dict[Technology, float] | None:
    if sec is None:
        return None
    out = {}
    for name in list(sec.data):
        out[_tech(name, sec.key(name))] = sec.num(name, ge=0.0, le=1.0)
    sec.done()
    return out


def _capacitor(sec: _Section) -> Supercapacitor:
    c = sec.num("capacitance_f", 100.0, gt=0)
    v_max = sec.num("v_max", 5.0, gt=0)
    v_cut = sec.num("v_cutoff", 2.0, ge=0)
    if not v_max > v_cut:
        raise ConfigError(sec.key("v_max"), "must exceed v_cutoff")
    v_init = sec.num("v_init", v_cut, ge=v_cut, le=v_max)
    sec.done()
    return Supercapacitor(c, v_init, v_max, v_cut)


def _anchors(value, path: str) -> tuple[tuple[float, float], ...]:
    if not isinstance(value, list):
        raise ConfigError(path, "expected a list of [bytes, seconds] pairs")
    out = []
    for i, pair in enumerate(value):
        if (
            not isinstance(pair, list)
            or len(pair) != 2
            or not all(isinstance(x, (int, float)) and not isinstance(x, bool) for x in pair)
        ):
            raise ConfigError(f"{path}[{i}]", "expected [bytes, seconds]")
        out.append((float(pair[0]), float(pair[1])))
    return tuple(out)


def _models(doc: _Section) -> tuple[LinkModels, float, tuple[tuple[float, float], ...]]:
    anchors = dict(DEFAULT_ANCHORS)
    watts = dict(DEFAULT_ACTIVE_WATTS)
    links = doc.sub("links")
    if links is not None:
        for name in list(links.data):
            tech = _tech(name, links.key(name))
            sec = links.sub(name)
            if sec is None:
                continue
            if sec.has("anchors"):
                anchors[tech] = _anchors(sec.raw("anchors"), sec.key("anchors"))
            watts[tech] = sec.num("active_watts", watts[tech], ge=0)
            sec.done()
        links.done()
    try:
        validate_anchors(anchors)
    except ValueError as exc:
        raise ConfigError("links", str(exc)) from None

    gprs = GprsModel()
    sec = doc.sub("gprs")
    failure, blackouts = 0.0, ()
    if sec is not None:
        try:
            gprs = GprsModel(
                packet_size=sec.integer("packet_bytes", 32, ge=1),
                epp_a=sec.num("epp_a", 2.5, ge=0),
                epp_b=sec.num("epp_b", 0.6, ge=0),
                epp_c=sec.num("epp_c", 0.001, ge=0),
                t_setup=sec.num("t_setup_s", 6.0, ge=0),
                t_per_packet=sec.num("t_per_packet_s", 0.5, ge=0),
                buffer_packets=sec.integer("buffer_packets", 50, ge=1),
            )
        except ValueError as exc:
            if isinstance(exc, ConfigError):
                raise
            raise ConfigError("gprs", str(exc)) from None
        failure = sec.num("failure_prob", 0.0, ge=0, le=1)
        raw = sec.raw("blackouts", [])
        if not isinstance(raw, list):
            raise ConfigError(sec.key("blackouts"), "expected a list of [start_s, end_s]")
        blackouts = _anchors(raw, sec.key("blackouts"))
        for i, (s, e) in enumerate(blackouts):
            if not e > s:
                raise ConfigError(f"{sec.key('blackouts')}[{i}]", "end must exceed start")
        sec.done()

    table = DEFAULT_PHASE_TABLE
    raw = doc.raw("phase_table")
    if raw is not None:
        if not isinstance(raw, list):
            raise ConfigError("phase_table", "expected a list of {label, joules, seconds}")
        phases = []
        for i, item in enumerate(raw):
            p = _Section(item, f"phase_table[{i}]")
            label = p.raw("label")
            if not isinstance(label, str):
                raise ConfigError(p.key("label"), "expected a string")
            phases.append(Phase(label, p.num("joules", ge=0), p.num("seconds", ge=0)))
            p.done()
        table = PhaseCostTable(tuple(phases))
    models = LinkModels(anchors=anchors, active_watts=watts, gprs=gprs, phase_table=table)
    return models, failure, blackouts


def scenario_from_dict(data: dict) -> Scenario:
    doc = _Section(data, "")
    name = doc.raw("name", "scenario")
    if not isinstance(name, str):
        raise ConfigError("name", "expected a string")
    seed = doc.integer("seed", 0, ge=0)

    cap_sec = doc.sub("capacitor")
    cap = _capacitor(cap_sec) if cap_sec else Supercapacitor()
    fan_sec = doc.sub("fan_capacitor")
    fan_cap = _capacitor(fan_sec) if fan_sec else None

    dyn = Dynamo()
    sec = doc.sub("dynamo")
    if sec is not None:
        dyn = Dynamo(
            power_per_speed=sec.num("watts_per_kmh", dyn.power_per_speed, ge=0),
            max_power=sec.num("max_watts", dyn.max_power, ge=0),
            efficiency=sec.num("efficiency", 1.0, gt=0, le=1),
        )
        sec.done()

    models, failure, blackouts = _models(doc)

    proto = ProtocolConfig(models=models, gprs_failure=failure, gprs_blackouts=blackouts)
    reserve = round_budget = None
    sec = doc.sub("protocol")
    if sec is not None:
        proto.negotiation_latency = sec.num("negotiation_latency_s", proto.negotiation_latency, ge=0)
        proto.negotiation_watts = sec.num("negotiation_watts", proto.negotiation_watts, ge=0)
        proto.eligibility = sec.num("eligibility_threshold", proto.eligibility, ge=0, le=1)
        proto.transmit_power = sec.num("transmit_power", proto.transmit_power, ge=0)
        q = _quality(sec.sub("channel_quality"))
        if q:
            proto.channel_quality = {**proto.channel_quality, **q}
        if sec.has("dm_reserve_j"):
            reserve = sec.num("dm_reserve_j", ge=0)
        else:
            sec.seen.add("dm_reserve_j")
        if sec.has("round_budget_j"):
            round_budget = sec.num("round_budget_j", ge=0)
        else:
            sec.seen.add("round_budget_j")
        sec.done()
    proto.loss = doc.num("loss", 0.0, ge=0, le=1)

    rides = []
    raw = doc.raw("rides", [])
    if not isinstance(raw, list):
        raise ConfigError("rides", "expected a list")
    for i, item in enumerate(raw):
        r = _Section(item, f"rides[{i}]")
        rides.append(RideLeg(r.num("speed_kmh", ge=0), r.num("duration_s", ge=0)))
        r.done()

    contacts = []
    raw = doc.raw("contacts", [])
    if not isinstance(raw, list):
        raise ConfigError("contacts", "expected a list")
    for i, item in enumerate(raw):
        c = _Section(item, f"contacts[{i}]")
        contacts.append(
            Contact(
                c.num("start_s", ge=0),
                c.num("max_duration_s", gt=0),
                _quality(c.sub("channel_quality")),
            )
        )
        c.done()

    workload = []
    raw = doc.raw("workload", [])
    if not isinstance(raw, list):
        raise ConfigError("workload", "expected a list")
    for i, item in enumerate(raw):
        w = _Section(item, f"workload[{i}]")
        size = w.integer("size_bytes", ge=1)
        workload.append(
            Bundle(
                w.integer("id", ge=0),
                size,
                -(-size // models.gprs.packet_size),
                w.num("created_at_s", 0.0, ge=0),
            )
        )
        w.done()
    doc.done()

    return Scenario(
        name=name,
        capacitor=cap,
        dynamo=dyn,
        fan_capacitor=fan_cap,
        models=models,
        protocol=proto,
        dm_reserve=reserve,
        round_budget=round_budget,
        rides=rides,
        contacts=contacts,
        workload=workload,
        seed=seed,
    )


def load_scenario(path: str | Path) -> Scenario:
    """Load a scenario file; raises OSError on I/O failure, ConfigError on bad content."""
    text = Path(path).read_text(encoding="utf-8")
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"line {exc.lineno}", exc.msg) from None
    return scenario_from_dict(data)


BUNDLED = ("paper-single-bundle", "paper-table2-latency", "lossy-multi-contact")


def bundled_path(name: str) -> Path:
    stem = name.removesuffix(".json")
    if stem not in BUNDLED:
        raise FileNotFoundError(f"no bundled scenario named {name!r}")
    return Path(str(resources.files("edtn") / "scenarios" / f"{stem}.json"))


def resolve_scenario(name_or_path: str) -> Path:
    p = Path(name_or_path)
    if p.exists():
        return p
    stem = p.name.removesuffix(".json")
    if stem in BUNDLED and p.parent == Path("."):
        return bundled_path(stem)
    return p
