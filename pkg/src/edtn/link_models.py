"""Latency and energy models for the Bluetooth, Wi-Fi and GPRS links.

Local links (Bluetooth, Wi-Fi) interpolate measured bundle latencies; the
GPRS uplink uses a buffered-flush model whose per-packet energy is
``a/B + b + c*B`` for a buffer of ``B`` packets. Sizes are in bytes with
decimal prefixes (1 kB = 1000 B, 1 MB = 10**6 B).
"""

from __future__ import annotations

import enum
import math
from bisect import bisect_right
from collections.abc import Mapping, Sequence
from dataclasses import dataclass, field

import numpy as np

KB = 1_000
MB = 1_000_000


class Technology(str, enum.Enum):
    BLUETOOTH = "bluetooth"
    WIFI = "wifi"
    GPRS = "gprs"

    def __str__(self) -> str:
        return self.value


# Fixed preference order for the final tie-break in negotiation.
LOCAL_TECHNOLOGIES = (Technology.WIFI, Technology.BLUETOOTH)


class UnknownTechnology(ValueError):
    pass


class InvalidBuffer(ValueError):
    pass


class DegenerateFit(ValueError):
    pass


# Measured single-bundle latencies (bytes, seconds).
DEFAULT_ANCHORS: dict[Technology, tuple[tuple[int, float], ...]] = {
    Technology.BLUETOOTH: ((5 * KB, 5.0), (1 * MB, 90.0), (3 * MB, 280.0)),
    Technology.WIFI: ((5 * KB, 7.0), (1 * MB, 7.0), (3 * MB, 20.0)),
}

# Wi-Fi: 42 J over the 13 s DTN exchange. Bluetooth has no measured figure;
# 0.3 W is a placeholder, not a calibrated value.
DEFAULT_ACTIVE_WATTS: dict[Technology, float] = {
    Technology.WIFI: 42.0 / 13.0,
    Technology.BLUETOOTH: 0.3,
}


@dataclass(frozen=True)
class Bundle:
    id: int
    size: int
    packets: int = 0
    created_at: float = 0.0

    def __post_init__(self) -> None:
        if self.size <= 0:
            raise ValueError(f"bundle {self.id}: size must be > 0, got {self.size}")
        if self.packets == 0:
            object.__setattr__(self, "packets", packets_for(self.size))
        if self.packets < 1:
            raise ValueError(f"bundle {self.id}: packets must be >= 1")


def packets_for(size: int, packet_bytes: int = 32) -> int:
    return max(1, math.ceil(size / packet_bytes))


def validate_anchors(anchors: Mapping[Technology, Sequence[tuple[float, float]]]) -> None:
    for tech, points in anchors.items():
        if tech is Technology.GPRS:
            raise UnknownTechnology("GPRS has no latency anchors; it uses the buffer model")
        if len(points) < 2:
            raise ValueError(f"{tech}: need at least two anchors")
        sizes = [s for s, _ in points]
        if any(b <= a for a, b in zip(sizes, sizes[1:])):
            raise ValueError(f"{tech}: anchor sizes must be strictly increasing")
        if any(t <= 0 for _, t in points):
            raise ValueError(f"{tech}: anchor times must be positive")


def transfer_time(
    tech: Technology,
    size: float,
    anchors: Mapping[Technology, Sequence[tuple[float, float]]] = DEFAULT_ANCHORS,
) -> float:
    """Bundle transfer time in seconds over a local link.

    Piecewise-linear through the anchors, clamped below the first anchor and
    extrapolated with the last segment's slope above the final one.
    """
    if tech is Technology.GPRS:
        raise UnknownTechnology("GPRS uses the buffer model, not latency anchors")
    if tech not in anchors:
        raise UnknownTechnology(f"no anchors for {tech}")
    if size <= 0:
        raise ValueError(f"size must be > 0, got {size}")
    points = anchors[tech]
    sizes = [s for s, _ in points]
    if size <= sizes[0]:
        return float(points[0][1])
    i = bisect_right(sizes, size)
    # size above the last anchor reuses the final segment
    i = min(i, len(points) - 1)
    (s0, t0), (s1, t1) = points[i - 1], points[i]
    return t0 + (t1 - t0) * (size - s0) / (s1 - s0)


@dataclass(frozen=True)
class GprsModel:
    packet_size: int = 32
    epp_a: float = 2.5
    epp_b: float = 0.6
    epp_c: float = 0.001
    t_setup: float = 6.0
    t_per_packet: float = 0.5
    buffer_packets: int = 50

    def __post_init__(self) -> None:
        if self.packet_size < 1:
            raise ValueError("packet_size must be >= 1")
        if self.epp_a < 0 or self.epp_b < 0 or self.epp_c < 0:
            raise ValueError("energy-per-packet coefficients must be non-negative")
        if self.epp_a + self.epp_b + self.epp_c <= 0:
            raise ValueError("energy per packet must be positive")
        if self.t_setup < 0 or self.t_per_packet < 0:
            raise ValueError("GPRS time coefficients must be non-negative")
        if self.buffer_packets < 1:
            raise InvalidBuffer("buffer_packets must be >= 1")

    def energy_per_packet(self, buffer: int) -> float:
        if buffer < 1:
            raise InvalidBuffer(f"buffer must be >= 1 packet, got {buffer}")
        return self.epp_a / buffer + self.epp_b + self.epp_c * buffer

    def buffer_cost(self, buffer: int) -> tuple[float, float]:
        """(seconds, joules) to flush a buffer of ``buffer`` packets."""
        if buffer < 1:
            raise InvalidBuffer(f"buffer must be >= 1 packet, got {buffer}")
        # expanded form of buffer * energy_per_packet(buffer); exact at B=50
        energy = self.epp_a + self.epp_b * buffer + self.epp_c * buffer * buffer
        return self.t_setup + buffer * self.t_per_packet, energy

    def flushes(self, packets: int) -> list[int]:
        """Flush sizes for one bundle; the last buffer may be partial."""
        full, rest = divmod(packets, self.buffer_packets)
        return [self.buffer_packets] * full + ([rest] if rest else [])

    def bundle_cost(self, packets: int) -> tuple[float, float]:
        t = e = 0.0
        for b in self.flushes(packets):
            dt, de = self.buffer_cost(b)
            t += dt
            e += de
        return t, e


DEFAULT_GPRS = GprsModel()


def gprs_energy_per_packet(buffer: int, model: GprsModel = DEFAULT_GPRS) -> float:
    return model.energy_per_packet(buffer)


def gprs_buffer_cost(buffer: int, model: GprsModel = DEFAULT_GPRS) -> tuple[float, float]:
    return model.buffer_cost(buffer)


def optimal_gprs_buffer(b_min: int, b_max: int, model: GprsModel = DEFAULT_GPRS) -> int:
    """Integer buffer size minimising energy per packet; ties go to the smaller size."""
    if not 1 <= b_min <= b_max:
        raise InvalidBuffer(f"need 1 <= b_min <= b_max, got {b_min}, {b_max}")
    return _argmin(model.energy_per_packet, b_min, b_max)


def _argmin(f, lo: int, hi: int) -> int:
    best, best_val = lo, f(lo)
    for b in range(lo + 1, hi + 1):
        v = f(b)
        if v < best_val:
            best, best_val = b, v
    return best


@dataclass(frozen=True)
class Phase:
    label: str
    joules: float
    seconds: float

    def __post_init__(self) -> None:
        if self.joules < 0 or self.seconds < 0:
            raise ValueError(f"phase {self.label!r}: costs must be non-negative")


# Labels the simulator relies on.
POWER_UP = "power_up"
AUTO_LOGIN = "auto_login"
DTN_EXCHANGE = "dtn_exchange"
SOM_TO_GPRS = "som_to_gprs"
SOM_SHUTDOWN = "som_shutdown"
MODEM_STARTUP = "modem_startup"
GPRS_UPLOAD = "gprs_upload"

PHASE_DESCRIPTIONS = {
    POWER_UP: "Powering up the SOM and GPRS module",
    AUTO_LOGIN: "Auto-login on SOM",
    DTN_EXCHANGE: "DTN communication (send and receive)",
    SOM_TO_GPRS: "Bundle transfer from SOM to GPRS",
    SOM_SHUTDOWN: "SOM shutdown",
    MODEM_STARTUP: "Modem startup",
    GPRS_UPLOAD: "GPRS transmission to the server",
}


@dataclass(frozen=True)
class PhaseCostTable:
    phases: tuple[Phase, ...] = ()

    def __iter__(self):
        return iter(self.phases)

    def __len__(self) -> int:
        return len(self.phases)

    def get(self, label: str) -> Phase | None:
        for p in self.phases:
            if p.label == label:
                return p
        return None

    def totals(self) -> tuple[float, float]:
        return sum(p.seconds for p in self.phases), sum(p.joules for p in self.phases)


DEFAULT_PHASE_TABLE = PhaseCostTable(
    (
        Phase(POWER_UP, 77.0, 30.0),
        Phase(AUTO_LOGIN, 86.0, 30.0),
        Phase(DTN_EXCHANGE, 42.0, 13.0),
        Phase(SOM_TO_GPRS, 42.0, 14.0),
        Phase(SOM_SHUTDOWN, 60.0, 15.0),
        Phase(MODEM_STARTUP, 25.0, 60.0),
        Phase(GPRS_UPLOAD, 35.0, 31.0),
    )
)


def bundle_chain_cost(
    bundle: Bundle,
    table: PhaseCostTable = DEFAULT_PHASE_TABLE,
    gprs: GprsModel = DEFAULT_GPRS,
) -> tuple[float, float]:
    """(seconds, joules) of one mule duty cycle carrying ``bundle``.

    The ``gprs_upload`` row is replaced by the actual flushes the bundle
    needs; every other row is charged as listed.
    """
    if bundle.packets < 1:
        raise ValueError("bundle must carry at least one packet")
    seconds = joules = 0.0
    for phase in table:
        if phase.label == GPRS_UPLOAD:
            dt, de = gprs.bundle_cost(bundle.packets)
        else:
            dt, de = phase.seconds, phase.joules
        seconds += dt
        joules += de
    return seconds, joules


@dataclass(frozen=True)
class LinkModels:
    anchors: Mapping[Technology, Sequence[tuple[float, float]]] = field(
        default_factory=lambda: dict(DEFAULT_ANCHORS)
    )
    active_watts: Mapping[Technology, float] = field(
        default_factory=lambda: dict(DEFAULT_ACTIVE_WATTS)
    )
    gprs: GprsModel = DEFAULT_GPRS
    phase_table: PhaseCostTable = DEFAULT_PHASE_TABLE

    def __post_init__(self) -> None:
        validate_anchors(self.anchors)
        for tech, watts in self.active_watts.items():
            if watts < 0:
                raise ValueError(f"{tech}: active power must be non-negative")

    def transfer_time(self, tech: Technology, size: float) -> float:
        return transfer_time(tech, size, self.anchors)

    def transfer_energy(self, tech: Technology, size: float) -> float:
        return transfer_energy(tech, size, self)


DEFAULT_MODELS = LinkModels()


def transfer_energy(tech: Technology, size: float, models: LinkModels = DEFAULT_MODELS) -> float:
    """Active-power energy (J) of one bundle transfer over a local link."""
    t = transfer_time(tech, size, models.anchors)
    if tech not in models.active_watts:
        raise UnknownTechnology(f"no active power for {tech}")
    return models.active_watts[tech] * t


@dataclass(frozen=True)
class GprsFit:
    epp_a: float
    epp_b: float
    epp_c: float
    residual: float

    def energy_per_packet(self, buffer: int) -> float:
        return self.epp_a / buffer + self.epp_b + self.epp_c * buffer

    def argmin(self, b_min: int = 1, b_max: int = 10_000) -> int:
        return _argmin(self.energy_per_packet, b_min, b_max)


def fit_gprs_curve(samples: Sequence[tuple[float, float]]) -> GprsFit:
    """Least-squares fit of ``a/B + b + c*B`` to ``(B, energy_per_packet)`` samples."""
    if len({b for b, _ in samples}) < 3:
        raise DegenerateFit("need at least three distinct buffer sizes")
    bs = np.array([float(b) for b, _ in samples])
    ys = np.array([float(y) for _, y in samples])
    if np.any(bs <= 0):
        raise DegenerateFit("buffer sizes must be positive")
    design = np.column_stack([1.0 / bs, np.ones_like(bs), bs])
    # column scaling keeps the system well conditioned across B ranges
    scale = np.linalg.norm(design, axis=0)
    coef, _, rank, _ = np.linalg.lstsq(design / scale, ys, rcond=None)
    if rank < 3:
        raise DegenerateFit("normal equations are singular")
    coef = coef / scale
    residual = float(np.linalg.norm(design @ coef - ys))
    a, b, c = (float(x) for x in coef)
    return GprsFit(a, b, c, residual)
