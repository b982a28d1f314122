"""Supercapacitor energy buffer and bicycle-dynamo harvesting.

State transitions are value-semantic: ``charge`` and ``discharge`` return a new
:class:`Supercapacitor`. :class:`EnergyStore` pairs a capacitor with an
:class:`EnergyLedger` for the simulator's bookkeeping.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

# Absolute slack (J) when comparing a draw against usable energy; absorbs
# rounding from repeated sqrt updates of the voltage.
ENERGY_SLACK_J = 1e-9

DEFAULT_CAPACITANCE_F = 100.0
DEFAULT_V_MAX = 5.0
DEFAULT_V_CUTOFF = 2.0

# 2.9 W measured at about 13 km/h.
REF_DYNAMO_WATTS = 2.9
REF_RIDE_SPEED_KMH = 13.0


class InsufficientEnergy(Exception):
    """A draw exceeds the usable energy of a store."""


class NoHarvest(Exception):
    """Harvesting power is zero but a positive energy target was requested."""


@dataclass(frozen=True)
class Supercapacitor:
    capacitance: float = DEFAULT_CAPACITANCE_F
    voltage: float = DEFAULT_V_CUTOFF
    v_max: float = DEFAULT_V_MAX
    v_cutoff: float = DEFAULT_V_CUTOFF

    def __post_init__(self) -> None:
        if not self.capacitance > 0:
            raise ValueError(f"capacitance must be > 0, got {self.capacitance}")
        if not (self.v_max > self.v_cutoff >= 0):
            raise ValueError(
                f"need v_max > v_cutoff >= 0, got v_max={self.v_max}, v_cutoff={self.v_cutoff}"
            )
        if not (self.v_cutoff <= self.voltage <= self.v_max):
            raise ValueError(
                f"voltage {self.voltage} outside [{self.v_cutoff}, {self.v_max}]"
            )

    @property
    def stored_energy(self) -> float:
        """Total capacitive energy ½CV² (J), including the part below cutoff."""
        return 0.5 * self.capacitance * self.voltage**2

    @property
    def capacity(self) -> float:
        """Usable energy of a full capacitor (J)."""
        return 0.5 * self.capacitance * (self.v_max**2 - self.v_cutoff**2)


@dataclass(frozen=True)
class Dynamo:
    """Linear-in-speed dynamo with a power clamp.

    The default slope puts 2.9 W at 13 km/h. The 3 W clamp is the usual
    6 V / 3 W bicycle dynamo rating.
    """

    power_per_speed: float = REF_DYNAMO_WATTS / REF_RIDE_SPEED_KMH
    max_power: float = 3.0
    efficiency: float = 1.0

    def __post_init__(self) -> None:
        if self.power_per_speed < 0 or self.max_power < 0:
            raise ValueError("dynamo power coefficients must be non-negative")
        if not 0 < self.efficiency <= 1:
            raise ValueError(f"efficiency must lie in (0, 1], got {self.efficiency}")

    def power(self, speed_kmh: float) -> float:
        if speed_kmh <= 0:
            return 0.0
        return min(self.power_per_speed * speed_kmh, self.max_power)


@dataclass
class EnergyLedger:
    """Running totals for one node's store.

    ``total_harvested`` is the raw input energy before efficiency, so the
    balance is ``initial + harvested_in - discharged - shed`` where
    ``harvested_in`` is the efficiency-weighted input.
    """

    total_harvested: float = 0.0
    harvested_in: float = 0.0
    total_discharged: float = 0.0
    total_shed: float = 0.0
    per_phase: list[tuple[str, float]] = field(default_factory=list)

    def record_harvest(self, raw: float, weighted: float, shed: float, label: str = "harvest") -> None:
        self.total_harvested += raw
        self.harvested_in += weighted
        self.total_shed += shed
        self.per_phase.append((label, weighted - shed))

    def record_discharge(self, energy: float, label: str) -> None:
        self.total_discharged += energy
        self.per_phase.append((label, -energy))

    def expected_final(self, initial: float) -> float:
        return initial + self.harvested_in - self.total_discharged - self.total_shed


def usable_energy(cap: Supercapacitor) -> float:
    """Energy (J) that can be drawn before the voltage reaches cutoff."""
    return 0.5 * cap.capacitance * (cap.voltage**2 - cap.v_cutoff**2)


def charge(
    cap: Supercapacitor, power: float, duration: float, efficiency: float = 1.0
) -> tuple[Supercapacitor, float, float]:
    """Feed ``power`` watts for ``duration`` seconds into the capacitor.

    Returns ``(new_cap, joules_stored, joules_shed)``; input beyond ``v_max``
    is shed.
    """
    if power < 0 or duration < 0:
        raise ValueError("power and duration must be non-negative")
    if not 0 < efficiency <= 1:
        raise ValueError(f"efficiency must lie in (0, 1], got {efficiency}")
    e_in = efficiency * power * duration
    if e_in == 0:
        return cap, 0.0, 0.0
    v_sq = cap.voltage**2 + 2.0 * e_in / cap.capacitance
    if v_sq >= cap.v_max**2:
        stored = 0.5 * cap.capacitance * (cap.v_max**2 - cap.voltage**2)
        return replace(cap, voltage=cap.v_max), stored, e_in - stored
    return replace(cap, voltage=math.sqrt(v_sq)), e_in, 0.0


def discharge(cap: Supercapacitor, energy: float) -> Supercapacitor:
    """Draw ``energy`` joules; raises :class:`InsufficientEnergy` past cutoff."""
    if energy < 0:
        raise ValueError(f"energy must be non-negative, got {energy}")
    if energy == 0:
        return cap
    available = usable_energy(cap)
    if energy > available + ENERGY_SLACK_J:
        raise InsufficientEnergy(f"requested {energy:.6g} J, usable {available:.6g} J")
    v_sq = cap.voltage**2 - 2.0 * energy / cap.capacitance
    return replace(cap, voltage=max(math.sqrt(max(v_sq, 0.0)), cap.v_cutoff))


def time_to_harvest(target: float, speed: float, dynamo: Dynamo) -> float:
    """Seconds of riding at ``speed`` km/h needed to harvest ``target`` joules."""
    if target < 0:
        raise ValueError(f"target must be non-negative, got {target}")
    if target == 0:
        return 0.0
    effective = dynamo.efficiency * dynamo.power(speed)
    if effective <= 0:
        raise NoHarvest(f"no harvest power at {speed} km/h")
    return target / effective


def capacitance_for(target: float, v_max: float, v_cutoff: float) -> float:
    """Smallest capacitance whose [v_cutoff, v_max] window holds ``target`` J."""
    if not v_max > v_cutoff >= 0:
        raise ValueError(f"need v_max > v_cutoff >= 0, got {v_max}, {v_cutoff}")
    if target < 0:
        raise ValueError(f"target must be non-negative, got {target}")
    return 2.0 * target / (v_max**2 - v_cutoff**2)


class EnergyStore:
    """Mutable holder for a node's capacitor plus its ledger.

    ``cap=None`` models an effectively unlimited supply: draws always
    succeed and are only recorded.
    """

    def __init__(self, cap: Supercapacitor | None = None) -> None:
        self.cap = cap
        self.initial_energy = cap.stored_energy if cap is not None else 0.0
        self.ledger = EnergyLedger()

    @property
    def unlimited(self) -> bool:
        return self.cap is None

    @property
    def usable(self) -> float:
        return math.inf if self.cap is None else usable_energy(self.cap)

    @property
    def voltage(self) -> float | None:
        return None if self.cap is None else self.cap.voltage

    def harvest(self, power: float, duration: float, efficiency: float = 1.0) -> tuple[float, float]:
        """Charge from a source; returns ``(stored, shed)``."""
        raw = power * duration
        if self.cap is None:
            return 0.0, 0.0
        self.cap, stored, shed = charge(self.cap, power, duration, efficiency)
        self.ledger.record_harvest(raw, efficiency * raw, shed)
        return stored, shed

    def draw(self, energy: float, label: str) -> None:
        if self.cap is not None:
            self.cap = discharge(self.cap, energy)
        elif energy < 0:
            raise ValueError(f"energy must be non-negative, got {energy}")
        self.ledger.record_discharge(energy, label)

    def balances(self, rel_tol: float = 1e-9) -> bool:
        """Ledger conservation check against the capacitor's actual energy."""
        if self.cap is None:
            return True
        expected = self.ledger.expected_final(self.initial_energy)
        actual = self.cap.stored_energy
        return math.isclose(actual, expected, rel_tol=rel_tol, abs_tol=1e-9)
