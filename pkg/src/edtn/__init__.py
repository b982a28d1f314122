"""Energy-negotiated delay-tolerant bundle transfer between a dynamo-powered
data mule and a field aggregation node."""

from edtn.energy_store import (
    Dynamo,
    EnergyLedger,
    EnergyStore,
    InsufficientEnergy,
    NoHarvest,
    Supercapacitor,
    charge,
    discharge,
    time_to_harvest,
    usable_energy,
)
from edtn.link_models import (
    Bundle,
    GprsModel,
    LinkModels,
    PhaseCostTable,
    Technology,
    bundle_chain_cost,
    fit_gprs_curve,
    optimal_gprs_buffer,
    transfer_energy,
    transfer_time,
)

__all__ = [
    "Bundle",
    "Dynamo",
    "EnergyLedger",
    "EnergyStore",
    "GprsModel",
    "InsufficientEnergy",
    "LinkModels",
    "NoHarvest",
    "PhaseCostTable",
    "Supercapacitor",
    "Technology",
    "bundle_chain_cost",
    "charge",
    "discharge",
    "fit_gprs_curve",
    "optimal_gprs_buffer",
    "time_to_harvest",
    "transfer_energy",
    "transfer_time",
    "usable_energy",
]
