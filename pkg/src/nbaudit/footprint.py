"""Environmental-footprint estimate for a pipeline run.

energy_kwh = runtime_h * (cores * core_power_w * usage
                          + mem_gb * mem_power_w_per_gb) * pue / 1000
carbon     = energy * carbon_intensity
tree_months = carbon / (11/12 kg CO2e per tree-month)
"""

from __future__ import annotations

from dataclasses import dataclass, asdict

# Derived from the published outputs for the study's location (kg CO2e/kWh).
DEFAULT_CARBON_INTENSITY = 0.3386
# kg CO2e sequestered per mature tree per year.
TREE_YEAR_KG = 11.0


@dataclass(frozen=True)
class HardwareParams:
    cores: int = 36
    core_power_w: float = 10.0
    usage: float = 1.0
    mem_gb: float = 192.0
    mem_power_w_per_gb: float = 0.3725
    pue: float = 1.67


@dataclass(frozen=True)
class LocationParams:
    carbon_intensity_kg_per_kwh: float = DEFAULT_CARBON_INTENSITY


@dataclass(frozen=True)
class FootprintEstimate:
    energy_kwh: float
    carbon_kgco2e: float
    tree_months: float
    parameters: dict

    @property
    def tree_years(self) -> float:
        return self.tree_months / 12.0


def estimate_footprint(
    runtime_h: float,
    hw: HardwareParams = HardwareParams(),
    location: LocationParams = LocationParams(),
) -> FootprintEstimate:
    if runtime_h <= 0:
        raise ValueError("runtime must be positive")
    for name, value in list(asdict(hw).items()) + list(asdict(location).items()):
        if value <= 0:
            raise ValueError(f"parameter {name} must be positive")
    power_w = hw.cores * hw.core_power_w * hw.usage + hw.mem_gb * hw.mem_power_w_per_gb
    energy_kwh = runtime_h * power_w * hw.pue / 1000.0
    return from_energy(energy_kwh, hw, location)


def from_energy(
    energy_kwh: float,
    hw: HardwareParams = HardwareParams(),
    location: LocationParams = LocationParams(),
) -> FootprintEstimate:
    """Footprint from an already-known energy figure."""
    carbon = energy_kwh * location.carbon_intensity_kg_per_kwh
    tree_months = carbon / (TREE_YEAR_KG / 12.0)
    return FootprintEstimate(
        energy_kwh=energy_kwh,
        carbon_kgco2e=carbon,
        tree_months=tree_months,
        parameters={**asdict(hw), **asdict(location)},
    )
