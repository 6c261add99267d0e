"""Per-farm battery: state of charge, power limits and conversion losses.

Energy crossing the battery boundary is measured on the AC bus. Charging
``e`` kWh from the bus stores ``e * eta_c``; drawing ``x`` kWh of stored
energy delivers ``x * eta_d`` to the bus.
"""

from __future__ import annotations

from dataclasses import dataclass


class InvalidBatterySpec(ValueError):
    pass


class NegativeEnergy(ValueError):
    pass


@dataclass(frozen=True)
class BatterySpec:
    """Defaults follow a PowerWall-class home battery."""

    capacity: float = 13.5
    max_charge_power: float = 5.0
    max_discharge_power: float = 5.0
    eta_c: float = 0.95
    eta_d: float = 0.95
    soc_min_frac: float = 0.1
    soc_max_frac: float = 1.0
    initial_soc_frac: float = 0.5

    def __post_init__(self):
        if not self.capacity > 0:
            raise InvalidBatterySpec("capacity must be positive")
        if not (self.max_charge_power > 0 and self.max_discharge_power > 0):
            raise InvalidBatterySpec("power limits must be positive")
        if not (0 < self.eta_c <= 1 and 0 < self.eta_d <= 1):
            raise InvalidBatterySpec("efficiencies must lie in (0, 1]")
        if not 0 <= self.soc_min_frac < self.soc_max_frac <= 1:
            raise InvalidBatterySpec("need 0 <= soc_min_frac < soc_max_frac <= 1")
        if not self.soc_min_frac <= self.initial_soc_frac <= self.soc_max_frac:
            raise InvalidBatterySpec("initial_soc_frac outside [soc_min_frac, soc_max_frac]")

    @property
    def soc_min(self) -> float:
        return self.soc_min_frac * self.capacity

    @property
    def soc_max(self) -> float:
        return self.soc_max_frac * self.capacity

    def initial_state(self) -> BatteryState:
        return BatteryState(self.initial_soc_frac * self.capacity)


@dataclass(frozen=True)
class BatteryState:
    soc: float

    def fraction(self, spec: BatterySpec) -> float:
        return self.soc / spec.capacity


def max_accept(state: BatteryState, spec: BatterySpec, dt: float = 1.0) -> float:
    """Largest bus-side energy the battery can take in ``dt`` hours."""
    if not dt > 0:
        raise ValueError("dt must be positive")
    headroom = max(spec.soc_max - state.soc, 0.0)
    return min(spec.max_charge_power * dt, headroom / spec.eta_c)


def max_deliver(state: BatteryState, spec: BatterySpec, dt: float = 1.0) -> float:
    """Largest bus-side energy the battery can supply in ``dt`` hours."""
    if not dt > 0:
        raise ValueError("dt must be positive")
    margin = max(state.soc - spec.soc_min, 0.0)
    return min(spec.max_discharge_power * dt, margin * spec.eta_d)


def apply_charge(state: BatteryState, spec: BatterySpec, e_bus: float, dt: float = 1.0):
    """Charge with up to ``e_bus`` kWh; returns ``(new_state, accepted_bus)``."""
    if e_bus < 0:
        raise NegativeEnergy(f"charge energy must be non-negative, got {e_bus!r}")
    accepted = min(e_bus, max_accept(state, spec, dt))
    if accepted <= 0:
        return state, 0.0
    return BatteryState(min(state.soc + accepted * spec.eta_c, spec.soc_max)), accepted


def apply_discharge(state: BatteryState, spec: BatterySpec, e_bus_requested: float, dt: float = 1.0):
    """Discharge up to ``e_bus_requested`` kWh; returns ``(new_state, delivered_bus)``."""
    if e_bus_requested < 0:
        raise NegativeEnergy(f"discharge energy must be non-negative, got {e_bus_requested!r}")
    delivered = min(e_bus_requested, max_deliver(state, spec, dt))
    if delivered <= 0:
        return state, 0.0
    return BatteryState(max(state.soc - delivered / spec.eta_d, spec.soc_min)), delivered
