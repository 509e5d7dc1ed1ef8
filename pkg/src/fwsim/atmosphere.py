"""ICAO non-standard atmosphere (troposphere only).

A column model is fixed by the mean-sea-level temperature and pressure
offsets (dT, dp). With both zero it reduces exactly to the standard
atmosphere. Pressure altitude Hp and pressure are in one-to-one
correspondence independent of the offsets; geopotential altitude H depends
on both.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from .geodesy import (
    BETA_T,
    G0_STANDARD,
    HP_TROPOPAUSE,
    P0_STANDARD,
    R_AIR,
    RHO0_STANDARD,
    T0_STANDARD,
)

# exponent g0 / (R * |beta|) of the pressure / pressure-altitude law
_G_OVER_R_BETA = -G0_STANDARD / (R_AIR * BETA_T)


@dataclass(frozen=True)
class AtmosState:
    hp: float      # pressure altitude, m
    p: float       # Pa
    temp: float    # K
    rho: float     # kg/m^3
    delta: float = field(init=False)
    theta: float = field(init=False)
    sigma: float = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "delta", self.p / P0_STANDARD)
        object.__setattr__(self, "theta", self.temp / T0_STANDARD)
        object.__setattr__(self, "sigma", self.rho / RHO0_STANDARD)


def _check_troposphere(hp: float) -> None:
    if hp > HP_TROPOPAUSE:
        raise ValueError(f"pressure altitude {hp:.1f} m above the tropopause")


def temperature_isa(hp: float) -> float:
    _check_troposphere(hp)
    return T0_STANDARD + BETA_T * hp


def temperature(hp: float, dt_offset: float) -> float:
    _check_troposphere(hp)
    return T0_STANDARD + dt_offset + BETA_T * hp


def pressure_from_hp(hp: float) -> float:
    _check_troposphere(hp)
    return P0_STANDARD * (1.0 + BETA_T / T0_STANDARD * hp) ** _G_OVER_R_BETA


def hp_from_pressure(p: float) -> float:
    if p <= 0.0:
        raise ValueError("pressure must be positive")
    return T0_STANDARD / BETA_T * ((p / P0_STANDARD) ** (1.0 / _G_OVER_R_BETA) - 1.0)


def hp_at_msl(dp_offset: float) -> float:
    """Pressure altitude of the zero-geopotential surface."""
    return hp_from_pressure(P0_STANDARD + dp_offset)


def geopotential_from_hp(hp: float, dt_offset: float, dp_offset: float) -> float:
    """H(Hp, dT, dp); collapses to H == Hp in standard conditions."""
    _check_troposphere(hp)
    hp_msl = hp_at_msl(dp_offset)
    t_isa_msl = T0_STANDARD + BETA_T * hp_msl
    h = hp - hp_msl
    if dt_offset != 0.0:
        h += dt_offset / BETA_T * math.log((T0_STANDARD + BETA_T * hp) / t_isa_msl)
    return h


def hp_from_geopotential(big_h: float, dt_offset: float, dp_offset: float,
                         tol: float = 1e-9, max_iter: int = 50) -> float:
    """Invert H(Hp) by Newton iteration with dH/dHp = T / T_isa."""
    hp = big_h
    for _ in range(max_iter):
        resid = geopotential_from_hp(hp, dt_offset, dp_offset) - big_h
        slope = temperature(hp, dt_offset) / temperature_isa(hp)
        step = resid / slope
        hp -= step
        if abs(step) < tol:
            return hp
    raise RuntimeError("pressure-altitude iteration did not converge")


def state_at(big_h: float, dt_offset: float, dp_offset: float) -> AtmosState:
    """Atmospheric state at geopotential altitude H for the (dT, dp) column."""
    hp = hp_from_geopotential(big_h, dt_offset, dp_offset)
    p = pressure_from_hp(hp)
    t = temperature(hp, dt_offset)
    return AtmosState(hp=hp, p=p, temp=t, rho=p / (R_AIR * t))


def state_at_hp(hp: float, dt_offset: float) -> AtmosState:
    """Atmospheric state at a known pressure altitude (dp plays no role)."""
    p = pressure_from_hp(hp)
    t = temperature(hp, dt_offset)
    return AtmosState(hp=hp, p=p, temp=t, rho=p / (R_AIR * t))
