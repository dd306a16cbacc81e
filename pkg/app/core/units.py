# app/core/units.py
"""
Unit ingestion at the configuration boundary.

Config values are either plain numbers, already expressed in the field's
boundary unit (µm, Ω, fF, pH, ps), or strings with a unit suffix that pint
parses and converts ("0.2 fF", "1.5ps", "0.4 pH"). Internally everything is SI
(seconds, farads, henries, ohms) except lengths, which stay in µm.
"""
from functools import lru_cache
from typing import Union

from pint import UnitRegistry
from pint.errors import DimensionalityError, UndefinedUnitError

from app.core.errors import ConfigError

Number = Union[int, float]


@lru_cache(maxsize=1)
def _registry() -> UnitRegistry:
    return UnitRegistry()


# boundary unit for each physical kind, and the SI scale used internally
BOUNDARY_UNITS = {
    "length": ("micrometer", 1.0),          # µm stays µm
    "resistance": ("ohm", 1.0),
    "capacitance": ("femtofarad", 1e-15),
    "inductance": ("picohenry", 1e-12),
    "time": ("picosecond", 1e-12),
    "dimensionless": ("dimensionless", 1.0),
}


def to_boundary(key: str, value: Union[Number, str], kind: str) -> float:
    """
    Return `value` expressed in the boundary unit of `kind`.

    Per-unit-length quantities (Ω/µm, fF/µm, pH/µm) are given without the
    "/µm" part; the suffix only carries the numerator unit.
    """
    if isinstance(value, bool):
        raise ConfigError(key, "expected a number, got a boolean")
    if isinstance(value, (int, float)):
        return float(value)
    if not isinstance(value, str):
        raise ConfigError(key, f"expected a number or a unit string, got {type(value).__name__}")

    unit, _ = BOUNDARY_UNITS[kind]
    ureg = _registry()
    try:
        qty = ureg.Quantity(value.strip())
    except (UndefinedUnitError, ValueError, AttributeError) as e:
        raise ConfigError(key, f"unknown unit suffix in '{value}' ({e})") from e

    if qty.dimensionless and kind != "dimensionless":
        # bare number inside a string: already in the boundary unit
        return float(qty.magnitude)
    try:
        return float(qty.to(unit).magnitude)
    except DimensionalityError as e:
        raise ConfigError(
            key, f"unit suffix '{qty.units:~}' is not a {kind} (expected {unit})"
        ) from e


def boundary_to_si(value: float, kind: str) -> float:
    return value * BOUNDARY_UNITS[kind][1]
