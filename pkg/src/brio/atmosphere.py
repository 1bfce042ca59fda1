"""Troposphere pressure/altitude model used by the barometer factor.

The forward map is the standard NASA earth-atmosphere fit.  Its reference
pressure 101290 Pa does not map to 0 m (it maps to about 9.245 m); only
altitude differences are used by the estimator, so this offset is harmless.
"""

from __future__ import annotations

import numpy as np

REFERENCE_PRESSURE = 101290.0
EXPONENT = 5.256
LAPSE_RATE = -0.00649
TEMPERATURE_SCALE = 288.08
TEMPERATURE_OFFSET = 273.1 + 15.04

# Troposphere branch of the model.
MIN_ALTITUDE = -1000.0
MAX_ALTITUDE = 11000.0


def altitude(pressure):
    """Altitude in meters from static pressure in Pa."""
    pressure = np.asarray(pressure, dtype=float)
    if np.any(pressure <= 0):
        raise ValueError("pressure must be positive")
    temperature = TEMPERATURE_SCALE * (pressure / REFERENCE_PRESSURE) ** (1.0 / EXPONENT)
    return (temperature - TEMPERATURE_OFFSET) / LAPSE_RATE


def altitude_derivative(pressure):
    """``d altitude / d pressure`` in m/Pa (negative)."""
    pressure = np.asarray(pressure, dtype=float)
    ratio = pressure / REFERENCE_PRESSURE
    return TEMPERATURE_SCALE * ratio ** (1.0 / EXPONENT - 1.0) / (EXPONENT * REFERENCE_PRESSURE * LAPSE_RATE)


def pressure(alt):
    """Inverse of :func:`altitude`; raises outside the troposphere branch."""
    alt = np.asarray(alt, dtype=float)
    if np.any(alt < MIN_ALTITUDE) or np.any(alt > MAX_ALTITUDE) or not np.all(np.isfinite(alt)):
        raise ValueError(f"altitude outside the invertible range [{MIN_ALTITUDE}, {MAX_ALTITUDE}] m")
    temperature = alt * LAPSE_RATE + TEMPERATURE_OFFSET
    return REFERENCE_PRESSURE * (temperature / TEMPERATURE_SCALE) ** EXPONENT
