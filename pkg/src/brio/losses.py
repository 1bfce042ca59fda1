"""Robust loss functions on normalized (dimensionless) residuals.

Each loss exposes the value ``rho(x)``, the influence ``psi(x) = rho'(x)`` and
the IRLS weight ``w(x) = psi(x) / x`` with ``w(0) = 1``.  Residuals must be
divided by their standard deviation before they reach this module.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np


class LossKind(str, enum.Enum):
    QUADRATIC = "quadratic"
    FAIR = "fair"
    HUBER = "huber"
    CAUCHY = "cauchy"
    WELSCH = "welsch"


# Constants giving 95 % asymptotic efficiency at the standard normal.
# Frozen from an adaptive-quadrature root find; tests/test_losses.py re-derives them.
EFFICIENCY_95 = {
    LossKind.FAIR: 1.399777,
    LossKind.HUBER: 1.344998,
    LossKind.CAUCHY: 2.384947,
    LossKind.WELSCH: 2.984637,
}


def efficiency_tuning_constant(kind: LossKind | str) -> float:
    kind = LossKind(kind)
    if kind is LossKind.QUADRATIC:
        raise ValueError("the quadratic loss has no tuning constant")
    return EFFICIENCY_95[kind]


@dataclass(frozen=True)
class RobustLoss:
    kind: LossKind = LossKind.QUADRATIC
    tuning_constant: float | None = None

    def __post_init__(self):
        kind = LossKind(self.kind)
        object.__setattr__(self, "kind", kind)
        if self.tuning_constant is None:
            c = 1.0 if kind is LossKind.QUADRATIC else EFFICIENCY_95[kind]
            object.__setattr__(self, "tuning_constant", c)
        if not self.tuning_constant > 0:
            raise ValueError("tuning constant must be positive")

    @classmethod
    def from_name(cls, name: str, tuning_constant: float | None = None) -> "RobustLoss":
        return cls(LossKind(name.lower()), tuning_constant)

    def value(self, x):
        return loss_value(self, x)

    def psi(self, x):
        return loss_psi(self, x)

    def weight(self, x):
        return loss_weight(self, x)


def loss_value(loss: RobustLoss, x):
    x = np.asarray(x, dtype=float)
    c = loss.tuning_constant
    a = np.abs(x)
    kind = loss.kind
    if kind is LossKind.QUADRATIC:
        return 0.5 * x * x
    if kind is LossKind.FAIR:
        return c * c * (a / c - np.log1p(a / c))
    if kind is LossKind.HUBER:
        return np.where(a <= c, 0.5 * x * x, c * a - 0.5 * c * c)
    if kind is LossKind.CAUCHY:
        return 0.5 * c * c * np.log1p((x / c) ** 2)
    if kind is LossKind.WELSCH:
        return 0.5 * c * c * -np.expm1(-((x / c) ** 2))
    raise ValueError(f"unknown loss {kind}")


def loss_weight(loss: RobustLoss, x):
    x = np.asarray(x, dtype=float)
    c = loss.tuning_constant
    a = np.abs(x)
    kind = loss.kind
    if kind is LossKind.QUADRATIC:
        return np.ones_like(x)
    if kind is LossKind.FAIR:
        return 1.0 / (1.0 + a / c)
    if kind is LossKind.HUBER:
        return np.where(a <= c, 1.0, c / np.maximum(a, c))
    if kind is LossKind.CAUCHY:
        return 1.0 / (1.0 + (x / c) ** 2)
    if kind is LossKind.WELSCH:
        return np.exp(-((x / c) ** 2))
    raise ValueError(f"unknown loss {kind}")


def loss_psi(loss: RobustLoss, x):
    x = np.asarray(x, dtype=float)
    return x * loss_weight(loss, x)


def loss_psi_prime(loss: RobustLoss, x):
    """Derivative of the influence function, used by the efficiency integral."""
    x = np.asarray(x, dtype=float)
    c = loss.tuning_constant
    a = np.abs(x)
    kind = loss.kind
    if kind is LossKind.QUADRATIC:
        return np.ones_like(x)
    if kind is LossKind.FAIR:
        return 1.0 / (1.0 + a / c) ** 2
    if kind is LossKind.HUBER:
        return np.where(a <= c, 1.0, 0.0)
    if kind is LossKind.CAUCHY:
        u = (x / c) ** 2
        return (1.0 - u) / (1.0 + u) ** 2
    if kind is LossKind.WELSCH:
        u = (x / c) ** 2
        return (1.0 - 2.0 * u) * np.exp(-u)
    raise ValueError(f"unknown loss {kind}")
