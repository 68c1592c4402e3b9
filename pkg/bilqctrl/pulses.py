"""
Periodic Pulse Families
-----------------------
T-periodic controls u* used to drive a transition: the cosine family, the
duty-cycle (eta) family and a constant pulse. Every shape knows its value,
its Fourier coefficient over one period and its L^r mass per period in
closed form.
"""
import math
from abc import ABC, abstractmethod
from dataclasses import dataclass, replace
from enum import Enum
from typing import Any, Dict, Optional

import numpy as np
from scipy.special import gamma

from .exceptions import ValidationError

# |omega T / 2 pi - m| below this counts as a whole number of turns
_HARMONIC_TOL = 1e-12


class PulseShape(str, Enum):
    COSINE = "cosine"
    DUTY = "duty"
    CONSTANT = "constant"


def _phase_integral(x: float, period: float) -> complex:
    """Integral of e^{i x t} over [0, period], exact at whole turns."""
    turns = x * period / (2.0 * math.pi)
    if abs(turns) < _HARMONIC_TOL:
        return complex(period)
    if abs(turns - round(turns)) < _HARMONIC_TOL:
        return 0j
    return (np.exp(1j * x * period) - 1.0) / (1j * x)


@dataclass(frozen=True)
class PeriodicPulse(ABC):
    """Base class for T-periodic controls."""
    period: float
    amplitude: float = 1.0

    def __post_init__(self):
        if not (np.isfinite(self.period) and self.period > 0):
            raise ValidationError(f"pulse period must be positive, got {self.period}")
        if not np.isfinite(self.amplitude):
            raise ValidationError(f"pulse amplitude must be finite, got {self.amplitude}")

    @property
    @abstractmethod
    def shape(self) -> PulseShape:
        """Family tag."""

    @abstractmethod
    def value(self, t):
        """u*(t), vectorised over numpy arrays."""

    @abstractmethod
    def fourier_coefficient(self, omega: float) -> complex:
        """Integral of u*(t) e^{i omega t} over one period."""

    @abstractmethod
    def power_integral(self, r: float) -> float:
        """Integral of |u*(t)|^r over one period."""

    def scaled(self, factor: float) -> "PeriodicPulse":
        """The pulse multiplied by a constant (u*/n is scaled(1/n))."""
        return replace(self, amplitude=self.amplitude * factor)

    def to_dict(self) -> Dict[str, Any]:
        return {"shape": self.shape.value, "period": self.period, "amplitude": self.amplitude}


@dataclass(frozen=True)
class CosinePulse(PeriodicPulse):
    """u*(t) = amplitude * cos(2 pi t / T)."""

    @property
    def shape(self) -> PulseShape:
        return PulseShape.COSINE

    @property
    def frequency(self) -> float:
        return 2.0 * math.pi / self.period

    def value(self, t):
        return self.amplitude * np.cos(self.frequency * np.asarray(t, dtype=np.float64))

    def fourier_coefficient(self, omega: float) -> complex:
        w0 = self.frequency
        return 0.5 * self.amplitude * (
            _phase_integral(omega + w0, self.period) + _phase_integral(omega - w0, self.period)
        )

    def power_integral(self, r: float) -> float:
        # mean of |cos|^r is Gamma((r+1)/2) / (sqrt(pi) Gamma(r/2 + 1))
        mean = gamma((r + 1.0) / 2.0) / (math.sqrt(math.pi) * gamma(r / 2.0 + 1.0))
        return float(abs(self.amplitude) ** r * self.period * mean)


@dataclass(frozen=True)
class DutyPulse(PeriodicPulse):
    """u*(t) = amplitude on (0, eta) and 0 on [eta, T] (mod T)."""
    eta: float = 0.1

    def __post_init__(self):
        super().__post_init__()
        if not 0 < self.eta < self.period:
            raise ValidationError(f"duty eta must lie in (0, {self.period}), got {self.eta}")

    @property
    def shape(self) -> PulseShape:
        return PulseShape.DUTY

    def value(self, t):
        phase = np.mod(np.asarray(t, dtype=np.float64), self.period)
        return np.where((phase > 0) & (phase < self.eta), self.amplitude, 0.0)

    def fourier_coefficient(self, omega: float) -> complex:
        if omega == 0:
            return complex(self.amplitude * self.eta)
        return self.amplitude * (np.exp(1j * omega * self.eta) - 1.0) / (1j * omega)

    def power_integral(self, r: float) -> float:
        return float(abs(self.amplitude) ** r * self.eta)

    def to_dict(self) -> Dict[str, Any]:
        data = super().to_dict()
        data["eta"] = self.eta
        return data


@dataclass(frozen=True)
class ConstantPulse(PeriodicPulse):
    """u*(t) = amplitude; the period only sets the sampling grid."""

    @property
    def shape(self) -> PulseShape:
        return PulseShape.CONSTANT

    def value(self, t):
        return np.full(np.shape(t), self.amplitude, dtype=np.float64)

    def fourier_coefficient(self, omega: float) -> complex:
        return self.amplitude * _phase_integral(omega, self.period)

    def power_integral(self, r: float) -> float:
        return float(abs(self.amplitude) ** r * self.period)


def make_pulse(shape: str, period: float, eta: Optional[float] = None,
               amplitude: float = 1.0) -> PeriodicPulse:
    """
    Build a pulse from its family name.

    Args:
        shape: 'cosine', 'duty' or 'constant'
        period: T in seconds
        eta: On-time of the duty pulse (required for 'duty')
        amplitude: Peak value
    """
    try:
        kind = PulseShape(shape)
    except ValueError as e:
        raise ValidationError(f"unknown pulse shape '{shape}'") from e
    if kind is PulseShape.COSINE:
        return CosinePulse(period=period, amplitude=amplitude)
    if kind is PulseShape.DUTY:
        if eta is None:
            raise ValidationError("duty pulse needs eta")
        return DutyPulse(period=period, amplitude=amplitude, eta=eta)
    return ConstantPulse(period=period, amplitude=amplitude)
