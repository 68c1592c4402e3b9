"""
RWA Pulse Synthesis
-------------------
Rotating-wave pulses driving one transition (j, k): pulse construction at
the transition frequency, resonance checks, the critical time T* of the
averaged dynamics and the search for the near-optimal time T*_n of the
scaled pulse u*/n inside (nT* - T, nT* + T).
"""
import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
import structlog
from scipy.optimize import minimize_scalar

from .exceptions import ValidationError
from .linalg import basis_vector
from .propagation import PiecewiseConstantControl, Propagator, discretize_pulse
from .pulses import PeriodicPulse, make_pulse
from .system import GalerkinSystem
from .transitions import GAP_TOL, ResonanceSet, is_nondegenerate, resonance_set
from .workers import run_ordered

logger = structlog.get_logger(__name__)

RESONANCE_TOL = 1e-12
DEFAULT_STEPS_PER_PERIOD = 64
DEFAULT_SCAN_POINTS = 401
MIN_SCAN_POINTS = 200


@dataclass
class PulseSchedule:
    """Result of the T*_n search for one (pulse, n)."""
    transition: Tuple[int, int]
    pulse: PeriodicPulse
    fourier_coeff: complex
    t_star: float
    n: int
    window: Tuple[float, float]
    t_star_n: float
    fidelity: float
    l1_cost: float
    steps_per_period: int
    asymptotic_l1_cost: float = float("nan")
    source_overlap: float = float("nan")
    control: Optional[PiecewiseConstantControl] = field(default=None, repr=False)
    scan: Optional[pd.DataFrame] = field(default=None, repr=False)

    @property
    def period(self) -> float:
        return self.pulse.period

    def to_dict(self) -> Dict:
        return {
            "transition": list(self.transition),
            "pulse": self.pulse.to_dict(),
            "fourier_coeff": {"re": self.fourier_coeff.real, "im": self.fourier_coeff.imag},
            "t_star": self.t_star,
            "n": self.n,
            "window": list(self.window),
            "t_star_n": self.t_star_n,
            "fidelity": self.fidelity,
            "l1_cost": self.l1_cost,
            "asymptotic_l1_cost": self.asymptotic_l1_cost,
            "source_overlap": self.source_overlap,
            "steps_per_period": self.steps_per_period,
        }


def fourier_coefficient(pulse: PeriodicPulse, omega: float) -> complex:
    """Integral over one period of u*(t) e^{i omega t}."""
    return complex(pulse.fourier_coefficient(omega))


def transition_frequency(system: GalerkinSystem, j: int, k: int) -> float:
    """lambda_j - lambda_k."""
    system._check_level(j)
    system._check_level(k)
    return float(system.spectrum[j - 1] - system.spectrum[k - 1])


def rwa_pulse(system: GalerkinSystem, j: int, k: int, shape: str = "cosine",
              eta: Optional[float] = None, amplitude: float = 1.0) -> PeriodicPulse:
    """Pulse of the given family with period 2 pi / |lambda_j - lambda_k|."""
    gap = abs(transition_frequency(system, j, k))
    if gap == 0:
        raise ValidationError(f"levels {j} and {k} have equal energy; no resonant period")
    return make_pulse(shape, 2.0 * math.pi / gap, eta=eta, amplitude=amplitude)


def check_resonance_vanishing(pulse: PeriodicPulse, resonances: ResonanceSet,
                              system: GalerkinSystem) -> bool:
    """True iff the pulse has no Fourier weight at any resonance frequency."""
    for l, m in resonances:
        coeff = fourier_coefficient(pulse, transition_frequency(system, l, m))
        if abs(coeff) > RESONANCE_TOL:
            logger.debug("resonance_not_vanishing", pair=(l, m), coefficient=abs(coeff))
            return False
    return True


def critical_time(system: GalerkinSystem, j: int, k: int, pulse: PeriodicPulse,
                  gap_tol: float = GAP_TOL) -> float:
    """
    T* = pi T / (2 |b_jk| |c_jk|), c_jk the Fourier coefficient at lambda_j - lambda_k.

    Raises:
        ValidationError: degenerate transition, or the pulse does not drive it
    """
    record = is_nondegenerate(system, j, k, gap_tol)
    if not record.nondegenerate:
        raise ValidationError(f"transition {record.pair} is degenerate")
    coeff = fourier_coefficient(pulse, transition_frequency(system, j, k))
    if abs(coeff) <= RESONANCE_TOL:
        raise ValidationError(
            f"pulse does not drive transition ({j}, {k}): |coefficient| = {abs(coeff):.3e}"
        )
    b_jk = abs(system.coupling[j - 1, k - 1])
    return math.pi * pulse.period / (2.0 * b_jk * abs(coeff))


def asymptotic_l1_cost(system: GalerkinSystem, j: int, k: int, pulse: PeriodicPulse,
                       gap_tol: float = GAP_TOL) -> float:
    """L1 mass of u*/n over nT*, which does not depend on n: T* (int_0^T |u*|) / T."""
    t_star = critical_time(system, j, k, pulse, gap_tol)
    return t_star * pulse.power_integral(1.0) / pulse.period


def find_optimal_time(system: GalerkinSystem, j: int, k: int, pulse: PeriodicPulse, n: int,
                      steps_per_period: int = DEFAULT_STEPS_PER_PERIOD,
                      scan_points: int = DEFAULT_SCAN_POINTS,
                      gap_tol: float = GAP_TOL) -> PulseSchedule:
    """
    Locate T*_n, the time in (nT* - T, nT* + T) maximising |<phi_k, psi(t)>|
    when u*/n drives psi(0) = phi_j.

    The scaled pulse is propagated once over [0, nT* + T]; the window is
    scanned on scan_points interior points and the best point is refined
    with a bounded scalar search between its neighbours.

    Args:
        system: Truncated (A, B) pair
        j, k: Source and target levels
        pulse: RWA pulse u* (see rwa_pulse)
        n: Amplitude divisor (>= 1)
        steps_per_period: Discretization of smooth pulses
        scan_points: Number of scan points in the window (>= 200)
        gap_tol: Relative tolerance for the resonance tests

    Returns:
        PulseSchedule: T*_n, fidelity and L1 cost over [0, T*_n]
    """
    if int(n) != n or n < 1:
        raise ValidationError(f"n must be a positive integer, got {n}")
    if scan_points < MIN_SCAN_POINTS:
        raise ValidationError(f"scan_points must be >= {MIN_SCAN_POINTS}, got {scan_points}")
    n = int(n)

    resonances = resonance_set(system, j, k, gap_tol)
    if not check_resonance_vanishing(pulse, resonances, system):
        raise ValidationError(
            f"pulse has non-vanishing Fourier coefficients on the resonance set {resonances.pairs}"
        )
    t_star = critical_time(system, j, k, pulse, gap_tol)
    period = pulse.period
    lo, hi = n * t_star - period, n * t_star + period
    if lo <= 0:
        raise ValidationError(
            f"window ({lo:.6g}, {hi:.6g}) is degenerate: n T* = {n * t_star:.6g} <= T = {period:.6g}"
        )

    control = discretize_pulse(pulse.scaled(1.0 / n), hi, steps_per_period)
    propagator = Propagator.for_system(system)
    psi0 = basis_vector(system.n_levels, j)
    checkpoints = propagator.checkpoints(control, psi0)

    def fidelity_at(t: float) -> float:
        return float(abs(propagator.state_at(control, checkpoints, t)[k - 1]))

    times = np.linspace(lo, hi, scan_points + 2)[1:-1]
    fidelities = np.abs(propagator.sample(control, psi0, times)[:, k - 1])
    best = int(np.argmax(fidelities))
    t_best, f_best = float(times[best]), float(fidelities[best])

    left = times[best - 1] if best > 0 else lo
    right = times[best + 1] if best < times.size - 1 else hi
    refined = minimize_scalar(lambda t: -fidelity_at(t), bounds=(left, right), method="bounded",
                              options={"xatol": 1e-10})
    if refined.success and lo < refined.x < hi and -refined.fun > f_best:
        t_best, f_best = float(refined.x), float(-refined.fun)

    used = control.restricted(t_best)
    final = propagator.state_at(control, checkpoints, t_best)
    schedule = PulseSchedule(
        transition=(j, k),
        pulse=pulse,
        fourier_coeff=fourier_coefficient(pulse, transition_frequency(system, j, k)),
        t_star=t_star,
        n=n,
        window=(lo, hi),
        t_star_n=t_best,
        fidelity=f_best,
        l1_cost=used.lp_mass(1.0),
        steps_per_period=steps_per_period,
        asymptotic_l1_cost=t_star * pulse.power_integral(1.0) / period,
        source_overlap=float(abs(final[j - 1])),
        control=used,
        scan=pd.DataFrame({"t": times, "fidelity": fidelities}),
    )
    logger.info("schedule_found", transition=(j, k), shape=pulse.shape.value, n=n,
                t_star_n=schedule.t_star_n, fidelity=schedule.fidelity, l1_cost=schedule.l1_cost)
    return schedule


def fidelity_sweep(system: GalerkinSystem, j: int, k: int, pulse: PeriodicPulse,
                   n_values: Sequence[int], steps_per_period: int = DEFAULT_STEPS_PER_PERIOD,
                   scan_points: int = DEFAULT_SCAN_POINTS, threads: Optional[int] = None,
                   show_progress: bool = True) -> List[PulseSchedule]:
    """find_optimal_time for each n, returned in the order of n_values."""
    return run_ordered(
        lambda n: find_optimal_time(system, j, k, pulse, n, steps_per_period, scan_points),
        list(n_values), threads=threads, desc="fidelity sweep", show_progress=show_progress,
    )


def schedules_frame(schedules: Sequence[PulseSchedule]) -> pd.DataFrame:
    """One row per schedule: n, t_star, t_star_n, fidelity, l1_cost."""
    return pd.DataFrame([
        {
            "n": s.n,
            "t_star": s.t_star,
            "t_star_n": s.t_star_n,
            "fidelity": s.fidelity,
            "l1_cost": s.l1_cost,
            "asymptotic_l1_cost": s.asymptotic_l1_cost,
            "source_overlap": s.source_overlap,
        }
        for s in schedules
    ])
