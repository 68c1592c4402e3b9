"""
Propagation Engine
------------------
Propagates states of a GalerkinSystem under piecewise-constant controls by
composing exact exponentials exp(dt (A + u_j B)), one per piece, and provides
the energy / |A|^{s/2} norms and the consistency checks built on them
(energy rate, time reversal, Galerkin comparison, norm growth, pulse
discretization convergence).
"""
import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Dict, Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd
import structlog

from .exceptions import SystemFileError, ValidationError
from .linalg import ComplexMatrix, ComplexVector, SkewHermitianGenerator, as_vector, basis_vector
from .pulses import PeriodicPulse, PulseShape
from .system import GalerkinSystem

logger = structlog.get_logger(__name__)

NORM_TOL = 1e-9
# Centered-difference step as a fraction of the piece length
ENERGY_RATE_STEP = 1e-4


@dataclass(frozen=True, eq=False)
class PiecewiseConstantControl:
    """u(t) = values[j] on (breakpoints[j], breakpoints[j+1])."""
    breakpoints: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        breakpoints = np.array(self.breakpoints, dtype=np.float64)
        values = np.array(self.values, dtype=np.float64)
        if breakpoints.ndim != 1 or values.ndim != 1:
            raise ValidationError("breakpoints and values must be 1-D")
        if values.size < 1 or breakpoints.size != values.size + 1:
            raise ValidationError(
                f"need M >= 1 values and M + 1 breakpoints, got {values.size} and {breakpoints.size}"
            )
        if not (np.all(np.isfinite(breakpoints)) and np.all(np.isfinite(values))):
            raise ValidationError("control has non-finite breakpoints or values")
        if breakpoints[0] != 0.0:
            raise ValidationError(f"first breakpoint must be 0, got {breakpoints[0]}")
        if np.any(np.diff(breakpoints) <= 0):
            raise ValidationError("breakpoints must be strictly increasing")
        breakpoints.setflags(write=False)
        values.setflags(write=False)
        object.__setattr__(self, "breakpoints", breakpoints)
        object.__setattr__(self, "values", values)

    @classmethod
    def constant(cls, value: float, duration: float) -> "PiecewiseConstantControl":
        return cls(np.array([0.0, duration]), np.array([value]))

    @classmethod
    def from_durations(cls, durations: Sequence[float], values: Sequence[float]) -> "PiecewiseConstantControl":
        durations = np.asarray(durations, dtype=np.float64)
        return cls(np.concatenate([[0.0], np.cumsum(durations)]), values)

    @property
    def duration(self) -> float:
        return float(self.breakpoints[-1])

    @property
    def n_pieces(self) -> int:
        return int(self.values.size)

    @property
    def durations(self) -> np.ndarray:
        return np.diff(self.breakpoints)

    def piece_index(self, t):
        """Index j of the piece [t_j, t_{j+1}) holding t; t = t_M maps to the last piece."""
        idx = np.searchsorted(self.breakpoints, t, side="right") - 1
        return np.clip(idx, 0, self.n_pieces - 1)

    def is_breakpoint(self, t: float, tol: float = 0.0) -> bool:
        return bool(np.min(np.abs(self.breakpoints - t)) <= tol)

    def value_at(self, t: float) -> float:
        return float(self.values[self.piece_index(t)])

    def primitive(self, t):
        """Integral of u over [0, t]."""
        t = np.asarray(t, dtype=np.float64)
        idx = self.piece_index(t)
        cumulative = np.concatenate([[0.0], np.cumsum(self.values * self.durations)])
        return cumulative[idx] + self.values[idx] * (t - self.breakpoints[idx])

    def lp_mass(self, p: float) -> float:
        """Integral of |u|^p over [0, T] (exact for piecewise-constant u)."""
        return float(np.sum(np.abs(self.values) ** p * self.durations))

    def restricted(self, t_end: float) -> "PiecewiseConstantControl":
        """The control on [0, t_end]."""
        if not 0 < t_end <= self.duration:
            raise ValidationError(f"restriction end {t_end} outside (0, {self.duration}]")
        j = int(self.piece_index(t_end))
        if t_end == self.breakpoints[j] and j > 0:
            j -= 1
        breakpoints = np.concatenate([self.breakpoints[: j + 1], [t_end]])
        return PiecewiseConstantControl(breakpoints, self.values[: j + 1])

    def zero_padded(self, total_duration: float) -> "PiecewiseConstantControl":
        """Append u = 0 up to total_duration."""
        if total_duration < self.duration:
            raise ValidationError("padding cannot shorten a control")
        if total_duration == self.duration:
            return self
        return PiecewiseConstantControl(
            np.concatenate([self.breakpoints, [total_duration]]),
            np.concatenate([self.values, [0.0]]),
        )

    def reversed(self) -> "PiecewiseConstantControl":
        """t -> u(T - t)."""
        return PiecewiseConstantControl.from_durations(self.durations[::-1], self.values[::-1])

    def concatenate(self, other: "PiecewiseConstantControl") -> "PiecewiseConstantControl":
        return PiecewiseConstantControl(
            np.concatenate([self.breakpoints, self.duration + other.breakpoints[1:]]),
            np.concatenate([self.values, other.values]),
        )

    def scaled(self, factor: float) -> "PiecewiseConstantControl":
        return PiecewiseConstantControl(self.breakpoints, self.values * factor)

    def to_dict(self) -> Dict[str, List[float]]:
        return {"breakpoints": self.breakpoints.tolist(), "values": self.values.tolist()}


def save_control(control: PiecewiseConstantControl, path: Union[str, Path]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(control.to_dict(), indent=2) + "\n", encoding="utf-8")
    return path


def load_control(path: Union[str, Path]) -> PiecewiseConstantControl:
    """Read a control file: JSON object with 'breakpoints' and 'values'."""
    path = Path(path)
    text = path.read_text(encoding="utf-8")
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as e:
        raise SystemFileError(e.msg, path=str(path), line=e.lineno, column=e.colno) from e
    if not isinstance(raw, dict) or "breakpoints" not in raw or "values" not in raw:
        raise SystemFileError("control file needs 'breakpoints' and 'values'", path=str(path), line=1)
    return PiecewiseConstantControl(raw["breakpoints"], raw["values"])


@dataclass(frozen=True, eq=False)
class StateVector:
    """Complex amplitudes over the eigenbasis phi_1..phi_N."""
    amplitudes: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "amplitudes", as_vector(self.amplitudes, "state"))

    @classmethod
    def basis(cls, dim: int, k: int) -> "StateVector":
        """The eigenstate phi_k (1-based)."""
        return cls(basis_vector(dim, k))

    @property
    def dim(self) -> int:
        return int(self.amplitudes.size)

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    @property
    def populations(self) -> np.ndarray:
        return np.abs(self.amplitudes) ** 2

    def overlap(self, k: int) -> complex:
        """<phi_k, psi>."""
        return complex(self.amplitudes[k - 1])

    def embedded(self, dim: int) -> "StateVector":
        """Zero-extend to a larger truncation."""
        if dim < self.dim:
            raise ValidationError(f"cannot embed dim {self.dim} into {dim}")
        out = np.zeros(dim, dtype=np.complex128)
        out[: self.dim] = self.amplitudes
        return StateVector(out)


@dataclass
class Trajectory:
    """States sampled along one propagation."""
    times: np.ndarray
    states: List[StateVector]
    control: PiecewiseConstantControl

    @property
    def final_state(self) -> StateVector:
        return self.states[-1]

    def amplitudes(self) -> np.ndarray:
        """(samples, N) array of amplitudes."""
        return np.vstack([s.amplitudes for s in self.states])

    def max_norm_defect(self) -> float:
        return float(np.max(np.abs(np.linalg.norm(self.amplitudes(), axis=1) - 1.0)))

    def to_frame(self, system: GalerkinSystem) -> pd.DataFrame:
        """Columns t, re_1, im_1, ..., re_N, im_N, norm, energy."""
        amps = self.amplitudes()
        data = {"t": self.times}
        for k in range(amps.shape[1]):
            data[f"re_{k + 1}"] = amps[:, k].real
            data[f"im_{k + 1}"] = amps[:, k].imag
        data["norm"] = np.linalg.norm(amps, axis=1)
        data["energy"] = (np.abs(amps) ** 2) @ system.spectrum
        return pd.DataFrame(data)


class Propagator:
    """
    Propagator of dx/dt = (a + u b) x for piecewise-constant u.

    One spectral factorisation is cached per distinct control value, so
    periodic and discretized pulses only factor a handful of generators.
    Instances are cheap; create one per job rather than sharing.
    """

    def __init__(self, a: ComplexMatrix, b: ComplexMatrix,
                 generator_matrix: Optional[Callable[[float], ComplexMatrix]] = None):
        self.a = np.asarray(a, dtype=np.complex128)
        self.b = np.asarray(b, dtype=np.complex128)
        if self.a.shape != self.b.shape:
            raise ValidationError(f"generator shapes differ: {self.a.shape} vs {self.b.shape}")
        self.dim = self.a.shape[0]
        self._generator_matrix = generator_matrix or (lambda u: self.a + u * self.b)
        self._generators: Dict[float, SkewHermitianGenerator] = {}

    @classmethod
    def for_system(cls, system: GalerkinSystem) -> "Propagator":
        return cls(system.a_matrix(), system.coupling, generator_matrix=system.generator)

    def generator(self, u: float) -> SkewHermitianGenerator:
        key = float(u)
        gen = self._generators.get(key)
        if gen is None:
            gen = SkewHermitianGenerator(self._generator_matrix(key))
            self._generators[key] = gen
        return gen

    def _check_state(self, psi) -> ComplexVector:
        psi = np.asarray(psi, dtype=np.complex128)
        if psi.shape != (self.dim,):
            raise ValidationError(f"state has dim {psi.shape} but system has {self.dim} levels")
        return psi

    def checkpoints(self, control: PiecewiseConstantControl, psi0) -> np.ndarray:
        """States at every breakpoint, shape (M + 1, N)."""
        psi = self._check_state(psi0)
        out = np.empty((control.n_pieces + 1, self.dim), dtype=np.complex128)
        out[0] = psi
        for j, (u, dt) in enumerate(zip(control.values, control.durations)):
            psi = self.generator(u).apply(dt, psi)
            out[j + 1] = psi
        return out

    def state_at(self, control: PiecewiseConstantControl, checkpoints: np.ndarray,
                 t: float) -> ComplexVector:
        """State at time t from precomputed checkpoints."""
        j = int(control.piece_index(t))
        return self.generator(control.values[j]).apply(t - control.breakpoints[j], checkpoints[j])

    def sample(self, control: PiecewiseConstantControl, psi0, times) -> np.ndarray:
        """States at sorted sample times, shape (len(times), N)."""
        psi = self._check_state(psi0)
        times = np.asarray(times, dtype=np.float64)
        out = np.empty((times.size, self.dim), dtype=np.complex128)
        if times.size == 0:
            return out
        pieces = control.piece_index(times)
        cursor = 0
        for j in range(int(pieces[-1]) + 1):
            gen = self.generator(control.values[j])
            start = control.breakpoints[j]
            # partial interval: split the exponential at each sample
            while cursor < times.size and pieces[cursor] == j:
                out[cursor] = gen.apply(times[cursor] - start, psi)
                cursor += 1
            if cursor == times.size:
                break
            psi = gen.apply(control.durations[j], psi)
        return out

    def matrix(self, control: PiecewiseConstantControl) -> ComplexMatrix:
        """X^u(T, 0) as a dense matrix."""
        x = np.eye(self.dim, dtype=np.complex128)
        for u, dt in zip(control.values, control.durations):
            x = self.generator(u).expm(dt) @ x
        return x


def propagator_matrix(a: ComplexMatrix, b: ComplexMatrix,
                      control: PiecewiseConstantControl) -> ComplexMatrix:
    """Ordered product of exp(dt_j (a + u_j b)) over the pieces of the control."""
    return Propagator(a, b).matrix(control)


def _as_state(psi0: Union[StateVector, np.ndarray], dim: int) -> np.ndarray:
    psi = psi0.amplitudes if isinstance(psi0, StateVector) else as_vector(psi0, "psi0")
    if psi.size != dim:
        raise ValidationError(f"state has dim {psi.size} but system has {dim} levels")
    defect = abs(np.linalg.norm(psi) - 1.0)
    if defect > NORM_TOL:
        raise ValidationError(f"initial state must have unit norm (off by {defect:.3e}, tol {NORM_TOL:.0e})")
    return psi


def _sample_grid(control: PiecewiseConstantControl, sample_times) -> np.ndarray:
    if sample_times is None:
        return np.array([0.0, control.duration])
    times = np.atleast_1d(np.asarray(sample_times, dtype=np.float64))
    if times.size == 0:
        raise ValidationError("sample_times is empty")
    if np.any(np.diff(times) < 0):
        raise ValidationError("sample_times must be non-decreasing")
    if times[0] < 0 or times[-1] > control.duration:
        raise ValidationError(
            f"sample_times must lie in [0, {control.duration}], got [{times[0]}, {times[-1]}]"
        )
    return times


def propagate(system: GalerkinSystem, control: PiecewiseConstantControl,
              psi0: Union[StateVector, np.ndarray], sample_times=None) -> Trajectory:
    """
    Propagate psi0 under the control and sample the state.

    Args:
        system: Truncated (A, B) pair
        control: Piecewise-constant control
        psi0: Unit-norm initial state
        sample_times: Non-decreasing times in [0, duration]; defaults to (0, duration)

    Returns:
        Trajectory: Sampled states
    """
    psi = _as_state(psi0, system.n_levels)
    times = _sample_grid(control, sample_times)
    states = Propagator.for_system(system).sample(control, psi, times)
    trajectory = Trajectory(times=times, states=[StateVector(s) for s in states], control=control)
    logger.debug("propagated", system=system.label, pieces=control.n_pieces,
                 samples=times.size, norm_defect=trajectory.max_norm_defect())
    return trajectory


def discretize_pulse(pulse: PeriodicPulse, duration: float,
                     steps_per_period: int = 64) -> PiecewiseConstantControl:
    """
    Piecewise-constant version of a periodic pulse on [0, duration].

    Duty pulses are already piecewise constant and are represented exactly;
    constant pulses become one piece. Smooth pulses are sampled at the
    midpoints of steps_per_period equal steps per period, with the same
    value pattern in every period.
    """
    if not (np.isfinite(duration) and duration > 0):
        raise ValidationError(f"duration must be positive, got {duration}")
    if steps_per_period < 2:
        raise ValidationError(f"steps_per_period must be >= 2, got {steps_per_period}")

    if pulse.shape is PulseShape.CONSTANT:
        return PiecewiseConstantControl.constant(pulse.amplitude, duration)

    period = pulse.period
    n_periods = max(1, math.ceil(duration / period))
    if pulse.shape is PulseShape.DUTY:
        offsets = np.array([0.0, pulse.eta])
        pattern = np.array([pulse.amplitude, 0.0])
    else:
        step = period / steps_per_period
        offsets = np.arange(steps_per_period) * step
        pattern = pulse.value(offsets + 0.5 * step)

    starts = (np.arange(n_periods)[:, None] * period + offsets[None, :]).ravel()
    values = np.tile(pattern, n_periods)
    # drop pieces starting at (or rounding onto) the end
    keep = starts < duration * (1.0 - 1e-12)
    starts, values = starts[keep], values[keep]
    breakpoints = np.concatenate([starts, [duration]])
    return PiecewiseConstantControl(breakpoints, values)


def energy(system: GalerkinSystem, psi: Union[StateVector, np.ndarray]) -> float:
    """E = sum_k lambda_k |psi_k|^2."""
    amps = psi.amplitudes if isinstance(psi, StateVector) else np.asarray(psi, dtype=np.complex128)
    return float(np.abs(amps) ** 2 @ system.spectrum)


def sobolev_norm(system: GalerkinSystem, psi: Union[StateVector, np.ndarray], s: float) -> float:
    """(sum_k lambda_k^s |psi_k|^2)^{1/2}, the |A|^{s/2} norm."""
    if s < 0:
        raise ValidationError(f"Sobolev exponent must be >= 0, got {s}")
    amps = psi.amplitudes if isinstance(psi, StateVector) else np.asarray(psi, dtype=np.complex128)
    if s == 0:
        return float(np.linalg.norm(amps))
    if np.any(system.spectrum == 0) and not system.allow_zero_eigenvalue:
        raise ValidationError("zero eigenvalue with s > 0 requires allow_zero_eigenvalue")
    weights = system.spectrum ** s
    return float(np.sqrt(np.abs(amps) ** 2 @ weights))


def energy_rate_check(system: GalerkinSystem, control: PiecewiseConstantControl,
                      psi0: Union[StateVector, np.ndarray], t: float,
                      dt: Optional[float] = None) -> Tuple[float, float]:
    """
    Compare dE/dt by centered differences with 2 u(t) Re<iA psi, B psi>.

    Args:
        system: Truncated (A, B) pair
        control: Control; t must be interior to one of its pieces
        psi0: Unit-norm initial state
        t: Evaluation time
        dt: Difference step; defaults to ENERGY_RATE_STEP times the piece length

    Returns:
        Tuple[float, float]: (finite-difference rate, analytic rate)
    """
    j = int(control.piece_index(t))
    start, end = control.breakpoints[j], control.breakpoints[j + 1]
    if not start < t < end:
        raise ValidationError(f"t = {t} is at a breakpoint; the energy rate is undefined there")
    if dt is None:
        dt = ENERGY_RATE_STEP * (end - start)
    if not (dt > 0 and start < t - dt and t + dt < end):
        raise ValidationError(f"t +/- dt must stay inside the piece [{start}, {end}]")

    psi = _as_state(psi0, system.n_levels)
    states = Propagator.for_system(system).sample(control, psi, np.array([t - dt, t, t + dt]))
    lhs = (energy(system, states[2]) - energy(system, states[0])) / (2.0 * dt)

    a_psi = system.a_matrix() @ states[1]
    b_psi = system.coupling @ states[1]
    rhs = 2.0 * control.values[j] * float(np.vdot(1j * a_psi, b_psi).real)
    return float(lhs), float(rhs)


def galerkin_compare(sys_small: GalerkinSystem, sys_large: GalerkinSystem,
                     control: PiecewiseConstantControl, psi0: Union[StateVector, np.ndarray],
                     sample_times=None, s: float = 0.0) -> float:
    """
    Largest deviation between the order-N and order-M propagations.

    The small-system state is zero-extended to the large truncation, so the
    deviation includes the mass the large system puts on the extra levels.

    Returns:
        float: max over samples of ||psi_large(t) - psi_small(t)||_{s/2}
    """
    if not sys_small.is_truncation_of(sys_large):
        raise ValidationError(
            f"{sys_small.label} is not a leading truncation of {sys_large.label}"
        )
    amps = psi0.amplitudes if isinstance(psi0, StateVector) else as_vector(psi0, "psi0")
    n_small, n_large = sys_small.n_levels, sys_large.n_levels
    if amps.size == n_large:
        if np.any(amps[n_small:]):
            raise ValidationError("psi0 must be supported on the small system's levels")
        amps = amps[:n_small]
    small0 = _as_state(amps, n_small)
    large0 = StateVector(small0).embedded(n_large).amplitudes

    times = _sample_grid(control, sample_times)
    small = Propagator.for_system(sys_small).sample(control, small0, times)
    large = Propagator.for_system(sys_large).sample(control, large0, times)
    diff = large.copy()
    diff[:, :n_small] -= small
    weights = sys_large.spectrum ** s if s > 0 else np.ones(n_large)
    deviation = np.sqrt((np.abs(diff) ** 2) @ weights)
    return float(np.max(deviation))


def time_reversal_check(system: GalerkinSystem, control: PiecewiseConstantControl) -> float:
    """||X_{(A,B)}^u(T,0)^dagger - X_{(-A,-B)}^{u~}(T,0)||_2 with u~(t) = u(T - t)."""
    a, b = system.a_matrix(), system.coupling
    forward = propagator_matrix(a, b, control)
    backward = propagator_matrix(-a, -b, control.reversed())
    return float(np.linalg.norm(forward.conj().T - backward, ord=2))


def norm_growth(system: GalerkinSystem, control: PiecewiseConstantControl,
                psi0: Union[StateVector, np.ndarray], s: float = 1.0, sample_times=None) -> float:
    """sup over samples of ||psi(t)||_{s/2} / ||psi0||_{s/2}."""
    psi = _as_state(psi0, system.n_levels)
    times = _sample_grid(control, sample_times)
    states = Propagator.for_system(system).sample(control, psi, times)
    reference = sobolev_norm(system, psi, s)
    return max(sobolev_norm(system, state, s) for state in states) / reference


def discretization_convergence(system: GalerkinSystem, pulse: PeriodicPulse, duration: float,
                               psi0: Union[StateVector, np.ndarray],
                               resolutions: Iterable[int] = (16, 32, 64),
                               oracle_steps: int = 1024) -> pd.DataFrame:
    """
    Endpoint error of discretized pulses against a fine-resolution oracle.

    Returns:
        pd.DataFrame: columns steps_per_period, endpoint_error, primitive_error
    """
    psi = _as_state(psi0, system.n_levels)
    oracle_control = discretize_pulse(pulse, duration, oracle_steps)
    oracle = Propagator.for_system(system).checkpoints(oracle_control, psi)[-1]
    grid = np.linspace(0.0, duration, 257)
    oracle_primitive = oracle_control.primitive(grid)

    rows = []
    for steps in resolutions:
        control = discretize_pulse(pulse, duration, steps)
        final = Propagator.for_system(system).checkpoints(control, psi)[-1]
        rows.append({
            "steps_per_period": int(steps),
            "endpoint_error": float(np.linalg.norm(final - oracle)),
            "primitive_error": float(np.max(np.abs(control.primitive(grid) - oracle_primitive))),
        })
    frame = pd.DataFrame(rows)
    logger.info("discretization_convergence", oracle_steps=oracle_steps,
                errors=frame["endpoint_error"].tolist())
    return frame
