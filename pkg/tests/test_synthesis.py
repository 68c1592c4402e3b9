import math

import numpy as np
import pytest

from bilqctrl.exceptions import ValidationError
from bilqctrl.pulses import CosinePulse, DutyPulse, make_pulse
from bilqctrl.synthesis import (
    asymptotic_l1_cost,
    check_resonance_vanishing,
    critical_time,
    fidelity_sweep,
    find_optimal_time,
    fourier_coefficient,
    rwa_pulse,
    schedules_frame,
)
from bilqctrl.system import GalerkinSystem
from bilqctrl.transitions import ResonanceSet, resonance_set

from .helpers import assert_generic_bound


# --- Pulses ---

def test_cosine_coefficient_at_resonance(molecule10):
    pulse = rwa_pulse(molecule10, 1, 2, "cosine")
    assert pulse.period == pytest.approx(2 * math.pi / 3)
    assert fourier_coefficient(pulse, -3.0) == pytest.approx(math.pi / 3)
    assert fourier_coefficient(pulse, 3.0) == pytest.approx(math.pi / 3)
    assert fourier_coefficient(pulse, 6.0) == 0


@pytest.mark.parametrize("eta", [0.05, 0.1, 0.4, 1.0])
def test_duty_coefficient_magnitude(eta):
    pulse = DutyPulse(period=2 * math.pi / 3, eta=eta)
    assert abs(fourier_coefficient(pulse, 3.0)) == pytest.approx(2 / 3 * abs(math.sin(1.5 * eta)))
    assert fourier_coefficient(pulse, 0.0) == eta


def test_duty_coefficient_vanishes_with_eta():
    pulse = DutyPulse(period=2.0, eta=1e-8)
    assert abs(fourier_coefficient(pulse, 3.0)) == pytest.approx(1e-8, rel=1e-6)


def test_power_integrals():
    cosine = CosinePulse(period=2.0, amplitude=3.0)
    assert cosine.power_integral(2.0) == pytest.approx(9.0)
    assert cosine.power_integral(1.0) == pytest.approx(3.0 * 2.0 * 2 / math.pi)
    assert DutyPulse(period=2.0, eta=0.3, amplitude=2.0).power_integral(3.0) == pytest.approx(2.4)


def test_pulse_validation():
    with pytest.raises(ValidationError, match="eta"):
        DutyPulse(period=1.0, eta=1.0)
    with pytest.raises(ValidationError, match="period"):
        CosinePulse(period=0.0)
    with pytest.raises(ValidationError, match="unknown pulse shape"):
        make_pulse("square", 1.0)
    with pytest.raises(ValidationError, match="needs eta"):
        make_pulse("duty", 1.0)


def test_scaled_pulse_keeps_shape():
    pulse = DutyPulse(period=2.0, eta=0.5).scaled(0.25)
    assert isinstance(pulse, DutyPulse)
    assert pulse.amplitude == 0.25 and pulse.eta == 0.5


# --- Resonances ---

def test_resonance_vanishing(molecule10, full_coupling):
    cosine = rwa_pulse(molecule10, 1, 2, "cosine")
    assert check_resonance_vanishing(cosine, resonance_set(molecule10, 1, 2), molecule10)

    system = full_coupling([1.0, 2.0, 4.0])
    resonances = resonance_set(system, 1, 2)
    assert check_resonance_vanishing(rwa_pulse(system, 1, 2, "cosine"), resonances, system)
    assert not check_resonance_vanishing(rwa_pulse(system, 1, 2, "duty", eta=1.0), resonances,
                                         system)
    assert check_resonance_vanishing(DutyPulse(period=1.0, eta=0.5),
                                     ResonanceSet(transition=(1, 2)), system)


def test_resonant_pulse_rejected_by_search(full_coupling):
    system = full_coupling([1.0, 2.0, 4.0])
    with pytest.raises(ValidationError, match="resonance set"):
        find_optimal_time(system, 1, 2, rwa_pulse(system, 1, 2, "duty", eta=1.0), 4)


# --- Critical time ---

@pytest.mark.parametrize("eta", [0.05, 0.1, 0.2, 0.4])
def test_duty_critical_time(molecule10, eta):
    pulse = rwa_pulse(molecule10, 1, 2, "duty", eta=eta)
    assert critical_time(molecule10, 1, 2, pulse) == pytest.approx(math.pi ** 2 / math.sin(1.5 * eta))
    assert asymptotic_l1_cost(molecule10, 1, 2, pulse) == pytest.approx(
        1.5 * math.pi * eta / math.sin(1.5 * eta))


def test_cosine_critical_time(molecule10):
    pulse = rwa_pulse(molecule10, 1, 2, "cosine")
    assert critical_time(molecule10, 1, 2, pulse) == pytest.approx(2 * math.pi)
    assert asymptotic_l1_cost(molecule10, 1, 2, pulse) == pytest.approx(4.0)


def test_doubling_coupling_halves_critical_time(molecule4):
    doubled = GalerkinSystem(molecule4.spectrum, 2 * molecule4.coupling)
    pulse = rwa_pulse(molecule4, 1, 2, "cosine")
    assert critical_time(doubled, 1, 2, pulse) == pytest.approx(
        critical_time(molecule4, 1, 2, pulse) / 2)


def test_pulse_that_misses_transition(molecule4):
    # a cosine at half the transition frequency has no weight at 3
    pulse = CosinePulse(period=4 * math.pi / 3)
    with pytest.raises(ValidationError, match="does not drive"):
        critical_time(molecule4, 1, 2, pulse)


def test_zero_gap_has_no_resonant_period():
    system = GalerkinSystem([1.0, 1.0], [[0, -0.5j], [-0.5j, 0]])
    with pytest.raises(ValidationError, match="equal energy"):
        rwa_pulse(system, 1, 2)


# --- Optimal time ---

def test_degenerate_window(molecule4):
    strong = GalerkinSystem(molecule4.spectrum, 10 * molecule4.coupling)
    with pytest.raises(ValidationError, match="degenerate"):
        find_optimal_time(strong, 1, 2, rwa_pulse(strong, 1, 2, "cosine"), 1)


def test_search_arguments_validated(molecule4):
    pulse = rwa_pulse(molecule4, 1, 2, "cosine")
    with pytest.raises(ValidationError, match="positive integer"):
        find_optimal_time(molecule4, 1, 2, pulse, 0)
    with pytest.raises(ValidationError, match="scan_points"):
        find_optimal_time(molecule4, 1, 2, pulse, 4, scan_points=50)


def test_cosine_transfer(molecule10):
    pulse = rwa_pulse(molecule10, 1, 2, "cosine")
    schedule = find_optimal_time(molecule10, 1, 2, pulse, 24)
    lo, hi = schedule.window
    assert lo < schedule.t_star_n < hi
    assert schedule.fidelity >= 0.99
    assert schedule.fidelity <= 1 + 1e-9
    assert schedule.l1_cost <= 4.2
    assert schedule.control.duration == pytest.approx(schedule.t_star_n)
    assert len(schedule.scan) == 401
    assert_generic_bound(molecule10, schedule.control)


@pytest.mark.parametrize("n", [8, 12, 16, 32])
def test_cosine_cost_near_asymptote(molecule10, n):
    pulse = rwa_pulse(molecule10, 1, 2, "cosine")
    asymptote = asymptotic_l1_cost(molecule10, 1, 2, pulse)
    assert asymptote == pytest.approx(2 / abs(molecule10.coupling[0, 1]))
    schedule = find_optimal_time(molecule10, 1, 2, pulse, n)
    assert schedule.l1_cost <= 1.05 * asymptote
    assert 0.0 <= schedule.source_overlap <= math.sqrt(1 - schedule.fidelity ** 2) + 1e-9


def test_duty_transfer(molecule10):
    pulse = rwa_pulse(molecule10, 1, 2, "duty", eta=0.1)
    schedule = find_optimal_time(molecule10, 1, 2, pulse, 24)
    assert schedule.fidelity >= 0.99
    assert schedule.l1_cost <= 1.02 * 1.5 * math.pi * 0.1 / math.sin(0.15)
    assert schedule.to_dict()["pulse"]["eta"] == 0.1
    assert_generic_bound(molecule10, schedule.control)


@pytest.mark.slow
def test_fidelity_trend_over_n(molecule10):
    pulse = rwa_pulse(molecule10, 1, 2, "duty", eta=0.1)
    schedules = fidelity_sweep(molecule10, 1, 2, pulse, [1, 2, 4, 8, 16, 24], show_progress=False)
    frame = schedules_frame(schedules)
    assert frame["n"].tolist() == [1, 2, 4, 8, 16, 24]
    fidelity = dict(zip(frame["n"], frame["fidelity"]))
    assert fidelity[4] >= fidelity[1] - 0.05
    assert fidelity[16] >= fidelity[8] - 0.02
    assert fidelity[24] >= fidelity[16] - 0.02
    assert (frame["fidelity"] <= 1 + 1e-9).all()
    assert np.all(frame["t_star_n"] > 0)
