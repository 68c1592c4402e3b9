"""End-to-end checks on the planar molecule; marked slow, `pytest -m "not slow"` skips them."""
import math

import numpy as np
import pytest

from bilqctrl.costs import (
    c1_bracket,
    c1_upper_sweep,
    duty_cost_formula,
    lp_norm,
    lr_scaling_report,
    random_controls,
    verify_fidelity_cap,
)
from bilqctrl.linalg import basis_vector
from bilqctrl.propagation import galerkin_compare, norm_growth
from bilqctrl.synthesis import find_optimal_time, rwa_pulse
from bilqctrl.system import build_molecule

from .helpers import assert_generic_bound

pytestmark = pytest.mark.slow

ETAS = [0.4, 0.2, 0.1, 0.05]


@pytest.fixture(scope="module")
def c1_sweep():
    return c1_upper_sweep(build_molecule(10), ETAS, fidelity_target=0.99, show_progress=False)


def test_duty_costs_approach_pi(c1_sweep):
    assert c1_sweep["reached"].all()
    costs = c1_sweep["l1_cost"].to_numpy()
    for eta, cost in zip(ETAS, costs):
        assert cost <= 1.02 * duty_cost_formula(eta)
    assert np.all(np.diff(costs) < 0)
    assert abs(costs[-1] - math.pi) <= 0.015 * math.pi


@pytest.mark.parametrize("budget", [2.0, 3.0])
def test_fidelity_cap_below_pi(budget):
    verification = verify_fidelity_cap(build_molecule(12), 200, budget, seed=42,
                                       show_progress=False)
    assert verification.passed
    assert verification.bound_margin >= -1e-9


def test_c1_bracket_closes_on_pi(c1_sweep):
    verification = verify_fidelity_cap(build_molecule(10), 200, 3.0, seed=42, show_progress=False)
    bracket = c1_bracket(c1_sweep, verification)
    assert bracket["lower"] == math.pi
    assert 0 <= bracket["width"] <= 0.02 * math.pi
    assert 2 * math.asin(0.99) <= bracket["measured_lower"] <= bracket["upper"]


@pytest.mark.parametrize("r", [1.5, 2.0, 4.0])
def test_lr_cost_vanishes(r):
    system = build_molecule(10)
    pulse = rwa_pulse(system, 1, 2, "duty", eta=0.1)
    table = lr_scaling_report(system, 1, 2, pulse, r, [4, 8, 16, 32], show_progress=False)
    assert table["within_bound"].all()
    norms = table["norm"].to_numpy()
    ratios = norms[1:] / norms[:-1]
    doubling = 2 ** ((1 - r) / r)
    assert np.all(ratios >= 0.8 * doubling)
    assert np.all(ratios <= 1.2 * doubling)
    assert np.all(np.diff(norms) < 0)


def suite_controls(c1_sweep):
    """Every control the acceptance checks build, keyed by a readable id."""
    design = build_molecule(10)
    controls = {}
    for row in c1_sweep.itertuples():
        pulse = rwa_pulse(design, 1, 2, "duty", eta=row.eta)
        schedule = find_optimal_time(design, 1, 2, pulse, row.n)
        controls[f"duty-{row.eta:g}-n{row.n}"] = schedule.control
    cosine = rwa_pulse(design, 1, 2, "cosine")
    controls["cosine-n24"] = find_optimal_time(design, 1, 2, cosine, 24).control
    duty = rwa_pulse(design, 1, 2, "duty", eta=0.1)
    for n in [4, 8, 16, 32]:
        controls[f"lr-duty-n{n}"] = find_optimal_time(design, 1, 2, duty, n).control
    rng = np.random.default_rng(42)
    for budget in [2.0, 3.0]:
        for i, control in enumerate(random_controls(rng, 20, budget)):
            controls[f"random-{budget:g}-{i}"] = control
    return {key: u for key, u in controls.items() if lp_norm(u, 1) <= 4.0}


def test_galerkin_stability(c1_sweep):
    small, large = build_molecule(8), build_molecule(14)
    psi0 = basis_vector(8, 1)
    controls = suite_controls(c1_sweep)
    assert len(controls) >= len(c1_sweep) + 4 + 40

    for key, control in controls.items():
        times = np.linspace(0.0, control.duration, 201)
        deviation = galerkin_compare(small, large, control, psi0, times)
        assert deviation <= 1e-3, key

        # free evolution after the pulse leaves both quantities unchanged
        padded = control.zero_padded(5 * control.duration)
        tail = np.linspace(control.duration, padded.duration, 201)[1:]
        padded_times = np.concatenate([times, tail])
        assert galerkin_compare(small, large, padded, psi0, padded_times) == pytest.approx(
            deviation, rel=1e-6, abs=1e-12), key
        assert norm_growth(small, padded, psi0, 1.0, padded_times) == pytest.approx(
            norm_growth(small, control, psi0, 1.0, times), rel=1e-9), key
        assert_generic_bound(large, padded)
