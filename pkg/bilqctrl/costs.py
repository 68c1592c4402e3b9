"""
Control Cost Analysis
---------------------
L^p norms of piecewise-constant controls, the lower bounds on the L1 cost of
a transfer (the generic coupling-column bound and the two-level bounds for
molecule-type couplings), the sweeps that bracket the minimal L1 cost
C1(phi_1, phi_2) and show the L^r costs (r > 1) vanishing, and the chain
and reversed-transfer checks of C1 as a distance.
"""
import math
from dataclasses import asdict, dataclass, field
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
import structlog

from .exceptions import OutOfScopeError, ValidationError
from .propagation import PiecewiseConstantControl, Propagator
from .pulses import PeriodicPulse
from .synthesis import (
    DEFAULT_SCAN_POINTS,
    DEFAULT_STEPS_PER_PERIOD,
    asymptotic_l1_cost,
    critical_time,
    find_optimal_time,
    rwa_pulse,
)
from .system import GalerkinSystem
from .transitions import GAP_TOL, chain_of_connectedness
from .workers import run_ordered

logger = structlog.get_logger(__name__)

GENERIC_BOUND_TOL = 1e-9
GENERIC_BOUND_PAIRS = ((1, 2), (2, 3), (1, 1))
TWO_LEVEL_TOL = 1e-6
MOLECULE_COUPLING = 0.5

MAX_RANDOM_PIECES = 20
RANDOM_DURATION_RANGE = (0.1, 50.0)


def lp_norm(control: PiecewiseConstantControl, p: float) -> float:
    """
    ||u||_{L^p(0,T)} = (sum_i |u_i|^p (t_{i+1} - t_i))^{1/p}.

    Raises:
        OutOfScopeError: p < 1
    """
    if p < 1:
        raise OutOfScopeError(f"L^p costs are only defined here for p >= 1, got p = {p}")
    if math.isinf(p):
        return float(np.max(np.abs(control.values)))
    return control.lp_mass(p) ** (1.0 / p)


# --- Lower bounds ---

def generic_l1_lower_bound(system: GalerkinSystem, j: int, k: int, final_state,
                           psi_start_index: Optional[int] = None) -> float:
    """
    Lower bound on ||u||_1 for any control taking phi_s to final_state:
    | |<phi_j, phi_s>| - |<phi_j, final_state>| | / ||B phi_j||.

    Args:
        system: Truncated (A, B) pair
        j: Level whose overlap is tracked
        k: Target level of the transfer
        final_state: State reached at time T
        psi_start_index: Start level s; defaults to k

    Raises:
        ValidationError: B phi_j = 0
    """
    system._check_level(k)
    start = k if psi_start_index is None else psi_start_index
    system._check_level(start)
    column = system.coupling_column_norm(j)
    if column == 0:
        raise ValidationError(f"B phi_{j} = 0; the bound needs a coupled level")
    final_state = np.asarray(final_state, dtype=np.complex128)
    start_overlap = 1.0 if j == start else 0.0
    return abs(start_overlap - abs(final_state[j - 1])) / column


def min_l1(overlap: float) -> float:
    """Smallest L1 cost compatible with |<phi_1, psi(T)>| = overlap on a molecule-type system."""
    y = abs(overlap)
    if y > 1.0 + TWO_LEVEL_TOL:
        raise ValidationError(f"overlap must lie in [0, 1], got {overlap}")
    if y == 0:
        return math.pi
    y = min(y, 1.0)
    return 2.0 * math.atan(math.sqrt(1.0 / (y * y) - 1.0))


def fidelity_cap(l1: float) -> float:
    """Largest reachable |<phi_2, psi(T)>| with ||u||_1 = l1; vacuous (1) once l1 >= pi."""
    if l1 < 0:
        raise ValidationError(f"L1 cost must be >= 0, got {l1}")
    if l1 >= math.pi:
        return 1.0
    return math.sin(l1 / 2.0)


def population_floor(l1: float) -> float:
    """Smallest possible |<phi_1, psi(T)>| with ||u||_1 = l1; 0 once l1 >= pi."""
    if l1 < 0:
        raise ValidationError(f"L1 cost must be >= 0, got {l1}")
    if l1 >= math.pi:
        return 0.0
    return math.cos(l1 / 2.0)


def two_level_bounds(overlap: Optional[float] = None, l1: Optional[float] = None) -> Dict[str, float]:
    """min_l1 for an overlap and/or fidelity_cap and population_floor for a cost."""
    out: Dict[str, float] = {}
    if overlap is not None:
        out["min_l1"] = min_l1(overlap)
    if l1 is not None:
        out["fidelity_cap"] = fidelity_cap(l1)
        out["population_floor"] = population_floor(l1)
    return out


def is_molecule_family(system: GalerkinSystem) -> bool:
    """phi_1 is coupled to phi_2 only, with |b_12| = 1/2."""
    if system.n_levels < 2:
        return False
    column = np.abs(system.coupling[:, 0])
    others = np.delete(column, 1)
    return bool(not np.any(others) and abs(column[1] - MOLECULE_COUPLING) <= 1e-12)


# --- Adversarial controls ---

def random_controls(rng: np.random.Generator, count: int, l1_budget: float,
                    max_pieces: int = MAX_RANDOM_PIECES,
                    duration_range: Tuple[float, float] = RANDOM_DURATION_RANGE
                    ) -> List[PiecewiseConstantControl]:
    """
    Random piecewise-constant controls with ||u||_1 exactly l1_budget.

    Piece counts are uniform in 1..max_pieces, values uniform in [-1, 1]
    before rescaling, total durations log-uniform over duration_range.
    """
    if l1_budget < 0:
        raise ValidationError(f"L1 budget must be >= 0, got {l1_budget}")
    lo, hi = duration_range
    controls = []
    for _ in range(count):
        pieces = int(rng.integers(1, max_pieces + 1))
        total = float(np.exp(rng.uniform(np.log(lo), np.log(hi))))
        weights = rng.uniform(0.05, 1.0, size=pieces)
        durations = total * weights / weights.sum()
        values = rng.uniform(-1.0, 1.0, size=pieces)
        mass = float(np.sum(np.abs(values) * durations))
        values = values * (l1_budget / mass) if mass > 0 else np.zeros(pieces)
        controls.append(PiecewiseConstantControl.from_durations(durations, values))
    return controls


@dataclass
class CapVerification:
    """Worst margins of the two-level cap and floor over a batch of random controls.

    bound_margin is the worst slack of the generic coupling-column bound
    over the same trajectories.
    """
    l1_budget: float
    trials: int
    seed: int
    cap_margin: float
    floor_margin: float
    worst_trial: int
    tolerance: float = TWO_LEVEL_TOL
    bound_margin: float = 0.0

    @property
    def passed(self) -> bool:
        return (self.cap_margin >= -self.tolerance and self.floor_margin >= -self.tolerance
                and self.bound_margin >= -GENERIC_BOUND_TOL)

    def to_dict(self) -> Dict:
        data = asdict(self)
        data["passed"] = self.passed
        return data


def verify_fidelity_cap(system: GalerkinSystem, trials: int, l1_budget: float, seed: int,
                        duration_range: Tuple[float, float] = RANDOM_DURATION_RANGE,
                        tolerance: float = TWO_LEVEL_TOL, threads: Optional[int] = None,
                        show_progress: bool = True) -> CapVerification:
    """
    Check sin(||u||_1 / 2) >= |<phi_2, X phi_1>| and |<phi_1, X phi_1>| >= cos(||u||_1 / 2)
    over random controls with L1 norm equal to the budget. The generic bound
    is evaluated on every trajectory as well.

    Raises:
        ValidationError: budget >= pi, or the coupling is not molecule-type
    """
    if not 0 <= l1_budget < math.pi:
        raise ValidationError(f"L1 budget must lie in [0, pi), got {l1_budget}")
    if not is_molecule_family(system):
        raise ValidationError("fidelity cap needs phi_1 coupled to phi_2 only with |b_12| = 1/2")

    rng = np.random.default_rng(seed)
    controls = random_controls(rng, trials, l1_budget, duration_range=duration_range)
    pairs = [p for p in GENERIC_BOUND_PAIRS if max(p) <= system.n_levels]

    def margins(control: PiecewiseConstantControl) -> Tuple[float, float, float]:
        x = Propagator.for_system(system).matrix(control)
        final = x[:, 0]
        l1 = lp_norm(control, 1)
        slack = float(_slacks_from_matrix(system, x, l1, pairs)["slack"].min())
        return fidelity_cap(l1) - abs(final[1]), abs(final[0]) - population_floor(l1), slack

    results = run_ordered(margins, controls, threads=threads, desc="fidelity cap",
                          show_progress=show_progress)
    caps = np.array([r[0] for r in results]) if results else np.zeros(1)
    floors = np.array([r[1] for r in results]) if results else np.zeros(1)
    slacks = np.array([r[2] for r in results]) if results else np.zeros(1)
    verification = CapVerification(
        l1_budget=l1_budget, trials=trials, seed=seed,
        cap_margin=float(caps.min()), floor_margin=float(floors.min()),
        worst_trial=int(np.argmin(np.minimum(caps, floors))),
        tolerance=tolerance, bound_margin=float(slacks.min()),
    )
    logger.info("fidelity_cap_verified", **verification.to_dict())
    return verification


# --- Upper bounds on C1 ---

def n_ladder(min_n: int, max_n: int) -> List[int]:
    """min_n, 2 min_n, 4 min_n, ... capped by max_n (always included)."""
    if min_n < 1 or max_n < min_n:
        raise ValidationError(f"need 1 <= min_n <= max_n, got {min_n}, {max_n}")
    ladder = []
    n = min_n
    while n < max_n:
        ladder.append(n)
        n *= 2
    ladder.append(max_n)
    return ladder


def duty_cost_formula(eta: float) -> float:
    """(3 pi / 2) eta / sin(3 eta / 2), the molecule (1, 2) duty-pulse cost."""
    return 1.5 * math.pi * eta / abs(math.sin(1.5 * eta))


def c1_upper_sweep(system: GalerkinSystem, etas: Sequence[float], fidelity_target: float = 0.99,
                   max_n: int = 64, min_n: int = 16, pair: Tuple[int, int] = (1, 2),
                   steps_per_period: int = DEFAULT_STEPS_PER_PERIOD,
                   scan_points: int = DEFAULT_SCAN_POINTS, threads: Optional[int] = None,
                   show_progress: bool = True) -> pd.DataFrame:
    """
    For each eta, the first n on the ladder reaching fidelity_target and the
    measured L1 cost of u*/n over [0, T*_n].

    Rows that never reach the target keep the last n tried with reached=False.

    Returns:
        pd.DataFrame: eta, n, t_star_n, fidelity, l1_cost, asymptotic_l1_cost,
            source_overlap, reached
    """
    j, k = pair
    ladder = n_ladder(min_n, max_n)

    def sweep_eta(eta: float) -> Dict:
        pulse = rwa_pulse(system, j, k, "duty", eta=eta)
        schedule = None
        for n in ladder:
            schedule = find_optimal_time(system, j, k, pulse, n, steps_per_period, scan_points)
            if schedule.fidelity >= fidelity_target:
                break
        reached = schedule.fidelity >= fidelity_target
        if not reached:
            logger.warning("fidelity_target_unreached", eta=eta, max_n=max_n,
                           fidelity=schedule.fidelity, target=fidelity_target)
        return {
            "eta": float(eta),
            "n": schedule.n,
            "t_star_n": schedule.t_star_n,
            "fidelity": schedule.fidelity,
            "l1_cost": schedule.l1_cost,
            "asymptotic_l1_cost": schedule.asymptotic_l1_cost,
            "source_overlap": schedule.source_overlap,
            "reached": bool(reached),
        }

    rows = run_ordered(sweep_eta, list(etas), threads=threads, desc="c1 sweep",
                       show_progress=show_progress)
    return pd.DataFrame(rows, columns=["eta", "n", "t_star_n", "fidelity", "l1_cost",
                                       "asymptotic_l1_cost", "source_overlap", "reached"])


def c1_bracket(sweep: pd.DataFrame, verification: Optional[CapVerification] = None) -> Dict:
    """
    Interval [lower, upper] containing C1(phi_1, phi_2).

    upper is the cheapest cost that reached the target. measured_lower is the
    largest two-level bound the reached rows carry: min_l1 of the remaining
    overlap with phi_1 when the sweep recorded it, and 2 arcsin(fidelity)
    otherwise. lower is pi when a passing cap verification is supplied (no
    control below pi reaches fidelity 1), measured_lower otherwise; both are
    always reported.
    """
    reached = sweep[sweep["reached"]] if "reached" in sweep else sweep
    upper = float(reached["l1_cost"].min()) if len(reached) else float("nan")
    certified = (
        float(max(2.0 * math.asin(min(1.0, f)) for f in reached["fidelity"]))
        if len(reached) else 0.0
    )
    overlaps = reached["source_overlap"].dropna() if "source_overlap" in reached else []
    if len(overlaps):
        measured = max(certified, max(min_l1(min(1.0, y)) for y in overlaps))
        measured_source = "two_level_overlap"
    else:
        measured, measured_source = certified, "sweep_fidelity"
    best_fidelity = float(reached["fidelity"].max()) if len(reached) else float("nan")

    if verification is not None and verification.passed:
        lower, source = math.pi, "fidelity_cap"
    else:
        lower, source = measured, measured_source
    return {
        "lower": lower,
        "upper": upper,
        "width": upper - lower,
        "lower_source": source,
        "measured_lower": measured,
        "measured_lower_source": measured_source,
        "best_fidelity": best_fidelity,
        "sweep_certified_lower": certified,
    }


# --- C1 as a distance ---

@dataclass
class ChainCostBound:
    """Sum of cosine-pulse costs along a path of the chain of connectedness."""
    source: int
    target: int
    path: List[Tuple[int, int]]
    edge_costs: List[float]

    @property
    def total(self) -> float:
        return float(sum(self.edge_costs))

    def to_dict(self) -> Dict:
        return {
            "source": self.source,
            "target": self.target,
            "path": [list(edge) for edge in self.path],
            "edge_costs": list(self.edge_costs),
            "total": self.total,
        }


def c1_chain_upper_bound(system: GalerkinSystem, j: int, k: int,
                         gap_tol: float = GAP_TOL) -> ChainCostBound:
    """
    Upper bound on C1(phi_j, phi_k) by the triangle inequality: walk the
    shortest path of non-degenerate transitions from j to k and add the
    asymptotic cosine cost 2 / |b_lm| of every edge.

    Raises:
        ValidationError: j and k lie in different components of the chain
    """
    path = chain_of_connectedness(system, gap_tol).path_between(j, k)
    edge_costs = [
        asymptotic_l1_cost(system, l, m, rwa_pulse(system, l, m, "cosine"), gap_tol)
        for l, m in path
    ]
    bound = ChainCostBound(source=j, target=k, path=path, edge_costs=edge_costs)
    logger.debug("c1_chain_upper_bound", **bound.to_dict())
    return bound


def symmetric_costs(system: GalerkinSystem, j: int, k: int, n: int, shape: str = "cosine",
                    eta: Optional[float] = None,
                    steps_per_period: int = DEFAULT_STEPS_PER_PERIOD,
                    scan_points: int = DEFAULT_SCAN_POINTS) -> pd.DataFrame:
    """
    Measured transfers phi_j -> phi_k and phi_k -> phi_j with the same pulse
    family and n. The two costs agree up to discretisation.

    Returns:
        pd.DataFrame: source, target, n, t_star_n, fidelity, l1_cost,
            asymptotic_l1_cost, relative_gap
    """
    rows = []
    for a, b in ((j, k), (k, j)):
        pulse = rwa_pulse(system, a, b, shape, eta=eta)
        schedule = find_optimal_time(system, a, b, pulse, n, steps_per_period, scan_points)
        rows.append({"source": a, "target": b, "n": schedule.n, "t_star_n": schedule.t_star_n,
                     "fidelity": schedule.fidelity, "l1_cost": schedule.l1_cost,
                     "asymptotic_l1_cost": schedule.asymptotic_l1_cost})
    frame = pd.DataFrame(rows, columns=["source", "target", "n", "t_star_n", "fidelity",
                                        "l1_cost", "asymptotic_l1_cost"])
    costs = frame["l1_cost"]
    frame["relative_gap"] = float(abs(costs.iloc[0] - costs.iloc[1]) / costs.max())
    return frame


def lr_scaling_report(system: GalerkinSystem, j: int, k: int, pulse: PeriodicPulse, r: float,
                      n_list: Iterable[int], steps_per_period: int = DEFAULT_STEPS_PER_PERIOD,
                      scan_points: int = DEFAULT_SCAN_POINTS, threads: Optional[int] = None,
                      show_progress: bool = True) -> pd.DataFrame:
    """
    ||u*/n||_{L^r(0, T*_n)} against n^{(1-r)/r} ((T*/T + 2) int_0^T |u*|^r)^{1/r}.

    Returns:
        pd.DataFrame: r, n, t_star_n, norm, bound, within_bound
    """
    if r <= 1:
        raise ValidationError(f"L^r scaling needs r > 1, got {r}")
    t_star = critical_time(system, j, k, pulse)
    mass = (t_star / pulse.period + 2.0) * pulse.power_integral(r)

    def cell(n: int) -> Dict:
        schedule = find_optimal_time(system, j, k, pulse, n, steps_per_period, scan_points)
        norm = lp_norm(schedule.control, r)
        bound = n ** ((1.0 - r) / r) * mass ** (1.0 / r)
        return {"r": float(r), "n": int(n), "t_star_n": schedule.t_star_n, "norm": norm,
                "bound": bound, "within_bound": bool(norm <= bound + GENERIC_BOUND_TOL)}

    rows = run_ordered(cell, list(n_list), threads=threads, desc=f"L^{r:g} scaling",
                       show_progress=show_progress)
    return pd.DataFrame(rows, columns=["r", "n", "t_star_n", "norm", "bound", "within_bound"])


# --- Reports ---

@dataclass
class CostReport:
    """Norms of one control and the bounds evaluated on its own transfer."""
    control_id: str
    duration: float
    norms: Dict[float, float]
    fidelity: float
    bounds: Dict[str, Optional[float]] = field(default_factory=dict)
    passes: Dict[str, bool] = field(default_factory=dict)

    @property
    def all_pass(self) -> bool:
        return all(self.passes.values())

    def to_dict(self) -> Dict:
        return {
            "control_id": self.control_id,
            "duration": self.duration,
            "norms": {f"{p:g}": v for p, v in self.norms.items()},
            "fidelity": self.fidelity,
            "bounds": self.bounds,
            "passes": self.passes,
        }


def bound_slacks(system: GalerkinSystem, control: PiecewiseConstantControl,
                 pairs: Sequence[Tuple[int, int]]) -> pd.DataFrame:
    """
    Slack ||u||_1 - bound of the generic lower bound for each (j, k),
    with the transfer started from phi_k.

    Returns:
        pd.DataFrame: j, k, l1, bound, slack
    """
    x = Propagator.for_system(system).matrix(control)
    return _slacks_from_matrix(system, x, lp_norm(control, 1), pairs)


def _slacks_from_matrix(system: GalerkinSystem, x: np.ndarray, l1: float,
                        pairs: Sequence[Tuple[int, int]]) -> pd.DataFrame:
    rows = []
    for j, k in pairs:
        bound = generic_l1_lower_bound(system, j, k, x[:, k - 1])
        rows.append({"j": j, "k": k, "l1": l1, "bound": bound, "slack": l1 - bound})
    return pd.DataFrame(rows, columns=["j", "k", "l1", "bound", "slack"])


def build_cost_report(system: GalerkinSystem, control: PiecewiseConstantControl,
                      j: int = 1, k: int = 2, control_id: str = "control",
                      p_values: Sequence[float] = (1.0, 2.0),
                      tolerance: float = TWO_LEVEL_TOL) -> CostReport:
    """
    Evaluate the L^p norms and every applicable bound for the transfer phi_j -> phi_k.

    The two-level bounds are only evaluated for (1, 2) on molecule-type couplings
    and pass within tolerance.
    """
    x = Propagator.for_system(system).matrix(control)
    norms = {float(p): lp_norm(control, p) for p in sorted(set(p_values) | {1.0})}
    l1 = norms[1.0]
    column = x[:, j - 1]
    fidelity = float(abs(column[k - 1]))

    # ||u||_1 bounds both the loss on phi_j and the gain on phi_k
    candidates = [generic_l1_lower_bound(system, j, k, column, psi_start_index=j)]
    if system.coupling_column_norm(k) > 0:
        candidates.append(generic_l1_lower_bound(system, k, k, column, psi_start_index=j))
    bounds: Dict[str, Optional[float]] = {"generic_l1_lower": max(candidates)}
    passes = {"generic_l1_lower": l1 >= bounds["generic_l1_lower"] - GENERIC_BOUND_TOL}

    if (j, k) == (1, 2) and is_molecule_family(system):
        bounds["two_level_l1_lower"] = min_l1(abs(column[0]))
        bounds["fidelity_cap"] = fidelity_cap(l1)
        passes["two_level_l1_lower"] = l1 >= bounds["two_level_l1_lower"] - tolerance
        passes["fidelity_cap"] = fidelity <= bounds["fidelity_cap"] + tolerance
    else:
        bounds["two_level_l1_lower"] = None
        bounds["fidelity_cap"] = None

    report = CostReport(control_id=control_id, duration=control.duration, norms=norms,
                        fidelity=fidelity, bounds=bounds, passes=passes)
    if not report.all_pass:
        logger.warning("cost_bound_failed", control_id=control_id, passes=passes, bounds=bounds)
    return report
