"""
Transitions and Resonances
--------------------------
Non-degeneracy of transitions (j, k), the resonance set that an RWA pulse
must avoid, and the chain of connectedness built from non-degenerate
coupled transitions. All checks are made inside the truncation; every
record carries the truncation order it was computed at.
"""
from dataclasses import dataclass, field
from typing import Dict, List, Tuple

import networkx as nx
import numpy as np
import structlog

from .exceptions import ValidationError
from .system import GalerkinSystem

logger = structlog.get_logger(__name__)

Pair = Tuple[int, int]

GAP_TOL = 1e-9


def gaps_equal(a: float, b: float, gap_tol: float = GAP_TOL) -> bool:
    """Relative equality of two spectral gaps (exact when both are integers)."""
    return abs(a - b) <= gap_tol * max(abs(a), abs(b))


def _ordered(j: int, k: int) -> Pair:
    return (j, k) if j < k else (k, j)


def _coupled_pairs(system: GalerkinSystem) -> List[Tuple[Pair, float]]:
    """Unordered coupled pairs l < m with their gaps."""
    b = system.coupling
    lam = system.spectrum
    rows, cols = np.nonzero(np.triu(np.abs(b) > 0, k=1))
    return [((int(l) + 1, int(m) + 1), float(abs(lam[l] - lam[m]))) for l, m in zip(rows, cols)]


@dataclass
class TransitionRecord:
    """Outcome of the non-degeneracy test for one pair."""
    pair: Pair
    gap: float
    coupled: bool
    degenerate_conflicts: List[Pair] = field(default_factory=list)
    truncation: int = 0

    @property
    def gap_condition(self) -> bool:
        """No other coupled pair touching {j, k} shares the gap."""
        return not self.degenerate_conflicts

    @property
    def nondegenerate(self) -> bool:
        return self.coupled and self.gap_condition

    def to_dict(self) -> Dict:
        return {
            "pair": list(self.pair),
            "gap": self.gap,
            "coupled": self.coupled,
            "nondegenerate": self.nondegenerate,
            "degenerate_conflicts": [list(p) for p in self.degenerate_conflicts],
            "truncation": self.truncation,
        }


@dataclass
class ResonanceSet:
    """Coupled pairs touching {j, k} whose gap is m * gap(j, k) with m >= 2."""
    transition: Pair
    pairs: List[Pair] = field(default_factory=list)
    multiples: Dict[Pair, int] = field(default_factory=dict)
    truncation: int = 0

    def __len__(self) -> int:
        return len(self.pairs)

    def __iter__(self):
        return iter(self.pairs)

    @property
    def is_empty(self) -> bool:
        return not self.pairs

    def to_dict(self) -> Dict:
        return {
            "transition": list(self.transition),
            "pairs": [list(p) for p in self.pairs],
            "multiples": [self.multiples[p] for p in self.pairs],
            "truncation": self.truncation,
        }


def _check_pair(system: GalerkinSystem, j: int, k: int) -> Pair:
    if j == k:
        raise ValidationError(f"transition needs two distinct levels, got ({j}, {k})")
    system._check_level(j)
    system._check_level(k)
    return _ordered(j, k)


def is_nondegenerate(system: GalerkinSystem, j: int, k: int,
                     gap_tol: float = GAP_TOL) -> TransitionRecord:
    """
    Test whether (j, k) is a non-degenerate transition of the truncated system.

    The pair is unordered: (k, j) is the same transition as (j, k).

    Args:
        system: Truncated (A, B) pair
        j, k: Distinct levels (1-based)
        gap_tol: Relative tolerance for gap equality

    Returns:
        TransitionRecord: coupled flag and the conflicting pairs
    """
    pair = _check_pair(system, j, k)
    lam = system.spectrum
    gap = float(abs(lam[pair[0] - 1] - lam[pair[1] - 1]))
    coupled = bool(abs(system.coupling[pair[0] - 1, pair[1] - 1]) > 0)

    conflicts = []
    for other, other_gap in _coupled_pairs(system):
        if other == pair or not set(other) & set(pair):
            continue
        if gaps_equal(gap, other_gap, gap_tol):
            conflicts.append(other)
    return TransitionRecord(pair=pair, gap=gap, coupled=coupled,
                            degenerate_conflicts=conflicts, truncation=system.n_levels)


def resonance_set(system: GalerkinSystem, j: int, k: int,
                  gap_tol: float = GAP_TOL) -> ResonanceSet:
    """
    Coupled pairs sharing a level with (j, k) whose gap is an integer
    multiple m >= 2 of the transition gap.

    Raises:
        ValidationError: (j, k) is degenerate or has zero gap
    """
    record = is_nondegenerate(system, j, k, gap_tol)
    if not record.nondegenerate:
        raise ValidationError(
            f"transition {record.pair} is degenerate "
            f"(coupled={record.coupled}, conflicts={record.degenerate_conflicts})"
        )
    if record.gap == 0:
        raise ValidationError(f"transition {record.pair} has zero gap")

    members: List[Pair] = []
    multiples: Dict[Pair, int] = {}
    for other, other_gap in _coupled_pairs(system):
        if not set(other) & set(record.pair):
            continue
        m = int(round(other_gap / record.gap))
        if m >= 2 and gaps_equal(other_gap, m * record.gap, gap_tol):
            members.append(other)
            multiples[other] = m
    return ResonanceSet(transition=record.pair, pairs=members, multiples=multiples,
                        truncation=system.n_levels)


@dataclass
class ChainReport:
    """Graph of non-degenerate coupled transitions on levels 1..N."""
    graph: nx.Graph
    truncation: int

    @property
    def exists(self) -> bool:
        return nx.is_connected(self.graph)

    @property
    def edges(self) -> List[Pair]:
        return sorted(_ordered(a, b) for a, b in self.graph.edges)

    @property
    def components(self) -> List[List[int]]:
        return sorted(sorted(c) for c in nx.connected_components(self.graph))

    def path_between(self, r_a: int, r_b: int) -> List[Pair]:
        """Transitions r_0 = r_a, ..., r_p = r_b as a list of edges."""
        for level in (r_a, r_b):
            if level not in self.graph:
                raise ValidationError(f"level {level} outside 1..{self.truncation}")
        try:
            nodes = nx.shortest_path(self.graph, r_a, r_b)
        except nx.NetworkXNoPath as e:
            raise ValidationError(f"levels {r_a} and {r_b} are not connected") from e
        return [_ordered(a, b) for a, b in zip(nodes[:-1], nodes[1:])]

    def to_dict(self) -> Dict:
        return {
            "exists": self.exists,
            "edges": [list(e) for e in self.edges],
            "components": self.components,
            "truncation": self.truncation,
        }


def transition_table(system: GalerkinSystem, gap_tol: float = GAP_TOL) -> List[TransitionRecord]:
    """TransitionRecord for every coupled pair j < k."""
    return [is_nondegenerate(system, l, m, gap_tol) for (l, m), _ in _coupled_pairs(system)]


def chain_of_connectedness(system: GalerkinSystem, gap_tol: float = GAP_TOL) -> ChainReport:
    """Build the non-degenerate transition graph and report its connectivity."""
    graph = nx.Graph()
    graph.add_nodes_from(range(1, system.n_levels + 1))
    for record in transition_table(system, gap_tol):
        if record.nondegenerate:
            graph.add_edge(*record.pair, gap=record.gap)
    report = ChainReport(graph=graph, truncation=system.n_levels)
    logger.debug("chain_of_connectedness", system=system.label, exists=report.exists,
                 edges=len(report.edges))
    return report
