"""Assertions reused across test modules."""
from bilqctrl.costs import bound_slacks


def assert_generic_bound(system, control, pairs=((1, 2), (2, 3), (1, 1)), tol=1e-9):
    """The coupling-column L1 lower bound holds on this control."""
    pairs = [p for p in pairs if max(p) <= system.n_levels]
    slacks = bound_slacks(system, control, pairs)
    assert (slacks["slack"] >= -tol).all(), slacks
