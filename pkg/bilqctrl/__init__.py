"""
bilqctrl
--------
Bilinear quantum control in the eigenbasis of the free Hamiltonian: Galerkin
truncations, exact piecewise-constant propagation, rotating-wave pulses and
the L^p cost bounds of eigenstate transfers.
"""
__version__ = "0.1.0"

from .exceptions import BilqctrlError, OutOfScopeError, SystemFileError, ValidationError
from .propagation import PiecewiseConstantControl, StateVector, Trajectory, propagate
from .system import GalerkinSystem, build_molecule, load_system

__all__ = [
    "__version__",
    "BilqctrlError",
    "GalerkinSystem",
    "OutOfScopeError",
    "PiecewiseConstantControl",
    "StateVector",
    "SystemFileError",
    "Trajectory",
    "ValidationError",
    "build_molecule",
    "load_system",
    "propagate",
]
