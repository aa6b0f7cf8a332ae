"""CR Yamabe flow on a discrete Heisenberg nilmanifold."""
from ._backend import compiled_available, get_backend, set_backend, use_backend
from .conformal import ContactBackground, rbar, scalar_curvature, yamabe_quotient
from .elliptic import poisson_solve, spectrum
from .flow import FlowConfig, run
from .hcalc import OperatorConfig
from .lattice import LatticeSpec, ScalarField, make_lattice, sample, wrap

__all__ = [
    "ContactBackground",
    "FlowConfig",
    "LatticeSpec",
    "OperatorConfig",
    "ScalarField",
    "compiled_available",
    "get_backend",
    "make_lattice",
    "poisson_solve",
    "rbar",
    "run",
    "sample",
    "scalar_curvature",
    "set_backend",
    "spectrum",
    "use_backend",
    "wrap",
    "yamabe_quotient",
]
