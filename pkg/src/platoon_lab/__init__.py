"""Observer-based control, string-stability analysis and headway design for
vehicle platoons with a varying-speed leader."""

from platoon_lab.errors import (
    DesignConstraintError,
    DivergenceError,
    InvalidParameterError,
    NotApplicableError,
    PlatoonLabError,
    PoleProximityError,
    SingularPointError,
    TopologyError,
)
from platoon_lab.model import (
    DisturbanceSpec,
    Gains,
    PlatoonConfig,
    SystemMatrices,
    build_system,
    desired_gap,
    gains_from_b,
)
from platoon_lab.topology import Topology, build_mpf

__version__ = "0.1.0"

__all__ = [
    "DesignConstraintError",
    "DisturbanceSpec",
    "DivergenceError",
    "Gains",
    "InvalidParameterError",
    "NotApplicableError",
    "PlatoonConfig",
    "PlatoonLabError",
    "PoleProximityError",
    "SingularPointError",
    "SystemMatrices",
    "Topology",
    "TopologyError",
    "build_mpf",
    "build_system",
    "desired_gap",
    "gains_from_b",
]
