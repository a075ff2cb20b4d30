"""vocsim: design and simulation toolkit for virtual-oscillator-controlled
inverters with current feedback taken after the output LCL filter."""

from .averaged import (
    averaged_derivatives,
    equilibrium_frequency,
    equilibrium_voltage,
    harmonic_ratio,
    rise_time,
)
from .design import AcSpec, DesignReport, design, droop_curve
from .dispatch import (
    DispatchEquilibrium,
    TwoInverterSystem,
    dispatch_equilibrium,
    security_margin,
)
from .errors import (
    InfeasibleDesignError,
    InfeasibleSetpointError,
    NetworkSolveError,
    OscillatorCollapseError,
    SimulationAbort,
    SolverConvergenceError,
    VocsimError,
)
from .oscillator import OscState, PowerMeter, VocParams, voc_derivatives
from .phasor import (
    ImpedanceConstants,
    LclFilter,
    SeriesRlBranch,
    impedance_constants,
    solve_network,
)

__version__ = "0.1.0"

__all__ = [
    "AcSpec",
    "DesignReport",
    "DispatchEquilibrium",
    "ImpedanceConstants",
    "InfeasibleDesignError",
    "InfeasibleSetpointError",
    "LclFilter",
    "NetworkSolveError",
    "OscState",
    "OscillatorCollapseError",
    "PowerMeter",
    "SeriesRlBranch",
    "SimulationAbort",
    "SolverConvergenceError",
    "TwoInverterSystem",
    "VocParams",
    "VocsimError",
    "averaged_derivatives",
    "design",
    "dispatch_equilibrium",
    "droop_curve",
    "equilibrium_frequency",
    "equilibrium_voltage",
    "harmonic_ratio",
    "impedance_constants",
    "rise_time",
    "security_margin",
    "solve_network",
    "voc_derivatives",
]
