"""State-of-charge and crossover-flux estimation for vanadium redox flow batteries.

An adaptive Luenberger observer learns the crossover flux as a radial-basis
expansion of the cell state of charge while tracking both reservoir and cell
state of charge from open-circuit voltage. Its gains come from a polytopic
LMI program solved by the bundled interior-point SDP solver.
"""

from .basis import RbfBasis, evaluate, lipschitz_bound, uniform_basis
from .battery import (BatteryParams, LinearCrossover, ModelMatrices, assemble_matrices,
                      invert_output, nernst_output, simulate)
from .bounds import BoundAssumptions, BoundReport, default_assumptions
from .observer import ObserverConfig, ObserverState, run
from .synthesis import GainSolution, SynthesisConfig, certify, synthesize
from .telemetry import TelemetryTrace, load_csv, synthesize_trace, write_csv

__version__ = "0.1.0"

__all__ = [
    "BatteryParams", "BoundAssumptions", "BoundReport", "GainSolution", "LinearCrossover",
    "ModelMatrices", "ObserverConfig", "ObserverState", "RbfBasis", "SynthesisConfig",
    "TelemetryTrace", "assemble_matrices", "certify", "default_assumptions", "evaluate",
    "invert_output", "lipschitz_bound", "load_csv", "nernst_output", "run", "simulate",
    "synthesize", "synthesize_trace", "uniform_basis", "write_csv",
]
