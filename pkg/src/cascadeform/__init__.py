"""Complex-Laplacian formation control with a cascade (cluster + meta-cluster) design."""

from .cascade import (ClusterSpec, CascadeNetwork, assemble, build_cascade, cascade_metrics,
                      decoupling_experiment)
from .exceptions import (AssemblyError, ConstructionError, DesignFailure, DivergenceError, DomainError,
                         FormationError, NumericalError, ScenarioError, SpectralStructureError,
                         StructureError, TopologyError)
from .laplacian import (ComplexLaplacian, EdgeWeights, FormationLaplacian, build_laplacian,
                        connectivity_metrics, synthesize_weights, verify_formation_conditions)
from .pipelines import CascadeFormation, ConventionalFormation, design_cascade, design_conventional
from .scenario import load_scenario, parse_scenario
from .simulator import (FailureEvent, Scenario, Trajectory, apply_failure, control_inputs,
                        convergence_time, formation_error, run, step)
from .spectral import Spectrum, eigenvalues, kernel_residuals, numerical_rank, propagate_exact
from .stabilizer import GAParams, GeneticStabilizer, SpectrumBounds, design_stabilizer, fitness, \
    scale_system, spectrum_objectives
from .topology import Topology, is_two_reachable, is_two_rooted, neighbors

__version__ = "0.1.0"
