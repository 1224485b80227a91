"""Three-stage surrogate pipeline for a parametric 1D CDR problem.

Stages: full-order P1/implicit-Euler model, Galerkin reduced-basis model
built from POD/HAPOD snapshot compression, and a greedy kernel surrogate
that maps parameters straight to the breakthrough curve.
"""

from .fom import (Parameter, ParameterDomain, Grid1D, AffineOperatorSet,
                  Trajectory, DEFAULT_DOMAIN, assemble, operator_at, solve_fom,
                  steady_qoi_oracle, qoi_error)
from .basis import ReducedBasis, pod, inc_hapod, projection_error, orthonormalize
from .rom import ReducedOperatorSet, project, solve_rom
from .vkoga import (KernelConfig, KernelModel, fit_fgreedy, predict,
                    power_function, loss)
from .config import PipelineConfig, parse_config, load_config, config_hash
from .pipeline import (PipelineReport, sample_parameters, corner_parameters,
                       run_pipeline, emit_report, payoff_queries)

__version__ = "0.1.0"

__all__ = [
    "Parameter", "ParameterDomain", "Grid1D", "AffineOperatorSet", "Trajectory",
    "DEFAULT_DOMAIN", "assemble", "operator_at", "solve_fom", "steady_qoi_oracle",
    "qoi_error", "ReducedBasis", "pod", "inc_hapod", "projection_error",
    "orthonormalize", "ReducedOperatorSet", "project", "solve_rom",
    "KernelConfig", "KernelModel", "fit_fgreedy", "predict", "power_function",
    "loss", "PipelineConfig", "parse_config", "load_config", "config_hash",
    "PipelineReport", "sample_parameters", "corner_parameters",
    "run_pipeline", "emit_report", "payoff_queries", "__version__",
]
