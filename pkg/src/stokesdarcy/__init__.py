"""Meshfree neural collocation solver for coupled free-flow / porous-medium
problems: four parallel subnetworks trained against a composite residual
loss with interface coupling conditions."""

from .autodiff import Tape, Var, gradient_of
from .geometry import (BatchSizes, BoundarySegment, CoupledGeometry, Rect,
                       SampleBatch, draw_batch, interface_frame)
from .jets import Jet2, jet_const, jet_var
from .metrics import ErrorReport, EvalGrid, error_report, interface_error, rel_error
from .network import (CoupledArch, CoupledParams, MLPArch, MLPParams, forward_jet,
                      init_params, load_checkpoint, save_checkpoint)
from .physics import (ClosedFormSolution, ConstantPermeability, Forcing,
                      OscillatoryPermeability, PhysicalConstants, ProblemSpec,
                      boundary_residuals, darcy_residuals, derive_forcing,
                      interface_residuals, stokes_residuals)
from .problems import custom_problem, get_problem, list_problems
from .training import (LossBreakdown, OptState, TrainConfig, TrainHistory,
                       TrainRecord, assemble_loss, step, train)

__version__ = "0.1.0"
