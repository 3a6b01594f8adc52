"""Log-domain Sinkhorn and accelerated Sinkhorn for entropic optimal transport."""

from .accel import AccelState, HomotopyConfig, acc_run, acc_step, homotopy_solve, next_schedule
from .dualfn import dual_F, grad_f, hessian_f, reduced_f, row_solve
from .errors import OTError
from .otcore import DualPotentials, PlanDense, TransportProblem, plan_from_potentials, rescale_problem
from .sinkhorn import SolveConfig, SolveResult, normalized_sinkhorn_map, sinkhorn_solve, sinkhorn_v_step
from .solvers import SOLVERS, run_solver

__all__ = [
    "AccelState",
    "DualPotentials",
    "HomotopyConfig",
    "OTError",
    "PlanDense",
    "SOLVERS",
    "SolveConfig",
    "SolveResult",
    "TransportProblem",
    "acc_run",
    "acc_step",
    "dual_F",
    "grad_f",
    "hessian_f",
    "homotopy_solve",
    "next_schedule",
    "normalized_sinkhorn_map",
    "plan_from_potentials",
    "reduced_f",
    "rescale_problem",
    "row_solve",
    "run_solver",
    "sinkhorn_solve",
    "sinkhorn_v_step",
]
