"""Log-domain Sinkhorn: plain and gauge-fixed column updates and the solver loop.

The column update ``v + log(b / c_P)`` after an exact row solve is the same
as the unit-step mirror step ``v - grad_phi_star(grad_f(v))``; the solver
iterates the zero-sum projected version so iterates are unique.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .dualfn import RowSolved, row_solve, row_solve_state
from .errors import DomainViolation, GaugeViolation
from .mirror import project_zero_sum
from .otcore import DualPotentials, TransportProblem
from .trace import SolverTrace

GAUGE_TOL = 1e-9


@dataclass(frozen=True)
class SolveConfig:
    tol_l1: float = 1e-6
    max_iters: int = 10_000
    record_trace: bool = True
    trace_stride: int = 1

    def __post_init__(self):
        if not self.tol_l1 > 0:
            raise ValueError("tol_l1 must be positive")
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")
        if self.trace_stride < 1:
            raise ValueError("trace_stride must be >= 1")


@dataclass
class SolveResult:
    potentials: DualPotentials
    iterations: int
    converged: bool
    final_violation: float
    trace: SolverTrace | None = None
    evaluations: int = 0
    stages: list = field(default_factory=list)
    x: np.ndarray | None = None
    w: np.ndarray | None = None

    def summary(self) -> dict:
        return {
            "iterations": self.iterations,
            "converged": self.converged,
            "final_violation": self.final_violation,
            "evaluations": self.evaluations,
        }


class SinkhornOracle:
    """Counts and caches evaluations of the normalized Sinkhorn map.

    ``evaluate(v)`` performs one row solve plus one column reduction, which
    is the unit of work of a Sinkhorn iteration.
    """

    def __init__(self, p: TransportProblem):
        self.p = p
        self.evaluations = 0

    def evaluate(self, v) -> RowSolved:
        self.evaluations += 1
        st = row_solve_state(self.p, v)
        if not np.all(np.isfinite(st.log_col)):
            raise DomainViolation("column sum underflowed to zero")
        return st

    def next_point(self, st: RowSolved) -> np.ndarray:
        """Normalized map value ``P_perp(v + log b - log c_P)`` at ``st.v``."""
        return project_zero_sum(st.v + (self.p.log_b - st.log_col))

    def __call__(self, v) -> tuple[np.ndarray, RowSolved]:
        st = self.evaluate(v)
        return self.next_point(st), st


def sinkhorn_v_step(p: TransportProblem, v) -> np.ndarray:
    """Plain column update ``v + log(b ./ c_P(u(v), v))``."""
    st = row_solve_state(p, v)
    if not np.all(np.isfinite(st.log_col)):
        raise DomainViolation("column sum underflowed to zero")
    return st.v + (p.log_b - st.log_col)


def check_gauge(v, tol=GAUGE_TOL):
    s = float(np.sum(v))
    if abs(s) > tol:
        raise GaugeViolation(f"vector sums to {s:.3e}, expected 0")


def normalized_sinkhorn_map(p: TransportProblem, v) -> np.ndarray:
    v = np.asarray(v, dtype=np.float64)
    check_gauge(v)
    return project_zero_sum(sinkhorn_v_step(p, v))


def violation_from_state(st: RowSolved) -> float:
    # rows are matched exactly by the row solve, so only columns contribute
    return float(np.abs(st.grad).sum())


def _record(trace, k, t0, st, viol, mu=None, alpha=None, extra=None):
    trace.append(
        iter=k,
        wall_time=time.perf_counter() - t0,
        violation_l1=viol,
        grad_l1=viol,
        f_value=st.f,
        mu=mu,
        alpha=alpha,
        sup_norm=float(np.abs(st.v).max()),
        **(extra or {}),
    )


def sinkhorn_solve(p: TransportProblem, v0=None, cfg: SolveConfig | None = None, monitor=None) -> SolveResult:
    """Run the normalized Sinkhorn iteration until the l1 marginal violation drops below ``cfg.tol_l1``.

    ``monitor``, when given, is called as ``monitor(k, x, y, state, mu, alpha)``
    and returns extra trace fields; for plain Sinkhorn ``x = y = v`` and
    ``mu = alpha = None``.
    """
    cfg = cfg or SolveConfig()
    oracle = SinkhornOracle(p)
    v = project_zero_sum(np.zeros(p.m) if v0 is None else v0)
    trace = SolverTrace() if cfg.record_trace else None
    t0 = time.perf_counter()
    converged = False
    k = 0
    while True:
        st = oracle.evaluate(v)
        viol = violation_from_state(st)
        converged = viol < cfg.tol_l1
        last = converged or k >= cfg.max_iters
        extra = monitor(k, v, v, st, None, None) if monitor else None
        if trace is not None and (k % cfg.trace_stride == 0 or last):
            _record(trace, k, t0, st, viol, extra=extra)
        if last:
            break
        v = oracle.next_point(st)
        k += 1
    return SolveResult(
        potentials=DualPotentials(st.u, st.v),
        iterations=k,
        converged=converged,
        final_violation=viol,
        trace=trace,
        evaluations=oracle.evaluations,
    )


def potentials_at(p: TransportProblem, v) -> DualPotentials:
    v = np.asarray(v, dtype=np.float64)
    return DualPotentials(row_solve(p, v), v)
