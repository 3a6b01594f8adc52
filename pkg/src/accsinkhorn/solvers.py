"""Uniform entry point over the three solvers exposed by the CLI and pipelines."""

from __future__ import annotations

import math
import time

import numpy as np

from .accel import HomotopyConfig, acc_run, homotopy_solve
from .otcore import DualPotentials, TransportProblem
from .sinkhorn import SinkhornOracle, SolveConfig, SolveResult, _record, sinkhorn_solve, violation_from_state
from .trace import SolverTrace

SOLVERS = ("sinkhorn", "acc", "acc-homotopy")


def fixed_mu_solve(p: TransportProblem, mu: float, tol_l1: float, max_iters: int, record_trace=True, trace_stride=1, monitor=None) -> SolveResult:
    """Accelerated steps at a single ``mu`` until the violation drops below ``tol_l1``."""
    oracle = SinkhornOracle(p)
    x = np.zeros(p.m)
    alpha = math.sqrt(2.0 * mu)
    trace = SolverTrace() if record_trace else None
    t0 = time.perf_counter()
    cache = oracle(x)
    viol = violation_from_state(cache[1])
    extra = monitor(0, x, x, cache[1], mu, alpha) if monitor else None
    if trace is not None:
        _record(trace, 0, t0, cache[1], viol, mu, alpha, extra)
    status = {"viol": viol}

    def on_step(k, s):
        st = s.cache[1]
        v = violation_from_state(st)
        ex = monitor(k, s.x, s.y, st, mu, alpha) if monitor else None
        done = v < tol_l1
        if trace is not None and (k % trace_stride == 0 or done or k == max_iters):
            _record(trace, k, t0, st, v, mu, alpha, ex)
        status["viol"] = v
        return done

    steps = 0
    if viol >= tol_l1:
        run = acc_run(p, x, x, mu, max_iters, oracle, cache=cache, on_step=on_step)
        x, cache, steps = run.x, run.state.cache, run.steps
    st = cache[1]
    viol = status["viol"]
    return SolveResult(
        potentials=DualPotentials(st.u, st.v),
        iterations=steps,
        converged=viol < tol_l1,
        final_violation=viol,
        trace=trace,
        evaluations=oracle.evaluations,
        x=x,
    )


def run_solver(
    p: TransportProblem,
    solver: str,
    tol_l1: float,
    max_iters: int = 100_000,
    mu0: float = 0.05,
    m0: int = 4,
    rescale_w: bool = True,
    record_trace: bool = True,
    trace_stride: int = 1,
    monitor=None,
) -> SolveResult:
    """Solve the rescaled problem ``p`` with ``solver`` in :data:`SOLVERS`.

    ``max_iters`` bounds Sinkhorn iterations or accelerated inner steps, so
    iteration counts are comparable across solvers.
    """
    if solver == "sinkhorn":
        cfg = SolveConfig(tol_l1=tol_l1, max_iters=max_iters, record_trace=record_trace, trace_stride=trace_stride)
        return sinkhorn_solve(p, None, cfg, monitor=monitor)
    if solver == "acc":
        return fixed_mu_solve(p, mu0, tol_l1, max_iters, record_trace, trace_stride, monitor)
    if solver == "acc-homotopy":
        cfg = HomotopyConfig(
            mu0=mu0,
            m0=m0,
            max_outer=10_000,
            tol_l1=tol_l1,
            max_total_inner=max_iters,
            rescale_w=rescale_w,
            record_trace=record_trace,
            trace_stride=trace_stride,
        )
        return homotopy_solve(p, cfg, monitor=monitor)
    raise ValueError(f"unknown solver {solver!r}; choose from {SOLVERS}")

