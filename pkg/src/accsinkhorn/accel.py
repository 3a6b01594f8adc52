"""Accelerated Sinkhorn and its homotopy driver.

One accelerated step combines two normalized Sinkhorn evaluations,
``S(x_k)`` and ``S(x_{k+1})``; the second is carried into the next step, so
each step costs a single new evaluation::

    x+ = (w + S(x)) / (1 + alpha)
    w+ = (w + (alpha^2 - 2) x+ + 2 S(x+)) / (1 + alpha),   alpha = sqrt(2 mu)

The homotopy driver halves ``mu`` between stages and grows the inner budget
as ``m <- floor(sqrt(2) m) + 1``.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, replace
from typing import Callable, NamedTuple

import numpy as np

from .dualfn import RowSolved
from .mirror import project_zero_sum
from .otcore import DualPotentials, TransportProblem
from .sinkhorn import GAUGE_TOL, SinkhornOracle, SolveResult, _record, violation_from_state
from .trace import SolverTrace


@dataclass(frozen=True, eq=False)
class AccelState:
    """Accelerated pair ``(x, w)`` with ``w = alpha * y``.

    ``cache`` holds ``(S(x), row-solved state at x)`` when already known.
    """

    x: np.ndarray
    w: np.ndarray
    mu: float
    cache: tuple[np.ndarray, RowSolved] | None = None

    @property
    def alpha(self) -> float:
        return math.sqrt(2.0 * self.mu)

    @property
    def y(self) -> np.ndarray:
        return self.w / self.alpha

    def check(self, tol=GAUGE_TOL):
        if not 0.0 < self.mu < 1.0:
            raise ValueError(f"mu must lie in (0, 1), got {self.mu}")
        for name in ("x", "w"):
            s = float(np.sum(getattr(self, name)))
            if abs(s) > tol:
                raise ValueError(f"{name} is not zero-sum (sum={s:.3e})")


@dataclass(frozen=True)
class HomotopyConfig:
    mu0: float = 0.05
    m0: int = 4
    max_outer: int = 60
    tol_l1: float = 1e-6
    max_total_inner: int = 100_000
    rescale_w: bool = True
    record_trace: bool = True
    trace_stride: int = 1

    def __post_init__(self):
        if not 0.0 < self.mu0 < 1.0:
            raise ValueError("mu0 must lie in (0, 1)")
        if self.m0 < 1:
            raise ValueError("m0 must be >= 1")
        if self.max_outer < 0 or self.max_total_inner < 1:
            raise ValueError("max_outer must be >= 0 and max_total_inner >= 1")
        if not self.tol_l1 > 0:
            raise ValueError("tol_l1 must be positive")
        if self.trace_stride < 1:
            raise ValueError("trace_stride must be >= 1")


def next_schedule(mu: float, m: int) -> tuple[float, int]:
    """``(mu / 2, floor(sqrt(2) m) + 1)``; the floor is computed exactly."""
    return mu / 2.0, math.isqrt(2 * m * m) + 1


def acc_step(p: TransportProblem, s: AccelState, oracle: SinkhornOracle | None = None) -> AccelState:
    oracle = oracle or SinkhornOracle(p)
    Sx, _ = s.cache if s.cache is not None else oracle(s.x)
    a = s.alpha
    x1 = project_zero_sum((s.w + Sx) / (1.0 + a))
    Sx1, st1 = oracle(x1)
    w1 = project_zero_sum((s.w + (a * a - 2.0) * x1 + 2.0 * Sx1) / (1.0 + a))
    return AccelState(x1, w1, s.mu, cache=(Sx1, st1))


class AccRun(NamedTuple):
    x: np.ndarray
    w: np.ndarray
    state: AccelState
    steps: int


def acc_run(
    p: TransportProblem,
    x0,
    w0,
    mu: float,
    m: int,
    oracle: SinkhornOracle | None = None,
    cache=None,
    on_step: Callable[[int, AccelState], bool] | None = None,
) -> AccRun:
    """Apply ``m`` accelerated steps at fixed ``mu``.

    ``on_step(k, state)`` is called after step ``k`` (1-based); returning
    ``True`` stops the run early.  Without a ``cache`` a run with ``m >= 1``
    performs exactly ``m + 1`` map evaluations; ``m = 0`` returns the input.
    """
    if m < 0:
        raise ValueError("m must be >= 0")
    oracle = oracle or SinkhornOracle(p)
    s = AccelState(np.asarray(x0, dtype=np.float64), np.asarray(w0, dtype=np.float64), mu, cache)
    k = 0
    while k < m:
        s = acc_step(p, s, oracle)
        k += 1
        if on_step is not None and on_step(k, s):
            break
    return AccRun(s.x, s.w, s, k)


def homotopy_solve(p: TransportProblem, cfg: HomotopyConfig | None = None, x0=None, w0=None, monitor=None) -> SolveResult:
    """Acc-Sinkhorn with the halving ``mu`` schedule.

    The marginal violation is checked at the start point and after every
    inner step; ``iterations`` counts inner steps, each of which costs one
    Sinkhorn evaluation.  By default ``w`` is rescaled at each stage
    boundary so that ``y = w / alpha`` is preserved, which keeps a fixed
    point fixed when ``alpha`` changes; ``rescale_w=False`` carries ``w``
    over unchanged.
    """
    cfg = cfg or HomotopyConfig()
    oracle = SinkhornOracle(p)
    x = project_zero_sum(np.zeros(p.m) if x0 is None else x0)
    w = project_zero_sum(np.zeros(p.m) if w0 is None else w0)
    trace = SolverTrace() if cfg.record_trace else None
    t0 = time.perf_counter()

    Sx, st = oracle(x)
    cache = (Sx, st)
    viol = violation_from_state(st)
    mu, m = cfg.mu0, cfg.m0
    alpha = math.sqrt(2.0 * mu)
    extra = monitor(0, x, w / alpha, st, mu, alpha) if monitor else None
    if trace is not None:
        _record(trace, 0, t0, st, viol, mu, alpha, extra)

    total = 0
    stages = []
    converged = viol < cfg.tol_l1
    prev_alpha = None
    stage = 0
    while not converged and stage <= cfg.max_outer and total < cfg.max_total_inner:
        alpha = math.sqrt(2.0 * mu)
        if cfg.rescale_w and prev_alpha is not None:
            w = w * (alpha / prev_alpha)
        budget = min(m, cfg.max_total_inner - total)
        start = total
        status = {}

        def on_step(k, s, _mu=mu, _alpha=alpha, _start=start):
            Sx1, st1 = s.cache
            v = violation_from_state(st1)
            it = _start + k
            ex = monitor(it, s.x, s.y, st1, _mu, _alpha) if monitor else None
            done = v < cfg.tol_l1
            if trace is not None and (it % cfg.trace_stride == 0 or done):
                _record(trace, it, t0, st1, v, _mu, _alpha, ex)
            status["viol"] = v
            status["done"] = done
            return done

        run = acc_run(p, x, w, mu, budget, oracle, cache=cache, on_step=on_step)
        x, w, cache = run.x, run.w, run.state.cache
        total += run.steps
        if run.steps:
            viol = status["viol"]
            converged = status["done"]
        stages.append(
            {
                "stage": stage,
                "mu": mu,
                "alpha": alpha,
                "m": m,
                "steps": run.steps,
                "start_iter": start,
                "end_iter": total,
                "violation": viol,
                "x": x.copy(),
                "w": w.copy(),
            }
        )
        prev_alpha = alpha
        mu, m = next_schedule(mu, m)
        stage += 1

    if trace is not None and trace.records[-1]["iter"] != total:
        _, st_last = cache
        _record(trace, total, t0, st_last, viol, stages[-1]["mu"], stages[-1]["alpha"])
    _, st_last = cache
    return SolveResult(
        potentials=DualPotentials(st_last.u, st_last.v),
        iterations=total,
        converged=converged,
        final_violation=viol,
        trace=trace,
        evaluations=oracle.evaluations,
        stages=stages,
        x=x,
        w=w,
    )
