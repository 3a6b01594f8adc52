"""Dual objective, exact row solve and the reduced objective ``f(v)``.

Everything is evaluated in the log domain on the rescaled cost; the kernel
``exp(-C)`` is never formed.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionTooLarge
from .otcore import EXP_BOUND, DualPotentials, PlanDense, TransportProblem, log_plan

HESSIAN_CAP = 2000


@dataclass(frozen=True, eq=False)
class LogKernelView:
    """Read-only view of ``log K = -C`` for a rescaled problem."""

    negC: np.ndarray

    @classmethod
    def of(cls, p: TransportProblem) -> "LogKernelView":
        return cls(p.neg_cost)


def logsumexp(M, axis):
    """Shift-stable ``log(sum(exp(M), axis))``."""
    mx = M.max(axis=axis, keepdims=True)
    out = np.log(np.exp(M - mx).sum(axis=axis, keepdims=True)) + mx
    return np.squeeze(out, axis=axis)


@dataclass(frozen=True, eq=False)
class RowSolved:
    """State after the exact row solve at ``v``.

    ``log_col`` holds ``log c_P`` so callers can form the column update
    ``log b - log c_P`` without leaving the log domain.
    """

    v: np.ndarray
    u: np.ndarray
    log_col: np.ndarray
    col: np.ndarray
    grad: np.ndarray
    f: float


_TINY = 1e-280
_CLAMP = -700.0


def row_solve_state(p: TransportProblem, v) -> RowSolved:
    v = np.asarray(v, dtype=np.float64)
    M = p.neg_cost + v[None, :]
    mx = M.max(axis=1)
    M -= mx[:, None]
    # clamp keeps exp off the subnormal slow path; a clamped entry adds at most
    # 1e-304 to row sums that are >= 1, and tiny columns are redone below
    np.maximum(M, _CLAMP, out=M)
    E = np.exp(M, out=M)  # row-shifted kernel, entries in (0, 1]
    s = E.sum(axis=1)
    u = p.log_a - mx - np.log(s)
    # P = E * (a / s) row-wise, so column sums need no second exponentiation
    col = E.T @ (p.a / s)
    low = col < _TINY
    if np.any(low):
        # columns lost to underflow: redo them fully in the log domain
        sub = p.neg_cost[:, low] + v[low][None, :] + u[:, None]
        col_low = logsumexp(sub, axis=0)
        log_col = np.log(np.where(low, 1.0, col))
        log_col[low] = col_low
        col = np.exp(log_col)
    else:
        log_col = np.log(col)
    f = 1.0 - float(np.dot(u, p.a)) - float(np.dot(v, p.b))
    return RowSolved(v, u, log_col, col, col - p.b, f)


def row_solve(p: TransportProblem, v) -> np.ndarray:
    """``u_i = log a_i - logsumexp_j(v_j - C_ij)``."""
    v = np.asarray(v, dtype=np.float64)
    return p.log_a - logsumexp(p.neg_cost + v[None, :], axis=1)


def dual_F(p: TransportProblem, d: DualPotentials, bound=EXP_BOUND) -> float:
    """``sum_ij exp(u_i + v_j - C_ij) - <u, a> - <v, b>``."""
    logP = log_plan(p, d.u, d.v, bound)
    mx = logP.max()
    mass = np.exp(mx) * np.exp(logP - mx).sum()
    return float(mass - np.dot(d.u, p.a) - np.dot(d.v, p.b))


def reduced_f(p: TransportProblem, v) -> float:
    """``f(v) = min_u F(u, v)``; uses the unit total mass after the row solve."""
    v = np.asarray(v, dtype=np.float64)
    u = row_solve(p, v)
    return 1.0 - float(np.dot(u, p.a)) - float(np.dot(v, p.b))


def grad_f(p: TransportProblem, v) -> np.ndarray:
    """Column residual ``c_P - b`` after the exact row solve."""
    return row_solve_state(p, v).grad


def hessian_f(p: TransportProblem, v, cap=HESSIAN_CAP) -> np.ndarray:
    """Schur complement ``diag(c_P) - P^T diag(r_P)^{-1} P`` (dense, diagnostics only)."""
    if p.m > cap:
        raise DimensionTooLarge(f"m={p.m} exceeds diagnostic cap {cap}")
    v = np.asarray(v, dtype=np.float64)
    u = row_solve(p, v)
    P = np.exp(log_plan(p, u, v))
    r = P.sum(axis=1)
    c = P.sum(axis=0)
    H = np.diag(c) - P.T @ (P / r[:, None])
    return 0.5 * (H + H.T)


def plan_at(p: TransportProblem, v) -> PlanDense:
    """Plan ``P(u(v), v)`` after the exact row solve."""
    v = np.asarray(v, dtype=np.float64)
    u = row_solve(p, v)
    return PlanDense.from_matrix(np.exp(log_plan(p, u, v)))
