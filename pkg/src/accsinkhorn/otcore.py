"""Transport-problem types and plan evaluation.

Solvers work on the rescaled problem ``C / eps`` with ``eps = 1``; the
original regularization is kept on the rescaled instance so primal costs can
be reported in the original units.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .errors import InvalidProblem, NonPositiveEntry, PotentialOverflow

MASS_TOL = 1e-12
EXP_BOUND = 700.0


def _as_vector(x, name):
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1 or x.size == 0:
        raise InvalidProblem(f"{name} must be a non-empty 1-d array, got shape {x.shape}")
    return x


@dataclass(frozen=True, eq=False)
class TransportProblem:
    """Entropic OT instance ``min <C,P> + eps * sum P(log P - 1)`` over Pi(a, b).

    Attributes:
        a: Row marginal, strictly positive, sums to one.
        b: Column marginal, strictly positive, sums to one.
        C: Finite nonnegative cost matrix of shape ``(n, m)``.
        epsilon: Regularization strength.
        source_epsilon: Regularization of the instance this one was rescaled
            from, or ``None`` if it was not produced by :func:`rescale_problem`.
    """

    a: np.ndarray
    b: np.ndarray
    C: np.ndarray
    epsilon: float = 1.0
    source_epsilon: float | None = field(default=None)

    def __post_init__(self):
        a = _as_vector(self.a, "a")
        b = _as_vector(self.b, "b")
        C = np.asarray(self.C, dtype=np.float64)
        if C.shape != (a.size, b.size):
            raise InvalidProblem(f"C has shape {C.shape}, expected {(a.size, b.size)}")
        for name, w in (("a", a), ("b", b)):
            if not np.all(np.isfinite(w)) or np.any(w <= 0):
                raise InvalidProblem(f"{name} must be finite and strictly positive")
            if abs(w.sum() - 1.0) > MASS_TOL:
                raise InvalidProblem(f"{name} sums to {w.sum()!r}, expected 1")
        if not np.all(np.isfinite(C)):
            raise InvalidProblem("C has non-finite entries")
        if np.any(C < 0):
            raise InvalidProblem("C has negative entries")
        eps = float(self.epsilon)
        if not (eps > 0 and np.isfinite(eps)):
            raise InvalidProblem(f"epsilon must be positive, got {self.epsilon!r}")
        for arr in (a, b, C):
            arr.setflags(write=False)
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "C", C)
        object.__setattr__(self, "epsilon", eps)

    @property
    def n(self) -> int:
        return self.a.size

    @property
    def m(self) -> int:
        return self.b.size

    @property
    def shape(self) -> tuple[int, int]:
        return self.C.shape

    @cached_property
    def log_a(self) -> np.ndarray:
        return np.log(self.a)

    @cached_property
    def log_b(self) -> np.ndarray:
        return np.log(self.b)

    @cached_property
    def neg_cost(self) -> np.ndarray:
        """Log-kernel ``-C / eps``; the kernel itself is never exponentiated."""
        out = -self.C / self.epsilon
        out.setflags(write=False)
        return out

    @property
    def is_rescaled(self) -> bool:
        return self.epsilon == 1.0

    def original_cost(self) -> np.ndarray:
        """Cost matrix in the units of the instance before rescaling."""
        if self.source_epsilon is None:
            return self.C
        return self.C * self.source_epsilon

    @property
    def original_epsilon(self) -> float:
        return self.epsilon if self.source_epsilon is None else self.source_epsilon


@dataclass(frozen=True)
class DualPotentials:
    u: np.ndarray
    v: np.ndarray

    def __post_init__(self):
        u = np.asarray(self.u, dtype=np.float64)
        v = np.asarray(self.v, dtype=np.float64)
        if not (np.all(np.isfinite(u)) and np.all(np.isfinite(v))):
            raise InvalidProblem("dual potentials must be finite")
        object.__setattr__(self, "u", u)
        object.__setattr__(self, "v", v)


@dataclass(frozen=True, eq=False)
class PlanDense:
    """Explicit transport plan with cached marginals."""

    P: np.ndarray
    row_sums: np.ndarray
    col_sums: np.ndarray

    @classmethod
    def from_matrix(cls, P) -> "PlanDense":
        P = np.asarray(P, dtype=np.float64)
        return cls(P, P.sum(axis=1), P.sum(axis=0))

    @property
    def total_mass(self) -> float:
        return float(self.row_sums.sum())


def rescale_problem(p: TransportProblem) -> TransportProblem:
    """Return the equivalent instance with cost ``C / eps`` and ``eps = 1``."""
    if p.source_epsilon is not None and p.epsilon == 1.0:
        return p
    return TransportProblem(p.a, p.b, p.C / p.epsilon, 1.0, source_epsilon=p.epsilon)


def log_plan(p: TransportProblem, u, v, bound=EXP_BOUND) -> np.ndarray:
    """``u_i + v_j - C_ij`` on the rescaled cost, with the overflow guard."""
    logP = np.asarray(u)[:, None] + np.asarray(v)[None, :] + p.neg_cost
    top = logP.max()
    if top > bound:
        raise PotentialOverflow(f"plan exponent {top:.4g} exceeds bound {bound}")
    return logP


def plan_from_potentials(p: TransportProblem, d: DualPotentials, bound=EXP_BOUND) -> PlanDense:
    """Materialize ``P_ij = exp(u_i + v_j - C_ij)``."""
    P = np.exp(log_plan(p, d.u, d.v, bound))
    return PlanDense.from_matrix(P)


def marginal_violation_l1(plan: PlanDense, p: TransportProblem) -> float:
    """``||P 1 - a||_1 + ||P^T 1 - b||_1``."""
    return float(np.abs(plan.row_sums - p.a).sum() + np.abs(plan.col_sums - p.b).sum())


def primal_cost(plan: PlanDense, C) -> float:
    return float(np.sum(np.asarray(C) * plan.P))


def entropic_objective(plan: PlanDense, C, epsilon: float) -> float:
    P = plan.P
    if np.any(P <= 0):
        raise NonPositiveEntry("entropic objective needs a strictly positive plan")
    return float(np.sum(np.asarray(C) * P) + epsilon * np.sum(P * (np.log(P) - 1.0)))
