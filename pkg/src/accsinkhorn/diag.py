"""Convergence diagnostics: Lyapunov energy, stability monitors and OT oracles.

The optimum ``x*`` and ``f(x*)`` are not available in closed form; every
energy diagnostic takes a :class:`Reference` produced by a high-accuracy
solve in their place.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .accel import HomotopyConfig, homotopy_solve
from .dualfn import RowSolved, row_solve_state
from .errors import OracleUnavailable
from .mirror import metric_D
from .otcore import PlanDense, TransportProblem, primal_cost
from .sinkhorn import SolveConfig, sinkhorn_solve
from .trace import SolverTrace

GRAD_FLOOR = 1e-12
SMOOTHNESS_L = 1.0
BRUTE_FORCE_MAX_N = 6


@dataclass(frozen=True, eq=False)
class Reference:
    """Stand-in for the exact optimum: gauge-fixed ``x*`` and ``f(x*)``."""

    x_star: np.ndarray
    f_star: float
    violation: float


def reference_solve(p: TransportProblem, tol=1e-12, max_iters=200_000) -> Reference:
    """Accelerated solve followed by a short Sinkhorn polish.

    If ``tol`` is below what double precision allows for this instance, the
    best point reached is returned and its violation recorded.
    """
    res = homotopy_solve(p, HomotopyConfig(tol_l1=tol, max_total_inner=max_iters, record_trace=False))
    polish = sinkhorn_solve(p, res.potentials.v, SolveConfig(tol_l1=tol, max_iters=200, record_trace=False))
    best = polish if polish.final_violation <= res.final_violation else res
    x = best.potentials.v - best.potentials.v.mean()
    st = row_solve_state(p, x)
    return Reference(x, st.f, float(np.abs(st.grad).sum()))


def _state(p, x, st):
    return st if st is not None else row_solve_state(p, x)


def mirror_point(p: TransportProblem, st: RowSolved) -> np.ndarray:
    """``grad_phi_star(grad f(x)) = log(c_P / b)``.

    Uses ``log1p(g / b)`` where the ratio is moderate, which keeps the
    second-order Bregman terms accurate near the optimum, and the cached log
    column sums where ``c_P << b`` and ``1 + g / b`` would round to zero.
    """
    r = st.grad / p.b
    near = r > -0.5
    out = st.log_col - p.log_b
    out[near] = np.log1p(r[near])
    return out


def bregman_zero_at(p: TransportProblem, st: RowSolved) -> float:
    """``D_phi*(0, grad f(x)) = sum_j b_j (r_j - log(1 + r_j))`` with ``r = g / b``."""
    return float(np.sum(p.b * (st.grad / p.b - mirror_point(p, st))))


def phi_star_at(p: TransportProblem, st: RowSolved) -> float:
    """``phi*(grad f(x)) = sum_j c_j log(c_j / b_j) - (c_j - b_j)``."""
    return float(np.sum(st.col * mirror_point(p, st) - st.grad))


def sinkhorn_descent_slack(p: TransportProblem, st: RowSolved, st_next: RowSolved) -> float:
    """``f(v+) - f(v) + D_phi*(0, grad f(v)) + D_phi*(grad f(v+), 0)``; nonpositive for a Sinkhorn step.

    ``D_phi*(xi, 0) = phi*(xi)`` because ``phi*`` is normalized with zero
    value and gradient at the origin.
    """
    return (st_next.f - st.f) + bregman_zero_at(p, st) + phi_star_at(p, st_next)


def lyapunov_energy(p: TransportProblem, x, y, mu, ref: Reference, st: RowSolved | None = None) -> float:
    """``f(x) - f* + (mu/2) ||y - x*||^2`` in the metric ``D(p(x))``."""
    st = _state(p, x, st)
    D = metric_D(p.b, mirror_point(p, st))
    return st.f - ref.f_star + 0.5 * mu * D.norm_sq(np.asarray(y) - ref.x_star)


def shift_coefficients(alpha: float, L: float = SMOOTHNESS_L) -> tuple[float, float]:
    """``(theta, L_tilde)`` with ``theta = (1/2 + alpha)/(1 + alpha)``, ``L_tilde = L (1 + alpha)``."""
    return (0.5 + alpha) / (1.0 + alpha), L * (1.0 + alpha)


def shifted_energy(p: TransportProblem, x, y, mu, ref: Reference, st: RowSolved | None = None) -> float:
    st = _state(p, x, st)
    theta, L_tilde = shift_coefficients(math.sqrt(2.0 * mu))
    return lyapunov_energy(p, x, y, mu, ref, st) - theta / L_tilde * bregman_zero_at(p, st)


def condition1_coefficient(alpha: float) -> float:
    return (4.0 - alpha**2 - 2.0 * math.sqrt(alpha)) / (2.0 * alpha * (1.0 + alpha) ** 2)


@dataclass(frozen=True)
class StabilityRecord:
    c1_lhs: float
    c1_rhs: float
    c2_lhs: float
    c2_rhs: float
    both_hold: bool
    skipped: bool


def _metric(p, st):
    return metric_D(p.b, mirror_point(p, st)).d


def stability_from_states(p, st_k, st_k1, y_k, y_k1, alpha, grad_floor=GRAD_FLOOR) -> StabilityRecord:
    g = st_k.grad
    d0 = _metric(p, st_k)
    d1 = _metric(p, st_k1)
    c1_lhs = float(np.sum(g * g * d1 / (d0 * d0)))
    c1_rhs = condition1_coefficient(alpha) * bregman_zero_at(p, st_k)
    vk = np.asarray(y_k) - st_k.v
    vk1 = np.asarray(y_k1) - st_k1.v
    # the metric difference can be indefinite: keep the sign of the quadratic form
    q = float(np.sum((d1 - d0) * vk * vk))
    c2_lhs = math.copysign(math.sqrt(abs(q)), q)
    c2_rhs = alpha**0.75 * math.sqrt(float(np.sum(d1 * vk1 * vk1)))
    if np.abs(g).max() < grad_floor:
        return StabilityRecord(c1_lhs, c1_rhs, c2_lhs, c2_rhs, True, True)
    return StabilityRecord(c1_lhs, c1_rhs, c2_lhs, c2_rhs, bool(c1_lhs < c1_rhs and c2_lhs < c2_rhs), False)


def stability_conditions(p: TransportProblem, x_k, x_k1, y_k, y_k1, alpha, grad_floor=GRAD_FLOOR) -> StabilityRecord:
    """Evaluate both per-step stability inequalities between ``k`` and ``k+1``.

    Condition 1 compares ``||grad f(x_k)||^2`` in ``D_k^-1 D_k+1 D_k^-1``
    against a multiple of ``D_phi*(0, grad f(x_k))``; condition 2 compares
    the velocity ``v_k = y_k - x_k`` in the metric change against
    ``alpha^(3/4) ||v_k+1||_{D_k+1}``.  Below ``grad_floor`` the step counts
    as converged and is marked skipped.
    """
    st_k = row_solve_state(p, x_k)
    st_k1 = row_solve_state(p, x_k1)
    return stability_from_states(p, st_k, st_k1, y_k, y_k1, alpha, grad_floor)


class RadiusTracker:
    """Running maxima of ``||x - x*||_{D(p(x))}`` and ``||y - x*||``."""

    def __init__(self, x_star):
        self.x_star = np.asarray(x_star, dtype=np.float64)
        self.r_x = 0.0
        self.r_y = 0.0

    def update(self, p, x, y, st: RowSolved | None = None) -> tuple[float, float]:
        st = _state(p, x, st)
        d = _metric(p, st)
        dx = np.asarray(x) - self.x_star
        self.r_x = max(self.r_x, math.sqrt(float(np.dot(d, dx * dx))))
        self.r_y = max(self.r_y, float(np.linalg.norm(np.asarray(y) - self.x_star)))
        return self.r_x, self.r_y

    @property
    def R_hat(self) -> float:
        return max(self.r_x, self.r_y)


def radius_tracker(tracker: RadiusTracker, p, x, y) -> RadiusTracker:
    tracker.update(p, x, y)
    return tracker


class LyapunovMonitor:
    """Solver monitor filling the energy, stability and radius trace fields.

    Pass an instance as ``monitor=`` to :func:`sinkhorn_solve` or
    :func:`homotopy_solve`.  Every step's stability record is also kept in
    :attr:`stability` regardless of the trace stride.
    """

    def __init__(self, p: TransportProblem, ref: Reference, grad_floor=GRAD_FLOOR):
        self.p = p
        self.ref = ref
        self.grad_floor = grad_floor
        self.radius = RadiusTracker(ref.x_star)
        self.stability: list[tuple[int, StabilityRecord]] = []
        self.energies: list[tuple[int, float, float]] = []
        self._prev = None

    def __call__(self, k, x, y, st, mu, alpha):
        p = self.p
        out = {}
        mu_e = 0.0 if mu is None else mu
        energy = lyapunov_energy(p, x, y, mu_e, self.ref, st)
        self.energies.append((k, mu_e, energy))
        out["energy"] = energy
        r_x, r_y = self.radius.update(p, x, y, st)
        out["radius_x"] = r_x
        out["radius_y"] = r_y
        d = _metric(p, st)
        if self._prev is not None:
            st_prev, y_prev, d_prev = self._prev
            out["metric_drift"] = float(np.abs(d - d_prev).max())
            if alpha is not None:
                rec = stability_from_states(p, st_prev, st, y_prev, y, alpha, self.grad_floor)
                self.stability.append((k, rec))
                out.update(c1_lhs=rec.c1_lhs, c1_rhs=rec.c1_rhs, c2_lhs=rec.c2_lhs, c2_rhs=rec.c2_rhs)
        self._prev = (st, np.array(y, dtype=np.float64), d)
        return out

    def holding_fraction(self) -> float:
        """Fraction of non-skipped steps on which both conditions held."""
        active = [r for _, r in self.stability if not r.skipped]
        if not active:
            return 1.0
        return sum(r.both_hold for r in active) / len(active)


def _uniform(w):
    return np.allclose(w, 1.0 / w.size, rtol=0.0, atol=1e-12)


def brute_force_ot(p: TransportProblem) -> float:
    """Exact unregularized OT cost on the original cost matrix.

    Covers square uniform instances up to 6x6 (enumerating permutation
    plans, the vertices of the Birkhoff polytope) and arbitrary 2x2
    instances (the polytope is a segment; the linear cost is optimal at an
    endpoint).
    """
    C = p.original_cost()
    n, m = C.shape
    if n == m and n <= BRUTE_FORCE_MAX_N and _uniform(p.a) and _uniform(p.b):
        cols = np.arange(n)
        best = min(C[cols, list(perm)].sum() for perm in itertools.permutations(range(n)))
        return float(best) / n
    if n == m == 2:
        a1, b1 = p.a[0], p.b[0]
        candidates = []
        for t in (max(0.0, a1 + b1 - 1.0), min(a1, b1)):
            P = np.array([[t, a1 - t], [b1 - t, 1.0 - a1 - b1 + t]])
            candidates.append(float(np.sum(C * P)))
        return min(candidates)
    raise OracleUnavailable(f"no brute-force oracle for a {n}x{m} instance with these marginals")


@dataclass(frozen=True)
class BiasCertificate:
    gap: float
    bound: float
    holds: bool


def entropic_bias_certificate(p: TransportProblem, plan: PlanDense) -> BiasCertificate:
    """Check ``<C, P_eps> - OT <= eps log(nm)`` in original cost units."""
    gap = primal_cost(plan, p.original_cost()) - brute_force_ot(p)
    bound = p.original_epsilon * math.log(p.n * p.m)
    return BiasCertificate(gap, bound, bool(gap <= bound + 1e-9))


def fit_perturbation_constant(energies, alpha, mu, R_hat) -> float:
    """Smallest ``C`` with ``E_k <= (1+alpha)^-k E_0 + C mu R^2`` along a fixed-mu run."""
    E = np.asarray(energies, dtype=np.float64)
    k = np.arange(E.size)
    excess = E - E[0] * (1.0 + alpha) ** (-k)
    scale = mu * max(R_hat, 1e-300) ** 2
    return float(max(excess.max(), 0.0) / scale)


def envelope_violations(energies, alpha, mu, R_hat, C_hat, slack=1e-12) -> int:
    E = np.asarray(energies, dtype=np.float64)
    k = np.arange(E.size)
    bound = E[0] * (1.0 + alpha) ** (-k) + C_hat * mu * R_hat**2
    return int(np.sum(E > bound + slack))


def homotopy_envelope(p: TransportProblem, result, ref: Reference, R_hat: float) -> list[dict]:
    """Energy at the start and at the end of every stage against ``(R^2 + 1) mu``.

    The energy after stage ``k`` is measured with that stage's ``mu`` and
    ``y = w / alpha``.
    """
    rows = []
    if result.stages:
        s0 = result.stages[0]
        x0 = np.zeros(p.m)
        w0 = np.zeros(p.m)
        e0 = lyapunov_energy(p, x0, w0 / s0["alpha"], s0["mu"], ref)
        rows.append({"stage": -1, "mu": s0["mu"], "energy": e0, "bound": (R_hat**2 + 1) * s0["mu"]})
    for s in result.stages:
        e = lyapunov_energy(p, s["x"], s["w"] / s["alpha"], s["mu"], ref)
        rows.append({"stage": s["stage"], "mu": s["mu"], "energy": e, "bound": (R_hat**2 + 1) * s["mu"]})
    for r in rows:
        r["holds"] = bool(r["energy"] <= r["bound"])
    return rows


def iterations_to_energy(trace: SolverTrace, taus) -> list[int | None]:
    """First recorded inner iteration whose energy is at most each ``tau``."""
    it = trace.column("iter")
    E = trace.column("energy")
    out = []
    for tau in taus:
        hit = np.nonzero(E <= tau)[0]
        out.append(int(it[hit[0]]) if hit.size else None)
    return out


def fit_power_law(taus, iters) -> float:
    """Least-squares exponent ``s`` in ``iters ~ c * tau^-s``."""
    x = -np.log(np.asarray(taus, dtype=np.float64))
    y = np.log(np.asarray(iters, dtype=np.float64))
    return float(np.polyfit(x, y, 1)[0])


def geometric_tail_ratio(values, tail=0.5) -> float:
    """Fitted per-iteration ratio of a positive sequence over its last ``tail`` fraction."""
    v = np.asarray(values, dtype=np.float64)
    v = v[v > 0]
    start = int(v.size * (1.0 - tail))
    seg = v[start:]
    if seg.size < 3:
        raise ValueError("not enough positive values to fit a rate")
    slope = np.polyfit(np.arange(seg.size), np.log(seg), 1)[0]
    return float(np.exp(slope))
