"""Mirror geometry of the column update.

The mirror map is ``phi(v) = sum_j b_j (exp(v_j) - v_j)``. Its conjugate is
normalized so that ``phi*(0) = 0``; with that convention the Bregman
divergence ``D_{phi*}(xi, 0)`` equals ``phi*(xi)``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DomainViolation, InvalidProblem, PotentialOverflow
from .otcore import EXP_BOUND, MASS_TOL

_TAYLOR_CUTOFF = 1e-8


@dataclass(frozen=True, eq=False)
class MirrorRef:
    """Column marginal ``b`` defining the mirror map."""

    b: np.ndarray

    def __post_init__(self):
        b = np.asarray(self.b, dtype=np.float64)
        if b.ndim != 1 or np.any(b <= 0) or not np.all(np.isfinite(b)):
            raise InvalidProblem("mirror reference b must be a finite positive vector")
        if abs(b.sum() - 1.0) > MASS_TOL:
            raise InvalidProblem(f"mirror reference b sums to {b.sum()!r}")
        object.__setattr__(self, "b", b)


@dataclass(frozen=True, eq=False)
class MetricDiag:
    """Diagonal of the state-dependent metric ``D(z)``."""

    d: np.ndarray

    def norm_sq(self, x) -> float:
        x = np.asarray(x)
        return float(np.dot(self.d, x * x))

    def norm(self, x) -> float:
        return float(np.sqrt(self.norm_sq(x)))


def _ref_b(ref):
    return ref.b if isinstance(ref, MirrorRef) else np.asarray(ref, dtype=np.float64)


def _check_domain(b, xi):
    ratio = xi / b
    if np.any(ratio <= -1.0):
        raise DomainViolation("argument violates xi_j > -b_j (a column sum would be nonpositive)")
    return ratio


def grad_phi(ref, v) -> np.ndarray:
    """``b .* exp(v) - b``."""
    b = _ref_b(ref)
    v = np.asarray(v, dtype=np.float64)
    if v.size and v.max() > EXP_BOUND:
        raise PotentialOverflow(f"exponent {v.max():.4g} exceeds bound {EXP_BOUND}")
    return b * np.expm1(v)


def grad_phi_star(ref, xi) -> np.ndarray:
    """``log(1 + xi ./ b)``, the inverse of :func:`grad_phi`."""
    b = _ref_b(ref)
    xi = np.asarray(xi, dtype=np.float64)
    return np.log1p(_check_domain(b, xi))


def phi_star(ref, xi) -> float:
    b = _ref_b(ref)
    xi = np.asarray(xi, dtype=np.float64)
    r = _check_domain(b, xi)
    return float(np.sum((b + xi) * np.log1p(r) - xi))


def bregman_phi_star(ref, xi, eta) -> float:
    """``phi*(xi) - phi*(eta) - <grad phi*(eta), xi - eta>``."""
    xi = np.asarray(xi, dtype=np.float64)
    eta = np.asarray(eta, dtype=np.float64)
    b = _ref_b(ref)
    # per-coordinate form avoids cancellation between the two phi* values
    r_xi = _check_domain(b, xi)
    r_eta = _check_domain(b, eta)
    terms = (b + xi) * (np.log1p(r_xi) - np.log1p(r_eta)) - (xi - eta)
    return float(np.sum(terms))


def bregman_from_zero(ref, eta) -> float:
    """``D_{phi*}(0, eta) = sum_j (eta_j - b_j log(1 + eta_j / b_j))``."""
    b = _ref_b(ref)
    eta = np.asarray(eta, dtype=np.float64)
    r = _check_domain(b, eta)
    return float(np.sum(b * (r - np.log1p(r))))


def expm1_ratio(z) -> np.ndarray:
    """``(exp(z) - 1) / z`` with the continuous extension ``1`` at ``z = 0``."""
    z = np.asarray(z, dtype=np.float64)
    out = np.empty_like(z)
    small = np.abs(z) < _TAYLOR_CUTOFF
    zs = z[small]
    out[small] = 1.0 + zs / 2.0 + zs * zs / 6.0
    zb = z[~small]
    out[~small] = np.expm1(zb) / zb
    return out


def metric_D(ref, z) -> MetricDiag:
    """Diagonal metric with ``D(z) z = grad_phi(z)``."""
    return MetricDiag(_ref_b(ref) * expm1_ratio(z))


def project_zero_sum(x) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    return x - x.mean()
