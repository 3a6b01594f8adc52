"""Color transfer and word alignment on top of the solvers.

Plans are oriented sources-on-rows, targets-on-columns everywhere in this
module.  For color transfer this means target sample ``j`` receives the
``P[:, j]``-weighted average of the source palette.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np

from .data import (
    BilingualDictionary,
    PointCloud,
    SplitMix64,
    cost_cosine,
    cost_sqeuclidean,
    image_pixels,
    load_dictionary,
    sample_pixels,
)
from .errors import DegenerateColumn, EmptyDictionary
from .otcore import PlanDense, TransportProblem, plan_from_potentials, rescale_problem
from .solvers import run_solver

EPS_GRID = (1.0, 1e-1, 1e-2, 1e-3, 1e-4)
TRANSFER_SAMPLES = 1000
ALIGNMENT_WORDS = 500
_NN_CHUNK = 1 << 21  # distance-tensor entries per block


@dataclass
class TransferResult:
    transferred_colors: np.ndarray
    full_image: np.ndarray
    solver_stats: dict = field(default_factory=dict)


@dataclass
class AlignmentReport:
    """Top-k scores; ``None`` marks an accuracy that is undefined (empty dictionary)."""

    top1: float | None
    top5: float | None
    evaluated_pairs: int
    solver_stats: dict = field(default_factory=dict)

    def as_dict(self) -> dict:
        return {"top1": self.top1, "top5": self.top5, "evaluated_pairs": self.evaluated_pairs, "solver_stats": self.solver_stats}


def transfer_tolerance(n: int) -> float:
    return 2.0 / n


def alignment_tolerance(n: int) -> float:
    return 0.01 * 2.0 / n


def uniform_problem(C, epsilon: float) -> TransportProblem:
    n, m = C.shape
    return TransportProblem(np.full(n, 1.0 / n), np.full(m, 1.0 / m), C, epsilon)


def solve_plan(p: TransportProblem, solver: str, tol_l1: float, max_iters: int = 100_000, **kw) -> tuple[PlanDense, dict]:
    """Solve ``p`` at its own epsilon and return the dense plan plus solver stats."""
    q = rescale_problem(p)
    t0 = time.perf_counter()
    res = run_solver(q, solver, tol_l1, max_iters=max_iters, record_trace=False, **kw)
    seconds = time.perf_counter() - t0
    plan = plan_from_potentials(q, res.potentials)
    stats = {"solver": solver, "epsilon": p.epsilon, "tol_l1": tol_l1, "seconds": seconds, **res.summary()}
    return plan, stats


# --- color transfer -----------------------------------------------------------


def barycentric_projection(plan: PlanDense, src_colors) -> np.ndarray:
    """Per target column ``j``: ``sum_i P_ij src_i / sum_i P_ij``."""
    P = plan.P
    src = np.asarray(src_colors, dtype=np.float64)
    if src.shape[0] != P.shape[0]:
        raise ValueError(f"plan has {P.shape[0]} source rows but {src.shape[0]} colors were given")
    col = P.sum(axis=0)
    bad = np.flatnonzero(~(col > 0))
    if bad.size:
        raise DegenerateColumn(f"plan column {int(bad[0])} has zero mass")
    return (P.T @ src) / col[:, None]


def nn_propagate(sampled: PointCloud, transferred, full_pixels) -> np.ndarray:
    """Give every full-resolution pixel the transferred color of its nearest sample.

    Exact brute force in RGB; ties go to the lowest sample index.  Repeated
    pixel colors are resolved once.
    """
    S = sampled.points
    T = np.asarray(transferred, dtype=np.float64)
    if len(S) == 0:
        raise ValueError("no sampled pixels")
    if T.shape[0] != S.shape[0]:
        raise ValueError("transferred colors and samples differ in length")
    full = np.asarray(full_pixels, dtype=np.float64)
    uniq, inverse = np.unique(full, axis=0, return_inverse=True)
    inverse = inverse.reshape(-1)
    nearest = np.empty(len(uniq), dtype=np.int64)
    step = max(1, _NN_CHUNK // (len(S) * S.shape[1]))
    for lo in range(0, len(uniq), step):
        blk = uniq[lo : lo + step]
        # explicit differences keep equal distances exactly equal, so argmin's
        # first-index rule implements the tie-break
        d = ((blk[:, None, :] - S[None, :, :]) ** 2).sum(axis=2)
        nearest[lo : lo + step] = np.argmin(d, axis=1)
    return np.clip(T[nearest[inverse]], 0.0, 1.0)


def run_color_transfer(
    src_img,
    tgt_img,
    epsilon: float,
    solver: str = "acc-homotopy",
    seed: int = 0,
    tol_l1: float | None = None,
    n: int = TRANSFER_SAMPLES,
    max_iters: int = 100_000,
) -> TransferResult:
    """Sample both images, solve, project barycentrically and propagate to ``tgt_img``.

    Both images are sampled with the same ``seed``.
    """
    src = sample_pixels(src_img, n, seed)
    tgt = sample_pixels(tgt_img, n, seed)
    p = uniform_problem(cost_sqeuclidean(src, tgt), epsilon)
    tol = transfer_tolerance(n) if tol_l1 is None else tol_l1
    plan, stats = solve_plan(p, solver, tol, max_iters)
    colors = np.clip(barycentric_projection(plan, src.points), 0.0, 1.0)
    tgt_arr = np.asarray(tgt_img)
    full = nn_propagate(tgt, colors, image_pixels(tgt_arr)).reshape(tgt_arr.shape[:2] + (3,))
    stats["samples"] = n
    stats["seed"] = seed
    return TransferResult(colors, full, stats)


# --- word alignment -----------------------------------------------------------


def predict_translations(plan: PlanDense) -> list[int]:
    """Row-wise argmax of the plan; the first maximal column wins."""
    return [int(j) for j in np.argmax(plan.P, axis=1)]


def topk_accuracy(plan: PlanDense, dictionary: BilingualDictionary, k: int) -> float:
    """Share of dictionary source words with some gold target among their top ``k`` plan entries."""
    if k < 1:
        raise ValueError("k must be >= 1")
    groups = dictionary.by_source()
    if not groups:
        raise EmptyDictionary("dictionary has no evaluable pairs")
    P = plan.P
    hits = 0
    for s, targets in groups.items():
        order = np.argsort(-P[s], kind="stable")[:k]
        if not set(targets).isdisjoint(order.tolist()):
            hits += 1
    return hits / len(groups)


def run_word_alignment(
    src_vecs: PointCloud,
    tgt_vecs: PointCloud,
    dictionary,
    epsilon: float,
    solver: str = "acc-homotopy",
    tol_l1: float | None = None,
    normalization: str = "minmax",
    max_iters: int = 100_000,
) -> AlignmentReport:
    """Cosine-cost alignment of two vocabularies scored against ``dictionary``.

    ``dictionary`` is a :class:`BilingualDictionary` over row/column indices,
    or a path to a ``src tgt`` word-pair file resolved against the labels.
    """
    if not isinstance(dictionary, BilingualDictionary):
        dictionary = load_dictionary(dictionary, src_vecs.labels, tgt_vecs.labels)
    p = uniform_problem(cost_cosine(src_vecs, tgt_vecs, normalization), epsilon)
    tol = alignment_tolerance(p.n) if tol_l1 is None else tol_l1
    plan, stats = solve_plan(p, solver, tol, max_iters)
    # realized cosine-distance range before normalization
    raw = 1.0 - src_vecs.points @ tgt_vecs.points.T
    stats["cost_min"], stats["cost_max"] = float(raw.min()), float(raw.max())
    stats["normalization"] = normalization
    if len(dictionary) == 0:
        top1 = top5 = None
    else:
        top1 = topk_accuracy(plan, dictionary, 1)
        top5 = topk_accuracy(plan, dictionary, 5)
    return AlignmentReport(top1, top5, len(dictionary), stats)


def random_rotation(d: int, seed: int, angle: float | None = None) -> np.ndarray:
    """Random orthogonal ``d x d`` matrix.

    With ``angle=None`` the matrix is Haar-distributed (sign-corrected QR).
    Otherwise it is the Cayley transform of a random skew-symmetric matrix
    scaled so that no vector turns by more than ``angle`` radians.
    """
    G = SplitMix64(seed).normal(d * d).reshape(d, d)
    if angle is None:
        Q, R = np.linalg.qr(G)
        return Q * np.where(np.diag(R) < 0, -1.0, 1.0)[None, :]
    A = G - G.T
    # Cayley eigenvalue i*s turns by 2*atan(s/2); solve for the spectral scale
    A *= 2.0 * math.tan(angle / 2.0) / np.linalg.norm(A, 2)
    eye = np.eye(d)
    return np.linalg.solve(eye - A / 2.0, eye + A / 2.0)


def rotation_fixture(n: int, d: int, seed: int, angle: float = 0.3, noise: float = 0.2) -> tuple[PointCloud, PointCloud, BilingualDictionary]:
    """Unit vectors, a rotated (optionally perturbed) copy and the identity dictionary.

    Inner products are rotation invariant, but the cross-space score
    ``<x_i, R x_j>`` only keeps ``j = i`` on top when ``R`` is close enough to
    the identity; ``angle`` bounds the rotation for that reason.  ``noise``
    adds Gaussian jitter of that scale before renormalizing, which breaks the
    near-symmetry of the cost so solvers have work to do.
    """
    rng = SplitMix64(seed)
    X = rng.normal(n * d).reshape(n, d)
    X /= np.linalg.norm(X, axis=1, keepdims=True)
    Y = X @ random_rotation(d, seed + 1, angle).T
    if noise > 0:
        Y = Y + noise * SplitMix64(seed + 2).normal(n * d).reshape(n, d)
        Y /= np.linalg.norm(Y, axis=1, keepdims=True)
    labels = [f"w{i}" for i in range(n)]
    return PointCloud(X, labels), PointCloud(Y, labels), BilingualDictionary([(i, i) for i in range(n)])


def synthetic_image(h: int, w: int, seed: int, palette: int = 6) -> np.ndarray:
    """Blocky ``(h, w, 3)`` uint8 image drawn from a random palette, for fixtures."""
    rng = SplitMix64(seed)
    colors = np.floor(rng.uniform(palette * 3) * 256).astype(np.uint8).reshape(palette, 3)
    bh, bw = max(1, h // 4), max(1, w // 4)
    cells = rng.below(np.full(math.ceil(h / bh) * math.ceil(w / bw), palette)).reshape(math.ceil(h / bh), math.ceil(w / bw))
    grid = np.repeat(np.repeat(cells, bh, axis=0), bw, axis=1)[:h, :w]
    noise = np.floor(rng.uniform(h * w * 3) * 16).astype(np.int64).reshape(h, w, 3) - 8
    return np.clip(colors[grid].astype(np.int64) + noise, 0, 255).astype(np.uint8)
