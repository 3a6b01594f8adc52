"""Instance generation and input loading: synthetic problems, images, word vectors.

Random draws come from SplitMix64 (Steele, Lea & Flood 2014): output ``i``
of a stream seeded with ``s`` is ``mix(s + (i + 1) * 0x9E3779B97F4A7C15)``
and a uniform double is ``(out >> 11) * 2**-53``.  The generator is
counter-based, so instances can be rebuilt bit-for-bit in any language.
"""

from __future__ import annotations

import csv
import hashlib
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import (
    DuplicateWord,
    ImageTooSmall,
    InvalidProblem,
    MalformedLine,
    VocabularyTooSmall,
    ZeroVector,
)
from .otcore import TransportProblem

_GAMMA = np.uint64(0x9E3779B97F4A7C15)
_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX2 = np.uint64(0x94D049BB133111EB)
_MASK64 = (1 << 64) - 1


class SplitMix64:
    """Vectorized SplitMix64 stream."""

    def __init__(self, seed: int):
        self.seed = int(seed)
        self._state = np.uint64(self.seed & _MASK64)
        self._count = 0

    def next_uint64(self, size: int) -> np.ndarray:
        k = np.arange(self._count + 1, self._count + size + 1, dtype=np.uint64)
        self._count += size
        with np.errstate(over="ignore"):
            z = self._state + k * _GAMMA
            z = (z ^ (z >> np.uint64(30))) * _MIX1
            z = (z ^ (z >> np.uint64(27))) * _MIX2
        return z ^ (z >> np.uint64(31))

    def uniform(self, size: int) -> np.ndarray:
        """Doubles in ``[0, 1)`` with 53 random bits."""
        return (self.next_uint64(size) >> np.uint64(11)).astype(np.float64) * 2.0**-53

    def normal(self, size: int) -> np.ndarray:
        """Standard normals by Box-Muller; consumes ``2 * ceil(size / 2)`` outputs."""
        half = (size + 1) // 2
        u1 = 1.0 - self.uniform(half)  # (0, 1], keeps the log finite
        u2 = self.uniform(half)
        r = np.sqrt(-2.0 * np.log(u1))
        z = np.concatenate([r * np.cos(2.0 * np.pi * u2), r * np.sin(2.0 * np.pi * u2)])
        return z[:size]

    def below(self, bounds) -> np.ndarray:
        """One integer in ``[0, bound)`` per entry of ``bounds`` (floor of a scaled uniform)."""
        bounds = np.asarray(bounds, dtype=np.int64)
        draws = np.floor(self.uniform(bounds.size) * bounds).astype(np.int64)
        return np.minimum(draws, bounds - 1)


@dataclass
class PointCloud:
    points: np.ndarray
    labels: list | None = None

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=np.float64)
        if pts.ndim != 2:
            raise ValueError(f"points must be a 2-d array, got shape {pts.shape}")
        if not np.all(np.isfinite(pts)):
            raise ValueError("points must be finite")
        if self.labels is not None and len(self.labels) != pts.shape[0]:
            raise ValueError("labels and points differ in length")
        self.points = pts

    def __len__(self):
        return self.points.shape[0]

    @property
    def dim(self) -> int:
        return self.points.shape[1]


@dataclass
class BilingualDictionary:
    pairs: list = field(default_factory=list)

    def __len__(self):
        return len(self.pairs)

    def by_source(self) -> dict:
        groups: dict[int, list[int]] = {}
        for s, t in self.pairs:
            groups.setdefault(s, []).append(t)
        return groups


# --- synthetic instances ----------------------------------------------------


def synthetic_instance(n: int, m: int, seed: int, epsilon: float = 1.0) -> TransportProblem:
    """Random instance: ``a``, ``b`` and ``C`` i.i.d. uniform, ``a``, ``b`` and ``C`` each rescaled to unit sum.

    Draw order is ``a`` (n values), ``b`` (m values), then ``C`` row-major.
    """
    if n < 1 or m < 1:
        raise ValueError("n and m must be >= 1")
    rng = SplitMix64(seed)
    a = rng.uniform(n)
    b = rng.uniform(m)
    C = rng.uniform(n * m).reshape(n, m)
    # a zero draw has probability 2^-53 per entry; nudge to keep marginals positive
    a = np.maximum(a, 2.0**-53)
    b = np.maximum(b, 2.0**-53)
    return TransportProblem(a / a.sum(), b / b.sum(), C / C.sum(), epsilon)


def parse_synthetic_spec(text: str) -> dict:
    """Parse ``"n=100,m=50,seed=7"``."""
    out = {}
    for part in text.split(","):
        key, sep, val = part.partition("=")
        if not sep or key.strip() not in ("n", "m", "seed"):
            raise ValueError(f"bad synthetic spec component {part!r}")
        out[key.strip()] = int(val)
    if "n" not in out:
        raise ValueError("synthetic spec needs n")
    out.setdefault("m", out["n"])
    out.setdefault("seed", 0)
    return out


def write_instance_csv(p: TransportProblem, path) -> None:
    """Dump ``a``, ``b``, ``C`` and ``epsilon`` as ``field,i,j,value`` rows (exact round trip)."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["field", "i", "j", "value"])
        w.writerow(["epsilon", "", "", repr(p.epsilon)])
        for i, x in enumerate(p.a):
            w.writerow(["a", i, "", repr(float(x))])
        for j, x in enumerate(p.b):
            w.writerow(["b", j, "", repr(float(x))])
        n, m = p.shape
        for i in range(n):
            for j in range(m):
                w.writerow(["C", i, j, repr(float(p.C[i, j]))])


def read_instance_csv(path, epsilon: float | None = None) -> TransportProblem:
    a, b, C, eps = {}, {}, {}, None
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != ["field", "i", "j", "value"]:
            raise MalformedLine(path, 1, f"unexpected header {header!r}")
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 4:
                raise MalformedLine(path, lineno, "expected 4 fields")
            kind, i, j, val = row
            try:
                x = float(val)
                if kind == "epsilon":
                    eps = x
                elif kind == "a":
                    a[int(i)] = x
                elif kind == "b":
                    b[int(i)] = x
                elif kind == "C":
                    C[int(i), int(j)] = x
                else:
                    raise ValueError(f"unknown field {kind!r}")
            except ValueError as exc:
                raise MalformedLine(path, lineno, str(exc)) from None
    n, m = len(a), len(b)
    if sorted(a) != list(range(n)) or sorted(b) != list(range(m)) or len(C) != n * m:
        raise InvalidProblem(f"{path}: incomplete instance")
    Cm = np.empty((n, m))
    for (i, j), x in C.items():
        Cm[i, j] = x
    av = np.array([a[i] for i in range(n)])
    bv = np.array([b[j] for j in range(m)])
    return TransportProblem(av, bv, Cm, epsilon if epsilon is not None else (eps if eps is not None else 1.0))


# --- images -----------------------------------------------------------------


def load_image(path) -> np.ndarray:
    """Decode a PNG or PPM file to an ``(H, W, 3)`` uint8 array."""
    from PIL import Image

    with Image.open(path) as im:
        return np.asarray(im.convert("RGB"), dtype=np.uint8)


def save_image(path, rgb) -> None:
    """Write an ``(H, W, 3)`` array with values in ``[0, 1]`` as 8-bit PNG."""
    from PIL import Image

    arr = np.clip(np.asarray(rgb, dtype=np.float64), 0.0, 1.0)
    Image.fromarray(np.round(arr * 255.0).astype(np.uint8), mode="RGB").save(path, format="PNG")


def image_pixels(image) -> np.ndarray:
    """Flatten an RGB raster to ``(H*W, 3)`` floats in ``[0, 1]``."""
    img = np.asarray(image)
    if img.ndim != 3 or img.shape[2] != 3:
        raise ValueError(f"expected an (H, W, 3) image, got shape {img.shape}")
    flat = img.reshape(-1, 3)
    if np.issubdtype(flat.dtype, np.integer):
        return flat.astype(np.float64) / 255.0
    return flat.astype(np.float64)


def sample_pixels(image, n: int, seed: int) -> PointCloud:
    """Uniform sample of ``n`` distinct pixels (partial Fisher-Yates shuffle)."""
    pix = image_pixels(image)
    total = pix.shape[0]
    if n > total:
        raise ImageTooSmall(f"image has {total} pixels, cannot sample {n}")
    if n < 1:
        raise ValueError("n must be >= 1")
    rng = SplitMix64(seed)
    idx = np.arange(total, dtype=np.int64)
    offsets = rng.below(total - np.arange(n))
    for i in range(n):
        j = i + offsets[i]
        idx[i], idx[j] = idx[j], idx[i]
    chosen = idx[:n]
    return PointCloud(pix[chosen], [int(k) for k in chosen])


def cost_sqeuclidean(src: PointCloud, tgt: PointCloud) -> np.ndarray:
    """Squared Euclidean costs divided by their maximum (all zeros if the maximum is 0)."""
    if src.dim != tgt.dim:
        raise ValueError("point clouds differ in dimension")
    X, Y = src.points, tgt.points
    C = np.sum(X * X, axis=1)[:, None] + np.sum(Y * Y, axis=1)[None, :] - 2.0 * X @ Y.T
    np.maximum(C, 0.0, out=C)
    top = C.max()
    return C / top if top > 0 else np.zeros_like(C)


def cost_cosine(src: PointCloud, tgt: PointCloud, normalization: str = "minmax") -> np.ndarray:
    """Cosine distance ``1 - <x_i, y_j>`` mapped to ``[0, 1]``.

    ``normalization="minmax"`` rescales by the realized range of the matrix;
    ``"half"`` divides the ``[0, 2]`` range by two.
    """
    if src.dim != tgt.dim:
        raise ValueError("point clouds differ in dimension")
    C = 1.0 - src.points @ tgt.points.T
    if normalization == "half":
        return np.clip(C / 2.0, 0.0, 1.0)
    if normalization != "minmax":
        raise ValueError(f"unknown normalization {normalization!r}")
    lo, hi = C.min(), C.max()
    if hi - lo <= 0:
        return np.zeros_like(C)
    return (C - lo) / (hi - lo)


# --- word vectors and dictionaries -----------------------------------------


def load_word_vectors(path, n: int) -> PointCloud:
    """Read the first ``n`` distinct words of a fastText ``.vec`` text file, unit-normalized."""
    words, vecs, seen = [], [], set()
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().split()
        if len(header) != 2:
            raise MalformedLine(path, 1, "header must be '<count> <dim>'")
        try:
            _, dim = int(header[0]), int(header[1])
        except ValueError:
            raise MalformedLine(path, 1, "header must hold two integers") from None
        for lineno, line in enumerate(fh, start=2):
            if len(words) == n:
                break
            tokens = line.rstrip("\r\n").rstrip(" ").split(" ")
            if tokens == [""]:
                continue
            if len(tokens) != dim + 1:
                raise MalformedLine(path, lineno, f"expected {dim + 1} fields, got {len(tokens)}")
            word = tokens[0]
            try:
                vec = np.array([float(t) for t in tokens[1:]])
            except ValueError:
                raise MalformedLine(path, lineno, "non-numeric vector entry") from None
            if word in seen:
                warnings.warn(f"{path}:{lineno}: duplicate word {word!r}, keeping first", DuplicateWord, stacklevel=2)
                continue
            norm = np.linalg.norm(vec)
            if norm == 0:
                raise ZeroVector(f"{path}:{lineno}: zero vector for {word!r}")
            seen.add(word)
            words.append(word)
            vecs.append(vec / norm)
    if len(words) < n:
        raise VocabularyTooSmall(f"{path} holds {len(words)} words, {n} requested")
    return PointCloud(np.vstack(vecs), words)


def load_dictionary(path, src_labels, tgt_labels) -> BilingualDictionary:
    """Read ``src tgt`` pairs, keep those inside both vocabularies, drop repeats."""
    src_index = {w: i for i, w in enumerate(src_labels)}
    tgt_index = {w: j for j, w in enumerate(tgt_labels)}
    pairs, seen = [], set()
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            tokens = line.split()
            if not tokens:
                continue
            if len(tokens) != 2:
                raise MalformedLine(path, lineno, f"expected 2 fields, got {len(tokens)}")
            s, t = tokens
            if s not in src_index or t not in tgt_index:
                continue
            pair = (src_index[s], tgt_index[t])
            if pair not in seen:
                seen.add(pair)
                pairs.append(pair)
    return BilingualDictionary(pairs)


def file_digest(path) -> str:
    h = hashlib.sha256()
    with open(Path(path), "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()
