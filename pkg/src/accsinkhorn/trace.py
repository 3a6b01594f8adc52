"""Per-iteration solver records and their CSV / JSON-lines export."""

from __future__ import annotations

import csv
import io
import json
import math

import numpy as np

FIELDS = (
    "iter",
    "wall_time",
    "violation_l1",
    "grad_l1",
    "f_value",
    "mu",
    "alpha",
    "energy",
    "c1_lhs",
    "c1_rhs",
    "c2_lhs",
    "c2_rhs",
    "metric_drift",
    "radius_x",
    "radius_y",
    "sup_norm",
)

TIME_FIELDS = ("wall_time",)


def _fmt(x):
    if x is None:
        return ""
    if isinstance(x, (bool, np.bool_)):
        return str(bool(x)).lower()
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return repr(float(x))


class SolverTrace:
    """Ordered list of iteration records with a fixed schema.

    Each record is a dict keyed by :data:`FIELDS`; optional diagnostics that
    were not computed are stored as ``None`` and exported as empty cells.
    """

    def __init__(self, records=None, meta=None):
        self.records = list(records or [])
        self.meta = dict(meta or {})

    def __len__(self):
        return len(self.records)

    def __iter__(self):
        return iter(self.records)

    def __getitem__(self, i):
        return self.records[i]

    def append(self, **fields):
        unknown = set(fields) - set(FIELDS)
        if unknown:
            raise KeyError(f"unknown trace fields: {sorted(unknown)}")
        rec = {k: fields.get(k) for k in FIELDS}
        if self.records and rec["iter"] <= self.records[-1]["iter"]:
            raise ValueError("trace iterations must be strictly increasing")
        self.records.append(rec)
        return rec

    def column(self, name) -> np.ndarray:
        return np.array(
            [np.nan if r[name] is None else r[name] for r in self.records], dtype=np.float64
        )

    def validate(self):
        """Check ordering and finiteness of every recorded scalar."""
        prev_it, prev_t = -1, -math.inf
        for r in self.records:
            if r["iter"] <= prev_it:
                raise ValueError(f"iter not increasing at {r['iter']}")
            t = r["wall_time"]
            if t is not None:
                if t < prev_t:
                    raise ValueError(f"wall_time decreased at iter {r['iter']}")
                prev_t = t
            prev_it = r["iter"]
            for k, x in r.items():
                if x is not None and not math.isfinite(x):
                    raise ValueError(f"non-finite {k} at iter {r['iter']}")

    def fields(self, include_time=True):
        return [f for f in FIELDS if include_time or f not in TIME_FIELDS]

    def to_csv(self, path=None, include_time=True) -> str:
        cols = self.fields(include_time)
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(cols)
        for r in self.records:
            w.writerow([_fmt(r[c]) for c in cols])
        text = buf.getvalue()
        if path is not None:
            with open(path, "w", encoding="utf-8", newline="") as fh:
                fh.write(text)
        return text

    def to_jsonl(self, path=None, include_time=True) -> str:
        cols = self.fields(include_time)
        lines = []
        for r in self.records:
            rec = {c: (None if r[c] is None else (int(r[c]) if c == "iter" else float(r[c]))) for c in cols}
            lines.append(json.dumps(rec))
        text = "\n".join(lines) + ("\n" if lines else "")
        if path is not None:
            with open(path, "w", encoding="utf-8") as fh:
                fh.write(text)
        return text

    @classmethod
    def from_csv(cls, path) -> "SolverTrace":
        with open(path, encoding="utf-8", newline="") as fh:
            rows = list(csv.DictReader(fh))
        recs = []
        for row in rows:
            rec = {}
            for k in FIELDS:
                s = row.get(k, "")
                if s == "" or s is None:
                    rec[k] = None
                elif k == "iter":
                    rec[k] = int(s)
                else:
                    rec[k] = float(s)
            recs.append(rec)
        return cls(recs)
