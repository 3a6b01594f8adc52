"""Command-line interface: ``accsinkhorn {solve,compare,color-transfer,word-align,replay}``.

Exit codes: 0 on success, 2 when some solve did not reach its tolerance,
1 on usage or I/O errors.  Every command writes a ``manifest.json`` that
``replay`` can re-run; files are written with a ``.partial`` suffix and
renamed once the command finishes.  Wall-clock times are kept out of the
trace files (they go to ``timing.csv``) so replays are byte-identical.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import os
import sys
from datetime import datetime, timezone
from importlib import metadata
from pathlib import Path

import numpy as np

from . import data, pipelines
from .diag import LyapunovMonitor, reference_solve
from .otcore import rescale_problem
from .solvers import SOLVERS, run_solver

OUT_ENV = "ACCSINKHORN_OUT"
DEFAULT_OUT = "runs"
EXIT_OK, EXIT_ERROR, EXIT_NOT_CONVERGED = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # argparse exits with 2 on bad usage; 2 is reserved for non-convergence here
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_ERROR, f"{self.prog}: error: {message}\n")


def _version() -> str:
    try:
        return metadata.version("artifact")
    except metadata.PackageNotFoundError:
        return "unknown"


def _now() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


def _digest_bytes(b: bytes) -> str:
    return hashlib.sha256(b).hexdigest()


class Outputs:
    """Stage files as ``name.partial`` and rename them together on :meth:`commit`."""

    def __init__(self, root):
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)
        self.staged: list[str] = []
        self.digests: dict[str, str] = {}

    def _stage(self, name):
        self.staged.append(name)
        return self.root / (name + ".partial")

    def text(self, name, text, deterministic=True):
        raw = text.encode("utf-8")
        self._stage(name).write_bytes(raw)
        if deterministic:
            self.digests[name] = _digest_bytes(raw)

    def json(self, name, obj, deterministic=True):
        self.text(name, json.dumps(obj, indent=2, sort_keys=True) + "\n", deterministic)

    def image(self, name, rgb):
        buf = io.BytesIO()
        data.save_image(buf, rgb)
        raw = buf.getvalue()
        self._stage(name).write_bytes(raw)
        self.digests[name] = _digest_bytes(raw)

    def commit(self):
        for name in self.staged:
            os.replace(self.root / (name + ".partial"), self.root / name)


def _rows_to_csv(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow(["" if x is None else (repr(x) if isinstance(x, float) else x) for x in r])
    return buf.getvalue()


def _resolve_tol(value, n, alignment=False) -> float:
    if value == "auto":
        return pipelines.alignment_tolerance(n) if alignment else pipelines.transfer_tolerance(n)
    try:
        tol = float(value)
    except ValueError:
        raise UsageError(f"--tol-l1 must be a positive number or 'auto', got {value!r}") from None
    if not tol > 0:
        raise UsageError("--tol-l1 must be positive")
    return tol


def _eps_grid(text) -> list[float]:
    try:
        grid = [float(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise UsageError(f"bad --eps-grid {text!r}") from None
    if not grid or any(not e > 0 for e in grid):
        raise UsageError("--eps-grid needs positive values")
    return grid


def _load_instance(cfg, inputs):
    if cfg.get("synthetic"):
        spec = data.parse_synthetic_spec(cfg["synthetic"])
        eps = cfg["eps"] if cfg["eps"] is not None else 1.0
        return data.synthetic_instance(spec["n"], spec["m"], spec["seed"], eps), spec["seed"]
    path = cfg["instance"]
    inputs[path] = data.file_digest(path)
    return data.read_instance_csv(path, cfg["eps"]), None


def _solver_kwargs(cfg) -> dict:
    return {"mu0": cfg["mu0"], "m0": cfg["m0"], "rescale_w": not cfg["literal_w"]}


# --- commands -----------------------------------------------------------------


def cmd_solve(cfg, out: Outputs, inputs: dict) -> tuple[int, dict]:
    p, seed = _load_instance(cfg, inputs)
    q = rescale_problem(p)
    tol = _resolve_tol(cfg["tol_l1"], p.n)
    monitor = LyapunovMonitor(q, reference_solve(q)) if cfg["diagnostics"] else None
    res = run_solver(q, cfg["solver"], tol, cfg["max_iters"], trace_stride=cfg["trace_stride"], monitor=monitor, **_solver_kwargs(cfg))
    out.text("trace.csv", res.trace.to_csv(include_time=False))
    out.text("timing.csv", _rows_to_csv(["iter", "wall_time"], [(r["iter"], r["wall_time"]) for r in res.trace]), deterministic=False)
    result = {
        "solver": cfg["solver"],
        "epsilon": p.epsilon,
        "tol_l1": tol,
        "n": p.n,
        "m": p.m,
        **res.summary(),
        "u": res.potentials.u.tolist(),
        "v": res.potentials.v.tolist(),
    }
    if monitor is not None:
        result["stability_holding_fraction"] = monitor.holding_fraction()
    out.json("result.json", result)
    return (EXIT_OK if res.converged else EXIT_NOT_CONVERGED), {"seed": seed}


COMPARE_FIELDS = ("solver", "iter", "sinkhorn_equiv_iter", "violation_l1", "f_value", "mu", "alpha")


def speedup_ratio(sinkhorn_iters: int, acc_iters: int) -> float:
    """Sinkhorn iterations per accelerated inner step; 1.0 when both start converged."""
    if sinkhorn_iters == 0 and acc_iters == 0:
        return 1.0
    if acc_iters == 0:
        return float("inf")
    return sinkhorn_iters / acc_iters


def cmd_compare(cfg, out: Outputs, inputs: dict) -> tuple[int, dict]:
    p, seed = _load_instance(cfg, inputs)
    q = rescale_problem(p)
    tol = _resolve_tol(cfg["tol_l1"], p.n)
    rows, timing, summary = [], [], {"epsilon": p.epsilon, "tol_l1": tol, "n": p.n, "m": p.m}
    for solver in ("sinkhorn", "acc-homotopy"):
        res = run_solver(q, solver, tol, cfg["max_iters"], trace_stride=cfg["trace_stride"], **_solver_kwargs(cfg))
        for r in res.trace:
            # one accelerated inner step costs one Sinkhorn map evaluation
            rows.append((solver, r["iter"], r["iter"], r["violation_l1"], r["f_value"], r["mu"], r["alpha"]))
            timing.append((solver, r["iter"], r["wall_time"]))
        summary[solver] = res.summary()
    s_it, a_it = summary["sinkhorn"]["iterations"], summary["acc-homotopy"]["iterations"]
    summary["speedup"] = speedup_ratio(s_it, a_it)
    # a capped Sinkhorn run only bounds the ratio from below
    summary["speedup_is_lower_bound"] = not summary["sinkhorn"]["converged"]
    out.text("trace.csv", _rows_to_csv(COMPARE_FIELDS, rows))
    out.text("timing.csv", _rows_to_csv(["solver", "iter", "wall_time"], timing), deterministic=False)
    out.json("summary.json", summary)
    ok = summary["sinkhorn"]["converged"] and summary["acc-homotopy"]["converged"]
    return (EXIT_OK if ok else EXIT_NOT_CONVERGED), {"seed": seed}


def _check_file(path):
    if not Path(path).is_file():
        raise FileNotFoundError(f"no such file: {path}")


def _eps_tag(eps) -> str:
    return f"{eps:g}"


def cmd_color_transfer(cfg, out: Outputs, inputs: dict) -> tuple[int, dict]:
    for key in ("source", "target"):
        _check_file(cfg[key])
        inputs[cfg[key]] = data.file_digest(cfg[key])
    src_img, tgt_img = data.load_image(cfg["source"]), data.load_image(cfg["target"])
    n = cfg["samples"]
    tol = _resolve_tol(cfg["tol_l1"], n)
    cells, stats, status = [], [], EXIT_OK
    for eps in _eps_grid(cfg["eps_grid"]):
        for solver in cfg["solvers"]:
            r = pipelines.run_color_transfer(src_img, tgt_img, eps, solver, cfg["seed"], tol, n, cfg["max_iters"])
            s = r.solver_stats
            out.image(f"transfer_eps{_eps_tag(eps)}_{solver}.png", r.full_image)
            cells.append((eps, solver, s["iterations"], s["converged"], s["final_violation"]))
            stats.append((eps, solver, s["iterations"], s["seconds"], s["converged"]))
            if not s["converged"]:
                status = EXIT_NOT_CONVERGED
    out.text("cells.csv", _rows_to_csv(["epsilon", "solver", "iterations", "converged", "final_violation"], cells))
    out.text("stats.csv", _rows_to_csv(["epsilon", "solver", "iterations", "seconds", "converged"], stats), deterministic=False)
    return status, {"seed": cfg["seed"]}


def _alignment_inputs(cfg, inputs):
    if cfg.get("synthetic_rotation"):
        spec = dict(kv.split("=", 1) for kv in cfg["synthetic_rotation"].split(","))
        try:
            n, d, seed = int(spec["n"]), int(spec["d"]), int(spec["seed"])
        except (KeyError, ValueError):
            raise UsageError("--synthetic-rotation expects n=<int>,d=<int>,seed=<int>") from None
        src, tgt, dictionary = pipelines.rotation_fixture(n, d, seed)
        return src, tgt, dictionary, seed
    for key in ("source_vectors", "target_vectors", "dictionary"):
        if not cfg.get(key):
            raise UsageError(f"--{key.replace('_', '-')} is required without --synthetic-rotation")
        _check_file(cfg[key])
        inputs[cfg[key]] = data.file_digest(cfg[key])
    src = data.load_word_vectors(cfg["source_vectors"], cfg["words"])
    tgt = data.load_word_vectors(cfg["target_vectors"], cfg["words"])
    dictionary = data.load_dictionary(cfg["dictionary"], src.labels, tgt.labels)
    return src, tgt, dictionary, None


def cmd_word_align(cfg, out: Outputs, inputs: dict) -> tuple[int, dict]:
    src, tgt, dictionary, seed = _alignment_inputs(cfg, inputs)
    tol = _resolve_tol(cfg["tol_l1"], len(src), alignment=True)
    cells, stats, reports, status = [], [], [], EXIT_OK
    for eps in _eps_grid(cfg["eps_grid"]):
        for solver in cfg["solvers"]:
            r = pipelines.run_word_alignment(src, tgt, dictionary, eps, solver, tol, cfg["normalization"], cfg["max_iters"])
            s = r.solver_stats
            cells.append((eps, solver, s["iterations"], s["converged"], s["final_violation"], r.top1, r.top5))
            stats.append((eps, solver, s["iterations"], s["seconds"], r.top1, r.top5, s["converged"]))
            rep = r.as_dict()
            rep["solver_stats"] = {k: v for k, v in s.items() if k != "seconds"}
            reports.append(rep)
            if not s["converged"]:
                status = EXIT_NOT_CONVERGED
    out.text("cells.csv", _rows_to_csv(["epsilon", "solver", "iterations", "converged", "final_violation", "top1", "top5"], cells))
    out.text("stats.csv", _rows_to_csv(["epsilon", "solver", "iterations", "seconds", "top1", "top5", "converged"], stats), deterministic=False)
    out.json("report.json", reports)
    return status, {"seed": seed}


COMMANDS = {
    "solve": cmd_solve,
    "compare": cmd_compare,
    "color-transfer": cmd_color_transfer,
    "word-align": cmd_word_align,
}


def execute(command: str, cfg: dict, out_dir) -> int:
    """Run ``command`` with a resolved config and write outputs plus manifest to ``out_dir``."""
    out = Outputs(out_dir)
    inputs: dict[str, str] = {}
    started = _now()
    code, info = COMMANDS[command](cfg, out, inputs)
    manifest = {
        "command": command,
        "config": cfg,
        "seed": info.get("seed"),
        "version": _version(),
        "inputs": inputs,
        "outputs": dict(out.digests),
        "started_at": started,
        "finished_at": _now(),
    }
    out.json("manifest.json", manifest, deterministic=False)
    out.commit()
    return code


def cmd_replay(manifest_path, out_dir) -> int:
    """Re-run a manifest into ``out_dir`` and compare deterministic outputs byte for byte."""
    manifest = json.loads(Path(manifest_path).read_text(encoding="utf-8"))
    for path, digest in manifest["inputs"].items():
        if data.file_digest(path) != digest:
            print(f"input changed since the original run: {path}", file=sys.stderr)
            return EXIT_ERROR
    code = execute(manifest["command"], manifest["config"], out_dir)
    fresh = json.loads((Path(out_dir) / "manifest.json").read_text(encoding="utf-8"))["outputs"]
    bad = sorted(k for k in manifest["outputs"] if fresh.get(k) != manifest["outputs"][k])
    for name in bad:
        print(f"replay mismatch: {name}", file=sys.stderr)
    if bad:
        return EXIT_ERROR
    print(f"replay identical: {len(manifest['outputs'])} files")
    return code


# --- argument parsing ---------------------------------------------------------


def _add_solver_knobs(sp, solver_choice=True):
    if solver_choice:
        sp.add_argument("--solver", choices=SOLVERS, default="acc-homotopy")
    sp.add_argument("--tol-l1", default="auto", help="l1 marginal tolerance, or 'auto'")
    sp.add_argument("--max-iters", type=int, default=100_000, help="cap on Sinkhorn iterations / inner steps")
    sp.add_argument("--mu0", type=float, default=0.05)
    sp.add_argument("--m0", type=int, default=4)
    sp.add_argument("--literal-w", action="store_true", help="carry w unchanged across homotopy stages")
    sp.add_argument("--out", default=None, help=f"output directory (default ${OUT_ENV} or ./{DEFAULT_OUT})")


def _add_instance(sp):
    g = sp.add_mutually_exclusive_group(required=True)
    g.add_argument("--instance", help="instance CSV dump")
    g.add_argument("--synthetic", help="n=<int>,m=<int>,seed=<int>")
    sp.add_argument("--eps", type=float, default=None, help="entropic parameter (overrides the CSV value)")
    sp.add_argument("--trace-stride", type=int, default=1)


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="accsinkhorn", description="Entropic OT solvers, diagnostics and experiments.")
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)

    sp = sub.add_parser("solve", help="solve one instance")
    _add_instance(sp)
    _add_solver_knobs(sp)
    sp.add_argument("--diagnostics", action="store_true", help="record energy and stability fields")

    sp = sub.add_parser("compare", help="Sinkhorn vs acc-homotopy on one instance")
    _add_instance(sp)
    _add_solver_knobs(sp, solver_choice=False)

    grid = ",".join(f"{e:g}" for e in pipelines.EPS_GRID)
    sp = sub.add_parser("color-transfer", help="color transfer over an epsilon grid")
    sp.add_argument("--source", required=True)
    sp.add_argument("--target", required=True)
    sp.add_argument("--samples", type=int, default=pipelines.TRANSFER_SAMPLES)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--eps-grid", default=grid)
    sp.add_argument("--solvers", nargs="+", choices=SOLVERS, default=["sinkhorn", "acc-homotopy"])
    _add_solver_knobs(sp, solver_choice=False)

    sp = sub.add_parser("word-align", help="word alignment over an epsilon grid")
    sp.add_argument("--source-vectors")
    sp.add_argument("--target-vectors")
    sp.add_argument("--dictionary")
    sp.add_argument("--synthetic-rotation", help="n=<int>,d=<int>,seed=<int> rotated-copy fixture")
    sp.add_argument("--words", type=int, default=pipelines.ALIGNMENT_WORDS)
    sp.add_argument("--normalization", choices=("minmax", "half"), default="minmax")
    sp.add_argument("--eps-grid", default=grid)
    sp.add_argument("--solvers", nargs="+", choices=SOLVERS, default=["sinkhorn", "acc-homotopy"])
    _add_solver_knobs(sp, solver_choice=False)

    sp = sub.add_parser("replay", help="re-run a manifest and compare outputs")
    sp.add_argument("manifest")
    sp.add_argument("--out", default=None)
    return ap


def _config_from_args(args) -> dict:
    cfg = {k: v for k, v in vars(args).items() if k not in ("command", "out")}
    # literal float/int types only, so the manifest is plain JSON
    return json.loads(json.dumps(cfg))


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    out_dir = args.out or os.environ.get(OUT_ENV) or DEFAULT_OUT
    try:
        if args.command == "replay":
            return cmd_replay(args.manifest, out_dir)
        return execute(args.command, _config_from_args(args), out_dir)
    except UsageError as e:
        print(f"accsinkhorn: error: {e}", file=sys.stderr)
        return EXIT_ERROR
    except (OSError, ValueError) as e:
        print(f"accsinkhorn: {type(e).__name__}: {e}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
