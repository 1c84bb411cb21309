"""Command line front end.

    finsler-quartic <command> --patch <file|catalog-name> [options]

Commands: eval, geodesic, distance, check-reversible, check-flat,
check-weightable, triangle, catalog. Reports are written as JSON (and paths
as CSV) into ``--out``; the exit status is 0 iff every check passed, 1 if a
check failed and 2 on an error, which is reported as JSON on stdout.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import tempfile
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .config import CATALOG, load_patch
from .flatness import flatness_report
from .geodesics import _el_residual_batch, integrate_geodesic, trace_reversibility_defect
from .metric import (
    DirectionPoint,
    F_beta,
    F_reverse,
    F_value,
    alpha,
    beta,
    check_strong_convexity,
    fundamental_tensor,
)
from .one_forms import closedness_report, exterior_derivative_batch
from .quasimetric import (
    distance,
    distance_oracle_grid,
    quasi_axioms_report,
    triangle_orientation_report,
    weightability_report,
)
from .reports import CheckReport, to_jsonable

__all__ = ["RunManifest", "run_command", "main", "COMMANDS"]

COMMANDS = (
    "eval",
    "geodesic",
    "distance",
    "check-reversible",
    "check-flat",
    "check-weightable",
    "triangle",
    "catalog",
)


@dataclass
class RunManifest:
    command: str
    patch: str | None = None
    seed: int = 0
    tolerances: dict = field(default_factory=dict)
    output: str | None = None
    steps: int | None = None
    grid: int | None = None
    x: list | None = None
    y: list | None = None
    t_end: float = 1.0
    samples: int | None = None


def _dumps(obj) -> str:
    return json.dumps(to_jsonable(obj), indent=2, sort_keys=True) + "\n"


def _inner_points(patch, rng, count):
    lo, hi = patch.lower, patch.upper
    c, r = 0.5 * (lo + hi), 0.25 * (hi - lo)
    return c + rng.uniform(-1.0, 1.0, size=(count, patch.n)) * r


def _directions(rng, count, n):
    v = rng.normal(size=(count, n))
    return v / np.linalg.norm(v, axis=1, keepdims=True)


def _need_point(m: RunManifest, which: str):
    v = getattr(m, which)
    if v is None:
        raise ValueError(f"--{which} is required for {m.command}")
    return np.asarray(v, dtype=float)


def _combine(name, reports, extra=None):
    passed = all(r.passed for r in reports)
    worst = max((r.max_residual / r.threshold if r.threshold else r.max_residual) for r in reports)
    return {
        "name": name,
        "pass": passed,
        "max_relative_residual": worst,
        "reports": [r.to_dict() for r in reports],
        **(extra or {}),
    }


def run_command(m: RunManifest):
    """Execute one manifest. Returns ``(exit_status, artifacts)``.

    ``artifacts`` maps output file names to their text content; nothing is
    written here, which keeps the function pure and testable.
    """
    if m.command not in COMMANDS:
        raise ValueError(f"unknown command {m.command!r}")
    if m.command == "catalog":
        body = {
            name: {"dim": c.dim, "domain": c.domain, "a": c.a, "b": c.b}
            for name, c in CATALOG.items()
        }
        return 0, {"catalog.json": _dumps(body)}
    if m.patch is None:
        raise ValueError("--patch is required")
    patch = load_patch(m.patch)
    rng = np.random.default_rng(m.seed)
    tol = m.tolerances

    if m.command == "eval":
        dp = DirectionPoint(_need_point(m, "x"), _need_point(m, "y"))
        body = {
            "patch": patch.name,
            "x": dp.x,
            "y": dp.y,
            "alpha": alpha(patch, dp),
            "beta": beta(patch, dp),
            "F": F_value(patch, dp),
            "F_reverse": F_reverse(patch, dp),
            "F_beta": F_beta(patch, dp),
            "g": fundamental_tensor(patch, dp).g,
            "strongly_convex": check_strong_convexity(patch, dp, tol.get("tol", 0.0)),
        }
        return 0, {"eval.json": _dumps(body)}

    if m.command == "geodesic":
        x0, y0 = _need_point(m, "x"), _need_point(m, "y")
        path = integrate_geodesic(patch, x0, y0, m.t_end, m.steps)
        body = {
            "patch": patch.name,
            "endpoint": path.endpoint,
            "nodes": len(path),
            "step": path.step,
            "speed_drift": path.speed_drift(),
            "truncated": path.truncated,
        }
        return 0, {"geodesic.json": _dumps(body), "geodesic.csv": path.to_csv()}

    if m.command == "distance":
        x, y = _need_point(m, "x"), _need_point(m, "y")
        res = distance(patch, x, y)
        body = {
            "patch": patch.name,
            "x": x,
            "y": y,
            "value": res.value,
            "method": res.method,
            "converged": res.converged,
            "polyline_value": res.polyline_value,
        }
        if m.grid:
            body["grid_oracle"] = distance_oracle_grid(patch, x, y, m.grid)
        return (0 if res.converged else 1), {
            "distance.json": _dumps(body),
            "distance_path.csv": res.path.to_csv(),
        }

    if m.command == "check-reversible":
        closed = closedness_report(patch, m.grid or 9)
        k = m.samples or 4
        X = _inner_points(patch, rng, max(k, 20))
        Y = _directions(rng, len(X), patch.n)
        el = _el_residual_batch(patch, X, Y)
        cf = np.array([F_beta(patch, DirectionPoint(x, y)) for x, y in zip(X, Y)])[:, None] * np.einsum(
            "bij,bj->bi", exterior_derivative_batch(patch, X), Y
        )
        steps = m.steps or 1024
        t_end = m.t_end if m.t_end != 1.0 else 2.0
        trace = trace_reversibility_defect(
            patch,
            list(zip(X[:k], Y[:k])),
            t_end,
            steps,
            threshold=tol.get("tol", 1e-4),
        )
        body = _combine(
            f"check-reversible[{patch.name}]",
            [closed, trace],
            {
                "max_omega": closed.max_residual,
                "closed_form_max": float(np.abs(cf).max()),
                "reverse_flow_residual_max": float(np.abs(el).max()),
                "criteria_consistent": closed.passed == trace.passed,
            },
        )
        return (0 if body["pass"] else 1), {"check-reversible.json": _dumps(body)}

    if m.command == "check-flat":
        k = m.samples or 50
        X = _inner_points(patch, rng, k)
        Y = _directions(rng, k, patch.n)
        rep = flatness_report(patch, list(zip(X, Y)), threshold=tol.get("tol", 1e-8))
        return (0 if rep.passed else 1), {"check-flat.json": rep.to_json() + "\n"}

    if m.command == "check-weightable":
        k = m.samples or 10
        P = _inner_points(patch, rng, 3 * k)
        triples = [tuple(P[3 * i : 3 * i + 3]) for i in range(min(k, 5))]
        axioms = quasi_axioms_report(patch, triples)
        pairs = [(P[2 * i], P[2 * i + 1]) for i in range(k)]
        weights = weightability_report(patch, patch.center, pairs, threshold=tol.get("tol", 1e-4))
        body = _combine(f"check-weightable[{patch.name}]", [axioms, weights])
        return (0 if body["pass"] else 1), {"check-weightable.json": _dumps(body)}

    if m.command == "triangle":
        k = m.samples or 5
        P = _inner_points(patch, rng, 3 * k)
        triples = [tuple(P[3 * i : 3 * i + 3]) for i in range(k)]
        rep = triangle_orientation_report(patch, triples, threshold=tol.get("tol", 1e-4))
        return (0 if rep.passed else 1), {"triangle.json": rep.to_json() + "\n"}

    raise AssertionError(m.command)


def _atomic_write(path: Path, text: str):
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _floats(text: str) -> list:
    try:
        return [float(v) for v in text.split(",")]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="finsler-quartic", description=__doc__.split("\n\n")[0])
    ap.add_argument("command", choices=COMMANDS)
    ap.add_argument("--patch", help="patch file or catalog name")
    ap.add_argument("--out", default=".", help="output directory (default: current)")
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--steps", type=int)
    ap.add_argument("--grid", type=int)
    ap.add_argument("--tol", type=float)
    ap.add_argument("--json", action="store_true", help="also print the main report to stdout")
    ap.add_argument("--x", type=_floats, help="point, e.g. 0,0")
    ap.add_argument("--y", type=_floats, help="direction (eval/geodesic) or end point (distance)")
    ap.add_argument("--t-end", type=float, default=1.0)
    ap.add_argument("--samples", type=int)
    return ap


def _error_json(exc: BaseException) -> str:
    body = {"error": type(exc).__name__, "message": str(exc)}
    for attr in ("line", "offset"):
        if getattr(exc, attr, None) is not None:
            body[attr] = getattr(exc, attr)
    return _dumps(body)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    manifest = RunManifest(
        command=args.command,
        patch=args.patch,
        seed=args.seed,
        tolerances={} if args.tol is None else {"tol": args.tol},
        output=args.out,
        steps=args.steps,
        grid=args.grid,
        x=args.x,
        y=args.y,
        t_end=args.t_end,
        samples=args.samples,
    )
    try:
        status, artifacts = run_command(manifest)
        for name, text in artifacts.items():
            _atomic_write(Path(args.out) / name, text)
    except Exception as exc:  # every failure becomes structured output
        sys.stdout.write(_error_json(exc))
        return 2
    main_name = next(iter(artifacts))
    if args.json:
        sys.stdout.write(artifacts[main_name])
    else:
        body = json.loads(artifacts[main_name]) if main_name.endswith(".json") else {}
        flag = {0: "PASS", 1: "FAIL"}[status]
        print(f"{flag} {args.command} -> {Path(args.out) / main_name}")
        for r in body.get("reports", [body] if "max_residual" in body else []):
            print(CheckReport.from_dict(r).summary())
    return status


if __name__ == "__main__":
    sys.exit(main())
