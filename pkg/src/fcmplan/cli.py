"""Command-line front end.

Exit codes: 0 success, 1 the request was understood but cannot be satisfied
(e.g. a tiling violating resource constraints), 2 input file or argument
errors, 3 internal invariant violations.
"""

from __future__ import annotations

import argparse
import datetime as _dt
import json
import sys
from dataclasses import replace
from pathlib import Path
from typing import Optional, Sequence

from .cost_models import (
    ConstraintViolation,
    CostModelError,
    EquationMode,
    Tiling,
    fcm_geometry,
    fcm_gma,
    lbl_geometry,
    lbl_gma,
    redundancy_ratio,
    redundant_macs,
)
from .gpu import GpuSpecError, load_gpu
from .model_ir import ADMISSIBLE_KINDS, ConvLayer, FcmKind, ModelError, ModelGraph, Precision, parse_model
from .oracle_sim import simulate_fcm, simulate_lbl, verify
from .planner import explain, plan
from .roofline import RooflineError, classify
from .tiling_search import DEFAULT_GRID, SearchGrid, best_fcm, best_lbl


class CliError(Exception):
    exit_code = 2

    def __init__(self, message: str, kind: str = "input_error", **extra):
        super().__init__(message)
        self.kind = kind
        self.extra = extra


class Unsatisfiable(CliError):
    exit_code = 1


class InvariantError(CliError):
    exit_code = 3


# ---------------------------------------------------------------------------
# Input helpers


def _load_model(path: str, precision: Optional[str]) -> ModelGraph:
    p = Path(path)
    if not p.is_file():
        raise CliError(f"model file not found: {path}", "file_error")
    try:
        graph = parse_model(p.read_text())
    except ModelError as e:
        raise CliError(f"{path}: {e}", "model_error") from None
    if precision:
        prec = Precision.parse(precision)
        graph = ModelGraph(tuple(replace(l, precision=prec) for l in graph.layers), graph.edges)
    return graph


def _load_grid(path: Optional[str]) -> SearchGrid:
    if not path:
        return DEFAULT_GRID
    p = Path(path)
    if not p.is_file():
        raise CliError(f"grid file not found: {path}", "file_error")
    try:
        return SearchGrid.from_json(json.loads(p.read_text()))
    except (ValueError, TypeError) as e:
        raise CliError(f"{path}: invalid grid: {e}", "grid_error") from None


def _parse_tiling(text: str) -> Tiling:
    try:
        parts = [int(x) for x in text.replace("x", ",").split(",")]
        if len(parts) != 3:
            raise ValueError
        return Tiling(*parts)
    except (ValueError, CostModelError):
        raise CliError(f"tiling must look like H,W,D (positive integers), got {text!r}", "argument_error") from None


def _subject(graph: ModelGraph, args) -> tuple[ConvLayer, Optional[ConvLayer], Optional[FcmKind]]:
    try:
        if args.layer:
            return graph[args.layer], None, None
        if args.pair:
            a, b = graph[args.pair[0]], graph[args.pair[1]]
            if (a.id, b.id) not in set(graph.edges):
                raise CliError(f"{a.id!r} -> {b.id!r} is not an edge of the model", "argument_error")
            kind = FcmKind(args.kind) if getattr(args, "kind", None) else None
            return a, b, kind
    except KeyError as e:
        raise CliError(f"unknown layer id {e.args[0]!r}", "argument_error") from None
    except ValueError:
        raise CliError(f"unknown module kind {args.kind!r}", "argument_error") from None
    raise CliError("give --layer ID or --pair FIRST SECOND", "argument_error")


def _subject_json(first, second, kind) -> dict:
    if second is None:
        return {"layer": first.id, "kind": first.kind.value}
    d = {"pair": [first.id, second.id]}
    if kind is not None:
        d["kind"] = kind.value
    return d


def _gpu(args):
    try:
        return load_gpu(args.gpu)
    except GpuSpecError as e:
        raise CliError(str(e), "gpu_error") from None


def _mode(args) -> EquationMode:
    return EquationMode(args.mode)


# ---------------------------------------------------------------------------
# Commands


def cmd_plan(args) -> tuple[object, list]:
    graph = _load_model(args.model, args.precision)
    gpu = _gpu(args)
    p = plan(graph, gpu, _mode(args), _load_grid(args.grid), args.selection)
    _check_plan(p)
    if args.format == "text":
        return explain(p), p.warnings
    doc = p.to_json(roofline=args.roofline)
    return doc, p.warnings


def _check_plan(p) -> None:
    seen: list[str] = []
    for e in p.entries:
        seen.extend(e.layer_ids)
        if e.geometry is not None and not e.geometry.check(p.gpu).ok:
            raise InvariantError(f"entry {e.layer_ids} violates resource constraints", "invariant_error")
        if e.is_fused and e.savings_bytes <= 0:
            raise InvariantError(f"fused entry {e.layer_ids} does not save traffic", "invariant_error")
    if len(seen) != len(set(seen)):
        raise InvariantError("a layer appears in two plan entries", "invariant_error")


def cmd_estimate(args):
    graph = _load_model(args.model, args.precision)
    gpu = _gpu(args)
    first, second, kind = _subject(graph, args)
    t = _parse_tiling(args.tiling)
    mode = _mode(args)
    try:
        if second is None:
            geom = lbl_geometry(first, t)
            est = lbl_gma(first, t, None, mode)
            red = 0.0
        else:
            if kind is None:
                raise CliError("estimate on a pair needs --kind", "argument_error")
            geom = fcm_geometry(first, second, kind, t)
            est = fcm_gma(first, second, kind, t, None, mode)
            red = redundancy_ratio(first, second, kind, t)
    except CostModelError as e:
        raise CliError(str(e), "argument_error") from None
    report = geom.check(gpu)
    doc = {
        "subject": _subject_json(first, second, kind),
        "tiling": list(t.as_tuple()),
        "mode": mode.value,
        "gma_bytes": est.total_bytes,
        "breakdown": est.breakdown(),
        "redundancy": red,
        "constraints": report.to_json(),
    }
    if not report.ok:
        raise Unsatisfiable(
            "tiling violates resource constraints: " + report.describe(),
            "constraint_violation", constraints=report.to_json(),
        )
    return doc, []


def _result_json(label: str, r) -> dict:
    d = {"kind": label, "feasible": r.feasible, "candidates_evaluated": r.candidates_evaluated}
    if r.feasible:
        d.update(
            tiling=list(r.tiling.as_tuple()),
            gma_bytes=r.total_bytes,
            breakdown=r.estimate.breakdown(),
            redundancy=r.redundancy_ratio,
        )
    else:
        d["reason"] = r.infeasibility_reason()
    return d


def cmd_search(args):
    graph = _load_model(args.model, args.precision)
    gpu = _gpu(args)
    grid = _load_grid(args.grid)
    first, second, kind = _subject(graph, args)
    mode = _mode(args)
    if second is None:
        results = [_result_json("lbl", best_lbl(first, gpu, grid, mode))]
    else:
        kinds = [kind] if kind else list(ADMISSIBLE_KINDS[(first.kind, second.kind)])
        if not kinds:
            raise CliError(f"no fused module covers {first.kind.value} -> {second.kind.value}", "argument_error")
        try:
            results = [_result_json(k.value, best_fcm(first, second, k, gpu, grid, mode)) for k in kinds]
        except CostModelError as e:
            raise CliError(str(e), "argument_error") from None
    warnings = [{"type": "infeasible", "kind": r["kind"], "detail": r["reason"]} for r in results if not r["feasible"]]
    return {"subject": _subject_json(first, second, kind), "results": results}, warnings


def cmd_simulate(args):
    graph = _load_model(args.model, args.precision)
    first, second, kind = _subject(graph, args)
    t = _parse_tiling(args.tiling)
    try:
        if second is None:
            rep = simulate_lbl(first, t)
        else:
            if kind is None:
                raise CliError("simulate on a pair needs --kind", "argument_error")
            rep = simulate_fcm(first, second, kind, t, _mode(args))
    except CostModelError as e:
        raise CliError(str(e), "argument_error") from None
    return {"subject": _subject_json(first, second, kind), "tiling": list(t.as_tuple()), "report": rep.to_json()}, []


def cmd_verify(args):
    graph = _load_model(args.model, args.precision)
    first, second, kind = _subject(graph, args)
    gpu = _gpu(args) if args.gpu else None
    if second is not None and kind is None:
        raise CliError("verify on a pair needs --kind", "argument_error")
    subject = first if second is None else (first, second, kind)
    try:
        table = verify(subject, gpu, args.sweep, _mode(args))
    except CostModelError as e:
        raise CliError(str(e), "argument_error") from None
    warnings = []
    if not table.rows:
        warnings.append({"type": "empty_sweep", "detail": "no tiling on the grid passed the filters"})
    uneven = [r for r in table.rows if not r.even_division and r.abs_dev]
    if uneven:
        warnings.append({
            "type": "non_dividing_deviation",
            "rows": len(uneven),
            "max_abs_dev": max(r.abs_dev for r in uneven),
        })
    if args.format == "json":
        doc = {
            "subject": _subject_json(first, second, kind),
            "rows": [
                {"tiling": r.tiling.label(), "analytic_bytes": r.analytic_bytes, "sim_bytes": r.sim_bytes,
                 "abs_dev": r.abs_dev, "rel_dev": r.rel_dev, "even_division": r.even_division}
                for r in table.rows
            ],
            "max_even_deviation": table.max_even_deviation,
        }
        return doc, warnings
    return table.to_csv(), warnings


def cmd_classify(args):
    gpu = _gpu(args)
    if not gpu.has_roofline:
        raise CliError(f"GPU {gpu.name!r} has no roofline peaks", "gpu_error")
    if args.macs is not None or args.bytes is not None:
        if args.macs is None or args.bytes is None:
            raise CliError("--macs and --bytes go together", "argument_error")
        try:
            b = classify(args.macs, args.bytes, gpu)
        except RooflineError as e:
            raise CliError(str(e), "argument_error") from None
        kernels = [{"layers": [], "mode": "custom", "macs": args.macs, "gma_bytes": args.bytes, "roofline": b.to_json()}]
        return {"gpu": gpu.name, "kernels": kernels}, []
    if not args.model:
        raise CliError("classify needs a model file or --macs/--bytes", "argument_error")
    graph = _load_model(args.model, args.precision)
    mode = _mode(args)
    grid = _load_grid(args.grid)
    p = plan(graph, gpu, mode, grid, args.selection)
    kernels = []
    for lid in graph.topological_order:
        r = p.lbl_results[lid]
        if r.feasible:
            layer = graph[lid]
            kernels.append({"layers": [lid], "mode": "lbl", "macs": layer.macs, "gma_bytes": r.total_bytes,
                            "roofline": classify(layer.macs, r.total_bytes, gpu).to_json()})
    for ev in p.evaluations:
        first, second = graph[ev.candidate.first], graph[ev.candidate.second]
        for k, r in ev.results.items():
            if not r.feasible:
                continue
            macs = first.macs + second.macs + redundant_macs(first, second, k, r.tiling)
            kernels.append({"layers": [first.id, second.id], "mode": k.value, "macs": macs,
                            "gma_bytes": r.total_bytes, "roofline": classify(macs, r.total_bytes, gpu).to_json()})
    return {"gpu": gpu.name, "kernels": kernels}, p.warnings


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="fcmplan", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p, gpu_required=True, model=True):
        if model:
            p.add_argument("model", help="model JSON file")
        p.add_argument("--gpu", required=gpu_required, help="preset name or GPU spec JSON path")
        p.add_argument("--mode", choices=["paper", "consistent"], default="consistent")
        p.add_argument("--precision", choices=["fp32", "int8"], help="override every layer's precision")
        p.add_argument("--out", help="write the report here instead of stdout")
        p.add_argument("--stamp", action="store_true", help="add a generation timestamp")

    def target(p, kind=True):
        g = p.add_mutually_exclusive_group(required=True)
        g.add_argument("--layer", help="layer id")
        g.add_argument("--pair", nargs=2, metavar=("FIRST", "SECOND"), help="adjacent layer ids")
        if kind:
            p.add_argument("--kind", choices=[k.value for k in FcmKind])

    p = sub.add_parser("plan", help="choose fusions and tilings for a model")
    common(p)
    p.add_argument("--grid", help="search grid override JSON")
    p.add_argument("--selection", choices=["dp", "greedy"], default="dp")
    p.add_argument("--roofline", action="store_true", help="annotate entries with roofline classes")
    p.add_argument("--format", choices=["json", "text"], default="json")
    p.set_defaults(func=cmd_plan)

    p = sub.add_parser("estimate", help="analytic GMA of one layer or pair at a given tiling")
    common(p)
    target(p)
    p.add_argument("--tiling", required=True, help="OFM tile H,W,D")
    p.add_argument("--format", choices=["json"], default="json")
    p.set_defaults(func=cmd_estimate)

    p = sub.add_parser("search", help="best tiling for one layer or pair")
    common(p)
    target(p)
    p.add_argument("--grid", help="search grid override JSON")
    p.add_argument("--format", choices=["json"], default="json")
    p.set_defaults(func=cmd_search)

    p = sub.add_parser("simulate", help="count traffic of a tiling by enumeration")
    common(p, gpu_required=False)
    target(p)
    p.add_argument("--tiling", required=True, help="OFM tile H,W,D")
    p.add_argument("--format", choices=["json"], default="json")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("verify", help="sweep tilings comparing analytic and simulated traffic")
    common(p, gpu_required=False)
    target(p)
    p.add_argument("--grid", dest="sweep", choices=["all", "even-only"], default="all")
    p.add_argument("--format", choices=["csv", "json"], default="csv")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("classify", help="roofline classes of planned kernels")
    p.add_argument("model", nargs="?", help="model JSON file")
    common(p, model=False)
    p.add_argument("--macs", type=float)
    p.add_argument("--bytes", type=float)
    p.add_argument("--grid", help="search grid override JSON")
    p.add_argument("--selection", choices=["dp", "greedy"], default="dp")
    p.add_argument("--format", choices=["json"], default="json")
    p.set_defaults(func=cmd_classify)
    return ap


def _emit(text: str, out: Optional[str]) -> None:
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def run(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0) and 2
    try:
        payload, warnings = args.func(args)
    except CliError as e:
        err = {"error": {"type": e.kind, "message": str(e), **e.extra}}
        sys.stderr.write(json.dumps(err, indent=2) + "\n")
        return e.exit_code
    except (ModelError, GpuSpecError, OSError) as e:
        sys.stderr.write(json.dumps({"error": {"type": "input_error", "message": str(e)}}, indent=2) + "\n")
        return 2
    except ConstraintViolation as e:
        err = {"type": "constraint_violation", "message": str(e), "constraints": e.report.to_json()}
        sys.stderr.write(json.dumps({"error": err}, indent=2) + "\n")
        return 1
    except AssertionError as e:
        sys.stderr.write(json.dumps({"error": {"type": "invariant_error", "message": str(e)}}, indent=2) + "\n")
        return 3
    except ValueError as e:
        sys.stderr.write(json.dumps({"error": {"type": "input_error", "message": str(e)}}, indent=2) + "\n")
        return 2

    if isinstance(payload, str):
        if warnings:
            sys.stderr.write(json.dumps({"warnings": warnings}, indent=2) + "\n")
        _emit(payload, args.out)
        return 0
    payload["warnings"] = warnings
    if args.stamp:
        payload["generated_at"] = _dt.datetime.now(_dt.timezone.utc).isoformat()
    _emit(json.dumps(payload, indent=2) + "\n", args.out)
    return 0


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
