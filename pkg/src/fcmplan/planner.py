"""Two-pass fusion planning over a model graph.

Pass one finds the best layer-by-layer tiling of every layer. Pass two
evaluates every fusible pair under each admissible fused-module kind. A
pair is profitable when its best module moves strictly fewer bytes than
its two layers run separately. Overlapping profitable pairs are resolved
by maximizing total savings.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

from .cost_models import EquationMode, GmaEstimate, TileGeometry, Tiling, redundant_macs
from .gpu import GpuSpec
from .model_ir import ConvLayer, FcmKind, FusionCandidate, ModelGraph, fusion_candidates
from .roofline import classify
from .tiling_search import DEFAULT_GRID, SearchGrid, SearchResult, best_fcm, best_lbl


class PlanError(ValueError):
    pass


@dataclass(frozen=True)
class PlanEntry:
    layer_ids: tuple[str, ...]
    kind: Optional[FcmKind]  # None for layer-by-layer
    tiling: Tiling
    estimate: GmaEstimate
    geometry: TileGeometry
    macs: int
    redundancy_ratio: float = 0.0
    savings_bytes: int = 0

    @property
    def is_fused(self) -> bool:
        return self.kind is not None

    @property
    def mode_label(self) -> str:
        return self.kind.value if self.kind else "lbl"


@dataclass(frozen=True)
class CandidateEvaluation:
    candidate: FusionCandidate
    lbl_total: Optional[int]
    results: dict  # FcmKind -> SearchResult
    best_kind: Optional[FcmKind]

    @property
    def best(self) -> Optional[SearchResult]:
        return self.results[self.best_kind] if self.best_kind else None

    @property
    def savings(self) -> Optional[int]:
        if self.best is None or self.lbl_total is None:
            return None
        return self.lbl_total - self.best.total_bytes

    @property
    def profitable(self) -> bool:
        s = self.savings
        return s is not None and s > 0


@dataclass
class FusionPlan:
    entries: list[PlanEntry]
    gpu: GpuSpec
    mode: EquationMode
    precision: str
    lbl_results: dict = field(default_factory=dict)  # layer id -> SearchResult
    evaluations: list = field(default_factory=list)  # CandidateEvaluation
    unplannable: list = field(default_factory=list)
    selection: str = "dp"

    @property
    def total_estimated_bytes(self) -> int:
        return sum(e.estimate.total_bytes for e in self.entries)

    @property
    def lbl_total_bytes(self) -> int:
        return sum(r.total_bytes for r in self.lbl_results.values() if r.feasible)

    @property
    def fused_layer_fraction(self) -> float:
        n = sum(len(e.layer_ids) for e in self.entries) + len(self.unplannable)
        if n == 0:
            return 0.0
        return sum(len(e.layer_ids) for e in self.entries if e.is_fused) / n

    @property
    def warnings(self) -> list[dict]:
        return [
            {"type": "unplannable_layer", "layer": lid, "detail": self.lbl_results[lid].infeasibility_reason()}
            for lid in self.unplannable
        ]

    def to_json(self, roofline: bool = False) -> dict:
        entries = []
        for e in self.entries:
            g = e.geometry
            tiling = {
                "ofm_tile": list(e.tiling.as_tuple()),
                "num_output_tiles": g.num_output_tiles,
                "tile_bytes": dict(g.tile_bytes),
                "comm_buffer_bytes": g.comm_buffer_bytes,
            }
            if e.is_fused:
                tiling["first_weight_tile_filters"] = g.first_weight_tile_filters
                tiling["second_weight_tile_filters"] = g.second_weight_tile_filters
            else:
                tiling["weight_tile_filters"] = g.first_weight_tile_filters
            entry = {
                "layers": list(e.layer_ids),
                "mode": e.mode_label,
                "tiling": tiling,
                "gma_bytes": e.estimate.total_bytes,
                "breakdown": e.estimate.breakdown(),
                "redundancy": e.redundancy_ratio,
                "savings_bytes": e.savings_bytes,
            }
            if roofline and self.gpu.has_roofline:
                b = classify(e.macs, e.estimate.total_bytes, self.gpu)
                entry["roofline"] = b.to_json()
            entries.append(entry)
        return {
            "gpu": self.gpu.name,
            "mode": self.mode.value,
            "precision": self.precision,
            "entries": entries,
            "total_gma_bytes": self.total_estimated_bytes,
            "fused_fraction": self.fused_layer_fraction,
        }


# ---------------------------------------------------------------------------
# Selection of non-overlapping fusions


def select_fusions(order: Sequence[str], pairs: Sequence[tuple[str, str, int]],
                   method: str = "dp") -> list[tuple[str, str]]:
    """Choose non-overlapping ``(first, second)`` pairs maximizing total savings.

    ``pairs`` carry their savings; only pairs with positive savings are
    considered. Each first layer may appear in at most one pair, so the pairs
    form a forest hanging off their second layers. Among equal-savings
    selections the one whose first layers come earliest in ``order`` wins.
    """
    pos = {lid: i for i, lid in enumerate(order)}
    pairs = [p for p in pairs if p[2] > 0]
    if method == "greedy":
        used: set[str] = set()
        chosen = []
        for a, b, _ in sorted(pairs, key=lambda p: pos[p[0]]):
            if a not in used and b not in used:
                used.update((a, b))
                chosen.append((a, b))
        return chosen
    if method != "dp":
        raise ValueError(f"unknown selection method {method!r}")

    children: dict[str, list[tuple[str, int]]] = {}
    has_parent = set()
    for a, b, s in pairs:
        if a in has_parent:
            raise ValueError(f"layer {a!r} is the first layer of two pairs")
        has_parent.add(a)
        children.setdefault(b, []).append((a, s))

    def key(picks):
        return tuple(pos[a] for a, _ in picks)

    def ordered(picks):
        return tuple(sorted(picks, key=lambda p: pos[p[0]]))

    # per node: (value, picks) with the node left free, and the best overall
    free: dict[str, tuple[int, tuple]] = {}
    best: dict[str, tuple[int, tuple]] = {}
    for v in sorted({n for p in pairs for n in p[:2]}, key=pos.get):
        kids = children.get(v, [])
        f_val = sum(best[c][0] for c, _ in kids)
        f_pick = ordered(x for c, _ in kids for x in best[c][1])
        free[v] = (f_val, f_pick)
        top = (f_val, f_pick)
        for c, s in sorted(kids, key=lambda k: pos[k[0]]):
            val = f_val - best[c][0] + free[c][0] + s
            pick = ordered(
                [x for c2, _ in kids if c2 != c for x in best[c2][1]] + list(free[c][1]) + [(c, v)]
            )
            if val > top[0] or (val == top[0] and key(pick) < key(top[1])):
                top = (val, pick)
        best[v] = top

    roots = [n for n in best if n not in has_parent]
    chosen = [p for r in roots for p in best[r][1]]
    return sorted(chosen, key=lambda p: pos[p[0]])


# ---------------------------------------------------------------------------


def evaluate_candidate(graph: ModelGraph, cand: FusionCandidate, gpu: GpuSpec, lbl: dict,
                       grid: SearchGrid, mode: EquationMode) -> CandidateEvaluation:
    first, second = graph[cand.first], graph[cand.second]
    results = {k: best_fcm(first, second, k, gpu, grid, mode) for k in cand.admissible_kinds}
    best_kind = None
    for k in cand.admissible_kinds:  # declared order puts PWDW before PWDW_R
        r = results[k]
        if r.feasible and (best_kind is None or r.total_bytes < results[best_kind].total_bytes):
            best_kind = k
    l1, l2 = lbl[cand.first], lbl[cand.second]
    lbl_total = l1.total_bytes + l2.total_bytes if (l1.feasible and l2.feasible) else None
    return CandidateEvaluation(cand, lbl_total, results, best_kind)


def plan(graph: ModelGraph, gpu: GpuSpec, mode: EquationMode = EquationMode.CONSISTENT,
         grid: SearchGrid = DEFAULT_GRID, selection: str = "dp") -> FusionPlan:
    if len(graph) == 0:
        raise PlanError("model has no layers")
    order = graph.topological_order
    lbl = {lid: best_lbl(graph[lid], gpu, grid, mode) for lid in order}
    evaluations = [evaluate_candidate(graph, c, gpu, lbl, grid, mode) for c in fusion_candidates(graph)]

    pairs = [(ev.candidate.first, ev.candidate.second, ev.savings) for ev in evaluations if ev.profitable]
    chosen = set(select_fusions(order, pairs, selection))
    by_pair = {(ev.candidate.first, ev.candidate.second): ev for ev in evaluations}

    entries: list[PlanEntry] = []
    unplannable: list[str] = []
    covered: set[str] = set()
    firsts = {a: (a, b) for a, b in chosen}
    for lid in order:
        if lid in covered:
            continue
        if lid in firsts:
            a, b = firsts[lid]
            ev = by_pair[(a, b)]
            r = ev.best
            first, second = graph[a], graph[b]
            entries.append(PlanEntry(
                layer_ids=(a, b), kind=ev.best_kind, tiling=r.tiling, estimate=r.estimate,
                geometry=r.geometry,
                macs=first.macs + second.macs + redundant_macs(first, second, ev.best_kind, r.tiling),
                redundancy_ratio=r.redundancy_ratio, savings_bytes=ev.savings,
            ))
            covered.update((a, b))
            continue
        r = lbl[lid]
        covered.add(lid)
        if not r.feasible:
            unplannable.append(lid)
            continue
        entries.append(PlanEntry(
            layer_ids=(lid,), kind=None, tiling=r.tiling, estimate=r.estimate,
            geometry=r.geometry, macs=graph[lid].macs,
        ))

    precisions = sorted({l.precision.label for l in graph.layers})
    return FusionPlan(
        entries=entries, gpu=gpu, mode=mode,
        precision=precisions[0] if len(precisions) == 1 else "mixed",
        lbl_results=lbl, evaluations=evaluations, unplannable=unplannable, selection=selection,
    )


def explain(p: FusionPlan) -> str:
    """Human-readable rationale for every decision in a plan."""
    lines = [
        f"plan for {p.gpu.name} ({p.mode.value} accounting, {p.selection} selection)",
        f"  layer-by-layer total: {p.lbl_total_bytes} B",
        f"  planned total:        {p.total_estimated_bytes} B",
        f"  fused layers:         {p.fused_layer_fraction:.1%}",
        "",
    ]
    for e in p.entries:
        ids = " + ".join(e.layer_ids)
        if e.is_fused:
            lbl_sum = sum(p.lbl_results[i].total_bytes for i in e.layer_ids)
            lines.append(
                f"[{e.mode_label}] {ids}: tile {e.tiling.label()}, {e.estimate.total_bytes} B "
                f"vs layer-by-layer {lbl_sum} B, saves {e.savings_bytes} B, "
                f"redundant MACs {e.redundancy_ratio:.2%}"
            )
        else:
            lines.append(f"[lbl] {ids}: tile {e.tiling.label()}, {e.estimate.total_bytes} B")
    for lid in p.unplannable:
        lines.append(f"[unplannable] {lid}: {p.lbl_results[lid].infeasibility_reason()}")
    if p.evaluations:
        lines.append("")
        lines.append("fusion candidates:")
    chosen = {e.layer_ids for e in p.entries if e.is_fused}
    for ev in p.evaluations:
        c = ev.candidate
        head = f"  {c.first} -> {c.second}"
        if ev.lbl_total is None:
            lines.append(f"{head}: skipped, a constituent layer has no feasible tiling")
            continue
        status = "fused" if (c.first, c.second) in chosen else (
            "profitable but overlaps a better fusion" if ev.profitable else "rejected")
        lines.append(f"{head}: {status}; layer-by-layer {ev.lbl_total} B")
        for k in c.admissible_kinds:
            r = ev.results[k]
            if not r.feasible:
                lines.append(f"    {k.value}: {r.infeasibility_reason()}")
            else:
                delta = ev.lbl_total - r.total_bytes
                word = "saves" if delta > 0 else "deficit"
                lines.append(
                    f"    {k.value}: {r.total_bytes} B at {r.tiling.label()} ({word} {abs(delta)} B"
                    + (f", redundant MACs {r.redundancy_ratio:.2%}" if r.redundancy_ratio else "")
                    + ")"
                )
    return "\n".join(lines) + "\n"
