"""GPU resource descriptions and shipped presets."""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Optional

# One MAC counts as two FLOPs when converting vendor peak figures.
FLOPS_PER_MAC = 2


class GpuSpecError(ValueError):
    pass


@dataclass(frozen=True)
class GpuSpec:
    name: str
    num_sms: int
    l1_bytes_per_sm: int
    shared_mem_bytes_per_sm: int
    warp_size: int = 32
    peak_ops_per_s: Optional[float] = None  # MAC/s
    peak_mem_bw_bytes_per_s: Optional[float] = None

    def __post_init__(self):
        for f in ("num_sms", "l1_bytes_per_sm", "shared_mem_bytes_per_sm", "warp_size"):
            v = getattr(self, f)
            if not isinstance(v, int) or isinstance(v, bool) or v < 1:
                raise GpuSpecError(f"{f} must be a positive integer, got {v!r}")
        if self.shared_mem_bytes_per_sm > self.l1_bytes_per_sm:
            raise GpuSpecError("shared memory portion cannot exceed the L1 size")
        if (self.peak_ops_per_s is None) != (self.peak_mem_bw_bytes_per_s is None):
            raise GpuSpecError("roofline peaks must be given together or not at all")
        for f in ("peak_ops_per_s", "peak_mem_bw_bytes_per_s"):
            v = getattr(self, f)
            if v is not None and not v > 0:
                raise GpuSpecError(f"{f} must be positive")

    @property
    def has_roofline(self) -> bool:
        return self.peak_ops_per_s is not None

    def to_json(self) -> dict[str, Any]:
        d: dict[str, Any] = {
            "name": self.name,
            "num_sms": self.num_sms,
            "l1_kb": self.l1_bytes_per_sm / 1024,
            "shared_kb": self.shared_mem_bytes_per_sm / 1024,
            "warp_size": self.warp_size,
        }
        for k in ("l1_kb", "shared_kb"):
            if float(d[k]).is_integer():
                d[k] = int(d[k])
        if self.has_roofline:
            d["peak_gflops"] = self.peak_ops_per_s * FLOPS_PER_MAC / 1e9
            d["peak_gbps"] = self.peak_mem_bw_bytes_per_s / 1e9
        return d

    @classmethod
    def from_json(cls, doc: dict[str, Any]) -> "GpuSpec":
        allowed = {"name", "num_sms", "l1_kb", "shared_kb", "warp_size", "peak_gflops", "peak_gbps"}
        unknown = set(doc) - allowed
        if unknown:
            raise GpuSpecError(f"unknown GPU spec fields {sorted(unknown)}")
        missing = {"name", "num_sms", "l1_kb", "shared_kb"} - set(doc)
        if missing:
            raise GpuSpecError(f"missing GPU spec fields {sorted(missing)}")
        l1 = doc["l1_kb"] * 1024
        shared = doc["shared_kb"] * 1024
        if int(l1) != l1 or int(shared) != shared:
            raise GpuSpecError("l1_kb and shared_kb must describe a whole number of bytes")
        gflops, gbps = doc.get("peak_gflops"), doc.get("peak_gbps")
        return cls(
            name=str(doc["name"]),
            num_sms=doc["num_sms"],
            l1_bytes_per_sm=int(l1),
            shared_mem_bytes_per_sm=int(shared),
            warp_size=doc.get("warp_size", 32),
            peak_ops_per_s=None if gflops is None else gflops * 1e9 / FLOPS_PER_MAC,
            peak_mem_bw_bytes_per_s=None if gbps is None else gbps * 1e9,
        )


# SM counts and L1 sizes from the vendor configurations used for the
# evaluation GPUs. Peak FP32 throughput and DRAM bandwidth are public
# datasheet numbers, supplied as external inputs for roofline use only.
PRESETS: dict[str, GpuSpec] = {
    "gtx1660": GpuSpec.from_json(
        {"name": "gtx1660", "num_sms": 22, "l1_kb": 96, "shared_kb": 64,
         "warp_size": 32, "peak_gflops": 5027.0, "peak_gbps": 192.0}
    ),
    "rtx_a4000": GpuSpec.from_json(
        {"name": "rtx_a4000", "num_sms": 128, "l1_kb": 128, "shared_kb": 100,
         "warp_size": 32, "peak_gflops": 19170.0, "peak_gbps": 448.0}
    ),
    "agx_orin": GpuSpec.from_json(
        {"name": "agx_orin", "num_sms": 16, "l1_kb": 192, "shared_kb": 164,
         "warp_size": 32, "peak_gflops": 5325.0, "peak_gbps": 204.8}
    ),
}


def load_gpu(preset_or_path: str) -> GpuSpec:
    """Resolve a preset name or a path to a GPU spec JSON file."""
    if preset_or_path in PRESETS:
        return PRESETS[preset_or_path]
    p = Path(preset_or_path)
    if not p.is_file():
        raise GpuSpecError(
            f"unknown GPU preset or file {preset_or_path!r} (presets: {', '.join(sorted(PRESETS))})"
        )
    try:
        doc = json.loads(p.read_text())
    except json.JSONDecodeError as e:
        raise GpuSpecError(f"{p}: invalid JSON: {e}") from None
    if not isinstance(doc, dict):
        raise GpuSpecError(f"{p}: GPU spec must be a JSON object")
    return GpuSpec.from_json(doc)
