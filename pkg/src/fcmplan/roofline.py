"""Compute- vs memory-bound classification on a roofline."""

from __future__ import annotations

import enum
from fractions import Fraction
from dataclasses import dataclass

from .gpu import GpuSpec


class RooflineError(ValueError):
    pass


class Bound(str, enum.Enum):
    COMPUTE_BOUND = "compute"
    MEMORY_BOUND = "memory"


@dataclass(frozen=True)
class BoundClass:
    bound: Bound
    arithmetic_intensity: float  # MACs per byte
    ridge_point: float  # MACs per byte

    @property
    def is_compute_bound(self) -> bool:
        return self.bound is Bound.COMPUTE_BOUND

    def to_json(self) -> dict:
        return {
            "bound": self.bound.value,
            "arithmetic_intensity": self.arithmetic_intensity,
            "ridge_point": self.ridge_point,
        }


def ridge_point(gpu: GpuSpec) -> float:
    if not gpu.has_roofline:
        raise RooflineError(f"GPU {gpu.name!r} has no roofline peaks (peak_gflops / peak_gbps)")
    return gpu.peak_ops_per_s / gpu.peak_mem_bw_bytes_per_s


def classify(macs: float, gma_bytes: float, gpu: GpuSpec) -> BoundClass:
    """Intensity at or above the ridge point counts as compute-bound."""
    ridge = ridge_point(gpu)
    if not gma_bytes > 0:
        raise RooflineError("gma_bytes must be positive")
    if macs < 0:
        raise RooflineError("macs must be non-negative")
    # exact rational comparison so the boundary and common scaling behave
    compute = Fraction(macs) * Fraction(gpu.peak_mem_bw_bytes_per_s) >= Fraction(gpu.peak_ops_per_s) * Fraction(gma_bytes)
    return BoundClass(
        Bound.COMPUTE_BOUND if compute else Bound.MEMORY_BOUND,
        macs / gma_bytes,
        ridge,
    )
