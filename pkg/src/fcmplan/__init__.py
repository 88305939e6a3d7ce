"""Fusion planning for depthwise/pointwise convolution chains on GPUs."""

from .cost_models import (
    ConstraintReport,
    ConstraintViolation,
    CostModelError,
    EquationMode,
    GmaEstimate,
    Tiling,
    constraint_check,
    dw_gma,
    fcm_gma,
    lbl_gma,
    overlap,
    pw_gma,
    redundancy_ratio,
)
from .gpu import PRESETS, GpuSpec, load_gpu
from .model_ir import (
    ConvLayer,
    FcmKind,
    FusionCandidate,
    LayerKind,
    ModelError,
    ModelGraph,
    Padding,
    Precision,
    TensorDims,
    fusion_candidates,
    parse_model,
    serialize_model,
)
from .oracle_sim import SimReport, simulate_fcm, simulate_lbl, verify
from .planner import FusionPlan, PlanEntry, explain, plan
from .roofline import Bound, BoundClass, classify
from .tiling_search import SearchGrid, SearchResult, best_fcm, best_lbl, enumerate_tilings

__version__ = "0.1.0"
