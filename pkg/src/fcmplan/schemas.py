"""JSON Schemas of the documents read and written by the CLI."""

_INT3 = {"type": "array", "items": {"type": "integer", "minimum": 1}, "minItems": 3, "maxItems": 3}
_INT2 = {"type": "array", "items": {"type": "integer", "minimum": 1}, "minItems": 2, "maxItems": 2}
_COUNT = {"type": "integer", "minimum": 0}

MODEL = {
    "type": "object",
    "additionalProperties": False,
    "required": ["layers"],
    "properties": {
        "precision": {"enum": ["fp32", "int8"]},
        "layers": {
            "type": "array",
            "items": {
                "type": "object",
                "additionalProperties": False,
                "required": ["id", "kind", "ifm", "out_depth"],
                "properties": {
                    "id": {"type": "string", "minLength": 1},
                    "kind": {"enum": ["dw", "pw"]},
                    "ifm": _INT3,
                    "filter": _INT2,
                    "strides": {"type": "integer", "minimum": 1},
                    "out_depth": {"type": "integer", "minimum": 1},
                    "padding": {"enum": ["same", "valid"]},
                    "precision": {"enum": ["fp32", "int8"]},
                },
            },
        },
        "edges": {
            "type": "array",
            "items": {"type": "array", "items": {"type": "string"}, "minItems": 2, "maxItems": 2},
        },
    },
}

GPU = {
    "type": "object",
    "additionalProperties": False,
    "required": ["name", "num_sms", "l1_kb", "shared_kb"],
    "properties": {
        "name": {"type": "string"},
        "num_sms": {"type": "integer", "minimum": 1},
        "l1_kb": {"type": "number", "exclusiveMinimum": 0},
        "shared_kb": {"type": "number", "exclusiveMinimum": 0},
        "warp_size": {"type": "integer", "minimum": 1},
        "peak_gflops": {"type": "number", "exclusiveMinimum": 0},
        "peak_gbps": {"type": "number", "exclusiveMinimum": 0},
    },
}

_BREAKDOWN = {
    "type": "object",
    "required": ["ifm_bytes", "overlap_bytes", "weight_bytes", "ofm_bytes", "elements"],
    "properties": {
        "ifm_bytes": _COUNT,
        "overlap_bytes": _COUNT,
        "weight_bytes": _COUNT,
        "ofm_bytes": _COUNT,
        "elements": {"type": "object", "additionalProperties": _COUNT},
    },
}

_WARNINGS = {"type": "array", "items": {"type": "object", "required": ["type"]}}

_ROOFLINE = {
    "type": "object",
    "required": ["bound", "arithmetic_intensity", "ridge_point"],
    "properties": {
        "bound": {"enum": ["compute", "memory"]},
        "arithmetic_intensity": {"type": "number", "minimum": 0},
        "ridge_point": {"type": "number", "exclusiveMinimum": 0},
    },
}

PLAN = {
    "type": "object",
    "required": ["gpu", "mode", "entries", "total_gma_bytes", "fused_fraction"],
    "properties": {
        "gpu": {"type": "string"},
        "mode": {"enum": ["paper", "consistent"]},
        "precision": {"enum": ["fp32", "int8", "mixed"]},
        "entries": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["layers", "mode", "tiling", "gma_bytes", "breakdown", "redundancy", "savings_bytes"],
                "properties": {
                    "layers": {"type": "array", "items": {"type": "string"}, "minItems": 1, "maxItems": 2},
                    "mode": {"enum": ["lbl", "dwpw", "pwdw", "pwdw_r", "pwpw"]},
                    "tiling": {
                        "type": "object",
                        "required": ["ofm_tile", "num_output_tiles", "tile_bytes", "comm_buffer_bytes"],
                        "properties": {
                            "ofm_tile": _INT3,
                            "num_output_tiles": {"type": "integer", "minimum": 1},
                            "tile_bytes": {"type": "object", "additionalProperties": _COUNT},
                            "comm_buffer_bytes": _COUNT,
                        },
                    },
                    "gma_bytes": _COUNT,
                    "breakdown": _BREAKDOWN,
                    "redundancy": {"type": "number", "minimum": 0, "exclusiveMaximum": 1},
                    "savings_bytes": _COUNT,
                    "roofline": _ROOFLINE,
                },
            },
        },
        "total_gma_bytes": _COUNT,
        "fused_fraction": {"type": "number", "minimum": 0, "maximum": 1},
        "warnings": _WARNINGS,
        "generated_at": {"type": "string"},
    },
}

ESTIMATE = {
    "type": "object",
    "required": ["subject", "tiling", "mode", "gma_bytes", "breakdown", "constraints"],
    "properties": {
        "subject": {"type": "object"},
        "tiling": _INT3,
        "mode": {"enum": ["paper", "consistent"]},
        "gma_bytes": _COUNT,
        "breakdown": _BREAKDOWN,
        "constraints": {"type": "object", "required": ["ok", "violations"]},
        "redundancy": {"type": "number"},
        "warnings": _WARNINGS,
    },
}

SEARCH = {
    "type": "object",
    "required": ["subject", "results"],
    "properties": {
        "subject": {"type": "object"},
        "results": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["kind", "feasible", "candidates_evaluated"],
                "properties": {
                    "kind": {"enum": ["lbl", "dwpw", "pwdw", "pwdw_r", "pwpw"]},
                    "feasible": {"type": "boolean"},
                    "candidates_evaluated": _COUNT,
                    "tiling": _INT3,
                    "gma_bytes": _COUNT,
                    "breakdown": _BREAKDOWN,
                    "redundancy": {"type": "number"},
                    "reason": {"type": "string"},
                },
            },
        },
        "warnings": _WARNINGS,
    },
}

SIMULATE = {
    "type": "object",
    "required": ["subject", "tiling", "report"],
    "properties": {
        "subject": {"type": "object"},
        "tiling": _INT3,
        "report": {
            "type": "object",
            "required": ["ifm_loads", "halo_loads", "weight_loads", "ofm_stores",
                         "macs_total", "macs_redundant", "bytes_total"],
        },
        "warnings": _WARNINGS,
    },
}

CLASSIFY = {
    "type": "object",
    "required": ["gpu", "kernels"],
    "properties": {
        "gpu": {"type": "string"},
        "kernels": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["layers", "mode", "macs", "gma_bytes", "roofline"],
                "properties": {"roofline": _ROOFLINE},
            },
        },
        "warnings": _WARNINGS,
    },
}

ERROR = {
    "type": "object",
    "required": ["error"],
    "properties": {
        "error": {
            "type": "object",
            "required": ["type", "message"],
            "properties": {"type": {"type": "string"}, "message": {"type": "string"}},
        }
    },
}
