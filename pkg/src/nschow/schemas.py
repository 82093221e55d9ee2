"""JSON schemas for CLI outputs."""

_NUM = {"type": "number"}
_VEC = {"type": "array", "items": _NUM}
_MAT = {"type": "array", "items": _VEC}

MANIFEST = {
    "type": "object",
    "required": ["command", "params", "seed", "version", "wall_time"],
    "properties": {
        "command": {"type": "string"},
        "params": {"type": "object"},
        "seed": {"type": ["integer", "null"]},
        "version": {"type": "string"},
        "wall_time": _NUM,
    },
}

ANALYSIS = {
    "type": "object",
    "required": ["bracket", "length", "seq", "diff_degree", "basic_sub_brackets", "var_degrees", "regularity", "n_of_b"],
    "properties": {
        "bracket": {"type": "string"},
        "length": {"type": "integer", "minimum": 1},
        "seq": {"type": "array", "items": {"type": "integer"}},
        "diff_degree": {"type": "integer", "minimum": 1},
        "basic_sub_brackets": {"type": "array", "items": {"type": "string"}},
        "var_degrees": {"type": "object", "additionalProperties": {"type": "integer"}},
        "regularity": {"type": "object", "additionalProperties": {"type": "string"}},
        "n_of_b": {"type": "integer", "minimum": 1},
    },
}

POLYTOPE = {
    "type": "object",
    "required": ["dim", "vertices", "radii", "samples"],
    "properties": {
        "dim": {"type": "integer", "minimum": 1},
        "vertices": {"type": "array", "items": _VEC, "minItems": 1},
        "radii": _VEC,
        "samples": {"type": "integer", "minimum": 0},
        "uncertainty": _NUM,
        "discarded": {"type": "integer"},
    },
}

WORD = {
    "type": "object",
    "required": ["segments", "total_time"],
    "properties": {
        "segments": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["field", "sign", "duration"],
                "properties": {
                    "field": {"type": "integer", "minimum": 1},
                    "sign": {"enum": [-1, 1]},
                    "duration": {"type": "number", "minimum": 0},
                },
            },
        },
        "total_time": {"type": "number", "minimum": 0},
    },
}

CERTIFICATE = {
    "type": "object",
    "required": ["brackets", "point", "polytopes", "min_sigma", "status"],
    "properties": {
        "brackets": {"type": "array", "items": {"type": "string"}},
        "point": _VEC,
        "polytopes": {"type": "array", "items": POLYTOPE},
        "min_sigma": _NUM,
        "beta": _NUM,
        "sigma_min": _NUM,
        "margin": _NUM,
        "status": {"enum": ["Certified", "Inconclusive", "Failed"]},
        "selection_report": {"type": "object"},
    },
}

STEERING = {
    "type": "object",
    "required": ["target", "t", "word", "tau", "terminal", "error_norm", "iterations", "converged"],
    "properties": {
        "target": _VEC,
        "t": _VEC,
        "word": WORD,
        "tau": _NUM,
        "terminal": _VEC,
        "error_norm": _NUM,
        "iterations": {"type": "integer"},
        "converged": {"type": "boolean"},
        "replay_error": _NUM,
    },
}

HOLDER = {
    "type": "object",
    "required": ["slope", "intercept", "slope_ci", "table"],
    "properties": {
        "slope": _NUM,
        "intercept": _NUM,
        "slope_ci": {"type": "array", "items": _NUM, "minItems": 2, "maxItems": 2},
        "expected_slope": _NUM,
        "table": {"type": "array", "items": {"type": "object"}},
    },
}

ASYMPTOTIC = {
    "type": "object",
    "required": ["bracket", "point", "rows"],
    "properties": {
        "bracket": {"type": "string"},
        "point": _VEC,
        "rows": {"type": "array", "items": {"type": "object", "required": ["t", "e"]}},
    },
}

GDQ = {
    "type": "object",
    "required": ["bracket", "rows"],
    "properties": {
        "bracket": {"type": "string"},
        "rows": {"type": "array", "items": {"type": "object", "required": ["scale", "max_residual"]}},
    },
}

CLOUD = {
    "type": "object",
    "required": ["points", "skipped"],
    "properties": {"points": _MAT, "skipped": {"type": "integer"}},
}

RESULT_SCHEMAS = {
    "bracket analyze": ANALYSIS,
    "bracket set": POLYTOPE,
    "certify": CERTIFICATE,
    "steer": STEERING,
    "holder": HOLDER,
    "reach": CLOUD,
    "verify-asymptotic": ASYMPTOTIC,
    "verify-gdq": GDQ,
}


def document_schema(command: str) -> dict:
    """Schema of the full CLI JSON document for ``command``."""
    return {
        "type": "object",
        "required": ["manifest", "result"],
        "properties": {"manifest": MANIFEST, "result": RESULT_SCHEMAS[command]},
    }
