"""JSON schemas for experiment configs, one per CLI subcommand."""

_GRID = {
    "type": "object",
    "properties": {
        "nx": {"type": "integer", "minimum": 8, "multipleOf": 2},
        "ny": {"type": "integer", "minimum": 8, "multipleOf": 2},
        "lx": {"type": "number", "exclusiveMinimum": 0},
        "ly": {"type": "number", "exclusiveMinimum": 0},
    },
    "additionalProperties": False,
}

_COMPLEX = {
    "oneOf": [
        {"type": "number"},
        {"type": "array", "items": {"type": "number"}, "minItems": 2, "maxItems": 2},
    ]
}

_COEFFS = {"type": "array", "items": _COMPLEX, "minItems": 1}

_COMMON = {
    "grid": _GRID,
    "seed": {"type": "integer", "minimum": 0, "maximum": 2**64 - 1},
    "tol": {"type": "number", "exclusiveMinimum": 0},
    "max_iter": {"type": "integer", "minimum": 1},
    "backend": {"enum": ["spectral", "stencil"]},
    "out_dir": {"type": "string"},
    "origin": {"type": "array", "items": {"type": "number"}, "minItems": 2, "maxItems": 2},
}


def _schema(props: dict, required: list[str]) -> dict:
    return {
        "$schema": "https://json-schema.org/draft/2020-12/schema",
        "type": "object",
        "properties": {**_COMMON, **props},
        "required": required,
        "additionalProperties": False,
    }


SCHEMAS = {
    "kw-solve": _schema(
        {
            "B": {"type": "string"},
            "w": {"type": "string"},
            "method": {"enum": ["newton", "picard"]},
        },
        ["B", "w"],
    ),
    "vortex-make": _schema(
        {
            "degree": {"type": "integer", "minimum": 1},
            "tau": {"type": "number"},
            "coeffs": _COEFFS,
        },
        ["degree", "tau"],
    ),
    "sv-gaugefix": _schema(
        {
            "degree": {"type": "integer", "minimum": 1},
            "tau": {"type": "number"},
            "n": {"type": "integer", "minimum": 1},
            "weights": {"type": "array", "items": {"type": "integer"}, "minItems": 1},
            "coeffs": {"type": "array", "items": _COEFFS, "minItems": 1},
        },
        ["degree", "tau", "n"],
    ),
    "pi-map": _schema(
        {"solution": {"type": "string"}},
        ["solution"],
    ),
    "threshold-scan": _schema(
        {
            "degree": {"type": "integer", "minimum": 1},
            "tau_list": {"type": "array", "items": {"type": "number"}, "minItems": 1},
            "coeffs": _COEFFS,
        },
        ["degree", "tau_list"],
    ),
}
