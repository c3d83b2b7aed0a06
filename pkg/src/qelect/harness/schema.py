"""JSON schemas for scenario, sweep and claims files."""

from __future__ import annotations

import jsonschema

from ..errors import ConfigError

PROTOCOLS = ["quantum", "chang-roberts", "dkr", "hirschberg-sinclair", "itai-rodeh", "bully"]
BOOTSTRAPS = ["bully", "hirschberg-sinclair", "hs", "chang-roberts", "dkr"]

_INT = {"type": "integer"}
_NODE_LIST = {"type": "array", "items": {"type": "integer", "minimum": 0}}

FILTER_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "kinds": {"type": "array", "items": {"type": "string"}},
        "src": _NODE_LIST,
        "dst": _NODE_LIST,
        "channel": {"enum": ["classical", "quantum"]},
        "min_round": _INT,
    },
}

TOPOLOGY_SCHEMA = {
    "type": "object",
    "required": ["kind", "n"],
    "additionalProperties": False,
    "properties": {
        "kind": {"enum": ["ring", "clique", "edges"]},
        "n": {"type": "integer", "minimum": 1},
        "direction": {"enum": ["uni", "bi", "unidirectional", "bidirectional"]},
        "id_order": {
            "anyOf": [
                {"enum": ["sorted", "reversed", "random"]},
                _NODE_LIST,
            ]
        },
        "id_seed": _INT,
        "anonymous": {"type": "boolean"},
        "edges": {
            "type": "array",
            "items": {"type": "array", "items": _INT, "minItems": 2, "maxItems": 2},
        },
    },
}

DELAY_SCHEMA = {
    "type": "object",
    "required": ["model"],
    "additionalProperties": False,
    "properties": {
        "model": {"enum": ["synchronous", "partial", "asynchronous"]},
        "bound": {"type": "integer", "minimum": 1},
        "fixed": {"type": "boolean"},
        "gst": {"type": "integer", "minimum": 0},
        "pre_gst_max": {"type": "integer", "minimum": 1},
        "spread": {"type": "integer", "minimum": 1},
        "distribution": {"enum": ["uniform", "geometric"]},
        "stall": FILTER_SCHEMA,
    },
}

FAULTS_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "crashes": {
            "type": "array",
            "items": {
                "type": "array",
                "items": {"type": "integer", "minimum": 0},
                "minItems": 2,
                "maxItems": 2,
            },
        },
        "omissions": {"type": "array", "items": FILTER_SCHEMA},
        "f_max": {"type": "integer", "minimum": 0},
    },
}

PARAMS_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "initiators": {"anyOf": [{"const": "all"}, _NODE_LIST]},
        "timeout": {"type": "integer", "minimum": 1},
        "n_known": {"type": "integer", "minimum": 1},
        "f": {"type": "integer", "minimum": 0},
        "d": {"type": "integer", "minimum": 2},
        "ttl": {"type": ["integer", "null"], "minimum": 0},
        "heartbeat": {"type": ["integer", "null"], "minimum": 1},
        "window_always": {"type": "boolean"},
        "rounds": {"type": "integer", "minimum": 0},
        "bootstrap": {"enum": BOOTSTRAPS},
        "adversary": {"enum": ["none", "crash-winner"]},
        "crash_count": {"type": "integer", "minimum": 0},
        "record_events": {"type": "boolean"},
    },
}

EXPECT_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "leader": {"type": ["integer", "null"]},
        "messages": _INT,
        "max_messages": _INT,
        "causal_time": _INT,
        "terminated": {"type": "boolean"},
        "agreement": {"type": "boolean"},
        "leader_alive": {"type": "boolean"},
        "leader_changes": _INT,
        "snap_violations": _INT,
    },
}

SEEDS_SCHEMA = {
    "anyOf": [
        {"type": "array", "items": _INT, "minItems": 1},
        {
            "type": "object",
            "required": ["count"],
            "additionalProperties": False,
            "properties": {"start": _INT, "count": {"type": "integer", "minimum": 1}},
        },
    ]
}

SCENARIO_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "required": ["protocol", "topology"],
    "additionalProperties": False,
    "properties": {
        "name": {"type": "string"},
        "protocol": {"enum": PROTOCOLS},
        "params": PARAMS_SCHEMA,
        "topology": TOPOLOGY_SCHEMA,
        "delay": DELAY_SCHEMA,
        "faults": FAULTS_SCHEMA,
        "seed": _INT,
        "seeds": SEEDS_SCHEMA,
        "limit": {"type": "integer", "minimum": 1},
        "expect": EXPECT_SCHEMA,
        # protocol knobs may also sit at the top level
        **PARAMS_SCHEMA["properties"],
    },
}

_SWEEP_ENTRY = {
    "anyOf": [
        {"enum": PROTOCOLS},
        {
            "type": "object",
            "required": ["protocol"],
            "additionalProperties": False,
            "properties": {
                "protocol": {"enum": PROTOCOLS},
                "label": {"type": "string"},
                "params": PARAMS_SCHEMA,
                "topology": {"type": "object"},
                "delay": DELAY_SCHEMA,
            },
        },
    ]
}

SWEEP_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "required": ["protocols", "n_list"],
    "additionalProperties": False,
    "properties": {
        "name": {"type": "string"},
        "protocols": {"type": "array", "items": _SWEEP_ENTRY, "minItems": 1},
        "n_list": {"type": "array", "items": {"type": "integer", "minimum": 2}, "minItems": 1},
        "seeds": SEEDS_SCHEMA,
        "delay": DELAY_SCHEMA,
        "limit": {"type": "integer", "minimum": 1},
        "expect": {
            "type": "object",
            "additionalProperties": {
                "type": "object",
                "additionalProperties": False,
                "properties": {
                    "center": {"type": "number"},
                    "tolerance": {"type": "number", "minimum": 0},
                    "range": {"type": "array", "items": {"type": "number"}, "minItems": 2, "maxItems": 2},
                },
            },
        },
    },
}

CLAIMS_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "name": {"type": "string"},
        "suite": {"const": "acceptance"},
        "claims": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["claim"],
                "additionalProperties": False,
                "properties": {
                    "claim": {"type": "string"},
                    "params": {"type": "object"},
                },
            },
        },
    },
    "anyOf": [{"required": ["suite"]}, {"required": ["claims"]}],
}


def pointer(path) -> str:
    """RFC 6901 pointer for a jsonschema error path."""
    parts = [str(p).replace("~", "~0").replace("/", "~1") for p in path]
    return "/" + "/".join(parts) if parts else ""


def validate(document, schema) -> None:
    """Raise ``ConfigError`` naming the first offending key."""
    validator = jsonschema.Draft202012Validator(schema)
    err = jsonschema.exceptions.best_match(validator.iter_errors(document))
    if err is None:
        return
    path = list(err.absolute_path)
    # an unknown key is reported on its parent; point at the key itself
    if err.validator == "additionalProperties" and isinstance(err.instance, dict):
        extra = sorted(set(err.instance) - set(err.schema.get("properties", {})))
        if extra:
            path.append(extra[0])
    raise ConfigError(err.message, pointer(path))
