"""Published JSON schemas for every service response body."""

_VERSION_META = {
    "type": "object",
    "required": ["version", "request", "rating", "repair_log"],
    "properties": {
        "version": {"type": "integer", "minimum": 0},
        "request": {"type": "string"},
        "rating": {"enum": ["satisfied", "quite_satisfied", "not_satisfied", "unrated"]},
        "repair_log": {"type": "array", "items": {"type": "string"}},
    },
}

DEMONSTRATION_RESPONSE = {
    "type": "object",
    "required": ["demonstration_id"],
    "properties": {"demonstration_id": {"type": "string"}},
}

PLAN_RESPONSE = {
    "type": "object",
    "required": ["session_id", "sem_bt_0"],
    "properties": {"session_id": {"type": "string"}, "sem_bt_0": {"type": "string"}},
}

SESSION_RESPONSE = {
    "type": "object",
    "required": ["session_id", "iteration", "current_xml", "pending", "versions", "object_labels"],
    "properties": {
        "session_id": {"type": "string"},
        "iteration": {"type": "integer", "minimum": 0},
        "current_xml": {"type": "string"},
        "pending": {"type": "boolean"},
        "versions": {"type": "array", "items": _VERSION_META},
        "object_labels": {"type": "array", "items": {"type": "string"}},
    },
}

REFINE_RESPONSE = {
    "type": "object",
    "required": ["version", "xml", "repair_log"],
    "properties": {
        "version": {"type": "integer", "minimum": 1},
        "xml": {"type": "string"},
        "repair_log": {"type": "array", "items": {"type": "string"}},
    },
}

PENDING_RESPONSE = {
    "type": "object",
    "required": ["pending"],
    "properties": {"pending": {"const": True}},
}

RESTORE_RESPONSE = {
    "type": "object",
    "required": ["version", "xml"],
    "properties": {"version": {"type": "integer", "minimum": 0}, "xml": {"type": "string"}},
}

RATE_RESPONSE = {"type": "object", "required": ["ok"], "properties": {"ok": {"const": True}}}

FINALIZE_RESPONSE = {
    "type": "object",
    "required": ["exe_xml", "metadata"],
    "properties": {
        "exe_xml": {"type": "string"},
        "metadata": {
            "type": "object",
            "required": ["stiffness_nm", "decode_notes", "iteration"],
            "properties": {
                "stiffness_nm": {"type": "object", "additionalProperties": {"type": "number"}},
                "decode_notes": {"type": "array", "items": {"type": "string"}},
                "iteration": {"type": "integer"},
            },
        },
    },
}

SIMULATE_RESPONSE = {
    "type": "object",
    "required": ["summary", "report", "trace"],
    "properties": {
        "summary": {
            "type": "object",
            "required": ["samples", "t_end", "contact_ratio", "any_collision", "z_min", "z_max"],
        },
        "report": {
            "type": "object",
            "required": ["passed", "results"],
            "properties": {"passed": {"type": "boolean"}, "results": {"type": "array"}},
        },
        "trace": {
            "type": "object",
            "required": ["t", "z", "contact", "collision"],
            "properties": {
                "t": {"type": "array", "items": {"type": "number"}},
                "z": {"type": "array", "items": {"type": "number"}},
                "contact": {"type": "array", "items": {"type": "integer"}},
                "collision": {"type": "array", "items": {"type": "integer"}},
            },
        },
    },
}

ERROR_RESPONSE = {
    "type": "object",
    "required": ["detail"],
}
