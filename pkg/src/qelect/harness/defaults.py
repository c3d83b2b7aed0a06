"""Versioned verdict constants, loaded from ``defaults.json``."""

from __future__ import annotations

import json
from importlib import resources


def load_defaults() -> dict:
    text = resources.files(__package__).joinpath("defaults.json").read_text()
    return json.loads(text)


DEFAULTS = load_defaults()
