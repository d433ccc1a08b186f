"""Multidimensional spreadsheet model compiler: parse .dim models, evaluate
them with named-dimension broadcasting, compile them onto 2D grids under the
catalogued layout presets, and measure the formula complexity each induces."""

import json

try:
    from ._dimsheet import Model, parse, presets, eval_grid_json
except ImportError:  # in-tree builds put the extension on sys.path directly
    from _dimsheet import Model, parse, presets, eval_grid_json

__all__ = [
    "Model",
    "parse",
    "parse_file",
    "presets",
    "evaluate",
    "compile_grid",
    "eval_grid",
    "metrics",
]


def parse_file(path):
    with open(path, "r", encoding="utf-8") as handle:
        return parse(handle.read())


def evaluate(model, overrides=None):
    """All variable values as {name: {dims, shape, coords, values}}."""
    return json.loads(model.eval_json(overrides or {}))


def compile_grid(model, preset="", plan_json=""):
    """Grid document dict for a preset (or an explicit plan JSON string)."""
    return json.loads(model.compile_json(preset, plan_json))


def eval_grid(grid):
    """Evaluate a grid document dict; returns {(sheet, row, col): value}."""
    return eval_grid_json(json.dumps(grid))


def metrics(model, preset_list):
    """Formula complexity reports, one per preset."""
    return json.loads(model.metrics_json(list(preset_list)))
