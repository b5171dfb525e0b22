"""Deterministic CSV / JSON output with the resolved config embedded."""
from __future__ import annotations

import json
import math
import os
from dataclasses import asdict

import numpy as np

from .core import ModelParams

CSV_FLOAT = "%.11e"  # 12 significant digits


def _cell(value) -> str:
    if isinstance(value, str):
        return value
    if value is None:
        return ""
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    x = float(value)
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return CSV_FLOAT % x


def csv_text(columns, rows, config_text: str = "") -> str:
    out = [f"# {ln}" if ln else "#" for ln in config_text.rstrip("\n").split("\n")] if config_text else []
    out.append(",".join(columns))
    for row in rows:
        if len(row) != len(columns):
            raise ValueError("row length does not match the header")
        out.append(",".join(_cell(v) for v in row))
    return "\n".join(out) + "\n"


def _json_value(value):
    if isinstance(value, (np.integer,)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        x = float(value)
        return None if not math.isfinite(x) else x
    if isinstance(value, np.ndarray):
        return [_json_value(v) for v in value.tolist()]
    if isinstance(value, (list, tuple)):
        return [_json_value(v) for v in value]
    if isinstance(value, dict):
        return {k: _json_value(v) for k, v in value.items()}
    return value


def json_text(payload: dict, params: ModelParams, config_text: str) -> str:
    envelope = {"config": config_text, "params": asdict(params), **payload}
    return json.dumps(_json_value(envelope), indent=2, sort_keys=True) + "\n"


def table_json(columns, rows) -> dict:
    return {"columns": list(columns), "rows": [list(r) for r in rows]}


def write_text(path, text: str) -> str:
    d = os.path.dirname(path)
    if d:
        os.makedirs(d, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)
    return path


def read_csv(path) -> tuple[list[str], list[str], np.ndarray]:
    """(comment lines, column names, numeric data) of a CSV written by csv_text."""
    with open(path, encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    comments = [ln for ln in lines if ln.startswith("#")]
    body = [ln for ln in lines if not ln.startswith("#")]
    columns = body[0].split(",")
    data = np.array([[float(x) for x in ln.split(",")] for ln in body[1:]]) if len(body) > 1 \
        else np.zeros((0, len(columns)))
    return comments, columns, data
