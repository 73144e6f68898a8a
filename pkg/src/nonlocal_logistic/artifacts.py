"""Deterministic on-disk results: CSV tables, JSON manifests, SVG plots, field CSVs.

Wall-clock timings go to a plain-text side file so that the CSV, JSON and SVG
outputs of two identical runs compare equal byte for byte.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import math
from pathlib import Path

import numpy as np

from .grid import Field, field_to_csv
from .plot import Axes, Series, render_svg

TIMINGS_FILE = "timings.txt"


def to_jsonable(obj):
    """Plain JSON types; non-finite floats become strings so the output stays valid JSON."""
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return v if math.isfinite(v) else str(v)
    if obj is None or isinstance(obj, str):
        return obj
    return str(obj)


def _cell(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if v is None:
        return ""
    return str(v)


def table_to_csv(columns, rows) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([_cell(v) for v in row])
    return buf.getvalue()


def sha256_text(*parts: str | bytes) -> str:
    h = hashlib.sha256()
    for part in parts:
        h.update(part.encode() if isinstance(part, str) else part)
    return h.hexdigest()


class RunDir:
    """One experiment's output directory; remembers what it wrote."""

    def __init__(self, path):
        self.path = Path(path)
        self.path.mkdir(parents=True, exist_ok=True)
        self.files: list[str] = []

    def _write(self, name: str, text: str) -> Path:
        target = self.path / name
        target.write_text(text, newline="")
        if name not in self.files:
            self.files.append(name)
        return target

    def table(self, name: str, columns, rows) -> Path:
        return self._write(name, table_to_csv(columns, rows))

    def field(self, name: str, f: Field) -> Path:
        return self._write(name, field_to_csv(f))

    def plot(self, name: str, series: list[Series], axes: Axes) -> Path:
        return self._write(name, render_svg(series, axes))

    def json(self, name: str, obj) -> Path:
        text = json.dumps(to_jsonable(obj), indent=2, sort_keys=True) + "\n"
        return self._write(name, text)

    def manifest(self, *, command: str, config, resolved: dict, verdicts: dict,
                 inputs_sha256: str, extra: dict | None = None) -> Path:
        body = {
            "command": command,
            "config": config.as_dict(),
            "config_text": config.serialize(),
            "seed": config["run"]["seed"],
            "resolved": resolved,
            "verdicts": verdicts,
            "artifacts": sorted(self.files + ["manifest.json"]),
            "inputs_sha256": inputs_sha256,
        }
        if extra:
            body["extra"] = extra
        return self.json("manifest.json", body)


def append_timing(root, name: str, seconds: float) -> None:
    root = Path(root)
    root.mkdir(parents=True, exist_ok=True)
    with open(root / TIMINGS_FILE, "a") as fh:
        fh.write(f"{name} {seconds:.3f}\n")
