"""Figure job description and input validation."""

from __future__ import annotations

import csv
import json
import os
from dataclasses import dataclass, field

KINDS = ("kappa", "tree", "profile", "fluid", "height")


class FigureError(ValueError):
    """Invalid figure job or malformed input file."""


@dataclass(frozen=True)
class FigureJob:
    """One rendering task: an input CSV, a figure kind and an output path.

    The input must carry a sidecar `<name>.config.json` with a `config_hash`
    entry, written by the producing CLI; inputs without one are refused so
    that every figure is traceable to the exact run that produced its data.
    """

    input_path: str
    kind: str
    output_path: str
    style: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise FigureError(f"unknown figure kind {self.kind!r}; "
                              f"expected one of {KINDS}")
        if not os.path.isfile(self.input_path):
            raise FigureError(f"input file not found: {self.input_path}")
        ext = os.path.splitext(self.output_path)[1].lower()
        if ext not in (".png", ".svg"):
            raise FigureError(f"output must be .png or .svg, got {ext!r}")
        sidecar = self.sidecar_path()
        if not os.path.isfile(sidecar):
            raise FigureError(f"missing sidecar {sidecar}; refusing input "
                              "without a config hash")
        meta = self.sidecar()
        if "config_hash" not in meta:
            raise FigureError(f"sidecar {sidecar} has no config_hash entry")

    def sidecar_path(self) -> str:
        base, _ = os.path.splitext(self.input_path)
        return base + ".config.json"

    def sidecar(self) -> dict:
        with open(self.sidecar_path()) as fh:
            return json.load(fh)

    def rows(self) -> list[dict]:
        """Input CSV as a list of per-row dicts of raw strings."""
        with open(self.input_path, newline="") as fh:
            reader = csv.DictReader(fh)
            if reader.fieldnames is None:
                raise FigureError(f"{self.input_path}: empty file")
            rows = list(reader)
        for row in rows:
            if None in row or any(v is None for v in row.values()):
                raise FigureError(f"{self.input_path}: ragged CSV row {row}")
        return rows

    def require_columns(self, rows: list[dict], names: tuple[str, ...]):
        have = set(rows[0]) if rows else set()
        missing = [n for n in names if n not in have]
        if missing:
            raise FigureError(f"{self.input_path}: missing columns {missing}")


def numeric(rows: list[dict], name: str) -> list[float]:
    """Column as floats; empty cells are skipped."""
    out = []
    for row in rows:
        cell = row[name]
        if cell == "":
            continue
        try:
            out.append(float(cell))
        except ValueError as exc:
            raise FigureError(f"column {name!r}: bad value {cell!r}") from exc
    return out
