"""Run reports: row collection, digests, CSV/JSON writers, plot series.

Rows are plain dicts with a per-command column order.  Reruns with the
same inputs, budgets and seed reproduce every field except the wall-clock
columns; ``stable=True`` zeroes those so two reports can be compared byte
for byte.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field

from . import __version__

__all__ = ["RunReport", "COLUMNS", "inputs_digest", "emit_plotdata"]

COLUMNS = {
    "certify": ["problem", "form", "c", "alpha", "beta", "fstar",
                "penalized_inf", "status", "witness_coords", "wall_ms"],
    "cstar": ["problem", "form", "status", "value", "witness_coords", "wall_ms"],
    "envelope": ["problem", "alpha_hat", "beta_hat", "residual_zero",
                 "residual_inf", "single_exponent_feasible", "validate_chat",
                 "warnings", "wall_ms"],
    "calmness": ["problem", "v0", "modulus", "diverging", "grid_size", "wall_ms"],
    "sequences": ["problem", "first_type", "second_type", "epsilon", "bound",
                  "warnings", "wall_ms"],
    "distcond": ["problem", "status", "c1_holds", "c2_variant_holds",
                 "sample_size", "wall_ms"],
    "nu": ["problem", "at", "nu_hat", "lambda", "w", "wall_ms"],
    "mfcq": ["problem", "at", "holds", "min_norm", "threshold", "wall_ms"],
    "kinf": ["problem", "verdict", "witness_t", "fstar", "clusters", "wall_ms"],
    "corpus": ["problem", "command", "block", "field", "expected", "actual", "ok"],
}

_WALL_FIELDS = ("wall_ms",)


def _fmt_cell(v):
    if v is None:
        return ""
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        if math.isnan(v):
            return "nan"
        if v == math.inf:
            return "inf"
        if v == -math.inf:
            return "-inf"
        return repr(v)
    if isinstance(v, (tuple, list)):
        return ";".join(_fmt_cell(c) for c in v)
    return str(v)


def inputs_digest(*parts):
    h = hashlib.sha256()
    for p in parts:
        if isinstance(p, bytes):
            h.update(p)
        else:
            h.update(json.dumps(p, sort_keys=True, default=str).encode())
        h.update(b"\x00")
    return h.hexdigest()[:16]


@dataclass
class RunReport:
    command: str
    digest: str = ""
    rows: list = field(default_factory=list)
    version: str = __version__

    def add(self, **row):
        self.rows.append(row)

    def columns(self):
        cols = list(COLUMNS.get(self.command, []))
        extra = []
        for row in self.rows:
            for k in row:
                if k not in cols and k not in extra:
                    extra.append(k)
        return cols + extra

    def to_csv(self, stable=False):
        cols = self.columns()
        lines = [",".join(cols)]
        for row in self.rows:
            cells = []
            for c in cols:
                v = row.get(c)
                if stable and c in _WALL_FIELDS:
                    v = 0
                cells.append(_fmt_cell(v))
            lines.append(",".join(cells))
        return "\n".join(lines) + "\n"

    def to_json(self, stable=False):
        rows = []
        for row in self.rows:
            r = dict(row)
            if stable:
                for c in _WALL_FIELDS:
                    if c in r:
                        r[c] = 0
            rows.append(r)
        doc = {"command": self.command, "version": self.version,
               "digest": self.digest, "rows": rows}
        return json.dumps(doc, indent=2, sort_keys=True, default=_fmt_cell) + "\n"

    def write(self, path, fmt="csv", stable=False):
        text = self.to_csv(stable) if fmt == "csv" else self.to_json(stable)
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text)


def emit_plotdata(series, path, header=""):
    """Write a two-column numeric series as whitespace-delimited text."""
    lines = []
    if header:
        lines.append(f"# {header}")
    for a, b in series:
        lines.append(f"{a!r} {b!r}")
    text = "\n".join(lines) + "\n"
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(text)
    return path
