"""Run records and file I/O for benchmark output.

A :class:`RunRecord` holds one solve: the problem descriptor, solver
parameters, the iteration counts and the residual/width histories.  Records
serialize to JSON or CSV with identical numeric payloads (floats are written
with ``repr`` so they round-trip exactly).
"""

from __future__ import annotations

import csv
import dataclasses
import io
import json
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import scipy.io
import scipy.sparse as sp

SCHEMA_VERSION = 1

_LIST_FIELDS = ("inner_iterations", "residual_history", "width_history")
_INT_FIELDS = ("n", "p", "m", "iterations", "schema_version")
_FLOAT_FIELDS = ("alpha", "omega", "beta", "tol", "wall_ms", "compress_tol")


@dataclass
class RunRecord:
    family: str
    n: int
    p: int
    m: int
    solver: str
    alpha: Optional[float]
    omega: Optional[float]
    beta: Optional[float]
    criterion: str
    tol: float
    iterations: int
    residual_history: list
    width_history: list
    converged: bool
    wall_ms: float
    inner_iterations: list = field(default_factory=list)
    compress_tol: Optional[float] = None
    schema_version: int = SCHEMA_VERSION

    def __post_init__(self):
        if len(self.residual_history) != self.iterations:
            raise ValueError(
                f"residual history has {len(self.residual_history)} entries for {self.iterations} iterations"
            )
        if self.width_history and len(self.width_history) != self.iterations:
            raise ValueError("width history length must match the iteration count")
        if self.inner_iterations and len(self.inner_iterations) != self.iterations:
            raise ValueError("one inner count per outer iteration is required")
        self.residual_history = [float(r) for r in self.residual_history]
        self.width_history = [int(w) for w in self.width_history]
        self.inner_iterations = [int(i) for i in self.inner_iterations]

    def to_dict(self):
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        version = d.get("schema_version", SCHEMA_VERSION)
        if version != SCHEMA_VERSION:
            raise ValueError(f"unsupported record schema version {version}")
        return cls(**d)

    def deterministic_payload(self):
        """Record contents without wall time, for reproducibility checks."""
        d = self.to_dict()
        d.pop("wall_ms")
        return d


def dumps_json(records):
    return json.dumps([r.to_dict() for r in records], indent=2)


def loads_json(text):
    return [RunRecord.from_dict(d) for d in json.loads(text)]


_FIELDS = [f.name for f in dataclasses.fields(RunRecord)]


def _cell(value):
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, list):
        return ";".join(repr(v) for v in value)
    return str(value)


def _parse(name, text):
    if name in _LIST_FIELDS:
        if not text:
            return []
        conv = float if name == "residual_history" else int
        return [conv(t) for t in text.split(";")]
    if name == "converged":
        return text == "true"
    if name in _INT_FIELDS:
        return int(text)
    if name in _FLOAT_FIELDS:
        return None if text == "" else float(text)
    return text


def dumps_csv(records):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(_FIELDS)
    for r in records:
        d = r.to_dict()
        w.writerow([_cell(d[k]) for k in _FIELDS])
    return buf.getvalue()


def loads_csv(text):
    rows = csv.DictReader(io.StringIO(text))
    return [RunRecord.from_dict({k: _parse(k, v) for k, v in row.items()}) for row in rows]


def dumps(records, fmt):
    if fmt == "json":
        return dumps_json(records)
    if fmt == "csv":
        return dumps_csv(records)
    raise ValueError(f"unknown format {fmt!r}")


def loads(text, fmt):
    if fmt == "json":
        return loads_json(text)
    if fmt == "csv":
        return loads_csv(text)
    raise ValueError(f"unknown format {fmt!r}")


def history_csv(residuals):
    """Two-column ``iteration,residual`` table, iterations counted from 1."""
    lines = ["iteration,residual"]
    lines += [f"{k},{float(r)!r}" for k, r in enumerate(residuals, start=1)]
    return "\n".join(lines) + "\n"


def write_matrix_market(path, M, comment=""):
    target = sp.coo_matrix(M) if sp.issparse(M) else np.asarray(M)
    scipy.io.mmwrite(str(path), target, comment=comment)


def read_matrix_market(path):
    M = scipy.io.mmread(str(path))
    return sp.csr_matrix(M) if sp.issparse(M) else np.asarray(M)
