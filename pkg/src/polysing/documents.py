"""JSON documents for polynomials and solve reports, plus the trace CSV.

Matrix entries are stored as decimal strings (``repr`` of the float, which
round-trips exactly); real and imaginary parts live in separate grids and
coefficients are listed in ascending order ``A_0, ..., A_d``.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, Iterable, List, Optional

import numpy as np

from .core import MatrixPolynomial, PolysingError
from .outer import TraceRow
from .structures import StructureSpace, structure_from_descriptor

__all__ = [
    "DocumentError",
    "PolynomialDocument",
    "ReportDocument",
    "load_polynomial",
    "save_polynomial",
    "load_report",
    "save_report",
    "report_from_result",
    "write_trace",
    "read_trace",
    "TRACE_HEADER",
]

POLY_FORMAT = "polysing-polynomial"
REPORT_FORMAT = "polysing-report"
TRACE_HEADER = ("k", "eps", "g", "grad_norm", "branch", "inner_steps")


class DocumentError(PolysingError, ValueError):
    """Malformed document; ``path`` names the offending field."""

    def __init__(self, path, msg):
        super().__init__(f"{path}: {msg}")
        self.path = path


def _fmt(x) -> str:
    return repr(float(x))


def _parse_float(s, path):
    if isinstance(s, bool) or not isinstance(s, (str, int, float)):
        raise DocumentError(path, f"expected a decimal string, got {type(s).__name__}")
    try:
        x = float(s)
    except ValueError:
        raise DocumentError(path, f"not a number: {s!r}") from None
    if not math.isfinite(x):
        raise DocumentError(path, f"non-finite value {s!r}")
    return x


def _grid_out(a):
    return [[_fmt(x) for x in row] for row in a]


def _grid_in(g, n, path):
    if not isinstance(g, list) or len(g) != n:
        raise DocumentError(path, f"expected {n} rows")
    out = np.empty((n, n))
    for i, row in enumerate(g):
        if not isinstance(row, list) or len(row) != n:
            raise DocumentError(f"{path}[{i}]", f"expected {n} entries")
        for j, s in enumerate(row):
            out[i, j] = _parse_float(s, f"{path}[{i}][{j}]")
    return out


def _blocks_out(blocks, real):
    out = []
    for b in blocks:
        entry = {"real": _grid_out(b.real)}
        if not real:
            entry["imag"] = _grid_out(b.imag)
        out.append(entry)
    return out


def _blocks_in(items, count, n, real, path):
    if not isinstance(items, list) or len(items) != count:
        raise DocumentError(path, f"expected {count} coefficient entries")
    out = np.zeros((count, n, n), dtype=complex)
    for i, e in enumerate(items):
        p = f"{path}[{i}]"
        if not isinstance(e, dict) or "real" not in e:
            raise DocumentError(p, "expected an object with a 'real' grid")
        out[i].real = _grid_in(e["real"], n, p + ".real")
        if "imag" in e:
            if real:
                raise DocumentError(p + ".imag", "imaginary grid given for a real document")
            out[i].imag = _grid_in(e["imag"], n, p + ".imag")
    return out


def _require(doc, key, path=""):
    if key not in doc:
        raise DocumentError(path + key, "missing field")
    return doc[key]


def _int_field(doc, key, lo):
    v = _require(doc, key)
    if isinstance(v, bool) or not isinstance(v, int) or v < lo:
        raise DocumentError(key, f"expected an integer >= {lo}")
    return v


@dataclass(eq=False)
class PolynomialDocument:
    """A matrix polynomial with optional structure descriptor and metadata."""

    coefficients: np.ndarray  # ascending (d+1, n, n)
    structure: Any = None
    metadata: Dict[str, Any] = field(default_factory=dict)

    @property
    def n(self):
        return self.coefficients.shape[1]

    @property
    def degree(self):
        return self.coefficients.shape[0] - 1

    @property
    def scalar_field(self):
        im = self.coefficients.imag
        # -0.0 imaginary parts count as complex so that they survive a round trip
        return "real" if not (np.any(im) or np.any(np.signbit(im))) else "complex"

    @classmethod
    def from_polynomial(cls, P: MatrixPolynomial, structure=None, metadata=None):
        if isinstance(structure, StructureSpace):
            structure = structure.describe()
        meta = dict(metadata or {})
        if P.name and "name" not in meta:
            meta["name"] = P.name
        return cls(np.array(P.coeffs), structure, meta)

    def polynomial(self) -> MatrixPolynomial:
        try:
            return MatrixPolynomial(self.coefficients, name=self.metadata.get("name", ""))
        except ValueError as exc:
            raise DocumentError("coefficients", str(exc)) from None

    def structure_space(self) -> StructureSpace:
        try:
            return structure_from_descriptor(self.structure, self.degree)
        except (ValueError, TypeError) as exc:
            raise DocumentError("structure", str(exc)) from None

    def to_dict(self):
        real = self.scalar_field == "real"
        return {
            "format": POLY_FORMAT,
            "version": 1,
            "n": self.n,
            "degree": self.degree,
            "scalar_field": self.scalar_field,
            "coefficients": _blocks_out(self.coefficients, real),
            "structure": self.structure,
            "metadata": self.metadata,
        }

    @classmethod
    def from_dict(cls, doc):
        if not isinstance(doc, dict):
            raise DocumentError("<root>", "expected a JSON object")
        fmt = doc.get("format", POLY_FORMAT)
        if fmt != POLY_FORMAT:
            raise DocumentError("format", f"expected {POLY_FORMAT!r}, got {fmt!r}")
        n = _int_field(doc, "n", 1)
        degree = _int_field(doc, "degree", 1)
        sf = _require(doc, "scalar_field")
        if sf not in ("real", "complex"):
            raise DocumentError("scalar_field", f"expected 'real' or 'complex', got {sf!r}")
        coeffs = _blocks_in(_require(doc, "coefficients"), degree + 1, n, sf == "real",
                            "coefficients")
        if not np.any(coeffs[-1]):
            raise DocumentError(f"coefficients[{degree}]",
                                "leading coefficient A_d is identically zero")
        meta = doc.get("metadata") or {}
        if not isinstance(meta, dict):
            raise DocumentError("metadata", "expected an object")
        return cls(coeffs, doc.get("structure"), meta)

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), indent=1) + "\n"


def _read_json(path):
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise DocumentError(str(path), exc.strerror or str(exc)) from None
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise DocumentError(str(path), f"invalid JSON ({exc.msg} at line {exc.lineno})") from None


def load_polynomial(path):
    """Read a polynomial document; returns ``(P, S, document)``."""
    doc = PolynomialDocument.from_dict(_read_json(path))
    return doc.polynomial(), doc.structure_space(), doc


def save_polynomial(path, P: MatrixPolynomial, structure=None, metadata=None):
    doc = PolynomialDocument.from_polynomial(P, structure, metadata)
    Path(path).write_text(doc.dumps())
    return doc


# -- reports ------------------------------------------------------------------

def _row_out(r: TraceRow):
    return {"k": r.k, "eps": r.eps, "g": r.g, "grad_norm": r.grad_norm,
            "branch": r.branch, "inner_steps": r.inner_steps}


def _row_in(d):
    return TraceRow(int(d["k"]), float(d["eps"]), float(d["g"]), float(d["grad_norm"]),
                    str(d["branch"]), int(d["inner_steps"]))


@dataclass(eq=False)
class ReportDocument:
    """Serializable summary of a singularity or kernel solve."""

    mode: str
    eps_star: float
    delta: np.ndarray  # ascending, like the coefficients
    outer_trace: List[TraceRow]
    verification: float
    converged: bool
    certified: bool
    config: Dict[str, Any] = field(default_factory=dict)
    refinement: List[TraceRow] = field(default_factory=list)
    eps_tol1: Optional[float] = None
    g_star: Optional[float] = None
    kernel_vector: Optional[np.ndarray] = None
    side: Optional[str] = None
    timing: Optional[float] = None

    def to_dict(self):
        n = self.delta.shape[1]
        out = {
            "format": REPORT_FORMAT,
            "version": 1,
            "mode": self.mode,
            "eps_star": _fmt(self.eps_star),
            "n": n,
            "degree": self.delta.shape[0] - 1,
            "delta": _blocks_out(self.delta, False),
            "outer_trace": [_row_out(r) for r in self.outer_trace],
            "refinement": [_row_out(r) for r in self.refinement],
            "verification": _fmt(self.verification),
            "converged": self.converged,
            "certified": self.certified,
            "eps_tol1": None if self.eps_tol1 is None else _fmt(self.eps_tol1),
            "g_star": None if self.g_star is None else _fmt(self.g_star),
            "config": self.config,
        }
        if self.kernel_vector is not None:
            out["kernel_vector"] = {"real": [_fmt(x) for x in self.kernel_vector.real],
                                    "imag": [_fmt(x) for x in self.kernel_vector.imag]}
            out["side"] = self.side
        if self.timing is not None:
            out["timing"] = {"seconds": self.timing}
        return out

    @classmethod
    def from_dict(cls, doc):
        if not isinstance(doc, dict) or doc.get("format") != REPORT_FORMAT:
            raise DocumentError("format", f"expected {REPORT_FORMAT!r}")
        n = _int_field(doc, "n", 1)
        degree = _int_field(doc, "degree", 1)
        mode = _require(doc, "mode")
        if mode not in ("singularity", "kernel"):
            raise DocumentError("mode", f"unknown mode {mode!r}")
        delta = _blocks_in(_require(doc, "delta"), degree + 1, n, False, "delta")
        kv = None
        if "kernel_vector" in doc:
            k = doc["kernel_vector"]
            kv = (np.array([_parse_float(s, "kernel_vector.real") for s in k["real"]])
                  + 1j * np.array([_parse_float(s, "kernel_vector.imag") for s in k["imag"]]))
        opt = lambda key: None if doc.get(key) is None else _parse_float(doc[key], key)
        try:
            rows = [_row_in(r) for r in doc.get("outer_trace", [])]
            ref = [_row_in(r) for r in doc.get("refinement", [])]
        except (KeyError, TypeError, ValueError) as exc:
            raise DocumentError("outer_trace", f"malformed row ({exc})") from None
        return cls(
            mode=mode, eps_star=_parse_float(_require(doc, "eps_star"), "eps_star"),
            delta=delta, outer_trace=rows,
            verification=_parse_float(_require(doc, "verification"), "verification"),
            converged=bool(doc.get("converged")), certified=bool(doc.get("certified")),
            config=doc.get("config") or {}, refinement=ref, eps_tol1=opt("eps_tol1"),
            g_star=opt("g_star"), kernel_vector=kv, side=doc.get("side"),
            timing=(doc.get("timing") or {}).get("seconds"))

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), indent=1) + "\n"

    def delta_stack(self):
        """Descending stack ``[Delta_d, ..., Delta_0]``."""
        return self.delta[::-1].copy()


def report_from_result(result, config=None, timing=None) -> ReportDocument:
    """Build a report from a ``SolveReport`` or ``KernelResult``."""
    kernel = result.mode == "kernel"
    return ReportDocument(
        mode=result.mode, eps_star=result.eps_star,
        delta=np.array(result.delta_star[::-1]), outer_trace=list(result.outer_trace),
        verification=result.verification, converged=bool(result.converged),
        certified=bool(result.certified), config=dict(config or {}),
        refinement=list(result.refinement), eps_tol1=result.eps_tol1,
        g_star=result.g_star,
        kernel_vector=np.asarray(result.kernel_vector) if kernel else None,
        side=result.side.value if kernel else None, timing=timing)


def save_report(path, report: ReportDocument):
    Path(path).write_text(report.dumps())


def load_report(path) -> ReportDocument:
    return ReportDocument.from_dict(_read_json(path))


# -- trace CSV ----------------------------------------------------------------

def _g17(x):
    return format(float(x), ".17g")


def write_trace(rows: Iterable[TraceRow], path):
    """CSV with header ``k,eps,g,grad_norm,branch,inner_steps``; floats to 17 digits."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(TRACE_HEADER)
        for r in rows:
            w.writerow([r.k, _g17(r.eps), _g17(r.g), _g17(r.grad_norm), r.branch,
                        r.inner_steps])


def read_trace(path) -> List[TraceRow]:
    with open(path, newline="") as fh:
        rd = csv.DictReader(fh)
        if tuple(rd.fieldnames or ()) != TRACE_HEADER:
            raise DocumentError(str(path), f"unexpected header {rd.fieldnames}")
        return [_row_in(r) for r in rd]
