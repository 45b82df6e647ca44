"""Inequality reports, constant estimates, and deterministic serialization.

JSON output is canonical: sorted keys, fixed separators, floats through
repr (shortest round-trip form), so identical runs are byte-identical.
CSV floats are printed with 17 significant digits.
"""

import dataclasses
import hashlib
import json

import numpy as np

DEFAULT_ABS_TOL = 1e-9
DEFAULT_REL_TOL = 1e-9


@dataclasses.dataclass
class InequalityReport:
    """Record of a single checked inequality lhs <= rhs.

    slack = rhs - lhs; passes when slack >= -(abs_tol + rel_tol*|rhs|).
    """

    name: str
    lhs: float
    rhs: float
    slack: float
    passed: bool
    abs_tol: float
    rel_tol: float
    witness: dict = dataclasses.field(default_factory=dict)

    def as_dict(self):
        return {
            "name": self.name,
            "lhs": self.lhs,
            "rhs": self.rhs,
            "slack": self.slack,
            "pass": self.passed,
            "abs_tol": self.abs_tol,
            "rel_tol": self.rel_tol,
            "witness": self.witness,
        }


def make_report(name, lhs, rhs, abs_tol=DEFAULT_ABS_TOL, rel_tol=DEFAULT_REL_TOL,
                witness=None):
    lhs = float(lhs)
    rhs = float(rhs)
    slack = rhs - lhs
    passed = bool(slack >= -(abs_tol + rel_tol * abs(rhs)))
    return InequalityReport(name, lhs, rhs, slack, passed, abs_tol, rel_tol,
                            witness or {})


@dataclasses.dataclass
class ConstantEstimate:
    """Sampled extremum of an entropy ratio with its certificate state."""

    value: float
    n_samples: int
    argmin_state: np.ndarray
    method: str
    ratios: list = dataclasses.field(default_factory=list)

    def as_dict(self, include_ratios=False):
        out = {
            "value": self.value,
            "n_samples": self.n_samples,
            "method": self.method,
            "argmin_state": encode_complex_matrix(self.argmin_state),
        }
        if include_ratios:
            out["ratios"] = [float(r) for r in self.ratios]
        return out


def encode_complex_matrix(A):
    """Nested [re, im] lists, the project-wide matrix wire format."""
    A = np.asarray(A, dtype=complex)
    return [[[float(x.real), float(x.imag)] for x in row] for row in A]


def decode_complex_matrix(rows):
    return np.array([[complex(re, im) for re, im in row] for row in rows])


def _json_default(obj):
    if isinstance(obj, np.ndarray):
        if np.iscomplexobj(obj):
            return encode_complex_matrix(np.atleast_2d(obj))
        return obj.tolist()
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if dataclasses.is_dataclass(obj):
        return dataclasses.asdict(obj)
    raise TypeError(f"not JSON-serializable: {type(obj)}")


def canonical_json(obj):
    return json.dumps(obj, sort_keys=True, separators=(",", ":"),
                      default=_json_default)


def write_json(path, obj):
    with open(path, "w") as fh:
        fh.write(canonical_json(obj))
        fh.write("\n")


def model_hash(obj):
    """Stable sha256 of the canonical JSON form."""
    return hashlib.sha256(canonical_json(obj).encode()).hexdigest()


def format_float(x):
    return "%.17g" % float(x)


def write_csv(path, columns, rows, schema_version=1, comment=None):
    """CSV with a schema header comment line; floats at 17 sig digits."""
    lines = [f"# schema_version={schema_version}" + (f" {comment}" if comment else "")]
    lines.append(",".join(columns))
    for row in rows:
        cells = []
        for v in row:
            if isinstance(v, (float, np.floating)):
                cells.append(format_float(v))
            else:
                cells.append(str(v))
        lines.append(",".join(cells))
    with open(path, "w") as fh:
        fh.write("\n".join(lines))
        fh.write("\n")


def summarize_reports(reports):
    """Pass/fail counts and the worst slack, for manifests."""
    n_pass = sum(1 for r in reports if r.passed)
    worst = min((r.slack for r in reports), default=0.0)
    return {
        "n_total": len(reports),
        "n_pass": n_pass,
        "n_fail": len(reports) - n_pass,
        "worst_slack": float(worst),
    }
