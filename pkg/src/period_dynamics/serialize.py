"""Text formats shared by the CLI: decimal strings for floats, exact
strings for rationals and radicals."""

from __future__ import annotations

import json
import re
from fractions import Fraction
from typing import Sequence

import numpy as np

from .exact import ExactVectors
from .lattice import LatticeError, QuadraticLattice
from .period import TwoPlane

_DECIMAL = re.compile(r"^[+-]?(\d+\.\d*|\.\d+|\d+)([eE][+-]?\d+)?$")
_RATIONAL = re.compile(r"^[+-]?\d+(/\d+)?$")


def fmt(x: float) -> str:
    """17 significant digits: round-trips every double."""
    return format(float(x), ".17g")


def parse_coordinate(text):
    """``"3"``, ``"-1/2"`` -> Fraction; ``"0.25"``, ``"1e-3"`` -> float;
    anything else (``"sqrt(2)/2"``) stays a symbolic string."""
    if isinstance(text, bool):
        raise LatticeError("booleans are not coordinates")
    if isinstance(text, int):
        return Fraction(text)
    if isinstance(text, float):
        return text
    if not isinstance(text, str):
        raise LatticeError(f"unsupported coordinate {text!r}")
    s = text.strip()
    if _RATIONAL.match(s):
        return Fraction(s)
    if _DECIMAL.match(s):
        return float(s)
    return s


def parse_vector(values: Sequence) -> list:
    if not isinstance(values, list):
        raise LatticeError("vector must be a JSON array")
    return [parse_coordinate(v) for v in values]


def plane_from_dict(lattice: QuadraticLattice, data: dict) -> TwoPlane:
    """Accepts ``{"re": [...], "im": [...]}`` (a period line) or
    ``{"basis": [[...], [...]]}`` (an oriented plane).  If every coordinate is
    exact the plane keeps an exact span."""
    if not isinstance(data, dict):
        raise LatticeError("period file must hold a JSON object")
    if "re" in data and "im" in data:
        a, b = parse_vector(data["re"]), parse_vector(data["im"])
    elif "basis" in data and isinstance(data["basis"], list) and len(data["basis"]) == 2:
        a, b = parse_vector(data["basis"][0]), parse_vector(data["basis"][1])
    else:
        raise LatticeError("period file needs 're'/'im' or a two-row 'basis'")
    if any(isinstance(x, float) for x in a + b):
        a = [float(x) if not isinstance(x, str) else _numeric(x) for x in a]
        b = [float(x) if not isinstance(x, str) else _numeric(x) for x in b]
    return TwoPlane.from_vectors(lattice, a, b)


def _numeric(text: str) -> float:
    ex = ExactVectors.parse([[text]])
    return ex.evaluate()[0][0]


def plane_to_dict(plane: TwoPlane) -> dict:
    out = {"basis": [[fmt(x) for x in row] for row in plane.basis]}
    if plane.exact is not None:
        out["exact_span"] = plane.exact.as_strings()
    return out


def load_json(path) -> dict:
    with open(path) as fh:
        try:
            return json.load(fh)
        except json.JSONDecodeError as err:
            raise LatticeError(f"malformed JSON: {err}") from None


def dump_json(data) -> str:
    return json.dumps(data, indent=2, sort_keys=True) + "\n"


def basis_array(plane: TwoPlane) -> np.ndarray:
    return plane.basis
