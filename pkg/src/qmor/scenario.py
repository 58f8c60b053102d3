"""Scenario files: a JSON description of a model, an interest set, an
initial state, a time grid, and optional reduction / error-correction
blocks.  Validation failures raise SchemaError naming the offending
field.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import jsonschema
import numpy as np

from .eom import ProductState
from .exceptions import SchemaError
from .pauli import LindbladModel, PauliPolynomial, PauliString

__all__ = ["Scenario", "load_scenario", "SCENARIO_SCHEMA", "bundled_scenarios"]

_PAULI_RE = "^[IXYZ]+$"

SCENARIO_SCHEMA = {
    "type": "object",
    "required": ["n_sites", "hamiltonian", "dissipators", "interest", "initial", "times"],
    "additionalProperties": False,
    "properties": {
        "n_sites": {"type": "integer", "minimum": 1, "maximum": 10},
        "hamiltonian": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["coeff", "pauli"],
                "additionalProperties": False,
                "properties": {
                    "coeff": {"type": "number"},
                    "pauli": {"type": "string", "pattern": _PAULI_RE},
                },
            },
        },
        "dissipators": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["rate", "op"],
                "additionalProperties": False,
                "properties": {
                    "rate": {"type": "number", "minimum": 0},
                    "op": {
                        "type": "array",
                        "minItems": 1,
                        "items": {
                            "type": "object",
                            "required": ["pauli"],
                            "additionalProperties": False,
                            "properties": {
                                "pauli": {"type": "string", "pattern": _PAULI_RE},
                                "re": {"type": "number"},
                                "im": {"type": "number"},
                            },
                        },
                    },
                },
            },
        },
        "interest": {
            "type": "array",
            "minItems": 1,
            "items": {"type": "string", "pattern": _PAULI_RE},
        },
        "initial": {
            "type": "object",
            "required": ["type"],
            "properties": {
                "type": {"enum": ["product", "amplitudes"]},
                "bloch": {
                    "type": "array",
                    "items": {
                        "type": "array",
                        "items": {"type": "number"},
                        "minItems": 3,
                        "maxItems": 3,
                    },
                },
                "re": {"type": "array", "items": {"type": "number"}},
                "im": {"type": "array", "items": {"type": "number"}},
            },
        },
        "times": {
            "type": "object",
            "required": ["t_end", "samples"],
            "additionalProperties": False,
            "properties": {
                "t_end": {"type": "number", "exclusiveMinimum": 0},
                "samples": {"type": "integer", "minimum": 2},
            },
        },
        "reduction": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "k": {"type": "integer", "minimum": 1},
                "tolerance": {"type": "number", "exclusiveMinimum": 0},
            },
        },
        "qec": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "code": {"enum": ["bitflip3"]},
                "levels": {"type": "integer", "minimum": 1, "maximum": 3},
                "model": {"enum": ["independent", "correlated"]},
                "gamma": {"type": "number", "minimum": 0},
                "eta_meas": {"type": "number", "minimum": 0, "maximum": 1},
                "eta_rec": {"type": "number", "minimum": 0, "maximum": 1},
                "dt": {"type": "number", "exclusiveMinimum": 0},
                "cycles": {"type": "integer", "minimum": 0},
                "initial_bloch": {
                    "type": "array",
                    "items": {"type": "number"},
                    "minItems": 3,
                    "maxItems": 3,
                },
            },
        },
    },
}


@dataclass(frozen=True)
class Scenario:
    n_sites: int
    model: LindbladModel
    interest: tuple[str, ...]
    initial: object                  # ProductState or complex amplitude array
    times: np.ndarray
    reduction_k: int | None
    qec: dict | None
    raw: dict

    @property
    def initial_is_product(self) -> bool:
        return isinstance(self.initial, ProductState)


def _pauli(field: str, letters: str, n_sites: int) -> PauliString:
    if len(letters) != n_sites:
        raise SchemaError(
            f"{field}: Pauli string {letters!r} has length {len(letters)}, "
            f"expected n_sites = {n_sites}"
        )
    return PauliString.from_letters(letters)


def parse_scenario(data: dict) -> Scenario:
    validator = jsonschema.Draft202012Validator(SCENARIO_SCHEMA)
    errors = sorted(validator.iter_errors(data), key=lambda e: list(e.absolute_path))
    if errors:
        e = errors[0]
        path = "/".join(str(p) for p in e.absolute_path) or "(root)"
        raise SchemaError(f"{path}: {e.message}")
    n = data["n_sites"]

    h_terms: dict[PauliString, complex] = {}
    for i, term in enumerate(data["hamiltonian"]):
        s = _pauli(f"hamiltonian/{i}/pauli", term["pauli"], n)
        h_terms[s] = h_terms.get(s, 0j) + term["coeff"]
    hamiltonian = PauliPolynomial(n, h_terms)

    dissipators = []
    for i, d in enumerate(data["dissipators"]):
        op_terms: dict[PauliString, complex] = {}
        for j, entry in enumerate(d["op"]):
            s = _pauli(f"dissipators/{i}/op/{j}/pauli", entry["pauli"], n)
            c = complex(entry.get("re", 0.0), entry.get("im", 0.0))
            op_terms[s] = op_terms.get(s, 0j) + c
        op = PauliPolynomial(n, op_terms)
        if not op:
            raise SchemaError(f"dissipators/{i}/op: collapse operator is zero")
        dissipators.append((d["rate"], op))
    model = LindbladModel(n, hamiltonian, tuple(dissipators))

    interest = []
    for i, s in enumerate(data["interest"]):
        interest.append(_pauli(f"interest/{i}", s, n).letters)

    init = data["initial"]
    if init["type"] == "product":
        if "bloch" not in init:
            raise SchemaError("initial/bloch: required for product states")
        if len(init["bloch"]) != n:
            raise SchemaError(
                f"initial/bloch: {len(init['bloch'])} site vectors, expected {n}"
            )
        for i, vec in enumerate(init["bloch"]):
            if sum(v * v for v in vec) > 1.0 + 1e-9:
                raise SchemaError(f"initial/bloch/{i}: Bloch norm exceeds 1")
        initial = ProductState(tuple(tuple(float(v) for v in vec) for vec in init["bloch"]))
    else:
        re = init.get("re")
        if re is None:
            raise SchemaError("initial/re: required for amplitude states")
        im = init.get("im", [0.0] * len(re))
        if len(im) != len(re):
            raise SchemaError("initial/im: length differs from initial/re")
        amps = np.asarray(re, dtype=float) + 1j * np.asarray(im, dtype=float)
        if amps.size != 1 << n:
            raise SchemaError(
                f"initial/re: {amps.size} amplitudes, expected {1 << n}"
            )
        norm = np.linalg.norm(amps)
        if abs(norm - 1.0) > 1e-9:
            raise SchemaError(f"initial/re: amplitude vector norm {norm:.9f} is not 1")
        initial = amps

    t = data["times"]
    times = np.linspace(0.0, float(t["t_end"]), int(t["samples"]))
    reduction_k = data.get("reduction", {}).get("k")
    return Scenario(
        n_sites=n,
        model=model,
        interest=tuple(interest),
        initial=initial,
        times=times,
        reduction_k=reduction_k,
        qec=data.get("qec"),
        raw=data,
    )


def load_scenario(path) -> Scenario:
    p = Path(path)
    try:
        data = json.loads(p.read_text())
    except FileNotFoundError:
        raise SchemaError(f"scenario file not found: {p}") from None
    except json.JSONDecodeError as exc:
        raise SchemaError(f"invalid JSON in {p}: {exc}") from None
    if not isinstance(data, dict):
        raise SchemaError("(root): scenario must be a JSON object")
    return parse_scenario(data)


def bundled_scenarios() -> dict[str, Path]:
    """Name -> path of the example scenarios shipped with the package."""
    root = Path(__file__).parent / "scenarios"
    return {p.stem: p for p in sorted(root.glob("*.json"))}
