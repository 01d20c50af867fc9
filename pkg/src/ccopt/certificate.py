"""Verdicts, certificates and the error types shared across modules."""

from dataclasses import dataclass, field
from enum import Enum

import numpy as np


class Verdict(str, Enum):
    PASS = "pass"
    FAIL = "fail"
    INDETERMINATE = "indeterminate"


class DimensionError(ValueError):
    pass


class UnsupportedAtomError(ValueError):
    """Raised when an atom kind lacks the requested closed form."""


class IndeterminateError(RuntimeError):
    """The iteration budget ran out before a solution or certificate appeared."""


@dataclass
class Certificate:
    verdict: Verdict
    witness: dict = field(default_factory=dict)
    residual: float = 0.0
    flags: tuple = ()
    message: str = ""

    @property
    def passed(self):
        return self.verdict is Verdict.PASS

    def __bool__(self):
        return self.passed

    def to_json(self):
        return {
            "verdict": self.verdict.value,
            "witness": {k: to_jsonable(v) for k, v in self.witness.items()},
            "residual": to_jsonable(self.residual),
            "flags": list(self.flags),
            "message": self.message,
        }


def to_jsonable(value):
    """Convert numpy values and extended reals into JSON-safe objects.

    Infinities become the strings "inf" / "-inf" so the output stays strict JSON.
    """
    if isinstance(value, np.ndarray):
        return [to_jsonable(v) for v in value.tolist()]
    if isinstance(value, (list, tuple)):
        return [to_jsonable(v) for v in value]
    if isinstance(value, dict):
        return {str(k): to_jsonable(v) for k, v in value.items()}
    if isinstance(value, Enum):
        return value.value
    if isinstance(value, (bool, np.bool_)):
        return bool(value)
    if isinstance(value, (int, np.integer)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        v = float(value)
        if np.isnan(v):
            return "nan"
        if np.isinf(v):
            return "inf" if v > 0 else "-inf"
        return v
    return value

