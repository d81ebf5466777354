"""Plan cost formulas.

Costs are in abstract units and only meaningful for ordering plans against
each other; they are not response-time predictions.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, fields
from typing import Mapping, Optional


class CostError(ValueError):
    pass


def _check(name: str, value: float) -> None:
    if not math.isfinite(value) or value < 0:
        raise CostError(f"{name} must be finite and >= 0, got {value!r}")


@dataclass(frozen=True)
class CostCoefficients:
    """Weights for CPU, I/O and connection cost plus a scalar multiplier.

    A weight left as None means the plan does not depend on that measurement
    and contributes nothing.
    """

    const: float = 1.0
    alpha: Optional[float] = None
    beta: Optional[float] = None
    gamma: Optional[float] = None

    def __post_init__(self):
        for f in fields(self):
            value = getattr(self, f.name)
            if value is not None:
                _check(f.name, value)

    def weights(self) -> tuple[float, float, float]:
        return tuple(0.0 if w is None else w for w in (self.alpha, self.beta, self.gamma))

    def scaled(self, factor: float) -> "CostCoefficients":
        a, b, g = self.weights()
        return CostCoefficients(self.const, a * factor, b * factor, g * factor)


@dataclass(frozen=True)
class CostVector:
    t_cpu: float = 0.0
    t_io: float = 0.0
    t_conn: float = 0.0

    def __post_init__(self):
        for f in fields(self):
            _check(f.name, getattr(self, f.name))

    def __add__(self, other: "CostVector") -> "CostVector":
        return CostVector(
            self.t_cpu + other.t_cpu, self.t_io + other.t_io, self.t_conn + other.t_conn
        )

    def scale(self, factor: float) -> "CostVector":
        return CostVector(self.t_cpu * factor, self.t_io * factor, self.t_conn * factor)

    def as_dict(self) -> dict:
        return {"t_cpu": self.t_cpu, "t_io": self.t_io, "t_conn": self.t_conn}


def plan_cost(coef: CostCoefficients, vec: CostVector) -> float:
    a, b, g = coef.weights()
    return coef.const * (a * vec.t_cpu + b * vec.t_io + g * vec.t_conn)


def total_cost(coef: CostCoefficients, vec: CostVector) -> float:
    a, b, g = coef.weights()
    return a * vec.t_cpu + b * vec.t_io + g * vec.t_conn


def average_time(total: float, join_count: int) -> float:
    if join_count < 1:
        raise CostError("join_count must be >= 1")
    return total / join_count


def ingestion_rate(record_count: int, avg_time: float) -> float:
    if record_count < 0:
        raise CostError("record_count must be >= 0")
    if not avg_time > 0:
        raise CostError("average time must be > 0")
    return record_count / avg_time


def load_cost_config(doc: Mapping) -> tuple[CostCoefficients, CostVector]:
    """Split a JSON config mapping into coefficients and a parameter vector.

    Recognised keys: const, alpha, beta, gamma, t_cpu, t_io, t_conn.
    """
    coef_keys = ("const", "alpha", "beta", "gamma")
    vec_keys = ("t_cpu", "t_io", "t_conn")
    unknown = set(doc) - set(coef_keys) - set(vec_keys)
    if unknown:
        raise CostError(f"unknown cost keys: {sorted(unknown)}")
    coef = CostCoefficients(**{k: doc[k] for k in coef_keys if k in doc})
    vec = CostVector(**{k: doc[k] for k in vec_keys if k in doc})
    return coef, vec
