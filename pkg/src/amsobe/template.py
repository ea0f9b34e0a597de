"""Feature templates, distance linearization and integer quantization.

The squared Euclidean distance between two templates is linear in suitably
extended vectors::

    x' = (x_1, ..., x_n, 1, sum x_i^2)
    y' = (-2 y_1, ..., -2 y_n, sum y_i^2, 1)
    <x', y'> = sum (x_i - y_i)^2

Matching thresholds used elsewhere assume normalized features. Nothing here
clamps the distance to ``[0, 1]``.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Sequence

import numpy as np

from .pairing import DEFAULT_PRIME

__all__ = [
    "DEFAULT_SCALE",
    "FeatureTemplate",
    "QuantizedTemplate",
    "Role",
    "biological_distance",
    "dequantize",
    "extend_identification",
    "extend_reference",
    "quantize",
    "quantize_vector",
]

DEFAULT_SCALE = 2**16


class Role(str, Enum):
    REFERENCE = "reference"
    IDENTIFICATION = "identification"


def _as_vector(values, name: str = "template") -> np.ndarray:
    arr = np.asarray(values, dtype=np.float64)
    if arr.ndim != 1 or arr.size == 0:
        raise ValueError(f"{name} must be a non-empty 1-D vector")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite values")
    return arr


@dataclass(frozen=True, eq=False)
class FeatureTemplate:
    """Real-valued gait feature vector tagged with its role."""

    values: np.ndarray
    role: Role = Role.REFERENCE

    def __post_init__(self) -> None:
        arr = _as_vector(self.values).copy()
        arr.setflags(write=False)
        object.__setattr__(self, "values", arr)
        object.__setattr__(self, "role", Role(self.role))

    @property
    def n(self) -> int:
        return self.values.size

    def with_role(self, role: Role | str) -> "FeatureTemplate":
        return FeatureTemplate(self.values, Role(role))

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, FeatureTemplate):
            return NotImplemented
        return self.role == other.role and np.array_equal(self.values, other.values)

    def to_dict(self) -> dict:
        return {
            "version": 1,
            "kind": "template",
            "role": self.role.value,
            "n": self.n,
            "values": self.values.tolist(),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "FeatureTemplate":
        if data.get("kind") != "template":
            raise ValueError(f"not a template envelope: kind={data.get('kind')!r}")
        values = data["values"]
        if len(values) != data["n"]:
            raise ValueError("template length does not match declared n")
        return cls(np.asarray(values, dtype=np.float64), Role(data["role"]))


@dataclass(frozen=True)
class QuantizedTemplate:
    """Integer template with residues in ``[0, prime)``."""

    values: tuple[int, ...]
    scale: int
    prime: int

    def __post_init__(self) -> None:
        object.__setattr__(self, "values", tuple(int(v) for v in self.values))
        if not _is_power_of_two(self.scale):
            raise ValueError(f"scale must be a power of two, got {self.scale}")
        if any(not 0 <= v < self.prime for v in self.values):
            raise ValueError("quantized values must lie in [0, prime)")

    @property
    def n(self) -> int:
        return len(self.values)

    def to_dict(self) -> dict:
        return {
            "version": 1,
            "kind": "quantized-template",
            "scale": self.scale,
            "prime": format(self.prime, "x"),
            "values": [format(v, "x") for v in self.values],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "QuantizedTemplate":
        if data.get("kind") != "quantized-template":
            raise ValueError(f"not a quantized template: kind={data.get('kind')!r}")
        return cls(
            tuple(int(v, 16) for v in data["values"]),
            int(data["scale"]),
            int(data["prime"], 16),
        )


def _is_power_of_two(k: int) -> bool:
    return isinstance(k, (int, np.integer)) and k > 0 and (int(k) & (int(k) - 1)) == 0


def _values(t) -> np.ndarray:
    if isinstance(t, FeatureTemplate):
        return t.values
    return _as_vector(t)


def biological_distance(x, y) -> float:
    """Squared Euclidean distance ``sum (x_i - y_i)^2``."""
    x, y = _values(x), _values(y)
    if x.shape != y.shape:
        raise ValueError(f"length mismatch: {x.size} != {y.size}")
    diff = x - y
    return float(diff @ diff)


def extend_reference(x) -> np.ndarray:
    """``(x_1, ..., x_n, 1, sum x_i^2)``."""
    x = _values(x)
    return np.concatenate([x, [1.0, float(x @ x)]])


def extend_identification(y) -> np.ndarray:
    """``(-2 y_1, ..., -2 y_n, sum y_i^2, 1)``."""
    y = _values(y)
    return np.concatenate([-2.0 * y, [float(y @ y), 1.0]])


def quantize_vector(values: Sequence[float], scale: int, prime: int) -> tuple[int, ...]:
    """Round ``values * scale`` to integers and reduce them mod ``prime``."""
    if not _is_power_of_two(scale):
        raise ValueError(f"scale must be a power of two, got {scale}")
    arr = _as_vector(values, "values")
    if scale * float(np.max(np.abs(arr))) >= prime / 2:
        raise OverflowError("scale * max|value| must stay below prime / 2")
    # floor(v*scale + 0.5) rounds halves upward, independent of numpy's banker's rounding
    return tuple(int(np.floor(v * scale + 0.5)) % prime for v in arr)


def quantize(t: FeatureTemplate, scale: int = DEFAULT_SCALE, prime: int | None = None) -> QuantizedTemplate:
    """Map a real template into ``Z_prime^n``.

    ``prime`` defaults to the order of the default transparent group.
    """
    if prime is None:
        prime = DEFAULT_PRIME
    return QuantizedTemplate(quantize_vector(_values(t), scale, prime), scale, prime)


def dequantize(q: QuantizedTemplate) -> np.ndarray:
    """Centered lift back to reals: residues above ``prime // 2`` are negative."""
    half = q.prime // 2
    lifted = [v - q.prime if v > half else v for v in q.values]
    return np.array(lifted, dtype=np.float64) / q.scale
