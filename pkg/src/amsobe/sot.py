"""Stochastic orthogonal transformation (SOT) of gait templates.

A template is extended so that squared distance becomes an inner product,
secret constants are inserted at secret positions (positive ``a_i`` into
reference templates, negative ``b_i`` into identification templates), the
vector is scaled by a fresh positive ``alpha`` and rotated by a secret
orthogonal matrix ``M``. Since ``M`` preserves inner products::

    <enc_ref, enc_idf> = alpha_r * alpha_s * (D + sum a_i b_i)

so the server decides "match" from the sign of the score alone.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .template import (
    FeatureTemplate,
    Role,
    extend_identification,
    extend_reference,
)

__all__ = [
    "MAX_PARAMS",
    "Decision",
    "EncryptedTemplate",
    "SotKey",
    "cpa_advantage_bound",
    "decide",
    "encrypt_identification",
    "encrypt_reference",
    "haar_orthogonal",
    "keygen",
    "match_score",
]

MAX_PARAMS = 5
ALPHA_RANGE = (0.5, 2.0)


class Decision(str, Enum):
    MATCH = "match"
    NO_MATCH = "no_match"


@dataclass(frozen=True, eq=False)
class SotKey:
    """Secret SOT key.

    ``positions`` are 1-based indices into the final ``n + 2 + m`` vector.
    """

    M: np.ndarray
    positions: tuple[int, ...]
    a: np.ndarray
    b: np.ndarray
    n: int

    def __post_init__(self) -> None:
        M = np.array(self.M, dtype=np.float64)
        a = np.array(self.a, dtype=np.float64).reshape(-1)
        b = np.array(self.b, dtype=np.float64).reshape(-1)
        positions = tuple(int(p) for p in self.positions)
        m = len(positions)
        size = self.n + 2 + m
        if self.n < 1:
            raise ValueError("template length n must be positive")
        if not 1 <= m <= MAX_PARAMS:
            raise ValueError(f"parameter count m must be in [1, {MAX_PARAMS}], got {m}")
        if M.shape != (size, size):
            raise ValueError(f"M must be {size}x{size}, got {M.shape}")
        if a.size != m or b.size != m:
            raise ValueError("a and b must have one entry per position")
        if not np.all(a > 0) or not np.all(b < 0):
            raise ValueError("constants a must be positive and b negative")
        if any(p2 <= p1 for p1, p2 in zip(positions, positions[1:])):
            raise ValueError("positions must be strictly increasing")
        if positions[0] < 1 or positions[-1] > size:
            raise ValueError(f"positions must lie in [1, {size}]")
        for arr in (M, a, b):
            arr.setflags(write=False)
        object.__setattr__(self, "M", M)
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "positions", positions)

    @property
    def m(self) -> int:
        return len(self.positions)

    @property
    def size(self) -> int:
        return self.n + 2 + self.m

    @property
    def threshold(self) -> float:
        """Plaintext distance threshold ``-sum a_i b_i``."""
        return float(-(self.a @ self.b))

    def to_dict(self) -> dict:
        return {
            "version": 1,
            "kind": "sot-key",
            "n": self.n,
            "m": self.m,
            "positions": list(self.positions),
            "a": self.a.tolist(),
            "b": self.b.tolist(),
            "M": self.M.tolist(),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "SotKey":
        if data.get("kind", "sot-key") != "sot-key":
            raise ValueError(f"not a SOT key: kind={data.get('kind')!r}")
        key = cls(
            M=np.asarray(data["M"], dtype=np.float64),
            positions=tuple(data["positions"]),
            a=data["a"],
            b=data["b"],
            n=int(data["n"]),
        )
        if key.m != data["m"]:
            raise ValueError("declared m does not match positions")
        return key


@dataclass(frozen=True, eq=False)
class EncryptedTemplate:
    values: np.ndarray
    role: Role

    def __post_init__(self) -> None:
        arr = np.array(self.values, dtype=np.float64).reshape(-1)
        if not np.all(np.isfinite(arr)):
            raise ValueError("encrypted template contains non-finite values")
        arr.setflags(write=False)
        object.__setattr__(self, "values", arr)
        object.__setattr__(self, "role", Role(self.role))

    def to_dict(self) -> dict:
        return {
            "version": 1,
            "kind": "enc-template",
            "role": self.role.value,
            "values": self.values.tolist(),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "EncryptedTemplate":
        if data.get("kind") != "enc-template":
            raise ValueError(f"not an encrypted template: kind={data.get('kind')!r}")
        return cls(np.asarray(data["values"], dtype=np.float64), Role(data["role"]))


def haar_orthogonal(size: int, rng: np.random.Generator) -> np.ndarray:
    """Haar-distributed orthogonal matrix via QR of a Gaussian matrix."""
    q, r = np.linalg.qr(rng.standard_normal((size, size)))
    # fold the signs of diag(R) into Q so the distribution is uniform
    return q * np.sign(np.diag(r))


def keygen(
    n: int,
    m: int,
    rng: np.random.Generator,
    *,
    a=None,
    b=None,
    threshold: float | None = None,
) -> SotKey:
    """Generate a SOT key for length-``n`` templates with ``m`` inserted constants.

    ``a``/``b`` override the random constants. ``threshold`` builds a calibrated
    key with ``a_i = 1`` and ``b_i = -threshold / m`` so that a probe matches
    iff its plaintext distance is at most ``threshold``.
    """
    if n < 1:
        raise ValueError("template length n must be positive")
    if not 1 <= m <= MAX_PARAMS:
        raise ValueError(f"parameter count m must be in [1, {MAX_PARAMS}], got {m}")
    size = n + 2 + m
    M = haar_orthogonal(size, rng)
    positions = tuple(int(p) + 1 for p in np.sort(rng.choice(size, size=m, replace=False)))
    if threshold is not None:
        if not threshold > 0:
            raise ValueError("threshold must be positive")
        a = np.ones(m)
        b = np.full(m, -threshold / m)
    if a is None:
        a = rng.uniform(0.5, 2.0, size=m)
    if b is None:
        b = -rng.uniform(0.5, 2.0, size=m)
    return SotKey(M=M, positions=positions, a=np.broadcast_to(a, (m,)), b=np.broadcast_to(b, (m,)), n=n)


def _insert(extended: np.ndarray, positions: tuple[int, ...], constants: np.ndarray) -> np.ndarray:
    out = list(extended)
    # ascending insertion keeps every constant at its final 1-based index
    for pos, c in zip(positions, constants):
        out.insert(pos - 1, float(c))
    return np.asarray(out)


def _draw_alpha(alpha: float | None, rng: np.random.Generator | None) -> float:
    if alpha is None:
        if rng is None:
            rng = np.random.default_rng()
        return float(rng.uniform(*ALPHA_RANGE))
    if not alpha > 0 or not math.isfinite(alpha):
        raise ValueError("alpha must be a positive finite real")
    return float(alpha)


def _check(key: SotKey, t: FeatureTemplate, role: Role) -> None:
    if not isinstance(t, FeatureTemplate):
        raise TypeError("expected a FeatureTemplate")
    if t.role is not role:
        raise ValueError(f"expected a {role.value} template, got {t.role.value}")
    if t.n != key.n:
        raise ValueError(f"template length {t.n} does not match key length {key.n}")


def pre_rotation_reference(key: SotKey, t: FeatureTemplate) -> np.ndarray:
    """Extended reference vector with the ``a_i`` inserted, before scaling."""
    return _insert(extend_reference(t), key.positions, key.a)


def pre_rotation_identification(key: SotKey, t: FeatureTemplate) -> np.ndarray:
    """Extended identification vector with the ``b_i`` inserted, before scaling."""
    return _insert(extend_identification(t), key.positions, key.b)


def encrypt_reference(
    key: SotKey,
    t: FeatureTemplate,
    alpha: float | None = None,
    rng: np.random.Generator | None = None,
) -> EncryptedTemplate:
    """``alpha * t_ref' @ M``; a fresh ``alpha`` is drawn when not given."""
    _check(key, t, Role.REFERENCE)
    alpha = _draw_alpha(alpha, rng)
    return EncryptedTemplate(alpha * pre_rotation_reference(key, t) @ key.M, Role.REFERENCE)


def encrypt_identification(
    key: SotKey,
    t: FeatureTemplate,
    alpha: float | None = None,
    rng: np.random.Generator | None = None,
) -> EncryptedTemplate:
    _check(key, t, Role.IDENTIFICATION)
    alpha = _draw_alpha(alpha, rng)
    return EncryptedTemplate(alpha * pre_rotation_identification(key, t) @ key.M, Role.IDENTIFICATION)


def match_score(enc_ref: EncryptedTemplate, enc_idf: EncryptedTemplate) -> float:
    """Inner product of two encrypted templates, ``alpha_r alpha_s (D + sum a_i b_i)``."""
    if enc_ref.values.shape != enc_idf.values.shape:
        raise ValueError(
            f"length mismatch: {enc_ref.values.size} != {enc_idf.values.size}"
        )
    return float(enc_ref.values @ enc_idf.values)


def decide(score: float) -> Decision:
    """``MATCH`` iff ``score <= 0``."""
    if math.isnan(score):
        raise ValueError("score is NaN")
    return Decision.MATCH if score <= 0 else Decision.NO_MATCH


def cpa_advantage_bound(n: int, lam: float) -> float:
    """log2 of the distinguishing advantage ``2^(-2 lam - 1) / (n + 3)``."""
    if n < 1 or lam < 0:
        raise ValueError("need n >= 1 and lam >= 0")
    return -math.log2(n + 3) - 2 * lam - 1
