"""Bilinear group contract and a transparent exponent-representation group.

:class:`BilinearGroup` fixes the operations the encryption scheme needs from a
pairing ``e: G x G -> G_T`` over groups of prime order ``p``.
:class:`TransparentGroup` realizes it by storing ``g^a`` as the residue ``a``
and ``e(g, g)^c`` as ``c``. It is exactly bilinear and deliberately NOT SECURE:
the discrete logarithm is the identity map. It exists so the scheme can be
checked bit-exactly and quickly.

A production instantiation over a pairing-friendly curve implements the same
abstract methods and can be passed wherever a :class:`BilinearGroup` is taken.
"""

from __future__ import annotations

import contextlib
import random
from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from typing import Iterator, Sequence

from sympy import isprime

__all__ = [
    "DEFAULT_PRIME",
    "BilinearGroup",
    "DbdhChallenge",
    "GElem",
    "GTElem",
    "OpCounter",
    "TransparentGroup",
    "dbdh_challenge",
    "group_from_description",
]

#: 2**64 - 59, the largest prime below 2**64
DEFAULT_PRIME = 18446744073709551557


@dataclass(frozen=True, slots=True)
class GElem:
    """Element of the source group ``G``."""

    value: int


@dataclass(frozen=True, slots=True)
class GTElem:
    """Element of the target group ``G_T``."""

    value: int


@dataclass
class OpCounter:
    """Tally of exponentiations in ``G`` and ``G_T`` and of pairings."""

    g_exp: int = 0
    gt_exp: int = 0
    pairings: int = 0

    def as_dict(self) -> dict[str, int]:
        return {"g_exp": self.g_exp, "gt_exp": self.gt_exp, "pairings": self.pairings}


class BilinearGroup(ABC):
    """Contract for ``(G, G_T, e, g, p)``.

    Scalars are Python integers reduced mod ``p``. Group law is written
    multiplicatively (``g_mul``), exponentiation is ``g_pow``.
    """

    name: str = "abstract"
    p: int

    def __init__(self) -> None:
        self._counter: OpCounter | None = None

    # -- accounting -------------------------------------------------------
    @contextlib.contextmanager
    def counting(self) -> Iterator[OpCounter]:
        """Count exponentiations and pairings issued inside the block."""
        previous = self._counter
        self._counter = counter = OpCounter()
        try:
            yield counter
        finally:
            self._counter = previous

    def _tick(self, kind: str) -> None:
        if self._counter is not None:
            setattr(self._counter, kind, getattr(self._counter, kind) + 1)

    # -- group operations -------------------------------------------------
    @property
    @abstractmethod
    def generator(self) -> GElem: ...

    @property
    @abstractmethod
    def g_identity(self) -> GElem: ...

    @property
    @abstractmethod
    def gt_identity(self) -> GTElem: ...

    @abstractmethod
    def g_pow(self, a: GElem, k: int) -> GElem: ...

    @abstractmethod
    def gt_pow(self, a: GTElem, k: int) -> GTElem: ...

    @abstractmethod
    def g_mul(self, a: GElem, b: GElem) -> GElem: ...

    @abstractmethod
    def gt_mul(self, a: GTElem, b: GTElem) -> GTElem: ...

    @abstractmethod
    def g_inv(self, a: GElem) -> GElem: ...

    @abstractmethod
    def gt_inv(self, a: GTElem) -> GTElem: ...

    @abstractmethod
    def pair(self, a: GElem, b: GElem) -> GTElem: ...

    @abstractmethod
    def encode_g(self, a: GElem) -> str: ...

    @abstractmethod
    def decode_g(self, text: str) -> GElem: ...

    @abstractmethod
    def encode_gt(self, a: GTElem) -> str: ...

    @abstractmethod
    def decode_gt(self, text: str) -> GTElem: ...

    # -- derived helpers --------------------------------------------------
    def g_exp(self, x: int) -> GElem:
        """``g^x``."""
        return self.g_pow(self.generator, x)

    def gt_exp(self, x: int) -> GTElem:
        """``e(g, g)^x``."""
        return self.gt_pow(self.gt_generator, x)

    @property
    def gt_generator(self) -> GTElem:
        return self.pair(self.generator, self.generator)

    def g_multi_pow(self, bases: Sequence[GElem], exps: Sequence[int]) -> GElem:
        """``prod bases[i] ** exps[i]``."""
        acc = self.g_identity
        for base, k in zip(bases, exps, strict=True):
            acc = self.g_mul(acc, self.g_pow(base, k))
        return acc

    def random_scalar(self, rng: random.Random) -> int:
        return rng.randrange(self.p)

    def describe(self) -> dict:
        return {"instantiation": self.name, "p": format(self.p, "x")}


class TransparentGroup(BilinearGroup):
    """Exponent-representation group of prime order ``p``. NOT SECURE.

    ``g^a`` is stored as ``a mod p`` and ``e(g,g)^c`` as ``c mod p``; group
    multiplication is residue addition and the pairing multiplies residues.

    >>> grp = TransparentGroup(7)
    >>> grp.pair(grp.g_exp(2), grp.g_exp(3)) == grp.gt_exp(6)
    True
    """

    name = "transparent"

    def __init__(self, p: int = DEFAULT_PRIME) -> None:
        super().__init__()
        if p < 2 or not isprime(p):
            raise ValueError(f"group order must be prime, got {p}")
        if p.bit_length() > 256:
            raise ValueError("group order is limited to 256 bits")
        self.p = p
        self._hex_width = (p.bit_length() + 3) // 4
        self._g = GElem(1)

    def __repr__(self) -> str:
        return f"TransparentGroup(p={self.p})"

    def __eq__(self, other: object) -> bool:
        return isinstance(other, TransparentGroup) and other.p == self.p

    def __hash__(self) -> int:
        return hash(("transparent", self.p))

    @property
    def generator(self) -> GElem:
        return self._g

    @property
    def g_identity(self) -> GElem:
        return GElem(0)

    @property
    def gt_identity(self) -> GTElem:
        return GTElem(0)

    def g_pow(self, a: GElem, k: int) -> GElem:
        self._tick("g_exp")
        return GElem(a.value * k % self.p)

    def gt_pow(self, a: GTElem, k: int) -> GTElem:
        self._tick("gt_exp")
        return GTElem(a.value * k % self.p)

    def g_mul(self, a: GElem, b: GElem) -> GElem:
        return GElem((a.value + b.value) % self.p)

    def gt_mul(self, a: GTElem, b: GTElem) -> GTElem:
        return GTElem((a.value + b.value) % self.p)

    def g_inv(self, a: GElem) -> GElem:
        return GElem(-a.value % self.p)

    def gt_inv(self, a: GTElem) -> GTElem:
        return GTElem(-a.value % self.p)

    def pair(self, a: GElem, b: GElem) -> GTElem:
        self._tick("pairings")
        return GTElem(a.value * b.value % self.p)

    # the generator of G_T is e(g, g) = residue 1; skip the pairing tick
    @property
    def gt_generator(self) -> GTElem:
        return GTElem(1)

    def _encode(self, value: int) -> str:
        return format(value, f"0{self._hex_width}x")

    def _decode(self, text: str) -> int:
        if len(text) != self._hex_width:
            raise ValueError(f"expected {self._hex_width} hex digits, got {len(text)}")
        value = int(text, 16)
        if value >= self.p:
            raise ValueError("encoded residue out of range")
        return value

    def encode_g(self, a: GElem) -> str:
        return self._encode(a.value)

    def decode_g(self, text: str) -> GElem:
        return GElem(self._decode(text))

    def encode_gt(self, a: GTElem) -> str:
        return self._encode(a.value)

    def decode_gt(self, text: str) -> GTElem:
        return GTElem(self._decode(text))


def group_from_description(desc: dict) -> BilinearGroup:
    """Rebuild a group from :meth:`BilinearGroup.describe` output."""
    name = desc.get("instantiation")
    if name != TransparentGroup.name:
        raise ValueError(f"unsupported group instantiation: {name!r}")
    return TransparentGroup(int(desc["p"], 16))


@dataclass(frozen=True)
class DbdhChallenge:
    g: GElem
    g1: GElem
    g2: GElem
    g3: GElem
    phi: GTElem
    # exponents are kept for fixture checks; a real challenger would not expose them
    exponents: tuple[int, int, int] = field(repr=False)
    real: bool = True


def dbdh_challenge(group: BilinearGroup, rng: random.Random, real: bool) -> DbdhChallenge:
    """Decision-BDH tuple: ``phi = e(g,g)^(x1 x2 x3)`` if ``real`` else uniform.

    Test fixture only; in the transparent group the problem is trivial.
    """
    x1, x2, x3 = (group.random_scalar(rng) for _ in range(3))
    if real:
        phi = group.gt_exp(x1 * x2 % group.p * x3 % group.p)
    else:
        phi = group.gt_exp(group.random_scalar(rng))
    return DbdhChallenge(
        g=group.generator,
        g1=group.g_exp(x1),
        g2=group.g_exp(x2),
        g3=group.g_exp(x3),
        phi=phi,
        exponents=(x1, x2, x3),
        real=real,
    )
