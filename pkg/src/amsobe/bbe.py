"""Biometric-based encryption (BBE) over a bilinear group.

Setup binds a quantized reference template ``w`` into the public parameters;
a private key is issued for an identification template ``z``. Decryption
returns the message exactly when ``<w, z> = 0 (mod p)``; otherwise the output
is the message blinded by ``e(g,g)^(s t <w,z>)``.

:func:`preprocess` turns a similar pair of real templates into integer
vectors that are orthogonal mod ``p``. :func:`seal_bytes` and
:func:`open_bytes` wrap the ``G_T`` message space for byte payloads.

All scalar algebra (``sum alpha_i z_i``, ``<w, z>``) is done mod ``p`` before
exponentiation.
"""

from __future__ import annotations

import hashlib
import hmac
import random
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import sot
from .pairing import BilinearGroup, GElem, GTElem, group_from_description
from .template import (
    DEFAULT_SCALE,
    FeatureTemplate,
    QuantizedTemplate,
    Role,
    biological_distance,
    extend_identification,
    extend_reference,
    quantize_vector,
)

__all__ = [
    "MAX_PAYLOAD",
    "BbeCiphertext",
    "BbeMasterKey",
    "BbePrivateKey",
    "BbePublicParams",
    "HybridCiphertext",
    "Preprocessed",
    "TagMismatchError",
    "decrypt",
    "encrypt",
    "keygen",
    "open_bytes",
    "orthogonalizing_slot",
    "preprocess",
    "reference_vector",
    "seal_bytes",
    "setup",
]

MAX_PAYLOAD = 2**20


class TagMismatchError(ValueError):
    """Integrity tag did not verify; the recovered session element was wrong."""


@dataclass(frozen=True)
class BbeMasterKey:
    alpha: tuple[int, ...]
    beta: int

    def to_dict(self) -> dict:
        return {
            "version": 1,
            "kind": "bbe-master-key",
            "alpha": [format(a, "x") for a in self.alpha],
            "beta": format(self.beta, "x"),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "BbeMasterKey":
        _expect(data, "bbe-master-key")
        return cls(tuple(int(a, 16) for a in data["alpha"]), int(data["beta"], 16))


@dataclass(frozen=True)
class BbePublicParams:
    group: BilinearGroup
    T: tuple[GElem, ...]
    g: tuple[GElem, ...]
    Y: GTElem

    @property
    def n(self) -> int:
        return len(self.T)

    @property
    def element_count(self) -> int:
        return len(self.T) + len(self.g) + 1

    def to_dict(self) -> dict:
        grp = self.group
        return {
            "version": 1,
            "kind": "bbe-public-params",
            "group": grp.describe(),
            "T": [grp.encode_g(x) for x in self.T],
            "g": [grp.encode_g(x) for x in self.g],
            "Y": grp.encode_gt(self.Y),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "BbePublicParams":
        _expect(data, "bbe-public-params")
        grp = group_from_description(data["group"])
        T = tuple(grp.decode_g(x) for x in data["T"])
        g = tuple(grp.decode_g(x) for x in data["g"])
        if len(T) != len(g):
            raise ValueError("T and g must have equal length")
        return cls(grp, T, g, grp.decode_gt(data["Y"]))


@dataclass(frozen=True)
class BbePrivateKey:
    sk1: GElem
    sk2: GElem

    element_count = 2

    def to_dict(self, group: BilinearGroup) -> dict:
        return {
            "version": 1,
            "kind": "bbe-private-key",
            "group": group.describe(),
            "sk1": group.encode_g(self.sk1),
            "sk2": group.encode_g(self.sk2),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "BbePrivateKey":
        _expect(data, "bbe-private-key")
        grp = group_from_description(data["group"])
        return cls(grp.decode_g(data["sk1"]), grp.decode_g(data["sk2"]))


@dataclass(frozen=True)
class BbeCiphertext:
    c_msg: GTElem
    c0: GElem
    c: tuple[GElem, ...]

    @property
    def element_count(self) -> int:
        return len(self.c) + 2

    def to_dict(self, group: BilinearGroup) -> dict:
        return {
            "version": 1,
            "kind": "bbe-ciphertext",
            "group": group.describe(),
            "C_I": group.encode_gt(self.c_msg),
            "C_0": group.encode_g(self.c0),
            "C": [group.encode_g(x) for x in self.c],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "BbeCiphertext":
        _expect(data, "bbe-ciphertext")
        grp = group_from_description(data["group"])
        return cls(
            grp.decode_gt(data["C_I"]),
            grp.decode_g(data["C_0"]),
            tuple(grp.decode_g(x) for x in data["C"]),
        )


def _expect(data: dict, kind: str) -> None:
    if data.get("kind") != kind:
        raise ValueError(f"expected kind {kind!r}, got {data.get('kind')!r}")


def _residues(template: QuantizedTemplate | Sequence[int], group: BilinearGroup) -> tuple[int, ...]:
    if isinstance(template, QuantizedTemplate):
        if template.prime != group.p:
            raise ValueError("template prime does not match the group order")
        return template.values
    values = tuple(int(v) for v in template)
    if any(not 0 <= v < group.p for v in values):
        raise ValueError("template entries must lie in [0, p)")
    return values


def _rng(rng: random.Random | None) -> random.Random:
    return rng if rng is not None else random.SystemRandom()


def setup(
    w: QuantizedTemplate | Sequence[int],
    group: BilinearGroup,
    rng: random.Random | None = None,
    *,
    alpha: Sequence[int] | None = None,
    beta: int | None = None,
) -> tuple[BbePublicParams, BbeMasterKey]:
    """Publish ``T_i = g^w_i``, ``g_i = g^alpha_i`` and ``Y = e(g,g)^beta``.

    ``alpha`` and ``beta`` are test hooks; by default they are drawn from ``rng``.
    """
    w = _residues(w, group)
    if not w:
        raise ValueError("template must be non-empty")
    rng = _rng(rng)
    p = group.p
    if alpha is None:
        alpha = tuple(group.random_scalar(rng) for _ in w)
    else:
        alpha = tuple(int(a) % p for a in alpha)
        if len(alpha) != len(w):
            raise ValueError("alpha length must match template length")
    beta = group.random_scalar(rng) if beta is None else int(beta) % p
    pp = BbePublicParams(
        group=group,
        T=tuple(group.g_exp(x) for x in w),
        g=tuple(group.g_exp(a) for a in alpha),
        Y=group.gt_exp(beta),
    )
    return pp, BbeMasterKey(alpha, beta)


def keygen(
    msk: BbeMasterKey,
    z: QuantizedTemplate | Sequence[int],
    group: BilinearGroup,
    rng: random.Random | None = None,
    *,
    t: int | None = None,
) -> BbePrivateKey:
    """``sk1 = g^(beta + t sum alpha_i z_i)``, ``sk2 = g^t``."""
    z = _residues(z, group)
    if len(z) != len(msk.alpha):
        raise ValueError(f"template length {len(z)} does not match master key length {len(msk.alpha)}")
    p = group.p
    t = group.random_scalar(_rng(rng)) if t is None else int(t) % p
    weighted = sum(a * zi for a, zi in zip(msk.alpha, z)) % p
    return BbePrivateKey(sk1=group.g_exp((msk.beta + t * weighted) % p), sk2=group.g_exp(t))


def encrypt(
    pp: BbePublicParams,
    message: GTElem,
    rng: random.Random | None = None,
    *,
    r: int | None = None,
    s: int | None = None,
) -> BbeCiphertext:
    """``(Y^r I, g^r, {g_i^r T_i^s})``."""
    group = pp.group
    if not isinstance(message, GTElem):
        raise TypeError("message must be a G_T element")
    rng = _rng(rng)
    r = group.random_scalar(rng) if r is None else int(r) % group.p
    s = group.random_scalar(rng) if s is None else int(s) % group.p
    c = tuple(group.g_mul(group.g_pow(gi, r), group.g_pow(ti, s)) for gi, ti in zip(pp.g, pp.T))
    return BbeCiphertext(
        c_msg=group.gt_mul(group.gt_pow(pp.Y, r), message),
        c0=group.g_exp(r),
        c=c,
    )


def decrypt(
    sk: BbePrivateKey,
    ct: BbeCiphertext,
    z: QuantizedTemplate | Sequence[int],
    group: BilinearGroup,
) -> GTElem:
    """``C_I * e(sk1, C_0)^-1 * e(sk2, prod C_i^z_i)``."""
    z = _residues(z, group)
    if len(z) != len(ct.c):
        raise ValueError(f"template length {len(z)} does not match ciphertext length {len(ct.c)}")
    e0 = group.pair(sk.sk2, group.g_multi_pow(ct.c, z))
    e1 = group.pair(sk.sk1, ct.c0)
    return group.gt_mul(group.gt_mul(ct.c_msg, group.gt_inv(e1)), e0)


# -- preprocessing ---------------------------------------------------------


def orthogonalizing_slot(partial_product: int, a: int, p: int) -> int:
    """Residue ``x`` with ``partial_product + a * x = 0 (mod p)``."""
    if a % p == 0:
        raise ValueError("a is not invertible mod p")
    return -partial_product * pow(a, -1, p) % p


@dataclass(frozen=True)
class Preprocessed:
    """Outcome of preprocessing; ``w_ext``/``z_ext`` are ``None`` on rejection."""

    accepted: bool
    distance: float
    d: float
    w_ext: QuantizedTemplate | None = None
    z_ext: QuantizedTemplate | None = None


def reference_vector(
    w: FeatureTemplate, key: sot.SotKey, p: int, *, scale: int = DEFAULT_SCALE
) -> QuantizedTemplate:
    """Quantized ``(w, 1, |w|^2, a)``: the vector :func:`setup` binds.

    Depends only on ``w`` and the key, so Setup can run before any probe exists.
    """
    w = w.with_role(Role.REFERENCE)
    if w.n != key.n:
        raise ValueError(f"template length {w.n} does not match key length {key.n}")
    values = quantize_vector(np.concatenate([extend_reference(w), [float(key.a[0])]]), scale, p)
    return QuantizedTemplate(values, scale, p)


def preprocess(
    w: FeatureTemplate,
    z: FeatureTemplate,
    key: sot.SotKey,
    p: int,
    *,
    scale: int = DEFAULT_SCALE,
    rng: np.random.Generator | None = None,
) -> Preprocessed:
    """Make a similar template pair orthogonal mod ``p``.

    Similarity is decided on the real-valued SOT path with ``key``. On accept,
    ``w`` is extended as ``(w, 1, |w|^2, a)`` and ``z`` as
    ``(-2z, |z|^2, 1, x)`` where ``a = key.a[0]`` and ``x`` is chosen after
    quantization so that the integer inner product vanishes mod ``p``. The
    real-valued counterpart of ``x`` is ``-D / a``.
    """
    w = w.with_role(Role.REFERENCE)
    z = z.with_role(Role.IDENTIFICATION)
    if w.n != z.n:
        raise ValueError(f"length mismatch: {w.n} != {z.n}")
    rng = rng if rng is not None else np.random.default_rng()
    score = sot.match_score(sot.encrypt_reference(key, w, rng=rng), sot.encrypt_identification(key, z, rng=rng))
    distance = biological_distance(w, z)
    d = distance + float(key.a @ key.b)
    if sot.decide(score) is not sot.Decision.MATCH:
        return Preprocessed(False, distance, d)

    w_q = reference_vector(w, key, p, scale=scale)
    w_vec = w_q.values
    z_head = quantize_vector(extend_identification(z), scale, p)
    a_q = w_vec[-1]
    partial = sum(x * y for x, y in zip(w_vec[:-1], z_head)) % p
    z_vec = z_head + (orthogonalizing_slot(partial, a_q, p),)
    return Preprocessed(
        True,
        distance,
        d,
        w_q,
        QuantizedTemplate(z_vec, scale, p),
    )


# -- byte payloads -----------------------------------------------------------


@dataclass(frozen=True)
class HybridCiphertext:
    header: BbeCiphertext
    body: bytes
    tag: bytes

    def to_dict(self, group: BilinearGroup) -> dict:
        return {
            "version": 1,
            "kind": "bbe-hybrid",
            "header": self.header.to_dict(group),
            "body": self.body.hex(),
            "tag": self.tag.hex(),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "HybridCiphertext":
        _expect(data, "bbe-hybrid")
        return cls(
            BbeCiphertext.from_dict(data["header"]),
            bytes.fromhex(data["body"]),
            bytes.fromhex(data["tag"]),
        )


def _session_bytes(group: BilinearGroup, k: GTElem) -> bytes:
    return group.encode_gt(k).encode("ascii")


def _keystream(secret: bytes, length: int) -> bytes:
    return hashlib.shake_256(b"amsobe-stream\x00" + secret).digest(length)


def _xor(data: bytes, stream: bytes) -> bytes:
    return (int.from_bytes(data, "big") ^ int.from_bytes(stream, "big")).to_bytes(len(data), "big")


def _tag(secret: bytes, payload: bytes) -> bytes:
    return hashlib.sha256(secret + payload).digest()


def seal_bytes(pp: BbePublicParams, plaintext: bytes, rng: random.Random | None = None) -> HybridCiphertext:
    """Encrypt ``plaintext`` under a random ``G_T`` session element."""
    if len(plaintext) > MAX_PAYLOAD:
        raise ValueError(f"payload exceeds {MAX_PAYLOAD} bytes")
    group = pp.group
    rng = _rng(rng)
    session = group.gt_pow(pp.Y, group.random_scalar(rng))
    secret = _session_bytes(group, session)
    stream = _keystream(secret, len(plaintext))
    body = _xor(plaintext, stream)
    return HybridCiphertext(encrypt(pp, session, rng), body, _tag(secret, plaintext))


def open_bytes(
    sk: BbePrivateKey,
    ct: HybridCiphertext,
    z: QuantizedTemplate | Sequence[int],
    group: BilinearGroup,
) -> bytes:
    """Inverse of :func:`seal_bytes`; raises :class:`TagMismatchError` on failure."""
    secret = _session_bytes(group, decrypt(sk, ct.header, z, group))
    stream = _keystream(secret, len(ct.body))
    plaintext = _xor(ct.body, stream)
    if not hmac.compare_digest(_tag(secret, plaintext), ct.tag):
        raise TagMismatchError("integrity tag mismatch")
    return plaintext
