"""In-process simulation of the device, cloud and peer actors.

Actors exchange serialized JSON envelopes (the same formats the vault and
CLI use) over FIFO channels. Every flow returns a :class:`FlowTranscript`
recording each hop with a SHA-256 digest of the payload involved.

Flows:

* registration: device extracts and encrypts a reference template, the
  cloud stores it;
* identification: device encrypts a probe, the cloud matches it against the
  enrolled template and returns only the decision;
* message exchange: after identification passes, the receiving device
  preprocesses its templates, runs BBE setup and key generation, publishes
  the public parameters, and a peer seals a payload to it.

BBE setup and key generation both run on the receiving device; there is no
separate key authority.
"""

from __future__ import annotations

import hashlib
import json
import random
from collections import defaultdict, deque
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Iterator

import numpy as np

from . import bbe, sot
from .ablstm import AblstmNetwork, extract_template
from .pairing import BilinearGroup, TransparentGroup
from .signal import GaitSignal
from .template import FeatureTemplate, Role
from .vault import MemoryVault, NotFoundError, RecordKind, Vault, VaultRecord, match_in_vault

__all__ = [
    "Channel",
    "DeviceConfig",
    "FlowTranscript",
    "Outcome",
    "PeerConfig",
    "TranscriptEntry",
    "demo_scenario",
    "gating_violations",
    "privacy_violations",
    "run_identification",
    "run_message_exchange",
    "run_registration",
]

DEVICE, CLOUD, PEER = "device", "cloud", "peer"


class Outcome(str, Enum):
    ENROLLED = "enrolled"
    IDENTIFIED = "identified"
    REJECTED = "rejected"
    MESSAGE_DELIVERED = "message-delivered"
    MESSAGE_REFUSED = "message-refused"


def digest(payload: bytes) -> str:
    return hashlib.sha256(payload).hexdigest()


def envelope(data: dict) -> bytes:
    return json.dumps(data, sort_keys=True, separators=(",", ":")).encode("utf-8")


@dataclass(frozen=True)
class TranscriptEntry:
    actor: str
    kind: str
    digest: str
    outcome: str


@dataclass
class FlowTranscript:
    entries: list[TranscriptEntry] = field(default_factory=list)
    outcome: Outcome | None = None
    # plaintext delivered to the receiver in a message exchange; not serialized
    delivered: bytes | None = field(default=None, repr=False)

    def record(self, actor: str, kind: str, payload: bytes, outcome: str = "ok") -> None:
        self.entries.append(TranscriptEntry(actor, kind, digest(payload), outcome))

    def fail(self, actor: str, kind: str, exc: BaseException, outcome: Outcome) -> "FlowTranscript":
        message = f"{type(exc).__name__}: {exc}"
        self.entries.append(TranscriptEntry(actor, kind, digest(message.encode()), f"error: {message}"))
        self.outcome = outcome
        return self

    def extend(self, other: "FlowTranscript") -> None:
        self.entries.extend(other.entries)

    def to_dict(self) -> dict:
        return {
            "outcome": self.outcome.value if self.outcome else None,
            "entries": [
                {"actor": e.actor, "kind": e.kind, "digest": e.digest, "outcome": e.outcome}
                for e in self.entries
            ],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    def format_table(self) -> str:
        rows = [("#", "actor", "message", "digest", "outcome")]
        rows += [(str(i), e.actor, e.kind, e.digest[:16], e.outcome) for i, e in enumerate(self.entries, 1)]
        widths = [max(len(r[c]) for r in rows) for c in range(5)]
        lines = ["  ".join(cell.ljust(w) for cell, w in zip(row, widths)).rstrip() for row in rows]
        lines.append(f"outcome: {self.outcome.value if self.outcome else '-'}")
        return "\n".join(lines)


@dataclass(frozen=True)
class WireMessage:
    sender: str
    receiver: str
    kind: str
    payload: bytes


class Channel:
    """FIFO delivery per ``(sender, receiver)`` pair; keeps a log of the wire."""

    def __init__(self) -> None:
        self._queues: dict[tuple[str, str], deque[WireMessage]] = defaultdict(deque)
        self.wire: list[WireMessage] = []

    def send(self, sender: str, receiver: str, kind: str, payload: bytes) -> WireMessage:
        msg = WireMessage(sender, receiver, kind, payload)
        self._queues[(sender, receiver)].append(msg)
        self.wire.append(msg)
        return msg

    def receive(self, sender: str, receiver: str) -> WireMessage:
        queue = self._queues[(sender, receiver)]
        if not queue:
            raise LookupError(f"no message from {sender} to {receiver}")
        return queue.popleft()


@dataclass
class DeviceConfig:
    """A smart wearable device.

    The gait template comes either from ``template`` or from ``signal``
    through ``model``. ``reference`` is the device's locally retained enrolled
    template, needed only for BBE.
    """

    subject: str
    key: sot.SotKey
    template: FeatureTemplate | None = None
    signal: GaitSignal | None = None
    model: AblstmNetwork | None = None
    reference: FeatureTemplate | None = None
    seed: int = 0

    def rng(self, salt: int) -> np.random.Generator:
        return np.random.default_rng([self.seed, salt])

    def current_template(self, role: Role) -> tuple[FeatureTemplate, bool]:
        """Template for ``role`` and whether it was extracted from a signal."""
        if self.template is not None:
            return self.template.with_role(role), False
        if self.signal is None or self.model is None:
            raise ValueError("device needs a template, or a signal and a model")
        return extract_template(self.model, self.signal, role), True


@dataclass
class PeerConfig:
    name: str = PEER
    seed: int = 0


def _obtain(device: DeviceConfig, role: Role, ts: FlowTranscript) -> FeatureTemplate:
    template, extracted = device.current_template(role)
    if extracted:
        ts.record(DEVICE, "extract", b"extract:" + role.value.encode(), "ok")
    return template


def run_registration(
    device: DeviceConfig,
    vault: Vault,
    channel: Channel | None = None,
) -> FlowTranscript:
    """Encrypt the device's reference template and enroll it in the vault."""
    channel = channel if channel is not None else Channel()
    ts = FlowTranscript()
    try:
        template = _obtain(device, Role.REFERENCE, ts)
        enc = sot.encrypt_reference(device.key, template, rng=device.rng(1))
    except Exception as exc:  # noqa: BLE001 - every failure ends the flow in the transcript
        return ts.fail(DEVICE, "encrypt", exc, Outcome.REJECTED)
    payload = envelope(enc.to_dict())
    ts.record(DEVICE, "encrypt", payload)
    channel.send(DEVICE, CLOUD, "enroll", envelope({"subject": device.subject, "template": enc.to_dict()}))
    ts.record(DEVICE, "transmit", payload)

    msg = channel.receive(DEVICE, CLOUD)
    body = json.loads(msg.payload)
    stored = envelope(body["template"])
    try:
        vault.put(VaultRecord(body["subject"], RecordKind.ENC_REFERENCE, stored))
    except Exception as exc:  # noqa: BLE001
        return ts.fail(CLOUD, "store", exc, Outcome.REJECTED)
    ts.record(CLOUD, "store", stored, Outcome.ENROLLED.value)
    ts.outcome = Outcome.ENROLLED
    return ts


def run_identification(
    device: DeviceConfig,
    vault: Vault,
    subject: str | None = None,
    channel: Channel | None = None,
) -> FlowTranscript:
    """Probe the vault with the device's current template.

    An unenrolled subject raises :class:`~amsobe.vault.NotFoundError`; other
    failures end the flow as ``rejected`` with an error entry.
    """
    channel = channel if channel is not None else Channel()
    subject = subject if subject is not None else device.subject
    ts = FlowTranscript()
    try:
        template = _obtain(device, Role.IDENTIFICATION, ts)
        enc = sot.encrypt_identification(device.key, template, rng=device.rng(2))
    except Exception as exc:  # noqa: BLE001
        return ts.fail(DEVICE, "encrypt", exc, Outcome.REJECTED)
    payload = envelope(enc.to_dict())
    ts.record(DEVICE, "encrypt", payload)
    channel.send(DEVICE, CLOUD, "identify", envelope({"subject": subject, "template": enc.to_dict()}))
    ts.record(DEVICE, "transmit", payload)

    msg = channel.receive(DEVICE, CLOUD)
    body = json.loads(msg.payload)
    probe = sot.EncryptedTemplate.from_dict(body["template"])
    try:
        decision = match_in_vault(vault, body["subject"], probe)
    except NotFoundError:
        raise
    except Exception as exc:  # noqa: BLE001
        return ts.fail(CLOUD, "match", exc, Outcome.REJECTED)
    reply = envelope({"kind": "decision", "decision": decision.value})
    ts.record(CLOUD, "match", reply, decision.value)
    channel.send(CLOUD, DEVICE, "decision", reply)
    ts.record(CLOUD, "reply", reply)

    answer = json.loads(channel.receive(CLOUD, DEVICE).payload)["decision"]
    ts.outcome = Outcome.IDENTIFIED if answer == sot.Decision.MATCH.value else Outcome.REJECTED
    ts.record(DEVICE, "result", reply, ts.outcome.value)
    return ts


def _flip_byte(hybrid: dict) -> dict:
    body = bytearray(bytes.fromhex(hybrid["body"]))
    if body:
        body[0] ^= 0x01
    else:
        tag = bytearray(bytes.fromhex(hybrid["tag"]))
        tag[0] ^= 0x01
        return dict(hybrid, tag=tag.hex())
    return dict(hybrid, body=body.hex())


def run_message_exchange(
    sender: PeerConfig,
    receiver: DeviceConfig,
    vault: Vault,
    payload: bytes,
    *,
    group: BilinearGroup | None = None,
    channel: Channel | None = None,
    tamper: bool = False,
) -> FlowTranscript:
    """Identify the receiver, then deliver ``payload`` from ``sender`` under BBE.

    ``tamper`` flips one ciphertext byte in transit.
    """
    channel = channel if channel is not None else Channel()
    group = group if group is not None else TransparentGroup()
    ts = FlowTranscript()

    ident = run_identification(receiver, vault, channel=channel)
    ts.extend(ident)
    if ident.outcome is not Outcome.IDENTIFIED:
        ts.outcome = Outcome.MESSAGE_REFUSED
        return ts

    if receiver.reference is None:
        return ts.fail(DEVICE, "bbe-preprocess", ValueError("device keeps no reference template"), Outcome.MESSAGE_REFUSED)
    probe, _ = receiver.current_template(Role.IDENTIFICATION)
    pre = bbe.preprocess(receiver.reference, probe, receiver.key, group.p, rng=receiver.rng(3))
    if not pre.accepted:
        ts.record(DEVICE, "bbe-preprocess", b"rejected", "rejected")
        ts.outcome = Outcome.MESSAGE_REFUSED
        return ts
    ts.record(DEVICE, "bbe-preprocess", envelope(pre.z_ext.to_dict()), "accepted")

    bbe_rng = random.Random(f"{receiver.seed}:bbe")
    pp, msk = bbe.setup(pre.w_ext, group, bbe_rng)
    pp_payload = envelope(pp.to_dict())
    ts.record(DEVICE, "bbe-setup", pp_payload)
    sk = bbe.keygen(msk, pre.z_ext, group, bbe_rng)
    ts.record(DEVICE, "bbe-keygen", envelope(sk.to_dict(group)))

    channel.send(DEVICE, CLOUD, "publish-params", envelope({"subject": receiver.subject, "params": pp.to_dict()}))
    ts.record(DEVICE, "bbe-publish", pp_payload)
    body = json.loads(channel.receive(DEVICE, CLOUD).payload)
    vault.put(VaultRecord(body["subject"], RecordKind.BBE_PUBLIC_PARAMS, envelope(body["params"])))
    ts.record(CLOUD, "bbe-store-params", pp_payload)

    fetched = vault.get_latest(receiver.subject, RecordKind.BBE_PUBLIC_PARAMS).payload
    channel.send(CLOUD, sender.name, "params", fetched)
    ts.record(CLOUD, "bbe-deliver-params", fetched)

    peer_pp = bbe.BbePublicParams.from_dict(json.loads(channel.receive(CLOUD, sender.name).payload))
    sealed = bbe.seal_bytes(peer_pp, payload, random.Random(f"{sender.seed}:seal"))
    sealed_payload = envelope(sealed.to_dict(peer_pp.group))
    ts.record(sender.name, "bbe-seal", sealed_payload)
    channel.send(sender.name, CLOUD, "ciphertext", envelope({"subject": receiver.subject, "ciphertext": sealed.to_dict(peer_pp.group)}))
    ts.record(sender.name, "bbe-transmit", sealed_payload)

    body = json.loads(channel.receive(sender.name, CLOUD).payload)
    stored = envelope(body["ciphertext"])
    vault.put(VaultRecord(body["subject"], RecordKind.BBE_CIPHERTEXT, stored))
    ts.record(CLOUD, "bbe-store-ciphertext", stored)
    relay = json.loads(vault.get_latest(receiver.subject, RecordKind.BBE_CIPHERTEXT).payload)
    if tamper:
        relay = _flip_byte(relay)
    channel.send(CLOUD, DEVICE, "ciphertext", envelope(relay))
    ts.record(CLOUD, "bbe-deliver-ciphertext", envelope(relay))

    received = bbe.HybridCiphertext.from_dict(json.loads(channel.receive(CLOUD, DEVICE).payload))
    try:
        plaintext = bbe.open_bytes(sk, received, pre.z_ext, group)
    except bbe.TagMismatchError:
        ts.entries.append(TranscriptEntry(DEVICE, "bbe-open", digest(envelope(relay)), "tag-mismatch"))
        ts.outcome = Outcome.MESSAGE_REFUSED
        return ts
    ts.record(DEVICE, "bbe-open", envelope(relay), "ok")
    ts.outcome = Outcome.MESSAGE_DELIVERED
    ts.delivered = plaintext
    return ts


# -- invariant checks -----------------------------------------------------------


def _floats(node) -> Iterator[float]:
    if isinstance(node, float):
        yield node
    elif isinstance(node, dict):
        for v in node.values():
            yield from _floats(v)
    elif isinstance(node, list):
        for v in node:
            yield from _floats(v)


def _keys(node) -> Iterator[str]:
    if isinstance(node, dict):
        for k, v in node.items():
            yield k
            yield from _keys(v)
    elif isinstance(node, list):
        for v in node:
            yield from _keys(v)


def privacy_violations(
    wire: Iterable[WireMessage],
    templates: Iterable[FeatureTemplate] = (),
    keys: Iterable[sot.SotKey] = (),
) -> list[str]:
    """Describe every cross-actor message that carries plaintext or key material.

    A message leaks if it contains a plaintext-template or key envelope, a
    ``positions``/``M`` field, or any float equal to a template value or key
    entry.
    """
    secret: set[float] = set()
    for t in templates:
        secret.update(float(v) for v in t.values)
    for k in keys:
        secret.update(float(v) for v in k.M.ravel())
        secret.update(float(v) for v in k.a)
        secret.update(float(v) for v in k.b)
    problems = []
    for i, msg in enumerate(wire):
        data = json.loads(msg.payload)
        kinds = {data.get("kind")} if isinstance(data, dict) else set()
        kinds |= {v.get("kind") for v in (data.values() if isinstance(data, dict) else []) if isinstance(v, dict)}
        if kinds & {"template", "sot-key", "quantized-template", "bbe-master-key", "bbe-private-key"}:
            problems.append(f"message {i} ({msg.kind}) carries a secret envelope")
        if {"positions", "M"} & set(_keys(data)):
            problems.append(f"message {i} ({msg.kind}) carries SOT key fields")
        leaked = [x for x in _floats(data) if x in secret]
        if leaked:
            problems.append(f"message {i} ({msg.kind}) carries {len(leaked)} secret value(s)")
    return problems


def gating_violations(ts: FlowTranscript) -> list[str]:
    """BBE entries that are not preceded by a passed identification."""
    passed = False
    problems = []
    for i, e in enumerate(ts.entries):
        if e.outcome == Outcome.IDENTIFIED.value:
            passed = True
        if e.kind.startswith("bbe-") and not passed:
            problems.append(f"entry {i} ({e.kind}) precedes identification")
    return problems


# -- canned scenarios for the CLI demo ------------------------------------------


@dataclass
class DemoRun:
    transcripts: list[FlowTranscript]
    channel: Channel
    templates: list[FeatureTemplate]
    key: sot.SotKey

    @property
    def outcome(self) -> Outcome:
        return self.transcripts[-1].outcome


def demo_scenario(
    scenario: str,
    seed: int = 0,
    *,
    n: int = 600,
    m: int = 3,
    threshold: float = 0.1,
    impostor: bool = False,
    payload: bytes = b"hello",
    vault: Vault | None = None,
) -> DemoRun:
    """Run ``register``, ``identify`` or ``exchange`` on synthetic templates.

    Templates are uniform on ``[-1, 1]^n / sqrt(n)``; a genuine probe adds
    small Gaussian noise, an impostor probe is an unrelated template.
    """
    if scenario not in ("register", "identify", "exchange"):
        raise ValueError(f"unknown scenario {scenario!r}")
    rng = np.random.default_rng(seed)
    vault = vault if vault is not None else MemoryVault()
    channel = Channel()
    key = sot.keygen(n, m, rng, threshold=threshold)
    scale = 1.0 / np.sqrt(n)
    reference = FeatureTemplate(rng.uniform(-1, 1, n) * scale, Role.REFERENCE)
    if impostor:
        probe_values = rng.uniform(-1, 1, n) * scale
    else:
        probe_values = reference.values + rng.normal(0, 0.002, n) * scale
    probe = FeatureTemplate(probe_values, Role.IDENTIFICATION)
    subject = f"subject-{seed}"

    enrolling = DeviceConfig(subject, key, template=reference, seed=seed)
    runs = [run_registration(enrolling, vault, channel)]
    probing = DeviceConfig(subject, key, template=probe, reference=reference, seed=seed + 1)
    if scenario == "identify":
        runs.append(run_identification(probing, vault, channel=channel))
    elif scenario == "exchange":
        runs.append(run_message_exchange(PeerConfig(seed=seed + 2), probing, vault, payload, channel=channel))
    return DemoRun(runs, channel, [reference, probe], key)
