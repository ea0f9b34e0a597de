"""Cloud-side storage of encrypted templates and BBE material.

Records are append-only and versioned per ``(subject, kind)``; deletion writes
a tombstone. :class:`MemoryVault` keeps everything in memory, :class:`FileVault`
persists to a single log file with one length-prefixed JSON record per line::

    <byte length of json> <json>\\n

The vault only ever handles serialized ciphertexts. Matching runs on
encrypted templates and never sees a plaintext template or a SOT key.
"""

from __future__ import annotations

import base64
import fcntl
import json
import logging
import os
import threading
import time
from dataclasses import dataclass, replace
from enum import Enum
from pathlib import Path
from typing import Callable

from .sot import Decision, EncryptedTemplate, decide, match_score
from .template import Role

__all__ = [
    "FileVault",
    "MemoryVault",
    "NotFoundError",
    "RecordKind",
    "Vault",
    "VaultRecord",
    "match_in_vault",
    "score_in_vault",
]

logger = logging.getLogger(__name__)


class NotFoundError(KeyError):
    pass


class RecordKind(str, Enum):
    ENC_REFERENCE = "enc-reference-template"
    BBE_PUBLIC_PARAMS = "bbe-public-params"
    BBE_CIPHERTEXT = "bbe-ciphertext"


# payload "kind" values accepted for each record kind
_PAYLOAD_KINDS = {
    RecordKind.ENC_REFERENCE: {"enc-template"},
    RecordKind.BBE_PUBLIC_PARAMS: {"bbe-public-params"},
    RecordKind.BBE_CIPHERTEXT: {"bbe-ciphertext", "bbe-hybrid"},
}


def _validate_payload(kind: RecordKind, payload: bytes) -> None:
    try:
        data = json.loads(payload)
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise ValueError(f"{kind.value} payload is not JSON: {exc}") from None
    if not isinstance(data, dict) or data.get("kind") not in _PAYLOAD_KINDS[kind]:
        raise ValueError(f"payload does not parse as {kind.value}")
    if kind is RecordKind.ENC_REFERENCE and data.get("role") != Role.REFERENCE.value:
        raise ValueError("enrolled template must be an encrypted reference template")


@dataclass(frozen=True)
class VaultRecord:
    subject: str
    kind: RecordKind
    payload: bytes
    created_at: float = 0.0
    version: int = 0
    tombstone: bool = False

    def __post_init__(self) -> None:
        if not isinstance(self.subject, str) or not self.subject:
            raise ValueError("subject id must be a non-empty string")
        object.__setattr__(self, "kind", RecordKind(self.kind))
        if not isinstance(self.payload, (bytes, bytearray)):
            raise TypeError("payload must be bytes")
        object.__setattr__(self, "payload", bytes(self.payload))
        if not self.tombstone:
            _validate_payload(self.kind, self.payload)

    def to_json(self) -> str:
        return json.dumps(
            {
                "subject": self.subject,
                "kind": self.kind.value,
                "payload": base64.b64encode(self.payload).decode("ascii"),
                "created_at": self.created_at,
                "version": self.version,
                "tombstone": self.tombstone,
            },
            sort_keys=True,
        )

    @classmethod
    def from_json(cls, text: str) -> "VaultRecord":
        data = json.loads(text)
        return cls(
            subject=data["subject"],
            kind=RecordKind(data["kind"]),
            payload=base64.b64decode(data["payload"]),
            created_at=float(data["created_at"]),
            version=int(data["version"]),
            tombstone=bool(data["tombstone"]),
        )


class Vault:
    """In-memory index shared by both backends; subclasses add persistence."""

    def __init__(self, clock: Callable[[], float] = time.time) -> None:
        self._clock = clock
        self._records: list[VaultRecord] = []
        self._latest: dict[tuple[str, RecordKind], int] = {}
        self._next_version: dict[tuple[str, RecordKind], int] = {}
        self._lock = threading.Lock()

    def _index(self, record: VaultRecord) -> int:
        rid = len(self._records)
        self._records.append(record)
        key = (record.subject, record.kind)
        self._next_version[key] = max(self._next_version.get(key, 1), record.version + 1)
        if record.tombstone:
            self._latest.pop(key, None)
        else:
            self._latest[key] = rid
        return rid

    def _persist(self, record: VaultRecord) -> None:
        pass

    def _append(self, record: VaultRecord, tombstone: bool = False) -> int:
        with self._lock:
            key = (record.subject, record.kind)
            stamped = replace(
                record,
                version=self._next_version.get(key, 1),
                created_at=self._clock(),
                tombstone=tombstone,
            )
            self._persist(stamped)
            return self._index(stamped)

    def put(self, record: VaultRecord) -> int:
        """Append ``record`` as the next version; returns its record id."""
        if not isinstance(record, VaultRecord):
            raise TypeError("put expects a VaultRecord")
        return self._append(record)

    def delete(self, subject: str, kind: RecordKind | str) -> int:
        """Logically delete all versions of ``(subject, kind)``."""
        kind = RecordKind(kind)
        self.get_latest(subject, kind)
        return self._append(VaultRecord(subject, kind, b"", tombstone=True), tombstone=True)

    def get(self, record_id: int) -> VaultRecord:
        try:
            return self._records[record_id]
        except IndexError:
            raise NotFoundError(record_id) from None

    def get_latest(self, subject: str, kind: RecordKind | str) -> VaultRecord:
        rid = self._latest.get((subject, RecordKind(kind)))
        if rid is None:
            raise NotFoundError(f"no {RecordKind(kind).value} record for subject {subject!r}")
        return self._records[rid]

    def list(self, subject: str) -> list[VaultRecord]:
        """Live records of ``subject`` in append order (tombstoned ones hidden)."""
        records = [r for r in list(self._records) if r.subject == subject]
        if not records:
            raise NotFoundError(f"unknown subject {subject!r}")
        live = []
        for r in records:
            if r.tombstone:
                live = [x for x in live if x.kind is not r.kind]
            else:
                live.append(r)
        return live

    def subjects(self) -> set[str]:
        return {r.subject for r in self._records}


class MemoryVault(Vault):
    """Non-persistent vault for tests and simulations."""


class FileVault(Vault):
    """Single-file append-only log with an in-memory index."""

    def __init__(self, path: str | os.PathLike, clock: Callable[[], float] = time.time) -> None:
        super().__init__(clock)
        self.path = Path(path)
        self.path.parent.mkdir(parents=True, exist_ok=True)
        self.path.touch(exist_ok=True)
        self._load()

    def _load(self) -> None:
        with open(self.path, "rb") as fh:
            for lineno, raw in enumerate(fh, start=1):
                line = raw.rstrip(b"\n")
                if not line:
                    continue
                size, _, body = line.partition(b" ")
                if not size.isdigit() or int(size) != len(body) or not raw.endswith(b"\n"):
                    # a torn final write is dropped; anything earlier is corruption
                    logger.warning("%s:%d: skipping truncated record", self.path, lineno)
                    continue
                self._index(VaultRecord.from_json(body.decode("utf-8")))

    def _persist(self, record: VaultRecord) -> None:
        body = record.to_json().encode("utf-8")
        with open(self.path, "ab") as fh:
            fcntl.flock(fh, fcntl.LOCK_EX)
            try:
                fh.write(b"%d %s\n" % (len(body), body))
                fh.flush()
                os.fsync(fh.fileno())
            finally:
                fcntl.flock(fh, fcntl.LOCK_UN)


def _enrolled(vault: Vault, subject: str, enc_idf: EncryptedTemplate) -> EncryptedTemplate:
    if not isinstance(enc_idf, EncryptedTemplate):
        raise TypeError("the vault only matches encrypted templates")
    if enc_idf.role is not Role.IDENTIFICATION:
        raise ValueError("probe must be an encrypted identification template")
    record = vault.get_latest(subject, RecordKind.ENC_REFERENCE)
    stored = EncryptedTemplate.from_dict(json.loads(record.payload))
    if stored.values.shape != enc_idf.values.shape:
        raise ValueError(
            f"probe length {enc_idf.values.size} does not match enrolled length {stored.values.size}"
        )
    return stored


def score_in_vault(vault: Vault, subject: str, enc_idf: EncryptedTemplate) -> float:
    """Raw encrypted-domain score (reveals the scaled distance to the caller)."""
    return match_score(_enrolled(vault, subject, enc_idf), enc_idf)


def match_in_vault(vault: Vault, subject: str, enc_idf: EncryptedTemplate) -> Decision:
    """Decision for a probe against the subject's latest enrolled template."""
    return decide(score_in_vault(vault, subject, enc_idf))
