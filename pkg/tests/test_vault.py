import inspect
import json
import threading

import numpy as np
import pytest

from amsobe import sot, vault
from amsobe.template import FeatureTemplate, Role, biological_distance
from amsobe.vault import FileVault, MemoryVault, NotFoundError, RecordKind, VaultRecord, match_in_vault, score_in_vault


def enc_payload(role="reference", values=(1.0, 2.0, 3.0)):
    return json.dumps({"version": 1, "kind": "enc-template", "role": role, "values": list(values)}).encode()


def record(subject="alice", payload=None):
    return VaultRecord(subject, RecordKind.ENC_REFERENCE, payload or enc_payload())


@pytest.fixture(params=["memory", "file"])
def store(request, tmp_path):
    if request.param == "memory":
        return MemoryVault(clock=lambda: 100.0)
    return FileVault(tmp_path / "vault.log", clock=lambda: 100.0)


class TestStorage:
    def test_round_trip(self, store):
        payload = enc_payload(values=(0.1, -0.2, 0.30000000000000004))
        rid = store.put(record(payload=payload))
        assert store.get(rid).payload == payload
        assert store.get_latest("alice", RecordKind.ENC_REFERENCE).payload == payload

    def test_versioning(self, store):
        store.put(record(payload=enc_payload(values=(1.0,))))
        store.put(record(payload=enc_payload(values=(2.0,))))
        latest = store.get_latest("alice", "enc-reference-template")
        assert json.loads(latest.payload)["values"] == [2.0]
        assert latest.version == 2 and latest.created_at == 100.0

    def test_unknown_subject(self, store):
        with pytest.raises(NotFoundError):
            store.get_latest("nobody", RecordKind.ENC_REFERENCE)
        with pytest.raises(NotFoundError):
            store.list("nobody")
        with pytest.raises(NotFoundError):
            store.get(42)

    def test_tombstone(self, store):
        store.put(record())
        store.put(VaultRecord("alice", RecordKind.BBE_PUBLIC_PARAMS, json.dumps({"kind": "bbe-public-params"}).encode()))
        store.delete("alice", RecordKind.ENC_REFERENCE)
        with pytest.raises(NotFoundError):
            store.get_latest("alice", RecordKind.ENC_REFERENCE)
        assert [r.kind for r in store.list("alice")] == [RecordKind.BBE_PUBLIC_PARAMS]
        store.put(record())
        assert store.get_latest("alice", RecordKind.ENC_REFERENCE).version == 3

    def test_list_in_order(self, store):
        store.put(record())
        store.put(record("bob"))
        store.put(record())
        assert [r.version for r in store.list("alice")] == [1, 2]
        assert store.subjects() == {"alice", "bob"}


class TestValidation:
    def test_empty_subject(self):
        with pytest.raises(ValueError):
            record(subject="")

    def test_payload_must_parse(self):
        with pytest.raises(ValueError):
            VaultRecord("a", RecordKind.ENC_REFERENCE, b"\xff not json")
        with pytest.raises(ValueError):
            VaultRecord("a", RecordKind.BBE_CIPHERTEXT, enc_payload())

    def test_plaintext_template_refused(self):
        plain = json.dumps(FeatureTemplate([1.0, 2.0]).to_dict()).encode()
        with pytest.raises(ValueError):
            VaultRecord("a", RecordKind.ENC_REFERENCE, plain)

    def test_identification_template_refused(self):
        with pytest.raises(ValueError):
            record(payload=enc_payload(role="identification"))

    def test_put_requires_record(self, store):
        with pytest.raises(TypeError):
            store.put(FeatureTemplate([1.0]))

    def test_interface_never_names_plaintext_types(self):
        for cls in (vault.Vault, MemoryVault, FileVault):
            for name, fn in inspect.getmembers(cls, inspect.isfunction):
                if name.startswith("_") and name != "__init__":
                    continue
                text = str(inspect.signature(fn))
                assert "FeatureTemplate" not in text and "SotKey" not in text, name
        for fn in (match_in_vault, score_in_vault):
            text = str(inspect.signature(fn))
            assert "FeatureTemplate" not in text and "SotKey" not in text


class TestFileVault:
    def test_reload(self, tmp_path):
        path = tmp_path / "v.log"
        first = FileVault(path)
        first.put(record())
        first.put(record(payload=enc_payload(values=(9.0,))))
        again = FileVault(path)
        assert again.get_latest("alice", RecordKind.ENC_REFERENCE).payload == enc_payload(values=(9.0,))
        assert again.get_latest("alice", RecordKind.ENC_REFERENCE).version == 2

    def test_length_prefixed_lines(self, tmp_path):
        path = tmp_path / "v.log"
        FileVault(path).put(record())
        line = path.read_bytes().splitlines()[0]
        size, body = line.split(b" ", 1)
        assert int(size) == len(body)
        assert json.loads(body)["subject"] == "alice"

    def test_torn_tail_skipped(self, tmp_path):
        path = tmp_path / "v.log"
        FileVault(path).put(record())
        with open(path, "ab") as fh:
            fh.write(b"500 {\"subject\": \"ali")
        again = FileVault(path)
        assert len(again.list("alice")) == 1

    def test_concurrent_writers(self, tmp_path):
        path = tmp_path / "v.log"
        store = FileVault(path)

        def write(i):
            store.put(record(subject=f"s{i % 3}"))

        threads = [threading.Thread(target=write, args=(i,)) for i in range(30)]
        for t in threads:
            t.start()
        for t in threads:
            t.join()
        again = FileVault(path)
        assert sum(len(again.list(f"s{k}")) for k in range(3)) == 30


class TestMatching:
    def setup_method(self):
        rng = np.random.default_rng(0)
        self.key = sot.keygen(8, 3, rng, threshold=0.5)
        self.x = rng.uniform(-1, 1, 8)
        self.store = MemoryVault()
        enc = sot.encrypt_reference(self.key, FeatureTemplate(self.x, Role.REFERENCE), rng=rng)
        self.stored = enc
        self.store.put(VaultRecord("alice", RecordKind.ENC_REFERENCE, json.dumps(enc.to_dict()).encode()))
        self.rng = rng

    def probe(self, values):
        return sot.encrypt_identification(self.key, FeatureTemplate(values, Role.IDENTIFICATION), rng=self.rng)

    def test_same_template_matches(self):
        assert match_in_vault(self.store, "alice", self.probe(self.x)) is sot.Decision.MATCH

    def test_distant_template_rejected(self):
        y = self.rng.uniform(-1, 1, 8)
        assert biological_distance(self.x, y) > self.key.threshold
        assert match_in_vault(self.store, "alice", self.probe(y)) is sot.Decision.NO_MATCH

    def test_unknown_subject(self):
        with pytest.raises(NotFoundError):
            match_in_vault(self.store, "bob", self.probe(self.x))

    def test_length_mismatch(self):
        bad = sot.EncryptedTemplate(np.zeros(5), Role.IDENTIFICATION)
        with pytest.raises(ValueError):
            match_in_vault(self.store, "alice", bad)

    def test_rejects_plaintext_and_wrong_role(self):
        with pytest.raises(TypeError):
            match_in_vault(self.store, "alice", FeatureTemplate(self.x, Role.IDENTIFICATION))
        with pytest.raises(ValueError):
            match_in_vault(self.store, "alice", self.stored)

    def test_delegation_law(self):
        for _ in range(50):
            y = self.x + self.rng.normal(0, 0.3, 8)
            probe = self.probe(y)
            assert match_in_vault(self.store, "alice", probe) is sot.decide(sot.match_score(self.stored, probe))
            assert score_in_vault(self.store, "alice", probe) == sot.match_score(self.stored, probe)
