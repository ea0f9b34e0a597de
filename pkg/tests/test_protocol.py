import json

import numpy as np
import pytest

from amsobe import protocol, sot
from amsobe.ablstm import Dims, init_network
from amsobe.protocol import (
    Channel,
    DeviceConfig,
    Outcome,
    PeerConfig,
    demo_scenario,
    gating_violations,
    privacy_violations,
    run_identification,
    run_message_exchange,
    run_registration,
)
from amsobe.signal import GaitSignal
from amsobe.template import FeatureTemplate, Role, biological_distance
from amsobe.vault import MemoryVault, NotFoundError

N = 16


@pytest.fixture
def setup():
    rng = np.random.default_rng(0)
    key = sot.keygen(N, 3, rng, threshold=0.05)
    ref = FeatureTemplate(rng.uniform(-1, 1, N) / 4, Role.REFERENCE)
    close = FeatureTemplate(ref.values + rng.normal(0, 0.005, N), Role.IDENTIFICATION)
    far = FeatureTemplate(rng.uniform(-1, 1, N) / 4, Role.IDENTIFICATION)
    return key, ref, close, far


class FailingVault(MemoryVault):
    def _persist(self, record):
        raise OSError("disk full")


def enrolled(key, ref, seed=0):
    store, channel = MemoryVault(), Channel()
    ts = run_registration(DeviceConfig("alice", key, template=ref, seed=seed), store, channel)
    assert ts.outcome is Outcome.ENROLLED
    return store, channel


class TestRegistration:
    def test_happy_path(self, setup):
        key, ref, _, _ = setup
        store, channel = MemoryVault(), Channel()
        ts = run_registration(DeviceConfig("alice", key, template=ref), store, channel)
        assert ts.outcome is Outcome.ENROLLED
        assert [(e.actor, e.kind) for e in ts.entries] == [("device", "encrypt"), ("device", "transmit"), ("cloud", "store")]
        assert len(store.list("alice")) == 1
        assert privacy_violations(channel.wire, [ref], [key]) == []

    def test_vault_failure(self, setup):
        key, ref, _, _ = setup
        ts = run_registration(DeviceConfig("alice", key, template=ref), FailingVault())
        assert ts.outcome is Outcome.REJECTED
        assert ts.entries[-1].outcome.startswith("error: OSError")

    def test_short_signal(self, setup):
        key, _, _, _ = setup
        net = init_network(Dims(1, 2, 50, 2), np.random.default_rng(1))
        signal = GaitSignal(np.random.default_rng(2).standard_normal((6, 30)))
        ts = run_registration(DeviceConfig("alice", key, signal=signal, model=net), MemoryVault())
        assert ts.outcome is Outcome.REJECTED
        assert "SegmentationError" in ts.entries[-1].outcome

    def test_signal_source(self):
        net = init_network(Dims(1, 2, 20, 2), np.random.default_rng(1))
        key = sot.keygen(net.dims.d, 2, np.random.default_rng(3))
        t = np.arange(60)
        signal = GaitSignal(np.stack([np.sin(2 * np.pi * t / 20 + k) for k in range(6)]))
        store, channel = MemoryVault(), Channel()
        ts = run_registration(DeviceConfig("bob", key, signal=signal, model=net), store, channel)
        assert ts.outcome is Outcome.ENROLLED
        assert ts.entries[0].kind == "extract"
        assert privacy_violations(channel.wire, keys=[key]) == []

    def test_missing_source(self, setup):
        key, _, _, _ = setup
        ts = run_registration(DeviceConfig("alice", key), MemoryVault())
        assert ts.outcome is Outcome.REJECTED


class TestIdentification:
    def test_same_template(self, setup):
        key, ref, _, _ = setup
        store, _ = enrolled(key, ref)
        ts = run_identification(DeviceConfig("alice", key, template=ref, seed=4), store)
        assert ts.outcome is Outcome.IDENTIFIED

    def test_distant_probe(self, setup):
        key, ref, _, far = setup
        assert biological_distance(ref, far) > key.threshold
        store, _ = enrolled(key, ref)
        ts = run_identification(DeviceConfig("alice", key, template=far), store)
        assert ts.outcome is Outcome.REJECTED
        assert ts.entries[-1].outcome == "rejected"

    def test_wrong_length(self, setup):
        key, ref, _, _ = setup
        store, _ = enrolled(key, ref)
        other_key = sot.keygen(N + 1, 3, np.random.default_rng(9))
        probe = FeatureTemplate(np.zeros(N + 1), Role.IDENTIFICATION)
        ts = run_identification(DeviceConfig("alice", other_key, template=probe), store)
        assert ts.outcome is Outcome.REJECTED
        assert ts.entries[-1].outcome.startswith("error:")

    def test_unenrolled(self, setup):
        key, ref, _, _ = setup
        with pytest.raises(NotFoundError):
            run_identification(DeviceConfig("zed", key, template=ref), MemoryVault())

    def test_only_decision_returned(self, setup):
        key, ref, close, _ = setup
        store, channel = enrolled(key, ref)
        run_identification(DeviceConfig("alice", key, template=close), store, channel=channel)
        reply = json.loads(channel.wire[-1].payload)
        assert reply == {"decision": "match", "kind": "decision"}


class TestMessageExchange:
    def test_delivered(self, setup):
        key, ref, close, _ = setup
        store, channel = enrolled(key, ref)
        receiver = DeviceConfig("alice", key, template=close, reference=ref, seed=7)
        ts = run_message_exchange(PeerConfig(seed=1), receiver, store, b"hi!!!", channel=channel)
        assert ts.outcome is Outcome.MESSAGE_DELIVERED
        assert ts.delivered == b"hi!!!"
        assert gating_violations(ts) == []
        assert privacy_violations(channel.wire, [ref, close], [key]) == []

    def test_refused_at_gate(self, setup):
        key, ref, _, far = setup
        store, _ = enrolled(key, ref)
        receiver = DeviceConfig("alice", key, template=far, reference=ref)
        ts = run_message_exchange(PeerConfig(), receiver, store, b"hello")
        assert ts.outcome is Outcome.MESSAGE_REFUSED
        assert not any(e.kind.startswith("bbe-") for e in ts.entries)

    def test_tampered(self, setup):
        key, ref, close, _ = setup
        store, _ = enrolled(key, ref)
        receiver = DeviceConfig("alice", key, template=close, reference=ref)
        ts = run_message_exchange(PeerConfig(), receiver, store, b"hello", tamper=True)
        assert ts.outcome is Outcome.MESSAGE_REFUSED
        assert ts.entries[-1].kind == "bbe-open" and ts.entries[-1].outcome == "tag-mismatch"
        assert ts.delivered is None

    def test_tampered_empty_payload(self, setup):
        key, ref, close, _ = setup
        store, _ = enrolled(key, ref)
        receiver = DeviceConfig("alice", key, template=close, reference=ref)
        ts = run_message_exchange(PeerConfig(), receiver, store, b"", tamper=True)
        assert ts.entries[-1].outcome == "tag-mismatch"

    def test_public_material_stored(self, setup):
        key, ref, close, _ = setup
        store, _ = enrolled(key, ref)
        receiver = DeviceConfig("alice", key, template=close, reference=ref)
        run_message_exchange(PeerConfig(), receiver, store, b"x")
        kinds = {r.kind.value for r in store.list("alice")}
        assert kinds == {"enc-reference-template", "bbe-public-params", "bbe-ciphertext"}


class TestInvariants:
    def test_privacy_scan_detects_leaks(self, setup):
        key, ref, _, _ = setup
        channel = Channel()
        channel.send("device", "cloud", "oops", json.dumps(ref.to_dict()).encode())
        channel.send("device", "cloud", "oops", json.dumps({"x": [float(ref.values[3])]}).encode())
        channel.send("device", "cloud", "oops", json.dumps({"k": key.to_dict()}).encode())
        assert len(privacy_violations(channel.wire, [ref], [key])) >= 3

    def test_gating_scan_detects_violation(self):
        ts = protocol.FlowTranscript()
        ts.record("device", "bbe-setup", b"")
        ts.record("device", "result", b"", "identified")
        assert len(gating_violations(ts)) == 1

    def test_deterministic_transcripts(self):
        runs = [demo_scenario("exchange", 11, n=32) for _ in range(2)]
        a = [t.to_json() for t in runs[0].transcripts]
        b = [t.to_json() for t in runs[1].transcripts]
        assert a == b
        assert [m.payload for m in runs[0].channel.wire] == [m.payload for m in runs[1].channel.wire]

    @pytest.mark.parametrize("scenario", ["register", "identify", "exchange"])
    @pytest.mark.parametrize("impostor", [False, True])
    def test_demo_outcomes(self, scenario, impostor):
        run = demo_scenario(scenario, 3, n=32, impostor=impostor)
        expected = {
            ("register", False): Outcome.ENROLLED,
            ("register", True): Outcome.ENROLLED,
            ("identify", False): Outcome.IDENTIFIED,
            ("identify", True): Outcome.REJECTED,
            ("exchange", False): Outcome.MESSAGE_DELIVERED,
            ("exchange", True): Outcome.MESSAGE_REFUSED,
        }[(scenario, impostor)]
        assert run.outcome is expected
        assert privacy_violations(run.channel.wire, run.templates, [run.key]) == []

    def test_unknown_scenario(self):
        with pytest.raises(ValueError):
            demo_scenario("teleport")

    def test_fifo_channel(self):
        ch = Channel()
        ch.send("a", "b", "k", b"1")
        ch.send("a", "b", "k", b"2")
        ch.send("c", "b", "k", b"3")
        assert ch.receive("a", "b").payload == b"1"
        assert ch.receive("c", "b").payload == b"3"
        assert ch.receive("a", "b").payload == b"2"
        with pytest.raises(LookupError):
            ch.receive("a", "b")

    def test_table_format(self):
        text = demo_scenario("register", 0, n=8).transcripts[0].format_table()
        assert "outcome: enrolled" in text and "device" in text
