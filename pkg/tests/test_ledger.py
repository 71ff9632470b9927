import struct

import pytest

import oracles
from railmon.errors import (LedgerFormatError, ParameterError, TransportError,
                            UnknownAuthorError)
from railmon.ledger import (ZERO_HASH, ChainHead, Ledger, LedgerRecord,
                            verify_log_file)


def fill(store: Ledger, n: int, author="sensor1", key_cycle=3):
    for i in range(n):
        store.append(f"frames/s{i % key_cycle}",
                     f"payload-{i}".encode() * (1 + i % 5), author)


class TestAppendAndVersions:
    def test_genesis_prev_hash_is_zero(self, ledger):
        rec = ledger.append("a", b"first", "sensor1")
        assert rec.prev_hash == ZERO_HASH
        assert rec.seq == 0 and rec.version == 1

    def test_version_counter_and_get_latest(self, ledger):
        ledger.append("a", b"one", "sensor1")
        second = ledger.append("a", b"two", "sensor1")
        assert second.version == 2
        assert ledger.get_latest("a").payload == b"two"

    def test_history_and_get_version(self, ledger):
        for i in range(3):
            ledger.append("k", f"v{i}".encode(), "driver1")
        history = ledger.history("k")
        assert [r.version for r in history] == [1, 2, 3]
        assert ledger.get_version("k", 2).payload == b"v1"
        assert ledger.get_version("k", 4) is None

    def test_unknown_key_absent(self, ledger):
        assert ledger.get_latest("nope") is None
        assert ledger.history("nope") == []

    def test_payload_bytes_identity(self, ledger):
        blob = bytes(range(256)) * 3
        ledger.append("bin", blob, "sensor1")
        assert ledger.get_latest("bin").payload == blob

    def test_unknown_author_refused(self, ledger):
        with pytest.raises(UnknownAuthorError):
            ledger.append("a", b"x", "ghost")

    def test_empty_key_refused(self, ledger):
        with pytest.raises(ParameterError):
            ledger.append("", b"x", "sensor1")

    def test_append_only_reread_identity(self, ledger, registry, tmp_path):
        fill(ledger, 20)
        early = [ledger.record_at(i) for i in range(5)]
        fill(ledger, 20)
        reopened = Ledger(ledger.path, registry.keyring())
        for rec in early:
            again = reopened.record_at(rec.seq)
            assert again == rec
        reopened.close()


class TestVerify:
    def test_verify_after_100_appends_with_independent_oracle(
            self, ledger, registry):
        fill(ledger, 100, key_cycle=7)
        result = ledger.verify_chain()
        assert result.ok and result.length == 100
        blob = open(ledger.path, "rb").read()
        assert oracles.independent_verify(blob, registry.keyring())

    def test_untouched_chain_ok(self, ledger):
        fill(ledger, 10)
        assert ledger.verify_chain().ok

    def test_payload_bit_flip_detected_at_owner(self, ledger, registry,
                                                tmp_path):
        fill(ledger, 10)
        ledger.close()
        blob = bytearray(open(ledger.path, "rb").read())
        records, spans = oracles.parse_log_records(bytes(blob))
        # locate a payload byte of record 5: skip the length prefix and
        # fixed header fields inside the body
        start = spans[5][0] + 4
        key_len = len(records[5]["key"].encode())
        payload_off = start + 8 + 4 + key_len + 8 + 4
        blob[payload_off] ^= 0x40
        bad = tmp_path / "bad.log"
        bad.write_bytes(bytes(blob))
        result = verify_log_file(str(bad), registry.keyring())
        assert not result.ok
        assert result.first_bad_seq == 5
        assert result.reason == "payload_hash"

    def test_splice_detected(self, ledger, registry, tmp_path):
        fill(ledger, 8)
        ledger.close()
        blob = open(ledger.path, "rb").read()
        records, spans = oracles.parse_log_records(blob)
        # remove record 3 and naively re-point record 4's prev_hash at
        # record 2, leaving record 4's stored record_hash untouched
        body4 = bytearray(blob[spans[4][0] + 4:spans[4][1]])
        key_len = len(records[4]["key"].encode())
        plen = len(records[4]["payload"])
        prev_off = 8 + 4 + key_len + 8 + 4 + plen + 32
        body4[prev_off:prev_off + 32] = records[2]["record_hash"]
        spliced = blob[:spans[3][0]] \
            + struct.pack("<I", len(body4)) + bytes(body4) \
            + blob[spans[4][1]:]
        bad = tmp_path / "spliced.log"
        bad.write_bytes(spliced)
        result = verify_log_file(str(bad), registry.keyring())
        assert not result.ok
        assert result.first_bad_seq == 3
        assert result.reason in ("link", "record_hash")

    def test_truncated_tail_detected(self, ledger, registry):
        fill(ledger, 6)
        ledger.close()
        blob = open(ledger.path, "rb").read()
        open(ledger.path, "wb").write(blob[:-3])
        result = verify_log_file(ledger.path, registry.keyring())
        assert not result.ok
        assert result.first_bad_seq == 5
        assert result.reason == "malformed"

    def test_bad_magic(self, registry, tmp_path):
        path = tmp_path / "junk.log"
        path.write_bytes(b"NOTLOG" + b"\x00" * 32)
        result = verify_log_file(str(path), registry.keyring())
        assert not result.ok and result.first_bad_seq == 0
        assert result.reason == "malformed"

    def test_author_outside_keyring_fails_auth(self, ledger, registry):
        fill(ledger, 3)
        ledger.close()
        keyring = registry.keyring()
        del keyring["sensor1"]
        result = verify_log_file(ledger.path, keyring)
        assert not result.ok
        assert result.reason == "auth_tag"
        assert result.first_bad_seq == 0


class TestDurabilityAndRecovery:
    def test_reopen_preserves_records_and_extends_chain(self, registry,
                                                        tmp_path):
        path = str(tmp_path / "chain.log")
        store = Ledger(path, registry.keyring())
        fill(store, 12)
        head = store.head()
        store.close()
        reopened = Ledger(path, registry.keyring())
        assert len(reopened) == 12
        assert reopened.head() == head
        reopened.append("more", b"x", "admin1")
        assert reopened.verify_chain().ok
        reopened.close()

    def test_partial_trailing_record_refused_then_recovered(self, registry,
                                                            tmp_path):
        path = str(tmp_path / "crash.log")
        store = Ledger(path, registry.keyring())
        fill(store, 5)
        store.close()
        blob = open(path, "rb").read()
        open(path, "wb").write(blob[:-7])  # crash mid-record
        with pytest.raises(LedgerFormatError):
            Ledger(path, registry.keyring())
        recovered = Ledger(path, registry.keyring(), recover=True)
        assert len(recovered) == 4
        assert recovered.verify_chain().ok
        recovered.close()

    def test_missing_file_without_create(self, registry, tmp_path):
        with pytest.raises(LedgerFormatError):
            Ledger(str(tmp_path / "absent.log"), registry.keyring(),
                   create=False)


class TestSync:
    def _pair(self, tmp_path, registry, peer_len=10):
        peer = Ledger(str(tmp_path / "peer.log"), registry.keyring())
        fill(peer, peer_len, key_cycle=4)
        local = Ledger(str(tmp_path / "local.log"), registry.keyring())
        return local, peer

    def test_full_copy_into_empty_local(self, tmp_path, registry):
        local, peer = self._pair(tmp_path, registry)
        report = local.sync_from_peer(peer.head(), peer.records_range)
        assert report.appended == 10 and not report.diverged
        assert local.head() == peer.head()
        assert local.verify_chain().ok

    def test_idempotent(self, tmp_path, registry):
        local, peer = self._pair(tmp_path, registry)
        local.sync_from_peer(peer.head(), peer.records_range)
        report = local.sync_from_peer(peer.head(), peer.records_range)
        assert report.appended == 0 and not report.diverged

    def test_incremental_suffix(self, tmp_path, registry):
        local, peer = self._pair(tmp_path, registry)
        local.sync_from_peer(peer.head(), peer.records_range)
        fill(peer, 5, author="driver1")
        report = local.sync_from_peer(peer.head(), peer.records_range)
        assert report.appended == 5
        assert local.head() == peer.head()

    def test_tampered_peer_record_rejected_local_unchanged(self, tmp_path,
                                                           registry):
        local, peer = self._pair(tmp_path, registry)
        fetched = peer.records_range(0, 10)
        bad = list(fetched)
        rec4 = bad[4]
        bad[4] = LedgerRecord(
            seq=rec4.seq, key=rec4.key, version=rec4.version,
            payload=rec4.payload + b"!", payload_hash=rec4.payload_hash,
            prev_hash=rec4.prev_hash, record_hash=rec4.record_hash,
            author=rec4.author, auth_tag=rec4.auth_tag,
            timestamp=rec4.timestamp)
        report = local.sync_from_peer(peer.head(),
                                      lambda a, b: bad[a:b])
        assert report.appended == 0
        assert report.diverged_at == 4
        assert len(local) == 0

    def test_diverged_equal_length_peer(self, tmp_path, registry):
        local, peer = self._pair(tmp_path, registry, peer_len=6)
        local.sync_from_peer(peer.head(), peer.records_range)
        other = Ledger(str(tmp_path / "other.log"), registry.keyring())
        for i in range(6):
            other.append(f"frames/s{i % 4}", f"different-{i}".encode(),
                         "sensor1")
        report = local.sync_from_peer(other.head(), other.records_range)
        assert report.appended == 0
        assert report.diverged_at == 0
        assert len(local) == 6

    def test_short_read_is_transport_error(self, tmp_path, registry):
        local, peer = self._pair(tmp_path, registry)
        with pytest.raises(TransportError):
            local.sync_from_peer(peer.head(),
                                 lambda a, b: peer.records_range(a, b - 1))

    def test_head_mismatch_after_valid_suffix(self, tmp_path, registry):
        local, peer = self._pair(tmp_path, registry)
        head = peer.head()
        lying_head = ChainHead(length=head.length, head_hash=b"\xab" * 32)
        report = local.sync_from_peer(lying_head, peer.records_range)
        assert report.appended == 0
        assert report.diverged_at == head.length - 1

    def test_record_json_round_trip(self, tmp_path, registry):
        local, peer = self._pair(tmp_path, registry, peer_len=3)
        for rec in peer.records_range(0, 3):
            assert LedgerRecord.from_json(rec.to_json()) == rec
