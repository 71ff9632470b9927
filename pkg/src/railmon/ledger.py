"""Append-only, hash-chained, versioned record store.

Every record embeds the digest of its predecessor, so any retroactive
change to the persisted log is detectable; enrichment never edits a
record, it appends a new version under the same key. A single writer owns
the chain; other nodes replicate by fetching and re-verifying the missing
suffix (read-only anti-entropy sync).

Log file layout (little-endian):
    magic "RSLOG1"
    per record: u32 body length, body

Record body, fields in declaration order, byte strings length-prefixed u32:
    u64 seq | key | u64 version | payload | payload_hash(32) |
    prev_hash(32) | record_hash(32) | author | auth_tag(32) | u64 timestamp

record_hash = SHA-256 over (seq, key, version, payload_hash, prev_hash,
author, timestamp) in the same encoding; auth_tag = HMAC-SHA-256 of
record_hash under the author's keyring key.
"""

from __future__ import annotations

import hashlib
import hmac
import os
import struct
import threading
import time
from base64 import b64decode, b64encode
from dataclasses import dataclass
from typing import Callable, Mapping, Optional, Sequence

from .errors import (LedgerFormatError, ParameterError, TransportError,
                     UnknownAuthorError)

LOG_MAGIC = b"RSLOG1"
ZERO_HASH = bytes(32)

VERIFY_OK = "ok"
# spec reasons plus "malformed" for structural damage (bad lengths,
# truncation, impossible field values)
REASON_PAYLOAD = "payload_hash"
REASON_LINK = "link"
REASON_RECORD = "record_hash"
REASON_AUTH = "auth_tag"
REASON_MALFORMED = "malformed"


@dataclass(frozen=True)
class LedgerRecord:
    seq: int
    key: str
    version: int
    payload: bytes
    payload_hash: bytes
    prev_hash: bytes
    record_hash: bytes
    author: str
    auth_tag: bytes
    timestamp: int  # microseconds

    def to_json(self) -> dict:
        return {
            "seq": self.seq,
            "key": self.key,
            "version": self.version,
            "payload_b64": b64encode(self.payload).decode("ascii"),
            "payload_hash": self.payload_hash.hex(),
            "prev_hash": self.prev_hash.hex(),
            "record_hash": self.record_hash.hex(),
            "author": self.author,
            "auth_tag": self.auth_tag.hex(),
            "timestamp": self.timestamp,
        }

    @classmethod
    def from_json(cls, obj: dict) -> "LedgerRecord":
        return cls(
            seq=int(obj["seq"]),
            key=str(obj["key"]),
            version=int(obj["version"]),
            payload=b64decode(obj["payload_b64"]),
            payload_hash=bytes.fromhex(obj["payload_hash"]),
            prev_hash=bytes.fromhex(obj["prev_hash"]),
            record_hash=bytes.fromhex(obj["record_hash"]),
            author=str(obj["author"]),
            auth_tag=bytes.fromhex(obj["auth_tag"]),
            timestamp=int(obj["timestamp"]),
        )


@dataclass(frozen=True)
class ChainHead:
    length: int
    head_hash: bytes  # zeros when length == 0

    def to_json(self) -> dict:
        return {"length": self.length, "head_hash": self.head_hash.hex()}

    @classmethod
    def from_json(cls, obj: dict) -> "ChainHead":
        return cls(length=int(obj["length"]),
                   head_hash=bytes.fromhex(obj["head_hash"]))


@dataclass(frozen=True)
class VerifyResult:
    ok: bool
    length: int
    first_bad_seq: Optional[int] = None
    reason: Optional[str] = None


@dataclass(frozen=True)
class SyncReport:
    appended: int
    diverged_at: Optional[int] = None

    @property
    def diverged(self) -> bool:
        return self.diverged_at is not None


def _pack_str(s: str) -> bytes:
    raw = s.encode("utf-8")
    return struct.pack("<I", len(raw)) + raw


def _pack_bytes(b: bytes) -> bytes:
    return struct.pack("<I", len(b)) + b


def compute_record_hash(seq: int, key: str, version: int, payload_hash: bytes,
                        prev_hash: bytes, author: str, timestamp: int) -> bytes:
    h = hashlib.sha256()
    h.update(struct.pack("<Q", seq))
    h.update(_pack_str(key))
    h.update(struct.pack("<Q", version))
    h.update(payload_hash)
    h.update(prev_hash)
    h.update(_pack_str(author))
    h.update(struct.pack("<Q", timestamp))
    return h.digest()


def compute_auth_tag(record_hash: bytes, mac_key: bytes) -> bytes:
    return hmac.new(mac_key, record_hash, hashlib.sha256).digest()


def encode_record(rec: LedgerRecord) -> bytes:
    body = b"".join([
        struct.pack("<Q", rec.seq),
        _pack_str(rec.key),
        struct.pack("<Q", rec.version),
        _pack_bytes(rec.payload),
        rec.payload_hash,
        rec.prev_hash,
        rec.record_hash,
        _pack_str(rec.author),
        rec.auth_tag,
        struct.pack("<Q", rec.timestamp),
    ])
    return struct.pack("<I", len(body)) + body


def decode_record_body(body: bytes) -> LedgerRecord:
    """Strict decode: every byte of the body must be accounted for."""
    try:
        off = 0
        (seq,) = struct.unpack_from("<Q", body, off)
        off += 8
        (klen,) = struct.unpack_from("<I", body, off)
        off += 4
        if off + klen > len(body):
            raise LedgerFormatError("key overruns body")
        key = body[off:off + klen].decode("utf-8")
        off += klen
        (version,) = struct.unpack_from("<Q", body, off)
        off += 8
        (plen,) = struct.unpack_from("<I", body, off)
        off += 4
        if off + plen > len(body):
            raise LedgerFormatError("payload overruns body")
        payload = body[off:off + plen]
        off += plen
        if off + 96 > len(body):
            raise LedgerFormatError("digest block overruns body")
        payload_hash = body[off:off + 32]
        prev_hash = body[off + 32:off + 64]
        record_hash = body[off + 64:off + 96]
        off += 96
        (alen,) = struct.unpack_from("<I", body, off)
        off += 4
        if off + alen > len(body):
            raise LedgerFormatError("author overruns body")
        author = body[off:off + alen].decode("utf-8")
        off += alen
        if off + 40 > len(body):
            raise LedgerFormatError("auth tag overruns body")
        auth_tag = body[off:off + 32]
        off += 32
        (timestamp,) = struct.unpack_from("<Q", body, off)
        off += 8
    except (struct.error, UnicodeDecodeError) as exc:
        raise LedgerFormatError(str(exc)) from exc
    if off != len(body):
        raise LedgerFormatError("trailing bytes inside record body")
    return LedgerRecord(seq=seq, key=key, version=version, payload=payload,
                        payload_hash=payload_hash, prev_hash=prev_hash,
                        record_hash=record_hash, author=author,
                        auth_tag=auth_tag, timestamp=timestamp)


def _scan_log(blob: bytes) -> tuple[list[LedgerRecord], int]:
    """Parse records; returns (records, offset of first unparseable byte).

    The offset equals len(blob) iff the whole file parses cleanly.
    """
    if blob[:len(LOG_MAGIC)] != LOG_MAGIC:
        raise LedgerFormatError("bad log magic")
    records = []
    off = len(LOG_MAGIC)
    while off < len(blob):
        if off + 4 > len(blob):
            return records, off
        (blen,) = struct.unpack_from("<I", blob, off)
        if off + 4 + blen > len(blob):
            return records, off
        try:
            records.append(decode_record_body(blob[off + 4:off + 4 + blen]))
        except LedgerFormatError:
            return records, off
        off += 4 + blen
    return records, off


def verify_log_file(path: str, keyring: Mapping[str, bytes]) -> VerifyResult:
    """Recompute every digest, link and MAC in the persisted log.

    Content damage comes back as a VerifyResult; an unreadable file is an
    OSError, not a verification verdict.
    """
    with open(path, "rb") as fh:
        blob = fh.read()
    if blob[:len(LOG_MAGIC)] != LOG_MAGIC:
        return VerifyResult(ok=False, length=0, first_bad_seq=0,
                            reason=REASON_MALFORMED)
    try:
        records, end = _scan_log(blob)
    except LedgerFormatError:
        return VerifyResult(ok=False, length=0, first_bad_seq=0,
                            reason=REASON_MALFORMED)

    versions: dict[str, int] = {}
    prev_hash = ZERO_HASH
    for i, rec in enumerate(records):
        if hashlib.sha256(rec.payload).digest() != rec.payload_hash:
            return VerifyResult(False, len(records), i, REASON_PAYLOAD)
        if rec.prev_hash != prev_hash:
            return VerifyResult(False, len(records), i, REASON_LINK)
        # record_hash covers the stored seq, so a flipped seq byte lands
        # here; a naive splice breaks the link or hash checks first, and
        # only a renumbered-yet-consistent chain reaches the ordinal check
        expected = compute_record_hash(rec.seq, rec.key, rec.version,
                                       rec.payload_hash, rec.prev_hash,
                                       rec.author, rec.timestamp)
        if expected != rec.record_hash:
            return VerifyResult(False, len(records), i, REASON_RECORD)
        mac_key = keyring.get(rec.author)
        if mac_key is None or not hmac.compare_digest(
                compute_auth_tag(rec.record_hash, mac_key), rec.auth_tag):
            return VerifyResult(False, len(records), i, REASON_AUTH)
        if rec.seq != i:
            return VerifyResult(False, len(records), i, REASON_MALFORMED)
        if rec.version != versions.get(rec.key, 0) + 1:
            return VerifyResult(False, len(records), i, REASON_MALFORMED)
        versions[rec.key] = rec.version
        prev_hash = rec.record_hash

    if end != len(blob):
        # trailing partial or damaged record
        return VerifyResult(False, len(records), len(records), REASON_MALFORMED)
    return VerifyResult(ok=True, length=len(records))


class Ledger:
    """Single-writer chain with serialized appends and lock-free-ish reads.

    The keyring maps author principal ids to their MAC keys; appends from
    unregistered authors are refused and verification covers the MACs.
    """

    def __init__(self, path: str, keyring: Mapping[str, bytes], *,
                 create: bool = True, recover: bool = False,
                 fsync: bool = True):
        self.path = str(path)
        self.keyring = dict(keyring)
        self._fsync = fsync
        self._lock = threading.RLock()
        self._records: list[LedgerRecord] = []
        self._by_key: dict[str, list[int]] = {}

        if not os.path.exists(self.path):
            if not create:
                raise LedgerFormatError(f"no ledger at {self.path}")
            with open(self.path, "wb") as fh:
                fh.write(LOG_MAGIC)
        with open(self.path, "rb") as fh:
            blob = fh.read()
        records, end = _scan_log(blob)
        if end != len(blob):
            if not recover:
                raise LedgerFormatError(
                    f"{self.path} has a partial trailing record at byte {end}; "
                    "open with recover=True to truncate it")
            with open(self.path, "r+b") as fh:
                fh.truncate(end)
        for rec in records:
            self._index(rec)
        self._fh = open(self.path, "ab")

    # -- internal ------------------------------------------------------------

    def _index(self, rec: LedgerRecord) -> None:
        self._records.append(rec)
        self._by_key.setdefault(rec.key, []).append(rec.seq)

    def _write(self, encoded: bytes) -> None:
        self._fh.write(encoded)
        self._fh.flush()
        if self._fsync:
            os.fsync(self._fh.fileno())

    # -- write path ----------------------------------------------------------

    def append(self, key: str, payload: bytes, author: str,
               author_key: Optional[bytes] = None) -> LedgerRecord:
        """Append one record; durable before return."""
        if not key:
            raise ParameterError("key must be non-empty")
        if not isinstance(payload, (bytes, bytearray)):
            raise ParameterError("payload must be bytes")
        with self._lock:
            mac_key = self.keyring.get(author)
            if mac_key is None:
                raise UnknownAuthorError(f"author {author!r} not in keyring")
            if author_key is not None and not hmac.compare_digest(author_key, mac_key):
                raise UnknownAuthorError(f"key mismatch for author {author!r}")
            seq = len(self._records)
            version = len(self._by_key.get(key, ())) + 1
            prev_hash = self._records[-1].record_hash if self._records else ZERO_HASH
            payload_hash = hashlib.sha256(bytes(payload)).digest()
            timestamp = time.time_ns() // 1000
            record_hash = compute_record_hash(seq, key, version, payload_hash,
                                              prev_hash, author, timestamp)
            rec = LedgerRecord(seq=seq, key=key, version=version,
                               payload=bytes(payload), payload_hash=payload_hash,
                               prev_hash=prev_hash, record_hash=record_hash,
                               author=author,
                               auth_tag=compute_auth_tag(record_hash, mac_key),
                               timestamp=timestamp)
            self._write(encode_record(rec))
            self._index(rec)
            return rec

    # -- read path -----------------------------------------------------------

    def __len__(self) -> int:
        return len(self._records)

    def head(self) -> ChainHead:
        with self._lock:
            if not self._records:
                return ChainHead(length=0, head_hash=ZERO_HASH)
            return ChainHead(length=len(self._records),
                             head_hash=self._records[-1].record_hash)

    def record_at(self, seq: int) -> LedgerRecord:
        return self._records[seq]

    def records_range(self, start: int, stop: int) -> list[LedgerRecord]:
        n = len(self._records)
        start = max(0, start)
        stop = min(n, stop)
        return list(self._records[start:stop])

    def get_latest(self, key: str) -> Optional[LedgerRecord]:
        seqs = self._by_key.get(key)
        return self._records[seqs[-1]] if seqs else None

    def get_version(self, key: str, version: int) -> Optional[LedgerRecord]:
        seqs = self._by_key.get(key)
        if not seqs or not 1 <= version <= len(seqs):
            return None
        return self._records[seqs[version - 1]]

    def history(self, key: str) -> list[LedgerRecord]:
        return [self._records[s] for s in self._by_key.get(key, ())]

    def keys(self, prefix: str = "") -> list[str]:
        return sorted(k for k in self._by_key if k.startswith(prefix))

    def count_records(self, prefix: str = "") -> int:
        if not prefix:
            return len(self._records)
        return sum(len(s) for k, s in self._by_key.items() if k.startswith(prefix))

    # -- integrity -----------------------------------------------------------

    def verify_chain(self) -> VerifyResult:
        """Re-read the persisted file and recompute everything."""
        with self._lock:
            return verify_log_file(self.path, self.keyring)

    # -- replication ---------------------------------------------------------

    def sync_from_peer(self, peer_head: ChainHead,
                       fetch: Callable[[int, int], Sequence[LedgerRecord]]
                       ) -> SyncReport:
        """Append the peer's verified suffix; never touches local records.

        fetch(a, b) must return the peer's records with seq in [a, b).
        """
        with self._lock:
            local_len = len(self._records)
            if peer_head.length <= local_len:
                if peer_head.length == 0:
                    return SyncReport(appended=0)
                local = self._records[peer_head.length - 1]
                if local.record_hash == peer_head.head_hash:
                    return SyncReport(appended=0)
                return SyncReport(appended=0,
                                  diverged_at=self._first_mismatch(peer_head, fetch))

            fetched = list(fetch(local_len, peer_head.length))
            if len(fetched) != peer_head.length - local_len:
                raise TransportError(
                    f"peer returned {len(fetched)} records, "
                    f"expected {peer_head.length - local_len}")

            prev_hash = (self._records[-1].record_hash if self._records
                         else ZERO_HASH)
            versions = {k: len(s) for k, s in self._by_key.items()}
            for ordinal, rec in enumerate(fetched, start=local_len):
                if not self._record_valid(rec, ordinal, prev_hash, versions):
                    return SyncReport(appended=0, diverged_at=ordinal)
                versions[rec.key] = rec.version
                prev_hash = rec.record_hash
            if prev_hash != peer_head.head_hash:
                return SyncReport(appended=0, diverged_at=peer_head.length - 1)

            self._write(b"".join(encode_record(r) for r in fetched))
            for rec in fetched:
                self._index(rec)
            return SyncReport(appended=len(fetched))

    def _record_valid(self, rec: LedgerRecord, ordinal: int, prev_hash: bytes,
                      versions: dict[str, int]) -> bool:
        if rec.seq != ordinal or rec.prev_hash != prev_hash:
            return False
        if hashlib.sha256(rec.payload).digest() != rec.payload_hash:
            return False
        if compute_record_hash(rec.seq, rec.key, rec.version, rec.payload_hash,
                               rec.prev_hash, rec.author,
                               rec.timestamp) != rec.record_hash:
            return False
        mac_key = self.keyring.get(rec.author)
        if mac_key is None or not hmac.compare_digest(
                compute_auth_tag(rec.record_hash, mac_key), rec.auth_tag):
            return False
        return rec.version == versions.get(rec.key, 0) + 1

    def _first_mismatch(self, peer_head: ChainHead,
                        fetch: Callable[[int, int], Sequence[LedgerRecord]]) -> int:
        peer_records = list(fetch(0, peer_head.length))
        for i, rec in enumerate(peer_records):
            if i >= len(self._records):
                return i
            if self._records[i].record_hash != rec.record_hash:
                return i
        return peer_head.length

    def close(self) -> None:
        self._fh.close()

    def __enter__(self) -> "Ledger":
        return self

    def __exit__(self, *exc) -> None:
        self.close()


def http_fetch(base_url: str, client=None) -> Callable[[int, int], list[LedgerRecord]]:
    """Build a fetch callable over the peer sync wire format."""
    import httpx

    own = client is None

    def fetch(start: int, stop: int) -> list[LedgerRecord]:
        c = client or httpx.Client()
        try:
            resp = c.get(f"{base_url}/chain/records",
                         params={"from": start, "to": stop})
            resp.raise_for_status()
            return [LedgerRecord.from_json(obj) for obj in resp.json()]
        except httpx.HTTPError as exc:
            raise TransportError(str(exc)) from exc
        finally:
            if own:
                c.close()

    return fetch
