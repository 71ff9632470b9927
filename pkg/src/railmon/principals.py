"""Principals, roles and the static token registry.

Authentication is deliberately simple: each principal carries a bearer
token and a MAC key. The registry is loaded from config; there is no
self-service signup. Authorization is a fixed role-to-operation matrix
enforced by the gateway.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from enum import Enum
from typing import Iterable, Optional


class Role(str, Enum):
    SENSOR = "sensor"
    DRIVER = "driver"
    MECHANIC = "mechanic"
    FOREMAN = "foreman"
    PARTNER = "partner"
    ADMIN = "admin"


@dataclass(frozen=True)
class Principal:
    id: str
    role: Role
    token: str
    mac_key: bytes

    @classmethod
    def from_config(cls, obj: dict) -> "Principal":
        mac_key = obj.get("mac_key")
        if mac_key is None:
            # deterministic fallback so small configs stay terse
            mac_key = hashlib.sha256(
                f"mac:{obj['id']}:{obj['token']}".encode()).hexdigest()
        return cls(id=str(obj["id"]), role=Role(obj["role"]),
                   token=str(obj["token"]), mac_key=bytes.fromhex(mac_key))


class Registry:
    def __init__(self, principals: Iterable[Principal]):
        self._by_token: dict[str, Principal] = {}
        self._by_id: dict[str, Principal] = {}
        for p in principals:
            if p.token in self._by_token:
                raise ValueError(f"duplicate token for principal {p.id!r}")
            if p.id in self._by_id:
                raise ValueError(f"duplicate principal id {p.id!r}")
            self._by_token[p.token] = p
            self._by_id[p.id] = p

    def by_token(self, token: str) -> Optional[Principal]:
        return self._by_token.get(token)

    def by_id(self, principal_id: str) -> Optional[Principal]:
        return self._by_id.get(principal_id)

    def keyring(self) -> dict[str, bytes]:
        ring = {p.id: p.mac_key for p in self._by_id.values()}
        # the service itself authors audit records
        ring.setdefault(SERVICE_AUTHOR, SERVICE_MAC_KEY)
        return ring

    def __iter__(self):
        return iter(self._by_id.values())

    def __len__(self) -> int:
        return len(self._by_id)


SERVICE_AUTHOR = "service"
SERVICE_MAC_KEY = hashlib.sha256(b"mac:service").digest()
