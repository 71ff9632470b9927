"""Service configuration.

Config files are plain `key = value` lines; `#` starts a comment. Unknown
keys are rejected so typos fail loudly. The principal registry is a JSON
file (a list of {id, role, token, mac_key?}) referenced from the config.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field
from typing import Optional

from .errors import ValidationError
from .labeling import DEFAULT_LINK_TOLERANCE_US
from .analysis import DEFAULT_ANOMALY_THRESHOLD
from .principals import Principal, Registry

_KNOWN_KEYS = {"listen_addr", "ledger_path", "principals_path",
               "anomaly_threshold", "link_tolerance_us", "ui_dist"}


@dataclass
class Config:
    listen_addr: str = "127.0.0.1:8321"
    ledger_path: str = "railmon.log"
    principals_path: str = "principals.json"
    anomaly_threshold: float = DEFAULT_ANOMALY_THRESHOLD
    link_tolerance_us: int = DEFAULT_LINK_TOLERANCE_US
    ui_dist: Optional[str] = None

    @property
    def host(self) -> str:
        return self.listen_addr.rsplit(":", 1)[0]

    @property
    def port(self) -> int:
        return int(self.listen_addr.rsplit(":", 1)[1])


def parse_config(text: str, base_dir: str = ".") -> Config:
    cfg = Config()
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValidationError(f"line {lineno}", "expected key = value")
        key, value = (part.strip() for part in line.split("=", 1))
        if key not in _KNOWN_KEYS:
            raise ValidationError(key, "unknown config key")
        if key == "anomaly_threshold":
            cfg.anomaly_threshold = float(value)
        elif key == "link_tolerance_us":
            cfg.link_tolerance_us = int(value)
        elif key in ("ledger_path", "principals_path", "ui_dist"):
            setattr(cfg, key, os.path.join(base_dir, value)
                    if not os.path.isabs(value) else value)
        else:
            setattr(cfg, key, value)
    return cfg


def load_config(path: str) -> Config:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_config(fh.read(), base_dir=os.path.dirname(
            os.path.abspath(path)))


def load_registry(path: str) -> Registry:
    with open(path, "r", encoding="utf-8") as fh:
        entries = json.load(fh)
    return Registry(Principal.from_config(e) for e in entries)
