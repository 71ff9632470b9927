import pytest

from railmon.ledger import Ledger
from railmon.principals import Principal, Registry, Role

# one "[PASS]/[FAIL] criterion: detail" line per acceptance criterion,
# echoed in the terminal summary so they survive output capture
ACCEPTANCE_LINES: list = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)

TOKENS = {
    Role.SENSOR: "tok-sensor",
    Role.DRIVER: "tok-driver",
    Role.MECHANIC: "tok-mech",
    Role.FOREMAN: "tok-foreman",
    Role.PARTNER: "tok-partner",
    Role.ADMIN: "tok-admin",
}

PRINCIPAL_IDS = {
    Role.SENSOR: "sensor1",
    Role.DRIVER: "driver1",
    Role.MECHANIC: "mech1",
    Role.FOREMAN: "foreman1",
    Role.PARTNER: "partner1",
    Role.ADMIN: "admin1",
}


def make_registry() -> Registry:
    return Registry([
        Principal(PRINCIPAL_IDS[role], role, TOKENS[role],
                  bytes([i + 1]) * 32)
        for i, role in enumerate(Role)
    ])


@pytest.fixture
def registry() -> Registry:
    return make_registry()


@pytest.fixture
def ledger(tmp_path, registry) -> Ledger:
    store = Ledger(str(tmp_path / "test.log"), registry.keyring())
    yield store
    store.close()


def auth(role: Role) -> dict:
    return {"Authorization": f"Bearer {TOKENS[role]}"}
