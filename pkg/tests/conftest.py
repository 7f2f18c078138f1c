import pytest

from sarv.api import SarvApi, Wallet, deterministic_seed
from sarv.fixtures import three_product_forest

ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def products():
    return three_product_forest(seed=1)


@pytest.fixture
def api_env():
    """An API over the three-product forest, with wallet keys for every account."""
    wallet = Wallet()
    keys = {name: wallet.add(name, deterministic_seed(name)) for name in ("alice", "bob", "carol", "dave")}
    fx = three_product_forest(seed=2, public_keys=keys)
    api = SarvApi(fx.ledger, fx.forest)
    key = api.issue_key("acme")
    return fx, api, key, wallet


@pytest.fixture
def acceptance_report():
    def record(criterion: str, passed: bool, detail: str = "") -> None:
        status = "PASS" if passed else "FAIL"
        ACCEPTANCE_LINES.append(f"[{status}] {criterion}" + (f" -- {detail}" if detail else ""))

    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
