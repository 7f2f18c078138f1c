"""
Why preflight exists
====================

Each node only checks its own neighbourhood, so a chain A -> B -> C can be
closed into a loop by asking C to adopt A. The audit sees the damage; the
strict API refuses the request before it is ever signed.
"""

from sarv.api import SarvApi, Wallet, deterministic_seed
from sarv.errors import PreflightRejected
from sarv.fixtures import build_forest
from sarv.monitor import audit_forest
from sarv.operation import Operation


def chain(strict):
    wallet = Wallet()
    key = wallet.add("u", deterministic_seed("demo-u"))
    fx = build_forest([("u", [("A", None, True), ("B", "A", True), ("C", "B", True)])],
                      public_keys={"u": key})
    return fx, SarvApi(fx.ledger, fx.forest, strict=strict), wallet


op_for = lambda fx: Operation("makeBond", {"node": fx.nodes["A"], "from": fx.nodes["A"], "to": fx.nodes["C"]})

# Permissive: the request goes through and the forest now has a loop.
fx, api, wallet = chain(strict=False)
key = api.issue_key("demo")
request = api.build_request(key.key_id, op_for(fx))
print("permissive makeBond(A under C):",
      api.submit_signed(key.key_id, request, wallet.sign_request("u", request)).result)
for v in audit_forest(fx.ledger.state):
    print(" ", v.code.value, "members:", sorted(fx.name_of(m) for m in v.members))

# Strict: preflight simulates the bond against a snapshot and says no.
fx, api, wallet = chain(strict=True)
key = api.issue_key("demo")
try:
    api.build_request(key.key_id, op_for(fx))
except PreflightRejected as err:
    print("strict makeBond(A under C): rejected,", [v.code.value for v in err.violations])
print("audit after rejection:", audit_forest(fx.ledger.state) or "clean")
