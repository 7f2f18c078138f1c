"""
Build, sign, submit
===================

The service never holds private keys. A client asks it to build an
unsigned request, signs the canonical bytes locally, and submits the
signature. Every call is metered against the organization's API key.
"""

from sarv.api import SarvApi, UnsignedRequest, Wallet, deterministic_seed
from sarv.fixtures import three_product_forest

wallet = Wallet()
keys = {name: wallet.add(name, deterministic_seed(name)) for name in ("alice", "bob", "carol", "dave")}
fx = three_product_forest(public_keys=keys)
api = SarvApi(fx.ledger, fx.forest)
key = api.issue_key("acme-recycling")
headers = {"X-Api-Key": key.key_id}

built = api.handle("break-bond", {"node": str(fx.nodes["I"])}, headers)
print("unsigned request:", built["request"])
request = UnsignedRequest.from_document(built["request"])
print("required signer:", fx.name_of(request.required_signer))

# Signing with the wrong key is refused and leaves no trace in the log.
length = len(fx.ledger)
bad = api.handle("submit", {"request": built["request"],
                            "signature": wallet.sign_request("alice", request).hex()}, headers)
print("signed by alice:", bad["error"], "| log grew:", len(fx.ledger) - length)

good = api.handle("submit", {"request": built["request"],
                             "signature": wallet.sign_request("bob", request).hex()}, headers)
print("signed by bob:", good)

again = api.handle("submit", {"request": built["request"],
                              "signature": wallet.sign_request("bob", request).hex()}, headers)
print("replayed:", again["error"], "-", again["message"])

print("usage:", api.handle("usage-report", {"organization": "acme-recycling"}, {})["usage"])
