"""
Rebuilding history from the log
===============================

The ledger log is the only thing an indexer needs. This script replays it
to reconstruct current state, an earlier view of a tree, and the full
passport of one part.
"""

import io
import json

from sarv.fixtures import three_product_forest
from sarv.forest import CallContext
from sarv.ledger import Address, import_log
from sarv.passport import passport_of, rebuild_state, tree_at

fx = three_product_forest()
forest, n, a = fx.forest, fx.nodes, fx.accounts
bob, alice = CallContext.top_level(a["bob"]), CallContext.top_level(a["alice"])
before_move = fx.ledger.last_seq

forest.break_bond(bob, n["K"], n["K"], n["R3"])
forest.transfer(bob, n["K"], a["alice"])
forest.make_bond(alice, n["K"], n["K"], n["F"])

# Ship the log as text, read it back, and fold it.
buf = io.StringIO()
fx.ledger.export(buf)
print(f"exported {len(fx.ledger)} entries, {len(buf.getvalue())} bytes")
entries = import_log(io.StringIO(buf.getvalue()))
print("replayed state equals live state:", rebuild_state(entries) == fx.ledger.state)


def names(doc):
    """Flatten a tree document into node names, parents first."""
    return [fx.name_of(Address.parse(doc["address"]))] + [x for c in doc["children"] for x in names(c)]


def label(text):
    return fx.name_of(Address.parse(text)) if text else None


print("e-bike parts before the move:", names(tree_at(entries, before_move, n["R3"])))
print("e-bike parts now:           ", names(tree_at(entries, fx.ledger.last_seq, n["R3"])))

doc = passport_of(entries, n["K"]).to_document()
print(f"\npassport of K (asset {doc['asaId']}, minted at seq {doc['origin']}):")
for h in doc["holderHistory"]:
    print(f"  seq {h['seq']:>3}  {h['kind']:<10} {label(h['from'])} -> {label(h['to'])}")
for b in doc["bondHistory"]:
    print(f"  seq {b['seq']:>3}  {b['event']:<10} {b['role']} {label(b['counterparty'])}")
print("current root:", label(doc["currentTreeRoot"]))
print("\nraw document keys:", json.dumps(list(doc)))
