"""
Lending out a part and taking it back
=====================================

Alice owns the e-scooter R2. She sold its drive unit F (which may
authorize its children) to a workshop, bob. Bob can lend the motor G under
F to a repair shop, dave. The root holder reclaims it later.
"""

from sarv.fixtures import three_product_forest
from sarv.forest import CallContext, Forest

fx = three_product_forest()
forest, n, a = fx.forest, fx.nodes, fx.accounts
state = fx.ledger.state


def status(node):
    record = state.nodes[node]
    return (f"{fx.name_of(node)}: holder={fx.name_of(state.holder_of(node))} "
            f"owner={fx.name_of(record.owner)} delegated={record.is_delegated}")


alice, bob = CallContext.top_level(a["alice"]), CallContext.top_level(a["bob"])

# The root holder may not delegate under the default rule: delegation is for
# mid-tree authorizers, and roots can never be delegated at all.
print("alice delegates G:", forest.delegate(alice, n["G"], a["dave"]))
print("anyone delegates R2:", any(forest.delegate(CallContext.top_level(x), n["R2"], a["dave"])
                                  for x in a.values()))

forest.transfer(alice, n["F"], a["bob"])
print("\nafter selling F to bob:", status(n["F"]))
print("bob delegates G to dave:", forest.delegate(bob, n["G"], a["dave"]))
print(status(n["G"]))

# While delegated the asset cannot be resold by the temporary holder.
print("dave resells G:", forest.transfer(CallContext.top_level(a["dave"]), n["G"], a["carol"]))

print("alice claims G back:", forest.claim_back(alice, n["G"]))
print(status(n["G"]))

# Deployments that want root holders to delegate directly can opt in.
relaxed = Forest(fx.ledger, root_may_delegate=True)
print("\nwith root delegation enabled, alice delegates D:", relaxed.delegate(alice, n["D"], a["dave"]))
print(status(n["D"]))
print("claimed back:", relaxed.claim_back(alice, n["D"]))
