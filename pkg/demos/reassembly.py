"""
Moving a battery pack between products
======================================

Three products share one forest: a bicycle (carol), an e-scooter (alice)
and an e-bike (bob). Bob pulls the battery pack K out of the e-bike,
sells it to alice, and alice fits it into the scooter's drive unit F.
"""

from sarv.fixtures import three_product_forest
from sarv.forest import CallContext
from sarv.monitor import audit_forest

fx = three_product_forest()
forest, n, a = fx.forest, fx.nodes, fx.accounts


def show(root):
    """Print a tree with node names, one line per node."""
    def walk(node, depth):
        holder = fx.name_of(forest.state.holder_of(node))
        print("  " * depth + f"{fx.name_of(node)} (held by {holder})")
        for child in forest.node(node).children:
            walk(child, depth + 1)
    walk(root, 1)


print("Before:")
for root in ("R1", "R2", "R3"):
    show(n[root])

# Disassembly: K asks its parent R3 to let go. The parent side runs as an
# inner call, so the trace has two frames.
bob = CallContext.top_level(a["bob"])
print("\nbreakBond(K):", forest.break_bond(bob, n["K"], n["K"], n["R3"]))
for frame in forest.last_trace:
    print(f"  depth {frame.depth}: {frame.function} on {fx.name_of(frame.target)} -> {frame.returned}")

# K is now a detached root held by bob. Bonding needs one holder on both sides,
# so bob sells it first.
print("transfer(K -> alice):", forest.transfer(bob, n["K"], a["alice"]))

alice = CallContext.top_level(a["alice"])
print("makeBond(K under F):", forest.make_bond(alice, n["K"], n["K"], n["F"]))

print("\nAfter:")
for root in ("R2", "R3"):
    show(n[root])
print("\ntree root of K:", fx.name_of(forest.tree_root(n["K"])))
print("audit:", audit_forest(forest.state) or "clean")
