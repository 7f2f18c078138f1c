"""Ready-made forests for demos and tests."""

from __future__ import annotations

from dataclasses import dataclass

from sarv.forest import CallContext, Forest
from sarv.ledger import Address, Ledger

# (tree owner, [(node, parent or None, canAuthorizeChildren)])
THREE_PRODUCT_LAYOUT: list[tuple[str, list[tuple[str, str | None, bool]]]] = [
    ("carol", [("R1", None, True), ("A", "R1", False), ("B", "R1", False)]),
    ("alice", [("R2", None, True), ("D", "R2", False), ("F", "R2", True), ("G", "F", False)]),
    ("bob", [("R3", None, True), ("I", "R3", False), ("K", "R3", False)]),
]


@dataclass
class NamedForest:
    ledger: Ledger
    forest: Forest
    accounts: dict[str, Address]
    nodes: dict[str, Address]

    def name_of(self, address: Address | None) -> str | None:
        if address is None:
            return None
        for table in (self.nodes, self.accounts):
            for name, addr in table.items():
                if addr == address:
                    return name
        return str(address)

    def __getitem__(self, name: str) -> Address:
        return self.nodes[name] if name in self.nodes else self.accounts[name]


def build_forest(
    layout: list[tuple[str, list[tuple[str, str | None, bool]]]],
    extra_accounts: tuple[str, ...] = (),
    seed: int | None = 0,
    public_keys: dict[str, bytes] | None = None,
    **forest_options,
) -> NamedForest:
    """Create accounts and nodes, then bond each node under its parent.

    Bonds are made through ``makeBond`` signed by the tree owner, so the
    resulting log is a faithful record of how the forest was assembled.
    Accounts listed in ``public_keys`` are registered with that key so a
    wallet can sign for them.
    """
    public_keys = public_keys or {}
    ledger = Ledger(seed=seed)
    forest = Forest(ledger, **forest_options)
    accounts: dict[str, Address] = {}
    nodes: dict[str, Address] = {}
    for owner, _ in layout:
        if owner not in accounts:
            accounts[owner] = ledger.create_account(public_keys.get(owner))
    for name in extra_accounts:
        accounts[name] = ledger.create_account(public_keys.get(name))
    for owner, members in layout:
        for name, _, can_authorize in members:
            nodes[name] = forest.create_node(accounts[owner], can_authorize, {"name": name})
    for owner, members in layout:
        ctx = CallContext.top_level(accounts[owner])
        for name, parent, _ in members:
            if parent is not None and not forest.make_bond(ctx, nodes[name], nodes[name], nodes[parent]):
                raise RuntimeError(f"fixture bond {name} -> {parent} was refused")
    return NamedForest(ledger, forest, accounts, nodes)


def three_product_forest(
    seed: int | None = 0, public_keys: dict[str, bytes] | None = None, **forest_options
) -> NamedForest:
    """Three product trees, ten nodes.

    Tree 1 (carol): R1 -> A, B.  Tree 2 (alice): R2 -> D, F; F -> G.
    Tree 3 (bob): R3 -> I, K.  Roots and F may authorize their children.
    """
    return build_forest(
        THREE_PRODUCT_LAYOUT, extra_accounts=("dave",), seed=seed, public_keys=public_keys, **forest_options
    )
