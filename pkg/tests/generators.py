"""Random forests, snapshots and operation sequences for property tests."""

from __future__ import annotations

import random

from sarv.errors import SarvError
from sarv.forest import CallContext, Forest
from sarv.ledger import Address, AddressKind, Asset, Ledger, LedgerState, TokenNode


def user(i: int) -> Address:
    return Address(AddressKind.USER, i.to_bytes(32, "big"))


def node_addr(i: int) -> Address:
    return Address(AddressKind.NODE, (1000 + i).to_bytes(32, "big"))


def random_forest_state(rng: random.Random, n_nodes: int, n_users: int = 4) -> LedgerState:
    """A well-formed forest snapshot built directly (no ledger involved)."""
    s = LedgerState()
    users = [user(i) for i in range(n_users)]
    for u in users:
        s.accounts[u] = None
    for i in range(n_nodes):
        addr = node_addr(i)
        owner = rng.choice(users)
        parent = None
        if i and rng.random() < 0.75:
            parent = node_addr(rng.randrange(i))
        node = TokenNode(addr, asa_id=i + 1, owner=owner, parent=parent,
                         can_authorize_children=rng.random() < 0.5)
        holder = owner
        if rng.random() < 0.15:
            node.is_delegated = True
            holder = rng.choice([u for u in users if u != owner])
        s.nodes[addr] = node
        s.assets[i + 1] = Asset(i + 1, holder, addr)
        if parent is not None:
            s.nodes[parent].children.append(addr)
    return s


DEFECTS = (
    "cycle", "drop_child", "orphan_child", "extra_parent", "self_child",
    "dangling_parent", "dangling_child", "flip_delegated", "drop_asset", "stray_owner",
)


def plant_defect(rng: random.Random, s: LedgerState, defect: str) -> None:
    nodes = sorted(s.nodes)
    if defect == "cycle":
        non_roots = [n for n in nodes if s.nodes[n].parent is not None]
        if not non_roots:
            return
        n = rng.choice(non_roots)
        root = n
        while s.nodes[root].parent is not None:
            root = s.nodes[root].parent
        # root adopts-into its own descendant: consistent bonds, but a loop
        s.nodes[root].parent = n
        s.nodes[n].children.append(root)
    elif defect == "drop_child":
        parents = [n for n in nodes if s.nodes[n].children]
        if parents:
            p = rng.choice(parents)
            s.nodes[p].children.remove(rng.choice(s.nodes[p].children))
    elif defect == "orphan_child":
        kids = [n for n in nodes if s.nodes[n].parent is not None]
        if kids:
            s.nodes[rng.choice(kids)].parent = None
    elif defect == "extra_parent":
        kids = [n for n in nodes if s.nodes[n].parent is not None]
        if kids:
            c = rng.choice(kids)
            others = [p for p in nodes if p != s.nodes[c].parent and c not in s.nodes[p].children and p != c]
            if others:
                s.nodes[rng.choice(others)].children.append(c)
    elif defect == "self_child":
        n = rng.choice(nodes)
        s.nodes[n].children.append(n)
    elif defect == "dangling_parent":
        s.nodes[rng.choice(nodes)].parent = node_addr(9999)
    elif defect == "dangling_child":
        s.nodes[rng.choice(nodes)].children.append(node_addr(9998))
    elif defect == "flip_delegated":
        n = s.nodes[rng.choice(nodes)]
        n.is_delegated = not n.is_delegated
    elif defect == "drop_asset":
        del s.assets[s.nodes[rng.choice(nodes)].asa_id]
    elif defect == "stray_owner":
        s.nodes[rng.choice(nodes)].owner = user(777)


# -- live operation sequences ------------------------------------------------------


def random_operation(rng: random.Random, forest: Forest, users: list[Address], max_nodes: int):
    """Run one random, well-formed forest operation. Returns (name, result)."""
    state = forest.state
    nodes = sorted(state.nodes)

    def signer_for(node):
        # bias towards accounts that plausibly pass authorization
        pool = list(users)
        pool.append(state.holder_of(node))
        root = forest.root_or_none(node)
        if root is not None:
            pool.extend([state.holder_of(root)] * 2)
        for p in forest.ancestors(node):
            pool.append(state.holder_of(p))
        return rng.choice(pool)

    if not nodes or (len(nodes) < max_nodes and rng.random() < 0.2):
        owner = rng.choice(users)
        forest.create_node(owner, rng.random() < 0.5, {"batch": rng.randrange(100)})
        return "createNode", True

    node = rng.choice(nodes)
    ctx = CallContext.top_level(signer_for(node))
    kind = rng.choice(
        ["makeBond"] * 4 + ["breakBond"] * 3 + ["delegate", "claimBack", "setFlag", "setMeta", "transfer"]
    )
    if kind == "makeBond":
        to = rng.choice(nodes)
        frm = node if rng.random() < 0.9 else rng.choice(nodes)
        if rng.random() < 0.5:
            # satisfy the same-holder precondition now and then
            ctx = CallContext.top_level(state.holder_of(node))
        return kind, forest.make_bond(ctx, node, frm, to)
    if kind == "breakBond":
        parent = state.nodes[node].parent
        return kind, forest.break_bond(ctx, node, node, parent or node)
    if kind == "delegate":
        return kind, forest.delegate(ctx, node, rng.choice(users))
    if kind == "claimBack":
        return kind, forest.claim_back(ctx, node)
    if kind == "setFlag":
        return kind, forest.set_can_authorize_children(ctx, node, rng.random() < 0.5)
    if kind == "setMeta":
        return kind, forest.set_metadata(ctx, node, rng.choice("abc"), rng.randrange(10))
    ctx = CallContext.top_level(state.holder_of(node) if rng.random() < 0.7 else rng.choice(users))
    return kind, forest.transfer(ctx, node, rng.choice(users))


def random_session(seed: int, length: int, max_nodes: int, n_users: int = 4, **forest_options):
    rng = random.Random(seed)
    ledger = Ledger(seed=seed)
    forest = Forest(ledger, **forest_options)
    users = [ledger.create_account() for _ in range(n_users)]
    ops = []
    for _ in range(length):
        try:
            ops.append(random_operation(rng, forest, users, max_nodes))
        except SarvError:
            ops.append(("error", False))
    return ledger, forest, users, ops
