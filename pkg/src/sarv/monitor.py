"""Off-chain structural checks over forest snapshots.

The node contracts only enforce local guards, so nothing on the ledger
stops a bond that closes a loop. These functions inspect a
:class:`~sarv.ledger.LedgerState` without touching the ledger and report
every broken forest invariant they find.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Any

from sarv.errors import CycleError, MalformedOperation, UnknownAddress
from sarv.ledger import Address, LedgerState
from sarv.operation import Operation


class ViolationCode(str, enum.Enum):
    CYCLE = "CYCLE"
    ASYMMETRIC_BOND = "ASYMMETRIC_BOND"
    MULTI_PARENT = "MULTI_PARENT"
    SELF_CHILD = "SELF_CHILD"
    DANGLING_REF = "DANGLING_REF"
    DELEGATED_HOLDER_MISMATCH = "DELEGATED_HOLDER_MISMATCH"


@dataclass(frozen=True)
class Violation:
    code: ViolationCode
    subject: Address
    detail: str
    members: tuple[Address, ...] = ()

    def to_document(self) -> dict[str, Any]:
        return {
            "code": self.code.value,
            "subject": str(self.subject),
            "detail": self.detail,
            "members": [str(m) for m in self.members],
        }


def _cycles(state: LedgerState) -> list[list[Address]]:
    # each node has at most one parent, so parent links form a functional graph
    nodes = state.nodes
    color: dict[Address, int] = {}
    found = []
    for start in sorted(nodes):
        path: list[Address] = []
        index: dict[Address, int] = {}
        current: Address | None = start
        while current is not None and current in nodes and current not in color:
            color[current] = 1
            index[current] = len(path)
            path.append(current)
            current = nodes[current].parent
        if current is not None and current in index:
            found.append(path[index[current]:])
        for n in path:
            color[n] = 2
    return found


def audit_forest(state: LedgerState) -> list[Violation]:
    """Return every violation in ``state``; empty iff it is a well-formed forest."""
    nodes, assets, accounts = state.nodes, state.assets, state.accounts
    out: list[Violation] = []

    for cycle in _cycles(state):
        members = tuple(sorted(cycle))
        out.append(
            Violation(
                ViolationCode.CYCLE,
                members[0],
                f"parent links loop through {len(members)} node(s)",
                members,
            )
        )

    listed_by: dict[Address, list[Address]] = {}
    for addr in sorted(nodes):
        node = nodes[addr]
        if addr in node.children:
            out.append(Violation(ViolationCode.SELF_CHILD, addr, "node lists itself as a child"))
        for child in node.children:
            listed_by.setdefault(child, []).append(addr)
            if child not in nodes:
                out.append(
                    Violation(ViolationCode.DANGLING_REF, addr, f"child {child} does not exist")
                )
            elif nodes[child].parent != addr:
                out.append(
                    Violation(
                        ViolationCode.ASYMMETRIC_BOND,
                        child,
                        f"listed as child of {addr} but parent is {nodes[child].parent}",
                    )
                )
        if node.parent is not None:
            if node.parent not in nodes:
                out.append(
                    Violation(
                        ViolationCode.DANGLING_REF, addr, f"parent {node.parent} does not exist"
                    )
                )
            elif addr not in nodes[node.parent].children:
                out.append(
                    Violation(
                        ViolationCode.ASYMMETRIC_BOND,
                        addr,
                        f"parent is {node.parent} which does not list it as a child",
                    )
                )

        asset = assets.get(node.asa_id)
        if asset is None:
            out.append(
                Violation(ViolationCode.DANGLING_REF, addr, f"asset {node.asa_id} does not exist")
            )
        else:
            if asset.bound_node != addr:
                out.append(
                    Violation(
                        ViolationCode.DANGLING_REF,
                        addr,
                        f"asset {node.asa_id} is bound to {asset.bound_node}",
                    )
                )
            delegated_ok = (asset.holder != node.owner) if node.is_delegated else (
                asset.holder == node.owner
            )
            if not delegated_ok:
                out.append(
                    Violation(
                        ViolationCode.DELEGATED_HOLDER_MISMATCH,
                        addr,
                        f"isDelegated={node.is_delegated} but holder={asset.holder} "
                        f"owner={node.owner}",
                    )
                )
        if node.owner not in accounts:
            out.append(
                Violation(ViolationCode.DANGLING_REF, addr, f"owner {node.owner} is not an account")
            )

    for child in sorted(listed_by):
        parents = set(listed_by[child])
        if len(parents) > 1:
            out.append(
                Violation(
                    ViolationCode.MULTI_PARENT,
                    child,
                    f"listed as a child by {len(parents)} nodes",
                    tuple(sorted(parents)),
                )
            )

    for asa_id in sorted(assets):
        asset = assets[asa_id]
        if asset.bound_node not in nodes:
            out.append(
                Violation(
                    ViolationCode.DANGLING_REF,
                    asset.bound_node,
                    f"asset {asa_id} is bound to a missing node",
                )
            )
        if asset.holder not in accounts:
            out.append(
                Violation(
                    ViolationCode.DANGLING_REF,
                    asset.bound_node,
                    f"asset {asa_id} holder {asset.holder} is not an account",
                )
            )
    return out


def would_create_cycle(state: LedgerState, child: Address, new_parent: Address) -> bool:
    """True iff making ``new_parent`` the parent of ``child`` closes a loop."""
    nodes = state.nodes
    for addr in (child, new_parent):
        if addr not in nodes:
            raise UnknownAddress(str(addr))
    if new_parent == child:
        return True
    seen: set[Address] = set()
    current: Address | None = new_parent
    while current is not None and current in nodes:
        if current == child:
            return True
        if current in seen:
            raise CycleError("snapshot already contains a cycle; audit it first")
        seen.add(current)
        current = nodes[current].parent
    return False


def preflight(state: LedgerState, op: Operation) -> list[Violation]:
    """Violations that executing ``op`` on ``state`` would introduce."""
    if not isinstance(op, Operation):
        raise MalformedOperation(f"expected Operation, got {type(op).__name__}")
    if op.name != "makeBond":
        return []
    node, from_, to = op.address("node"), op.address("from"), op.address("to")
    if from_ != node:
        return []
    if would_create_cycle(state, node, to):
        return [
            Violation(
                ViolationCode.CYCLE,
                node,
                f"bonding under {to} would make the node its own ancestor",
                (node, to),
            )
        ]
    return []
