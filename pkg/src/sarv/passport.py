"""Log-replay indexer and product passports.

Everything here is a pure fold over :class:`~sarv.ledger.LogEntry`
records. The live ledger is never consulted, so a passport can be built
by anyone holding an exported log.
"""

from __future__ import annotations

from collections.abc import Iterable, Mapping, Sequence
from dataclasses import dataclass, field
from typing import Any

from sarv.errors import ReplayError, UnknownAddress
from sarv.ledger import (
    Address,
    Asset,
    EntryKind,
    LedgerState,
    LogEntry,
    TokenNode,
    thaw,
)


def _parse(seq: int, value: Any) -> Address:
    try:
        return Address.parse(value)
    except (ValueError, TypeError) as exc:
        raise ReplayError(seq, str(exc)) from None


def _opt(seq: int, value: Any) -> Address | None:
    return None if value is None else _parse(seq, value)


def _apply_change(state: LedgerState, seq: int, change: Mapping[str, Any]) -> None:
    node = state.nodes.get(_parse(seq, change["node"]))
    if node is None:
        raise ReplayError(seq, f"change targets unknown node {change['node']}")
    name, op, value = change["field"], change["op"], change["value"]
    if name == "parent" and op == "set":
        node.parent = _opt(seq, value)
    elif name == "children" and op == "append":
        node.children.append(_parse(seq, value))
    elif name == "children" and op == "remove":
        child = _parse(seq, value)
        if child not in node.children:
            raise ReplayError(seq, f"cannot remove {value}: not a child")
        node.children.remove(child)
    elif name == "canAuthorizeChildren" and op == "set":
        node.can_authorize_children = bool(value)
    elif name == "isDelegated" and op == "set":
        node.is_delegated = bool(value)
    elif name == "metadata" and op == "set":
        node.metadata[change["key"]] = thaw(value)
    else:
        raise ReplayError(seq, f"unknown change {name}/{op}")


def apply_entry(state: LedgerState, entry: LogEntry) -> None:
    """Fold one entry into ``state`` in place."""
    seq, p = entry.seq, entry.payload
    try:
        if entry.kind is EntryKind.CREATE_ACCOUNT:
            address = _parse(seq, p["address"])
            if address in state.accounts:
                raise ReplayError(seq, f"account {address} created twice")
            state.accounts[address] = p["publicKey"]
        elif entry.kind is EntryKind.CREATE_NODE:
            address, owner = _parse(seq, p["address"]), _parse(seq, p["owner"])
            asa_id = p["asaId"]
            if address in state.nodes or asa_id in state.assets:
                raise ReplayError(seq, "node or asset created twice")
            state.nodes[address] = TokenNode(
                address=address,
                asa_id=asa_id,
                owner=owner,
                can_authorize_children=bool(p["canAuthorizeChildren"]),
                metadata=thaw(p["metadata"]),
            )
            state.assets[asa_id] = Asset(asa_id, owner, address)
        elif entry.kind is EntryKind.TRANSFER_ASSET:
            asset = state.assets.get(p["asaId"])
            if asset is None:
                raise ReplayError(seq, f"transfer of unknown asset {p['asaId']}")
            to = _parse(seq, p["to"])
            asset.holder = to
            if p["path"] == "sale":
                state.nodes[asset.bound_node].owner = to
        elif entry.kind is EntryKind.APP_CALL:
            if p["returned"]:
                for change in p["changes"]:
                    _apply_change(state, seq, change)
            elif p["changes"]:
                raise ReplayError(seq, "rejected call carries changes")
    except KeyError as exc:
        raise ReplayError(seq, f"missing field {exc}") from None


def _check_sequence(entries: Sequence[LogEntry], start: int) -> None:
    for offset, entry in enumerate(entries):
        if not isinstance(entry, LogEntry):
            raise ReplayError(start + offset, f"not a log entry: {entry!r}")
        if entry.seq != start + offset:
            raise ReplayError(start + offset, f"expected seq {start + offset}, found {entry.seq}")


def rebuild_state(
    log: Iterable[LogEntry], initial: LedgerState | None = None, start: int = 0
) -> LedgerState:
    """Reconstruct accounts, nodes and assets from ``log``.

    With ``initial``/``start`` the fold resumes from a state already built
    from entries ``0..start-1``.
    """
    entries = list(log)
    _check_sequence(entries, start)
    state = LedgerState() if initial is None else initial.copy()
    for entry in entries:
        apply_entry(state, entry)
    return state


# -- tree snapshots ------------------------------------------------------


def subtree_document(state: LedgerState, root: Address) -> dict[str, Any]:
    """Nested document of ``root`` and its descendants (cycle-safe)."""
    if root not in state.nodes:
        raise UnknownAddress(str(root))

    def build(addr: Address, seen: frozenset[Address]) -> dict[str, Any]:
        node = state.nodes[addr]
        asset = state.assets.get(node.asa_id)
        return {
            "address": str(addr),
            "asaId": node.asa_id,
            "holder": None if asset is None else str(asset.holder),
            "owner": str(node.owner),
            "canAuthorizeChildren": node.can_authorize_children,
            "isDelegated": node.is_delegated,
            "metadata": thaw(node.metadata),
            "children": [
                build(c, seen | {c})
                for c in node.children
                if c in state.nodes and c not in seen
            ],
        }

    return build(root, frozenset({root}))


def tree_at(log: Sequence[LogEntry], seq: int, root: Address) -> dict[str, Any]:
    """The subtree under ``root`` as it stood right after entry ``seq``."""
    if not 0 <= seq < len(log):
        raise IndexError(f"seq {seq} outside log of length {len(log)}")
    state = rebuild_state(log[: seq + 1])
    if root not in state.nodes:
        raise UnknownAddress(f"{root} is not a node at seq {seq}")
    return subtree_document(state, root)


# -- passports -----------------------------------------------------------


@dataclass(frozen=True)
class HolderChange:
    seq: int
    from_: Address | None
    to: Address
    kind: str  # mint, sale, delegation or claimBack


@dataclass(frozen=True)
class BondEvent:
    seq: int
    event: str  # bonded or unbonded
    counterparty: Address
    role: str  # "parent" when the counterparty is our parent, "child" otherwise


@dataclass(frozen=True)
class DelegationSpan:
    start_seq: int
    end_seq: int | None
    delegate: Address


@dataclass
class PassportDocument:
    node_address: Address
    asa_id: int
    origin: int
    current_holder: Address
    beneficial_owner: Address
    holder_history: list[HolderChange] = field(default_factory=list)
    bond_history: list[BondEvent] = field(default_factory=list)
    delegation_spans: list[DelegationSpan] = field(default_factory=list)
    current_tree_root: Address | None = None
    metadata: dict[str, Any] = field(default_factory=dict)

    def to_document(self) -> dict[str, Any]:
        s = lambda a: None if a is None else str(a)  # noqa: E731
        return {
            "nodeAddress": str(self.node_address),
            "asaId": self.asa_id,
            "origin": self.origin,
            "currentHolder": str(self.current_holder),
            "beneficialOwner": str(self.beneficial_owner),
            "holderHistory": [
                {"seq": h.seq, "from": s(h.from_), "to": str(h.to), "kind": h.kind}
                for h in self.holder_history
            ],
            "bondHistory": [
                {"seq": b.seq, "event": b.event, "counterparty": str(b.counterparty), "role": b.role}
                for b in self.bond_history
            ],
            "delegationSpans": [
                {"startSeq": d.start_seq, "endSeq": d.end_seq, "delegate": str(d.delegate)}
                for d in self.delegation_spans
            ],
            "currentTreeRoot": s(self.current_tree_root),
            "metadata": thaw(self.metadata),
        }


def _root_of(state: LedgerState, node: Address) -> Address | None:
    seen = {node}
    current = node
    while True:
        parent = state.nodes[current].parent
        if parent is None:
            return current
        if parent in seen or parent not in state.nodes:
            return None
        seen.add(parent)
        current = parent


def passport_of(log: Sequence[LogEntry], node: Address) -> PassportDocument:
    """Full lifecycle record of ``node`` reconstructed from the log."""
    entries = list(log)
    _check_sequence(entries, 0)
    state = LedgerState()
    doc: PassportDocument | None = None
    me = str(node)

    for entry in entries:
        p = entry.payload
        if entry.kind is EntryKind.CREATE_NODE and p["address"] == me:
            owner = Address.parse(p["owner"])
            doc = PassportDocument(node, p["asaId"], entry.seq, owner, owner)
            doc.holder_history.append(HolderChange(entry.seq, None, owner, "mint"))
        elif doc is not None and entry.kind is EntryKind.TRANSFER_ASSET and p["asaId"] == doc.asa_id:
            to = Address.parse(p["to"])
            doc.holder_history.append(
                HolderChange(entry.seq, Address.parse(p["from"]), to, p["path"])
            )
            if p["path"] == "delegation":
                doc.delegation_spans.append(DelegationSpan(entry.seq, None, to))
            elif p["path"] == "claimBack" and doc.delegation_spans:
                last = doc.delegation_spans[-1]
                if last.end_seq is None:
                    doc.delegation_spans[-1] = DelegationSpan(last.start_seq, entry.seq, last.delegate)
        elif doc is not None and entry.kind is EntryKind.APP_CALL and p["returned"]:
            for change in p["changes"]:
                if change["field"] == "parent" and change["node"] == me:
                    if change["value"] is None:
                        old = state.nodes[node].parent
                        if old is not None:
                            doc.bond_history.append(BondEvent(entry.seq, "unbonded", old, "parent"))
                    else:
                        doc.bond_history.append(
                            BondEvent(entry.seq, "bonded", Address.parse(change["value"]), "parent")
                        )
                elif change["field"] == "children" and change["node"] == me:
                    event = "bonded" if change["op"] == "append" else "unbonded"
                    doc.bond_history.append(
                        BondEvent(entry.seq, event, Address.parse(change["value"]), "child")
                    )
        apply_entry(state, entry)

    if doc is None:
        raise UnknownAddress(f"{node} never appears in the log")
    this = state.nodes[node]
    doc.current_holder = state.assets[doc.asa_id].holder
    doc.beneficial_owner = this.owner
    doc.current_tree_root = _root_of(state, node)
    doc.metadata = thaw(this.metadata)
    return doc
