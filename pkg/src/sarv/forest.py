"""Token-tree state machine.

Every node behaves like a small contract. The four mutations (break a
bond, make a bond, delegate, claim back) run as explicit call chains: a
top-level call signed by a user may issue one inner call to a neighbouring
node, and each frame of the chain is written to the ledger as an
``AppCall`` entry listing the field changes it made.

Two identities travel with every call (see :class:`CallContext`): the
*originator* is the user who signed the transaction and is what ASA
ownership checks look at; the *immediate caller* is whoever made this
particular call, a user at the top level or a node for inner calls.
"""

from __future__ import annotations

from collections.abc import Callable, Iterator, Mapping
from dataclasses import dataclass, field
from typing import Any

from sarv.errors import AddressKindError, CycleError, UnknownAddress
from sarv.ledger import Address, EntryKind, Ledger, TokenNode, thaw

__all__ = ["CallContext", "CallFrame", "Forest", "TokenNode"]

DEFAULT_MAX_CALL_DEPTH = 8


@dataclass(frozen=True)
class CallContext:
    originator: Address
    immediate_caller: Address
    depth: int = 0
    request_id: str | None = None

    @classmethod
    def top_level(cls, signer: Address, request_id: str | None = None) -> CallContext:
        return cls(signer, signer, 0, request_id)

    def inner(self, caller: Address) -> CallContext:
        return CallContext(self.originator, caller, self.depth + 1, self.request_id)


@dataclass(frozen=True)
class CallFrame:
    """One executed (or rejected) frame of a call chain, for depth instrumentation."""

    function: str
    target: Address
    depth: int
    returned: bool


@dataclass
class _Changes:
    items: list[dict[str, Any]] = field(default_factory=list)


class Forest:
    """The forest of token trees living in ``ledger``.

    ``root_may_delegate`` relaxes the delegation rule so the holder of a
    tree root may delegate any of its descendants; by default the root
    holder is barred, exactly as the delegation condition is written.
    """

    def __init__(
        self,
        ledger: Ledger,
        max_call_depth: int = DEFAULT_MAX_CALL_DEPTH,
        root_may_delegate: bool = False,
    ) -> None:
        self.ledger = ledger
        self.max_call_depth = max_call_depth
        self.root_may_delegate = root_may_delegate
        self.last_trace: list[CallFrame] = []

    @property
    def state(self):
        return self.ledger.state

    # -- queries ---------------------------------------------------------

    def node(self, address: Address) -> TokenNode:
        return self.ledger.node(address)

    def holds(self, account: Address, node: Address) -> bool:
        """True if ``account`` currently holds the ASA bound to ``node``."""
        return self.state.holder_of(node) == account

    def ancestors(self, node: Address) -> Iterator[Address]:
        """Proper ancestors, nearest first. Stops quietly on cycles or dangling links."""
        nodes = self.state.nodes
        seen = {node}
        current = nodes[node].parent
        while current is not None and current not in seen and current in nodes:
            yield current
            seen.add(current)
            current = nodes[current].parent

    def root_or_none(self, node: Address) -> Address | None:
        last = node
        for last in self.ancestors(node):
            pass
        return last if self.state.nodes[last].parent is None else None

    def tree_root(self, node: Address) -> Address:
        self.node(node)
        root = self.root_or_none(node)
        if root is None:
            raise CycleError(f"parent chain of {node} does not end at a root")
        return root

    def holds_tree_root(self, account: Address, node: Address) -> bool:
        root = self.root_or_none(node)
        return root is not None and self.holds(account, root)

    def authorized_by_ancestor(self, account: Address, node: Address) -> bool:
        """``account`` holds some proper ancestor that may authorize its subtree."""
        nodes = self.state.nodes
        return any(
            nodes[p].can_authorize_children and self.holds(account, p)
            for p in self.ancestors(node)
        )

    def is_from_above(self, ctx: CallContext, node: Address) -> bool:
        self.node(node)
        return self.authorized_by_ancestor(ctx.originator, node) or self.holds_tree_root(
            ctx.originator, node
        )

    # -- frame plumbing --------------------------------------------------

    def _top_level(self, fn: Callable[[], bool]) -> bool:
        with self.ledger.commit():
            self.last_trace = []
            return fn()

    def _frame(
        self,
        ctx: CallContext,
        target: Address,
        function: str,
        args: Mapping[str, Any],
        body: Callable[[_Changes], bool],
    ) -> bool:
        changes = _Changes()
        reason = None
        if ctx.depth > self.max_call_depth:
            returned = False
            reason = "maxCallDepth"
        else:
            returned = body(changes)
        self.last_trace.append(CallFrame(function, target, ctx.depth, returned))
        self.ledger.append(
            EntryKind.APP_CALL,
            {
                "target": str(target),
                "function": function,
                "args": dict(args),
                "originator": str(ctx.originator),
                "immediateCaller": str(ctx.immediate_caller),
                "depth": ctx.depth,
                "returned": returned,
                "changes": changes.items,
                "reason": reason,
                "requestId": ctx.request_id,
            },
        )
        return returned

    def _set(self, changes: _Changes, node: TokenNode, name: str, value: Any) -> None:
        attr = {
            "parent": "parent",
            "canAuthorizeChildren": "can_authorize_children",
            "isDelegated": "is_delegated",
        }[name]
        setattr(node, attr, value)
        shown = str(value) if isinstance(value, Address) else value
        changes.items.append({"node": str(node.address), "field": name, "op": "set", "value": shown})

    def _children(self, changes: _Changes, node: TokenNode, op: str, child: Address) -> None:
        if op == "append":
            node.children.append(child)
        else:
            node.children.remove(child)
        changes.items.append(
            {"node": str(node.address), "field": "children", "op": op, "value": str(child)}
        )

    # -- breakBond -------------------------------------------------------

    def break_bond(self, ctx: CallContext, node: Address, from_: Address, to: Address) -> bool:
        self.node(node)
        return self._top_level(lambda: self._break_bond(ctx, node, from_, to))

    def _break_bond(self, ctx: CallContext, node: Address, from_: Address, to: Address) -> bool:
        def body(changes: _Changes) -> bool:
            this = self.node(node)
            # parent side: the child contract asks us to drop it
            if (
                ctx.immediate_caller in this.children
                and from_ == ctx.immediate_caller
                and to == this.address
            ):
                self._children(changes, this, "remove", from_)
                return True
            # child side: an authorized user asks us to leave our parent
            if self.authorized_by_ancestor(ctx.originator, node) or self.holds_tree_root(
                ctx.originator, node
            ):
                parent = this.parent
                if parent is None or parent not in self.state.nodes:
                    return False
                if self._break_bond(ctx.inner(node), parent, node, parent):
                    self._set(changes, this, "parent", None)
                    return True
            return False

        return self._frame(ctx, node, "breakBond", {"from": str(from_), "to": str(to)}, body)

    # -- makeBond --------------------------------------------------------

    def make_bond(self, ctx: CallContext, node: Address, from_: Address, to: Address) -> bool:
        self.node(node)
        self.node(to)
        return self._top_level(lambda: self._make_bond(ctx, node, from_, to))

    def _make_bond(self, ctx: CallContext, node: Address, from_: Address, to: Address) -> bool:
        def body(changes: _Changes) -> bool:
            this = self.node(node)
            authorized = (
                self.holds(ctx.originator, node) and this.can_authorize_children
            ) or self.is_from_above(ctx, node)
            # parent side: only the prospective child contract may ask to be adopted
            if (
                authorized
                and ctx.immediate_caller == to
                and from_ == this.address
                and to != this.parent
                and to not in this.children
            ):
                self._children(changes, this, "append", to)
                return True
            # child side: ask `to` to adopt us, then point our parent link at it.
            # A node being asked to adopt answers only as a parent; otherwise two
            # detached roots with one holder would bounce the request between them.
            if (
                not ctx.immediate_caller.is_node
                and from_ == this.address
                and this.parent is None
                and to in self.state.nodes
                and self.state.holder_of(node) == self.state.holder_of(to)
            ):
                accepted = self._make_bond(ctx.inner(node), to, to, node)
                if accepted:
                    self._set(changes, this, "parent", to)
                return accepted
            return False

        return self._frame(ctx, node, "makeBond", {"from": str(from_), "to": str(to)}, body)

    # -- delegate / claimBack -------------------------------------------

    def may_delegate(self, ctx: CallContext, node: Address) -> bool:
        """Authorization part of delegation, without the state guards."""
        if self.root_may_delegate:
            return self.state.nodes[node].parent is not None and self.is_from_above(ctx, node)
        return self.authorized_by_ancestor(ctx.originator, node) and not self.holds_tree_root(
            ctx.originator, node
        )

    def delegate(self, ctx: CallContext, node: Address, to: Address) -> bool:
        this = self.node(node)
        self.ledger.require_account(to)

        def body(changes: _Changes) -> bool:
            if this.is_delegated or to == this.owner or not self.may_delegate(ctx, node):
                return False
            self._set(changes, this, "isDelegated", True)
            self.ledger.move_asset(this.asa_id, to, "delegation", ctx)
            return True

        return self._top_level(lambda: self._frame(ctx, node, "delegate", {"to": str(to)}, body))

    def claim_back(self, ctx: CallContext, node: Address) -> bool:
        this = self.node(node)

        def body(changes: _Changes) -> bool:
            if not self.is_from_above(ctx, node):
                return False
            self._set(changes, this, "isDelegated", False)
            self.ledger.move_asset(this.asa_id, this.owner, "claimBack", ctx)
            return True

        return self._top_level(lambda: self._frame(ctx, node, "claimBack", {}, body))

    # -- flag and metadata setters --------------------------------------

    def set_can_authorize_children(self, ctx: CallContext, node: Address, value: bool) -> bool:
        this = self.node(node)

        def body(changes: _Changes) -> bool:
            if not self.is_from_above(ctx, node):
                return False
            self._set(changes, this, "canAuthorizeChildren", bool(value))
            return True

        return self._top_level(
            lambda: self._frame(
                ctx, node, "setCanAuthorizeChildren", {"value": bool(value)}, body
            )
        )

    def set_metadata(self, ctx: CallContext, node: Address, key: str, value: Any) -> bool:
        """Write one passport field on the node contract (ancestor-gated)."""
        this = self.node(node)
        value = thaw(value)

        def body(changes: _Changes) -> bool:
            if not self.is_from_above(ctx, node):
                return False
            this.metadata[key] = value
            changes.items.append(
                {"node": str(node), "field": "metadata", "op": "set", "key": key, "value": value}
            )
            return True

        return self._top_level(
            lambda: self._frame(ctx, node, "setMetadata", {"key": key, "value": value}, body)
        )

    # -- convenience -----------------------------------------------------

    def create_node(
        self,
        owner: Address,
        can_authorize_children: bool = False,
        metadata: Mapping[str, Any] | None = None,
        request_id: str | None = None,
    ) -> Address:
        address, _ = self.ledger.create_node(owner, can_authorize_children, metadata, request_id)
        return address

    def transfer(self, ctx: CallContext, node: Address, to: Address) -> bool:
        """Sell the ASA of ``node`` from the signer to ``to``."""
        this = self.node(node)
        if not to.is_user:
            raise AddressKindError(f"{to} is not a user account")
        return self.ledger.transfer_asset(this.asa_id, ctx.originator, to, ctx)

    def subtree(self, root: Address) -> list[Address]:
        """Pre-order listing of ``root`` and its descendants; cycle-safe."""
        if root not in self.state.nodes:
            raise UnknownAddress(str(root))
        order, stack, seen = [], [root], set()
        while stack:
            current = stack.pop()
            if current in seen or current not in self.state.nodes:
                continue
            seen.add(current)
            order.append(current)
            stack.extend(reversed(self.state.nodes[current].children))
        return order
