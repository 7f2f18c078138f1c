"""In-process, total-ordered, append-only ledger.

The ledger owns every piece of mutable state in the system: user accounts,
single-unit assets, and the node records that make up the token forest.
Each state change is accompanied by one or more :class:`LogEntry` records;
the log alone is enough to rebuild the state (see :mod:`sarv.passport`).
"""

from __future__ import annotations

import base64
import enum
import functools
import json
import random
import threading
from collections.abc import Iterable, Iterator, Mapping
from contextlib import contextmanager
from dataclasses import dataclass, field
from types import MappingProxyType
from typing import IO, Any

from sarv.errors import (
    AddressKindError,
    LogRangeError,
    SarvError,
    UnknownAddress,
    UnknownAsset,
)

ADDRESS_BYTES = 32


class AddressKind(str, enum.Enum):
    USER = "user"
    NODE = "node"


@functools.lru_cache(maxsize=1 << 16)
def _address_text(kind: AddressKind, raw: bytes) -> str:
    return f"{kind.value}:{base64.b32encode(raw).decode('ascii').rstrip('=')}"


@dataclass(frozen=True, order=True)
class Address:
    """A 32-byte identifier for either a user account or a contract node."""

    kind: AddressKind
    raw: bytes

    def __post_init__(self) -> None:
        if len(self.raw) != ADDRESS_BYTES:
            raise ValueError(f"address must be {ADDRESS_BYTES} bytes, got {len(self.raw)}")

    def __str__(self) -> str:
        return _address_text(self.kind, self.raw)

    def __repr__(self) -> str:
        return f"Address({str(self)[:13]}…)"

    @property
    def is_user(self) -> bool:
        return self.kind is AddressKind.USER

    @property
    def is_node(self) -> bool:
        return self.kind is AddressKind.NODE

    @classmethod
    def parse(cls, text: str | Address) -> Address:
        if isinstance(text, Address):
            return text
        try:
            prefix, body = text.split(":", 1)
            kind = AddressKind(prefix)
            raw = base64.b32decode(body + "=" * (-len(body) % 8))
        except (ValueError, AttributeError) as exc:
            raise ValueError(f"not an address: {text!r}") from exc
        return cls(kind, raw)


def _addr(value: Address | None) -> str | None:
    return None if value is None else str(value)


@dataclass
class Asset:
    asa_id: int
    holder: Address
    bound_node: Address
    units: int = 1


@dataclass
class TokenNode:
    address: Address
    asa_id: int
    owner: Address
    parent: Address | None = None
    children: list[Address] = field(default_factory=list)
    can_authorize_children: bool = False
    is_delegated: bool = False
    metadata: dict[str, Any] = field(default_factory=dict)

    def copy(self) -> TokenNode:
        return TokenNode(
            address=self.address,
            asa_id=self.asa_id,
            owner=self.owner,
            parent=self.parent,
            children=list(self.children),
            can_authorize_children=self.can_authorize_children,
            is_delegated=self.is_delegated,
            metadata=thaw(self.metadata),
        )

    def to_document(self) -> dict[str, Any]:
        return {
            "address": str(self.address),
            "asaId": self.asa_id,
            "owner": str(self.owner),
            "parent": _addr(self.parent),
            "children": [str(c) for c in self.children],
            "canAuthorizeChildren": self.can_authorize_children,
            "isDelegated": self.is_delegated,
            "metadata": thaw(self.metadata),
        }


@dataclass
class LedgerState:
    """Accounts, assets and nodes. Compared field by field in replay checks."""

    accounts: dict[Address, str | None] = field(default_factory=dict)
    nodes: dict[Address, TokenNode] = field(default_factory=dict)
    assets: dict[int, Asset] = field(default_factory=dict)

    def copy(self) -> LedgerState:
        return LedgerState(
            accounts=dict(self.accounts),
            nodes={a: n.copy() for a, n in self.nodes.items()},
            assets={
                i: Asset(a.asa_id, a.holder, a.bound_node, a.units)
                for i, a in self.assets.items()
            },
        )

    def holder_of(self, node: Address) -> Address:
        return self.assets[self.nodes[node].asa_id].holder

    def to_document(self) -> dict[str, Any]:
        """Structured snapshot: accounts, nodes (with bonds) and assets."""
        return {
            "accounts": [
                {"address": str(a), "publicKey": pk}
                for a, pk in sorted(self.accounts.items())
            ],
            "nodes": [n.to_document() for _, n in sorted(self.nodes.items())],
            "assets": [
                {
                    "asaId": a.asa_id,
                    "holder": str(a.holder),
                    "boundNode": str(a.bound_node),
                    "units": a.units,
                }
                for _, a in sorted(self.assets.items())
            ],
        }


class EntryKind(str, enum.Enum):
    CREATE_ACCOUNT = "CreateAccount"
    CREATE_NODE = "CreateNode"
    TRANSFER_ASSET = "TransferAsset"
    APP_CALL = "AppCall"


def freeze(value: Any) -> Any:
    """Recursively convert dicts/lists into read-only equivalents."""
    if isinstance(value, Mapping):
        return MappingProxyType({k: freeze(v) for k, v in value.items()})
    if isinstance(value, (list, tuple)):
        return tuple(freeze(v) for v in value)
    return value


def thaw(value: Any) -> Any:
    if isinstance(value, Mapping):
        return {k: thaw(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [thaw(v) for v in value]
    return value


@dataclass(frozen=True)
class LogEntry:
    seq: int
    kind: EntryKind
    payload: Mapping[str, Any]
    timestamp: int

    def __post_init__(self) -> None:
        object.__setattr__(self, "kind", EntryKind(self.kind))
        object.__setattr__(self, "payload", freeze(self.payload))

    def to_record(self) -> dict[str, Any]:
        return {
            "seq": self.seq,
            "kind": self.kind.value,
            "payload": thaw(self.payload),
            "timestamp": self.timestamp,
        }

    def to_line(self) -> str:
        return json.dumps(self.to_record(), sort_keys=True, separators=(",", ":"))

    @classmethod
    def from_line(cls, line: str) -> LogEntry:
        record = json.loads(line)
        return cls(
            seq=record["seq"],
            kind=EntryKind(record["kind"]),
            payload=record["payload"],
            timestamp=record["timestamp"],
        )


def export_log(entries: Iterable[LogEntry], stream: IO[str]) -> None:
    for entry in entries:
        stream.write(entry.to_line())
        stream.write("\n")


def import_log(stream: IO[str] | Iterable[str]) -> list[LogEntry]:
    return [LogEntry.from_line(line) for line in stream if line.strip()]


class Ledger:
    """Single-writer ledger.

    All mutations go through :meth:`commit`, which serializes writers and
    stamps the entries of one call chain with a shared logical timestamp.

    ``seed`` makes address generation reproducible; leave it ``None`` for
    OS randomness.
    """

    def __init__(self, seed: int | None = None) -> None:
        self.state = LedgerState()
        self._entries: list[LogEntry] = []
        self._lock = threading.RLock()
        self._nesting = 0
        self._clock = 0
        self._rng: random.Random = (
            random.SystemRandom() if seed is None else random.Random(seed)
        )
        self._next_asa_id = 1

    @classmethod
    def restore(
        cls, entries: Iterable[LogEntry], state: LedgerState, seed: int | None = None
    ) -> Ledger:
        """Resume a ledger from an imported log and its rebuilt state."""
        ledger = cls(seed=seed)
        ledger._entries = list(entries)
        ledger.state = state
        ledger._clock = max((e.timestamp for e in ledger._entries), default=0)
        ledger._next_asa_id = max(state.assets, default=0) + 1
        return ledger

    # -- writer side -----------------------------------------------------

    @contextmanager
    def commit(self) -> Iterator[None]:
        with self._lock:
            if self._nesting == 0:
                self._clock += 1
            self._nesting += 1
            try:
                yield
            finally:
                self._nesting -= 1

    def append(self, kind: EntryKind, payload: Mapping[str, Any]) -> LogEntry:
        with self.commit():
            entry = LogEntry(len(self._entries), kind, payload, self._clock)
            self._entries.append(entry)
            return entry

    def _fresh_address(self, kind: AddressKind, raw: bytes | None = None) -> Address:
        taken = self.state.accounts if kind is AddressKind.USER else self.state.nodes
        if raw is not None:
            address = Address(kind, raw)
            if address in taken:
                raise SarvError(f"address {address} already exists")
            return address
        while True:
            address = Address(kind, self._rng.randbytes(ADDRESS_BYTES))
            if address not in taken:
                return address

    def create_account(self, public_key: bytes | None = None) -> Address:
        """Register a user account.

        When ``public_key`` is given (32 raw Ed25519 bytes) the address is
        the key itself, so signatures can be verified against it.
        """
        with self.commit():
            address = self._fresh_address(AddressKind.USER, public_key)
            pk = public_key.hex() if public_key is not None else None
            self.state.accounts[address] = pk
            self.append(EntryKind.CREATE_ACCOUNT, {"address": str(address), "publicKey": pk})
            return address

    def create_node(
        self,
        owner: Address,
        can_authorize_children: bool = False,
        metadata: Mapping[str, Any] | None = None,
        request_id: str | None = None,
    ) -> tuple[Address, int]:
        with self.commit():
            self.require_account(owner)
            address = self._fresh_address(AddressKind.NODE)
            asa_id = self._next_asa_id
            self._next_asa_id += 1
            meta = thaw(dict(metadata or {}))
            self.state.nodes[address] = TokenNode(
                address=address,
                asa_id=asa_id,
                owner=owner,
                can_authorize_children=bool(can_authorize_children),
                metadata=meta,
            )
            self.state.assets[asa_id] = Asset(asa_id, owner, address)
            self.append(
                EntryKind.CREATE_NODE,
                {
                    "address": str(address),
                    "asaId": asa_id,
                    "owner": str(owner),
                    "canAuthorizeChildren": bool(can_authorize_children),
                    "metadata": meta,
                    "requestId": request_id,
                },
            )
            return address, asa_id

    def transfer_asset(self, asa_id: int, from_: Address, to: Address, ctx) -> bool:
        """Plain holder-initiated transfer (a sale).

        Accepted only when the signer holds the asset, ``from_`` names that
        holder, and the bound node is not delegated. A sale moves the
        beneficial owner along with the holder. Rejections are logged as an
        ``AppCall`` with ``returned = False``.
        """
        with self.commit():
            asset = self.asset(asa_id)
            self.require_account(to)
            node = self.state.nodes[asset.bound_node]
            ok = (
                ctx.originator == from_ == asset.holder
                and not node.is_delegated
            )
            if not ok:
                self.append(
                    EntryKind.APP_CALL,
                    {
                        "target": str(asset.bound_node),
                        "function": "transferAsset",
                        "args": {"asaId": asa_id, "from": str(from_), "to": str(to)},
                        "originator": str(ctx.originator),
                        "immediateCaller": str(ctx.immediate_caller),
                        "depth": ctx.depth,
                        "returned": False,
                        "changes": [],
                        "reason": None,
                        "requestId": ctx.request_id,
                    },
                )
                return False
            self.move_asset(asa_id, to, "sale", ctx)
            return True

    def move_asset(self, asa_id: int, to: Address, path: str, ctx) -> None:
        """Unconditional asset move used by the sale, delegate and claimBack paths."""
        with self.commit():
            asset = self.asset(asa_id)
            previous = asset.holder
            asset.holder = to
            if path == "sale":
                self.state.nodes[asset.bound_node].owner = to
            self.append(
                EntryKind.TRANSFER_ASSET,
                {
                    "asaId": asa_id,
                    "from": str(previous),
                    "to": str(to),
                    "path": path,
                    "originator": str(ctx.originator),
                    "requestId": ctx.request_id,
                },
            )

    # -- reader side -----------------------------------------------------

    def __len__(self) -> int:
        return len(self._entries)

    @property
    def last_seq(self) -> int:
        return len(self._entries) - 1

    def require_account(self, address: Address) -> None:
        if not isinstance(address, Address):
            raise TypeError(f"expected Address, got {type(address).__name__}")
        if not address.is_user:
            raise AddressKindError(f"{address} is not a user account")
        if address not in self.state.accounts:
            raise UnknownAddress(str(address))

    def asset(self, asa_id: int) -> Asset:
        try:
            return self.state.assets[asa_id]
        except KeyError:
            raise UnknownAsset(asa_id) from None

    def asset_holder(self, asa_id: int) -> Address:
        with self._lock:
            return self.asset(asa_id).holder

    def node(self, address: Address) -> TokenNode:
        try:
            return self.state.nodes[address]
        except KeyError:
            raise UnknownAddress(str(address)) from None

    def read_log(self, from_seq: int = 0, to_seq: int | None = None) -> list[LogEntry]:
        with self._lock:
            end = len(self._entries) if to_seq is None else to_seq
            if not 0 <= from_seq <= end <= len(self._entries):
                raise LogRangeError(
                    f"range [{from_seq}, {end}) outside log of length {len(self._entries)}"
                )
            return self._entries[from_seq:end]

    def snapshot(self) -> LedgerState:
        with self._lock:
            return self.state.copy()

    def export(self, stream: IO[str]) -> None:
        export_log(self.read_log(), stream)
