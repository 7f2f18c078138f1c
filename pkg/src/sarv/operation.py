"""Operation descriptors shared by the monitor preflight and the API."""

from __future__ import annotations

from collections.abc import Mapping
from dataclasses import dataclass, field
from typing import Any

from sarv.errors import MalformedOperation
from sarv.ledger import Address, freeze, thaw

# name -> (required args, optional args); address-valued args are marked with "@"
OPERATIONS: dict[str, tuple[tuple[str, ...], tuple[str, ...]]] = {
    "createNode": (("@owner",), ("canAuthorizeChildren", "metadata")),
    "makeBond": (("@node", "@from", "@to"), ()),
    "breakBond": (("@node",), ("@from", "@to")),
    "delegate": (("@node", "@to"), ()),
    "claimBack": (("@node",), ()),
    "setCanAuthorizeChildren": (("@node", "value"), ()),
    "setMetadata": (("@node", "key", "value"), ()),
    "transferAsset": (("@node", "@to"), ()),
}


@dataclass(frozen=True)
class Operation:
    """A named forest operation with JSON-native arguments.

    Address arguments are carried as their text encoding; :meth:`address`
    parses them back.
    """

    name: str
    args: Mapping[str, Any] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.name not in OPERATIONS:
            raise MalformedOperation(f"unknown operation {self.name!r}")
        if not isinstance(self.args, Mapping):
            raise MalformedOperation("args must be a mapping")
        required, optional = OPERATIONS[self.name]
        allowed = {a.lstrip("@") for a in required + optional} | {"signer"}
        for field in required:
            if field.lstrip("@") not in self.args:
                raise MalformedOperation(f"{self.name} needs argument {field.lstrip('@')!r}")
        extra = set(self.args) - allowed
        if extra:
            raise MalformedOperation(f"{self.name} got unexpected arguments {sorted(extra)}")
        for field in required + optional + ("@signer",):
            name = field.lstrip("@")
            if field.startswith("@") and name in self.args:
                try:
                    Address.parse(self.args[name])
                except ValueError as exc:
                    raise MalformedOperation(f"{self.name}.{name}: {exc}") from None
        normalized = {
            k: str(v) if isinstance(v, Address) else v for k, v in self.args.items()
        }
        object.__setattr__(self, "args", freeze(normalized))

    def address(self, name: str) -> Address:
        return Address.parse(self.args[name])

    def get(self, name: str, default: Any = None) -> Any:
        return self.args.get(name, default)

    def to_document(self) -> dict[str, Any]:
        return {"operation": self.name, "args": thaw(self.args)}

    @classmethod
    def from_document(cls, doc: Mapping[str, Any]) -> Operation:
        try:
            return cls(doc["operation"], doc.get("args", {}))
        except (KeyError, TypeError, AttributeError) as exc:
            raise MalformedOperation(f"bad operation document: {exc}") from None
