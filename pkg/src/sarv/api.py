"""Organization-facing facade.

Clients never hand private keys to the service. A mutation is a two-step
exchange: ``build_request`` returns an :class:`UnsignedRequest` naming the
account that must sign it, the client signs it with its own
:class:`Wallet`, and ``submit_signed`` verifies the signature before the
operation touches the ledger. Every authenticated endpoint invocation
bumps the calling key's counter, whether or not the operation succeeds.
"""

from __future__ import annotations

import hashlib
import json
import secrets
import threading
import uuid
from collections.abc import Callable, Mapping
from dataclasses import dataclass, field
from typing import Any, Protocol

from cryptography.exceptions import InvalidSignature
from cryptography.hazmat.primitives.asymmetric.ed25519 import (
    Ed25519PrivateKey,
    Ed25519PublicKey,
)
from cryptography.hazmat.primitives.serialization import Encoding, PublicFormat

from sarv.errors import (
    AuthenticationError,
    MalformedOperation,
    PreflightRejected,
    RequestRejected,
    SarvError,
    UnknownAddress,
)
from sarv.forest import CallContext, Forest
from sarv.ledger import Address, Ledger
from sarv.monitor import audit_forest, preflight
from sarv.operation import Operation
from sarv.passport import passport_of, tree_at

DEFAULT_EXPIRY_WINDOW = 1000


class SignatureScheme(Protocol):
    def verify(self, public_key: bytes, message: bytes, signature: bytes) -> bool: ...


class Ed25519Scheme:
    def verify(self, public_key: bytes, message: bytes, signature: bytes) -> bool:
        try:
            Ed25519PublicKey.from_public_bytes(public_key).verify(signature, message)
        except (InvalidSignature, ValueError):
            return False
        return True


class Wallet:
    """Client-side key store: the only place private keys live."""

    def __init__(self) -> None:
        self._keys: dict[str, Ed25519PrivateKey] = {}

    def add(self, name: str, seed: bytes | None = None) -> bytes:
        """Add a key under ``name`` and return its raw public key.

        A 32-byte ``seed`` gives a deterministic key (for tests and scripts).
        """
        seed = secrets.token_bytes(32) if seed is None else seed
        key = Ed25519PrivateKey.from_private_bytes(seed)
        self._keys[name] = key
        return self.public_key(name)

    def public_key(self, name: str) -> bytes:
        return self._keys[name].public_key().public_bytes(Encoding.Raw, PublicFormat.Raw)

    def sign(self, name: str, message: bytes) -> bytes:
        return self._keys[name].sign(message)

    def sign_request(self, name: str, request: UnsignedRequest) -> bytes:
        return self.sign(name, request.signing_bytes())

    def names(self) -> list[str]:
        return list(self._keys)


def deterministic_seed(label: str) -> bytes:
    """Deterministic private-key seed for fixtures."""
    return hashlib.sha256(b"sarv-test-key:" + label.encode()).digest()


@dataclass
class ApiKey:
    key_id: str
    organization: str
    invocation_count: int = 0
    enabled: bool = True

    def to_document(self) -> dict[str, Any]:
        return {
            "keyId": self.key_id,
            "organization": self.organization,
            "invocationCount": self.invocation_count,
            "enabled": self.enabled,
        }


@dataclass(frozen=True)
class UnsignedRequest:
    request_id: str
    operation: Operation
    required_signer: Address
    expiry_seq: int
    key_id: str

    def to_document(self) -> dict[str, Any]:
        return {
            "requestId": self.request_id,
            **self.operation.to_document(),
            "requiredSigner": str(self.required_signer),
            "expirySeq": self.expiry_seq,
            "keyId": self.key_id,
        }

    @classmethod
    def from_document(cls, doc: Mapping[str, Any]) -> UnsignedRequest:
        try:
            return cls(
                request_id=doc["requestId"],
                operation=Operation.from_document(doc),
                required_signer=Address.parse(doc["requiredSigner"]),
                expiry_seq=int(doc["expirySeq"]),
                key_id=doc["keyId"],
            )
        except (KeyError, ValueError, TypeError) as exc:
            raise MalformedOperation(f"bad request document: {exc}") from None

    def signing_bytes(self) -> bytes:
        return json.dumps(self.to_document(), sort_keys=True, separators=(",", ":")).encode()


@dataclass
class OperationResult:
    request_id: str
    result: bool
    seq: int
    extra: dict[str, Any] = field(default_factory=dict)

    def to_document(self) -> dict[str, Any]:
        return {"requestId": self.request_id, "result": self.result, "seq": self.seq, **self.extra}


class SarvApi:
    """Endpoint layer over one ledger.

    ``strict`` runs the monitor preflight when a request is built and again
    right before it executes; the permissive mode skips it and lets the
    node contracts' local guards be the only line of defence.
    """

    def __init__(
        self,
        ledger: Ledger | None = None,
        forest: Forest | None = None,
        strict: bool = True,
        scheme: SignatureScheme | None = None,
        expiry_window: int = DEFAULT_EXPIRY_WINDOW,
    ) -> None:
        if forest is not None and ledger is not None and forest.ledger is not ledger:
            raise ValueError("forest is bound to a different ledger")
        self.ledger = ledger or (forest.ledger if forest else Ledger())
        self.forest = forest or Forest(self.ledger)
        self.strict = strict
        self.scheme = scheme or Ed25519Scheme()
        self.expiry_window = expiry_window
        self.keys: dict[str, ApiKey] = {}
        self._pending: dict[str, UnsignedRequest] = {}
        self._consumed: set[str] = set()
        self._meter_lock = threading.Lock()

    # -- key administration (not metered) --------------------------------

    def issue_key(self, organization: str, key_id: str | None = None) -> ApiKey:
        key = ApiKey(key_id or f"key-{uuid.uuid4().hex}", organization)
        self.keys[key.key_id] = key
        return key

    def disable_key(self, key_id: str) -> None:
        self.keys[key_id].enabled = False

    def _authenticate(self, key_id: str) -> ApiKey:
        key = self.keys.get(key_id)
        if key is None or not key.enabled:
            raise AuthenticationError("unknown or disabled API key")
        with self._meter_lock:
            key.invocation_count += 1
        return key

    # -- mutations -------------------------------------------------------

    def create_account(self, key_id: str, public_key: bytes) -> Address:
        self._authenticate(key_id)
        return self.ledger.create_account(public_key)

    def default_signer(self, op: Operation) -> Address:
        """The account expected to sign ``op`` when the caller does not name one."""
        if "signer" in op.args:
            return op.address("signer")
        state = self.ledger.state
        if op.name == "createNode":
            return op.address("owner")
        node = op.address("node")
        if node not in state.nodes:
            raise UnknownAddress(str(node))
        if op.name in ("makeBond", "transferAsset"):
            return state.holder_of(node)
        if op.name == "delegate":
            parent = state.nodes[node].parent
            return state.holder_of(parent) if parent is not None else state.holder_of(node)
        root = self.forest.root_or_none(node)
        return state.holder_of(root if root is not None else node)

    def build_request(self, key_id: str, op: Operation) -> UnsignedRequest:
        return self._build(self._authenticate(key_id), op)

    def _build(self, key: ApiKey, op: Operation) -> UnsignedRequest:
        with self.ledger.commit():
            signer = self.default_signer(op)
            if self.strict:
                violations = preflight(self.ledger.state, op)
                if violations:
                    raise PreflightRejected(violations)
            request = UnsignedRequest(
                request_id=uuid.uuid4().hex,
                operation=op,
                required_signer=signer,
                expiry_seq=len(self.ledger) + self.expiry_window,
                key_id=key.key_id,
            )
            self._pending[request.request_id] = request
            return request

    def submit_signed(
        self, key_id: str, request: UnsignedRequest, signature: bytes
    ) -> OperationResult:
        self._authenticate(key_id)
        return self._submit(request, signature)

    def _submit(self, request: UnsignedRequest, signature: bytes) -> OperationResult:
        with self.ledger.commit():
            rid = request.request_id
            if rid in self._consumed:
                raise RequestRejected(f"request {rid} was already submitted")
            if self._pending.get(rid) != request:
                raise RequestRejected(f"request {rid} was not issued by this service")
            if len(self.ledger) > request.expiry_seq:
                raise RequestRejected(f"request {rid} expired at seq {request.expiry_seq}")
            public_key = self.ledger.state.accounts.get(request.required_signer)
            if public_key is None or not self.scheme.verify(
                bytes.fromhex(public_key), request.signing_bytes(), signature
            ):
                raise RequestRejected("signature does not verify against the required signer")
            if self.strict:
                violations = preflight(self.ledger.state, request.operation)
                if violations:
                    raise PreflightRejected(violations)
            self._consumed.add(rid)
            del self._pending[rid]
            ctx = CallContext.top_level(request.required_signer, request_id=rid)
            result, extra = self._execute(ctx, request.operation)
            return OperationResult(rid, result, self.ledger.last_seq, extra)

    def _execute(self, ctx: CallContext, op: Operation) -> tuple[bool, dict[str, Any]]:
        f = self.forest
        a = op.address
        if op.name == "createNode":
            if a("owner") != ctx.originator:
                raise RequestRejected("only the future owner may create a node")
            node, asa_id = self.ledger.create_node(
                a("owner"),
                bool(op.get("canAuthorizeChildren", False)),
                op.get("metadata") or {},
                ctx.request_id,
            )
            return True, {"node": str(node), "asaId": asa_id}
        if op.name == "makeBond":
            return f.make_bond(ctx, a("node"), a("from"), a("to")), {}
        if op.name == "breakBond":
            node = a("node")
            from_ = a("from") if "from" in op.args else node
            to = a("to") if "to" in op.args else (f.node(node).parent or node)
            return f.break_bond(ctx, node, from_, to), {}
        if op.name == "delegate":
            return f.delegate(ctx, a("node"), a("to")), {}
        if op.name == "claimBack":
            return f.claim_back(ctx, a("node")), {}
        if op.name == "setCanAuthorizeChildren":
            return f.set_can_authorize_children(ctx, a("node"), bool(op.get("value"))), {}
        if op.name == "setMetadata":
            return f.set_metadata(ctx, a("node"), op.get("key"), op.get("value")), {}
        if op.name == "transferAsset":
            return f.transfer(ctx, a("node"), a("to")), {}
        raise MalformedOperation(op.name)  # pragma: no cover - Operation validates names

    # -- reads -----------------------------------------------------------

    def query_tree(self, key_id: str, root: Address) -> dict[str, Any]:
        self._authenticate(key_id)
        return self._tree(root)

    def _tree(self, root: Address) -> dict[str, Any]:
        log = self.ledger.read_log()
        if not log:
            raise UnknownAddress(str(root))
        return tree_at(log, len(log) - 1, root)

    def query_passport(self, key_id: str, node: Address) -> dict[str, Any]:
        self._authenticate(key_id)
        return self._passport(node)

    def _passport(self, node: Address) -> dict[str, Any]:
        return passport_of(self.ledger.read_log(), node).to_document()

    def audit(self, key_id: str) -> list[dict[str, Any]]:
        self._authenticate(key_id)
        return self._audit()

    def _audit(self) -> list[dict[str, Any]]:
        return [v.to_document() for v in audit_forest(self.ledger.snapshot())]

    def usage_report(self, organization: str) -> dict[str, int]:
        keys = {k.key_id: k.invocation_count for k in self.keys.values() if k.organization == organization}
        if not keys:
            raise SarvError(f"unknown organization {organization!r}")
        return keys

    # -- structured endpoint dispatch -----------------------------------

    _BUILDERS: dict[str, str] = {
        "create-node": "createNode",
        "make-bond": "makeBond",
        "break-bond": "breakBond",
        "delegate": "delegate",
        "claim-back": "claimBack",
        "set-authorization": "setCanAuthorizeChildren",
        "set-metadata": "setMetadata",
        "transfer": "transferAsset",
    }

    ENDPOINTS = (
        *_BUILDERS,
        "create-account",
        "submit",
        "query-tree",
        "query-passport",
        "audit",
        "usage-report",
    )

    def handle(
        self, endpoint: str, body: Mapping[str, Any], headers: Mapping[str, str]
    ) -> dict[str, Any]:
        """Run one endpoint on a JSON-native body and return a JSON-native response.

        Authentication reads the ``X-Api-Key`` header. Errors come back as
        ``{"error": ..., "message": ...}`` rather than being raised.
        """
        key_id = headers.get("X-Api-Key", "")
        try:
            return self._dispatch(endpoint, body, key_id)
        except PreflightRejected as exc:
            return {
                "error": "PreflightRejected",
                "message": str(exc),
                "violations": [v.to_document() for v in exc.violations],
            }
        except (SarvError, KeyError, ValueError) as exc:
            return {"error": type(exc).__name__, "message": str(exc)}

    def _dispatch(self, endpoint: str, body: Mapping[str, Any], key_id: str) -> dict[str, Any]:
        if endpoint == "usage-report":
            return {"usage": self.usage_report(body["organization"])}
        # every other call counts once, whether or not its body turns out to be valid
        key = self._authenticate(key_id)
        handlers: dict[str, Callable[[], dict[str, Any]]] = {
            "create-account": lambda: {
                "address": str(self.ledger.create_account(bytes.fromhex(body["publicKey"])))
            },
            "submit": lambda: self._submit(
                UnsignedRequest.from_document(body["request"]),
                bytes.fromhex(body["signature"]),
            ).to_document(),
            "query-tree": lambda: {"tree": self._tree(Address.parse(body["root"]))},
            "query-passport": lambda: {"passport": self._passport(Address.parse(body["node"]))},
            "audit": lambda: {"violations": self._audit()},
        }
        if endpoint in self._BUILDERS:
            op = Operation(self._BUILDERS[endpoint], dict(body))
            return {"request": self._build(key, op).to_document()}
        if endpoint not in handlers:
            raise MalformedOperation(f"unknown endpoint {endpoint!r}")
        return handlers[endpoint]()
