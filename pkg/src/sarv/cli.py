"""Command-line front end.

Each mutating subcommand performs the full build / sign / submit exchange
against the API, signing locally with keys from the wallet file. State
lives next to the ledger log:

* ``LEDGER``            newline-delimited log entries (the source of truth)
* ``LEDGER.api.json``   API keys and their invocation counters
* ``LEDGER.wallet.json`` client-side signing seeds and human-readable names

Without ``--ledger`` everything is in memory, which is only useful for
``scenario run``.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time
from collections.abc import Mapping, Sequence
from pathlib import Path
from typing import Any

from sarv.api import SarvApi, UnsignedRequest, Wallet, deterministic_seed
from sarv.errors import SarvError
from sarv.forest import Forest
from sarv.ledger import Address, Ledger, import_log
from sarv.passport import rebuild_state

ADDRESS_FIELDS = ("node", "from", "to", "owner", "signer", "root")


class Session:
    """API, wallet and name table, loaded from and saved back to disk."""

    def __init__(self, ledger_path: str | None, strict: bool, max_call_depth: int = 8) -> None:
        self.path = Path(ledger_path) if ledger_path else None
        self.seeds: dict[str, str] = {}
        self.names: dict[str, str] = {}
        ledger = Ledger()
        keys: list[dict[str, Any]] = []
        if self.path and self.path.exists():
            with self.path.open() as fh:
                entries = import_log(fh)
            ledger = Ledger.restore(entries, rebuild_state(entries))
            if self._sidecar("api").exists():
                keys = json.loads(self._sidecar("api").read_text())["keys"]
            if self._sidecar("wallet").exists():
                doc = json.loads(self._sidecar("wallet").read_text())
                self.seeds, self.names = doc["seeds"], doc["names"]
        self.api = SarvApi(ledger, Forest(ledger, max_call_depth=max_call_depth), strict=strict)
        for k in keys:
            key = self.api.issue_key(k["organization"], k["keyId"])
            key.invocation_count, key.enabled = k["invocationCount"], k["enabled"]
        self.wallet = Wallet()
        for name, seed in self.seeds.items():
            self.wallet.add(name, bytes.fromhex(seed))

    def _sidecar(self, what: str) -> Path:
        assert self.path is not None
        return self.path.with_name(f"{self.path.name}.{what}.json")

    def save(self) -> None:
        if self.path is None:
            return
        with self.path.open("w") as fh:
            self.api.ledger.export(fh)
        self._sidecar("api").write_text(
            json.dumps({"keys": [k.to_document() for k in self.api.keys.values()]}, indent=2)
        )
        self._sidecar("wallet").write_text(
            json.dumps({"seeds": self.seeds, "names": self.names}, indent=2)
        )

    # -- names and signing -------------------------------------------------

    def resolve(self, value: str) -> str:
        return self.names.get(value, value)

    def name_of(self, address: str | None) -> str | None:
        for name, addr in self.names.items():
            if addr == address:
                return name
        return address

    def add_account(self, key_id: str, name: str, seed_label: str | None = None) -> str:
        seed = deterministic_seed(seed_label) if seed_label else os.urandom(32)
        self.seeds[name] = seed.hex()
        public_key = self.wallet.add(name, seed)
        address = str(self.api.create_account(key_id, public_key))
        self.names[name] = address
        return address

    def mutate(self, key_id: str, endpoint: str, body: Mapping[str, Any]) -> dict[str, Any]:
        """Build, sign with the local wallet, and submit one operation."""
        body = {
            k: self.resolve(v) if k in ADDRESS_FIELDS and isinstance(v, str) else v
            for k, v in body.items()
            if v is not None
        }
        headers = {"X-Api-Key": key_id}
        built = self.api.handle(endpoint, body, headers)
        if "error" in built:
            return built
        request = UnsignedRequest.from_document(built["request"])
        signer = self.name_of(str(request.required_signer))
        if signer not in self.wallet.names():
            return {"error": "NoSigningKey", "message": f"wallet has no key for {signer}"}
        signature = self.wallet.sign_request(signer, request)
        return self.api.handle(
            "submit", {"request": built["request"], "signature": signature.hex()}, headers
        )


# -- scenarios ---------------------------------------------------------------

_STEP_ENDPOINTS = {
    "create-node",
    "make-bond",
    "break-bond",
    "delegate",
    "claim-back",
    "set-authorization",
    "set-metadata",
    "transfer",
}


def run_scenario(session: Session, scenario: Mapping[str, Any]) -> dict[str, Any]:
    """Execute a scripted operation sequence and report the outcome.

    Steps name accounts and nodes symbolically. ``expect`` on a step makes
    the scenario fail when the operation's boolean result differs;
    ``expectError`` names the error the step must produce instead.
    """
    started = time.perf_counter()
    api = session.api
    key = api.issue_key(scenario.get("organization", "scenario"))
    ok = True
    for name in scenario.get("accounts", []):
        session.add_account(key.key_id, name, seed_label=f"{scenario.get('seed', 'scenario')}:{name}")

    results = []
    for index, step in enumerate(scenario.get("steps", [])):
        step = dict(step)
        op = step.pop("op")
        name = step.pop("name", None)
        expect = step.pop("expect", None)
        expect_error = step.pop("expectError", None)
        if op in _STEP_ENDPOINTS:
            out = session.mutate(key.key_id, op, step)
            if name and out.get("node"):
                session.names[name] = out["node"]
        elif op in ("audit", "query-tree", "query-passport"):
            body = {k: session.resolve(v) for k, v in step.items()}
            out = api.handle(op, body, {"X-Api-Key": key.key_id})
        else:
            out = {"error": "UnknownStep", "message": op}
        if expect_error is not None:
            passed = out.get("error") == expect_error
        elif expect is not None:
            passed = out.get("result") == expect
        else:
            passed = "error" not in out
        ok = ok and passed
        results.append({"step": index, "op": op, "passed": passed, **out})

    forest = api.forest
    state = api.ledger.state
    summary: dict[str, Any] = {}
    for name, address in session.names.items():
        addr = Address.parse(address)
        if addr in state.nodes:
            node = state.nodes[addr]
            root = forest.root_or_none(addr)
            summary[name] = {
                "parent": session.name_of(None if node.parent is None else str(node.parent)),
                "children": [session.name_of(str(c)) for c in node.children],
                "root": session.name_of(None if root is None else str(root)),
                "holder": session.name_of(str(state.holder_of(addr))),
                "isDelegated": node.is_delegated,
            }
    audit = api.handle("audit", {}, {"X-Api-Key": key.key_id})["violations"]
    return {
        "ok": ok,
        "strict": api.strict,
        "names": dict(session.names),
        "steps": results,
        "forest": summary,
        "audit": audit,
        "usage": api.usage_report(key.organization),
        "logLength": len(api.ledger),
        "elapsedSeconds": time.perf_counter() - started,
    }


# -- argument parsing --------------------------------------------------------


def _bool(text: str) -> bool:
    if text.lower() in ("1", "true", "yes", "on"):
        return True
    if text.lower() in ("0", "false", "no", "off"):
        return False
    raise argparse.ArgumentTypeError(f"not a boolean: {text!r}")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="sarv", description=__doc__.splitlines()[0])
    parser.add_argument("--ledger", help="ledger log file (newline-delimited JSON)")
    parser.add_argument("--api-key", default=os.environ.get("SARV_API_KEY", ""))
    mode = parser.add_mutually_exclusive_group()
    mode.add_argument("--strict", dest="strict", action="store_true", default=None)
    mode.add_argument("--permissive", dest="strict", action="store_false")
    parser.add_argument("--max-call-depth", type=int, default=8)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("issue-key", help="issue an API key for an organization")
    p.add_argument("--organization", required=True)

    p = sub.add_parser("create-account", help="generate a wallet key and register the account")
    p.add_argument("--name", required=True)
    p.add_argument("--seed-label", help="derive the key deterministically from this label")

    p = sub.add_parser("create-node")
    p.add_argument("--owner", required=True)
    p.add_argument("--name")
    p.add_argument("--can-authorize-children", action="store_true")
    p.add_argument("--metadata", type=json.loads, default=None)

    for name, fields in (
        ("make-bond", ("node", "from", "to")),
        ("break-bond", ("node",)),
        ("delegate", ("node", "to")),
        ("claim-back", ("node",)),
        ("transfer", ("node", "to")),
    ):
        p = sub.add_parser(name)
        for f in fields:
            p.add_argument(f"--{f}", required=True)
        if name == "break-bond":
            p.add_argument("--from")
            p.add_argument("--to")
        p.add_argument("--signer")

    p = sub.add_parser("set-authorization")
    p.add_argument("--node", required=True)
    p.add_argument("--value", type=_bool, required=True)
    p.add_argument("--signer")

    p = sub.add_parser("set-metadata")
    p.add_argument("--node", required=True)
    p.add_argument("--key", required=True)
    p.add_argument("--value", type=json.loads, required=True)
    p.add_argument("--signer")

    p = sub.add_parser("query-tree")
    p.add_argument("--root", required=True)
    p = sub.add_parser("query-passport")
    p.add_argument("--node", required=True)
    sub.add_parser("audit")
    p = sub.add_parser("usage-report")
    p.add_argument("--organization", required=True)

    p = sub.add_parser("scenario", help="scripted operation sequences")
    scen = p.add_subparsers(dest="scenario_command", required=True)
    run = scen.add_parser("run")
    run.add_argument("file")
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    scenario = None
    strict = args.strict
    if args.command == "scenario":
        scenario = json.loads(Path(args.file).read_text())
        if strict is None:
            strict = scenario.get("strict", True)
    session = Session(args.ledger, strict=True if strict is None else strict,
                      max_call_depth=args.max_call_depth)
    key = args.api_key
    try:
        if scenario is not None:
            out = run_scenario(session, scenario)
        elif args.command == "issue-key":
            out = session.api.issue_key(args.organization).to_document()
        elif args.command == "create-account":
            out = {"name": args.name, "address": session.add_account(key, args.name, args.seed_label)}
        elif args.command == "usage-report":
            out = session.api.handle("usage-report", {"organization": args.organization}, {})
        elif args.command in ("query-tree", "query-passport", "audit"):
            body = {k: session.resolve(v) for k, v in (("root", getattr(args, "root", None)),
                                                        ("node", getattr(args, "node", None))) if v}
            out = session.api.handle(args.command, body, {"X-Api-Key": key})
        else:
            body = {
                k: v for k, v in vars(args).items()
                if k not in ("ledger", "api_key", "strict", "command", "max_call_depth", "name")
            }
            if args.command == "create-node":
                body["canAuthorizeChildren"] = body.pop("can_authorize_children")
            out = session.mutate(key, args.command, body)
            if args.command == "create-node" and args.name and out.get("node"):
                session.names[args.name] = out["node"]
    except SarvError as exc:
        out = {"error": type(exc).__name__, "message": str(exc)}
    session.save()
    json.dump(out, sys.stdout, indent=2, sort_keys=True)
    sys.stdout.write("\n")
    if "error" in out or out.get("ok") is False:
        return 1
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
