import dataclasses

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from generators import random_session
from sarv.errors import ReplayError, UnknownAddress
from sarv.fixtures import build_forest
from sarv.forest import CallContext
from sarv.ledger import LedgerState, LogEntry
from sarv.passport import (
    apply_entry,
    passport_of,
    rebuild_state,
    subtree_document,
    tree_at,
)


def ctx(fx, who):
    return CallContext.top_level(fx.accounts[who])


def battery_swap(fx):
    n, a = fx.nodes, fx.accounts
    before = fx.ledger.last_seq
    assert fx.forest.break_bond(ctx(fx, "bob"), n["K"], n["K"], n["R3"])
    assert fx.forest.transfer(ctx(fx, "bob"), n["K"], a["alice"])
    assert fx.forest.make_bond(ctx(fx, "alice"), n["K"], n["K"], n["F"])
    return before


def test_empty_log_gives_empty_state():
    assert rebuild_state([]) == LedgerState()


def test_rebuild_after_battery_swap(products):
    battery_swap(products)
    state = rebuild_state(products.ledger.read_log())
    assert state == products.ledger.state
    k = products.nodes["K"]
    root = k
    while state.nodes[root].parent is not None:
        root = state.nodes[root].parent
    assert root == products.nodes["R2"]


def test_replay_matches_live_state_many_sessions():
    for seed in range(200):
        ledger, *_ = random_session(seed, length=50, max_nodes=16)
        assert rebuild_state(ledger.read_log()) == ledger.state, seed


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 100_000), cut=st.floats(0, 1))
def test_prefix_monotonicity(seed, cut):
    ledger, *_ = random_session(seed, length=40, max_nodes=10)
    log = ledger.read_log()
    k = int(cut * len(log))
    prefix = rebuild_state(log[:k])
    resumed = rebuild_state(log[k:], initial=prefix, start=k)
    assert resumed == rebuild_state(log)
    manual = prefix.copy()
    for entry in log[k:]:
        apply_entry(manual, entry)
    assert manual == resumed


def test_gap_is_reported_with_seq(products):
    log = products.ledger.read_log()
    with pytest.raises(ReplayError) as err:
        rebuild_state(log[:3] + log[4:])
    assert err.value.seq == 3


def test_malformed_entry_is_reported(products):
    log = products.ledger.read_log()
    bad = dataclasses.replace(log[5], payload={"nonsense": True})
    with pytest.raises(ReplayError) as err:
        rebuild_state(log[:5] + [bad] + log[6:])
    assert err.value.seq == 5


def test_fresh_node_passport():
    fx = build_forest([("u", [("N", None, False)])])
    doc = passport_of(fx.ledger.read_log(), fx.nodes["N"])
    create_seq = next(e.seq for e in fx.ledger.read_log() if e.kind.value == "CreateNode")
    assert [(h.seq, h.from_, h.to, h.kind) for h in doc.holder_history] == [
        (create_seq, None, fx.accounts["u"], "mint")
    ]
    assert doc.bond_history == []
    assert doc.origin == create_seq
    assert doc.current_tree_root == fx.nodes["N"]
    assert doc.metadata == {"name": "N"}


def test_delegation_span_round_trip():
    fx = build_forest(
        [("alice", [("R", None, True), ("F", "R", True), ("K", "F", False)])],
        extra_accounts=("bob", "dave"),
    )
    k = fx.nodes["K"]
    fx.forest.transfer(ctx(fx, "alice"), fx.nodes["F"], fx.accounts["bob"])
    assert fx.forest.delegate(ctx(fx, "bob"), k, fx.accounts["dave"])
    s1 = next(e.seq for e in reversed(fx.ledger.read_log()) if e.kind.value == "TransferAsset")
    assert fx.forest.claim_back(ctx(fx, "alice"), k)
    s2 = next(e.seq for e in reversed(fx.ledger.read_log()) if e.kind.value == "TransferAsset")
    doc = passport_of(fx.ledger.read_log(), k)
    assert [(d.start_seq, d.end_seq, d.delegate) for d in doc.delegation_spans] == [
        (s1, s2, fx.accounts["dave"])
    ]
    assert doc.current_holder == fx.accounts["alice"] == doc.beneficial_owner
    assert [h.kind for h in doc.holder_history] == ["mint", "delegation", "claimBack"]


def test_bond_history_after_battery_swap(products):
    battery_swap(products)
    doc = passport_of(products.ledger.read_log(), products.nodes["K"])
    parent_events = [(b.event, b.counterparty) for b in doc.bond_history if b.role == "parent"]
    assert parent_events[-2:] == [("unbonded", products.nodes["R3"]), ("bonded", products.nodes["F"])]
    assert doc.current_tree_root == products.nodes["R2"]
    f_doc = passport_of(products.ledger.read_log(), products.nodes["F"])
    assert ("bonded", products.nodes["K"], "child") in {(b.event, b.counterparty, b.role) for b in f_doc.bond_history}


def test_passport_completeness_over_sessions():
    for seed in range(40):
        ledger, *_ = random_session(seed, length=50, max_nodes=10)
        log = ledger.read_log()
        for node in ledger.state.nodes:
            doc = passport_of(log, node)
            asa = ledger.state.nodes[node].asa_id
            transfers = [e.seq for e in log if e.kind.value == "TransferAsset" and e.payload["asaId"] == asa]
            assert [h.seq for h in doc.holder_history[1:]] == transfers
            seqs = [h.seq for h in doc.holder_history]
            assert seqs == sorted(set(seqs))
            assert doc.holder_history[-1].to == doc.current_holder == ledger.state.holder_of(node)
            for span in doc.delegation_spans:
                kinds = {h.seq: h.kind for h in doc.holder_history}
                assert kinds[span.start_seq] == "delegation"
                if span.end_seq is not None:
                    assert kinds[span.end_seq] == "claimBack"


def test_passport_unknown_node(products):
    with pytest.raises(UnknownAddress):
        passport_of(products.ledger.read_log(), products.accounts["alice"])


def test_passport_document_field_order_is_stable(products):
    doc = passport_of(products.ledger.read_log(), products.nodes["G"]).to_document()
    assert list(doc) == [
        "nodeAddress", "asaId", "origin", "currentHolder", "beneficialOwner",
        "holderHistory", "bondHistory", "delegationSpans", "currentTreeRoot", "metadata",
    ]


def test_tree_at(products):
    before = battery_swap(products)
    log = products.ledger.read_log()
    n = products.nodes

    def names(doc):
        out = {doc["address"]}
        for c in doc["children"]:
            out |= names(c)
        return out

    old3 = tree_at(log, before, n["R3"])
    assert str(n["K"]) in names(old3)
    assert str(n["K"]) not in names(tree_at(log, before, n["R2"]))
    assert str(n["K"]) in names(tree_at(log, products.ledger.last_seq, n["R2"]))
    assert str(n["K"]) not in names(tree_at(log, products.ledger.last_seq, n["R3"]))
    assert tree_at(log, products.ledger.last_seq, n["R2"]) == subtree_document(products.ledger.state, n["R2"])
    with pytest.raises(UnknownAddress):
        tree_at(log, 0, n["R2"])


def test_log_entries_survive_text_round_trip(products):
    for entry in products.ledger.read_log():
        assert LogEntry.from_line(entry.to_line()) == entry
