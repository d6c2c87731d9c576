import io
import json

import pytest
from hypothesis import given, settings, strategies as st

from dialogfst.corpus import (
    CorpusError,
    Dialog,
    Scenario,
    SplitSpec,
    Turn,
    corpus_stats,
    dumps_corpus,
    load_corpus,
    split_corpus,
    write_corpus,
)


def line(did="d1", turns=None, **scenario):
    sc = {"title": "bike", "description": "red", "listing_price": 40, "buyer_target_price": 36}
    sc.update(scenario)
    turns = turns or [{"role": "buyer", "text": "Hello!"}, {"role": "seller", "text": "Hi"}]
    return json.dumps({"dialog_id": did, "scenario": sc, "turns": turns})


def make(n, turns=2):
    return [
        Dialog(f"d{i}", Scenario(listing_price=10.0), tuple(Turn("buyer", f"t{j}") for j in range(turns)))
        for i in range(n)
    ]


def test_empty_stream():
    assert load_corpus(io.BytesIO(b"")) == []


def test_one_dialog():
    [d] = load_corpus(io.BytesIO(line().encode()))
    assert d.dialog_id == "d1" and len(d.turns) == 2
    assert d.scenario.listing_price == 40 and d.scenario.buyer_target_price == 36
    assert d.turns[0].gold_acts is None


def test_unknown_role():
    bad = line("x7", [{"role": "moderator", "text": "hi"}])
    with pytest.raises(CorpusError, match="x7"):
        load_corpus(bad)


def test_malformed_line_number():
    data = line() + "\n{not json\n"
    with pytest.raises(CorpusError, match="line 2"):
        load_corpus(data)


def test_persuasion_roles():
    data = line(turns=[{"role": "persuader", "text": "Would you donate?"}])
    assert load_corpus(data, "persuasion")[0].turns[0].role == "persuader"
    with pytest.raises(CorpusError):
        load_corpus(data, "negotiation")


def test_duplicate_ids():
    with pytest.raises(CorpusError, match="duplicate"):
        load_corpus(line() + "\n" + line())


def test_duplicate_gold_labels():
    with pytest.raises(CorpusError):
        Turn("buyer", "x", gold_acts=("intro", "intro"))


def test_empty_dialog():
    data = json.dumps({"dialog_id": "e", "scenario": {"listing_price": 1}, "turns": []})
    with pytest.raises(CorpusError, match="no turns"):
        load_corpus(data)


def test_scenario_invariants():
    with pytest.raises(CorpusError):
        Scenario(listing_price=-1)
    with pytest.raises(CorpusError):
        Scenario(listing_price=10, buyer_target_price=12)
    Scenario(listing_price=10, buyer_target_price=10)  # tolerated with a warning


def test_round_trip_bytes():
    data = (line("a") + "\n" + line("b", [{"role": "seller", "text": "<offer 30>", "acts": ["init-price"], "strategies": []}]) + "\n").encode()
    dialogs = load_corpus(data)
    out = dumps_corpus(dialogs)
    assert load_corpus(out) == dialogs
    assert dumps_corpus(load_corpus(out)) == out
    assert out.endswith(b"\n") and out.count(b"\n") == 2


def test_write_to_stream():
    buf = io.BytesIO()
    write_corpus(make(2), buf)
    assert load_corpus(buf.getvalue()) == make(2)


def test_split_sizes():
    tr, va, te = split_corpus(make(10), SplitSpec(0.8, 0.1, 0.1, seed=7))
    assert (len(tr), len(va), len(te)) == (8, 1, 1)


def test_split_deterministic():
    spec = SplitSpec(0.8, 0.1, 0.1, seed=7)
    assert split_corpus(make(10), spec) == split_corpus(make(10), spec)


def test_split_corpus_scale_counts():
    # floor(6682 * 643/6682) = 643, floor(6682 * 656/6682) = 656, train keeps 5383
    n = 6682
    spec = SplitSpec(5383 / n, 643 / n, 656 / n, seed=0)
    parts = split_corpus(make(n, 1), spec)
    assert tuple(map(len, parts)) == (5383, 643, 656)


def test_split_spec_validation():
    with pytest.raises(ValueError):
        SplitSpec(0.5, 0.1, 0.1)
    with pytest.raises(ValueError):
        SplitSpec(1.2, -0.1, -0.1)


fractions = st.tuples(st.integers(0, 20), st.integers(0, 20), st.integers(0, 20)).filter(lambda t: sum(t) > 0)


@settings(max_examples=80, deadline=None)
@given(st.integers(0, 60), fractions, st.integers(0, 2**31))
def test_split_is_a_partition(n, weights, seed):
    total = sum(weights)
    tr, va = weights[0] / total, weights[1] / total
    spec = SplitSpec(tr, va, max(0.0, 1 - tr - va), seed)
    dialogs = make(n, 1)
    parts = split_corpus(dialogs, spec)
    ids = [d.dialog_id for p in parts for d in p]
    assert sorted(ids) == sorted(d.dialog_id for d in dialogs)
    assert len(ids) == len(set(ids))


def test_stats():
    dialogs = make(1, 3) + [Dialog("x", Scenario(), tuple(Turn("seller", "Hello hello World") for _ in range(5)))]
    s = corpus_stats(dialogs)
    assert s.num_dialogs == 2 and s.mean_turns == 4.0
    # t0 t1 t2 hello world
    assert s.vocab_size == 5


def test_stats_empty():
    s = corpus_stats([])
    assert (s.num_dialogs, s.mean_turns, s.vocab_size) == (0, 0, 0)
