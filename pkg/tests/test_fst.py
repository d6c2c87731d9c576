import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from dialogfst.fst import (
    Alphabet,
    SplitCandidate,
    TrainConfig,
    apply_split,
    best_split,
    emission_pdf,
    init_fst,
    run_counts,
    state_entropy,
    train_fst,
)
from dialogfst.inference import perplexity
from dialogfst.synthetic import alternator

import oracles

AB = Alphabet(["a", "b"])


def fst_with_counts(counts, lam=0.0):
    f = init_fst(Alphabet([f"s{i}" for i in range(len(counts))]), lam)
    seq = [i for i, c in enumerate(counts) for _ in range(c)]
    return run_counts(f, [seq])


def alternator_fst(lam=0.0):
    f = init_fst(AB, lam)
    cand = SplitCandidate(0, 0, 0.0, (1, 1), fst_signature=f.signature())
    return apply_split(f, cand)


class TestAlphabet:
    def test_dense_ids(self):
        a = Alphabet(["x", "y", "z"])
        assert [a.id(s) for s in "xyz"] == [0, 1, 2]
        assert a.decode(a.encode("zyx")) == list("zyx")

    def test_duplicates_rejected(self):
        with pytest.raises(ValueError):
            Alphabet(["x", "x"])

    def test_unknown_symbol(self):
        with pytest.raises(KeyError):
            Alphabet(["x"]).id("y")


class TestInit:
    def test_seven_symbols(self):
        f = init_fst(Alphabet([f"a{i}" for i in range(7)]), 0.1)
        assert f.num_states == 1
        assert f.delta.shape == (1, 7) and (f.delta == 0).all()
        assert (f.counts == 0).all() and f.start_state == 0

    def test_uniform_embedding(self):
        f = init_fst(Alphabet([f"a{i}" for i in range(7)]), 0.5)
        np.testing.assert_allclose(emission_pdf(f, 0), np.full(7, 1 / 7))

    def test_single_symbol(self):
        f = init_fst(Alphabet(["only"]))
        assert f.delta.tolist() == [[0]]

    def test_empty_alphabet(self):
        with pytest.raises(ValueError):
            init_fst(Alphabet([]))


class TestRunCounts:
    def test_hand_count(self):
        f = run_counts(init_fst(AB), [[0, 1, 0]])
        assert f.counts.tolist() == [[2, 1]]

    def test_empty_corpus(self):
        f = run_counts(init_fst(AB), [])
        assert (f.counts == 0).all()

    def test_two_state(self):
        # a: 0 -> 1, b: 1 -> 0, a: 0 -> 1, b emitted from 1
        f = run_counts(alternator_fst(), [[0, 1, 0, 1]])
        assert f.counts.tolist() == [[2, 0], [0, 2]]

    def test_out_of_alphabet(self):
        with pytest.raises(ValueError, match="sequence 1"):
            run_counts(init_fst(AB), [[0], [2]])

    def test_delta_unchanged(self):
        f = alternator_fst()
        g = run_counts(f, [[0, 1, 1]])
        assert np.array_equal(f.delta, g.delta)


class TestEntropy:
    def test_fair_coin(self):
        assert state_entropy(fst_with_counts([1, 1]), 0) == pytest.approx(1.0)

    def test_deterministic(self):
        assert state_entropy(fst_with_counts([5]), 0) == 0.0

    def test_uniform_seven(self):
        assert state_entropy(fst_with_counts([1] * 7), 0) == pytest.approx(2.807354922057604, abs=1e-12)

    def test_empty_state_is_zero(self):
        assert state_entropy(init_fst(AB), 0) == 0.0

    def test_invalid_state(self):
        with pytest.raises(IndexError):
            state_entropy(init_fst(AB), 3)


class TestEmissionPdf:
    def test_mle(self):
        np.testing.assert_allclose(emission_pdf(fst_with_counts([3, 1]), 0), [0.75, 0.25])

    def test_smoothed(self):
        np.testing.assert_allclose(emission_pdf(fst_with_counts([3, 1], lam=1.0), 0), [4 / 6, 2 / 6])

    def test_zero_count_uniform(self):
        f = init_fst(Alphabet([f"a{i}" for i in range(7)]), 1.0)
        np.testing.assert_allclose(emission_pdf(f, 0), np.full(7, 1 / 7))

    def test_zero_count_no_smoothing_falls_back_to_uniform(self):
        np.testing.assert_allclose(emission_pdf(init_fst(AB, 0.0), 0), [0.5, 0.5])


class TestBestSplit:
    def test_alternating_corpus(self):
        seqs = alternator(20, 3)
        f = run_counts(init_fst(AB, 0.0), seqs)
        cand = best_split(f, seqs, TrainConfig(min_child_support=0, min_entropy_gain=0.0))
        assert (cand.target_state, cand.incoming_symbol, cand.source_state) == (0, 0, None)
        assert cand.weighted_child_entropy == pytest.approx(0.0)
        assert cand.gain == pytest.approx(1.0)

    def test_both_symbols_tie(self):
        # the b-split is just as good; the lower id wins
        seqs = alternator(20, 3)
        f = run_counts(init_fst(AB, 0.0), seqs)
        o = oracles.brute_force_split(f.delta.tolist(), 0, seqs)
        assert o[:3] == (0, 0, -1)

    def test_constant_corpus(self):
        seqs = [[0] * 10] * 3
        f = run_counts(init_fst(AB), seqs)
        assert best_split(f, seqs, TrainConfig(min_child_support=0, min_entropy_gain=0.0)) is None

    def test_gain_threshold(self):
        rng = np.random.default_rng(11)
        seqs = [rng.integers(2, size=200).tolist() for _ in range(20)]
        f = run_counts(init_fst(AB), seqs)
        o = oracles.brute_force_split(f.delta.tolist(), 0, seqs, min_gain=0.0)
        assert o is not None
        parent = oracles.entropy({x: int(c) for x, c in enumerate(f.counts[0])})
        assert parent - o[3] < 0.05  # every candidate's gain is below the bar
        assert best_split(f, seqs, TrainConfig(min_child_support=0, min_entropy_gain=0.05)) is None

    def test_min_support(self):
        seqs = [[0, 1, 0, 1]]
        f = run_counts(init_fst(AB), seqs)
        assert best_split(f, seqs, TrainConfig(min_child_support=3, min_entropy_gain=0.0)) is None

    @pytest.mark.parametrize("split_on", ["symbol", "edge"])
    def test_matches_oracle_on_multistate(self, split_on):
        rng = np.random.default_rng(5)
        alpha = Alphabet("abcd")
        seqs = [rng.integers(4, size=int(rng.integers(1, 30))).tolist() for _ in range(8)]
        cfg = TrainConfig(target_states=4, min_child_support=0, min_entropy_gain=0.0, split_on=split_on)
        f = train_fst(seqs, alpha, cfg)
        got = best_split(f, seqs, cfg)
        want = oracles.brute_force_split(f.delta.tolist(), f.start_state, seqs, split_on=split_on)
        if want is None:
            assert got is None
        else:
            src = -1 if got.source_state is None else got.source_state
            assert (got.target_state, got.incoming_symbol, src) == want[:3]
            assert got.weighted_child_entropy == pytest.approx(want[3], abs=1e-9)


class TestApplySplit:
    def test_redirect(self):
        f = alternator_fst()
        assert f.delta.tolist() == [[1, 0], [1, 0]]
        assert f.lineage == (None, (0, 0))

    def test_edge_split_moves_one_edge(self):
        f = alternator_fst()
        # split state 0 on the b-edge coming from state 1 only
        g = apply_split(f, SplitCandidate(0, 1, 0.0, (1, 1), source_state=1, fst_signature=f.signature()))
        assert g.delta.tolist() == [[1, 0], [1, 2], [1, 0]]
        assert g.lineage[-1] == (0, 1, 1)

    def test_stale_signature(self):
        f = alternator_fst()
        cand = SplitCandidate(0, 0, 0.0, (1, 1), fst_signature=init_fst(AB).signature())
        with pytest.raises(ValueError, match="stale"):
            apply_split(f, cand)

    def test_no_such_edge(self):
        f = alternator_fst()
        # no a-edge enters state 0 any more
        with pytest.raises(ValueError, match="stale"):
            apply_split(f, SplitCandidate(0, 0, 0.0, (1, 1)))

    def test_start_state_kept(self):
        assert alternator_fst().start_state == 0


class TestTrain:
    def test_k1(self):
        seqs = [[0, 1, 1]]
        f = train_fst(seqs, AB, TrainConfig(target_states=1))
        assert f.num_states == 1 and f.counts.tolist() == [[1, 2]]

    def test_alternator_k2(self):
        seqs = alternator(40, 5)
        cfg = TrainConfig(target_states=2, smoothing_lambda=0.0)
        f = train_fst(seqs, AB, cfg)
        assert f.num_states == 2
        assert perplexity(f, alternator(30, 2)) == pytest.approx(1.0, abs=1e-12)

    def test_history(self):
        hist = []
        train_fst(alternator(40, 5), AB, TrainConfig(target_states=5), hist)
        assert len(hist) == 1 and hist[0].symbol == "a" and hist[0].num_states == 2

    def test_deterministic(self):
        rng = np.random.default_rng(2)
        seqs = [rng.integers(3, size=50).tolist() for _ in range(10)]
        cfg = TrainConfig(target_states=6, min_child_support=1)
        a = train_fst(seqs, Alphabet("xyz"), cfg)
        b = train_fst(seqs, Alphabet("xyz"), cfg)
        assert a.same_as(b)

    def test_bad_config(self):
        with pytest.raises(ValueError):
            TrainConfig(target_states=0)
        with pytest.raises(ValueError):
            TrainConfig(split_on="nope")


corpora = st.integers(1, 5).flatmap(
    lambda n: st.tuples(
        st.just(n),
        st.lists(st.lists(st.integers(0, n - 1), max_size=25), max_size=8),
        st.integers(1, 8),
    )
)


@settings(max_examples=60, deadline=None)
@given(corpora)
def test_structure_and_conservation(args):
    n, seqs, k = args
    f = train_fst(seqs, Alphabet(f"x{i}" for i in range(n)), TrainConfig(target_states=k, min_child_support=1, min_entropy_gain=0.0))
    assert f.delta.shape == (f.num_states, n)
    assert ((0 <= f.delta) & (f.delta < f.num_states)).all()
    assert f.counts.sum() == sum(len(s) for s in seqs)
    for s in range(f.num_states):
        p = emission_pdf(f, s)
        assert abs(p.sum() - 1) < 1e-9 and ((0 <= p) & (p <= 1)).all()


@settings(max_examples=60, deadline=None)
@given(corpora)
def test_selected_split_never_raises_entropy(args):
    n, seqs, _ = args
    f = run_counts(init_fst(Alphabet(f"x{i}" for i in range(n))), seqs)
    cand = best_split(f, seqs, TrainConfig(min_child_support=0, min_entropy_gain=0.0))
    if cand is not None:
        assert cand.weighted_child_entropy <= state_entropy(f, cand.target_state) + 1e-12


@settings(max_examples=40, deadline=None)
@given(corpora)
def test_hypothetical_split_matches_recount(args):
    # the child entropy predicted by best_split equals the one measured after splitting
    n, seqs, _ = args
    f = run_counts(init_fst(Alphabet(f"x{i}" for i in range(n))), seqs)
    cfg = TrainConfig(min_child_support=0, min_entropy_gain=0.0)
    for _ in range(3):
        cand = best_split(f, seqs, cfg)
        if cand is None:
            return
        g = run_counts(apply_split(f, cand), seqs)
        t, new = cand.target_state, g.num_states - 1
        na, nr = g.counts[new].sum(), g.counts[t].sum()
        assert (na, nr) == cand.support_counts
        h = (na * state_entropy(g, new) + nr * state_entropy(g, t)) / (na + nr)
        assert math.isclose(h, cand.weighted_child_entropy, abs_tol=1e-9)
        f = g
