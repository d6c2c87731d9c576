"""Learning deterministic probabilistic automata by greedy state splitting.

A model starts as one ergodic state whose edges all loop back to itself.
Each round re-counts next-symbol emissions over the corpus and splits the
state whose visits, partitioned by how they were entered, give the lowest
count-weighted child entropy.  Training stops at ``target_states`` or when
no admissible split is left.

Two candidate families are supported (``TrainConfig.split_on``):

``"symbol"``
    Visits to state ``t`` entered through *any* edge labelled ``a`` become
    the new child.  Every transition stays a function of the last symbol,
    so the model is a clustering of first-order contexts.

``"edge"`` (default)
    The ``"symbol"`` candidates plus single edges ``(source, a)``.  This is
    what lets the automaton grow history longer than one symbol.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, replace
from typing import Iterable, Optional, Sequence

import numpy as np

__all__ = [
    "Alphabet",
    "Fst",
    "SplitCandidate",
    "TrainConfig",
    "SplitRecord",
    "init_fst",
    "run_counts",
    "state_entropy",
    "entropy_bits",
    "best_split",
    "apply_split",
    "train_fst",
    "emission_pdf",
    "check_structure",
]

# Candidates whose weighted entropies differ by less than this are ties.
TIE_EPS = 1e-12


class Alphabet:
    """Interned, ordered symbol inventory."""

    __slots__ = ("symbols", "index")

    def __init__(self, symbols: Iterable[str]):
        symbols = tuple(symbols)
        index = {}
        for i, name in enumerate(symbols):
            if not isinstance(name, str):
                raise TypeError(f"symbol names must be str, got {name!r}")
            if name in index:
                raise ValueError(f"duplicate symbol {name!r}")
            index[name] = i
        self.symbols = symbols
        self.index = index

    def __len__(self):
        return len(self.symbols)

    def __iter__(self):
        return iter(self.symbols)

    def __contains__(self, name):
        return name in self.index

    def __eq__(self, other):
        return isinstance(other, Alphabet) and self.symbols == other.symbols

    def __hash__(self):
        return hash(self.symbols)

    def __repr__(self):
        return f"Alphabet({list(self.symbols)!r})"

    def id(self, name: str) -> int:
        try:
            return self.index[name]
        except KeyError:
            raise KeyError(f"unknown symbol {name!r}") from None

    def encode(self, names: Iterable[str]) -> list[int]:
        return [self.id(n) for n in names]

    def decode(self, ids: Iterable[int]) -> list[str]:
        return [self.symbols[i] for i in ids]

    @classmethod
    def from_sequences(cls, sequences: Iterable[Iterable[str]]) -> "Alphabet":
        """Alphabet of all symbols seen, in order of first appearance."""
        seen: dict[str, None] = {}
        for seq in sequences:
            for s in seq:
                seen.setdefault(s, None)
        return cls(seen)


@dataclass(frozen=True, eq=False)
class Fst:
    """Deterministic, total automaton with per-state next-symbol counts.

    ``delta`` and ``counts`` are ``(num_states, len(alphabet))`` integer
    arrays.  ``lineage[s]`` is ``None`` for the initial state and otherwise
    ``(parent, symbol)`` or ``(parent, symbol, source)`` for edge splits.
    """

    alphabet: Alphabet
    delta: np.ndarray
    counts: np.ndarray
    start_state: int = 0
    smoothing_lambda: float = 0.1
    lineage: tuple = (None,)

    @property
    def num_states(self) -> int:
        return int(self.delta.shape[0])

    @property
    def num_symbols(self) -> int:
        return len(self.alphabet)

    def totals(self) -> np.ndarray:
        return self.counts.sum(axis=1)

    def signature(self) -> str:
        """Digest of the transition structure; counts are not included."""
        h = hashlib.sha1()
        h.update(np.int64(self.start_state).tobytes())
        h.update(np.ascontiguousarray(self.delta, dtype=np.int64).tobytes())
        return h.hexdigest()

    def same_as(self, other: "Fst") -> bool:
        return (
            self.alphabet == other.alphabet
            and self.start_state == other.start_state
            and self.smoothing_lambda == other.smoothing_lambda
            and self.lineage == other.lineage
            and np.array_equal(self.delta, other.delta)
            and np.array_equal(self.counts, other.counts)
        )


@dataclass(frozen=True)
class SplitCandidate:
    """A hypothetical split of ``target_state``.

    ``source_state`` is ``None`` when every edge labelled
    ``incoming_symbol`` into the target moves to the new child, otherwise
    only the single edge ``(source_state, incoming_symbol)`` does.
    """

    target_state: int
    incoming_symbol: int
    weighted_child_entropy: float
    support_counts: tuple[int, int]
    parent_entropy: float = 0.0
    source_state: Optional[int] = None
    fst_signature: str = ""

    @property
    def gain(self) -> float:
        return self.parent_entropy - self.weighted_child_entropy

    def sort_key(self):
        src = -1 if self.source_state is None else self.source_state
        return (self.target_state, self.incoming_symbol, src)


@dataclass(frozen=True)
class TrainConfig:
    target_states: int = 8
    min_child_support: int = 5
    min_entropy_gain: float = 0.01
    smoothing_lambda: float = 0.1
    split_on: str = "edge"

    def __post_init__(self):
        if int(self.target_states) < 1:
            raise ValueError("target_states must be >= 1")
        if self.min_child_support < 0:
            raise ValueError("min_child_support must be >= 0")
        if self.min_entropy_gain < 0:
            raise ValueError("min_entropy_gain must be >= 0")
        if self.smoothing_lambda < 0:
            raise ValueError("smoothing_lambda must be >= 0")
        if self.split_on not in ("symbol", "edge"):
            raise ValueError(f"split_on must be 'symbol' or 'edge', got {self.split_on!r}")


@dataclass(frozen=True)
class SplitRecord:
    """One entry of the training history."""

    state: int
    symbol: str
    source_state: Optional[int]
    new_state: int
    parent_entropy: float
    weighted_child_entropy: float
    gain: float
    support_counts: tuple[int, int]
    num_states: int


def init_fst(alphabet: Alphabet, smoothing_lambda: float = 0.1) -> Fst:
    """Single ergodic state: every symbol loops back to state 0."""
    if len(alphabet) == 0:
        raise ValueError("alphabet must be nonempty")
    if smoothing_lambda < 0:
        raise ValueError("smoothing_lambda must be >= 0")
    n = len(alphabet)
    return Fst(
        alphabet=alphabet,
        delta=np.zeros((1, n), dtype=np.int64),
        counts=np.zeros((1, n), dtype=np.int64),
        start_state=0,
        smoothing_lambda=float(smoothing_lambda),
        lineage=(None,),
    )


def _check_sequences(fst: Fst, sequences) -> list[np.ndarray]:
    n = fst.num_symbols
    out = []
    for i, seq in enumerate(sequences):
        arr = np.asarray(seq, dtype=np.int64).reshape(-1)
        if arr.size and (arr.min() < 0 or arr.max() >= n):
            raise ValueError(f"sequence {i} has a symbol id outside the alphabet (size {n})")
        out.append(arr)
    return out


def _state_paths(fst: Fst, sequences: list[np.ndarray]) -> list[np.ndarray]:
    """States occupied before each token of each sequence."""
    delta = fst.delta.tolist()
    paths = []
    for seq in sequences:
        s = fst.start_state
        path = np.empty(seq.size, dtype=np.int64)
        for t, x in enumerate(seq.tolist()):
            path[t] = s
            s = delta[s][x]
        paths.append(path)
    return paths


def run_counts(fst: Fst, sequences: Sequence[Sequence[int]]) -> Fst:
    """Re-estimate emission counts with one pass over ``sequences``."""
    seqs = _check_sequences(fst, sequences)
    counts = np.zeros_like(fst.counts)
    paths = _state_paths(fst, seqs)
    if seqs:
        states = np.concatenate(paths)
        symbols = np.concatenate(seqs)
        np.add.at(counts, (states, symbols), 1)
    return replace(fst, counts=counts)


def entropy_bits(counts) -> float:
    """Shannon entropy in bits of a count vector; 0 for an empty vector."""
    c = np.asarray(counts, dtype=np.float64)
    total = c.sum()
    if total <= 0:
        return 0.0
    p = c[c > 0] / total
    return float(-(p * np.log2(p)).sum())


def _row_entropies(rows: np.ndarray) -> np.ndarray:
    rows = np.asarray(rows, dtype=np.float64)
    totals = rows.sum(axis=-1, keepdims=True)
    with np.errstate(divide="ignore", invalid="ignore"):
        p = np.where(totals > 0, rows / np.where(totals > 0, totals, 1.0), 0.0)
        logs = np.where(p > 0, np.log2(np.where(p > 0, p, 1.0)), 0.0)
    return -(p * logs).sum(axis=-1)


def _check_state(fst: Fst, state) -> int:
    if not (0 <= int(state) < fst.num_states) or int(state) != state:
        raise IndexError(f"invalid state {state!r} (num_states={fst.num_states})")
    return int(state)


def state_entropy(fst: Fst, state: int) -> float:
    """Entropy (bits) of the unsmoothed next-symbol distribution at ``state``."""
    return entropy_bits(fst.counts[_check_state(fst, state)])


def emission_pdf(fst: Fst, state: int) -> np.ndarray:
    """Additively smoothed next-symbol distribution at ``state``.

    A state with no observations and ``smoothing_lambda == 0`` falls back to
    the uniform distribution.
    """
    state = _check_state(fst, state)
    row = fst.counts[state].astype(np.float64)
    lam = fst.smoothing_lambda
    denom = row.sum() + lam * row.size
    if denom <= 0:
        return np.full(row.size, 1.0 / row.size)
    return (row + lam) / denom


def _entry_stats(fst: Fst, seqs: list[np.ndarray]) -> np.ndarray:
    """Next-symbol counts keyed by the edge a visit came in on.

    Row ``s * A + a`` holds visits entered via edge ``(s, a)``; the last row
    holds sequence-initial visits (to the start state).
    """
    A = fst.num_symbols
    start_row = fst.num_states * A
    stats = np.zeros((start_row + 1, A), dtype=np.int64)
    paths = _state_paths(fst, seqs)
    rows, cols = [], []
    for seq, path in zip(seqs, paths):
        if seq.size == 0:
            continue
        entry = np.empty(seq.size, dtype=np.int64)
        entry[0] = start_row
        entry[1:] = path[:-1] * A + seq[:-1]
        rows.append(entry)
        cols.append(seq)
    if rows:
        np.add.at(stats, (np.concatenate(rows), np.concatenate(cols)), 1)
    return stats


def _admissible(n_a, n_rest, gain, config: TrainConfig):
    return (
        (n_a > 0)
        & (n_rest > 0)
        & (n_a >= config.min_child_support)
        & (n_rest >= config.min_child_support)
        & (gain > TIE_EPS)
        & (gain >= config.min_entropy_gain - TIE_EPS)
    )


def best_split(fst: Fst, sequences, config: TrainConfig) -> Optional[SplitCandidate]:
    """Lowest weighted-child-entropy admissible split, or ``None``.

    Ties (within ``TIE_EPS``) go to the lowest target state, then the lowest
    symbol id, with whole-symbol candidates before single edges and single
    edges ordered by source state.
    """
    seqs = _check_sequences(fst, sequences)
    A = fst.num_symbols
    S = fst.num_states
    stats = _entry_stats(fst, seqs)
    edge_rows = stats[: S * A].reshape(S, A, A)  # [source, symbol, next]
    sig = fst.signature()

    best = None
    best_key = None
    for t in range(S):
        into_t = fst.delta == t  # [source, symbol]
        parent = edge_rows[into_t].sum(axis=0)
        if t == fst.start_state:
            parent = parent + stats[S * A]
        n = parent.sum()
        if n == 0:
            continue
        h_parent = entropy_bits(parent)

        # whole-symbol groups: sum over sources of edges (s, a) -> t
        groups = np.einsum("sa,sax->ax", into_t.astype(np.int64), edge_rows)
        cands = [(groups, np.arange(A), np.full(A, -1))]
        if config.split_on == "edge":
            src, sym = np.nonzero(into_t)
            if src.size:
                cands.append((edge_rows[src, sym], sym, src))

        for child, syms, srcs in cands:
            rest = parent[None, :] - child
            n_a = child.sum(axis=1)
            n_r = rest.sum(axis=1)
            h = (n_a * _row_entropies(child) + n_r * _row_entropies(rest)) / n
            ok = _admissible(n_a, n_r, h_parent - h, config)
            for i in np.nonzero(ok)[0]:
                hi = float(h[i])
                if best is not None:
                    if hi > best_key[0] + TIE_EPS:
                        continue
                    if abs(hi - best_key[0]) <= TIE_EPS and (t, int(syms[i]), int(srcs[i])) >= best_key[1:]:
                        continue
                best_key = (hi, t, int(syms[i]), int(srcs[i]))
                best = SplitCandidate(
                    target_state=t,
                    incoming_symbol=int(syms[i]),
                    weighted_child_entropy=hi,
                    support_counts=(int(n_a[i]), int(n_r[i])),
                    parent_entropy=h_parent,
                    source_state=None if srcs[i] < 0 else int(srcs[i]),
                    fst_signature=sig,
                )
    return best


def apply_split(fst: Fst, cand: SplitCandidate) -> Fst:
    """Move the candidate's incoming edges onto a fresh state.

    The new state copies the target's outgoing row, so the visits it
    receives behave exactly as they did before.  Counts are zeroed; call
    :func:`run_counts` afterwards.
    """
    if cand.fst_signature and cand.fst_signature != fst.signature():
        raise ValueError("stale split candidate: the automaton changed since it was scored")
    t = _check_state(fst, cand.target_state)
    a = int(cand.incoming_symbol)
    if not 0 <= a < fst.num_symbols:
        raise ValueError(f"invalid symbol id {a}")
    delta = fst.delta
    new = fst.num_states
    if cand.source_state is None:
        moved = np.zeros_like(delta, dtype=bool)
        moved[:, a] = delta[:, a] == t
    else:
        src = _check_state(fst, cand.source_state)
        moved = np.zeros_like(delta, dtype=bool)
        moved[src, a] = delta[src, a] == t
    if not moved.any():
        raise ValueError(
            f"stale split candidate: no edge labelled {a} enters state {t}"
        )
    out = np.vstack([delta, delta[t][None, :]])
    out[:-1][moved] = new
    # a moved self-loop on t is mirrored by the copy's own loop
    out[new][moved[t]] = new
    lin = (t, a) if cand.source_state is None else (t, a, int(cand.source_state))
    return replace(
        fst,
        delta=out,
        counts=np.zeros((new + 1, fst.num_symbols), dtype=np.int64),
        lineage=fst.lineage + (lin,),
    )


def train_fst(
    sequences: Sequence[Sequence[int]],
    alphabet: Alphabet,
    config: TrainConfig = TrainConfig(),
    history: Optional[list] = None,
) -> Fst:
    """Grow an automaton to ``config.target_states`` by greedy splitting.

    If ``history`` is a list, one :class:`SplitRecord` is appended per split.
    """
    fst = init_fst(alphabet, config.smoothing_lambda)
    seqs = _check_sequences(fst, sequences)
    fst = run_counts(fst, seqs)
    while fst.num_states < config.target_states:
        cand = best_split(fst, seqs, config)
        if cand is None:
            break
        fst = run_counts(apply_split(fst, cand), seqs)
        if history is not None:
            history.append(SplitRecord(
                state=cand.target_state,
                symbol=alphabet.symbols[cand.incoming_symbol],
                source_state=cand.source_state,
                new_state=fst.num_states - 1,
                parent_entropy=cand.parent_entropy,
                weighted_child_entropy=cand.weighted_child_entropy,
                gain=cand.gain,
                support_counts=cand.support_counts,
                num_states=fst.num_states,
            ))
    return fst


def check_structure(fst: Fst) -> None:
    """Raise ``ValueError`` unless ``fst`` is well formed."""
    S, A = fst.num_states, fst.num_symbols
    if S < 1:
        raise ValueError("an automaton needs at least one state")
    if fst.delta.shape != (S, A) or fst.counts.shape != (S, A):
        raise ValueError("delta/counts shape does not match states x symbols")
    if fst.delta.min() < 0 or fst.delta.max() >= S:
        raise ValueError("transition targets out of range")
    if fst.counts.min() < 0:
        raise ValueError("negative counts")
    if not 0 <= fst.start_state < S:
        raise ValueError("start state out of range")
    if len(fst.lineage) != S:
        raise ValueError("lineage length does not match num_states")
    if fst.smoothing_lambda < 0:
        raise ValueError("negative smoothing")
