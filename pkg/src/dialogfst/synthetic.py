"""Seeded synthetic sources with known structure, for tests and demos."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .fst import Alphabet


@dataclass(frozen=True)
class AutomatonSource:
    """A deterministic automaton that emits symbols from per-state PDFs.

    ``delta[s, x]`` is the successor of state ``s`` after emitting ``x`` and
    ``emissions[s]`` the distribution over ``x``.
    """

    delta: np.ndarray
    emissions: np.ndarray
    start_state: int = 0

    @property
    def num_symbols(self) -> int:
        return self.emissions.shape[1]

    def alphabet(self) -> Alphabet:
        return Alphabet(f"x{i}" for i in range(self.num_symbols))

    def sample(self, rng: np.random.Generator, length: int) -> list[int]:
        s = self.start_state
        out = []
        for _ in range(length):
            x = int(rng.choice(self.num_symbols, p=self.emissions[s]))
            out.append(x)
            s = int(self.delta[s, x])
        return out

    def stationary(self) -> np.ndarray:
        S = self.delta.shape[0]
        T = np.zeros((S, S))
        for s in range(S):
            for x in range(self.num_symbols):
                T[s, self.delta[s, x]] += self.emissions[s, x]
        w, v = np.linalg.eig(T.T)
        pi = np.real(v[:, np.argmin(np.abs(w - 1.0))])
        return pi / pi.sum()

    def entropy_rate(self) -> float:
        """Stationary entropy rate in bits per symbol."""
        e = self.emissions
        with np.errstate(divide="ignore", invalid="ignore"):
            h = -np.where(e > 0, e * np.log2(np.where(e > 0, e, 1.0)), 0.0).sum(axis=1)
        return float(self.stationary() @ h)


def three_state_source() -> AutomatonSource:
    """Three states, four symbols, clearly distinct emission profiles.

    ``x0``..``x2`` jump to states 0..2; ``x3`` moves 0 -> 1 and otherwise
    to 2, so the state is fixed by at most the last two symbols.
    """
    delta = np.array([
        [0, 1, 2, 1],
        [0, 1, 2, 2],
        [0, 1, 2, 2],
    ])
    emissions = np.array([
        [0.70, 0.10, 0.10, 0.10],
        [0.05, 0.15, 0.75, 0.05],
        [0.10, 0.60, 0.05, 0.25],
    ])
    return AutomatonSource(delta, emissions)


def sample_sequences(source: AutomatonSource, rng, num_tokens: int, seq_len: int = 200) -> list[list[int]]:
    """Independent runs from the start state totalling ``num_tokens`` tokens."""
    seqs = []
    left = num_tokens
    while left > 0:
        n = min(seq_len, left)
        seqs.append(source.sample(rng, n))
        left -= n
    return seqs


def alternator(length: int, num_sequences: int = 1) -> list[list[int]]:
    """``num_sequences`` copies of ``0 1 0 1 ...``."""
    return [[i % 2 for i in range(length)] for _ in range(num_sequences)]


def second_order_tables(num_symbols: int, rng, peak: float = 0.8) -> np.ndarray:
    """Random ``P(x_t | x_{t-2}, x_{t-1})`` with one dominant symbol per context.

    Index ``num_symbols`` stands for "before the sequence".
    """
    n = num_symbols
    probs = np.zeros((n + 1, n + 1, n))
    for i in range(n + 1):
        for j in range(n + 1):
            p = rng.dirichlet(np.ones(n)) * (1 - peak)
            p[rng.integers(n)] += peak
            probs[i, j] = p
    return probs


def sample_second_order(probs: np.ndarray, rng, num_sequences: int, length: int) -> list[list[int]]:
    n = probs.shape[-1]
    seqs = []
    for _ in range(num_sequences):
        a, b = n, n
        seq = []
        for _ in range(length):
            x = int(rng.choice(n, p=probs[a, b]))
            seq.append(x)
            a, b = b, x
        seqs.append(seq)
    return seqs


def random_walk_corpus(num_symbols: int, num_sequences: int, mean_len: float, rng, num_states: int = 6):
    """Dialog-shaped corpus from a random automaton; lengths are Poisson."""
    delta = rng.integers(num_states, size=(num_states, num_symbols))
    emissions = rng.dirichlet(np.full(num_symbols, 0.3), size=num_states)
    src = AutomatonSource(delta, emissions)
    lens = np.maximum(1, rng.poisson(mean_len, size=num_sequences))
    return [src.sample(rng, int(n)) for n in lens]
