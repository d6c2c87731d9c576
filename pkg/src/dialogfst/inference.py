"""Running a trained automaton: traces, predictions, scoring, I/O, DOT."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Iterable, Optional, Sequence

import numpy as np

from .fst import Alphabet, Fst, check_structure, emission_pdf

__all__ = [
    "Trace",
    "Prediction",
    "FORMAT_VERSION",
    "FstFormatError",
    "step",
    "traverse",
    "predict_next",
    "sequence_logprob",
    "perplexity",
    "cross_entropy",
    "serialize",
    "deserialize",
    "save",
    "load",
    "export_dot",
]

FORMAT_VERSION = 1


class FstFormatError(ValueError):
    """Raised for unreadable, corrupted or unsupported model files."""


@dataclass(frozen=True, eq=False)
class Trace:
    states: tuple[int, ...]
    embeddings: tuple[np.ndarray, ...]

    def __len__(self):
        return len(self.states)

    @property
    def final_state(self) -> int:
        return self.states[-1]

    def matrix(self) -> np.ndarray:
        """Embeddings stacked into a ``(len(states), num_symbols)`` array."""
        return np.vstack(self.embeddings)


@dataclass(frozen=True)
class Prediction:
    ranked: tuple[tuple[str, float], ...]

    @property
    def top(self) -> str:
        return self.ranked[0][0]

    def top_k(self, k: int) -> tuple[tuple[str, float], ...]:
        return self.ranked[:k]


def _symbol_id(fst: Fst, symbol) -> int:
    if isinstance(symbol, str):
        return fst.alphabet.id(symbol)
    if not 0 <= int(symbol) < fst.num_symbols or int(symbol) != symbol:
        raise IndexError(f"invalid symbol id {symbol!r} (alphabet size {fst.num_symbols})")
    return int(symbol)


def step(fst: Fst, state: int, symbol) -> int:
    if not 0 <= int(state) < fst.num_states or int(state) != state:
        raise IndexError(f"invalid state {state!r} (num_states={fst.num_states})")
    return int(fst.delta[int(state), _symbol_id(fst, symbol)])


def traverse(fst: Fst, sequence: Iterable) -> Trace:
    """Walk ``sequence`` from the start state and collect every state's PDF.

    Symbols may be ids or names.
    """
    s = fst.start_state
    states = [s]
    for pos, x in enumerate(sequence):
        try:
            a = _symbol_id(fst, x)
        except (IndexError, KeyError) as exc:
            raise ValueError(f"bad symbol at position {pos}: {exc}") from None
        s = int(fst.delta[s, a])
        states.append(s)
    pdfs = {}
    for q in states:
        if q not in pdfs:
            pdfs[q] = emission_pdf(fst, q)
            pdfs[q].setflags(write=False)
    return Trace(tuple(states), tuple(pdfs[q] for q in states))


def _rank(probs: np.ndarray, ids: Sequence[int], alphabet: Alphabet) -> Prediction:
    order = sorted(ids, key=lambda i: (-probs[i], i))
    return Prediction(tuple((alphabet.symbols[i], float(probs[i])) for i in order))


def predict_next(fst: Fst, state: int, mask: Optional[Iterable] = None) -> Prediction:
    """Ranked next-symbol distribution, optionally restricted to ``mask``.

    With a mask the probabilities are renormalised over the masked symbols.
    Ties are ordered by symbol id.
    """
    pdf = emission_pdf(fst, state)
    if mask is None:
        return _rank(pdf, range(fst.num_symbols), fst.alphabet)
    ids = sorted({_symbol_id(fst, m) for m in mask})
    if not ids:
        raise ValueError("mask must be nonempty")
    sub = np.zeros_like(pdf)
    sub[ids] = pdf[ids]
    z = sub.sum()
    if z > 0:
        sub = sub / z
    else:
        sub[ids] = 1.0 / len(ids)
    return _rank(sub, ids, fst.alphabet)


def sequence_logprob(fst: Fst, sequence: Sequence) -> float:
    """Sum of log2 next-symbol probabilities along ``sequence``."""
    trace = traverse(fst, sequence)
    total = 0.0
    for pos, x in enumerate(sequence):
        p = trace.embeddings[pos][_symbol_id(fst, x)]
        if p <= 0:
            raise ValueError(
                f"zero probability for symbol at position {pos}; "
                "use smoothing_lambda > 0 to score unseen transitions"
            )
        total += math.log2(p)
    return total


def perplexity(fst: Fst, sequences: Sequence[Sequence]) -> float:
    total = 0.0
    n = 0
    for seq in sequences:
        total += sequence_logprob(fst, seq)
        n += len(seq)
    if n == 0:
        raise ValueError("perplexity is undefined on an empty set of tokens")
    return 2.0 ** (-total / n)


def cross_entropy(fst: Fst, sequences: Sequence[Sequence]) -> float:
    """Average negative log2 probability per token (bits)."""
    return math.log2(perplexity(fst, sequences))


# -- serialization -----------------------------------------------------------

def to_dict(fst: Fst) -> dict:
    return {
        "format_version": FORMAT_VERSION,
        "alphabet": list(fst.alphabet.symbols),
        "num_states": fst.num_states,
        "start_state": int(fst.start_state),
        "smoothing_lambda": float(fst.smoothing_lambda),
        "delta": [int(v) for v in fst.delta.reshape(-1)],
        "counts": [int(v) for v in fst.counts.reshape(-1)],
        "lineage": [None if e is None else [int(v) for v in e] for e in fst.lineage],
    }


def serialize(fst: Fst) -> bytes:
    """Byte-stable JSON encoding (sorted keys, UTF-8, trailing newline)."""
    text = json.dumps(to_dict(fst), sort_keys=True, ensure_ascii=False, separators=(",", ":"))
    return (text + "\n").encode("utf-8")


def from_dict(obj) -> Fst:
    if not isinstance(obj, dict):
        raise FstFormatError("model must be a JSON object")
    version = obj.get("format_version")
    if version != FORMAT_VERSION:
        raise FstFormatError(f"unsupported format_version {version!r} (expected {FORMAT_VERSION})")
    try:
        alphabet = Alphabet(obj["alphabet"])
        S = int(obj["num_states"])
        A = len(alphabet)
        if A == 0:
            raise FstFormatError("corrupted model: empty alphabet")
        delta = np.asarray(obj["delta"], dtype=np.int64)
        counts = np.asarray(obj["counts"], dtype=np.int64)
        if delta.shape != (S * A,) or counts.shape != (S * A,):
            raise FstFormatError(f"delta/counts must hold {S}x{A} entries")
        lineage = tuple(None if e is None else tuple(int(v) for v in e) for e in obj["lineage"])
        fst = Fst(
            alphabet=alphabet,
            delta=delta.reshape(S, A),
            counts=counts.reshape(S, A),
            start_state=int(obj["start_state"]),
            smoothing_lambda=float(obj["smoothing_lambda"]),
            lineage=lineage,
        )
        check_structure(fst)
    except FstFormatError:
        raise
    except (KeyError, TypeError, ValueError) as exc:
        raise FstFormatError(f"corrupted model: {exc}") from None
    return fst


def deserialize(data: bytes) -> Fst:
    try:
        obj = json.loads(data.decode("utf-8") if isinstance(data, (bytes, bytearray)) else data)
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise FstFormatError(f"unreadable model: {exc}") from None
    return from_dict(obj)


def save(fst: Fst, path) -> None:
    with open(path, "wb") as f:
        f.write(serialize(fst))


def load(path) -> Fst:
    with open(path, "rb") as f:
        return deserialize(f.read())


# -- visualisation -----------------------------------------------------------

def _dot_quote(text: str) -> str:
    return '"' + text.replace("\\", "\\\\").replace('"', '\\"').replace("\n", "\\n") + '"'


def export_dot(fst: Fst, top_k: int = 3, threshold: float = 0.05, name: str = "fst") -> str:
    """Graphviz digraph of ``fst``.

    Nodes list their ``top_k`` most likely next symbols; an edge is drawn for
    every symbol whose probability at the source state is at least
    ``threshold``.
    """
    if top_k < 1:
        raise ValueError("top_k must be >= 1")
    lines = [f"digraph {_dot_quote(name)} {{", "  rankdir=LR;", "  node [shape=circle];"]
    pdfs = [emission_pdf(fst, s) for s in range(fst.num_states)]
    for s in range(fst.num_states):
        top = _rank(pdfs[s], range(fst.num_symbols), fst.alphabet).top_k(top_k)
        label = "\n".join([str(s)] + [f"{sym}, {p:.2f}" for sym, p in top])
        attrs = f"label={_dot_quote(label)}"
        if s == fst.start_state:
            attrs = "shape=doublecircle, " + attrs
        lines.append(f"  s{s} [{attrs}];")
    for s in range(fst.num_states):
        for a in range(fst.num_symbols):
            p = pdfs[s][a]
            if p >= threshold:
                label = f"{fst.alphabet.symbols[a]}, {p:.2f}"
                lines.append(f"  s{s} -> s{int(fst.delta[s, a])} [label={_dot_quote(label)}];")
    lines.append("}")
    return "\n".join(lines) + "\n"
