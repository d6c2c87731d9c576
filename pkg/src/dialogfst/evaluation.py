"""Symbolic evaluation of automata and baselines on annotated dialogs.

Metrics: masked next-act accuracy, strategy-set exact accuracy and macro
F1, and "bigram" accuracy against a ground truth expanded with the next
strategy sets of training positions that share the previous two turns.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from typing import Iterable, Optional, Sequence

import numpy as np

from .annotator import (
    ACTS,
    EOT,
    NONE,
    AnnotatedDialog,
    act_sequence,
    strategy_inventory,
    turn_strategy_symbols,
)
from .fst import Alphabet, Fst, emission_pdf, init_fst, run_counts
from .inference import Trace, perplexity, predict_next, traverse

BASELINES = ("uniform", "unigram", "markov1")


class AlphabetMismatch(ValueError):
    pass


def _require_symbols(fst: Fst, symbols: Iterable[str], what: str):
    missing = sorted({s for s in symbols if s not in fst.alphabet})
    if missing:
        raise AlphabetMismatch(
            f"{what} uses symbols missing from the model alphabet: {missing}\n"
            f"model alphabet: {list(fst.alphabet.symbols)}"
        )


# -- next act ----------------------------------------------------------------

def _role_mask(fst: Fst, role: str, labels: Sequence[str]) -> list[int]:
    return [fst.alphabet.index[f"{role}:{x}"] for x in labels if f"{role}:{x}" in fst.alphabet]


def next_act_accuracy(fst: Fst, test: Sequence[AnnotatedDialog]) -> float:
    """Accuracy of the role-masked argmax act over turns 1..n-1."""
    correct = total = 0
    for ad in test:
        seq = act_sequence(ad)
        _require_symbols(fst, seq, f"dialog {ad.dialog_id!r}")
        state = fst.start_state
        for t, sym in enumerate(seq):
            if t >= 1:
                mask = _role_mask(fst, ad.turns[t].role, ACTS)
                pred = predict_next(fst, state, mask).top
                correct += pred == sym
                total += 1
            state = int(fst.delta[state, fst.alphabet.index[sym]])
    if total == 0:
        raise ValueError("no prediction points in the test set")
    return correct / total


def next_symbol_accuracy(fst: Fst, sequences: Sequence[Sequence[int]]) -> float:
    """Unmasked argmax accuracy at every position of every sequence."""
    correct = total = 0
    argmax = [int(np.argmax(emission_pdf(fst, s))) for s in range(fst.num_states)]
    delta = fst.delta.tolist()
    for seq in sequences:
        s = fst.start_state
        for x in seq:
            correct += argmax[s] == x
            total += 1
            s = delta[s][x]
    if total == 0:
        raise ValueError("no tokens to score")
    return correct / total


# -- strategy sets -----------------------------------------------------------

@dataclass(frozen=True)
class SetRule:
    """How to turn a next-strategy PDF into a set: ``top_k`` or ``threshold``."""

    kind: str = "top_k"
    k: int = 1
    tau: float = 0.5

    def __post_init__(self):
        if self.kind not in ("top_k", "threshold"):
            raise ValueError(f"unknown set rule {self.kind!r}")
        if self.kind == "top_k" and self.k < 0:
            raise ValueError("k must be >= 0")


def default_set_rule(train: Sequence[AnnotatedDialog]) -> SetRule:
    """``top_k`` with k the rounded mean gold set size on ``train`` (at least 1)."""
    sizes = [len(t.strategies) for ad in train for t in ad.turns]
    mean = sum(sizes) / len(sizes) if sizes else 1.0
    return SetRule("top_k", k=max(1, int(round(mean))))


def predict_strategy_set(
    fst: Fst,
    trace: Trace,
    rule: SetRule,
    role: str,
    schema: str = "negotiation",
) -> frozenset:
    state = trace.final_state
    if not 0 <= state < fst.num_states:
        raise ValueError("trace does not belong to this model (state out of range)")
    pdf = trace.embeddings[-1]
    if pdf.shape != (fst.num_symbols,) or not np.array_equal(pdf, emission_pdf(fst, state)):
        raise ValueError("trace does not belong to this model (embedding mismatch)")
    labels = [s for s in strategy_inventory(schema) if f"{role}:{s}" in fst.alphabet]
    if not labels:
        return frozenset()
    probs = np.array([pdf[fst.alphabet.index[f"{role}:{s}"]] for s in labels])
    z = probs.sum()
    probs = probs / z if z > 0 else np.full(len(labels), 1.0 / len(labels))
    if rule.kind == "top_k":
        order = sorted(range(len(labels)), key=lambda i: (-probs[i], i))
        return frozenset(labels[i] for i in order[: rule.k])
    return frozenset(s for s, p in zip(labels, probs) if p >= rule.tau)


def strategy_metrics(predictions: Sequence, gold: Sequence, labels: Optional[Iterable[str]] = None):
    """``(exact_accuracy, macro_f1)``.

    Macro F1 averages per-label F1 over ``labels`` (default: every label
    seen in either argument).  A label never predicted and never gold
    scores 0.  With no labels at all, macro F1 is 1.0.
    """
    if len(predictions) != len(gold):
        raise ValueError(f"length mismatch: {len(predictions)} predictions vs {len(gold)} gold")
    if not gold:
        raise ValueError("no positions to score")
    predictions = [frozenset(p) for p in predictions]
    gold = [frozenset(g) for g in gold]
    exact = sum(p == g for p, g in zip(predictions, gold)) / len(gold)
    if labels is None:
        labels = sorted(set().union(*predictions, *gold))
    labels = list(labels)
    if not labels:
        return exact, 1.0
    f1s = []
    for lab in labels:
        tp = sum(lab in p and lab in g for p, g in zip(predictions, gold))
        fp = sum(lab in p and lab not in g for p, g in zip(predictions, gold))
        fn = sum(lab not in p and lab in g for p, g in zip(predictions, gold))
        f1s.append(2 * tp / (2 * tp + fp + fn) if tp else 0.0)
    return exact, float(sum(f1s) / len(f1s))


# -- expanded ground truth ---------------------------------------------------

def turn_summary(turn) -> tuple:
    return (turn.role, turn.act, frozenset(turn.strategies))


def history_key(ad: AnnotatedDialog, t: int) -> tuple:
    """Signature of the two turns before position ``t`` (``None`` pads)."""
    prev2 = turn_summary(ad.turns[t - 2]) if t >= 2 else None
    prev1 = turn_summary(ad.turns[t - 1]) if t >= 1 else None
    return (prev2, prev1)


class HistoryIndex:
    """Next-turn strategy sets of training positions, grouped by history key."""

    def __init__(self, train: Sequence[AnnotatedDialog]):
        self.table: dict = {}
        for ad in train:
            for t in range(1, len(ad.turns)):
                self.table.setdefault(history_key(ad, t), []).append(frozenset(ad.turns[t].strategies))

    def matches(self, key) -> list:
        return self.table.get(key, [])


def expand_ground_truth(train, key, gold: Iterable[str] = ()) -> frozenset:
    """Union of ``gold`` and the next sets of every training match of ``key``."""
    index = train if isinstance(train, HistoryIndex) else HistoryIndex(train)
    out = set(gold)
    for s in index.matches(key):
        out |= s
    return frozenset(out)


def set_correct(pred: frozenset, acceptable: Sequence[frozenset], exact: bool = False) -> bool:
    """Whether ``pred`` is right given the acceptable next sets.

    Subset mode: ``pred`` is nonempty and inside their union, or empty and
    one of them is empty.  Exact mode: ``pred`` equals one of them.
    """
    if exact:
        return pred in acceptable
    if not pred:
        return any(not a for a in acceptable)
    return pred <= frozenset().union(*acceptable)


def _strategy_positions(fst: Fst, dialogs: Sequence[AnnotatedDialog], rule: SetRule):
    """Yield ``(dialog, t, predicted set)`` for t >= 1."""
    for ad in dialogs:
        prefix: list[str] = []
        for t, turn in enumerate(ad.turns):
            if t >= 1:
                trace = traverse(fst, prefix)
                yield ad, t, predict_strategy_set(fst, trace, rule, turn.role, ad.schema)
            syms = turn_strategy_symbols(turn.role, turn.strategies, ad.schema)
            _require_symbols(fst, syms, f"dialog {ad.dialog_id!r}")
            prefix.extend(syms)


def strategy_predictions(fst: Fst, test: Sequence[AnnotatedDialog], rule: SetRule):
    preds, gold, keys = [], [], []
    for ad, t, pred in _strategy_positions(fst, test, rule):
        preds.append(pred)
        gold.append(frozenset(ad.turns[t].strategies))
        keys.append(history_key(ad, t))
    return preds, gold, keys


def bigram_accuracy(fst, train, test, rule: SetRule, exact: bool = False, expand: bool = True) -> float:
    """Fraction of positions judged correct against the expanded ground truth.

    ``expand=False`` scores against the position's own gold set only.
    """
    index = HistoryIndex(train) if expand else None
    preds, gold, keys = strategy_predictions(fst, test, rule)
    if not preds:
        raise ValueError("no prediction points in the test set")
    right = 0
    for p, g, k in zip(preds, gold, keys):
        acceptable = [g] + (index.matches(k) if index is not None else [])
        right += set_correct(p, acceptable, exact)
    return right / len(preds)


# -- baselines ---------------------------------------------------------------

def baseline_predictor(kind: str, train_sequences, alphabet: Alphabet, smoothing_lambda: float = 0.1) -> Fst:
    """A non-neural baseline expressed as an :class:`Fst`.

    ``uniform`` is one state with no counts, ``unigram`` one state with
    counts, ``markov1`` a start state plus one state per previous symbol.
    """
    train_sequences = [list(s) for s in train_sequences]
    if kind == "uniform":
        fst = init_fst(alphabet, smoothing_lambda)
        return fst
    if not any(train_sequences):
        raise ValueError(f"{kind} baseline needs nonempty training data")
    if kind == "unigram":
        return run_counts(init_fst(alphabet, smoothing_lambda), train_sequences)
    if kind == "markov1":
        A = len(alphabet)
        delta = np.tile(np.arange(1, A + 1, dtype=np.int64), (A + 1, 1))
        fst = Fst(
            alphabet=alphabet,
            delta=delta,
            counts=np.zeros((A + 1, A), dtype=np.int64),
            start_state=0,
            smoothing_lambda=float(smoothing_lambda),
            lineage=(None,) + tuple((0, a) for a in range(A)),
        )
        return run_counts(fst, train_sequences)
    raise ValueError(f"unknown baseline kind {kind!r}")


# -- reports -----------------------------------------------------------------

@dataclass
class ModelScores:
    next_act_accuracy: Optional[float] = None
    strategy_exact_accuracy: Optional[float] = None
    strategy_macro_f1: Optional[float] = None
    bigram_accuracy: Optional[float] = None
    perplexity: Optional[float] = None
    strategy_perplexity: Optional[float] = None


@dataclass
class EvalReport:
    model: ModelScores
    baselines: dict = field(default_factory=dict)
    set_rule: Optional[SetRule] = None
    num_test_dialogs: int = 0

    def rows(self):
        yield "FST", self.model
        for name, scores in self.baselines.items():
            yield name, scores

    def to_dict(self) -> dict:
        return {
            "model": asdict(self.model),
            "baselines": {k: asdict(v) for k, v in self.baselines.items()},
            "set_rule": None if self.set_rule is None else asdict(self.set_rule),
            "num_test_dialogs": self.num_test_dialogs,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2) + "\n"

    def to_text(self) -> str:
        cols = [
            ("Act.acc", "next_act_accuracy"),
            ("S.acc", "strategy_exact_accuracy"),
            ("S.F1", "strategy_macro_f1"),
            ("Bi.acc", "bigram_accuracy"),
            ("PPL(da)", "perplexity"),
            ("PPL(st)", "strategy_perplexity"),
        ]
        header = ["Model"] + [c for c, _ in cols]
        body = []
        for name, s in self.rows():
            cells = [name]
            for _, attr in cols:
                v = getattr(s, attr)
                cells.append("-" if v is None else f"{v:.4f}")
            body.append(cells)
        widths = [max(len(r[i]) for r in [header] + body) for i in range(len(header))]
        fmt = lambda r: "  ".join(c.ljust(w) if i == 0 else c.rjust(w) for i, (c, w) in enumerate(zip(r, widths)))
        lines = [fmt(header), "  ".join("-" * w for w in widths)] + [fmt(r) for r in body]
        return "\n".join(lines) + "\n"


def score_model(act_model, strategy_model, train, test, rule: SetRule) -> ModelScores:
    scores = ModelScores()
    if act_model is not None:
        scores.next_act_accuracy = next_act_accuracy(act_model, test)
        scores.perplexity = perplexity(act_model, [act_sequence(ad) for ad in test])
    if strategy_model is not None:
        preds, gold, _ = strategy_predictions(strategy_model, test, rule)
        labels = strategy_inventory(test[0].schema) if test else ()
        exact, f1 = strategy_metrics(preds, gold, labels)
        scores.strategy_exact_accuracy = exact
        scores.strategy_macro_f1 = f1
        scores.bigram_accuracy = bigram_accuracy(strategy_model, train, test, rule)
        scores.strategy_perplexity = perplexity(
            strategy_model, [_strategy_symbols(ad) for ad in test]
        )
    return scores


def _strategy_symbols(ad: AnnotatedDialog) -> list[str]:
    out: list[str] = []
    for t in ad.turns:
        out.extend(turn_strategy_symbols(t.role, t.strategies, ad.schema))
    return out


def compare_report(
    act_model: Optional[Fst],
    strategy_model: Optional[Fst],
    train: Sequence[AnnotatedDialog],
    test: Sequence[AnnotatedDialog],
    rule: Optional[SetRule] = None,
    baselines: Sequence[str] = BASELINES,
) -> EvalReport:
    """Score the models and each baseline kind on ``test``.

    Baselines are fitted on ``train`` with the models' alphabets and
    smoothing.
    """
    if not test:
        raise ValueError("empty test set")
    if rule is None:
        rule = default_set_rule(train)
    report = EvalReport(score_model(act_model, strategy_model, train, test, rule), {}, rule, len(test))
    train_acts = [act_sequence(ad) for ad in train]
    train_strats = [_strategy_symbols(ad) for ad in train]
    for kind in baselines:
        b_act = b_st = None
        if act_model is not None:
            seqs = [act_model.alphabet.encode(s) for s in train_acts]
            b_act = baseline_predictor(kind, seqs, act_model.alphabet, act_model.smoothing_lambda)
        if strategy_model is not None:
            seqs = [strategy_model.alphabet.encode(s) for s in train_strats]
            b_st = baseline_predictor(kind, seqs, strategy_model.alphabet, strategy_model.smoothing_lambda)
        report.baselines[kind] = score_model(b_act, b_st, train, test, rule)
    return report
