"""Greedy state-splitting automata for dialog-act and strategy history."""

from .fst import (
    Alphabet,
    Fst,
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
from .inference import (
    cross_entropy,
    Prediction,
    Trace,
    deserialize,
    export_dot,
    perplexity,
    predict_next,
    sequence_logprob,
    serialize,
    step,
    traverse,
)

__version__ = "0.1.0"
