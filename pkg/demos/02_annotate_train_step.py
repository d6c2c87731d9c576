"""Annotate a few negotiation dialogs, learn a dialog-act automaton, walk it.

Uses the bundled rules to tag each turn, trains a small automaton over
role-prefixed acts, then replays an opening and prints the predicted
next act at each step.  Ends with the Graphviz rendering of the model.
"""

from pathlib import Path

from dialogfst import TrainConfig, export_dot, predict_next, step, train_fst
from dialogfst.annotator import act_alphabet, act_sequence, annotate_corpus, strategy_sequence
from dialogfst.corpus import read_corpus

data = Path(__file__).parent / "data" / "sample_dialogs.jsonl"
dialogs = annotate_corpus(read_corpus(data))

for ad in dialogs[:2]:
    print(ad.dialog_id)
    for t in ad.turns:
        tags = ", ".join(sorted(t.strategies)) or "-"
        print(f"  {t.turn.role:6} {t.act:10} [{tags}]  {t.turn.text}")
print("\nstrategy stream of the first dialog:", " ".join(strategy_sequence(dialogs[0])[:8]), "...")

alphabet = act_alphabet()
seqs = [alphabet.encode(act_sequence(ad)) for ad in dialogs]
fst = train_fst(seqs, alphabet, TrainConfig(target_states=4, min_child_support=2))
print(f"\nlearned {fst.num_states} states from {sum(map(len, seqs))} acts")

state = fst.start_state
for sym in ["buyer:intro", "seller:intro", "buyer:inquire"]:
    state = step(fst, state, sym)
    top = predict_next(fst, state).top_k(3)
    print(f"after {sym:14} -> state {state}: " + ", ".join(f"{s} {p:.2f}" for s, p in top))

print()
print(export_dot(fst, top_k=2, threshold=0.1))
