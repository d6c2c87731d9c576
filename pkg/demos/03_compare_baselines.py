"""Score learned automata against uniform, unigram and first-order baselines.

The corpus is synthetic: act and strategy labels come from a hidden
random automaton, so the numbers show how the evaluation harness reads
rather than anything about real negotiations.
"""

import numpy as np

from dialogfst import TrainConfig, train_fst
from dialogfst.annotator import (
    ACTS,
    AnnotatedDialog,
    AnnotatedTurn,
    act_alphabet,
    act_sequence,
    strategy_alphabet,
    strategy_inventory,
    strategy_sequence,
)
from dialogfst.corpus import Dialog, Scenario, Turn
from dialogfst.evaluation import compare_report

rng = np.random.default_rng(3)
rule_rows = strategy_inventory("negotiation")[5:]


def fake_dialog(i):
    n = int(rng.poisson(9.2)) + 2
    turns, state = [], 0
    for j in range(n):
        role = ("buyer", "seller")[j % 2]
        act = ACTS[(state + j) % len(ACTS)] if rng.random() < 0.7 else str(rng.choice(ACTS))
        state = (state * 3 + ACTS.index(act)) % 5
        strats = frozenset(s for s in rule_rows[state:state + 2] if rng.random() < 0.6)
        turns.append(AnnotatedTurn(Turn(role, ""), act, strats))
    return AnnotatedDialog(Dialog(f"f{i}", Scenario(), tuple(t.turn for t in turns)), tuple(turns), "negotiation")


dialogs = [fake_dialog(i) for i in range(600)]
train, test = dialogs[:500], dialogs[500:]

aa, sa = act_alphabet(), strategy_alphabet()
da = train_fst([aa.encode(act_sequence(d)) for d in train], aa, TrainConfig(target_states=40))
st = train_fst([sa.encode(strategy_sequence(d)) for d in train], sa, TrainConfig(target_states=40))

report = compare_report(da, st, train, test)
print(f"set rule: {report.set_rule}\n")
print(report.to_text())
