"""Learn an automaton from data sampled by a known one.

A three-state source emits four symbols.  Greedy state splitting starts
from a single state and refines it; the held-out cross-entropy drops to
the source's entropy rate once the learned machine has enough states.
"""

import numpy as np

from dialogfst import TrainConfig, cross_entropy, train_fst
from dialogfst.synthetic import sample_sequences, three_state_source

source = three_state_source()
rng = np.random.default_rng(0)
train = sample_sequences(source, rng, 20_000)
test = sample_sequences(source, rng, 5_000)
print(f"source entropy rate: {source.entropy_rate():.4f} bits/symbol\n")

history = []
fst = train_fst(train, source.alphabet(), TrainConfig(target_states=6), history)
print("splits taken:")
for h in history:
    print(f"  state {h.state} on {h.symbol!r}: gain {h.gain:.4f} bits -> {h.num_states} states")

print("\nheld-out cross-entropy by K:")
for k in range(1, 7):
    f = train_fst(train, source.alphabet(), TrainConfig(target_states=k))
    print(f"  K={k}  states={f.num_states}  H={cross_entropy(f, test):.4f}")
