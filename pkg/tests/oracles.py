"""Slow, independent reference implementations used as test oracles.

Nothing here touches numpy or the library's internals beyond reading an
automaton's transition table.
"""

import math
from collections import Counter, defaultdict

EPS = 1e-12


def entropy(counter):
    n = sum(counter.values())
    if n == 0:
        return 0.0
    return -sum(c / n * math.log2(c / n) for c in counter.values() if c)


def walk(delta, start, seq):
    """States occupied before each token."""
    s = start
    out = []
    for x in seq:
        out.append(s)
        s = delta[s][x]
    return out


def brute_force_split(delta, start, sequences, min_support=0, min_gain=0.0, split_on="edge"):
    """Exhaustively score every candidate split by direct simulation.

    ``delta`` is a list of lists.  Returns ``(target, symbol, source, H)``
    for the best admissible candidate (``source`` -1 for a whole-symbol
    split) or ``None``.
    """
    S = len(delta)
    A = len(delta[0])
    # entries[t] = list of (entering edge or None, next symbol)
    entries = defaultdict(list)
    for seq in sequences:
        path = walk(delta, start, seq)
        for i, x in enumerate(seq):
            edge = None if i == 0 else (path[i - 1], seq[i - 1])
            entries[path[i]].append((edge, x))

    cands = []
    for t in range(S):
        for a in range(A):
            cands.append((t, a, -1, lambda e, a=a: e is not None and e[1] == a))
            if split_on == "edge":
                for s in range(S):
                    if delta[s][a] == t:
                        cands.append((t, a, s, lambda e, a=a, s=s: e == (s, a)))

    best = None
    for t, a, src, pick in cands:
        visits = entries.get(t, [])
        parent = Counter(x for _, x in visits)
        child = Counter(x for e, x in visits if pick(e))
        rest = Counter(x for e, x in visits if not pick(e))
        na, nr = sum(child.values()), sum(rest.values())
        if na == 0 or nr == 0 or na < min_support or nr < min_support:
            continue
        h = (na * entropy(child) + nr * entropy(rest)) / (na + nr)
        gain = entropy(parent) - h
        if gain <= EPS or gain < min_gain - EPS:
            continue
        if best is None or h < best[3] - EPS or (abs(h - best[3]) <= EPS and (t, a, src) < best[:3]):
            best = (t, a, src, h)
    return best


def count_table(delta, start, sequences):
    counts = Counter()
    for seq in sequences:
        for s, x in zip(walk(delta, start, seq), seq):
            counts[s, x] += 1
    return counts


def argmax_accuracy(predict, sequences):
    """``predict(history) -> symbol``; accuracy over every position."""
    right = total = 0
    for seq in sequences:
        for i, x in enumerate(seq):
            right += predict(seq[:i]) == x
            total += 1
    return right / total


def unigram_predictor(train):
    c = Counter(x for s in train for x in s)
    best = min(c, key=lambda x: (-c[x], x))
    return lambda hist: best


def markov1_predictor(train, num_symbols):
    table = defaultdict(Counter)
    for seq in train:
        prev = None
        for x in seq:
            table[prev][x] += 1
            prev = x

    def predict(hist):
        c = table[hist[-1] if hist else None]
        if not c:
            return 0
        return min(c, key=lambda x: (-c[x], x))

    return predict


def automaton_predictor(delta, start, counts):
    """Argmax of the emission counts at the state reached by ``hist``."""
    A = len(delta[0])

    def predict(hist):
        s = start
        for x in hist:
            s = delta[s][x]
        row = [counts.get((s, x), 0) for x in range(A)]
        return max(range(A), key=lambda x: (row[x], -x))

    return predict
