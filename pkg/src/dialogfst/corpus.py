"""Dialog corpora: data model, JSON-Lines I/O, splits and statistics."""

from __future__ import annotations

import io
import json
import logging
import math
import random
from dataclasses import dataclass, field
from typing import IO, Iterable, Optional, Union

log = logging.getLogger(__name__)

ROLES = {
    "negotiation": ("buyer", "seller"),
    "persuasion": ("persuader", "persuadee"),
}


class CorpusError(ValueError):
    pass


@dataclass(frozen=True)
class Scenario:
    title: str = ""
    description: str = ""
    listing_price: float = 0.0
    buyer_target_price: Optional[float] = None

    def __post_init__(self):
        if self.listing_price < 0:
            raise CorpusError("listing_price must be non-negative")
        t = self.buyer_target_price
        if t is not None:
            if t < 0:
                raise CorpusError("buyer_target_price must be non-negative")
            if t > self.listing_price:
                raise CorpusError("buyer_target_price exceeds listing_price")
            if t == self.listing_price and self.listing_price > 0:
                log.warning("buyer_target_price equals listing_price (%s)", t)


@dataclass(frozen=True)
class Turn:
    role: str
    text: str
    gold_acts: Optional[tuple[str, ...]] = None
    gold_strategies: Optional[tuple[str, ...]] = None

    def __post_init__(self):
        for name in ("gold_acts", "gold_strategies"):
            v = getattr(self, name)
            if v is None:
                continue
            v = tuple(v)
            if len(set(v)) != len(v):
                raise CorpusError(f"duplicate labels in {name}: {list(v)}")
            object.__setattr__(self, name, v)


@dataclass(frozen=True)
class Dialog:
    dialog_id: str
    scenario: Scenario
    turns: tuple[Turn, ...]

    def __post_init__(self):
        object.__setattr__(self, "turns", tuple(self.turns))
        if not self.turns:
            raise CorpusError(f"dialog {self.dialog_id!r} has no turns")


@dataclass(frozen=True)
class SplitSpec:
    train_fraction: float = 0.8
    val_fraction: float = 0.1
    test_fraction: float = 0.1
    seed: int = 0

    def __post_init__(self):
        fr = (self.train_fraction, self.val_fraction, self.test_fraction)
        if any(not 0 <= f <= 1 for f in fr):
            raise ValueError(f"fractions must lie in [0, 1]: {fr}")
        if abs(sum(fr) - 1.0) > 1e-9:
            raise ValueError(f"fractions must sum to 1, got {sum(fr)!r}")


@dataclass(frozen=True)
class CorpusStats:
    num_dialogs: int
    mean_turns: float
    vocab_size: int


# -- reading / writing -------------------------------------------------------

def _opt_labels(value, what, lineno):
    if value is None:
        return None
    if not isinstance(value, list) or not all(isinstance(v, str) for v in value):
        raise CorpusError(f"line {lineno}: {what} must be a list of strings or null")
    return tuple(value)


def _parse_dialog(obj, roles, lineno) -> Dialog:
    if not isinstance(obj, dict):
        raise CorpusError(f"line {lineno}: expected a JSON object")
    try:
        did = obj["dialog_id"]
        sc = obj.get("scenario") or {}
        turns_raw = obj["turns"]
    except KeyError as exc:
        raise CorpusError(f"line {lineno}: missing field {exc}") from None
    if not isinstance(did, str):
        raise CorpusError(f"line {lineno}: dialog_id must be a string")
    try:
        target = sc.get("buyer_target_price")
        scenario = Scenario(
            title=str(sc.get("title", "")),
            description=str(sc.get("description", "")),
            listing_price=float(sc.get("listing_price") or 0.0),
            buyer_target_price=None if target is None else float(target),
        )
    except (TypeError, ValueError, AttributeError) as exc:
        raise CorpusError(f"line {lineno}: bad scenario in dialog {did!r}: {exc}") from None
    turns = []
    if not isinstance(turns_raw, list):
        raise CorpusError(f"line {lineno}: turns must be a list")
    for t in turns_raw:
        if not isinstance(t, dict) or "role" not in t or "text" not in t:
            raise CorpusError(f"line {lineno}: each turn needs role and text")
        if t["role"] not in roles:
            raise CorpusError(
                f"dialog {did!r}: unknown role {t['role']!r} (expected one of {list(roles)})"
            )
        turns.append(Turn(
            role=t["role"],
            text=str(t["text"]),
            gold_acts=_opt_labels(t.get("acts"), "acts", lineno),
            gold_strategies=_opt_labels(t.get("strategies"), "strategies", lineno),
        ))
    try:
        return Dialog(did, scenario, tuple(turns))
    except CorpusError as exc:
        raise CorpusError(f"line {lineno}: {exc}") from None


def load_corpus(source: Union[IO, bytes, str], schema: str = "negotiation") -> list[Dialog]:
    """Parse a JSON-Lines corpus; ``source`` is a stream or raw bytes/text.

    Blank lines are skipped.
    """
    if schema not in ROLES:
        raise ValueError(f"unknown schema {schema!r}")
    roles = ROLES[schema]
    if isinstance(source, bytes):
        source = io.BytesIO(source)
    elif isinstance(source, str):
        source = io.StringIO(source)
    dialogs = []
    seen = set()
    for lineno, line in enumerate(source, 1):
        if isinstance(line, bytes):
            line = line.decode("utf-8")
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            raise CorpusError(f"line {lineno}: malformed JSON ({exc.msg})") from None
        d = _parse_dialog(obj, roles, lineno)
        if d.dialog_id in seen:
            raise CorpusError(f"line {lineno}: duplicate dialog_id {d.dialog_id!r}")
        seen.add(d.dialog_id)
        dialogs.append(d)
    return dialogs


def read_corpus(path, schema: str = "negotiation") -> list[Dialog]:
    with open(path, "rb") as f:
        return load_corpus(f, schema)


def dialog_to_dict(d: Dialog) -> dict:
    sc = d.scenario
    return {
        "dialog_id": d.dialog_id,
        "scenario": {
            "title": sc.title,
            "description": sc.description,
            "listing_price": sc.listing_price,
            "buyer_target_price": sc.buyer_target_price,
        },
        "turns": [
            {
                "role": t.role,
                "text": t.text,
                "acts": None if t.gold_acts is None else list(t.gold_acts),
                "strategies": None if t.gold_strategies is None else list(t.gold_strategies),
            }
            for t in d.turns
        ],
    }


def dumps_corpus(dialogs: Iterable[Dialog]) -> bytes:
    lines = [
        json.dumps(dialog_to_dict(d), sort_keys=True, ensure_ascii=False) + "\n"
        for d in dialogs
    ]
    return "".join(lines).encode("utf-8")


def write_corpus(dialogs: Iterable[Dialog], sink: Union[IO[bytes], str]) -> None:
    data = dumps_corpus(dialogs)
    if isinstance(sink, (str, bytes)) or hasattr(sink, "__fspath__"):
        with open(sink, "wb") as f:
            f.write(data)
    else:
        sink.write(data)


# -- splits and stats --------------------------------------------------------

def split_sizes(n: int, spec: SplitSpec) -> tuple[int, int, int]:
    # tolerate float noise such as 0.1 * 10 = 1.0000000000000002
    val = math.floor(n * spec.val_fraction + 1e-9)
    test = math.floor(n * spec.test_fraction + 1e-9)
    return n - val - test, val, test


def split_corpus(dialogs: list[Dialog], spec: SplitSpec):
    """Seeded shuffle, then ``floor`` sizes for val/test; train gets the rest."""
    order = list(range(len(dialogs)))
    random.Random(spec.seed).shuffle(order)
    n_train, n_val, n_test = split_sizes(len(dialogs), spec)
    pick = [dialogs[i] for i in order]
    return pick[:n_train], pick[n_train:n_train + n_val], pick[n_train + n_val:]


def corpus_stats(dialogs: Iterable[Dialog]) -> CorpusStats:
    dialogs = list(dialogs)
    if not dialogs:
        return CorpusStats(0, 0.0, 0)
    vocab = set()
    turns = 0
    for d in dialogs:
        turns += len(d.turns)
        for t in d.turns:
            vocab.update(t.text.lower().split())
    return CorpusStats(len(dialogs), turns / len(dialogs), len(vocab))
