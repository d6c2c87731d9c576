"""Rule-based dialog-act and strategy annotation.

Acts come from a first-match cascade over lexical and price cues.  Strategy
labels that need a trained classifier are taken from the corpus's gold
annotations; the rest are detected with the lexicons in the rules file.
"""

from __future__ import annotations

import logging
import re
from dataclasses import dataclass, field
from functools import lru_cache
from importlib import resources
from typing import Iterable, Optional, Sequence

from .corpus import ROLES, Dialog, Scenario, Turn
from .fst import Alphabet

log = logging.getLogger(__name__)

ACTS = ("intro", "init-price", "insist", "agree", "disagree", "inform", "inquire")

# (label, detector kind), in table row order
NEGOTIATION_STRATEGIES = (
    ("describe_product", "gold"),
    ("rephrase_product", "gold"),
    ("embellish_product", "gold"),
    ("address_concerns", "gold"),
    ("communicate_interests", "gold"),
    ("propose_price", "rule"),
    ("do_not_propose_first", "rule"),
    ("negotiate_side_offers", "rule"),
    ("hedge", "rule"),
    ("communicate_politely", "rule"),
    ("build_rapport", "rule"),
    ("talk_informally", "rule"),
    ("show_dominance", "rule"),
    ("negative_sentiment", "rule"),
    ("certainty_words", "rule"),
)

PERSUASION_STRATEGIES = tuple((label, "gold") for label in (
    "use_reasoning",
    "elicit_specific_emotions",
    "cite_organizational_impacts",
    "start_with_small_donation",
    "make_donation_myself",
    "tell_personal_donation_story",
    "give_information_of_donation",
    "ask_about_the_charity",
    "ask_opinion_of_donation",
    "ask_personal_experience",
))

# strategy names used by the Persuasion-for-Good release
PERSUASION_ALIASES = {
    "logical_appeal": "use_reasoning",
    "emotion_appeal": "elicit_specific_emotions",
    "credibility_appeal": "cite_organizational_impacts",
    "foot_in_the_door": "start_with_small_donation",
    "self_modeling": "make_donation_myself",
    "personal_story": "tell_personal_donation_story",
    "donation_information": "give_information_of_donation",
    "source_related_inquiry": "ask_about_the_charity",
    "task_related_inquiry": "ask_opinion_of_donation",
    "personal_related_inquiry": "ask_personal_experience",
}

NONE = "none"
EOT = "eot"
GOLD_POLICIES = ("prefer_gold", "rules_only")


def strategy_inventory(schema: str) -> tuple[str, ...]:
    table = NEGOTIATION_STRATEGIES if schema == "negotiation" else PERSUASION_STRATEGIES
    return tuple(label for label, _ in table)


def detector_kind(schema: str) -> dict[str, str]:
    table = NEGOTIATION_STRATEGIES if schema == "negotiation" else PERSUASION_STRATEGIES
    return dict(table)


def act_alphabet(schema: str = "negotiation") -> Alphabet:
    return Alphabet(f"{role}:{act}" for role in ROLES[schema] for act in ACTS)


def strategy_alphabet(schema: str = "negotiation") -> Alphabet:
    labels = strategy_inventory(schema) + (NONE, EOT)
    return Alphabet(f"{role}:{s}" for role in ROLES[schema] for s in labels)


def normalize_label(label: str) -> str:
    key = re.sub(r"[\s\-]+", "_", label.strip().lower())
    return PERSUASION_ALIASES.get(key, key)


# -- rules file --------------------------------------------------------------

class RulesError(ValueError):
    pass


RULES_VERSION = 1


@dataclass(frozen=True)
class Rules:
    """Compiled lexicon patterns keyed by label (``act:x`` / ``strategy:y``)."""

    patterns: dict
    version: int = RULES_VERSION
    source: str = "<builtin>"

    def matches(self, label: str, text: str) -> bool:
        return any(p.search(text) for p in self.patterns.get(label, ()))

    def labels(self) -> list[str]:
        return list(self.patterns)


def _compile(kind: str, pattern: str) -> re.Pattern:
    if kind == "regex":
        return re.compile(pattern, re.IGNORECASE)
    if kind == "word":
        words = [re.escape(w) for w in pattern.split()]
        return re.compile(r"(?<!\w)" + r"\s+".join(words) + r"(?!\w)", re.IGNORECASE)
    if kind == "literal":
        return re.compile(re.escape(pattern), re.IGNORECASE)
    raise RulesError(f"unknown pattern kind {kind!r}")


def parse_rules(text: str, source: str = "<string>") -> Rules:
    patterns: dict[str, list] = {}
    version = None
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.rstrip("\n")
        if not line.strip() or line.lstrip().startswith("#"):
            continue
        fields = line.split("\t")
        if fields[0] == "@version":
            if len(fields) != 2 or not fields[1].strip().isdigit():
                raise RulesError(f"{source}:{lineno}: bad version line")
            version = int(fields[1])
            if version != RULES_VERSION:
                raise RulesError(f"{source}: unsupported rules version {version}")
            continue
        if len(fields) != 3:
            raise RulesError(f"{source}:{lineno}: expected 'label<TAB>kind<TAB>pattern'")
        label, kind, pattern = fields
        if not label.startswith(("act:", "strategy:")):
            raise RulesError(f"{source}:{lineno}: label must start with act: or strategy:")
        try:
            patterns.setdefault(label, []).append(_compile(kind, pattern))
        except re.error as exc:
            raise RulesError(f"{source}:{lineno}: bad pattern: {exc}") from None
        except RulesError as exc:
            raise RulesError(f"{source}:{lineno}: {exc}") from None
    if version is None:
        raise RulesError(f"{source}: missing @version line")
    return Rules({k: tuple(v) for k, v in patterns.items()}, version, source)


def load_rules(path) -> Rules:
    with open(path, encoding="utf-8") as f:
        return parse_rules(f.read(), str(path))


@lru_cache(maxsize=1)
def default_rules() -> Rules:
    text = resources.files("dialogfst").joinpath("rules/negotiation.rules").read_text("utf-8")
    return parse_rules(text, "negotiation.rules")


# -- prices ------------------------------------------------------------------

_NUM = re.compile(
    r"(?<![\w.])(?P<cur>\$\s?)?"
    r"(?P<num>\d{1,3}(?:,\d{3})+|\d+)(?P<dec>\.\d+)?"
    r"(?P<k>[kK](?![a-zA-Z]))?"
    r"(?:\s*(?P<unit>[A-Za-z%]+))?"
)
_OFFER = re.compile(r"<offer\s+\$?(\d+(?:\.\d+)?)\s*>", re.IGNORECASE)
_PRICE_UNITS = {"dollar", "dollars", "bucks", "buck", "usd"}
_OTHER_UNITS = {
    "mile", "miles", "mi", "km", "kms", "mph", "year", "years", "yr", "yrs", "month", "months",
    "week", "weeks", "day", "days", "hour", "hours", "hr", "hrs", "min", "mins", "minutes",
    "am", "pm", "inch", "inches", "in", "ft", "feet", "foot", "lb", "lbs", "pounds", "kg",
    "gb", "tb", "mb", "mm", "cm", "m", "percent", "%", "people", "times", "pieces", "pcs",
    "st", "nd", "rd", "th", "x", "bedroom", "bedrooms", "br", "bed", "beds", "bath", "baths",
}


def extract_prices(text: str, scenario: Optional[Scenario] = None) -> list[float]:
    """Price mentions in ``text``, in order of appearance.

    Numbers tagged with ``$``, a currency word or a ``k`` suffix always
    count.  A bare number counts unless a non-price unit follows it; when
    the scenario has a listing price, bare numbers must also lie within
    [0.25, 2] times that price.
    """
    offers = [float(m.group(1)) for m in _OFFER.finditer(text)]
    if offers:
        return offers
    listing = scenario.listing_price if scenario is not None else 0.0
    out = []
    for m in _NUM.finditer(text):
        try:
            value = float(m.group("num").replace(",", "") + (m.group("dec") or ""))
        except ValueError:
            continue
        unit = (m.group("unit") or "").lower()
        marked = bool(m.group("cur")) or unit in _PRICE_UNITS
        if m.group("k"):
            value *= 1000
            marked = marked or unit not in _OTHER_UNITS
        if unit in _OTHER_UNITS:
            continue
        if not marked and listing > 0 and not (0.25 * listing <= value <= 2 * listing):
            continue
        out.append(value)
    return out


# -- annotation --------------------------------------------------------------

@dataclass(frozen=True)
class AnnotatedTurn:
    turn: Turn
    act: str
    strategies: frozenset
    prices_mentioned: tuple = ()
    flags: tuple = ()

    @property
    def role(self) -> str:
        return self.turn.role


@dataclass(frozen=True)
class AnnotatedDialog:
    dialog: Dialog
    turns: tuple
    schema: str = "negotiation"

    @property
    def dialog_id(self) -> str:
        return self.dialog.dialog_id


def _speaker_last_price(context: Sequence[AnnotatedTurn], role: str) -> Optional[float]:
    for prev in reversed(context):
        if prev.role == role and prev.prices_mentioned:
            return prev.prices_mentioned[-1]
    return None


def classify_dialog_act(
    turn: Turn,
    context: Sequence[AnnotatedTurn] = (),
    scenario: Optional[Scenario] = None,
    rules: Optional[Rules] = None,
    prices: Optional[Sequence[float]] = None,
) -> str:
    rules = rules or default_rules()
    text = turn.text
    if prices is None:
        prices = extract_prices(text, scenario)
    if rules.matches("act:intro", text) and not prices:
        return "intro"
    if prices and not any(p.prices_mentioned for p in context):
        return "init-price"
    own = _speaker_last_price(context, turn.role)
    if own is not None and any(abs(p - own) < 1e-9 for p in prices):
        return "insist"
    for act in ("agree", "disagree", "inquire"):
        if rules.matches(f"act:{act}", text):
            return act
    return "inform"


def _first_price_turn(context: Sequence[AnnotatedTurn]) -> Optional[int]:
    for i, prev in enumerate(context):
        if prev.prices_mentioned:
            return i
    return None


def detect_strategies(
    turn: Turn,
    context: Sequence[AnnotatedTurn] = (),
    scenario: Optional[Scenario] = None,
    gold_policy: str = "prefer_gold",
    rules: Optional[Rules] = None,
    schema: str = "negotiation",
    flags: Optional[list] = None,
    prices: Optional[Sequence[float]] = None,
) -> frozenset:
    """Strategy labels for ``turn``.

    Problems (missing gold labels, unknown gold labels) are appended to
    ``flags`` when given.
    """
    if gold_policy not in GOLD_POLICIES:
        raise ValueError(f"gold_policy must be one of {GOLD_POLICIES}")
    rules = rules or default_rules()
    kinds = detector_kind(schema)
    found = set()
    notes = flags if flags is not None else []

    if gold_policy == "prefer_gold":
        if turn.gold_strategies is None:
            notes.append("missing_gold_strategies")
            log.debug("turn without gold strategies; classifier labels omitted")
        else:
            for raw in turn.gold_strategies:
                label = normalize_label(raw)
                if kinds.get(label) == "gold":
                    found.add(label)
                elif label not in kinds:
                    notes.append(f"unknown_gold_label:{raw}")
    else:
        notes.append("classifier_labels_omitted")

    if schema == "negotiation":
        text = turn.text
        if prices is None:
            prices = extract_prices(text, scenario)
        first = _first_price_turn(context)
        if prices and first is not None:
            found.add("propose_price")
        buyer, seller = ROLES["negotiation"]
        if (
            turn.role == seller
            and first is not None
            and context[first].role == buyer
            and not any(p.role == seller for p in context[first + 1:])
        ):
            found.add("do_not_propose_first")
        for label, kind in NEGOTIATION_STRATEGIES:
            if kind == "rule" and rules.matches(f"strategy:{label}", text):
                found.add(label)
    return frozenset(found)


def annotate_turn(turn, context, scenario, gold_policy="prefer_gold", rules=None, schema="negotiation"):
    rules = rules or default_rules()
    prices = tuple(extract_prices(turn.text, scenario))
    flags: list = []
    act = classify_dialog_act(turn, context, scenario, rules, prices)
    strategies = detect_strategies(turn, context, scenario, gold_policy, rules, schema, flags, prices)
    return AnnotatedTurn(turn, act, strategies, prices, tuple(flags))


def annotate_dialog(dialog: Dialog, schema="negotiation", gold_policy="prefer_gold", rules=None) -> AnnotatedDialog:
    context: list[AnnotatedTurn] = []
    for turn in dialog.turns:
        context.append(annotate_turn(turn, context, dialog.scenario, gold_policy, rules, schema))
    return AnnotatedDialog(dialog, tuple(context), schema)


def annotate_corpus(dialogs: Iterable[Dialog], schema="negotiation", gold_policy="prefer_gold", rules=None):
    return [annotate_dialog(d, schema, gold_policy, rules) for d in dialogs]


def from_gold(dialog: Dialog, schema: str = "negotiation") -> AnnotatedDialog:
    """Wrap a dialog whose turns already carry one act and a strategy list."""
    kinds = detector_kind(schema)
    turns = []
    for i, t in enumerate(dialog.turns):
        if not t.gold_acts or len(t.gold_acts) != 1 or t.gold_acts[0] not in ACTS:
            raise ValueError(f"dialog {dialog.dialog_id!r} turn {i}: expected exactly one known act")
        labels = frozenset(normalize_label(s) for s in (t.gold_strategies or ()))
        unknown = labels - kinds.keys()
        if unknown:
            raise ValueError(f"dialog {dialog.dialog_id!r} turn {i}: unknown strategies {sorted(unknown)}")
        turns.append(AnnotatedTurn(t, t.gold_acts[0], labels, tuple(extract_prices(t.text, dialog.scenario))))
    return AnnotatedDialog(dialog, tuple(turns), schema)


def to_dialog(ad: AnnotatedDialog) -> Dialog:
    """Annotated dialog with ``acts``/``strategies`` filled in, ready to write."""
    order = strategy_inventory(ad.schema)
    turns = tuple(
        Turn(
            role=a.turn.role,
            text=a.turn.text,
            gold_acts=(a.act,),
            gold_strategies=tuple(s for s in order if s in a.strategies),
        )
        for a in ad.turns
    )
    return Dialog(ad.dialog.dialog_id, ad.dialog.scenario, turns)


# -- symbol sequences --------------------------------------------------------

def act_sequence(ad: AnnotatedDialog) -> list[str]:
    return [f"{t.role}:{t.act}" for t in ad.turns]


def turn_strategy_symbols(role: str, strategies, schema: str = "negotiation") -> list[str]:
    active = [s for s in strategy_inventory(schema) if s in strategies]
    return [f"{role}:{s}" for s in (active or [NONE])] + [f"{role}:{EOT}"]


def strategy_sequence(ad: AnnotatedDialog) -> list[str]:
    out = []
    for t in ad.turns:
        out.extend(turn_strategy_symbols(t.role, t.strategies, ad.schema))
    return out


def parse_strategy_sequence(symbols: Iterable[str]) -> list[tuple[str, frozenset]]:
    """Inverse of :func:`strategy_sequence`: ``(role, strategy set)`` per turn."""
    turns = []
    current: set = set()
    for sym in symbols:
        role, _, label = sym.partition(":")
        if label == EOT:
            turns.append((role, frozenset(current)))
            current = set()
        elif label != NONE:
            current.add(label)
    if current:
        raise ValueError("strategy sequence does not end with an end-of-turn marker")
    return turns


def label_counts(annotated: Iterable[AnnotatedDialog]) -> dict:
    acts: dict = {}
    strategies: dict = {}
    for ad in annotated:
        for t in ad.turns:
            acts[t.act] = acts.get(t.act, 0) + 1
            for s in t.strategies:
                strategies[s] = strategies.get(s, 0) + 1
    return {"acts": acts, "strategies": strategies}
