"""Command-line interface: ``dialogfst <command> [options]``.

Commands: annotate, split, train, eval, step, export-dot, stats.

Options can also come from a JSON config file (``--config``); flags given
on the command line win.  Recognised config keys::

    schema, rules, gold_policy, seed, out, top_k,
    split: {train_fraction, val_fraction, test_fraction},
    train: {k, lambda, min_support, min_gain, split_on},
    train_da / train_strategy: per-stream overrides of "train",
    eval: {set_rule, k, tau, bigram_exact}
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from dataclasses import asdict

from . import annotator as ann
from . import corpus, evaluation, inference
from .fst import TrainConfig, train_fst

log = logging.getLogger("dialogfst")

DEFAULTS = {
    "schema": "negotiation",
    "gold_policy": "prefer_gold",
    "seed": 0,
    "top_k": 3,
    "split": {"train_fraction": 0.8, "val_fraction": 0.1, "test_fraction": 0.1},
    "train": {"k": 8, "lambda": 0.1, "min_support": 5, "min_gain": 0.01, "split_on": "edge"},
    "eval": {"set_rule": "top_k", "k": None, "tau": 0.5, "bigram_exact": False},
}


class CliError(Exception):
    pass


def _merge(base: dict, extra: dict) -> dict:
    out = dict(base)
    for k, v in extra.items():
        out[k] = _merge(out[k], v) if isinstance(v, dict) and isinstance(out.get(k), dict) else v
    return out


def load_config(args) -> dict:
    cfg = DEFAULTS
    if args.config:
        try:
            with open(args.config, encoding="utf-8") as f:
                cfg = _merge(cfg, json.load(f))
        except OSError as exc:
            raise CliError(f"cannot read config {args.config}: {exc.strerror}") from None
        except json.JSONDecodeError as exc:
            raise CliError(f"bad config {args.config}: {exc}") from None
    flags = {
        "schema": args.schema,
        "rules": args.rules,
        "seed": args.seed,
        "out": args.out,
    }
    cfg = _merge(cfg, {k: v for k, v in flags.items() if v is not None})
    train = {"k": args.k, "lambda": args.smoothing, "min_support": args.min_support, "min_gain": args.min_gain}
    cfg = _merge(cfg, {"train": {k: v for k, v in train.items() if v is not None}})
    if cfg["schema"] not in corpus.ROLES:
        raise CliError(f"unknown schema {cfg['schema']!r}")
    return cfg


def _rules(cfg):
    path = cfg.get("rules")
    if not path:
        return ann.default_rules()
    if not os.path.exists(path):
        raise CliError(f"rules file not found: {path}")
    return ann.load_rules(path)


def _read(path, schema):
    if not os.path.exists(path):
        raise CliError(f"file not found: {path}")
    return corpus.read_corpus(path, schema)


def _read_annotated(path, schema):
    try:
        return [ann.from_gold(d, schema) for d in _read(path, schema)]
    except ValueError as exc:
        raise CliError(f"{path}: {exc} (run 'annotate' first?)") from None


def _out_path(cfg, name):
    out = cfg.get("out") or "."
    os.makedirs(out, exist_ok=True)
    return os.path.join(out, name)


def train_config(cfg, which) -> TrainConfig:
    t = _merge(cfg["train"], cfg.get(f"train_{which}", {}))
    if int(t["k"]) < 1:
        raise CliError("--k must be >= 1")
    return TrainConfig(
        target_states=int(t["k"]),
        min_child_support=int(t["min_support"]),
        min_entropy_gain=float(t["min_gain"]),
        smoothing_lambda=float(t["lambda"]),
        split_on=t.get("split_on", "edge"),
    )


# -- commands ----------------------------------------------------------------

def cmd_annotate(args, cfg):
    rules = _rules(cfg)
    dialogs = _read(args.input, cfg["schema"])
    policy = args.gold_policy or cfg["gold_policy"]
    annotated = ann.annotate_corpus(dialogs, cfg["schema"], policy, rules)
    data = corpus.dumps_corpus(ann.to_dialog(a) for a in annotated)
    counts = ann.label_counts(annotated)
    flagged = sum(1 for a in annotated for t in a.turns if t.flags)
    summary = [f"dialogs: {len(annotated)}", "acts:"]
    summary += [f"  {k}: {counts['acts'].get(k, 0)}" for k in ann.ACTS]
    summary.append("strategies:")
    summary += [f"  {k}: {counts['strategies'].get(k, 0)}" for k in ann.strategy_inventory(cfg["schema"])]
    summary.append(f"turns with flags: {flagged}")
    if args.output == "-" or (args.output is None and not cfg.get("out")):
        sys.stdout.buffer.write(data)
        print("\n".join(summary), file=sys.stderr)
    else:
        path = args.output or _out_path(cfg, "annotated.jsonl")
        with open(path, "wb") as f:
            f.write(data)
        print("\n".join(summary))
        print(f"wrote {path}")
    return 0


def cmd_split(args, cfg):
    dialogs = _read(args.input, cfg["schema"])
    s = cfg["split"]
    spec = corpus.SplitSpec(s["train_fraction"], s["val_fraction"], s["test_fraction"], int(cfg["seed"]))
    parts = corpus.split_corpus(dialogs, spec)
    for name, part in zip(("train", "val", "test"), parts):
        path = _out_path(cfg, f"{name}.jsonl")
        corpus.write_corpus(part, path)
        print(f"{name}: {len(part)} dialogs -> {path}")
    return 0


def cmd_train(args, cfg):
    schema = cfg["schema"]
    annotated = _read_annotated(args.input, schema)
    if not annotated:
        raise CliError(f"{args.input}: empty corpus")
    config = train_config(cfg, args.which)
    if args.which == "da":
        alphabet = ann.act_alphabet(schema)
        seqs = [ann.act_sequence(a) for a in annotated]
    else:
        alphabet = ann.strategy_alphabet(schema)
        seqs = [ann.strategy_sequence(a) for a in annotated]
    history: list = []
    fst = train_fst([alphabet.encode(s) for s in seqs], alphabet, config, history)
    path = args.output or _out_path(cfg, f"fst-{args.which}.json")
    inference.save(fst, path)
    log_path = os.path.splitext(path)[0] + ".trainlog.json"
    record = {
        "seed": int(cfg["seed"]),
        "stream": args.which,
        "schema": schema,
        "config": asdict(config),
        "num_sequences": len(seqs),
        "num_tokens": sum(len(s) for s in seqs),
        "splits": [asdict(h) for h in history],
        "final_states": fst.num_states,
    }
    with open(log_path, "w", encoding="utf-8") as f:
        json.dump(record, f, sort_keys=True, indent=2)
        f.write("\n")
    print(f"trained {fst.num_states}-state model -> {path}")
    for h in history:
        src = "" if h.source_state is None else f" from {h.source_state}"
        print(f"  split {h.state} on {h.symbol}{src}: gain {h.gain:.4f} bits -> {h.num_states} states")
    return 0


def _check_alphabet(model, expected, path):
    if model.alphabet != expected:
        raise CliError(
            f"{path}: model alphabet does not match the {len(expected)}-symbol corpus alphabet\n"
            f"model:  {list(model.alphabet.symbols)}\ncorpus: {list(expected.symbols)}"
        )


def cmd_eval(args, cfg):
    schema = cfg["schema"]
    if not (args.da_model or args.strategy_model):
        raise CliError("give --da-model and/or --strategy-model")
    train = _read_annotated(args.train, schema)
    test = _read_annotated(args.test, schema)
    da = st = None
    if args.da_model:
        da = inference.load(args.da_model)
        _check_alphabet(da, ann.act_alphabet(schema), args.da_model)
    if args.strategy_model:
        st = inference.load(args.strategy_model)
        _check_alphabet(st, ann.strategy_alphabet(schema), args.strategy_model)
    e = cfg["eval"]
    if e["set_rule"] == "threshold":
        rule = evaluation.SetRule("threshold", tau=float(e["tau"]))
    elif e.get("k") is not None:
        rule = evaluation.SetRule("top_k", k=int(e["k"]))
    else:
        rule = evaluation.default_set_rule(train)
    report = evaluation.compare_report(da, st, train, test, rule)
    if e.get("bigram_exact") and st is not None:
        report.model.bigram_accuracy = evaluation.bigram_accuracy(st, train, test, rule, exact=True)
    text = report.to_text()
    with open(_out_path(cfg, "report.json"), "w", encoding="utf-8") as f:
        f.write(report.to_json())
    with open(_out_path(cfg, "report.txt"), "w", encoding="utf-8") as f:
        f.write(text)
    sys.stdout.write(text)
    return 0


def _show(fst, state, k, out):
    top = inference.predict_next(fst, state).top_k(k)
    out.write(f"state {state}: " + ", ".join(f"{s} {p:.3f}" for s, p in top) + "\n")
    out.flush()


def cmd_step(args, cfg, stdin=None, stdout=None):
    stdin = stdin or sys.stdin
    stdout = stdout or sys.stdout
    fst = _load_model(args.model)
    k = args.top_k or cfg["top_k"]
    state = fst.start_state
    _show(fst, state, k, stdout)
    for line in stdin:
        sym = line.strip()
        if not sym:
            continue
        if sym == "reset":
            state = fst.start_state
        elif sym in fst.alphabet:
            state = inference.step(fst, state, sym)
        else:
            print(f"unknown symbol {sym!r}; alphabet: {' '.join(fst.alphabet.symbols)}", file=sys.stderr)
            continue
        _show(fst, state, k, stdout)
    return 0


def _load_model(path):
    if not os.path.exists(path):
        raise CliError(f"model not found: {path}")
    return inference.load(path)


def cmd_export_dot(args, cfg):
    fst = _load_model(args.model)
    sys.stdout.write(inference.export_dot(fst, args.top_k or cfg["top_k"], args.threshold))
    return 0


def cmd_stats(args, cfg):
    st = corpus.corpus_stats(_read(args.input, cfg["schema"]))
    print(f"num_dialogs: {st.num_dialogs}")
    print(f"mean_turns: {st.mean_turns:.2f}")
    print(f"vocab_size: {st.vocab_size}")
    return 0


# -- parser ------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON config file")
    common.add_argument("--seed", type=int)
    common.add_argument("--out", help="output directory")
    common.add_argument("--rules", help="rules file")
    common.add_argument("--schema", choices=sorted(corpus.ROLES))
    common.add_argument("--k", type=int, help="target number of states")
    common.add_argument("--lambda", dest="smoothing", type=float, help="additive smoothing")
    common.add_argument("--min-support", type=int)
    common.add_argument("--min-gain", type=float)
    common.add_argument("-v", "--verbose", action="store_true")

    p = argparse.ArgumentParser(prog="dialogfst", description=__doc__.split("\n")[0])
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("annotate", parents=[common], help="tag dialog acts and strategies")
    s.add_argument("input")
    s.add_argument("-o", "--output", help="output file ('-' for stdout)")
    s.add_argument("--gold-policy", choices=ann.GOLD_POLICIES)
    s.set_defaults(func=cmd_annotate)

    s = sub.add_parser("split", parents=[common], help="seeded train/val/test split")
    s.add_argument("input")
    s.set_defaults(func=cmd_split)

    s = sub.add_parser("train", parents=[common], help="learn an automaton")
    s.add_argument("input", help="annotated corpus")
    s.add_argument("--which", choices=("da", "strategy"), default="da")
    s.add_argument("-o", "--output", help="model file")
    s.set_defaults(func=cmd_train)

    s = sub.add_parser("eval", parents=[common], help="score models and baselines")
    s.add_argument("--da-model")
    s.add_argument("--strategy-model")
    s.add_argument("--train", required=True)
    s.add_argument("--test", required=True)
    s.set_defaults(func=cmd_eval)

    s = sub.add_parser("step", parents=[common], help="walk a model one symbol per line")
    s.add_argument("model")
    s.add_argument("--top-k", type=int)
    s.set_defaults(func=cmd_step)

    s = sub.add_parser("export-dot", parents=[common], help="print a Graphviz digraph")
    s.add_argument("model")
    s.add_argument("--top-k", type=int)
    s.add_argument("--threshold", type=float, default=0.05)
    s.set_defaults(func=cmd_export_dot)

    s = sub.add_parser("stats", parents=[common], help="corpus statistics")
    s.add_argument("input")
    s.set_defaults(func=cmd_stats)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    try:
        cfg = load_config(args)
        return args.func(args, cfg)
    except (CliError, corpus.CorpusError, ann.RulesError, inference.FstFormatError,
            evaluation.AlphabetMismatch) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
