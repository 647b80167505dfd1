"""Config-driven command line entry point.

Exit codes: 0 success, 1 usage or configuration error, 2 runtime failure.
Errors print one machine-parseable line to stderr: `error: <kind>: <detail>`.
All outputs land under the given --out path; nothing else is written.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys

from . import dutycycle as dc
from . import textprep
from .embed import EmbeddingStore, hash_embed, save_embeddings, tfidf_embed, tfidf_fit
from .experiment import (
    ConfigError,
    ExperimentConfig,
    emit_sample_texts,
    run_experiment,
)
from .synth import cohort_spec_from_dict, generate_cohort, load_cohort, save_cohort


def _load_json(path, kind: str = "config") -> dict:
    if not os.path.exists(path):
        raise ConfigError(f"{kind} file not found: {path}")
    try:
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path} is not valid JSON: {exc}") from exc


def _cmd_synth(args) -> int:
    spec_obj = _load_json(args.spec, "spec") if args.spec else {}
    if args.seed is not None:
        spec_obj["rng_seed"] = args.seed
    if args.users is not None:
        spec_obj["num_users"] = args.users
    if args.days is not None:
        spec_obj["days"] = args.days
    try:
        spec = cohort_spec_from_dict(spec_obj)
    except (ValueError, TypeError) as exc:
        raise ConfigError(str(exc)) from exc
    save_cohort(generate_cohort(spec), args.out)
    return 0


def _prep_config(path: str | None) -> textprep.PrepConfig:
    if path is None:
        return textprep.default_config()
    obj = _load_json(path)
    abbrev = (textprep.load_table(obj["abbreviation_table"])
              if "abbreviation_table" in obj
              else textprep.default_config().abbreviation_table)
    emoji = (textprep.load_table(obj["emoji_table"])
             if "emoji_table" in obj
             else textprep.default_config().emoji_table)
    dictionary: frozenset[str] = frozenset()
    if obj.get("dictionary"):
        with open(obj["dictionary"], encoding="utf-8") as fh:
            dictionary = frozenset(w.strip() for w in fh if w.strip())
    autocorrect = bool(obj.get("autocorrect", False))
    if autocorrect and not dictionary:
        raise ConfigError("autocorrect requires a nonempty dictionary")
    return textprep.PrepConfig(
        abbreviation_table=abbrev, emoji_table=emoji,
        autocorrect_enabled=autocorrect, dictionary=dictionary,
        max_letter_run=int(obj.get("max_letter_run", 2)),
    )


def _cmd_prep(args) -> int:
    cfg = _prep_config(args.config)
    with open(args.infile, encoding="utf-8") as src, \
            open(args.out, "w", encoding="utf-8") as dst:
        for line in src:
            tokens = textprep.clean_text(line.rstrip("\n"), cfg)
            dst.write(" ".join(tokens) + "\n")
    return 0


def _cmd_embed(args) -> int:
    if args.mode == "samples":
        if not args.config or not args.cohort:
            raise ConfigError("embed --mode samples requires --config and --cohort")
        config = ExperimentConfig.from_dict(_load_json(args.config))
        cohort = load_cohort(args.cohort)
        with open(args.out, "w", encoding="utf-8") as fh:
            for sample_id, text in emit_sample_texts(config, cohort):
                fh.write(f"{sample_id}\t{text}\n")
        return 0

    if not args.infile:
        raise ConfigError("embed requires --in")
    with open(args.infile, encoding="utf-8") as fh:
        docs = [line.rstrip("\n").split() for line in fh]
    store = EmbeddingStore()
    if args.mode == "hash":
        for i, tokens in enumerate(docs):
            store.add(str(i), hash_embed(tokens, args.dim, args.seed))
        if store.dim is None:
            store.dim = args.dim
    else:
        if not docs:
            raise ConfigError("empty corpus")
        vocab = tfidf_fit(docs, vocab_size=args.vocab_size)
        for i, tokens in enumerate(docs):
            store.add(str(i), tfidf_embed(tokens, vocab))
        if store.dim is None:
            store.dim = vocab.size
    save_embeddings(store, args.out)
    return 0


def _cmd_dutycycle(args) -> int:
    timeline = dc.timeline_from_csv(args.timeline)
    detectors = dc.oracle_detectors(timeline, language=args.language)
    trace = dc.simulate(timeline, detectors, user_language=args.language)
    with open(args.out, "w", encoding="utf-8") as fh:
        fh.write(trace.to_json() + "\n")
    return 0


def _resolve_run_config(path: str):
    obj = _load_json(path)
    cohort_obj = obj.get("cohort", {"spec": {}})
    config = ExperimentConfig.from_dict(obj)
    cohort_path = cohort_obj.get("path")
    spec = None
    if cohort_path is None:
        try:
            spec = cohort_spec_from_dict(cohort_obj.get("spec", {}))
        except (ValueError, TypeError) as exc:
            raise ConfigError(str(exc)) from exc
    elif not os.path.exists(cohort_path):
        raise ConfigError(f"cohort file not found: {cohort_path}")
    return config, spec, cohort_path, obj


def _cmd_run(args) -> int:
    config, spec, cohort_path, raw = _resolve_run_config(args.config)
    out_dir = args.out or raw.get("output_dir")
    if not out_dir:
        raise ConfigError("no output directory: pass --out or set output_dir")
    os.makedirs(out_dir, exist_ok=True)

    manifest = {"config": config.to_dict(), "seeds": list(config.seeds)}
    if cohort_path is not None:
        with open(cohort_path, "rb") as fh:
            digest = hashlib.sha256(fh.read()).hexdigest()
        manifest["cohort"] = {"path": cohort_path, "sha256": digest}
    else:
        manifest["cohort"] = {"spec": json.loads(json.dumps(
            {**raw.get("cohort", {}).get("spec", {})}))}
    with open(os.path.join(out_dir, "manifest.json"), "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2)

    report = run_experiment(config, cohort_spec=spec, cohort_path=cohort_path)
    report.write(out_dir)
    return 0


def _cmd_validate(args) -> int:
    _resolve_run_config(args.config)
    print("ok")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="contextfed",
        description="Simulated federated mental-health monitoring pipeline",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic cohort JSONL file")
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int)
    p.add_argument("--users", type=int)
    p.add_argument("--days", type=int)
    p.add_argument("--spec", help="JSON file with cohort spec overrides")
    p.set_defaults(func=_cmd_synth)

    p = sub.add_parser("prep", help="clean raw text, one input line per output line")
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--config")
    p.set_defaults(func=_cmd_prep)

    p = sub.add_parser("embed", help="embed token lines, or emit sample texts")
    p.add_argument("--mode", choices=["hash", "tfidf", "samples"], required=True)
    p.add_argument("--in", dest="infile")
    p.add_argument("--out", required=True)
    p.add_argument("--dim", type=int, default=256)
    p.add_argument("--seed", type=int, default=7)
    p.add_argument("--vocab-size", type=int, default=5000)
    p.add_argument("--config", help="experiment config (samples mode)")
    p.add_argument("--cohort", help="cohort JSONL (samples mode)")
    p.set_defaults(func=_cmd_embed)

    p = sub.add_parser("dutycycle", help="simulate duty-cycled speech collection")
    p.add_argument("--timeline", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--language", default="en")
    p.set_defaults(func=_cmd_dutycycle)

    p = sub.add_parser("run", help="run a full experiment to a report directory")
    p.add_argument("--config", required=True)
    p.add_argument("--out")
    p.set_defaults(func=_cmd_run)

    p = sub.add_parser("validate-config", help="check an experiment config")
    p.add_argument("--config", required=True)
    p.set_defaults(func=_cmd_validate)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code == 0 else 1
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"error: config: {exc}", file=sys.stderr)
        return 1
    except (OSError, ValueError) as exc:
        print(f"error: runtime: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
