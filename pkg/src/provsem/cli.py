"""Command-line entry point: one binary, one subcommand per stage.

Exit codes: 0 success, 1 usage error, 2 data/config error, 3 failed
quality gate (gradient check or diverged training).
"""

import argparse
import json
import logging
import sys
from pathlib import Path

from . import __version__
from . import normalize as norm
from .config import AppConfig
from .detect import ReferenceSet, classify_events
from .embedding import (
    embed_lines,
    load_embedder,
    read_vectors,
    save_embedder,
    train_embedder,
    write_vectors,
)
from .detect import calibrate_threshold
from .errors import ProvsemError, TrainingDivergedError
from .evalgen.synth import SCENARIO_SUITE, TEMPLATES, generate_scenario
from .ingest import load_trace
from .pairs import build_pairs, load_pairs, save_pairs
from .pipeline import run_pipeline
from .seeding import derive_seed
from .semiotics import build_sentence, corpus_line
from .siamese import gradient_check, load_siamese, save_siamese, train

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_GATE = 3

GRAD_CHECK_TOLERANCE = 1e-4


class _Parser(argparse.ArgumentParser):
    # argparse exits 2 on usage errors; the contract here is 1.
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, "%s: error: %s\n" % (self.prog, message))


def _add_common(parser):
    parser.add_argument("--config", help="app-level TOML config file")
    parser.add_argument("--seed", type=int, help="root seed (overrides config)")
    parser.add_argument("-v", "--verbose", action="count", default=0)


def build_parser() -> _Parser:
    parser = _Parser(prog="provsem", description=__doc__)
    parser.add_argument("--version", action="version", version="provsem %s" % __version__)
    parser.add_argument(
        "--config-dump",
        action="store_true",
        help="print the merged configuration as JSON and exit",
    )
    sub = parser.add_subparsers(dest="command")

    p = sub.add_parser("ingest", help="parse and filter a trace, writing stats")
    _add_common(p)
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--stats", required=True, help="output JSON stats path")
    p.add_argument("--on-error", choices=("skip", "abort"))

    p = sub.add_parser("sentences", help="render a trace as a sentence corpus")
    _add_common(p)
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--out", required=True, help="output corpus TSV")
    p.add_argument("--on-error", choices=("skip", "abort"))

    p = sub.add_parser("normalize", help="re-normalize corpus tokens, or debug one token")
    _add_common(p)
    p.add_argument("--in", dest="input")
    p.add_argument("--out")
    p.add_argument("--token", help="print the fired rule for one token and exit")

    p = sub.add_parser("embed", help="train an embedder or dump vectors")
    _add_common(p)
    p.add_argument("--train", action="store_true", help="train a new model from --in")
    p.add_argument("--model", help="existing model to apply")
    p.add_argument("--model-out", help="where to write a newly trained model")
    p.add_argument("--in", dest="input", required=True, help="corpus TSV")
    p.add_argument("--out", help="vector dump TSV (apply mode)")

    p = sub.add_parser("pairs", help="build a balanced pair dataset from vector dumps")
    _add_common(p)
    p.add_argument("--benign", required=True, help="benign vector TSV")
    p.add_argument("--adv", required=True, help="refined adversarial vector TSV")
    p.add_argument("--n", type=int, required=True, help="pair count (even)")
    p.add_argument("--out", required=True)
    p.add_argument("--tag", default="")

    p = sub.add_parser("train-siamese", help="train the pair model, or run the gradient check")
    _add_common(p)
    p.add_argument("--pairs", help="training pair TSV")
    p.add_argument("--val", help="validation pair TSV for threshold calibration")
    p.add_argument("--out", help="model output path")
    p.add_argument("--grad-check", action="store_true",
                   help="verify analytic gradients against finite differences")

    p = sub.add_parser("detect", help="classify event vectors against references")
    _add_common(p)
    p.add_argument("--model", required=True)
    p.add_argument("--refs", required=True, help="labeled reference vector TSV")
    p.add_argument("--in", dest="input", required=True, help="event vector TSV")
    p.add_argument("--out", required=True, help="verdict JSONL")
    p.add_argument("--k", type=int, default=5)

    p = sub.add_parser("eval", help="run the group protocol over a trace directory")
    _add_common(p)
    p.add_argument("--protocol", choices=("table5",), default="table5")
    p.add_argument("--data", required=True, help="directory of <scenario>.jsonl traces")
    p.add_argument("--out", required=True, help="report directory")
    p.add_argument("--pairs-per-scenario", type=int, default=256)
    p.add_argument("--mode", choices=("pairs", "events"), default="pairs",
                   help="also report event-level verdicts with --mode events")

    p = sub.add_parser("gen", help="generate one synthetic scenario trace")
    _add_common(p)
    p.add_argument("--template", required=True, choices=sorted(TEMPLATES))
    p.add_argument("--scenario-id", default="S01")
    p.add_argument("--benign", type=int, default=400)
    p.add_argument("--attack", type=int, default=200)
    p.add_argument("--out", required=True)

    p = sub.add_parser("pipeline", help="run the whole chain end to end")
    _add_common(p)
    p.add_argument("--data", required=True,
                   help="'synthetic' or a directory of <scenario>.jsonl traces")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--benign", type=int, default=600, help="events per synthetic benign window")
    p.add_argument("--attack", type=int, default=300, help="events per synthetic attack window")
    p.add_argument("--pairs-per-scenario", type=int, default=256)
    return parser


def _load_config(args) -> AppConfig:
    cfg = AppConfig.load(getattr(args, "config", None))
    if getattr(args, "seed", None) is not None:
        cfg.seed = args.seed
    if getattr(args, "on_error", None):
        cfg.on_error = args.on_error
    cfg.verbosity += getattr(args, "verbose", 0)
    return cfg


def _corpus_rows(path):
    from .semiotics import read_corpus

    return read_corpus(path)


def cmd_ingest(args, cfg):
    events, stats = load_trace(args.input, on_error=cfg.on_error)
    with open(args.stats, "w", encoding="utf-8") as handle:
        json.dump(stats.to_dict(), handle, sort_keys=True, indent=2)
        handle.write("\n")
    print("%s: %d kept, %d dropped, %d errors" % (args.input, stats.kept, stats.dropped, stats.errors))
    return EXIT_OK


def cmd_sentences(args, cfg):
    events, stats = load_trace(args.input, on_error=cfg.on_error)
    with open(args.out, "w", encoding="utf-8") as handle:
        for event in events:
            record = build_sentence(event, cfg.semiotics, cfg.normalizer)
            handle.write(corpus_line(record) + "\n")
    print("wrote %d sentences (%d events dropped)" % (stats.kept, stats.dropped))
    return EXIT_OK


def cmd_normalize(args, cfg):
    if args.token:
        token, rule = norm.normalize_token_explain(args.token, cfg.normalizer)
        print("%s\t%s\t%s" % (args.token, token, rule))
        return EXIT_OK
    if not args.input or not args.out:
        raise ProvsemError("--in and --out are required without --token")
    count = 0
    with open(args.input, "r", encoding="utf-8") as src, open(
        args.out, "w", encoding="utf-8"
    ) as dst:
        for lineno, line in enumerate(src, 1):
            line = line.rstrip("\n")
            if not line:
                continue
            parts = line.split("\t")
            if len(parts) != 3:
                raise ProvsemError("corpus line %d is not a 3-column TSV row" % lineno)
            label, scenario_id, sentence = parts
            tokens = [norm.normalize_token(t, cfg.normalizer) for t in sentence.split()]
            dst.write("%s\t%s\t%s\n" % (label, scenario_id, " ".join(tokens)))
            count += 1
    print("normalized %d lines" % count)
    return EXIT_OK


def cmd_embed(args, cfg):
    rows = _corpus_rows(args.input)
    lines = [sentence for _, _, sentence in rows]
    if args.train:
        if not args.model_out:
            raise ProvsemError("--train requires --model-out")
        from dataclasses import replace

        model = train_embedder(lines, replace(cfg.embed, seed=derive_seed(cfg.seed, "embed")))
        save_embedder(model, args.model_out)
        print("trained embedder: %d vocab entries -> %s" % (len(model.vocab), args.model_out))
        return EXIT_OK
    if not args.model or not args.out:
        raise ProvsemError("apply mode requires --model and --out")
    model = load_embedder(args.model)
    matrix, oov = embed_lines(model, lines)
    write_vectors(args.out, [r[0] for r in rows], [r[1] for r in rows], matrix)
    print("embedded %d lines (%d fully out-of-vocabulary)" % (len(lines), oov))
    return EXIT_OK


def cmd_pairs(args, cfg):
    _, _, benign = read_vectors(args.benign)
    _, _, adv = read_vectors(args.adv)
    dataset = build_pairs(
        benign, adv, args.n, seed=derive_seed(cfg.seed, "pairs", args.tag), source_tag=args.tag
    )
    save_pairs(dataset, args.out)
    print("wrote %d pairs to %s" % (len(dataset), args.out))
    return EXIT_OK


def cmd_train_siamese(args, cfg):
    if args.grad_check:
        worst = gradient_check(n_trials=20, seed=cfg.seed)
        print("gradient check: max relative error %.3e (tolerance %.0e)"
              % (worst, GRAD_CHECK_TOLERANCE))
        return EXIT_OK if worst < GRAD_CHECK_TOLERANCE else EXIT_GATE
    if not args.pairs or not args.out:
        raise ProvsemError("training requires --pairs and --out")
    from dataclasses import replace

    dataset = load_pairs(args.pairs)
    model, history = train(dataset, replace(cfg.train, seed=derive_seed(cfg.seed, "train")))
    if args.val:
        model.threshold = calibrate_threshold(model, load_pairs(args.val))
        print("calibrated threshold: %.6f" % model.threshold)
    save_siamese(model, args.out)
    final = history[-1] if history else float("nan")
    print("trained %d epochs, final loss %.6f -> %s" % (len(history), final, args.out))
    return EXIT_OK


def cmd_detect(args, cfg):
    model = load_siamese(args.model)
    labels, _, refs_matrix = read_vectors(args.refs)
    benign = refs_matrix[[i for i, l in enumerate(labels) if l == "benign"]]
    adv = refs_matrix[[i for i, l in enumerate(labels) if l == "adversarial"]]
    refs = ReferenceSet(benign=benign, adversarial=adv, k=args.k)
    _, scenario_ids, queries = read_vectors(args.input)
    verdicts = classify_events(model, refs, queries)
    with open(args.out, "w", encoding="utf-8") as handle:
        for scenario_id, verdict in zip(scenario_ids, verdicts):
            handle.write(
                json.dumps(
                    {
                        "decision": verdict.decision,
                        "score": verdict.score,
                        "scenario_id": scenario_id,
                        "benign_refs": list(verdict.benign_refs),
                        "adversarial_refs": list(verdict.adversarial_refs),
                    },
                    sort_keys=True,
                )
                + "\n"
            )
    flagged = sum(1 for v in verdicts if v.decision == "adversarial")
    print("classified %d events, %d adversarial" % (len(verdicts), flagged))
    return EXIT_OK


def _trace_dir(path):
    traces = {p.stem: p for p in sorted(Path(path).glob("*.jsonl"))}
    if not traces:
        raise ProvsemError("no .jsonl traces found in %s" % path)
    return traces


def cmd_eval(args, cfg):
    result = run_pipeline(
        _trace_dir(args.data),
        seed=cfg.seed,
        outdir=args.out,
        sem_cfg=cfg.semiotics,
        norm_cfg=cfg.normalizer,
        embed_cfg=cfg.embed,
        train_cfg=cfg.train,
        pairs_per_scenario=args.pairs_per_scenario,
        on_error=cfg.on_error,
        event_level=args.mode == "events",
    )
    print(result.report.to_tsv(), end="")
    return EXIT_OK


def cmd_gen(args, cfg):
    count = generate_scenario(
        args.template, args.scenario_id, cfg.seed, args.benign, args.attack, args.out
    )
    print("wrote %d events to %s" % (count, args.out))
    return EXIT_OK


def cmd_pipeline(args, cfg):
    outdir = Path(args.out)
    if args.data == "synthetic":
        trace_dir = outdir / "traces"
        trace_dir.mkdir(parents=True, exist_ok=True)
        traces = {}
        for scenario_id, template in SCENARIO_SUITE:
            path = trace_dir / ("%s.jsonl" % scenario_id)
            generate_scenario(template, scenario_id, cfg.seed, args.benign, args.attack, path)
            traces[scenario_id] = path
    else:
        traces = _trace_dir(args.data)
    result = run_pipeline(
        traces,
        seed=cfg.seed,
        outdir=outdir,
        sem_cfg=cfg.semiotics,
        norm_cfg=cfg.normalizer,
        embed_cfg=cfg.embed,
        train_cfg=cfg.train,
        pairs_per_scenario=args.pairs_per_scenario,
        on_error=cfg.on_error,
    )
    print(result.report.to_tsv(), end="")
    print("report written to %s" % outdir)
    return EXIT_OK


_COMMANDS = {
    "ingest": cmd_ingest,
    "sentences": cmd_sentences,
    "normalize": cmd_normalize,
    "embed": cmd_embed,
    "pairs": cmd_pairs,
    "train-siamese": cmd_train_siamese,
    "detect": cmd_detect,
    "eval": cmd_eval,
    "gen": cmd_gen,
    "pipeline": cmd_pipeline,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)

    if args.config_dump:
        try:
            print(AppConfig.load(getattr(args, "config", None)).dump())
        except ProvsemError as exc:
            print("provsem: %s" % exc, file=sys.stderr)
            return EXIT_DATA
        return EXIT_OK

    if not args.command:
        parser.print_usage(sys.stderr)
        return EXIT_USAGE

    try:
        cfg = _load_config(args)
        logging.basicConfig(
            level=logging.WARNING - 10 * min(cfg.verbosity, 2),
            format="%(levelname)s %(name)s: %(message)s",
        )
        return _COMMANDS[args.command](args, cfg)
    except TrainingDivergedError as exc:
        print("provsem: %s" % exc, file=sys.stderr)
        return EXIT_GATE
    except ProvsemError as exc:
        print("provsem: %s" % exc, file=sys.stderr)
        return EXIT_DATA
    except OSError as exc:
        print("provsem: %s" % exc, file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
