#!/usr/bin/env python3
"""Benchmark the embedding-training kernels: compiled vs pure NumPy.

Generates a synthetic corpus, trains one embedder per backend with
identical settings, and reports epoch throughput and the numeric gap
between the resulting vector tables.

Usage: python benchmarks/bench_embedding.py [--sentences 5000] [--epochs 10]
"""

import argparse
import time

import numpy as np

from provsem.embedding import EmbedConfig, FAST_KERNELS, train_embedder
from provsem.evalgen.synth import SCENARIO_SUITE, TEMPLATES, generate_events
from provsem.ingest import parse_event_line
from provsem.semiotics import build_sentence, render_sentence
import json


def synthetic_corpus(n_sentences):
    lines = []
    per_scenario = max(1, n_sentences // len(SCENARIO_SUITE))
    for scenario_id, template in SCENARIO_SUITE:
        events = generate_events(
            TEMPLATES[template], scenario_id, 99, per_scenario * 2 // 3 + 1, per_scenario // 3 + 1
        )
        for raw in events:
            event = parse_event_line(json.dumps(raw))
            lines.append(render_sentence(build_sentence(event)))
    return lines[:n_sentences]


def run(backend, lines, epochs):
    cfg = EmbedConfig(epochs=epochs, seed=13, backend=backend)
    start = time.perf_counter()
    model = train_embedder(lines, cfg)
    elapsed = time.perf_counter() - start
    return model, elapsed


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--sentences", type=int, default=5000)
    parser.add_argument("--epochs", type=int, default=10)
    args = parser.parse_args()

    lines = synthetic_corpus(args.sentences)
    print("corpus: %d sentences, %d epochs per backend" % (len(lines), args.epochs))

    model_py, t_py = run("python", lines, args.epochs)
    print("python backend:  %8.2fs  (%.0f sentences/s)" % (t_py, len(lines) * args.epochs / t_py))

    if not FAST_KERNELS:
        print("compiled backend: not built (install with a C toolchain to compare)")
        return

    model_c, t_c = run("c", lines, args.epochs)
    print("compiled backend:%8.2fs  (%.0f sentences/s)" % (t_c, len(lines) * args.epochs / t_c))
    print("speedup: %.1fx" % (t_py / t_c))

    gap = float(np.abs(model_c.vectors - model_py.vectors).max())
    print("max |c - python| over all vectors: %.3e" % gap)


if __name__ == "__main__":
    main()
