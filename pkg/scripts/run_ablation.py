#!/usr/bin/env python3
"""Run the 2x2 uncertainty ablation on a synthesized or on-disk corpus.

Without --data, a fresh synthetic corpus is generated in-process; with
--data, the directory must hold docs_model*.uecs / queries_model*.uecs /
qrels.tsv as written by `uec synth`.
"""

import argparse
import json

from uec.cli import _load_synth_dir
from uec.convolution import DEFAULT_TEMPERATURE
from uec.evaluation import SynthSpec, ablation_run, format_report_table, synth_generate
from uec.similarity import DEFAULT_BETA


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--data", default=None, help="directory from `uec synth`")
    parser.add_argument("--seed", type=int, default=None)
    parser.add_argument("--temperature", type=float, default=DEFAULT_TEMPERATURE)
    parser.add_argument("--beta", type=float, default=DEFAULT_BETA)
    parser.add_argument("--k", type=int, default=10)
    parser.add_argument("--out", default=None, help="optional JSON report path")
    args = parser.parse_args()

    if args.data:
        docs, queries, qrels = _load_synth_dir(args.data)
    else:
        spec = SynthSpec() if args.seed is None else SynthSpec(seed=args.seed)
        docs, queries, qrels = synth_generate(spec)

    report = ablation_run(
        docs, queries, qrels, temperature=args.temperature, beta=args.beta, k=args.k
    )
    print(format_report_table(report))
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            json.dump(report, fh, indent=2)
            fh.write("\n")
        print(f"wrote {args.out}")


if __name__ == "__main__":
    main()
