#!/usr/bin/env python3
"""Full pipeline for one problem/seed: train, extract, stability, report.

Usage:
    python scripts/run_pipeline.py --problem tomita3 --seed 0 --noise-ramp

Any `rnn2dfa train` flag is accepted and forwarded.  Artifacts land under
runs/<problem>/seed<seed>/.
"""

import sys
from pathlib import Path

from rnn2dfa.cli import EXIT_NOT_CONVERGED, EXIT_OK, main


def run(argv):
    args = list(argv)
    code = main(["train", *args])
    if code not in (EXIT_OK, EXIT_NOT_CONVERGED):
        return code

    # recover the run directory from the config the train step wrote
    problem = seed = out_dir = None
    for i, a in enumerate(args):
        if a == "--problem":
            problem = args[i + 1]
        elif a == "--seed":
            seed = args[i + 1]
        elif a == "--out-dir":
            out_dir = args[i + 1]
    model = Path(out_dir or "runs") / (problem or "tomita3") / f"seed{seed or 0}" / "model.txt"
    if not model.exists():
        print(f"error: expected model at {model}", file=sys.stderr)
        return 1
    if code == EXIT_NOT_CONVERGED:
        print("training did not converge; running extraction anyway")

    code = main(["extract", *args, "--model", str(model)])
    if code != EXIT_OK:
        print(f"extraction stopped with exit code {code}")
        return code
    code = main(["stability", *args, "--models", str(model)])
    main(["report", "--out", str(model.parent.parent.parent)])
    return code


if __name__ == "__main__":
    sys.exit(run(sys.argv[1:]))
