#!/usr/bin/env python3
"""Train an ensemble of networks on one problem and run the long-string test.

Usage:
    python scripts/train_ensemble.py --problem tomita3 --members 5 --noise-ramp \
        --long-strings 10 --long-length 1000000

Members are independent initializations (seed path 10+member) trained on the
same streams; converged members are pooled into the ensemble accuracy run.
"""

import argparse
import sys
from pathlib import Path

from rnn2dfa.cli import EXIT_OK, main


def run(argv):
    parser = argparse.ArgumentParser()
    parser.add_argument("--members", type=int, default=5)
    args, rest = parser.parse_known_args(argv)

    problem, seed, out_dir = "tomita3", "0", "runs"
    for i, a in enumerate(rest):
        if a == "--problem":
            problem = rest[i + 1]
        elif a == "--seed":
            seed = rest[i + 1]
        elif a == "--out-dir":
            out_dir = rest[i + 1]

    models = []
    for member in range(args.members):
        code = main(["train", *rest, "--member", str(member)])
        suffix = f"seed{seed}" if member == 0 else f"seed{seed}_m{member}"
        path = Path(out_dir) / problem / suffix / "model.txt"
        if code == EXIT_OK and path.exists():
            models.append(str(path))
        else:
            print(f"member {member}: not converged, excluded from ensemble")
    if not models:
        print("no converged members; nothing to test", file=sys.stderr)
        return 1
    print(f"ensemble of {len(models)} converged members")
    return main(["stability", *rest, "--models", *models])


if __name__ == "__main__":
    sys.exit(run(sys.argv[1:]))
