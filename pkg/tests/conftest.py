"""Shared fixtures: a persistent cache of trained networks.

Training a 20-unit network on a 100k-symbol stream takes minutes, so trained
models are cached on disk under tests/models/ and reloaded on later runs.
The cache holds only model weights plus a tiny run summary; every assertion
in the suite is recomputed from the loaded model, never from cached results.
Delete tests/models/ to retrain everything from scratch.
"""

import time
from pathlib import Path

import numpy as np

from rnn2dfa.config import (
    ROLE_MODEL,
    ROLE_TRAIN_STREAM,
    ROLE_VAL_STREAM,
    derive_seed,
)
from rnn2dfa.extract import detect_active, is_binarized
from rnn2dfa.langdata import ADDITION_PROBLEMS, generate_stream, make_problem
from rnn2dfa.rnn import RnnConfig, accuracy, forward_sequence, init_model, load_model, save_model, train

CACHE_DIR = Path(__file__).parent / "models"

# problems whose harder dynamics need the noise level ramped in linearly
RAMP_PROBLEMS = {"bxa", "tomita2", "tomita3", "tomita4", "tomita5", "tomita6", "tomita7"}

# languages whose accepting strings are vanishingly rare under the uniform
# measure train on a stream with accepted-string segments mixed in; without
# them the noise erodes the rarely-reinforced transitions and the network
# settles on a majority-class predictor (validation stays fully uniform)
POSITIVE_FRAC = {"tomita2": 0.1}

# per-problem training tweaks; tomita2's accepting cycle needs the slow ramp
# so its rarely-exercised return transition can harden at each noise level
CONFIG_OVERRIDES: dict = {"tomita2": {"ramp_end": 0.9}}

MASTER_SEED = 0
TRAIN_SYMBOLS = 100_000
VAL_SYMBOLS = 100_000
MAX_SEGMENT = 100

_stream_cache: dict = {}


def problem_streams(problem: str):
    """Deterministic train/val streams shared by all ensemble members."""
    if problem not in _stream_cache:
        gt = make_problem(problem)
        val_symbols = 50_000 if problem in ADDITION_PROBLEMS else VAL_SYMBOLS
        _stream_cache[problem] = (
            gt,
            generate_stream(gt, TRAIN_SYMBOLS, MAX_SEGMENT,
                            derive_seed(MASTER_SEED, ROLE_TRAIN_STREAM),
                            POSITIVE_FRAC.get(problem, 0.0)),
            generate_stream(gt, val_symbols, MAX_SEGMENT,
                            derive_seed(MASTER_SEED, ROLE_VAL_STREAM)),
        )
    return _stream_cache[problem]


def trained_model(problem: str, member: int = 0, nu: float = 1.0):
    """Train (or load from cache) one ensemble member; returns (model, info).

    info is a dict with converged/epochs/accuracy entries.  The cache key
    covers everything that determines the result.
    """
    ramp = nu > 0 and problem in RAMP_PROBLEMS
    stem = f"{problem}_seed{MASTER_SEED}_m{member}_nu{nu:g}"
    model_path = CACHE_DIR / f"{stem}.model"
    info_path = CACHE_DIR / f"{stem}.run"
    if model_path.exists() and info_path.exists():
        info = dict(
            line.split("=", 1) for line in info_path.read_text().splitlines()
        )
        return load_model(model_path), info

    gt, train_stream, val_stream = problem_streams(problem)
    cfg = RnnConfig(
        nu=nu, noise_ramp=ramp,
        rng_seed=derive_seed(MASTER_SEED, ROLE_MODEL + member),
        **(CONFIG_OVERRIDES.get(problem, {}) if nu > 0 else {}),
    )
    model = init_model(cfg, gt.alphabet.size, gt.output_classes,
                       gt.alphabet.symbols, problem)

    def stop_check(m):
        # stop on a model that is extractable and firmly in the saturation
        # regime, not wherever the epoch budget happens to land
        _, _, record = forward_sequence(m, m.zero_state(), val_stream, record=True)
        if not is_binarized(record):
            return False
        idx = detect_active(record).indices
        return float(np.mean(np.abs(record[:, idx]) > 0.9)) >= 0.95

    t0 = time.time()
    trace = train(model, train_stream, val_stream,
                  stop_check=stop_check if nu > 0 else None)
    clean_preds, _, _ = forward_sequence(model, model.zero_state(), train_stream)
    last = trace.records[-1]
    info = {
        "converged": str(int(trace.converged)),
        "epochs": str(trace.epochs_run),
        "seconds": f"{time.time() - t0:.0f}",
        "train_acc_clean": f"{accuracy(clean_preds, train_stream.targets):.6f}",
        "train_acc_noisy": f"{last.train_acc:.6f}",
        "val_acc": f"{last.val_acc:.6f}",
        "val_acc_noisy": f"{last.val_acc_noisy:.6f}",
    }
    CACHE_DIR.mkdir(exist_ok=True)
    save_model(model, model_path)
    info_path.write_text("".join(f"{k}={v}\n" for k, v in info.items()))
    return model, info


# one "criterion N: PASS/FAIL" line per acceptance criterion, printed in the
# terminal summary so they are visible even when everything passes
acceptance_lines: list[str] = []


def record_criterion(number: int, name: str, ok: bool, detail: str = ""):
    suffix = f"  ({detail})" if detail else ""
    acceptance_lines.append(
        f"criterion {number} [{name}]: {'PASS' if ok else 'FAIL'}{suffix}"
    )


def pytest_terminal_summary(terminalreporter):
    if acceptance_lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(acceptance_lines):
            terminalreporter.write_line(line)
