"""Stability experiments: very long strings and cluster perturbations.

Long-string runs measure per-position accuracy of an ensemble of trained
networks on strings orders of magnitude longer than anything seen in
training.  Perturbation runs kick the hidden state out of a cluster and
track how fast it falls back onto the expected trajectory, where "expected"
is dictated by the extracted transition table, so genuine divergence shows
up instead of being snapped away.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import product

import numpy as np

from .extract import StateClustering, TransitionTable
from .langdata import GroundTruth, SymbolStream, generate_long_string
from .rnn import NumericalFailure, RnnModel, forward_sequence


@dataclass
class LongStringResult:
    per_position_accuracy: np.ndarray  # mean over (model, string) pairs
    n_models: int
    n_strings: int
    n_failed_models: int = 0

    @property
    def min_accuracy(self) -> float:
        return float(self.per_position_accuracy.min())

    def log_bins(self, per_decade: int = 10) -> list[tuple[int, int, float]]:
        """(bin_start, bin_end, mean accuracy) with log-spaced position bins."""
        n = len(self.per_position_accuracy)
        edges = np.unique(
            np.round(
                np.logspace(0, np.log10(n), int(np.log10(n) * per_decade) + 1)
            ).astype(int)
        )
        edges = edges[edges <= n]
        if edges[-1] != n:
            edges = np.append(edges, n)
        out = []
        lo = 0
        for hi in edges:
            if hi <= lo:
                continue
            out.append((lo + 1, int(hi), float(self.per_position_accuracy[lo:hi].mean())))
            lo = int(hi)
        return out

    def to_csv(self) -> str:
        lines = ["position_bin_start,position_bin_end,mean_accuracy"]
        for lo, hi, acc in self.log_bins():
            lines.append(f"{lo},{hi},{acc:.10g}")
        return "\n".join(lines) + "\n"


def dfa_predictor(gt: GroundTruth):
    """Wrap a ground-truth automaton as a prediction function (oracle model)."""

    def predict(stream: SymbolStream) -> np.ndarray:
        return np.array(gt.minimal_dfa.run(stream.inputs), dtype=np.int64)

    return predict


def long_string_test(
    models: list,
    gt: GroundTruth,
    n_strings: int,
    length: int,
    rng_seed: int = 0,
) -> LongStringResult:
    """Per-position accuracy averaged over all (model, string) pairs.

    models may mix RnnModel instances and callables mapping a SymbolStream to
    a prediction array.  A model that diverges numerically on some string is
    dropped from the average and counted in n_failed_models.
    """
    correct = np.zeros(length)
    failed = set()
    streams = [
        generate_long_string(gt, length, rng_seed=int(s))
        for s in np.random.SeedSequence(rng_seed).generate_state(n_strings)
    ]
    for mi, model in enumerate(models):
        model_correct = np.zeros(length)
        try:
            for stream in streams:
                if isinstance(model, RnnModel):
                    preds, _, _ = forward_sequence(model, model.zero_state(), stream)
                else:
                    preds = model(stream)
                model_correct += preds == stream.targets
        except NumericalFailure:
            failed.add(mi)
            continue
        correct += model_correct
    n_ok = len(models) - len(failed)
    if n_ok == 0:
        raise NumericalFailure("every model in the ensemble failed")
    return LongStringResult(correct / (n_ok * n_strings), n_ok, n_strings, len(failed))


@dataclass
class PerturbationResult:
    sigma_p: float
    dispersion: np.ndarray  # mean distance to expected center, t = 0..horizon
    agreement: np.ndarray  # (n_clusters, n_symbols) all-trials-match flags
    match_fraction: float  # destination matches over all per-step checks
    n_strings: int
    n_trials: int

    def to_csv(self) -> str:
        lines = ["sigma_p,t,dispersion"]
        for t, d in enumerate(self.dispersion):
            lines.append(f"{self.sigma_p:g},{t},{d:.10g}")
        return "\n".join(lines) + "\n"


def _batch_step(model: RnnModel, H: np.ndarray, x: int) -> np.ndarray:
    """Noise-free forward step applied to a batch of hidden states."""
    Z = H @ model.W_hh.T + model.W_xh[:, x] + model.b_h
    return np.tanh(Z)


def perturb_and_track(
    model: RnnModel,
    clustering: StateClustering,
    table: TransitionTable,
    sigma_p: float,
    n_trials: int = 1000,
    horizon: int = 5,
    rng_seed: int = 0,
    step_budget: int = 100_000,
) -> PerturbationResult:
    """Perturb every cluster center and follow it through every input string.

    Starts at center + N(0, sigma_p) on all components (which may leave
    [-1, 1]), steps noise-free through each length-`horizon` symbol string,
    and measures the distance to the center the transition table predicts,
    over active units.  Strings and trials are budget-capped at step_budget
    forward steps; full enumeration of the strings is used when it fits.
    """
    rng = np.random.default_rng(rng_seed)
    k = clustering.n_clusters
    n_sym = len(table.symbols)
    idx = clustering.mask.indices
    patterns = np.array(clustering.patterns)  # (k, n_active)

    all_strings = n_sym**horizon
    if k * all_strings * horizon <= step_budget:
        strings = [list(s) for s in product(range(n_sym), repeat=horizon)]
    else:
        n_strings = max(1, step_budget // (k * horizon))
        strings = [list(rng.integers(n_sym, size=horizon)) for _ in range(n_strings)]
    trials = max(1, min(n_trials, step_budget // (k * len(strings) * horizon)))

    disp_sum = np.zeros(horizon + 1)
    disp_count = 0
    agreement = np.ones((k, n_sym), dtype=bool)
    match_count = 0
    check_count = 0

    for cid in range(k):
        for string in strings:
            H = clustering.centers[cid] + sigma_p * rng.standard_normal(
                (trials, model.n_hidden)
            )
            disp_sum[0] += np.linalg.norm(
                (H - clustering.centers[cid])[:, idx], axis=1
            ).sum()
            state = cid
            for t, x in enumerate(string):
                H = _batch_step(model, H, int(x))
                prev_state = state
                state = int(table.next[state][x])
                disp_sum[t + 1] += np.linalg.norm(
                    (H - clustering.centers[state])[:, idx], axis=1
                ).sum()
                signs = np.where(H[:, idx] > 0, 1, -1)
                ok = np.all(signs == patterns[state], axis=1)
                match_count += int(ok.sum())
                check_count += trials
                if not ok.all():
                    agreement[prev_state, x] = False
            disp_count += trials
    return PerturbationResult(
        sigma_p,
        disp_sum / disp_count,
        agreement,
        match_count / max(check_count, 1),
        len(strings),
        trials,
    )


@dataclass
class SweepRow:
    cluster: int
    symbol: str
    x0: float
    y0: float
    x1: float
    y1: float


def transition_sweep(
    model: RnnModel,
    record: np.ndarray,
    clustering: StateClustering,
    projection,
    max_samples: int = 100,
) -> list[SweepRow]:
    """Projected start/destination pairs for every (cluster, symbol).

    Reuses the fitted PCA basis so the panels line up with the cluster
    scatter plot.
    """
    record = np.asarray(record)
    rows: list[SweepRow] = []
    for cid in range(clustering.n_clusters):
        member_idx = np.flatnonzero(clustering.assignment == cid)[:max_samples]
        starts = record[member_idx]
        p0 = projection.transform(starts)
        for s, sym in enumerate(model.symbols):
            dests = _batch_step(model, starts, s)
            p1 = projection.transform(dests)
            for a, b in zip(p0, p1):
                rows.append(SweepRow(cid, sym, float(a[0]), float(a[1]), float(b[0]), float(b[1])))
    return rows


def sweep_to_csv(rows: list[SweepRow]) -> str:
    lines = ["cluster,symbol,x0,y0,x1,y1"]
    for r in rows:
        lines.append(f"{r.cluster},{r.symbol},{r.x0:.8g},{r.y0:.8g},{r.x1:.8g},{r.y1:.8g}")
    return "\n".join(lines) + "\n"
