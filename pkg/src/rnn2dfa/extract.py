"""From hidden-state trajectories to discrete states.

A trained noisy network keeps only a few hidden units meaningfully active,
and those sit at the tanh extremes.  Clustering is therefore done by the
sign pattern of the active units; if the record is not actually binarized
the pipeline refuses to quantize it (NotClusterable) instead of forcing
artificial clusters.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .automata import Dfa
from .langdata import SEPARATOR
from .rnn import RnnModel, forward_step


class ExtractionError(RuntimeError):
    pass


class NotClusterable(ExtractionError):
    """Activation record is not binarized enough to quantize honestly."""


class NondeterministicTransition(ExtractionError):
    """Members of one cluster disagree on the destination for some symbol."""


class UnknownDestination(ExtractionError):
    """A transition lands on a sign pattern never seen in the record."""


@dataclass
class ExtractionConfig:
    tau_act: float = 0.5  # unit counts as active if max |h| exceeds this
    tau_sat: float = 0.5  # every active unit must clear this at every step
    tau_tight: float = 0.05  # per-coordinate cluster radius bound
    tau_w: float = 0.05  # recurrent back-projection threshold
    max_samples_per_cluster: int = 100


@dataclass
class ActiveMask:
    active: np.ndarray  # bool per hidden unit
    tau_act: float

    @property
    def indices(self) -> np.ndarray:
        return np.flatnonzero(self.active)

    @property
    def n_active(self) -> int:
        return int(self.active.sum())


@dataclass
class StateClustering:
    mask: ActiveMask
    patterns: list[tuple[int, ...]]  # +-1 per active unit, one per cluster
    centers: np.ndarray  # (n_clusters, n_hidden) mean vectors
    counts: np.ndarray  # members per cluster
    assignment: np.ndarray  # cluster id per recorded step

    @property
    def n_clusters(self) -> int:
        return len(self.patterns)


def detect_active(record: np.ndarray, tau_act: float = 0.5) -> ActiveMask:
    """Units whose activation magnitude ever exceeds tau_act on the record."""
    record = np.asarray(record)
    if record.ndim != 2 or len(record) == 0:
        raise ValueError("record must be a non-empty (steps, n_hidden) array")
    return ActiveMask(np.max(np.abs(record), axis=0) > tau_act, tau_act)


def is_binarized(record: np.ndarray, tau_act: float = 0.5, tau_sat: float = 0.5) -> bool:
    """Whether cluster_states would accept this record.

    True when there is at least one active unit and every active unit keeps
    |h| >= tau_sat at every recorded step.
    """
    record = np.asarray(record)
    mask = detect_active(record, tau_act)
    if mask.n_active == 0:
        return False
    return not bool((np.abs(record[:, mask.indices]) < tau_sat).any())


def _sign_pattern(vec: np.ndarray, active_idx: np.ndarray) -> tuple[int, ...]:
    return tuple(1 if v > 0 else -1 for v in vec[active_idx])


def cluster_states(
    record: np.ndarray,
    mask: ActiveMask,
    tau_sat: float = 0.5,
) -> StateClustering:
    """Group recorded vectors by the sign pattern of the active units.

    Raises NotClusterable when any active unit dips below tau_sat anywhere,
    which is the typical signature of a network trained without noise.
    """
    record = np.asarray(record)
    idx = mask.indices
    if len(idx) == 0:
        raise NotClusterable("no active units")
    act = record[:, idx]
    low = np.abs(act) < tau_sat
    if low.any():
        t, u = np.argwhere(low)[0]
        raise NotClusterable(
            f"active unit {idx[u]} has |h|={abs(act[t, u]):.3f} < {tau_sat} "
            f"at step {t}; activations are not binarized"
        )
    signs = np.where(act > 0, 1, -1)
    patterns: list[tuple[int, ...]] = []
    pattern_ids: dict[tuple[int, ...], int] = {}
    assignment = np.empty(len(record), dtype=np.int64)
    for t in range(len(record)):
        p = tuple(signs[t])
        cid = pattern_ids.get(p)
        if cid is None:
            cid = len(patterns)
            pattern_ids[p] = cid
            patterns.append(p)
        assignment[t] = cid
    k = len(patterns)
    centers = np.zeros((k, record.shape[1]))
    counts = np.zeros(k, dtype=np.int64)
    for cid in range(k):
        members = assignment == cid
        counts[cid] = members.sum()
        centers[cid] = record[members].mean(axis=0)
    return StateClustering(mask, patterns, centers, counts, assignment)


@dataclass
class PcaProjection:
    mean: np.ndarray
    components: np.ndarray  # (2, n_hidden)
    coords: np.ndarray  # (steps, 2)
    explained: np.ndarray  # top-2 eigenvalues of the sample covariance

    def transform(self, vectors: np.ndarray) -> np.ndarray:
        return (np.atleast_2d(vectors) - self.mean) @ self.components.T


def pca_project(record: np.ndarray) -> PcaProjection:
    """Project onto the top-2 principal directions of the sample covariance.

    Deterministic sign convention: the largest-magnitude entry of each
    component is made positive.
    """
    record = np.asarray(record, dtype=np.float64)
    if len(np.unique(record, axis=0)) < 2:
        raise ValueError("need at least 2 distinct vectors for PCA")
    mean = record.mean(axis=0)
    centered = record - mean
    cov = centered.T @ centered / (len(record) - 1)
    eigvals, eigvecs = np.linalg.eigh(cov)
    order = np.argsort(eigvals)[::-1][:2]
    comps = eigvecs[:, order].T.copy()
    vals = eigvals[order]
    if vals[0] <= 0:
        raise ValueError("rank-0 record")
    for i in range(len(comps)):
        j = np.argmax(np.abs(comps[i]))
        if comps[i, j] < 0:
            comps[i] = -comps[i]
    return PcaProjection(mean, comps, (centered @ comps.T), vals)


@dataclass
class TransitionTable:
    symbols: tuple[str, ...]
    next: np.ndarray  # (n_states, n_symbols) cluster ids
    initial: int
    state_labels: list[int] | None = None  # acceptor
    trans_labels: np.ndarray | None = None  # transducer, (n_states, n_symbols)
    dollar_consistent: bool = True  # all raw $-columns agree before minimization

    @property
    def n_states(self) -> int:
        return len(self.next)

    def to_dfa(self) -> Dfa:
        if self.trans_labels is not None:
            return Dfa(
                self.symbols,
                [list(map(int, row)) for row in self.next],
                self.initial,
                trans_labels=[list(map(int, row)) for row in self.trans_labels],
            )
        return Dfa(
            self.symbols,
            [list(map(int, row)) for row in self.next],
            self.initial,
            state_labels=list(self.state_labels),
        )

    def replay(self, inputs) -> np.ndarray:
        """Per-symbol outputs when driven like the network (from the reset state)."""
        return np.array(self.to_dfa().run(inputs), dtype=np.int64)


def extract_transitions(
    model: RnnModel,
    record: np.ndarray,
    clustering: StateClustering,
    config: ExtractionConfig | None = None,
    transducer: bool = False,
) -> TransitionTable:
    """Transition table over clusters, verified deterministic over samples.

    For every cluster, up to max_samples_per_cluster member vectors plus the
    cluster center are stepped (noise off) with every symbol; all must land
    on one known sign pattern.  The initial state is the cluster reached
    from the all-zero hidden state on the separator.
    """
    config = config or ExtractionConfig()
    record = np.asarray(record)
    idx = clustering.mask.indices
    pattern_ids = {p: i for i, p in enumerate(clustering.patterns)}
    k = clustering.n_clusters
    n_sym = len(model.symbols)
    nxt = np.zeros((k, n_sym), dtype=np.int64)
    trans_labels = np.zeros((k, n_sym), dtype=np.int64) if transducer else None

    for cid in range(k):
        member_idx = np.flatnonzero(clustering.assignment == cid)
        member_idx = member_idx[: config.max_samples_per_cluster]
        starts = np.vstack([record[member_idx], clustering.centers[cid]])
        for s in range(n_sym):
            dests = set()
            for vec in starts:
                h, _ = forward_step(model, vec, s)
                dests.add(_sign_pattern(h, idx))
            if len(dests) != 1:
                raise NondeterministicTransition(
                    f"cluster {cid}, symbol {model.symbols[s]!r}: "
                    f"{len(dests)} distinct destination patterns"
                )
            dest = dests.pop()
            if dest not in pattern_ids:
                raise UnknownDestination(
                    f"cluster {cid}, symbol {model.symbols[s]!r}: destination "
                    f"pattern was never observed in the record"
                )
            nxt[cid, s] = pattern_ids[dest]
            if transducer:
                _, y = forward_step(model, clustering.centers[cid], s)
                trans_labels[cid, s] = int(np.argmax(y))

    sep = model.symbols.index(SEPARATOR)
    h0, _ = forward_step(model, np.zeros(model.n_hidden), sep)
    start_pattern = _sign_pattern(h0, idx)
    if start_pattern not in pattern_ids:
        raise UnknownDestination("reset state does not match any observed cluster")
    initial = pattern_ids[start_pattern]
    dollar_consistent = bool(np.all(nxt[:, sep] == nxt[0, sep]))

    state_labels = None
    if not transducer:
        logits = clustering.centers @ model.W_hy.T + model.b_y
        state_labels = [int(np.argmax(row)) for row in logits]
    return TransitionTable(
        tuple(model.symbols), nxt, initial, state_labels, trans_labels, dollar_consistent
    )


@dataclass
class SaturationReport:
    unit_indices: np.ndarray
    fraction_saturated: np.ndarray  # per active unit, fraction of |h| > 0.9
    hist_counts: np.ndarray  # (n_active, n_bins)
    hist_edges: np.ndarray

    @property
    def min_fraction(self) -> float:
        return float(self.fraction_saturated.min())


def saturation_report(record: np.ndarray, mask: ActiveMask, n_bins: int = 50) -> SaturationReport:
    record = np.asarray(record)
    idx = mask.indices
    if len(idx) == 0:
        raise ValueError("no active units to report on")
    act = record[:, idx]
    frac = np.mean(np.abs(act) > 0.9, axis=0)
    edges = np.linspace(-1.0, 1.0, n_bins + 1)
    counts = np.vstack([np.histogram(act[:, i], bins=edges)[0] for i in range(len(idx))])
    return SaturationReport(idx, frac, counts, edges)


@dataclass
class WeightReport:
    W_xh: np.ndarray
    W_hh: np.ndarray
    back_projecting: list[int]  # units whose recurrent out-projection is non-null
    tau_w: float


def weight_report(model: RnnModel, mask: ActiveMask, tau_w: float = 0.05) -> WeightReport:
    """Heat-map data plus the units that feed back into the recurrent layer.

    Unit j projects back if column j of W_hh (its influence on the next
    hidden state) has L-infinity norm above tau_w.
    """
    out_proj = np.max(np.abs(model.W_hh), axis=0)
    back = [int(j) for j in np.flatnonzero(out_proj > tau_w)]
    return WeightReport(model.W_xh.copy(), model.W_hh.copy(), back, tau_w)
