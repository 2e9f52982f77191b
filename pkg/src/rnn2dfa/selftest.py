"""Built-in confidence checks used by the `selftest` CLI subcommand."""

from __future__ import annotations

import numpy as np

from .automata import Dfa, minimize
from .langdata import generate_stream, make_problem
from .rnn import RnnConfig, init_model, loss_and_gradients


def gradient_check(
    n_hidden: int = 3,
    window: int = 10,
    seed: int = 7,
    eps: float = 1e-6,
) -> float:
    """Max relative error of backprop gradients vs central finite differences.

    Noise draws are frozen across the perturbed evaluations so the loss is a
    deterministic function of the parameters.
    """
    gt = make_problem("tomita3")
    cfg = RnnConfig(n_hidden=n_hidden, nu=1.0, bptt_steps=window, rng_seed=seed)
    model = init_model(cfg, gt.alphabet.size, gt.output_classes)
    stream = generate_stream(gt, window, max_segment=5, rng_seed=seed)
    rng = np.random.default_rng(seed)
    noise = cfg.nu * rng.standard_normal((window, n_hidden))
    h0 = np.zeros(n_hidden)

    def loss():
        value, _, _ = loss_and_gradients(model, stream.inputs, stream.targets, h0, noise)
        return value

    _, grads, _ = loss_and_gradients(model, stream.inputs, stream.targets, h0, noise)
    max_rel = 0.0
    for name, W in model.weights().items():
        it = np.nditer(W, flags=["multi_index"])
        for _ in it:
            ix = it.multi_index
            orig = W[ix]
            W[ix] = orig + eps
            lp = loss()
            W[ix] = orig - eps
            lm = loss()
            W[ix] = orig
            fd = (lp - lm) / (2 * eps)
            g = grads[name][ix]
            rel = abs(fd - g) / max(abs(fd), abs(g), 1e-8)
            max_rel = max(max_rel, rel)
    return max_rel


def random_dfa(rng: np.random.Generator, max_states: int = 8, n_symbols: int = 3) -> Dfa:
    n = int(rng.integers(1, max_states + 1))
    trans = [[int(rng.integers(n)) for _ in range(n_symbols)] for _ in range(n)]
    labels = [int(rng.integers(2)) for _ in range(n)]
    return Dfa(tuple("ab$")[:n_symbols], trans, int(rng.integers(n)), state_labels=labels)


def _tables(d: Dfa):
    trans = np.array(d.transitions)
    if d.is_transducer:
        out = np.array(d.trans_labels)
    else:
        out = np.array(d.state_labels)[trans]
    return trans, out


def all_strings_agree(d1: Dfa, d2: Dfa, max_len: int) -> bool:
    """Exhaustive per-symbol output comparison over all strings up to max_len.

    Deliberately brute force (breadth-first over the full symbol tree, one
    array slot per string) to stay independent of the product-construction
    equivalence checker.
    """
    t1, o1 = _tables(d1)
    t2, o2 = _tables(d2)
    n_sym = d1.n_symbols
    cur1 = np.array([d1.initial])
    cur2 = np.array([d2.initial])
    for _ in range(max_len):
        # one column per appended symbol, flattened into the next level
        if not np.array_equal(o1[cur1], o2[cur2]):
            return False
        cur1 = t1[cur1].ravel()
        cur2 = t2[cur2].ravel()
        if len(cur1) > n_sym**max_len:
            raise RuntimeError("enumeration exploded")  # defensive, unreachable
    return True


def minimization_oracle(n_dfas: int = 500, max_len: int = 12, seed: int = 0) -> int:
    """Count random DFAs where minimize() changes behaviour or is not idempotent."""
    rng = np.random.default_rng(seed)
    bad = 0
    for _ in range(n_dfas):
        d = random_dfa(rng)
        m = minimize(d)
        m2 = minimize(m)
        if m.n_states > d.n_states or m2.n_states != m.n_states:
            bad += 1
            continue
        if not all_strings_agree(d, m, max_len):
            bad += 1
    return bad
