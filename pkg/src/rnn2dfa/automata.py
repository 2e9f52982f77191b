"""Deterministic finite automata: representation, minimization, equivalence, DOT export.

Two flavours share one class:

* acceptor: one output class per state; running the machine on a symbol
  sequence emits the label of the state reached after each symbol.
* transducer (Mealy): one output class per transition; running emits the
  label of each edge taken.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass


@dataclass
class Dfa:
    symbols: tuple[str, ...]
    transitions: list[list[int]]  # transitions[state][symbol_index] -> state
    initial: int
    state_labels: list[int] | None = None
    trans_labels: list[list[int]] | None = None

    def __post_init__(self):
        self.symbols = tuple(self.symbols)
        if (self.state_labels is None) == (self.trans_labels is None):
            raise ValueError("exactly one of state_labels / trans_labels required")
        self.validate()

    @property
    def n_states(self) -> int:
        return len(self.transitions)

    @property
    def n_symbols(self) -> int:
        return len(self.symbols)

    @property
    def is_transducer(self) -> bool:
        return self.trans_labels is not None

    def validate(self):
        n = self.n_states
        if n == 0:
            raise ValueError("empty automaton")
        if len(set(self.symbols)) != len(self.symbols):
            raise ValueError("duplicate symbols in alphabet")
        if not (0 <= self.initial < n):
            raise ValueError("initial state out of range")
        for row in self.transitions:
            if len(row) != self.n_symbols:
                raise ValueError("transition row has wrong arity")
            for t in row:
                if not (0 <= t < n):
                    raise ValueError("transition target out of range")
        if self.state_labels is not None and len(self.state_labels) != n:
            raise ValueError("state_labels length mismatch")
        if self.trans_labels is not None:
            if len(self.trans_labels) != n or any(
                len(r) != self.n_symbols for r in self.trans_labels
            ):
                raise ValueError("trans_labels shape mismatch")

    def symbol_index(self, sym: str) -> int:
        return self.symbols.index(sym)

    def step(self, state: int, sym_idx: int) -> tuple[int, int]:
        """Return (next_state, emitted_output_class)."""
        nxt = self.transitions[state][sym_idx]
        if self.is_transducer:
            out = self.trans_labels[state][sym_idx]
        else:
            out = self.state_labels[nxt]
        return nxt, out

    def run(self, inputs) -> list[int]:
        """Emit one output class per input symbol index."""
        state = self.initial
        outputs = []
        for x in inputs:
            state, out = self.step(state, x)
            outputs.append(out)
        return outputs

    def run_string(self, text: str) -> list[int]:
        return self.run(self.symbol_index(ch) for ch in text)

    def _output_signature(self, state: int) -> tuple:
        """Per-state signature used to seed partition refinement."""
        if self.is_transducer:
            return tuple(self.trans_labels[state])
        return (self.state_labels[state],)


def reachable_states(d: Dfa) -> list[int]:
    """States reachable from the initial state, in BFS order (symbols in alphabet order)."""
    seen = {d.initial}
    order = [d.initial]
    queue = deque([d.initial])
    while queue:
        s = queue.popleft()
        for k in range(d.n_symbols):
            t = d.transitions[s][k]
            if t not in seen:
                seen.add(t)
                order.append(t)
                queue.append(t)
    return order


def canonicalize(d: Dfa) -> Dfa:
    """Drop unreachable states and renumber the rest in BFS order from the initial state."""
    order = reachable_states(d)
    remap = {old: new for new, old in enumerate(order)}
    trans = [[remap[d.transitions[old][k]] for k in range(d.n_symbols)] for old in order]
    state_labels = None
    trans_labels = None
    if d.is_transducer:
        trans_labels = [list(d.trans_labels[old]) for old in order]
    else:
        state_labels = [d.state_labels[old] for old in order]
    return Dfa(d.symbols, trans, 0, state_labels, trans_labels)


def minimize(d: Dfa) -> Dfa:
    """Minimal automaton with the same per-symbol output behaviour.

    Moore-style partition refinement: initial blocks by output signature
    (state label for acceptors, per-symbol edge outputs for transducers),
    refined on successor blocks until stable.  Canonical BFS numbering.
    """
    d = canonicalize(d)
    n = d.n_states
    sigs = {}
    block = [0] * n
    for s in range(n):
        block[s] = sigs.setdefault(d._output_signature(s), len(sigs))
    while True:
        refined = {}
        new_block = [0] * n
        for s in range(n):
            key = (block[s],) + tuple(block[d.transitions[s][k]] for k in range(d.n_symbols))
            new_block[s] = refined.setdefault(key, len(refined))
        if len(refined) == len(set(block)):
            break
        block = new_block
    n_blocks = len(set(block))
    trans = [[0] * d.n_symbols for _ in range(n_blocks)]
    rep = [None] * n_blocks
    for s in range(n):
        if rep[block[s]] is None:
            rep[block[s]] = s
    for b in range(n_blocks):
        s = rep[b]
        for k in range(d.n_symbols):
            trans[b][k] = block[d.transitions[s][k]]
    state_labels = None
    trans_labels = None
    if d.is_transducer:
        trans_labels = [list(d.trans_labels[rep[b]]) for b in range(n_blocks)]
    else:
        state_labels = [d.state_labels[rep[b]] for b in range(n_blocks)]
    return canonicalize(Dfa(d.symbols, trans, block[d.initial], state_labels, trans_labels))


def equivalent(d1: Dfa, d2: Dfa) -> tuple[bool, str | None]:
    """Product-construction check of per-symbol output equality.

    Returns (True, None) or (False, shortest_counterexample_string).
    """
    if d1.symbols != d2.symbols:
        raise ValueError("alphabet mismatch")
    if d1.is_transducer != d2.is_transducer:
        raise ValueError("cannot compare acceptor with transducer")
    start = (d1.initial, d2.initial)
    parent: dict[tuple[int, int], tuple[tuple[int, int], int]] = {start: None}
    queue = deque([start])
    while queue:
        pair = queue.popleft()
        s1, s2 = pair
        for k in range(d1.n_symbols):
            t1, o1 = d1.step(s1, k)
            t2, o2 = d2.step(s2, k)
            if o1 != o2:
                # rebuild shortest path of symbols ending with this one
                path = [k]
                node = pair
                while parent[node] is not None:
                    node, sym = parent[node]
                    path.append(sym)
                path.reverse()
                return False, "".join(d1.symbols[i] for i in path)
            nxt = (t1, t2)
            if nxt not in parent:
                parent[nxt] = (pair, k)
                queue.append(nxt)
    return True, None


def isomorphic(d1: Dfa, d2: Dfa) -> bool:
    """Label- and transition-preserving bijection between reachable parts.

    Determinism forces the only candidate mapping, so a single BFS decides it.
    """
    if d1.symbols != d2.symbols or d1.is_transducer != d2.is_transducer:
        return False
    c1, c2 = canonicalize(d1), canonicalize(d2)
    if c1.n_states != c2.n_states:
        return False
    if c1.transitions != c2.transitions:
        return False
    if c1.is_transducer:
        return c1.trans_labels == c2.trans_labels
    return c1.state_labels == c2.state_labels


def to_dot(d: Dfa, name: str = "dfa") -> str:
    """Graphviz DOT rendering; accepting states (label 1) double-circled."""
    lines = [f"digraph {name} {{", "  rankdir=LR;", '  __start [shape=point, label=""];']
    for s in range(d.n_states):
        if d.is_transducer:
            shape = "circle"
            label = str(s)
        else:
            shape = "doublecircle" if d.state_labels[s] == 1 else "circle"
            label = str(s)
        lines.append(f'  {s} [shape={shape}, label="{label}"];')
    lines.append(f"  __start -> {d.initial};")
    for s in range(d.n_states):
        # merge parallel edges into one comma-separated label
        by_target: dict[tuple[int, int | None], list[str]] = {}
        for k, sym in enumerate(d.symbols):
            t = d.transitions[s][k]
            out = d.trans_labels[s][k] if d.is_transducer else None
            txt = f"{sym}/{out}" if d.is_transducer else sym
            by_target.setdefault((t,), []).append(txt)
        for (t,), syms in by_target.items():
            lab = ",".join(syms).replace("$", "\\$")
            lines.append(f'  {s} -> {t} [label="{lab}"];')
    lines.append("}")
    return "\n".join(lines) + "\n"


def transition_table_csv(d: Dfa) -> str:
    """CSV mirror of the printed transition tables: one row per state."""
    header = ["state"] + [f"on_{sym}" for sym in d.symbols] + ["label", "initial"]
    rows = [",".join(header)]
    for s in range(d.n_states):
        if d.is_transducer:
            cells = [
                f"{d.transitions[s][k]}/{d.trans_labels[s][k]}" for k in range(d.n_symbols)
            ]
            label = ""
        else:
            cells = [str(d.transitions[s][k]) for k in range(d.n_symbols)]
            label = str(d.state_labels[s])
        rows.append(",".join([str(s)] + cells + [label, "1" if s == d.initial else "0"]))
    return "\n".join(rows) + "\n"
