"""Benchmark problems: nine regular languages over {a, b} plus base-2/4 addition.

Each problem ships two independent pieces of ground truth:

* an incremental labeler (counters / flags, written without reference to any
  transition table) that assigns an output class to every stream position;
* a hand-coded minimal DFA (or 2-state carry transducer for addition).

Tests cross-check the two exhaustively on short strings.

Streams are continuous symbol sequences where ``$`` separates individual
strings; the target at each position refers to the substring read since the
last ``$``, and the target emitted at ``$`` itself is the class of the empty
string (for addition: the pending carry).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .automata import Dfa

SEPARATOR = "$"

GRAMMAR_PROBLEMS = (
    "parity",
    "bxa",
    "tomita1",
    "tomita2",
    "tomita3",
    "tomita4",
    "tomita5",
    "tomita6",
    "tomita7",
)
ADDITION_PROBLEMS = ("add-base2", "add-base4")
ALL_PROBLEMS = GRAMMAR_PROBLEMS + ADDITION_PROBLEMS


@dataclass(frozen=True)
class Alphabet:
    symbols: tuple[str, ...]

    def __post_init__(self):
        if len(set(self.symbols)) != len(self.symbols):
            raise ValueError("alphabet symbols must be distinct")
        if self.symbols.count(SEPARATOR) != 1:
            raise ValueError("alphabet must contain exactly one separator")

    @property
    def size(self) -> int:
        return len(self.symbols)

    @property
    def separator_index(self) -> int:
        return self.symbols.index(SEPARATOR)

    def index(self, sym: str) -> int:
        return self.symbols.index(sym)


@dataclass
class SymbolStream:
    inputs: np.ndarray  # int64 symbol indices
    targets: np.ndarray  # int64 output classes
    alphabet: Alphabet
    output_classes: int

    def __post_init__(self):
        self.inputs = np.asarray(self.inputs, dtype=np.int64)
        self.targets = np.asarray(self.targets, dtype=np.int64)
        if self.inputs.shape != self.targets.shape:
            raise ValueError("inputs and targets must have equal length")
        if len(self.inputs) and (
            self.inputs.min() < 0 or self.inputs.max() >= self.alphabet.size
        ):
            raise ValueError("input index out of alphabet range")
        if len(self.targets) and (
            self.targets.min() < 0 or self.targets.max() >= self.output_classes
        ):
            raise ValueError("target class out of range")

    def __len__(self) -> int:
        return len(self.inputs)


@dataclass
class GroundTruth:
    name: str
    alphabet: Alphabet
    output_classes: int
    minimal_dfa: Dfa
    _init: Callable[[], object] = field(repr=False)
    _step: Callable[[object, int], tuple[object, int]] = field(repr=False)

    def label_indices(self, indices) -> np.ndarray:
        """Per-position output classes for a sequence of symbol indices."""
        state = self._init()
        out = np.empty(len(indices), dtype=np.int64)
        step = self._step
        for i, x in enumerate(indices):
            state, out[i] = step(state, int(x))
        return out

    def labeler(self, prefix) -> int:
        """Output class at the end of a symbol prefix (string or index sequence)."""
        if isinstance(prefix, str):
            prefix = [self.alphabet.index(ch) for ch in prefix]
        if len(prefix) == 0:
            raise ValueError("labeler needs at least one symbol")
        return int(self.label_indices(prefix)[-1])


# ---------------------------------------------------------------------------
# Grammar labelers.  Each works on (a_idx, b_idx, sep_idx) symbol indices and
# keeps whatever counters it needs; none of them consults a transition table.
# ---------------------------------------------------------------------------

def _grammar_labeler(name: str):
    A, B, S = 0, 1, 2

    if name == "parity":
        def init():
            return 0  # a-count parity

        def step(p, x):
            if x == S:
                return 0, 1
            if x == A:
                p ^= 1
            return p, 1 - p

        return init, step

    if name == "bxa":
        # (first_char, last_char); None before any symbol
        def init():
            return (None, None)

        def step(st, x):
            if x == S:
                return (None, None), 0  # empty string does not end with a
            first, _ = st
            ch = "a" if x == A else "b"
            if first is None:
                first = ch
            st = (first, ch)
            return st, int(first == "b" and ch == "a")

        return init, step

    if name == "tomita1":
        def init():
            return False  # seen a b?

        def step(seen_b, x):
            if x == S:
                return False, 1
            if x == B:
                seen_b = True
            return seen_b, 0 if seen_b else 1

        return init, step

    if name == "tomita2":
        # (expecting, dead): expecting 'a' at even positions of an (ab)* string
        def init():
            return (A, False)

        def step(st, x):
            if x == S:
                return (A, False), 1
            expecting, dead = st
            if dead or x != expecting:
                return (A, True), 0
            expecting = B if expecting == A else A
            return (expecting, False), int(expecting == A)

        return init, step

    if name == "tomita3":
        # run bookkeeping: current run char + length, whether the current b-run
        # follows an odd a-run, and a sticky violation flag
        def init():
            return ("", 0, False, False)

        def step(st, x):
            if x == S:
                return ("", 0, False, False), 1
            ch, run, bad_b, violated = st
            sym = "a" if x == A else "b"
            if sym == ch:
                run += 1
            else:
                if ch == "b" and bad_b and run % 2 == 1:
                    violated = True  # odd b-run after odd a-run just closed
                if sym == "b":
                    bad_b = ch == "a" and run % 2 == 1
                run = 1
                ch = sym
            ok = not violated and not (ch == "b" and bad_b and run % 2 == 1)
            return (ch, run, bad_b, violated), int(ok)

        return init, step

    if name == "tomita4":
        def init():
            return (0, False)  # trailing b count, violated

        def step(st, x):
            if x == S:
                return (0, False), 1
            trail, violated = st
            trail = trail + 1 if x == B else 0
            if trail >= 3:
                violated = True
            return (trail, violated), 0 if violated else 1

        return init, step

    if name == "tomita5":
        def init():
            return (0, 0)  # parities of a- and b-counts

        def step(st, x):
            if x == S:
                return (0, 0), 1
            pa, pb = st
            if x == A:
                pa ^= 1
            else:
                pb ^= 1
            return (pa, pb), int(pa == 0 and pb == 0)

        return init, step

    if name == "tomita6":
        def init():
            return 0  # (#a - #b) mod 3

        def step(d, x):
            if x == S:
                return 0, 1
            d = (d + (1 if x == A else -1)) % 3
            return d, int(d == 0)

        return init, step

    if name == "tomita7":
        # b* a* b* a* phases 0..3, phase 4 = dead
        def init():
            return 0

        def step(phase, x):
            if x == S:
                return 0, 1
            if phase == 4:
                return 4, 0
            if x == A:
                phase = {0: 1, 1: 1, 2: 3, 3: 3}[phase]
            else:
                phase = {0: 0, 1: 2, 2: 2, 3: 4}[phase]
            return phase, int(phase != 4)

        return init, step

    raise ValueError(f"unknown grammar problem: {name!r}")


# ---------------------------------------------------------------------------
# Hand-coded minimal ground-truth automata.
# ---------------------------------------------------------------------------

def _grammar_dfa(name: str) -> Dfa:
    syms = ("a", "b", "$")

    def dfa(trans, labels, initial=0):
        return Dfa(syms, trans, initial, state_labels=labels)

    if name == "parity":
        return dfa([[1, 0, 0], [0, 1, 0]], [1, 0])
    if name == "bxa":
        # 0 empty, 1 dead (started with a), 2 started b last b, 3 started b last a
        return dfa(
            [[1, 2, 0], [1, 1, 0], [3, 2, 0], [3, 2, 0]],
            [0, 0, 0, 1],
        )
    if name == "tomita1":
        return dfa([[0, 1, 0], [1, 1, 0]], [1, 0])
    if name == "tomita2":
        # 0 complete (ab)*, 1 dangling a, 2 dead
        return dfa([[1, 2, 0], [2, 0, 0], [2, 2, 0]], [1, 0, 0])
    if name == "tomita3":
        # 0 safe, 1 odd a-run, 2 odd b-run after odd a-run, 3 even b-run after
        # odd a-run, 4 dead
        return dfa(
            [
                [1, 0, 0],
                [0, 2, 0],
                [4, 3, 0],
                [1, 2, 0],
                [4, 4, 0],
            ],
            [1, 1, 0, 1, 0],
        )
    if name == "tomita4":
        # trailing-b count 0..2, then dead
        return dfa(
            [[0, 1, 0], [0, 2, 0], [0, 3, 0], [3, 3, 0]],
            [1, 1, 1, 0],
        )
    if name == "tomita5":
        # state = 2*parity(a) + parity(b)
        return dfa(
            [[2, 1, 0], [3, 0, 0], [0, 3, 0], [1, 2, 0]],
            [1, 0, 0, 0],
        )
    if name == "tomita6":
        # state = (#a - #b) mod 3
        return dfa([[1, 2, 0], [2, 0, 0], [0, 1, 0]], [1, 0, 0])
    if name == "tomita7":
        # phases of b* a* b* a*, state 4 dead
        return dfa(
            [
                [1, 0, 0],
                [1, 2, 0],
                [3, 2, 0],
                [3, 4, 0],
                [4, 4, 0],
            ],
            [1, 1, 1, 1, 0],
        )
    raise ValueError(f"unknown grammar problem: {name!r}")


def _addition_alphabet(base: int) -> Alphabet:
    pairs = tuple(f"{d1}{d2}" for d1 in range(base) for d2 in range(base))
    return Alphabet(pairs + (SEPARATOR,))


def _addition_labeler(base: int):
    sep = base * base

    def init():
        return 0  # carry

    def step(carry, x):
        if x == sep:
            return 0, carry
        d1, d2 = divmod(x, base)
        total = d1 + d2 + carry
        return total // base, total % base

    return init, step


def _addition_dfa(base: int) -> Dfa:
    """2-state carry transducer; symbol order matches _addition_alphabet."""
    alpha = _addition_alphabet(base)
    trans = []
    outs = []
    for carry in (0, 1):
        row_t, row_o = [], []
        for sym in alpha.symbols:
            if sym == SEPARATOR:
                row_t.append(0)
                row_o.append(carry)
            else:
                total = int(sym[0]) + int(sym[1]) + carry
                row_t.append(total // base)
                row_o.append(total % base)
        trans.append(row_t)
        outs.append(row_o)
    return Dfa(alpha.symbols, trans, 0, trans_labels=outs)


def make_problem(name: str) -> GroundTruth:
    """Ground truth (labeler + minimal automaton) for a benchmark problem."""
    if name in GRAMMAR_PROBLEMS:
        init, step = _grammar_labeler(name)
        return GroundTruth(
            name=name,
            alphabet=Alphabet(("a", "b", "$")),
            output_classes=2,
            minimal_dfa=_grammar_dfa(name),
            _init=init,
            _step=step,
        )
    if name in ADDITION_PROBLEMS:
        base = int(name.rsplit("base", 1)[1])
        init, step = _addition_labeler(base)
        return GroundTruth(
            name=name,
            alphabet=_addition_alphabet(base),
            output_classes=base,
            minimal_dfa=_addition_dfa(base),
            _init=init,
            _step=step,
        )
    raise ValueError(f"unknown problem: {name!r} (expected one of {ALL_PROBLEMS})")


# ---------------------------------------------------------------------------
# Stream generation.
# ---------------------------------------------------------------------------

SEPARATOR_PROB = 1.0 / 16.0  # density of $ in random streams; not specified upstream


def _accept_reach_table(dfa: Dfa, sep: int, max_len: int) -> np.ndarray:
    """reach[k][s]: an accepting state is exactly k non-separator steps from s."""
    trans = np.asarray(dfa.transitions)
    plain = [x for x in range(dfa.n_symbols) if x != sep]
    reach = np.zeros((max_len + 1, dfa.n_states), dtype=bool)
    reach[0] = np.asarray(dfa.state_labels, dtype=bool)
    for k in range(1, max_len + 1):
        for x in plain:
            reach[k] |= reach[k - 1][trans[:, x]]
    return reach


def _positive_segment(dfa: Dfa, sep: int, reach: np.ndarray, cap: int, rng) -> list[int]:
    """A uniform-ish random string accepted by the DFA, of length 1..cap."""
    trans = dfa.transitions
    state = trans[dfa.initial][sep]
    lengths = [k for k in range(1, cap + 1) if reach[k][state]]
    if not lengths:
        raise ValueError("language has no nonempty string within the segment cap")
    length = int(rng.choice(lengths))
    out = []
    for remaining in range(length, 0, -1):
        options = [
            x for x in range(dfa.n_symbols)
            if x != sep and reach[remaining - 1][trans[state][x]]
        ]
        x = int(options[rng.integers(len(options))])
        out.append(x)
        state = trans[state][x]
    return out


def generate_stream(
    gt: GroundTruth,
    n_symbols: int,
    max_segment: int = 100,
    rng_seed: int = 0,
    positive_frac: float = 0.0,
) -> SymbolStream:
    """Random symbol stream starting with ``$``, segments capped at max_segment.

    positive_frac, when nonzero, is the probability that a segment is drawn
    as a string accepted by the ground-truth DFA (via a walk constrained by
    an exact-length reachability table) instead of uniformly at random.
    Languages whose accepting strings are rare under the uniform measure
    otherwise give the trainer almost no signal on the accepting states.
    The default leaves the stream fully uniform.
    """
    if n_symbols < 1:
        raise ValueError("n_symbols must be >= 1")
    if max_segment < 1:
        raise ValueError("max_segment must be >= 1")
    if not 0.0 <= positive_frac <= 1.0:
        raise ValueError("positive_frac must be in [0, 1]")
    if positive_frac and gt.minimal_dfa.is_transducer:
        raise ValueError("positive_frac requires an acceptor ground truth")
    rng = np.random.default_rng(rng_seed)
    sep = gt.alphabet.separator_index
    n_plain = gt.alphabet.size - 1
    inputs = np.empty(n_symbols, dtype=np.int64)
    inputs[0] = sep
    if positive_frac == 0.0:
        seg = 0
        for i in range(1, n_symbols):
            if seg >= max_segment or rng.random() < SEPARATOR_PROB:
                inputs[i] = sep
                seg = 0
            else:
                x = rng.integers(n_plain)
                inputs[i] = x if x < sep else x + 1
                seg += 1
    else:
        reach = _accept_reach_table(gt.minimal_dfa, sep, max_segment)
        i = 1
        while i < n_symbols:
            if rng.random() < positive_frac:
                for x in _positive_segment(gt.minimal_dfa, sep, reach, max_segment, rng):
                    if i >= n_symbols:
                        break
                    inputs[i] = x
                    i += 1
            else:
                seg = 0
                while i < n_symbols and seg < max_segment:
                    if rng.random() < SEPARATOR_PROB:
                        break
                    x = rng.integers(n_plain)
                    inputs[i] = x if x < sep else x + 1
                    i += 1
                    seg += 1
            if i < n_symbols:
                inputs[i] = sep
                i += 1
    targets = gt.label_indices(inputs)
    return SymbolStream(inputs, targets, gt.alphabet, gt.output_classes)


def generate_long_string(gt: GroundTruth, n_symbols: int, rng_seed: int = 0) -> SymbolStream:
    """One very long string: ``$`` in the first position only, then random symbols."""
    if n_symbols < 2:
        raise ValueError("n_symbols must be >= 2")
    rng = np.random.default_rng(rng_seed)
    sep = gt.alphabet.separator_index
    n_plain = gt.alphabet.size - 1
    body = rng.integers(n_plain, size=n_symbols - 1)
    body[body >= sep] += 1
    inputs = np.concatenate(([sep], body))
    targets = gt.label_indices(inputs)
    return SymbolStream(inputs, targets, gt.alphabet, gt.output_classes)


# ---------------------------------------------------------------------------
# Serialization.
# ---------------------------------------------------------------------------

def stream_to_text(stream: SymbolStream) -> str:
    """Two-column text form: header, then one ``token class`` line per position."""
    lines = [
        "# rnn2dfa-stream v1",
        "symbols " + " ".join(stream.alphabet.symbols),
        f"classes {stream.output_classes}",
    ]
    syms = stream.alphabet.symbols
    for x, t in zip(stream.inputs, stream.targets):
        lines.append(f"{syms[x]} {t}")
    return "\n".join(lines) + "\n"


def stream_from_text(text: str) -> SymbolStream:
    lines = text.splitlines()
    if not lines or lines[0].strip() != "# rnn2dfa-stream v1":
        raise ValueError("not a rnn2dfa stream file")
    symbols = tuple(lines[1].split()[1:])
    classes = int(lines[2].split()[1])
    alphabet = Alphabet(symbols)
    index = {s: i for i, s in enumerate(symbols)}
    inputs, targets = [], []
    for line in lines[3:]:
        if not line.strip():
            continue
        tok, cls = line.split()
        inputs.append(index[tok])
        targets.append(int(cls))
    return SymbolStream(np.array(inputs), np.array(targets), alphabet, classes)


def compact_to_indices(gt: GroundTruth, *input_lines: str) -> np.ndarray:
    """Symbol indices from the compact printed form.

    Grammars take one line; addition takes the two aligned digit lines, where
    ``$`` must appear at the same positions in both.
    """
    if gt.name in GRAMMAR_PROBLEMS:
        (line,) = input_lines
        return np.array([gt.alphabet.index(ch) for ch in line], dtype=np.int64)
    line1, line2 = input_lines
    if len(line1) != len(line2):
        raise ValueError("addition input lines must be aligned")
    out = np.empty(len(line1), dtype=np.int64)
    for i, (c1, c2) in enumerate(zip(line1, line2)):
        if (c1 == SEPARATOR) != (c2 == SEPARATOR):
            raise ValueError(f"misaligned separator at position {i}")
        tok = SEPARATOR if c1 == SEPARATOR else c1 + c2
        out[i] = gt.alphabet.index(tok)
    return out


def indices_to_compact(gt: GroundTruth, indices) -> list[str]:
    """Inverse of compact_to_indices: input line(s) in the printed form."""
    syms = [gt.alphabet.symbols[int(x)] for x in indices]
    if gt.name in GRAMMAR_PROBLEMS:
        return ["".join(syms)]
    l1 = "".join(s if s == SEPARATOR else s[0] for s in syms)
    l2 = "".join(s if s == SEPARATOR else s[1] for s in syms)
    return [l1, l2]


def targets_to_compact(stream: SymbolStream) -> str:
    return "".join(str(int(t)) for t in stream.targets)
